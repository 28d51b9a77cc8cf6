//! Geometry and oracle invariants, run against swappable kernels so a broken
//! kernel can be shown to fail.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use hyperwalk::delaunay::build_local;
use hyperwalk::geom::{self, Isometry};
use hyperwalk::oracle::{horofunction_limit, naive_delaunay, OracleReport};
use hyperwalk::{Boundary, GeomError, Mobius, Point};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The functions under test.
#[derive(Clone, Copy)]
pub struct Kernel {
    pub busemann: fn(Boundary, Point) -> f64,
    pub dist: fn(Point, Point) -> f64,
    pub cone_angle: fn(f64) -> Result<f64, GeomError>,
    pub half_plane_dist: fn(Complex64, Complex64) -> f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            busemann: geom::busemann,
            dist: geom::dist,
            cone_angle: geom::cone_angle,
            half_plane_dist: geom::half_plane_dist,
        }
    }
}

fn flipped_busemann(xi: Boundary, z: Point) -> f64 {
    -geom::busemann(xi, z)
}

impl Kernel {
    /// A named defect, for checking that the suite notices it.
    pub fn injected(name: &str) -> Option<Self> {
        match name {
            "busemann-sign" => Some(Self { busemann: flipped_busemann, ..Self::default() }),
            _ => None,
        }
    }

    fn f_level(&self, xi: Boundary, z: Point) -> f64 {
        (self.busemann)(xi, z) + (self.dist)(Point::origin(), z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&Kernel, &mut ChaCha8Rng) -> Result<(), String>;

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol * want.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

fn random_point(rng: &mut impl Rng, max_r: f64) -> Point {
    geom::exp_ray(rng.random::<f64>() * TAU, rng.random::<f64>() * max_r).expect("nonnegative")
}

fn busemann_normalization(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let th = rng.random::<f64>() * TAU;
        let xi = Boundary::new(th);
        close("at origin", (k.busemann)(xi, Point::origin()), 0.0, 1e-12)?;
        for t in [0.2, 3.0, 12.0] {
            close("along ray toward xi", (k.busemann)(xi, geom::exp_ray(th, t).unwrap()), t, 1e-10)?;
        }
    }
    Ok(())
}

fn busemann_horofunction_limit(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let th = rng.random::<f64>() * TAU;
        let z = random_point(rng, 6.0);
        close("limit of d(x_t, o) - d(x_t, z)", (k.busemann)(Boundary::new(th), z), horofunction_limit(th, z, 60.0), 1e-8)?;
    }
    Ok(())
}

fn busemann_lipschitz(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..500 {
        let xi = Boundary::new(rng.random::<f64>() * TAU);
        let (x, y) = (random_point(rng, 8.0), random_point(rng, 8.0));
        let gap = ((k.busemann)(xi, x) - (k.busemann)(xi, y)).abs();
        if gap > (k.dist)(x, y) + 1e-9 {
            return Err(format!("|B(x) - B(y)| = {gap} exceeds d(x, y)"));
        }
    }
    Ok(())
}

fn f_level_rays(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let th = rng.random::<f64>() * TAU;
        let xi = Boundary::new(th);
        for t in [0.3, 2.0, 9.0] {
            close("toward xi", k.f_level(xi, geom::exp_ray(th, t).unwrap()), 2.0 * t, 1e-9)?;
            close("away from xi", k.f_level(xi, geom::exp_ray(th + PI, t).unwrap()), 0.0, 1e-9)?;
        }
    }
    Ok(())
}

fn f_level_ellipse(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    // boundary point ∞ of the half-plane is 1 in the disk
    let xi = Boundary::new(0.0);
    let i = Complex64::new(0.0, 1.0);
    for _ in 0..300 {
        let z = Complex64::new(rng.random_range(-20.0..20.0), rng.random_range(-4.0f64..4.0).exp());
        let want = 2.0 * (((z - i).norm() + (z + i).norm()) / 2.0).ln();
        close("2 log((|z-i| + |z+i|)/2)", k.f_level(xi, geom::cayley(z).unwrap()), want, 1e-9)?;
    }
    Ok(())
}

fn cone_contains_superlevel_sets(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    close("cone_angle(log 2)", (k.cone_angle)(2f64.ln()).map_err(|e| e.to_string())?, FRAC_PI_2, 1e-12)?;
    // the half-plane point x_r = √(e^r − 1) sits on the level set f = r
    let xi = Boundary::new(0.0);
    for r in [0.5f64, 1.0, 3.0, 7.0] {
        let xr = r.exp_m1().sqrt();
        close("level of x_r", k.f_level(xi, geom::cayley(Complex64::new(xr, 1e-9)).unwrap()), r, 1e-6)?;
    }
    for _ in 0..2000 {
        let th = rng.random::<f64>() * TAU;
        let z = random_point(rng, 10.0);
        let r = rng.random_range(0.05..6.0);
        if k.f_level(Boundary::new(th), z) > r {
            let a = (k.cone_angle)(r).map_err(|e| e.to_string())?;
            if geom::angular_distance(z.angle(), th) > a + 1e-9 {
                return Err(format!("point with f > {r} outside cone of half-angle {a}"));
            }
        }
    }
    Ok(())
}

fn half_plane_matches_disk(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..500 {
        let (p, q) = (random_point(rng, 10.0), random_point(rng, 10.0));
        let d = (k.dist)(p, q);
        close("half-plane vs disk", (k.half_plane_dist)(geom::cayley_inverse(p), geom::cayley_inverse(q)), d, 1e-8)?;
    }
    Ok(())
}

fn distance_is_a_metric(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..500 {
        let (x, y, z) = (random_point(rng, 12.0), random_point(rng, 12.0), random_point(rng, 12.0));
        let (xy, yz, xz) = ((k.dist)(x, y), (k.dist)(y, z), (k.dist)(x, z));
        if xz > xy + yz + 1e-9 * (xy + yz).max(1.0) {
            return Err(format!("triangle inequality: {xz} > {xy} + {yz}"));
        }
        close("symmetry", (k.dist)(y, x), xy, 1e-12)?;
        let g: Mobius = Isometry::translation_to(random_point(rng, 4.0)).compose(&Isometry::rotation(rng.random::<f64>() * TAU));
        close("isometry invariance", (k.dist)(g.apply(x), g.apply(y)), xy, 1e-8)?;
    }
    Ok(())
}

fn ball_intersection(k: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for &d in &[8.0, 12.0, 20.0] {
        for _ in 0..300 {
            let th = rng.random::<f64>() * TAU;
            let g: Mobius = Isometry::translation_to(random_point(rng, 2.0)).compose(&Isometry::rotation(th));
            let (p, q) = (g.apply(geom::exp_ray(0.0, d / 2.0).unwrap()), g.apply(geom::exp_ray(PI, d / 2.0).unwrap()));
            let m = geom::midpoint(p, q);
            let rad = geom::ball_intersection_radius(p, q);
            // a disk through p and q: center on the bisector at signed offset s
            let s: f64 = rng.random_range(-15.0..15.0);
            let c = g.apply(geom::exp_ray(FRAC_PI_2.copysign(s), s.abs()).unwrap());
            let big = (k.dist)(c, p);
            let probe = Isometry::translation_to(m).apply(geom::exp_ray(rng.random::<f64>() * TAU, rad).unwrap());
            if (k.dist)(c, probe) > big + 1e-7 * big.max(1.0) {
                return Err(format!("ball of radius {rad} about the midpoint leaves a disk through p, q at d = {d}"));
            }
        }
    }
    Ok(())
}

fn delaunay_matches_oracle(_: &Kernel, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for inst in 0..20 {
        let total = 5f64.cosh() - 1.0;
        let pts: Vec<Point> = (0..30)
            .map(|_| geom::exp_ray(rng.random::<f64>() * TAU, (1.0 + rng.random::<f64>() * total).acosh()).unwrap())
            .collect();
        let oracle = naive_delaunay(&pts).map_err(|e| e.to_string())?;
        let report = OracleReport::compare(format!("instance {inst}"), &oracle, &build_local(&pts, 5.0, 0.5).edges());
        if !report.agree && !report.explained {
            return Err(report.to_text());
        }
    }
    Ok(())
}

pub const CHECKS: &[(&str, Check)] = &[
    ("busemann_normalization", busemann_normalization),
    ("busemann_horofunction_limit", busemann_horofunction_limit),
    ("busemann_lipschitz", busemann_lipschitz),
    ("f_level_rays", f_level_rays),
    ("f_level_ellipse", f_level_ellipse),
    ("cone_contains_superlevel_sets", cone_contains_superlevel_sets),
    ("half_plane_matches_disk", half_plane_matches_disk),
    ("distance_is_a_metric", distance_is_a_metric),
    ("ball_intersection", ball_intersection),
    ("delaunay_matches_oracle", delaunay_matches_oracle),
];

/// Runs every check with its own fixed-seed stream.
pub fn run(kernel: &Kernel) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57 + i as u64);
            match check(kernel, &mut rng) {
                Ok(()) => CheckResult { name, passed: true, detail: String::new() },
                Err(detail) => CheckResult { name, passed: false, detail },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_kernel_passes() {
        let failed: Vec<_> = run(&Kernel::default()).into_iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn sign_flip_is_caught_by_name() {
        let res = run(&Kernel::injected("busemann-sign").unwrap());
        let failed: Vec<&str> = res.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        assert!(failed.contains(&"busemann_normalization"));
        assert!(failed.contains(&"f_level_rays"));
        assert!(Kernel::injected("nothing").is_none());
    }
}
