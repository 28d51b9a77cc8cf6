//! Hyperbolic plane kernel in the Poincaré disk (curvature −1).
//!
//! Everything here is generic over the scalar type; the crate root exposes
//! `f64` aliases used by the simulation modules. The half-plane model only
//! appears through the Cayley bridge `z ↦ (z − i)/(z + i)`, which sends the
//! half-plane base point `i` to the disk origin `o`.

use std::fmt::Debug;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

use crate::error::GeomError;

/// Floating point scalar usable by the geometry kernel.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A point of the open unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ModelPoint<T> {
    re: T,
    im: T,
}

impl<T: Scalar> ModelPoint<T> {
    pub fn new(re: T, im: T) -> Result<Self, GeomError> {
        let r2 = re * re + im * im;
        if !(r2 < T::one()) {
            return Err(GeomError::OutsideDisk {
                re: re.to_f64().unwrap_or(f64::NAN),
                im: im.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { re, im })
    }

    pub fn origin() -> Self {
        Self { re: T::zero(), im: T::zero() }
    }

    /// Skips validation; callers guarantee `|z| < 1`.
    pub(crate) fn new_unchecked(re: T, im: T) -> Self {
        debug_assert!(re * re + im * im < T::one() || re.is_nan());
        Self { re, im }
    }

    pub fn from_complex(z: Complex<T>) -> Result<Self, GeomError> {
        Self::new(z.re, z.im)
    }

    pub fn re(&self) -> T {
        self.re
    }

    pub fn im(&self) -> T {
        self.im
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }

    pub fn norm_sqr(&self) -> T {
        self.re * self.re + self.im * self.im
    }

    /// Angle of the point seen from `o`, in `[0, 2π)`. Zero at `o`.
    pub fn angle(&self) -> T {
        normalize_angle(self.im.atan2(self.re))
    }
}

/// Orientation-preserving isometry `z ↦ (a z + b)/(b̄ z + ā)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry<T> {
    a: Complex<T>,
    b: Complex<T>,
}

impl<T: Scalar> Isometry<T> {
    pub fn identity() -> Self {
        Self { a: Complex::new(T::one(), T::zero()), b: Complex::new(T::zero(), T::zero()) }
    }

    /// Normalizes `(a, b)` to `|a|² − |b|² = 1`.
    pub fn from_coefficients(a: Complex<T>, b: Complex<T>) -> Result<Self, GeomError> {
        let det = a.norm_sqr() - b.norm_sqr();
        if !(det > T::zero()) {
            return Err(GeomError::NotAnIsometry);
        }
        let s = det.sqrt();
        Ok(Self { a: a / s, b: b / s })
    }

    /// Coefficients as stored. No renormalization.
    pub(crate) fn from_raw(a: Complex<T>, b: Complex<T>) -> Self {
        Self { a, b }
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    pub fn b(&self) -> Complex<T> {
        self.b
    }

    /// Rotation about `o` by `phi`.
    pub fn rotation(phi: T) -> Self {
        let half = phi / T::lit(2.0);
        Self { a: Complex::new(half.cos(), half.sin()), b: Complex::new(T::zero(), T::zero()) }
    }

    /// Translation by `t` along the real diameter.
    pub fn translation(t: T) -> Self {
        let half = t / T::lit(2.0);
        Self { a: Complex::new(half.cosh(), T::zero()), b: Complex::new(half.sinh(), T::zero()) }
    }

    /// Translation along the geodesic through `o` and `x`, sending `o` to `x`.
    pub fn translation_to(x: ModelPoint<T>) -> Self {
        let s = (T::one() - x.norm_sqr()).sqrt().recip();
        Self { a: Complex::new(s, T::zero()), b: x.to_complex() * s }
    }

    pub fn apply(&self, z: ModelPoint<T>) -> ModelPoint<T> {
        let z = z.to_complex();
        let w = (self.a * z + self.b) / (self.b.conj() * z + self.a.conj());
        clamp_into_disk(w)
    }

    pub fn apply_complex(&self, z: Complex<T>) -> Complex<T> {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// `self ∘ other`, renormalized.
    pub fn compose(&self, other: &Self) -> Self {
        let raw = self.compose_raw(other);
        let det = raw.a.norm_sqr() - raw.b.norm_sqr();
        if det > T::zero() {
            let s = det.sqrt();
            Self { a: raw.a / s, b: raw.b / s }
        } else {
            raw
        }
    }

    /// `self ∘ other` without renormalization.
    pub fn compose_raw(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.a.conj(), b: -self.b }
    }

    /// Image of the origin.
    pub fn origin_image(&self) -> ModelPoint<T> {
        clamp_into_disk(self.b / self.a.conj())
    }

    /// Distance moved by the origin, assuming unit determinant.
    pub fn displacement(&self) -> T {
        T::lit(2.0) * self.b.norm().asinh()
    }

    pub fn determinant(&self) -> T {
        self.a.norm_sqr() - self.b.norm_sqr()
    }
}

fn clamp_into_disk<T: Scalar>(w: Complex<T>) -> ModelPoint<T> {
    let r2 = w.norm_sqr();
    if r2 < T::one() {
        ModelPoint::new_unchecked(w.re, w.im)
    } else {
        // Rounding pushed the image onto the circle; pull it back by one ulp-ish step.
        let s = (T::one() - T::epsilon()) / r2.sqrt();
        ModelPoint::new_unchecked(w.re * s, w.im * s)
    }
}

/// A point of the boundary circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint<T> {
    theta: T,
}

impl<T: Scalar> BoundaryPoint<T> {
    pub fn new(theta: T) -> Self {
        Self { theta: normalize_angle(theta) }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::new(self.theta.cos(), self.theta.sin())
    }
}

pub fn normalize_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let mut t = theta % tau;
    if t < T::zero() {
        t = t + tau;
    }
    if t >= tau {
        t = t - tau;
    }
    t
}

/// Distance between two boundary angles along the circle, in `[0, π]`.
pub fn angular_distance<T: Scalar>(a: T, b: T) -> T {
    let d = normalize_angle(a - b);
    d.min(T::TAU() - d)
}

/// Hyperbolic distance. Uses `2·asinh(|p−q| / √((1−|p|²)(1−|q|²)))`, which
/// stays finite and accurate for arguments far beyond where `acosh` of the
/// naive form would overflow.
pub fn dist<T: Scalar>(p: ModelPoint<T>, q: ModelPoint<T>) -> T {
    let diff = (p.to_complex() - q.to_complex()).norm();
    if diff == T::zero() {
        return T::zero();
    }
    let denom = ((T::one() - p.norm_sqr()) * (T::one() - q.norm_sqr())).sqrt();
    T::lit(2.0) * (diff / denom).asinh()
}

/// Geodesic symmetry at the midpoint of `o` and `x`; swaps the two points.
pub fn central_symmetry<T: Scalar>(x: ModelPoint<T>) -> Isometry<T> {
    Isometry::translation_to(x).compose_raw(&Isometry::rotation(T::PI()))
}

/// Point at distance `t` from `o` in direction `theta`.
pub fn exp_ray<T: Scalar>(theta: T, t: T) -> Result<ModelPoint<T>, GeomError> {
    if t < T::zero() {
        return Err(GeomError::NegativeLength(t.to_f64().unwrap_or(f64::NAN)));
    }
    let r = (t / T::lit(2.0)).tanh();
    Ok(clamp_into_disk(Complex::new(r * theta.cos(), r * theta.sin())))
}

/// Busemann function of the boundary point, normalized to vanish at `o` and
/// to increase along the ray toward `xi`.
pub fn busemann<T: Scalar>(xi: BoundaryPoint<T>, z: ModelPoint<T>) -> T {
    let num = T::one() - z.norm_sqr();
    let den = (z.to_complex() - xi.to_complex()).norm_sqr();
    (num / den).ln()
}

/// `busemann(xi, z) + dist(o, z)`; zero exactly on the ray away from `xi`.
pub fn f_level<T: Scalar>(xi: BoundaryPoint<T>, z: ModelPoint<T>) -> T {
    busemann(xi, z) + dist(ModelPoint::origin(), z)
}

/// Half-aperture of the cone about the ray toward `xi` containing every
/// point where `f_level` exceeds `r`.
pub fn cone_angle<T: Scalar>(r: T) -> Result<T, GeomError> {
    if !(r > T::zero()) {
        return Err(GeomError::NonPositiveRadius(r.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(T::lit(2.0) * r.exp_m1().sqrt().recip().atan())
}

/// Slack subtracted from half the separation; a sufficient constant.
pub const BALL_INTERSECTION_SLACK: f64 = 3.0;

/// Radius of a ball about the midpoint of `p` and `q` contained in every disk
/// having both points on its boundary. Zero when the pair is too close.
pub fn ball_intersection_radius<T: Scalar>(p: ModelPoint<T>, q: ModelPoint<T>) -> T {
    let half = dist(p, q) / T::lit(2.0);
    (half - T::lit(BALL_INTERSECTION_SLACK)).max(T::zero())
}

/// Hyperbolic midpoint of the geodesic segment `[p, q]`.
pub fn midpoint<T: Scalar>(p: ModelPoint<T>, q: ModelPoint<T>) -> ModelPoint<T> {
    let to_p = Isometry::translation_to(p);
    let q_local = to_p.inverse().apply(q);
    let d = dist(ModelPoint::origin(), q_local);
    let theta = q_local.angle();
    let m = exp_ray(theta, d / T::lit(2.0)).expect("half of a distance is nonnegative");
    to_p.apply(m)
}

/// Cayley map from the upper half-plane to the disk, `i ↦ o`.
pub fn cayley<T: Scalar>(z: Complex<T>) -> Result<ModelPoint<T>, GeomError> {
    if !(z.im > T::zero()) {
        return Err(GeomError::OutsideHalfPlane);
    }
    let i = Complex::new(T::zero(), T::one());
    Ok(clamp_into_disk((z - i) / (z + i)))
}

/// Inverse Cayley map from the disk to the upper half-plane.
pub fn cayley_inverse<T: Scalar>(w: ModelPoint<T>) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let one = Complex::new(T::one(), T::zero());
    let w = w.to_complex();
    i * (one + w) / (one - w)
}

/// Distance in the upper half-plane model.
pub fn half_plane_dist<T: Scalar>(z: Complex<T>, w: Complex<T>) -> T {
    let num = (z - w.conj()).norm() + (z - w).norm();
    T::lit(2.0) * (num / (T::lit(2.0) * (z.im * w.im).sqrt())).ln()
}

/// Area of the unit sphere `S^n`.
fn sphere_area(n: u32) -> f64 {
    match n {
        0 => 2.0,
        1 => std::f64::consts::TAU,
        _ => std::f64::consts::TAU * sphere_area(n - 2) / (n as f64 - 1.0),
    }
}

/// Ball volume profile of `H^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VolumeProfile {
    dim: u32,
}

impl VolumeProfile {
    pub fn new(dim: u32) -> Result<Self, GeomError> {
        if dim < 2 {
            return Err(GeomError::Dimension(dim));
        }
        Ok(Self { dim })
    }

    pub fn plane() -> Self {
        Self { dim: 2 }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// `V(r)`; zero for negative `r`.
    pub fn volume<T: Scalar>(&self, r: T) -> T {
        if !(r > T::zero()) {
            return T::zero();
        }
        if self.dim == 2 {
            let half = (r / T::lit(2.0)).sinh();
            return T::TAU() * T::lit(2.0) * half * half;
        }
        self.log_volume(r).exp()
    }

    /// `v(r) = V'(r)`.
    pub fn density<T: Scalar>(&self, r: T) -> T {
        if r < T::zero() {
            return T::zero();
        }
        let n = self.dim - 1;
        T::lit(sphere_area(n)) * r.sinh().powi(n as i32)
    }

    /// `log V(r)`, accurate for `r` up to the thousands.
    pub fn log_volume<T: Scalar>(&self, r: T) -> T {
        if !(r > T::zero()) {
            return T::neg_infinity();
        }
        let n = self.dim - 1;
        let area = T::lit(sphere_area(n)).ln();
        if self.dim == 2 {
            // 2π(cosh r − 1) = 4π sinh²(r/2)
            return area + T::lit(2.0).ln() + T::lit(2.0) * log_sinh(r / T::lit(2.0));
        }
        area + log_sinh_power_integral(n, r.to_f64().unwrap_or(f64::NAN))
            .map(T::lit)
            .unwrap_or(T::nan())
    }

    pub fn log_density<T: Scalar>(&self, r: T) -> T {
        if !(r > T::zero()) {
            return T::neg_infinity();
        }
        let n = self.dim - 1;
        T::lit(sphere_area(n)).ln() + T::lit(n as f64) * log_sinh(r)
    }

    /// Typical neighbor distance `(2/(dim−1))·log(1/λ)` at intensity `λ`.
    pub fn neighbor_radius(&self, lambda: f64) -> f64 {
        2.0 / (self.dim as f64 - 1.0) * lambda.recip().ln()
    }
}

fn log_sinh<T: Scalar>(x: T) -> T {
    if x > T::lit(20.0) {
        x - T::LN_2() + (-(T::lit(-2.0) * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `log ∫₀^r sinh(s)^n ds` by composite Gauss–Legendre on the integrand
/// rescaled by `e^{−n r}`.
fn log_sinh_power_integral(n: u32, r: f64) -> Option<f64> {
    const NODES: [(f64, f64); 8] = [
        (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
        (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    ];
    if !(r > 0.0) {
        return None;
    }
    let nf = n as f64;
    // sinh(s)^n e^{−n r} = (e^{s−r}(1 − e^{−2s})/2)^n
    let f = |s: f64| (nf * ((s - r) + (-(-2.0 * s).exp()).ln_1p() - std::f64::consts::LN_2)).exp();
    let width = (1.0 / nf).min(0.25);
    let panels = (r / width).ceil().max(1.0) as usize;
    let h = r / panels as f64;
    let mut total = 0.0;
    // Walk from the top end, where the mass is.
    for k in 0..panels {
        let hi = r - k as f64 * h;
        let lo = hi - h;
        let mid = 0.5 * (lo + hi);
        let mut acc = 0.0;
        for (x, w) in NODES {
            acc += w * f(mid + 0.5 * h * x);
        }
        let panel = 0.5 * h * acc;
        total += panel;
        if panel < total * 1e-18 {
            break;
        }
    }
    Some(total.ln() + nf * r)
}
