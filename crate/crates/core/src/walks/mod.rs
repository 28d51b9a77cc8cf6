//! Walk families as isometry-composition processes.
//!
//! Group-type walks (right-angled, tessellation) keep the product of their
//! steps in a [`Frame`]; the Poisson-Delaunay walk re-roots at every vertex
//! and reads distances off the field's tile coordinates. Matrix products live
//! in [`matrix`].

pub mod matrix;
mod pd;

pub use pd::{pd_entropies, pd_walk, PdOptions};

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::error::WalkError;
use crate::geom::normalize_angle;
use crate::oracle::asinh_exp;
use crate::Mobius;

/// An isometry stored as `e^s·(a, b)` with `max(|a|, |b|) = 1`, so products
/// of arbitrarily many steps stay in range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    a: Complex64,
    b: Complex64,
    log_scale: f64,
}

impl Frame {
    pub fn identity() -> Self {
        Self::from_isometry(&Mobius::identity())
    }

    pub fn from_isometry(g: &Mobius) -> Self {
        Self { a: g.a(), b: g.b(), log_scale: 0.0 }.renormalized()
    }

    fn renormalized(self) -> Self {
        let m = self.a.norm().max(self.b.norm());
        Self { a: self.a / m, b: self.b / m, log_scale: self.log_scale + m.ln() }
    }

    /// `self ∘ g`.
    pub fn then(&self, g: &Mobius) -> Self {
        let (ga, gb) = (g.a(), g.b());
        Self { a: self.a * ga + self.b * gb.conj(), b: self.a * gb + self.b * ga.conj(), log_scale: self.log_scale }
            .renormalized()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Frame) -> Self {
        Self {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
            log_scale: self.log_scale + other.log_scale,
        }
        .renormalized()
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.a.conj(), b: -self.b, log_scale: self.log_scale }
    }

    /// `d(o, F(o))`.
    pub fn displacement(&self) -> f64 {
        let nb = self.b.norm();
        if nb == 0.0 {
            return 0.0;
        }
        2.0 * asinh_exp(nb.ln() + self.log_scale)
    }

    /// Direction of `F(o)` seen from `o`.
    pub fn angle(&self) -> f64 {
        normalize_angle(self.b.arg() + self.a.arg())
    }

    /// `d(F(o), G(o))`.
    pub fn distance_to(&self, other: &Frame) -> f64 {
        self.inverse().compose(other).displacement()
    }
}

/// `(1/2)·log cosh r`, a lower bound for the right-angled walk speed.
pub fn right_angled_lower_bound(r: f64) -> f64 {
    0.5 * r.cosh().ln()
}

/// Step length at which the right-angled walk runs on a 4-regular tree.
pub fn tree_step() -> f64 {
    2.0 * std::f64::consts::SQRT_2.acosh()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub k: usize,
    /// `d(x₀, x_k)`.
    pub d_ambient: f64,
    /// Graph (or tree) distance from `x₀`; NaN when not measured.
    pub d_graph: f64,
    /// Direction of `x_k` from `x₀`; `None` at `x₀` itself.
    pub theta: Option<f64>,
    /// `d(x_{k−1}, x_k)`; zero at `k = 0`.
    pub step: f64,
    /// Isometry with `x_k = g(o)`.
    pub frame: Frame,
    /// The two distance routes disagreed at this step.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkTrace {
    pub steps: Vec<TraceStep>,
    /// `(d(x₋ᵢ, x₀), d(x₋ᵢ, x₁))` for `i = 1..`.
    pub past: Vec<(f64, f64)>,
    /// Importance weight; `deg(o)` for Poisson-Delaunay walks, else 1.
    pub weight: f64,
    pub valid: bool,
    pub failure: Option<String>,
}

impl WalkTrace {
    fn start() -> Self {
        Self {
            steps: vec![TraceStep { k: 0, d_ambient: 0.0, d_graph: 0.0, theta: None, step: 0.0, frame: Frame::identity(), flagged: false }],
            past: Vec::new(),
            weight: 1.0,
            valid: true,
            failure: None,
        }
    }

    fn push(&mut self, d_ambient: f64, d_graph: f64, frame: Frame, step: f64) {
        let k = self.steps.len();
        let theta = (d_ambient > 0.0).then(|| frame.angle());
        self.steps.push(TraceStep { k, d_ambient, d_graph, theta, step, frame, flagged: false });
    }

    pub fn n(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn last(&self) -> &TraceStep {
        self.steps.last().expect("trace holds x₀")
    }

    /// `|d(x₀,x_{k+1}) − d(x₀,x_k)| ≤ d(x_k,x_{k+1})` at every step.
    pub fn satisfies_triangle_inequality(&self, slack: f64) -> bool {
        self.steps.windows(2).all(|w| (w[1].d_ambient - w[0].d_ambient).abs() <= w[1].step + slack)
    }

    /// One `k d_ambient d_graph theta flag` row per step.
    pub fn export(&self) -> String {
        let mut s = String::from("k d_ambient d_graph theta flag\n");
        for st in &self.steps {
            let theta = st.theta.map_or("nan".to_string(), |t| format!("{t:.16e}"));
            let _ = writeln!(s, "{} {:.16e} {:.16e} {} {}", st.k, st.d_ambient, st.d_graph, theta, u8::from(st.flagged));
        }
        s
    }
}

/// Reduced-word depth of a walk that turns by multiples of a right angle:
/// each vertex has four edges and turning back (`k = 2`) undoes the last
/// move. At the tree step length this is the tree distance to `x₀`.
#[derive(Clone, Debug, Default)]
struct TreeDepth {
    /// For each vertex on the path from `x₀`: position of its parent edge
    /// relative to the edge taken to the child, in quarter turns.
    stack: Vec<u8>,
    /// Parent edge relative to the current heading, if not at `x₀`.
    parent: Option<u8>,
}

impl TreeDepth {
    fn step(&mut self, k: u8) {
        match self.parent {
            Some(p) if p == k => {
                // moving to the parent; arrive facing away from the child edge
                self.parent = self.stack.pop().map(|c| (c + 2) % 4);
            }
            _ => {
                self.stack.push(self.parent.map_or(0, |p| (p + 4 - k) % 4));
                self.parent = Some(2);
            }
        }
        if self.stack.is_empty() {
            self.parent = None;
        }
    }

    fn depth(&self) -> usize {
        self.stack.len()
    }
}

fn quarter(k: u8) -> f64 {
    std::f64::consts::FRAC_PI_2 * if k == 3 { -1.0 } else { f64::from(k) }
}

/// Right-angled walk: turn by a uniform multiple of 90° and move `r`.
/// `d_graph` holds the reduced-word depth.
pub fn right_angled_walk(r: f64, n_steps: usize, past_steps: usize, rng: &mut impl Rng) -> Result<WalkTrace, WalkError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(WalkError::StepLength(r));
    }
    let moves: Vec<Mobius> = (0..4u8).map(|k| Mobius::rotation(quarter(k)).compose(&Mobius::translation(r))).collect();
    let mut trace = WalkTrace::start();
    let mut frame = Frame::identity();
    let mut tree = TreeDepth::default();
    let mut first = None;
    for _ in 0..n_steps {
        let k = rng.random_range(0..4u8);
        frame = frame.then(&moves[k as usize]);
        tree.step(k);
        first.get_or_insert(frame);
        trace.push(frame.displacement(), tree.depth() as f64, frame, r);
    }
    trace.past = past_branch(&moves, past_steps, first.unwrap_or_else(Frame::identity), rng);
    Ok(trace)
}

/// Inverse-step walk from `o` with cross distances to `x₀ = o` and `x₁`.
fn past_branch(moves: &[Mobius], n: usize, x1: Frame, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let inverse: Vec<Mobius> = moves.iter().map(Mobius::inverse).collect();
    let mut p = Frame::identity();
    (0..n)
        .map(|_| {
            p = p.then(&inverse[rng.random_range(0..inverse.len())]);
            (p.displacement(), p.distance_to(&x1))
        })
        .collect()
}

/// The regular tessellation by `p`-gons, `q` around each vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TessellationSpec {
    p: u32,
    q: u32,
    side: f64,
}

impl TessellationSpec {
    pub fn new(p: u32, q: u32) -> Result<Self, WalkError> {
        if p < 3 || q < 3 || 2 * (p + q) >= p * q {
            return Err(WalkError::Tessellation { p, q });
        }
        let (pf, qf) = (f64::from(p), f64::from(q));
        let side = 2.0 * ((std::f64::consts::PI / pf).cos() / (std::f64::consts::PI / qf).sin()).acosh();
        Ok(Self { p, q, side })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Edge length `r_{p,q} = 2·acosh(cos(π/p)/sin(π/q))`.
    pub fn side(&self) -> f64 {
        self.side
    }

    /// Step `k`: turn to the `k`-th edge, cross it, face back along it.
    pub fn moves(&self) -> Vec<Mobius> {
        let turn = std::f64::consts::TAU / f64::from(self.q);
        (0..self.q)
            .map(|k| {
                Mobius::rotation(turn * f64::from(k))
                    .compose(&Mobius::translation(self.side))
                    .compose(&Mobius::rotation(std::f64::consts::PI))
            })
            .collect()
    }
}

/// Simple random walk on the vertices of the tessellation.
pub fn pq_walk(spec: &TessellationSpec, n_steps: usize, past_steps: usize, rng: &mut impl Rng) -> WalkTrace {
    let moves = spec.moves();
    let mut trace = WalkTrace::start();
    let mut frame = Frame::identity();
    let mut first = None;
    for _ in 0..n_steps {
        frame = frame.then(&moves[rng.random_range(0..moves.len())]);
        first.get_or_insert(frame);
        trace.push(frame.displacement(), f64::NAN, frame, spec.side());
    }
    trace.past = past_branch(&moves, past_steps, first.unwrap_or_else(Frame::identity), rng);
    trace
}

/// Endpoints `x_n` of the tessellation walk with their exact `n`-step
/// probabilities, keyed by a rounded position.
pub fn pq_distributions(spec: &TessellationSpec, n_max: usize) -> Vec<Vec<f64>> {
    use std::collections::BTreeMap;
    let moves = spec.moves();
    let qn = moves.len() as f64;
    let mut cur: BTreeMap<(i64, i64, i64), (Frame, f64)> = BTreeMap::new();
    cur.insert(vertex_key(&Frame::identity()), (Frame::identity(), 1.0));
    let mut out = vec![vec![1.0]];
    for _ in 0..n_max {
        let mut next: BTreeMap<(i64, i64, i64), (Frame, f64)> = BTreeMap::new();
        for (f, p) in cur.values() {
            for m in &moves {
                let g = f.then(m);
                next.entry(vertex_key(&g)).or_insert((g, 0.0)).1 += p / qn;
            }
        }
        out.push(next.values().map(|x| x.1).collect());
        cur = next;
    }
    out
}

/// Position key that separates tessellation vertices: the direction and a
/// coarse distance, rounded on a grid finer than the vertex spacing.
fn vertex_key(f: &Frame) -> (i64, i64, i64) {
    let d = f.displacement();
    if d < 1e-6 {
        return (0, 0, 0);
    }
    let z = Complex64::from_polar(1.0, f.angle());
    // vertices at distance d are at least ~e^{-d} apart in angle
    let scale = 1e4 * (d / 2.0).exp().max(1.0) * (d / 2.0).exp().max(1.0);
    ((d * 1e4).round() as i64, (z.re * scale).round() as i64, (z.im * scale).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::dist;
    use crate::stats::mean_se;
    use crate::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_tracks_plain_composition() {
        let g = Mobius::rotation(0.3).compose(&Mobius::translation(1.2));
        let mut f = Frame::identity();
        let mut h = Mobius::identity();
        for _ in 0..10 {
            f = f.then(&g);
            h = h.compose(&g);
        }
        assert!((f.displacement() - dist(Point::origin(), h.origin_image())).abs() < 1e-9);
        assert!((f.angle() - h.origin_image().angle()).abs() < 1e-9);
        assert!(f.distance_to(&f) < 1e-6);
    }

    #[test]
    fn frame_survives_huge_products() {
        let g = Mobius::translation(5.0);
        let mut f = Frame::identity();
        for _ in 0..400 {
            f = f.then(&g);
        }
        assert!((f.displacement() - 2000.0).abs() < 1e-8);
        let back = f.then(&Mobius::translation(-3.0));
        assert!((back.displacement() - 1997.0).abs() < 1e-8);
    }

    #[test]
    fn zero_steps_single_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = right_angled_walk(1.0, 0, 0, &mut rng).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].d_ambient, 0.0);
        assert!(t.steps[0].theta.is_none());
        assert!(right_angled_walk(0.0, 3, 0, &mut rng).is_err());
    }

    #[test]
    fn tree_depth_matches_geometry_at_tree_step() {
        // On the tree, d(x₀, x_n) is a strictly increasing function of depth.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = right_angled_walk(tree_step(), 60, 0, &mut rng).unwrap();
        for s in &t.steps {
            let d = s.d_graph as usize;
            if d == 0 {
                assert!(s.d_ambient < 1e-6, "{s:?}");
            }
            if d == 1 {
                assert!((s.d_ambient - tree_step()).abs() < 1e-6, "{s:?}");
            }
            assert!(s.d_ambient <= s.d_graph * tree_step() + 1e-6);
        }
    }

    #[test]
    fn tree_depth_bookkeeping() {
        let mut t = TreeDepth::default();
        for k in [0, 1, 2, 2] {
            t.step(k);
        }
        // out, out (turn left), back, then the back edge leads out again
        assert_eq!(t.depth(), 2);
        let mut t = TreeDepth::default();
        t.step(0);
        t.step(2);
        assert_eq!(t.depth(), 0);
        // at x₀ every direction leads out
        t.step(2);
        assert_eq!(t.depth(), 1);
        t.step(2);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn tree_walk_depth_equals_word_geometry() {
        // depth 2 reached by two straight moves has distance 2r, a right
        // turn gives cosh d = cosh² r
        let r = tree_step();
        let mv = |k: u8| Mobius::rotation(quarter(k)).compose(&Mobius::translation(r));
        let f = Frame::identity().then(&mv(0)).then(&mv(1));
        let expect = (r.cosh() * r.cosh()).acosh();
        assert!((f.displacement() - expect).abs() < 1e-9);
        // turn back from depth 2 to depth 1
        let g = f.then(&mv(2));
        assert!((g.displacement() - r).abs() < 1e-9);
    }

    #[test]
    fn triangle_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in [0.5, 2.0, 6.0] {
            let t = right_angled_walk(r, 200, 0, &mut rng).unwrap();
            assert!(t.satisfies_triangle_inequality(1e-8));
        }
    }

    #[test]
    fn large_r_speed_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..200).map(|_| right_angled_walk(6.0, 200, 0, &mut rng).unwrap().last().d_ambient / 1200.0).collect();
        let m = mean_se(&xs);
        assert!(m.mean > 0.44 && m.mean < 0.56, "{m:?}");
    }

    #[test]
    fn tessellation_side_length() {
        let s = TessellationSpec::new(3, 7).unwrap();
        assert!((s.side() - 1.090_549_66).abs() < 1e-8, "{}", s.side());
        // adjacent edges at a vertex span a triangular face
        let moves = s.moves();
        let v1 = moves[0].origin_image();
        let v2 = moves[1].origin_image();
        assert!((dist(v1, v2) - s.side()).abs() < 1e-9);
        assert!(TessellationSpec::new(4, 4).is_err());
        assert!(TessellationSpec::new(3, 6).is_err());
        assert!(TessellationSpec::new(2, 9).is_err());
    }

    #[test]
    fn pq_steps_have_exact_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = TessellationSpec::new(3, 20).unwrap();
        let moves = spec.moves();
        let mut f = Frame::identity();
        // short walks only: distance_to cancels like e^{d(o, x)}
        for _ in 0..3 {
            let g = f.then(&moves[rng.random_range(0..moves.len())]);
            assert!((f.distance_to(&g) - spec.side()).abs() < 1e-9);
            f = g;
        }
        let t = pq_walk(&spec, 40, 10, &mut rng);
        assert_eq!(t.past.len(), 10);
        assert!(t.satisfies_triangle_inequality(1e-8));
    }

    #[test]
    fn pq_vertices_close_up() {
        // walking around a face returns to the start
        let spec = TessellationSpec::new(3, 7).unwrap();
        let m = spec.moves();
        // from o step along edge 0, then turn to the edge that closes the face
        let f = Frame::identity().then(&m[0]).then(&m[6]).then(&m[6]);
        assert!(f.displacement() < 1e-9, "{}", f.displacement());
    }

    #[test]
    fn pq_distributions_sum_to_one() {
        let spec = TessellationSpec::new(3, 7).unwrap();
        let d = pq_distributions(&spec, 3);
        assert_eq!(d[1].len(), 7);
        // two steps: back to o, 7·(7 − 3) new vertices + 14 face neighbors
        for p in &d {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let back = d[2].iter().cloned().fold(0.0, f64::max);
        assert!((back - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn past_cross_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = right_angled_walk(2.0, 5, 20, &mut rng).unwrap();
        let (d0, d1) = t.past[0];
        assert!((d0 - 2.0).abs() < 1e-9);
        assert!((d1 - d0).abs() <= 2.0 + 1e-9);
    }

    #[test]
    fn trace_export_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = right_angled_walk(1.0, 3, 0, &mut rng).unwrap();
        let text = t.export();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 5);
        assert!(rows[1].starts_with("0 0.0000000000000000e0 0.0000000000000000e0 nan 0"));
    }
}
