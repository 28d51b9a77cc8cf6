//! Products of random unimodular 2×2 matrices, seen in `SO(2)\SL(2,ℝ)`.

use rand::Rng;

use crate::error::WalkError;

/// Row-major `[[a, b], [c, d]]`.
pub type Mat2 = [f64; 4];

fn mul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn det(m: &Mat2) -> f64 {
    m[0] * m[3] - m[1] * m[2]
}

/// Largest singular value, from `σ₁ ± σ₂` to avoid cancellation when the
/// two are close.
fn top_singular(m: &Mat2) -> f64 {
    let sum = (m[0] + m[3]).hypot(m[1] - m[2]);
    let diff = (m[0] - m[3]).hypot(m[1] + m[2]);
    (sum + diff) / 2.0
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    [c, -s, s, c]
}

pub fn diagonal(t: f64) -> Mat2 {
    [t.exp(), 0.0, 0.0, (-t).exp()]
}

/// Finitely supported law on `SL(2,ℝ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDistribution {
    matrices: Vec<Mat2>,
    cumulative: Vec<f64>,
}

impl MatrixDistribution {
    pub fn new(entries: &[(Mat2, f64)]) -> Result<Self, WalkError> {
        if entries.is_empty() {
            return Err(WalkError::EmptyDistribution);
        }
        for (index, (m, _)) in entries.iter().enumerate() {
            let det = det(m);
            if (det - 1.0).abs() > 1e-10 {
                return Err(WalkError::NotUnimodular { index, det });
            }
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if entries.iter().any(|(_, p)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(WalkError::Probabilities(total));
        }
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { matrices: entries.iter().map(|(m, _)| *m).collect(), cumulative })
    }

    /// Equal weights.
    pub fn uniform(matrices: &[Mat2]) -> Result<Self, WalkError> {
        let p = 1.0 / matrices.len().max(1) as f64;
        let mut entries: Vec<(Mat2, f64)> = matrices.iter().map(|m| (*m, p)).collect();
        if let Some(last) = entries.last_mut() {
            // absorb rounding so the weights sum to one
            last.1 = 1.0 - p * (matrices.len() - 1) as f64;
        }
        Self::new(&entries)
    }

    /// `{[[2,1],[1,1]], [[1,1],[1,2]]}` with equal weights.
    pub fn test_pair() -> Self {
        Self::uniform(&[[2.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 2.0]]).expect("unimodular")
    }

    pub fn matrices(&self) -> &[Mat2] {
        &self.matrices
    }

    pub fn sample(&self, rng: &mut impl Rng) -> &Mat2 {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.matrices.len() - 1);
        &self.matrices[i]
    }
}

/// `A_n ⋯ A_1` kept as `e^t·N` with `σ₁(N) = 1`, plus the direction
/// `A_n ⋯ A_1 v₀` on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixState {
    n: Mat2,
    log_scale: f64,
    v: [f64; 2],
}

impl Default for MatrixState {
    fn default() -> Self {
        Self { n: [1.0, 0.0, 0.0, 1.0], log_scale: 0.0, v: [1.0, 0.0] }
    }
}

impl MatrixState {
    /// Left-multiplies by `a`; returns `log|a v|` for the old direction `v`.
    pub fn step(&mut self, a: &Mat2) -> f64 {
        let m = mul(a, &self.n);
        let s = top_singular(&m);
        self.n = m.map(|x| x / s);
        self.log_scale += s.ln();
        let w = [a[0] * self.v[0] + a[1] * self.v[1], a[2] * self.v[0] + a[3] * self.v[1]];
        let len = w[0].hypot(w[1]);
        self.v = [w[0] / len, w[1] / len];
        len.ln()
    }

    /// `log σ₁ = log‖A_n ⋯ A_1‖`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale
    }

    /// `(log σ₁, log σ₂)`; their sum is zero by construction.
    pub fn log_singular_values(&self) -> (f64, f64) {
        (self.log_scale, -self.log_scale)
    }

    /// `d(Id, [A]) = √(log²σ₁ + log²σ₂)`.
    pub fn quotient_distance(&self) -> f64 {
        let (a, b) = self.log_singular_values();
        a.hypot(b)
    }

    pub fn direction(&self) -> [f64; 2] {
        self.v
    }

    /// The product itself; only meaningful while `e^t` is representable.
    pub fn product(&self) -> Mat2 {
        let e = self.log_scale.exp();
        self.n.map(|x| x * e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTrace {
    /// `log‖A_k ⋯ A_1‖` for `k = 0..=n`.
    pub log_norms: Vec<f64>,
    /// `log|A_k ⋯ A_1 v₀|` for `k = 0..=n`.
    pub log_vector_norms: Vec<f64>,
    pub last: MatrixState,
}

impl MatrixTrace {
    pub fn n(&self) -> usize {
        self.log_norms.len() - 1
    }
}

pub fn matrix_walk(dist: &MatrixDistribution, n_steps: usize, rng: &mut impl Rng) -> MatrixTrace {
    let mut state = MatrixState::default();
    let mut log_norms = Vec::with_capacity(n_steps + 1);
    let mut log_vector_norms = Vec::with_capacity(n_steps + 1);
    log_norms.push(0.0);
    log_vector_norms.push(0.0);
    let mut acc = 0.0;
    for _ in 0..n_steps {
        acc += state.step(dist.sample(rng));
        log_norms.push(state.log_norm());
        log_vector_norms.push(acc);
    }
    MatrixTrace { log_norms, log_vector_norms, last: state }
}

pub const DEFAULT_BURN_IN: usize = 1000;

/// Independent draws of the stationary direction: each runs its own chain
/// from `(1, 0)` for `burn_in` steps.
pub fn stationary_directions(dist: &MatrixDistribution, samples: usize, burn_in: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..samples)
        .map(|_| {
            let mut v = [1.0, 0.0];
            for _ in 0..burn_in {
                let a = dist.sample(rng);
                let w = [a[0] * v[0] + a[1] * v[1], a[2] * v[0] + a[3] * v[1]];
                let len = w[0].hypot(w[1]);
                v = [w[0] / len, w[1] / len];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_laws() {
        assert!(matches!(
            MatrixDistribution::new(&[([2.0, 0.0, 0.0, 1.0], 1.0)]),
            Err(WalkError::NotUnimodular { index: 0, .. })
        ));
        assert!(MatrixDistribution::new(&[([1.0, 0.0, 0.0, 1.0], 0.9)]).is_err());
        assert!(MatrixDistribution::new(&[]).is_err());
        assert!(MatrixDistribution::uniform(&[rotation(0.1), rotation(0.2), rotation(0.3)]).is_ok());
    }

    #[test]
    fn rotations_do_not_grow() {
        let d = MatrixDistribution::uniform(&[rotation(0.7), rotation(-1.9)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = matrix_walk(&d, 500, &mut rng);
        assert!(t.log_norms.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn diagonal_quotient_distance() {
        let mut s = MatrixState::default();
        s.step(&diagonal(1.5));
        assert!((s.quotient_distance() - std::f64::consts::SQRT_2 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn matches_raw_product_while_representable() {
        let d = MatrixDistribution::test_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = MatrixState::default();
        let mut raw = [1.0, 0.0, 0.0, 1.0];
        for _ in 0..15 {
            let a = *d.sample(&mut rng);
            s.step(&a);
            raw = mul(&a, &raw);
            let p = s.product();
            for i in 0..4 {
                assert!((p[i] - raw[i]).abs() <= 1e-9 * raw[i].abs().max(1.0));
            }
            let sigma = top_singular(&raw);
            assert!((sigma.ln() - s.log_norm()).abs() < 1e-9);
            // σ₁σ₂ = det = 1
            assert!((sigma * (1.0 / sigma) - det(&raw)).abs() < 1e-9);
        }
    }

    #[test]
    fn long_products_stay_finite() {
        let d = MatrixDistribution::test_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = matrix_walk(&d, 20_000, &mut rng);
        assert!(t.last.log_norm().is_finite() && t.last.log_norm() > 1000.0);
        let v = t.last.direction();
        assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-12);
        // a positive vector grows like the norm
        assert!((t.log_vector_norms[t.n()] - t.last.log_norm()).abs() < 2.0);
    }

    #[test]
    fn sampling_respects_weights() {
        let d = MatrixDistribution::new(&[(rotation(0.0), 0.25), (rotation(1.0), 0.75)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hits = (0..40_000).filter(|_| d.sample(&mut rng)[0] == 1.0).count() as f64 / 40_000.0;
        assert!((hits - 0.25).abs() < 0.01);
    }
}
