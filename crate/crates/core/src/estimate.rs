//! Estimators for speed, entropy, Lyapunov exponents and boundary dimension.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{Display, Write as _};
use std::hash::Hash;

use rand::Rng;

use crate::error::EstimateError;
use crate::stats::{least_squares, mean_se, weighted_mean_se, MeanSe};
use crate::walks::matrix::{MatrixDistribution, MatrixTrace};
use crate::walks::WalkTrace;

pub const MIN_TRACES: usize = 30;
pub const MIN_PAST: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: String,
    pub diagnostics: BTreeMap<String, String>,
}

impl EstimateReport {
    pub fn from_mean(method: impl Into<String>, m: MeanSe) -> Self {
        Self { value: m.mean, std_error: m.se, n_samples: m.n, method: method.into(), diagnostics: BTreeMap::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Display) -> Self {
        self.diagnostics.insert(key.into(), value.to_string());
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key)?.parse().ok()
    }

    pub fn mean_se(&self) -> MeanSe {
        MeanSe { mean: self.value, se: self.std_error, n: self.n_samples }
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "method: {}\nvalue: {:.16e}\nstd_error: {:.16e}\nn_samples: {}\n",
            self.method, self.value, self.std_error, self.n_samples
        );
        for (k, v) in &self.diagnostics {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

/// Valid traces of a common length, with the invalid count.
fn usable(traces: &[WalkTrace]) -> Result<(Vec<&WalkTrace>, usize), EstimateError> {
    let valid: Vec<&WalkTrace> = traces.iter().filter(|t| t.valid).collect();
    if valid.len() < MIN_TRACES {
        return Err(EstimateError::Insufficient { needed: MIN_TRACES, got: valid.len() });
    }
    let n = valid[0].n();
    if n == 0 || valid.iter().any(|t| t.n() != n) {
        return Err(EstimateError::RaggedTraces);
    }
    Ok((valid, traces.len() - traces.iter().filter(|t| t.valid).count()))
}

fn weighted(traces: &[&WalkTrace], f: impl Fn(&WalkTrace) -> f64) -> MeanSe {
    let xs: Vec<f64> = traces.iter().map(|t| f(t)).collect();
    let ws: Vec<f64> = traces.iter().map(|t| t.weight).collect();
    weighted_mean_se(&xs, &ws)
}

/// `d(x₀, x_n)/n` averaged over traces, weighted by the trace weights.
pub fn speed_kingman(traces: &[WalkTrace]) -> Result<EstimateReport, EstimateError> {
    let (valid, invalid) = usable(traces)?;
    let n = valid[0].n();
    Ok(EstimateReport::from_mean("speed_kingman", weighted(&valid, |t| t.last().d_ambient / n as f64))
        .with("n", n)
        .with("invalid_traces", invalid))
}

/// Graph-distance speed from the traces' final `d_graph`.
pub fn graph_speed(traces: &[WalkTrace]) -> Result<EstimateReport, EstimateError> {
    let (valid, invalid) = usable(traces)?;
    let measured: Vec<&WalkTrace> = valid.into_iter().filter(|t| t.last().d_graph.is_finite()).collect();
    if measured.len() < MIN_TRACES {
        return Err(EstimateError::Insufficient { needed: MIN_TRACES, got: measured.len() });
    }
    let n = measured[0].n();
    Ok(EstimateReport::from_mean("graph_speed", weighted(&measured, |t| t.last().d_graph / n as f64))
        .with("n", n)
        .with("invalid_traces", invalid))
}

/// `d(x₋ᵢ, x₁) − d(x₋ᵢ, x₀)` averaged over the past and over traces.
pub fn speed_furstenberg(traces: &[WalkTrace]) -> Result<EstimateReport, EstimateError> {
    let valid: Vec<&WalkTrace> = traces.iter().filter(|t| t.valid).collect();
    if valid.iter().any(|t| t.past.len() < MIN_PAST) {
        return Err(EstimateError::MissingPast);
    }
    if valid.len() < MIN_TRACES {
        return Err(EstimateError::Insufficient { needed: MIN_TRACES, got: valid.len() });
    }
    let m = weighted(&valid, |t| t.past.iter().map(|(d0, d1)| d1 - d0).sum::<f64>() / t.past.len() as f64);
    Ok(EstimateReport::from_mean("speed_furstenberg", m)
        .with("past_length", valid[0].past.len())
        .with("invalid_traces", traces.len() - valid.len()))
}

/// The same average for an arbitrary list of cross distances
/// `(d(y, x₀), d(y, x₁))`, one list per sample.
pub fn cross_difference_mean(samples: &[Vec<(f64, f64)>]) -> MeanSe {
    let xs: Vec<f64> = samples.iter().map(|p| p.iter().map(|(a, b)| b - a).sum::<f64>() / p.len() as f64).collect();
    mean_se(&xs)
}

/// `−Σ p log p` over the positive weights, summed in sorted order so the
/// result does not depend on the iteration order of the input.
pub fn distribution_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    let mut ps: Vec<f64> = probs.into_iter().filter(|&p| p > 0.0).collect();
    ps.sort_by(f64::total_cmp);
    ps.iter().map(|p| -p * p.ln()).sum()
}

/// `(H_{n₂} − H_{n₁})/(n₂ − n₁)` per environment, weighted; each row holds
/// `H_0, H_1, …` for one environment.
pub fn entropy_increments(rows: &[Vec<f64>], weights: &[f64], n1: usize, n2: usize) -> Result<EstimateReport, EstimateError> {
    if rows.len() < 2 {
        return Err(EstimateError::Insufficient { needed: 2, got: rows.len() });
    }
    if n2 <= n1 || rows.iter().any(|h| h.len() <= n2) {
        return Err(EstimateError::RaggedTraces);
    }
    let xs: Vec<f64> = rows.iter().map(|h| (h[n2] - h[n1]) / (n2 - n1) as f64).collect();
    Ok(EstimateReport::from_mean("entropy_increment", weighted_mean_se(&xs, weights)).with("n1", n1).with("n2", n2))
}

/// Law of the depth `K_n` of simple random walk on the `d`-regular tree.
pub fn tree_depth_law(degree: usize, n: usize) -> Vec<f64> {
    let d = degree as f64;
    let mut p = vec![0.0; n + 2];
    p[0] = 1.0;
    for _ in 0..n {
        let mut q = vec![0.0; n + 2];
        q[1] += p[0];
        for k in 1..=n {
            q[k + 1] += p[k] * (d - 1.0) / d;
            q[k - 1] += p[k] / d;
        }
        p = q;
    }
    p.truncate(n + 1);
    p
}

/// `log p^n(o, x)` for a vertex at depth `k` of the `d`-regular tree.
fn tree_log_transition(law: &[f64], degree: usize, k: usize) -> f64 {
    let d = degree as f64;
    let shell = if k == 0 { 0.0 } else { d.ln() + (k - 1) as f64 * (d - 1.0).ln() };
    law[k].ln() - shell
}

/// Exact `H_n` of simple random walk on the `d`-regular tree.
pub fn tree_entropy(degree: usize, n: usize) -> f64 {
    let law = tree_depth_law(degree, n);
    law.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| -p * tree_log_transition(&law, degree, k)).sum()
}

/// Entropy of tree walks from simulated depths at `n1` and `n2`: mean of
/// `[log p^{n₁}(x_{n₁}) − log p^{n₂}(x_{n₂})]/(n₂ − n₁)` with exact
/// transition probabilities.
pub fn tree_entropy_from_depths(degree: usize, n1: usize, n2: usize, depths: &[(usize, usize)]) -> Result<EstimateReport, EstimateError> {
    if depths.len() < 2 {
        return Err(EstimateError::Insufficient { needed: 2, got: depths.len() });
    }
    let (l1, l2) = (tree_depth_law(degree, n1), tree_depth_law(degree, n2));
    let xs: Vec<f64> = depths
        .iter()
        .map(|&(k1, k2)| (tree_log_transition(&l1, degree, k1) - tree_log_transition(&l2, degree, k2)) / (n2 - n1) as f64)
        .collect();
    Ok(EstimateReport::from_mean("entropy_tree_depths", mean_se(&xs)).with("n1", n1).with("n2", n2))
}

/// Plug-in entropy: `p̂` from `reference` endpoints, evaluated at `fresh`
/// ones as `−(1/n)·log p̂(x_n)`. Fresh endpoints never seen in the
/// reference set are dropped and lower the coverage.
pub fn plugin_entropy<K: Hash + Eq>(reference: &[K], fresh: &[K], n: usize) -> Result<EstimateReport, EstimateError> {
    if reference.is_empty() || fresh.len() < 2 || n == 0 {
        return Err(EstimateError::Insufficient { needed: 2, got: fresh.len() });
    }
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for k in reference {
        *counts.entry(k).or_default() += 1;
    }
    let total = reference.len() as f64;
    let xs: Vec<f64> = fresh.iter().filter_map(|k| counts.get(k)).map(|&c| -(c as f64 / total).ln() / n as f64).collect();
    let coverage = xs.len() as f64 / fresh.len() as f64;
    Ok(EstimateReport::from_mean("entropy_plugin", mean_se(&xs))
        .with("coverage", coverage)
        .with("biased_high", coverage < 0.9))
}

/// `log‖A_n ⋯ A_1‖/n` averaged over traces.
pub fn lyapunov_direct(traces: &[MatrixTrace]) -> Result<EstimateReport, EstimateError> {
    if traces.len() < 2 {
        return Err(EstimateError::Insufficient { needed: 2, got: traces.len() });
    }
    let n = traces[0].n();
    if n == 0 || traces.iter().any(|t| t.n() != n) {
        return Err(EstimateError::RaggedTraces);
    }
    let xs: Vec<f64> = traces.iter().map(|t| t.last.log_norm() / n as f64).collect();
    Ok(EstimateReport::from_mean("lyapunov_direct", mean_se(&xs)).with("n", n))
}

/// Quotient-space speed `d(Id, [A_n ⋯ A_1])/n`.
pub fn quotient_speed(traces: &[MatrixTrace]) -> Result<EstimateReport, EstimateError> {
    let direct = lyapunov_direct(traces)?;
    let n = traces[0].n() as f64;
    let xs: Vec<f64> = traces.iter().map(|t| t.last.quotient_distance() / n).collect();
    Ok(EstimateReport::from_mean("quotient_speed", mean_se(&xs)).with("n", n))
        .map(|r| r.with("lyapunov", direct.value))
}

/// `log|A v|` over fresh `A` and stationary `v`.
pub fn lyapunov_furstenberg(dist: &MatrixDistribution, stationary: &[[f64; 2]], rng: &mut impl Rng) -> Result<EstimateReport, EstimateError> {
    if stationary.len() < 2 {
        return Err(EstimateError::Insufficient { needed: 2, got: stationary.len() });
    }
    let xs: Vec<f64> = stationary
        .iter()
        .map(|v| {
            let a = dist.sample(rng);
            (a[0] * v[0] + a[1] * v[1]).hypot(a[2] * v[0] + a[3] * v[1]).ln()
        })
        .collect();
    Ok(EstimateReport::from_mean("lyapunov_furstenberg", mean_se(&xs)))
}

/// Final-step directions standing in for limit points on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    angles: Vec<f64>,
    truncation: f64,
}

impl BoundarySample {
    /// `truncation` bounds `|θ_n − θ_∞|` for every sample.
    pub fn new(angles: Vec<f64>, truncation: f64) -> Self {
        let angles = angles.into_iter().map(|a| a.rem_euclid(std::f64::consts::TAU)).collect();
        Self { angles, truncation: truncation.max(0.0) }
    }

    /// From the last step of each trace, with bound `e^{−ℓ′n}`,
    /// `ℓ′ = speed/2`.
    pub fn from_traces(traces: &[WalkTrace], speed: f64) -> Self {
        let n = traces.iter().map(WalkTrace::n).min().unwrap_or(0);
        let angles = traces.iter().filter(|t| t.valid).filter_map(|t| t.last().theta).collect();
        Self::new(angles, (-0.5 * speed * n as f64).exp())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Fraction of unordered pairs at circular distance at most `r`, for
    /// each `r` (all below π).
    pub fn pair_fractions(&self, scales: &[f64]) -> Vec<f64> {
        let mut a = self.angles.clone();
        a.sort_by(f64::total_cmp);
        let m = a.len();
        if m < 2 {
            return vec![0.0; scales.len()];
        }
        let tau = std::f64::consts::TAU;
        let doubled: Vec<f64> = a.iter().copied().chain(a.iter().map(|x| x + tau)).collect();
        let pairs = (m * (m - 1) / 2) as f64;
        scales
            .iter()
            .map(|&r| {
                // points strictly after i within r, wrapping once
                let count: usize = (0..m).map(|i| doubled[i + 1..i + m].partition_point(|&x| x - a[i] <= r)).sum();
                count as f64 / pairs
            })
            .collect()
    }
}

/// Slope of `log C(r)` against `log r` over the admissible scales.
pub fn dimension_correlation(sample: &BoundarySample, scales: &[f64]) -> Result<EstimateReport, EstimateError> {
    let lo = 10.0 * sample.truncation();
    let kept: Vec<f64> = scales.iter().copied().filter(|&r| r >= lo && r <= 0.1 && r > 0.0).collect();
    let c = sample.pair_fractions(&kept);
    let (xs, ys): (Vec<f64>, Vec<f64>) = kept.iter().zip(&c).filter(|(_, c)| **c > 0.0).map(|(r, c)| (r.ln(), c.ln())).unzip();
    if xs.len() < 3 {
        return Err(EstimateError::TooFewScales(xs.len()));
    }
    let fit = least_squares(&xs, &ys).ok_or(EstimateError::TooFewScales(xs.len()))?;
    Ok(EstimateReport {
        value: fit.slope,
        std_error: fit.slope_se,
        n_samples: sample.len(),
        method: "correlation_dimension".into(),
        diagnostics: BTreeMap::new(),
    }
    .with("residual", fit.residual)
    .with("scales", xs.len())
    .with("truncation", sample.truncation()))
}

/// Log-spaced scales between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::matrix::{matrix_walk, rotation, stationary_directions};
    use crate::walks::{right_angled_walk, tree_step};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn report_text() {
        let r = EstimateReport::from_mean("x", MeanSe { mean: 1.0, se: 0.5, n: 4 }).with("burn_in", 1000);
        let t = r.to_text();
        assert!(t.contains("method: x\n"));
        assert!(t.contains("burn_in: 1000\n"));
        assert_eq!(r.diagnostic("burn_in"), Some(1000.0));
    }

    #[test]
    fn constant_traces_have_zero_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut traces: Vec<WalkTrace> = (0..40).map(|_| right_angled_walk(1.0, 5, 0, &mut rng).unwrap()).collect();
        for t in &mut traces {
            for s in &mut t.steps {
                s.d_ambient = 0.0;
            }
        }
        let r = speed_kingman(&traces).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(speed_kingman(&traces[..10]).is_err());
        assert!(matches!(speed_furstenberg(&traces), Err(EstimateError::MissingPast)));
    }

    #[test]
    fn tree_graph_speed_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traces: Vec<WalkTrace> = (0..400).map(|_| right_angled_walk(tree_step(), 400, 0, &mut rng).unwrap()).collect();
        let r = graph_speed(&traces).unwrap();
        assert!((r.value - 0.5).abs() < 3.0 * r.std_error + 0.005, "{r:?}");
    }

    #[test]
    fn furstenberg_null_model_is_zero() {
        // x₀, x₁ and the past all i.i.d. uniform in a Euclidean ball
        use crate::geom::dist;
        use crate::Point;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = |rng: &mut ChaCha8Rng| {
            let r: f64 = rng.random::<f64>().sqrt() * 0.5;
            let a: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            Point::new(r * a.cos(), r * a.sin()).unwrap()
        };
        let samples: Vec<Vec<(f64, f64)>> = (0..200)
            .map(|_| {
                let (x0, x1) = (draw(&mut rng), draw(&mut rng));
                (0..60)
                    .map(|_| {
                        let y = draw(&mut rng);
                        (dist(y, x0), dist(y, x1))
                    })
                    .collect()
            })
            .collect();
        let m = cross_difference_mean(&samples);
        assert!(m.mean.abs() < 3.0 * m.se, "{m:?}");
    }

    #[test]
    fn furstenberg_matches_kingman_on_right_angled() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traces: Vec<WalkTrace> = (0..300).map(|_| right_angled_walk(2.0, 200, 60, &mut rng).unwrap()).collect();
        let k = speed_kingman(&traces).unwrap();
        let f = speed_furstenberg(&traces).unwrap();
        assert!(k.mean_se().agrees_with(&f.mean_se(), 3.0), "{k:?} {f:?}");
        assert!(f.value >= 0.5 * 2f64.cosh().ln() - 3.0 * f.std_error);
    }

    #[test]
    fn entropy_of_point_mass_and_uniform() {
        assert_eq!(distribution_entropy([1.0]), 0.0);
        assert!((distribution_entropy([0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        // a deterministic cycle walk has a point-mass law at every step
        let rows = vec![vec![0.0; 11]; 5];
        let r = entropy_increments(&rows, &[1.0; 5], 5, 10).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn tree_entropy_rate() {
        let h = 0.5 * 3f64.ln();
        let inc = (tree_entropy(4, 2000) - tree_entropy(4, 1000)) / 1000.0;
        assert!((inc - h).abs() < 1e-3, "{inc}");
        let law = tree_depth_law(4, 3);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((tree_entropy(4, 1) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn plugin_entropy_coverage() {
        let reference: Vec<u32> = (0..1000).map(|i| i % 10).collect();
        let fresh: Vec<u32> = (0..100).map(|i| i % 20).collect();
        let r = plugin_entropy(&reference, &fresh, 1).unwrap();
        assert!((r.value - 10f64.ln()).abs() < 1e-12);
        assert_eq!(r.diagnostic("coverage"), Some(0.5));
        assert_eq!(r.diagnostics["biased_high"], "true");
    }

    #[test]
    fn lyapunov_estimators_agree() {
        let d = MatrixDistribution::test_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let traces: Vec<MatrixTrace> = (0..200).map(|_| matrix_walk(&d, 500, &mut rng)).collect();
        let direct = lyapunov_direct(&traces).unwrap();
        let vs = stationary_directions(&d, 4000, 1000, &mut rng);
        let furst = lyapunov_furstenberg(&d, &vs, &mut rng).unwrap();
        assert!(direct.mean_se().agrees_with(&furst.mean_se(), 3.0), "{direct:?} {furst:?}");
        let q = quotient_speed(&traces).unwrap();
        assert!((q.value - std::f64::consts::SQRT_2 * direct.value).abs() < 1e-9);
    }

    #[test]
    fn rotations_have_zero_exponent() {
        let d = MatrixDistribution::uniform(&[rotation(0.4), rotation(2.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let vs = stationary_directions(&d, 100, 50, &mut rng);
        let f = lyapunov_furstenberg(&d, &vs, &mut rng).unwrap();
        assert!(f.value.abs() < 0.01);
        let traces: Vec<MatrixTrace> = (0..10).map(|_| matrix_walk(&d, 100, &mut rng)).collect();
        assert!(lyapunov_direct(&traces).unwrap().value.abs() < 0.01);
    }

    #[test]
    fn uniform_angles_have_dimension_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = BoundarySample::new((0..10_000).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect(), 0.0);
        let r = dimension_correlation(&s, &log_grid(1e-3, 0.1, 8)).unwrap();
        assert!((r.value - 1.0).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn atoms_have_dimension_zero() {
        let s = BoundarySample::new(vec![1.0; 500], 0.0);
        let r = dimension_correlation(&s, &log_grid(1e-3, 0.1, 5)).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn pair_fractions_wrap_around() {
        let s = BoundarySample::new(vec![0.01, std::f64::consts::TAU - 0.01, 3.0], 0.0);
        let c = s.pair_fractions(&[0.03, 0.01]);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn too_few_scales() {
        let s = BoundarySample::new(vec![0.0, 1.0], 0.05);
        assert!(matches!(dimension_correlation(&s, &[0.2, 0.3]), Err(EstimateError::TooFewScales(_))));
    }
}
