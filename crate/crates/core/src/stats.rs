//! Small statistics toolkit: seed mixing, (weighted) means with standard
//! errors, Kolmogorov–Smirnov statistics and least squares.

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds words into a 64-bit hash, order sensitive.
pub fn fold(init: u64, words: &[u64]) -> u64 {
    let mut h = splitmix64(init);
    for &w in words {
        h = splitmix64(h ^ w);
    }
    splitmix64(h ^ words.len() as u64)
}

/// Seed of the `index`-th independent stream of a run.
pub fn stream_seed(run_seed: u64, index: u64) -> u64 {
    fold(run_seed, &[0x7472_6163_65, index])
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Combined 3σ band for a difference of two independent estimates.
    pub fn agrees_with(&self, other: &MeanSe, sigmas: f64) -> bool {
        (self.mean - other.mean).abs() <= sigmas * self.se.hypot(other.se)
    }
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n < 2 {
        f64::NAN
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    MeanSe { mean, se, n }
}

/// Ratio estimator `Σ w x / Σ w` with a delta-method standard error.
pub fn weighted_mean_se(xs: &[f64], ws: &[f64]) -> MeanSe {
    assert_eq!(xs.len(), ws.len(), "values and weights differ in length");
    let n = xs.len();
    let wsum: f64 = ws.iter().sum();
    if n == 0 || wsum <= 0.0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let se = if n < 2 {
        f64::NAN
    } else {
        let ss: f64 = xs.iter().zip(ws).map(|(x, w)| (w * (x - mean)).powi(2)).sum();
        (ss * n as f64 / (n - 1) as f64).sqrt() / wsum
    };
    MeanSe { mean, se, n }
}

/// Two-sided KS critical value at the 3σ level (α ≈ 0.0027).
pub const KS_3SIGMA: f64 = 1.8176;

/// One-sample KS statistic `sup |F_n − F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test at 3σ.
pub fn ks_passes(sample: &[f64], cdf: impl Fn(f64) -> f64) -> bool {
    let d = ks_statistic(sample, cdf);
    d * (sample.len() as f64).sqrt() <= KS_3SIGMA
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample_passes(a: &[f64], b: &[f64]) -> bool {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    ks_two_sample(a, b) * (na * nb / (na + nb)).sqrt() <= KS_3SIGMA
}

/// Ordinary least squares fit `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Root mean square residual.
    pub residual: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    Some(LineFit { slope, intercept, slope_se, residual: (rss / nf).sqrt() })
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
