//! The experiments behind each subcommand. Trials fan out to a worker pool;
//! every trial draws from its own seed stream and results are reduced in
//! trial order, so the output does not depend on the worker count.

use std::f64::consts::{SQRT_2, TAU};

use hyperwalk::delaunay::{edge_report, edge_trial, Environment};
use hyperwalk::estimate::{
    dimension_correlation, distribution_entropy, entropy_increments, graph_speed, log_grid, lyapunov_direct,
    lyapunov_furstenberg, quotient_speed, speed_furstenberg, speed_kingman, tree_entropy, tree_entropy_from_depths,
    BoundarySample, EstimateReport,
};
use hyperwalk::stats::{fold, mean_se, MeanSe};
use hyperwalk::walks::matrix::{matrix_walk, rotation, stationary_directions, MatrixDistribution};
use hyperwalk::walks::{
    pd_entropies, pd_walk, pq_distributions, pq_walk, right_angled_lower_bound, right_angled_walk, PdOptions,
    TessellationSpec, WalkTrace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{usage, Config, UsageError};
use crate::plot::{line_plot, Series};
use crate::table::{Cell, Table};

pub struct Workers {
    pool: rayon::ThreadPool,
    count: usize,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self, UsageError> {
        if count == 0 {
            return Err(usage("workers must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .map_err(|e| usage(format!("worker pool: {e}")))?;
        Ok(Self { pool, count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `f(0), …, f(n−1)` in index order.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Result files of one experiment plus the overall verdict.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// `(file name, svg)`.
    pub plots: Vec<(String, String)>,
    pub passed: bool,
}

fn trial_seed(seed: u64, salt: u64, grid: usize, trial: usize) -> u64 {
    fold(seed, &[salt, grid as u64, trial as u64])
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Estimate or NaN, with the 3σ half-width.
#[derive(Clone, Copy, Debug)]
struct Est {
    mean: f64,
    se: f64,
}

impl Est {
    const NONE: Est = Est { mean: f64::NAN, se: f64::NAN };

    fn of<E>(r: &Result<EstimateReport, E>) -> Self {
        match r {
            Ok(r) => Est { mean: r.value, se: r.std_error },
            Err(_) => Self::NONE,
        }
    }

    fn from_mean(m: MeanSe) -> Self {
        Est { mean: m.mean, se: m.se }
    }

    fn scaled(self, c: f64) -> Self {
        Est { mean: self.mean * c, se: self.se * c.abs() }
    }

    fn cells(self) -> [Cell; 2] {
        [self.mean.into(), (3.0 * self.se).into()]
    }

    fn known(self) -> bool {
        self.mean.is_finite()
    }
}

/// `|a − b|` within the combined 3σ band; vacuous when either is missing.
fn agree(a: Est, b: Est) -> bool {
    !(a.known() && b.known()) || (a.mean - b.mean).abs() <= 3.0 * a.se.hypot(b.se)
}

fn row(parts: Vec<Vec<Cell>>) -> Vec<Cell> {
    parts.into_iter().flatten().collect()
}

fn plot_files(name: &str, title: &str, x_label: &str, xs: &[f64], ys: &[(&str, Vec<f64>)]) -> (Table, (String, String)) {
    let mut cols: Vec<(&str, &str)> = vec![("x", x_label)];
    cols.extend(ys.iter().map(|(n, _)| (*n, "series value")));
    let mut t = Table::new(&format!("{name}_plot"), &cols);
    for (i, &x) in xs.iter().enumerate() {
        let mut r = vec![Cell::from(x)];
        r.extend(ys.iter().map(|(_, v)| Cell::from(v[i])));
        t.push(r);
    }
    let series: Vec<Series> =
        ys.iter().map(|(n, v)| Series::new(n, xs.iter().copied().zip(v.iter().copied()).collect())).collect();
    let svg = line_plot(title, x_label, "value", &series);
    (t, (format!("{name}_plot.svg"), svg))
}

fn sort_desc(xs: &mut [f64]) {
    xs.sort_by(|a, b| b.total_cmp(a));
}

fn check_steps(steps: usize, max: usize) -> Result<(), UsageError> {
    if steps == 0 || steps > max {
        return Err(usage(format!("steps must be in 1..={max}, got {steps}")));
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<(), UsageError> {
    if trials == 0 {
        return Err(usage("trials must be at least 1"));
    }
    Ok(())
}

const SALT_ENV: u64 = 1;
const SALT_WALK: u64 = 2;
const SALT_STATIONARY: u64 = 3;
const SALT_EXTRA: u64 = 4;

// ---------------------------------------------------------------- pd

#[derive(Clone, Debug, PartialEq)]
pub struct PdParams {
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub steps: usize,
    pub trials: usize,
    pub past: usize,
    pub graph_distance: bool,
    /// Environments, out of the first trials, whose exact entropies are
    /// propagated.
    pub entropy_envs: usize,
    pub entropy_n: usize,
}

impl PdParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let p = Self {
            seed: cfg.value("seed", 1)?,
            lambdas: cfg.list("lambda", &[0.5, 0.2, 0.1, 0.05])?,
            steps: cfg.value("steps", 30)?,
            trials: cfg.value("trials", 100)?,
            past: cfg.value("past", 0)?,
            graph_distance: cfg.value("graph_distance", true)?,
            entropy_envs: cfg.value("entropy_envs", 20)?,
            entropy_n: cfg.value("entropy_n", 2)?,
        };
        if let Some(l) = p.lambdas.iter().find(|l| !(0.05..=1.0).contains(*l)) {
            return Err(usage(format!("lambda {l} outside [0.05, 1]")));
        }
        check_steps(p.steps, 200)?;
        check_trials(p.trials)?;
        if p.entropy_envs > 0 && p.entropy_n == 0 {
            return Err(usage("entropy_n must be at least 1"));
        }
        Ok(p)
    }
}

struct PdTrial {
    trace: Option<WalkTrace>,
    degree: Option<usize>,
    entropies: Option<Vec<f64>>,
}

fn pd_trial(p: &PdParams, lambda: f64, gi: usize, i: usize) -> PdTrial {
    let failed = PdTrial { trace: None, degree: None, entropies: None };
    let Ok(env) = Environment::sample(trial_seed(p.seed, SALT_ENV, gi, i), lambda) else {
        return failed;
    };
    let Ok(nb) = env.neighbors(&env.root()) else {
        return failed;
    };
    let opts = PdOptions { steps: p.steps, past_steps: p.past, graph_distance: p.graph_distance, ..Default::default() };
    let mut rng = rng_for(trial_seed(p.seed, SALT_WALK, gi, i));
    let trace = pd_walk(&env, &opts, &mut rng).ok();
    let entropies = (i < p.entropy_envs).then(|| pd_entropies(&env, p.entropy_n).ok()).flatten();
    PdTrial { trace, degree: Some(nb.len()), entropies }
}

pub const PD_COLUMNS: &[(&str, &str)] = &[
    ("lambda", "intensity"),
    ("steps", "walk length n"),
    ("trials", "environments sampled"),
    ("valid", "traces completed without certification failure"),
    ("speed", "degree-weighted d(x0, x_n)/n"),
    ("speed_err3", "3 standard errors"),
    ("ratio", "speed / (2 log(1/lambda)); nan at lambda = 1"),
    ("ratio_err3", "3 standard errors"),
    ("graph_speed", "degree-weighted d_G(x0, x_n)/n"),
    ("graph_speed_err3", "3 standard errors"),
    ("furstenberg", "mean of d(x_-i, x1) - d(x_-i, x0) over the past branch; nan without one"),
    ("furstenberg_err3", "3 standard errors"),
    ("entropy", "degree-weighted H_n - H_(n-1) of the exact walk law"),
    ("entropy_err3", "3 standard errors"),
    ("entropy_samples", "environments entering the entropy"),
    ("mean_degree", "mean deg(o)"),
    ("mean_degree_err3", "3 standard errors"),
    ("h_over_l", "entropy / speed"),
    ("uncertified_rate", "fraction of trials lost to certification failure"),
    ("flagged", "uncertified_rate above 1%"),
    ("furstenberg_ok", "furstenberg and speed agree within combined 3 sigma"),
    ("entropy_upper_ok", "entropy <= log(mean_degree) + 3 sigma"),
    ("entropy_lower_ok", "entropy >= graph_speed^2/2 - 3 sigma"),
    ("pass", "all checks of this row"),
];

pub fn run_pd(p: &PdParams, w: &Workers) -> Outcome {
    let mut table = Table::new("pd", PD_COLUMNS);
    let mut all_pass = true;
    for (gi, &lambda) in p.lambdas.iter().enumerate() {
        let trials = w.map(p.trials, |i| pd_trial(p, lambda, gi, i));
        let traces: Vec<WalkTrace> = trials.iter().filter_map(|t| t.trace.clone()).collect();
        let valid = traces.iter().filter(|t| t.valid).count();
        let uncertified = (p.trials - valid) as f64 / p.trials as f64;
        let degrees: Vec<f64> = trials.iter().filter_map(|t| t.degree).map(|d| d as f64).collect();
        let (rows, weights): (Vec<Vec<f64>>, Vec<f64>) = trials
            .iter()
            .filter_map(|t| Some((t.entropies.clone()?, t.degree? as f64)))
            .unzip();

        let speed = Est::of(&speed_kingman(&traces));
        let ratio = if lambda < 1.0 { speed.scaled(1.0 / (2.0 * (1.0 / lambda).ln())) } else { Est::NONE };
        let graph = if p.graph_distance { Est::of(&graph_speed(&traces)) } else { Est::NONE };
        let furst = if p.past > 0 { Est::of(&speed_furstenberg(&traces)) } else { Est::NONE };
        let n = p.entropy_n;
        let entropy = if n >= 1 { Est::of(&entropy_increments(&rows, &weights, n - 1, n)) } else { Est::NONE };
        let degree = if degrees.is_empty() { Est::NONE } else { Est::from_mean(mean_se(&degrees)) };

        let flagged = uncertified > 0.01;
        let furstenberg_ok = agree(furst, speed);
        let upper_ok = !entropy.known()
            || entropy.mean <= degree.mean.ln() + 3.0 * entropy.se.hypot(degree.se / degree.mean);
        let lower_ok = !(entropy.known() && graph.known())
            || entropy.mean >= graph.mean.powi(2) / 2.0 - 3.0 * entropy.se.hypot(graph.mean * graph.se);
        let pass = !flagged && furstenberg_ok && upper_ok && lower_ok;
        all_pass &= pass;
        table.push(row(vec![
            vec![lambda.into(), p.steps.into(), p.trials.into(), valid.into()],
            speed.cells().into(),
            ratio.cells().into(),
            graph.cells().into(),
            furst.cells().into(),
            entropy.cells().into(),
            vec![rows.len().into()],
            degree.cells().into(),
            vec![(entropy.mean / speed.mean).into(), uncertified.into(), flagged.into()],
            vec![furstenberg_ok.into(), upper_ok.into(), lower_ok.into(), pass.into()],
        ]));
    }

    let mut trends = Table::new("pd_trends", &[("check", "trend along decreasing lambda"), ("holds", "1 if strictly increasing")]);
    let mut order: Vec<usize> = (0..p.lambdas.len()).collect();
    order.sort_by(|&a, &b| p.lambdas[b].total_cmp(&p.lambdas[a]));
    for col in ["ratio", "graph_speed"] {
        let v = table.floats(col).expect("column exists");
        let seq: Vec<f64> = order.iter().map(|&i| v[i]).filter(|x| x.is_finite()).collect();
        let holds = seq.len() >= 2 && seq.windows(2).all(|w| w[1] > w[0]);
        trends.push(vec![format!("{col}_increasing").into(), holds.into()]);
    }

    let mut lams = p.lambdas.clone();
    sort_desc(&mut lams);
    let pick = |col: &str| -> Vec<f64> {
        let v = table.floats(col).expect("column exists");
        lams.iter().map(|l| v[p.lambdas.iter().position(|x| x == l).expect("grid value")]).collect()
    };
    let xs: Vec<f64> = lams.iter().map(|l| (1.0 / l).ln()).collect();
    let (plot, svg) = plot_files(
        "pd",
        "Poisson-Delaunay walk",
        "log(1/lambda)",
        &xs,
        &[("ratio", pick("ratio")), ("graph_speed", pick("graph_speed")), ("h_over_l", pick("h_over_l"))],
    );
    Outcome { tables: vec![table, trends, plot], plots: vec![svg], passed: all_pass }
}

// ---------------------------------------------------------------- ra

#[derive(Clone, Debug, PartialEq)]
pub struct RaParams {
    pub seed: u64,
    pub rs: Vec<f64>,
    pub steps: usize,
    pub trials: usize,
    pub past: usize,
}

impl RaParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let p = Self {
            seed: cfg.value("seed", 1)?,
            rs: cfg.list("r", &[0.5, 1.0, 2.0, 4.0, 6.0])?,
            steps: cfg.value("steps", 200)?,
            trials: cfg.value("trials", 200)?,
            past: cfg.value("past", 100)?,
        };
        if let Some(r) = p.rs.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(usage(format!("step length {r} must be positive")));
        }
        check_steps(p.steps, 100_000)?;
        if p.steps < 2 {
            return Err(usage("steps must be at least 2"));
        }
        check_trials(p.trials)?;
        Ok(p)
    }
}

pub const RA_COLUMNS: &[(&str, &str)] = &[
    ("r", "step length"),
    ("steps", "walk length n"),
    ("trials", "independent walks"),
    ("speed", "d(x0, x_n)/n"),
    ("speed_err3", "3 standard errors"),
    ("speed_over_r", "speed / r"),
    ("lower_bound", "(1/2) log cosh r"),
    ("furstenberg", "mean of d(x_-i, x1) - d(x_-i, x0) over the past branch"),
    ("furstenberg_err3", "3 standard errors"),
    ("word_speed", "reduced word length / n"),
    ("word_speed_err3", "3 standard errors"),
    ("word_entropy", "entropy of the word walk from depths at n/2 and n"),
    ("word_entropy_err3", "3 standard errors"),
    ("bound_ok", "speed >= lower_bound - 3 sigma"),
    ("furstenberg_ok", "furstenberg and speed agree within combined 3 sigma"),
    ("pass", "all checks of this row"),
];

pub fn run_ra(p: &RaParams, w: &Workers) -> Outcome {
    let mut table = Table::new("ra", RA_COLUMNS);
    let mut all_pass = true;
    for (gi, &r) in p.rs.iter().enumerate() {
        let traces: Vec<WalkTrace> = w.map(p.trials, |i| {
            let mut rng = rng_for(trial_seed(p.seed, SALT_WALK, gi, i));
            right_angled_walk(r, p.steps, p.past, &mut rng).expect("validated step length")
        });
        let speed = Est::of(&speed_kingman(&traces));
        let furst = if p.past > 0 { Est::of(&speed_furstenberg(&traces)) } else { Est::NONE };
        let word = Est::of(&graph_speed(&traces));
        let half = p.steps / 2;
        let depths: Vec<(usize, usize)> =
            traces.iter().map(|t| (t.steps[half].d_graph as usize, t.last().d_graph as usize)).collect();
        let entropy = Est::of(&tree_entropy_from_depths(4, half, p.steps, &depths));
        let bound = right_angled_lower_bound(r);
        let bound_ok = speed.known() && speed.mean >= bound - 3.0 * speed.se;
        let furstenberg_ok = agree(furst, speed);
        let pass = bound_ok && furstenberg_ok;
        all_pass &= pass;
        table.push(row(vec![
            vec![r.into(), p.steps.into(), p.trials.into()],
            speed.cells().into(),
            vec![(speed.mean / r).into(), bound.into()],
            furst.cells().into(),
            word.cells().into(),
            entropy.cells().into(),
            vec![bound_ok.into(), furstenberg_ok.into(), pass.into()],
        ]));
    }
    let speeds = table.floats("speed_over_r").expect("column exists");
    let bounds: Vec<f64> = p.rs.iter().map(|&r| right_angled_lower_bound(r) / r).collect();
    let (plot, svg) = plot_files("ra", "Right-angled walk", "r", &p.rs, &[("speed_over_r", speeds), ("bound_over_r", bounds)]);
    Outcome { tables: vec![table, plot], plots: vec![svg], passed: all_pass }
}

// ---------------------------------------------------------------- pq

#[derive(Clone, Debug, PartialEq)]
pub struct PqParams {
    pub seed: u64,
    pub p: u32,
    pub qs: Vec<u32>,
    pub steps: usize,
    pub trials: usize,
    pub past: usize,
    pub entropy_n: usize,
}

impl PqParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let p = Self {
            seed: cfg.value("seed", 1)?,
            p: cfg.value("p", 3)?,
            qs: cfg.list("q", &[10, 20, 50])?,
            steps: cfg.value("steps", 100)?,
            trials: cfg.value("trials", 200)?,
            past: cfg.value("past", 60)?,
            entropy_n: cfg.value("entropy_n", 3)?,
        };
        for &q in &p.qs {
            TessellationSpec::new(p.p, q).map_err(|e| usage(e.to_string()))?;
        }
        check_steps(p.steps, 100_000)?;
        check_trials(p.trials)?;
        if p.entropy_n == 0 || p.entropy_n > 4 {
            return Err(usage("entropy_n must be in 1..=4"));
        }
        Ok(p)
    }
}

/// `H_n − H_{n−1}` of the exact tessellation walk law.
pub fn pq_entropy(spec: &TessellationSpec, n: usize) -> f64 {
    let laws = pq_distributions(spec, n);
    distribution_entropy(laws[n].iter().copied()) - distribution_entropy(laws[n - 1].iter().copied())
}

pub const PQ_COLUMNS: &[(&str, &str)] = &[
    ("p", "polygon sides"),
    ("q", "polygons per vertex"),
    ("side", "edge length"),
    ("steps", "walk length n"),
    ("trials", "independent walks"),
    ("speed", "d(x0, x_n)/n"),
    ("speed_err3", "3 standard errors"),
    ("speed_over_2logq", "speed / (2 log q)"),
    ("speed_over_2logq_err3", "3 standard errors"),
    ("furstenberg", "mean of d(x_-i, x1) - d(x_-i, x0) over the past branch"),
    ("furstenberg_err3", "3 standard errors"),
    ("entropy", "exact H_n - H_(n-1) at n = entropy_n"),
    ("h_over_l", "entropy / speed"),
    ("furstenberg_ok", "furstenberg and speed agree within combined 3 sigma"),
    ("pass", "all checks of this row"),
];

pub fn run_pq(p: &PqParams, w: &Workers) -> Outcome {
    let mut table = Table::new("pq", PQ_COLUMNS);
    let mut all_pass = true;
    for (gi, &q) in p.qs.iter().enumerate() {
        let spec = TessellationSpec::new(p.p, q).expect("validated");
        let traces: Vec<WalkTrace> = w.map(p.trials, |i| {
            let mut rng = rng_for(trial_seed(p.seed, SALT_WALK, gi, i));
            pq_walk(&spec, p.steps, p.past, &mut rng)
        });
        let speed = Est::of(&speed_kingman(&traces));
        let ratio = speed.scaled(1.0 / (2.0 * f64::from(q).ln()));
        let furst = if p.past > 0 { Est::of(&speed_furstenberg(&traces)) } else { Est::NONE };
        let h = pq_entropy(&spec, p.entropy_n);
        let furstenberg_ok = agree(furst, speed);
        all_pass &= furstenberg_ok;
        table.push(row(vec![
            vec![p.p.into(), q.into(), spec.side().into(), p.steps.into(), p.trials.into()],
            speed.cells().into(),
            ratio.cells().into(),
            furst.cells().into(),
            vec![h.into(), (h / speed.mean).into(), furstenberg_ok.into(), furstenberg_ok.into()],
        ]));
    }
    let xs: Vec<f64> = p.qs.iter().map(|&q| f64::from(q).ln()).collect();
    let ys = table.floats("speed_over_2logq").expect("column exists");
    let hl = table.floats("h_over_l").expect("column exists");
    let (plot, svg) = plot_files("pq", "Tessellation walk", "log q", &xs, &[("speed_over_2logq", ys), ("h_over_l", hl)]);
    Outcome { tables: vec![table, plot], plots: vec![svg], passed: all_pass }
}

// ---------------------------------------------------------------- lyap

#[derive(Clone, Debug, PartialEq)]
pub struct LyapParams {
    pub seed: u64,
    /// `None` for the built-in test pair.
    pub spec: Option<String>,
    pub dist: MatrixDistribution,
    pub steps: usize,
    pub trials: usize,
    pub samples: usize,
    pub burn_in: usize,
}

/// `a b c d weight` per line, `#` comments.
pub fn parse_matrix_spec(text: &str) -> Result<MatrixDistribution, UsageError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let xs: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("matrix spec line {}: not numbers", i + 1)))?;
        if xs.len() != 5 {
            return Err(usage(format!("matrix spec line {}: expected a b c d weight", i + 1)));
        }
        entries.push(([xs[0], xs[1], xs[2], xs[3]], xs[4]));
    }
    MatrixDistribution::new(&entries).map_err(|e| usage(format!("matrix spec: {e}")))
}

impl LyapParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let spec = cfg.optional("spec");
        let dist = match &spec {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?;
                parse_matrix_spec(&text)?
            }
            None => MatrixDistribution::test_pair(),
        };
        let p = Self {
            seed: cfg.value("seed", 1)?,
            spec,
            dist,
            steps: cfg.value("steps", 500)?,
            trials: cfg.value("trials", 400)?,
            samples: cfg.value("samples", 4000)?,
            burn_in: cfg.value("burn_in", hyperwalk::walks::matrix::DEFAULT_BURN_IN)?,
        };
        check_steps(p.steps, 10_000_000)?;
        if p.trials < 2 || p.samples < 2 {
            return Err(usage("trials and samples must be at least 2"));
        }
        Ok(p)
    }
}

pub const LYAP_COLUMNS: &[(&str, &str)] = &[
    ("distribution", "law of the factors"),
    ("steps", "product length n"),
    ("trials", "independent products"),
    ("chi_direct", "log||A_n...A_1||/n"),
    ("chi_direct_err3", "3 standard errors"),
    ("chi_furstenberg", "E log|A v| with v stationary"),
    ("chi_furstenberg_err3", "3 standard errors"),
    ("quotient_speed", "d(Id, [A_n...A_1])/n in SO(2)\\SL(2,R)"),
    ("quotient_speed_err3", "3 standard errors"),
    ("sqrt2_chi", "sqrt(2) * chi_direct"),
    ("agree_ok", "direct and stationary estimates agree within combined 3 sigma"),
    ("quotient_ok", "quotient_speed within 3 sigma of sqrt2_chi"),
    ("control_ok", "rotation-only law has |chi| <= 0.01; vacuous otherwise"),
    ("pass", "all checks of this row"),
];

fn lyap_row(p: &LyapParams, w: &Workers, name: &str, dist: &MatrixDistribution, gi: usize, control: bool) -> (Vec<Cell>, bool, Vec<f64>) {
    let traces = w.map(p.trials, |i| matrix_walk(dist, p.steps, &mut rng_for(trial_seed(p.seed, SALT_WALK, gi, i))));
    let stationary: Vec<[f64; 2]> = w.map(p.samples, |i| {
        let mut rng = rng_for(trial_seed(p.seed, SALT_STATIONARY, gi, i));
        stationary_directions(dist, 1, p.burn_in, &mut rng)[0]
    });
    let direct = Est::of(&lyapunov_direct(&traces));
    let furst = Est::of(&lyapunov_furstenberg(dist, &stationary, &mut rng_for(trial_seed(p.seed, SALT_EXTRA, gi, 0))));
    let quotient = Est::of(&quotient_speed(&traces));
    let agree_ok = agree(direct, furst);
    let quotient_ok = (quotient.mean - SQRT_2 * direct.mean).abs() <= 3.0 * quotient.se.hypot(SQRT_2 * direct.se) + 1e-12;
    let control_ok = !control || direct.mean.abs() <= 0.01;
    let pass = agree_ok && quotient_ok && control_ok;
    // running estimate at about 50 points
    let stride = (p.steps / 50).max(1);
    let running: Vec<f64> = (stride..=p.steps)
        .step_by(stride)
        .map(|k| traces.iter().map(|t| t.log_norms[k]).sum::<f64>() / (traces.len() * k) as f64)
        .collect();
    let cells = row(vec![
        vec![name.into(), p.steps.into(), p.trials.into()],
        direct.cells().into(),
        furst.cells().into(),
        quotient.cells().into(),
        vec![(SQRT_2 * direct.mean).into(), agree_ok.into(), quotient_ok.into(), control_ok.into(), pass.into()],
    ]);
    (cells, pass, running)
}

pub fn run_lyap(p: &LyapParams, w: &Workers) -> Outcome {
    let mut table = Table::new("lyap", LYAP_COLUMNS);
    let name = if p.spec.is_some() { "spec" } else { "test_pair" };
    let control = MatrixDistribution::uniform(&[rotation(0.7), rotation(-1.9)]).expect("rotations are unimodular");
    let (r1, ok1, run1) = lyap_row(p, w, name, &p.dist, 0, false);
    let (r2, ok2, run2) = lyap_row(p, w, "rotation_control", &control, 1, true);
    table.push(r1);
    table.push(r2);
    let stride = (p.steps / 50).max(1);
    let xs: Vec<f64> = (stride..=p.steps).step_by(stride).map(|k| k as f64).collect();
    let (plot, svg) = plot_files("lyap", "Running Lyapunov estimate", "n", &xs, &[(name, run1), ("rotation_control", run2)]);
    Outcome { tables: vec![table, plot], plots: vec![svg], passed: ok1 && ok2 }
}

// ---------------------------------------------------------------- dim

#[derive(Clone, Debug, PartialEq)]
pub enum DimWalk {
    Tessellation(TessellationSpec),
    RightAngled(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimParams {
    pub seed: u64,
    pub walk: DimWalk,
    pub samples: usize,
    pub steps: usize,
    pub scales: Vec<f64>,
    pub entropy_n: usize,
}

impl DimParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let kind: String = cfg.value("walk", "pq".to_string())?;
        let walk = match kind.as_str() {
            "pq" => {
                let (pp, q) = (cfg.value("p", 3u32)?, cfg.value("q", 50u32)?);
                DimWalk::Tessellation(TessellationSpec::new(pp, q).map_err(|e| usage(e.to_string()))?)
            }
            "ra" => {
                let r: f64 = cfg.value("r", 6.0)?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(usage(format!("step length {r} must be positive")));
                }
                DimWalk::RightAngled(r)
            }
            other => return Err(usage(format!("walk must be pq or ra, got {other:?}"))),
        };
        let lo: f64 = cfg.value("scale_min", 1e-5)?;
        let hi: f64 = cfg.value("scale_max", 0.1)?;
        let count: usize = cfg.value("scale_count", 13)?;
        if !(lo > 0.0 && hi > lo && count >= 3) {
            return Err(usage("scales need 0 < scale_min < scale_max and scale_count >= 3"));
        }
        let p = Self {
            seed: cfg.value("seed", 1)?,
            walk,
            samples: cfg.value("samples", 10_000)?,
            steps: cfg.value("steps", 10)?,
            scales: log_grid(lo, hi, count),
            entropy_n: cfg.value("entropy_n", 3)?,
        };
        check_steps(p.steps, 100_000)?;
        if p.samples < 30 {
            return Err(usage("samples must be at least 30"));
        }
        if p.entropy_n == 0 || p.entropy_n > 4 {
            return Err(usage("entropy_n must be in 1..=4"));
        }
        Ok(p)
    }
}

pub const DIM_COLUMNS: &[(&str, &str)] = &[
    ("walk", "walk family and parameters"),
    ("samples", "boundary samples"),
    ("steps", "walk length used as the boundary proxy"),
    ("slope", "correlation dimension"),
    ("slope_err3", "3 standard errors of the fitted slope"),
    ("residual", "fit residual"),
    ("scales", "scales used in the fit"),
    ("truncation", "bound on the angular truncation error"),
    ("speed", "d(x0, x_n)/n"),
    ("speed_err3", "3 standard errors"),
    ("entropy", "exact H_n - H_(n-1) at n = entropy_n"),
    ("h_over_l", "entropy / speed"),
    ("uniform_slope", "correlation dimension of uniform angles"),
    ("uniform_slope_err3", "3 standard errors"),
    ("below_bound", "slope <= h_over_l + 0.1"),
    ("below_0_9", "slope < 0.9"),
    ("uniform_ok", "|uniform_slope - 1| <= 0.05"),
    ("pass", "below_bound and uniform_ok"),
];

pub fn run_dim(p: &DimParams, w: &Workers) -> Outcome {
    let traces: Vec<WalkTrace> = w.map(p.samples, |i| {
        let mut rng = rng_for(trial_seed(p.seed, SALT_WALK, 0, i));
        match &p.walk {
            DimWalk::Tessellation(spec) => pq_walk(spec, p.steps, 0, &mut rng),
            DimWalk::RightAngled(r) => right_angled_walk(*r, p.steps, 0, &mut rng).expect("validated step length"),
        }
    });
    let (label, h) = match &p.walk {
        DimWalk::Tessellation(spec) => (format!("pq({};{})", spec.p(), spec.q()), pq_entropy(spec, p.entropy_n)),
        DimWalk::RightAngled(r) => {
            (format!("ra({r})"), tree_entropy(4, p.entropy_n) - tree_entropy(4, p.entropy_n - 1))
        }
    };
    let speed = Est::of(&speed_kingman(&traces));
    let sample = BoundarySample::from_traces(&traces, speed.mean);
    let fit = dimension_correlation(&sample, &p.scales);
    let slope = Est::of(&fit);
    let (residual, used, trunc) = match &fit {
        Ok(r) => (r.diagnostic("residual").unwrap_or(f64::NAN), r.diagnostic("scales").unwrap_or(0.0) as usize, sample.truncation()),
        Err(_) => (f64::NAN, 0, sample.truncation()),
    };
    let mut rng = rng_for(trial_seed(p.seed, SALT_EXTRA, 0, 0));
    let uniform = BoundarySample::new((0..p.samples).map(|_| rng.random::<f64>() * TAU).collect(), 0.0);
    let uni = Est::of(&dimension_correlation(&uniform, &p.scales));
    let h_over_l = h / speed.mean;
    let below_bound = slope.known() && slope.mean <= h_over_l + 0.1;
    let below = slope.known() && slope.mean < 0.9;
    let uniform_ok = uni.known() && (uni.mean - 1.0).abs() <= 0.05;
    let pass = below_bound && uniform_ok;

    let mut table = Table::new("dim", DIM_COLUMNS);
    table.push(row(vec![
        vec![label.into(), sample.len().into(), p.steps.into()],
        slope.cells().into(),
        vec![residual.into(), used.into(), trunc.into()],
        speed.cells().into(),
        vec![h.into(), h_over_l.into()],
        uni.cells().into(),
        vec![below_bound.into(), below.into(), uniform_ok.into(), pass.into()],
    ]));
    let xs: Vec<f64> = p.scales.iter().map(|r| r.ln()).collect();
    let logc = |s: &BoundarySample| s.pair_fractions(&p.scales).iter().map(|c| c.ln()).collect::<Vec<f64>>();
    let (plot, svg) = plot_files("dim", "Correlation sums", "log r", &xs, &[("walk", logc(&sample)), ("uniform", logc(&uniform))]);
    Outcome { tables: vec![table, plot], plots: vec![svg], passed: pass }
}

// ---------------------------------------------------------------- edgeprob

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeParams {
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub rs: Vec<f64>,
    pub trials: usize,
}

impl EdgeParams {
    pub fn parse(cfg: &mut Config) -> Result<Self, UsageError> {
        let p = Self {
            seed: cfg.value("seed", 1)?,
            lambdas: cfg.list("lambda", &[1.0])?,
            rs: cfg.list("r", &[1.0, 2.0, 4.0])?,
            trials: cfg.value("trials", 10_000)?,
        };
        if let Some(l) = p.lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(usage(format!("lambda {l} outside (0, 1]")));
        }
        if let Some(r) = p.rs.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(usage(format!("distance {r} must be positive")));
        }
        check_trials(p.trials)?;
        Ok(p)
    }
}

pub const EDGE_COLUMNS: &[(&str, &str)] = &[
    ("lambda", "intensity"),
    ("r", "distance of the planted point"),
    ("trials", "environments sampled"),
    ("estimate", "fraction of trials where the planted point is adjacent to o"),
    ("estimate_err3", "3 standard errors"),
    ("lower_bound", "exp(-lambda V(r/2))"),
    ("upper_bound", "exp(-lambda V(r/2 - 3)), V of a negative radius is 0"),
    ("uncertified", "trials lost to certification failure"),
    ("pass", "lower - 3 sigma <= estimate <= upper + 3 sigma, sigma at least the binomial spread of the bound"),
];

pub fn run_edgeprob(p: &EdgeParams, w: &Workers) -> Outcome {
    let mut table = Table::new("edgeprob", EDGE_COLUMNS);
    let mut all_pass = true;
    let mut grid = 0;
    for &lambda in &p.lambdas {
        for &r in &p.rs {
            let results = w.map(p.trials, |i| edge_trial(lambda, r, trial_seed(p.seed, SALT_ENV, grid, i)));
            grid += 1;
            let report = edge_report(lambda, r, &results);
            let est = Est::of(&report);
            let diag = |k: &str| report.as_ref().ok().and_then(|r| r.diagnostic(k)).unwrap_or(f64::NAN);
            let (lo, hi) = (diag("lower_bound"), diag("upper_bound"));
            let uncertified = results.iter().filter(|r| r.is_err()).count();
            // a zero count has zero sample variance, so each side is also
            // allowed the binomial spread of the bound itself
            let n = (p.trials - uncertified).max(1) as f64;
            let spread = |b: f64| est.se.max((b * (1.0 - b) / n).sqrt());
            let pass = est.known() && est.mean >= lo - 3.0 * spread(lo) && est.mean <= hi + 3.0 * spread(hi);
            all_pass &= pass;
            table.push(row(vec![
                vec![lambda.into(), r.into(), p.trials.into()],
                est.cells().into(),
                vec![lo.into(), hi.into(), uncertified.into(), pass.into()],
            ]));
        }
    }
    let xs: Vec<f64> = (0..table.rows().len()).map(|i| table.floats("r").expect("column")[i]).collect();
    let (plot, svg) = plot_files(
        "edgeprob",
        "Edge probability",
        "r",
        &xs,
        &[
            ("estimate", table.floats("estimate").expect("column")),
            ("lower_bound", table.floats("lower_bound").expect("column")),
            ("upper_bound", table.floats("upper_bound").expect("column")),
        ],
    );
    Outcome { tables: vec![table, plot], plots: vec![svg], passed: all_pass }
}

// ---------------------------------------------------------------- dispatch

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Pd(PdParams),
    Ra(RaParams),
    Pq(PqParams),
    Lyap(LyapParams),
    Dim(DimParams),
    EdgeProb(EdgeParams),
}

impl Experiment {
    /// Reads and validates every key the command uses; unknown keys are an
    /// error.
    pub fn parse(command: &str, cfg: &mut Config) -> Result<Self, UsageError> {
        let e = match command {
            "pd" => Self::Pd(PdParams::parse(cfg)?),
            "ra" => Self::Ra(RaParams::parse(cfg)?),
            "pq" => Self::Pq(PqParams::parse(cfg)?),
            "lyap" => Self::Lyap(LyapParams::parse(cfg)?),
            "dim" => Self::Dim(DimParams::parse(cfg)?),
            "edgeprob" => Self::EdgeProb(EdgeParams::parse(cfg)?),
            other => return Err(usage(format!("unknown command {other:?}"))),
        };
        cfg.check_unused()?;
        Ok(e)
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Pd(p) => p.seed,
            Self::Ra(p) => p.seed,
            Self::Pq(p) => p.seed,
            Self::Lyap(p) => p.seed,
            Self::Dim(p) => p.seed,
            Self::EdgeProb(p) => p.seed,
        }
    }

    pub fn run(&self, w: &Workers) -> Outcome {
        match self {
            Self::Pd(p) => run_pd(p, w),
            Self::Ra(p) => run_ra(p, w),
            Self::Pq(p) => run_pq(p, w),
            Self::Lyap(p) => run_lyap(p, w),
            Self::Dim(p) => run_dim(p, w),
            Self::EdgeProb(p) => run_edgeprob(p, w),
        }
    }
}
