//! Certified neighbor lookups in one realization of `P_λ ∪ {o}`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{build_local, LocalGraph};
use crate::error::GraphError;
use crate::estimate::EstimateReport;
use crate::field::{Chart, FieldConfig, FieldPoint, LazyField, Location, PointId, Site, PRECISION_RADIUS};
use crate::geom::{self, VolumeProfile};
use crate::stats::{mean_se, stream_seed, weighted_mean_se};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphConfig {
    pub margin: f64,
    /// First window is `R_λ + window_extra`.
    pub window_extra: f64,
    pub window_step: f64,
    pub window_cap: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { margin: super::DEFAULT_MARGIN, window_extra: 3.0, window_step: 2.0, window_cap: 40.0 }
    }
}

/// One environment: a field realization thinned to `lambda`, the base point
/// and any planted points, with a cache of certified neighbor sets.
pub struct Environment {
    field: Arc<LazyField>,
    lambda: f64,
    sites: Vec<Site>,
    config: GraphConfig,
    cache: Mutex<HashMap<PointId, Arc<[Site]>>>,
    builds: AtomicUsize,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment").field("field", &self.field).field("lambda", &self.lambda).finish()
    }
}

impl Environment {
    pub fn new(field: Arc<LazyField>, lambda: f64, config: GraphConfig) -> Result<Self, GraphError> {
        let lmax = field.config().lambda_max;
        if !(lambda > 0.0 && lambda <= lmax) {
            return Err(crate::error::FieldError::Coupling { lambda, lambda_max: lmax }.into());
        }
        Ok(Self {
            field,
            lambda,
            sites: vec![Site::root()],
            config,
            cache: Mutex::new(HashMap::new()),
            builds: AtomicUsize::new(0),
        })
    }

    /// Fresh field sampled directly at `lambda`, with tiles widened to hold
    /// as many points as the default ones do at unit intensity.
    pub fn sample(seed: u64, lambda: f64) -> Result<Self, GraphError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(GraphError::Intensity(lambda));
        }
        let base = FieldConfig::default();
        let config = FieldConfig { lambda_max: lambda, tile_width: base.tile_width / lambda.min(1.0), ..base };
        let field = LazyField::new(seed, config)?;
        Self::new(Arc::new(field), lambda, GraphConfig::default())
    }

    /// Adds a point that is present at every intensity. Clears the cache.
    pub fn plant(&mut self, location: Location) -> Site {
        let site = Site { id: PointId::planted(self.sites.len() - 1), location };
        self.sites.push(site.clone());
        self.cache.lock().expect("cache lock").clear();
        site
    }

    pub fn root(&self) -> Site {
        self.sites[0].clone()
    }

    pub fn field(&self) -> &LazyField {
        &self.field
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn width(&self) -> f64 {
        self.field.width()
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    /// Local triangulations performed so far.
    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    pub fn initial_window(&self) -> f64 {
        VolumeProfile::plane().neighbor_radius(self.lambda).max(0.0) + self.config.window_extra
    }

    /// Triangulates the window of radius `window` about `center`. Returns the
    /// graph, the sample and the index of `center` in it.
    pub fn local_graph(&self, center: &Site, window: f64) -> Result<(LocalGraph, Vec<FieldPoint>, usize), GraphError> {
        let chart = Chart::centered(&center.location);
        let pts = self.field.query_with(&chart, window, self.lambda, &self.sites)?;
        let at = pts.iter().position(|p| p.site.id == center.id).ok_or(GraphError::CertificationCap { cap: window })?;
        let coords: Vec<_> = pts.iter().map(|p| p.local).collect();
        self.builds.fetch_add(1, Ordering::Relaxed);
        Ok((build_local(&coords, window, self.config.margin), pts, at))
    }

    /// Grows the window until `center` is certified.
    pub fn certified_graph(&self, center: &Site) -> Result<(LocalGraph, Vec<FieldPoint>, usize), GraphError> {
        let cap = self.config.window_cap.min(PRECISION_RADIUS);
        let mut window = self.initial_window();
        loop {
            if window > cap {
                return Err(GraphError::CertificationCap { cap });
            }
            let (g, pts, at) = self.local_graph(center, window)?;
            if g.certified(at) {
                return Ok((g, pts, at));
            }
            window += self.config.window_step;
        }
    }

    /// Certified Delaunay neighbors of a vertex, cached. Every vertex the
    /// same window certifies is cached along the way.
    pub fn neighbors(&self, v: &Site) -> Result<Arc<[Site]>, GraphError> {
        if let Some(n) = self.cache.lock().expect("cache lock").get(&v.id) {
            return Ok(n.clone());
        }
        let (g, pts, at) = self.certified_graph(v)?;
        let mut cache = self.cache.lock().expect("cache lock");
        for (i, p) in pts.iter().enumerate() {
            if g.certified(i) && !cache.contains_key(&p.site.id) {
                let nb: Arc<[Site]> = g.adjacency[i].iter().map(|&j| pts[j as usize].site.clone()).collect();
                cache.insert(p.site.id, nb);
            }
        }
        Ok(cache.get(&pts[at].site.id).expect("center was certified").clone())
    }

    /// Cached vertices so far.
    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

fn check_lambda(lambda: f64) -> Result<(), GraphError> {
    if !(0.05..=1.0).contains(&lambda) {
        return Err(GraphError::Intensity(lambda));
    }
    Ok(())
}

fn tolerate(failed: usize, trials: usize) -> Result<(), GraphError> {
    if failed * 100 > trials {
        return Err(GraphError::TooManyFailures { failed, trials });
    }
    Ok(())
}

/// `deg(o)` in the environment seeded by `seed`.
pub fn root_degree_trial(lambda: f64, seed: u64) -> Result<usize, GraphError> {
    let env = Environment::sample(seed, lambda)?;
    Ok(env.neighbors(&env.root())?.len())
}

/// Mean root degree with its standard error; diagnostics carry the
/// degree-biased mean of `log deg` and `λ·E[deg]`.
pub fn root_degree_stats(lambda: f64, trials: usize, seed: u64) -> Result<EstimateReport, GraphError> {
    check_lambda(lambda)?;
    let results: Vec<_> = (0..trials).map(|i| root_degree_trial(lambda, stream_seed(seed, i as u64))).collect();
    degree_report(lambda, &results)
}

/// Aggregates per-trial degrees (in trial order).
pub fn degree_report(lambda: f64, results: &[Result<usize, GraphError>]) -> Result<EstimateReport, GraphError> {
    let degs: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok()).map(|&d| d as f64).collect();
    let failed = results.len() - degs.len();
    tolerate(failed, results.len())?;
    let m = mean_se(&degs);
    let logs: Vec<f64> = degs.iter().map(|d| d.ln()).collect();
    let biased = weighted_mean_se(&logs, &degs);
    Ok(EstimateReport::from_mean("root_degree", m)
        .with("lambda", lambda)
        .with("lambda_times_mean_degree", lambda * m.mean)
        .with("degree_biased_mean_log_degree", biased.mean)
        .with("log_mean_degree", m.mean.ln())
        .with("uncertified_trials", failed))
}

/// Is `x` at distance `r` from `o` a Delaunay neighbor of `o`?
pub fn edge_trial(lambda: f64, r: f64, seed: u64) -> Result<bool, GraphError> {
    let mut env = Environment::sample(seed, lambda)?;
    let at = geom::exp_ray(0.0, r).map_err(|_| GraphError::Length(r))?;
    let x = env.plant(Chart::base().locate(at, env.width()));
    Ok(env.neighbors(&env.root())?.iter().any(|s| s.id == x.id))
}

/// Monte-Carlo probability that a point planted at distance `r` is adjacent
/// to `o`, with the sandwich bounds `e^{−λV(r/2)}` and `e^{−λV(r/2−3)}`.
pub fn edge_probability(lambda: f64, r: f64, trials: usize, seed: u64) -> Result<EstimateReport, GraphError> {
    if !(r > 0.0) {
        return Err(GraphError::Length(r));
    }
    let results: Vec<_> = (0..trials).map(|i| edge_trial(lambda, r, stream_seed(seed, i as u64))).collect();
    edge_report(lambda, r, &results)
}

pub fn edge_report(lambda: f64, r: f64, results: &[Result<bool, GraphError>]) -> Result<EstimateReport, GraphError> {
    let hits: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok()).map(|&b| f64::from(u8::from(b))).collect();
    let failed = results.len() - hits.len();
    tolerate(failed, results.len())?;
    let v = VolumeProfile::plane();
    let lower = (-lambda * v.volume(r / 2.0)).exp();
    let upper = (-lambda * v.volume(r / 2.0 - geom::BALL_INTERSECTION_SLACK)).exp();
    Ok(EstimateReport::from_mean("edge_probability", mean_se(&hits))
        .with("lambda", lambda)
        .with("r", r)
        .with("lower_bound", lower)
        .with("upper_bound", upper)
        .with("uncertified_trials", failed))
}

/// Fraction of root neighbors whose distance from `o` misses `R_λ` by more
/// than each `M`.
pub fn annulus_profile(lambda: f64, trials: usize, seed: u64, ms: &[f64]) -> Result<Vec<f64>, GraphError> {
    let r_lambda = VolumeProfile::plane().neighbor_radius(lambda);
    let mut devs = Vec::new();
    for i in 0..trials {
        let env = Environment::sample(stream_seed(seed, i as u64), lambda)?;
        let w = env.width();
        for s in env.neighbors(&env.root())?.iter() {
            devs.push((crate::field::location_distance(&Location::base(), &s.location, w) - r_lambda).abs());
        }
    }
    Ok(ms.iter().map(|&m| devs.iter().filter(|&&d| d > m).count() as f64 / devs.len().max(1) as f64).collect())
}
