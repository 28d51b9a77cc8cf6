//! Simple random walk on the Poisson-Delaunay graph.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use super::{Frame, WalkTrace};
use crate::delaunay::Environment;
use crate::error::{GraphError, WalkError};
use crate::field::{location_distance, Chart, PointId, Site};
use crate::geom::VolumeProfile;

const MAX_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdOptions {
    pub steps: usize,
    pub past_steps: usize,
    /// Measure the graph distance `d_G(x₀, x_n)` at the last step.
    pub graph_distance: bool,
    /// Relative tolerance between the frame product and the tile distance.
    pub guard: f64,
}

impl Default for PdOptions {
    fn default() -> Self {
        Self { steps: 100, past_steps: 0, graph_distance: false, guard: 1e-6 }
    }
}

/// Walks from the root of `env`. Distances come from tile coordinates; the
/// product of chart transitions is carried alongside for the directions and
/// as a cross-check. A certification failure ends the trace early and marks
/// it invalid.
pub fn pd_walk(env: &Environment, opts: &PdOptions, rng: &mut impl Rng) -> Result<WalkTrace, WalkError> {
    let lambda = env.lambda();
    if !(0.05..=1.0).contains(&lambda) {
        return Err(GraphError::Intensity(lambda).into());
    }
    if opts.steps > MAX_STEPS {
        return Err(WalkError::TooManySteps { max: MAX_STEPS, got: opts.steps });
    }
    let width = env.width();
    let root = env.root();
    let mut trace = WalkTrace::start();
    trace.weight = env.neighbors(&root)?.len() as f64;

    let mut path = vec![root.clone()];
    let mut frame = Frame::identity();
    let mut chart = Chart::centered(&root.location);
    for _ in 0..opts.steps {
        let cur = path.last().expect("path starts at root");
        let next = match env.neighbors(cur) {
            Ok(nb) => nb[rng.random_range(0..nb.len())].clone(),
            Err(e) => {
                trace.valid = false;
                trace.failure = Some(e.to_string());
                break;
            }
        };
        let next_chart = Chart::centered(&next.location);
        frame = frame.then(&chart.transition(&next_chart, width));
        chart = next_chart;
        let d = location_distance(&root.location, &next.location, width);
        let step = location_distance(&cur.location, &next.location, width);
        trace.push(d, f64::NAN, frame, step);
        let by_frame = frame.displacement();
        if (by_frame - d).abs() > opts.guard * d.max(1.0) {
            trace.steps.last_mut().expect("just pushed").flagged = true;
            trace.valid = false;
            trace.failure.get_or_insert_with(|| format!("frame drift {by_frame} vs {d}"));
        }
        path.push(next);
    }

    if opts.past_steps > 0 && path.len() > 1 {
        let x1 = path[1].location.clone();
        let mut cur = root.clone();
        for _ in 0..opts.past_steps {
            match env.neighbors(&cur) {
                Ok(nb) => cur = nb[rng.random_range(0..nb.len())].clone(),
                Err(e) => {
                    trace.valid = false;
                    trace.failure.get_or_insert_with(|| e.to_string());
                    break;
                }
            }
            trace.past.push((
                location_distance(&cur.location, &root.location, width),
                location_distance(&cur.location, &x1, width),
            ));
        }
    }

    if opts.graph_distance && path.len() > 1 {
        let slack = (VolumeProfile::plane().neighbor_radius(lambda).max(0.0) + 2.0).max(3.0);
        match graph_distance(env, &path, slack) {
            Ok(g) => trace.steps.last_mut().expect("nonempty").d_graph = g as f64,
            Err(e) => {
                trace.valid = false;
                trace.failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    Ok(trace)
}

/// `d_G(first, last)` of a path, by bidirectional breadth-first search
/// through vertices with `d(a, v) + d(v, b) ≤ d(a, b) + slack`. The path
/// itself always qualifies, so the result never exceeds its length; a
/// geodesic leaving the ellipse would be missed.
pub fn graph_distance(env: &Environment, path: &[Site], slack: f64) -> Result<usize, GraphError> {
    let (a, b) = (&path[0], path.last().expect("nonempty path"));
    if a.id == b.id {
        return Ok(0);
    }
    let width = env.width();
    let bound = location_distance(&a.location, &b.location, width) + slack;
    let on_path: HashSet<PointId> = path.iter().map(|s| s.id).collect();
    let admit = |v: &Site| {
        on_path.contains(&v.id)
            || location_distance(&a.location, &v.location, width) + location_distance(&v.location, &b.location, width) <= bound
    };

    let mut seen = [HashMap::from([(a.id, 0usize)]), HashMap::from([(b.id, 0usize)])];
    let mut frontier = [vec![a.clone()], vec![b.clone()]];
    let mut best = path.len() - 1;
    let mut radius = [0usize, 0usize];
    while !frontier[0].is_empty() && !frontier[1].is_empty() && radius[0] + radius[1] + 1 < best {
        let side = usize::from(frontier[1].len() < frontier[0].len());
        let mut next = Vec::new();
        for v in std::mem::take(&mut frontier[side]) {
            for u in env.neighbors(&v)?.iter() {
                if seen[side].contains_key(&u.id) || !admit(u) {
                    continue;
                }
                let du = radius[side] + 1;
                seen[side].insert(u.id, du);
                if let Some(&other) = seen[1 - side].get(&u.id) {
                    best = best.min(du + other);
                }
                next.push(u.clone());
            }
        }
        radius[side] += 1;
        frontier[side] = next;
    }
    Ok(best)
}

/// Entropies `H_0, …, H_{n_max}` of the walk's exact `k`-step laws from the
/// root.
pub fn pd_entropies(env: &Environment, n_max: usize) -> Result<Vec<f64>, GraphError> {
    let mut law: HashMap<PointId, (Site, f64)> = HashMap::from([(PointId::ROOT, (env.root(), 1.0))]);
    let mut out = vec![0.0];
    for _ in 0..n_max {
        let mut next: HashMap<PointId, (Site, f64)> = HashMap::with_capacity(law.len() * 7);
        let mut ids: Vec<&PointId> = law.keys().collect();
        ids.sort();
        for id in ids {
            let (site, p) = &law[id];
            let nb = env.neighbors(site)?;
            let share = p / nb.len() as f64;
            for u in nb.iter() {
                next.entry(u.id).or_insert_with(|| (u.clone(), 0.0)).1 += share;
            }
        }
        out.push(crate::estimate::distribution_entropy(next.values().map(|x| x.1)));
        law = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn walk_moves_along_edges() {
        let env = Environment::sample(11, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = PdOptions { steps: 30, past_steps: 5, graph_distance: true, ..Default::default() };
        let t = pd_walk(&env, &opts, &mut rng).unwrap();
        assert!(t.valid, "{:?}", t.failure);
        assert_eq!(t.n(), 30);
        assert_eq!(t.past.len(), 5);
        assert!(t.weight >= 3.0);
        assert!(t.satisfies_triangle_inequality(1e-8));
        let g = t.last().d_graph;
        assert!(g >= 0.0 && g <= 30.0 && (g - g.round()).abs() == 0.0);
        assert!(t.steps.iter().all(|s| !s.flagged));
    }

    #[test]
    fn walk_is_reproducible() {
        let run = || {
            let env = Environment::sample(12, 0.3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            pd_walk(&env, &PdOptions { steps: 20, ..Default::default() }, &mut rng).unwrap().export()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_requests() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = Environment::sample(13, 0.01).unwrap();
        assert!(pd_walk(&env, &PdOptions::default(), &mut rng).is_err());
        let env = Environment::sample(13, 0.5).unwrap();
        let opts = PdOptions { steps: 201, ..Default::default() };
        assert!(matches!(pd_walk(&env, &opts, &mut rng), Err(WalkError::TooManySteps { .. })));
    }

    #[test]
    fn one_step_entropy_is_log_degree() {
        let env = Environment::sample(14, 0.5).unwrap();
        let h = pd_entropies(&env, 2).unwrap();
        let deg = env.neighbors(&env.root()).unwrap().len() as f64;
        assert!((h[1] - deg.ln()).abs() < 1e-12);
        assert!(h[2] > h[1]);
    }

    #[test]
    fn graph_distance_of_a_neighbor_is_one() {
        let env = Environment::sample(15, 0.5).unwrap();
        let root = env.root();
        let nb = env.neighbors(&root).unwrap();
        let two = env.neighbors(&nb[0]).unwrap();
        let back = two.iter().find(|s| s.id != root.id && !nb.iter().any(|n| n.id == s.id)).unwrap().clone();
        assert_eq!(graph_distance(&env, &[root.clone(), nb[0].clone()], 3.0).unwrap(), 1);
        assert_eq!(graph_distance(&env, &[root, nb[0].clone(), back], 3.0).unwrap(), 2);
    }
}
