//! Hyperbolic Delaunay graphs in the Poincaré disk.
//!
//! Hyperbolic disks are exactly the Euclidean disks inside the unit disk, so
//! the hyperbolic Delaunay graph is the Euclidean one with each edge kept iff
//! one of its empty circles lies strictly inside the unit disk. The empty
//! circles through an edge form a pencil whose centers sweep the segment of
//! the Voronoi edge between the two adjacent circumcenters.

mod environment;
pub mod triangulation;

pub use environment::{
    annulus_profile, degree_report, edge_probability, edge_report, edge_trial, root_degree_stats,
    root_degree_trial, Environment, GraphConfig,
};

use std::fmt::Write as _;

use crate::field::PointId;
use crate::Point;
use triangulation::{Edge, Triangulation, GHOST};

/// Default safety margin between a certificate and the window edge.
pub const DEFAULT_MARGIN: f64 = 0.5;

/// Delaunay graph of a finite sample with per-vertex certification radii.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub coords: Vec<Point>,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<u32>>,
    /// Hyperbolic radius of the sample window around the disk origin.
    pub window: f64,
    pub margin: f64,
    /// Radius about the origin containing every circumdisk incident to the
    /// vertex; infinite on the hull.
    pub r_needed: Vec<f64>,
    /// An exact cocircularity was resolved by perturbation.
    pub degenerate: bool,
}

impl LocalGraph {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// The vertex's neighbor set cannot change when points outside the
    /// window are added.
    pub fn certified(&self, v: usize) -> bool {
        self.r_needed[v] <= self.window - self.margin
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e = Vec::new();
        for (a, nb) in self.adjacency.iter().enumerate() {
            for &b in nb {
                if (a as u32) < b {
                    e.push((a as u32, b));
                }
            }
        }
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertStatus {
    Certified,
    Uncertified,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub root: usize,
    pub r_needed: f64,
    pub status: CertStatus,
}

pub fn certify_root(graph: &LocalGraph, root: usize) -> Certificate {
    let status = if graph.certified(root) { CertStatus::Certified } else { CertStatus::Uncertified };
    Certificate { root, r_needed: graph.r_needed[root], status }
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], ux.hypot(uy))
}

/// Does some circle through `p`, `q` with center parameter in `[lo, hi]` fit
/// strictly inside the unit disk? The parameter is the signed offset of the
/// center from the chord midpoint along the left normal of `p → q`.
fn pencil_fits(p: [f64; 2], q: [f64; 2], lo: f64, hi: f64) -> bool {
    let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    let n = [-dy / len, dx / len];
    let h = len / 2.0;
    // |C| + ρ is convex in s
    let phi = |s: f64| (m[0] + s * n[0]).hypot(m[1] + s * n[1]) + h.hypot(s);
    // phi(s) ≥ |s|, so only |s| < 1 can work
    // one of the two circumcircles already fits: the common case
    if (hi.is_finite() && phi(hi) < 1.0) || (lo.is_finite() && phi(lo) < 1.0) {
        return true;
    }
    let (mut a, mut b) = (lo.max(-1.0), hi.min(1.0));
    if a > b {
        // a single circle when rounding crossed the two circumcenters
        let s = (lo + hi) / 2.0;
        return lo > hi && s.abs() < 1.0 && phi(s) < 1.0;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..90 {
        if f1 < 1.0 || f2 < 1.0 {
            return true;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = phi(x2);
        }
    }
    phi(a) < 1.0 || phi(b) < 1.0 || f1.min(f2) < 1.0
}

fn center_param(p: [f64; 2], q: [f64; 2], apex: [f64; 2]) -> f64 {
    let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    let (c, _) = circumcircle(p, q, apex);
    ((c[0] - m[0]) * -dy + (c[1] - m[1]) * dx) / len
}

/// Is the Euclidean Delaunay edge also hyperbolic?
fn hyperbolic_edge(pts: &[[f64; 2]], e: &Edge) -> bool {
    let (p, q) = (pts[e.a as usize], pts[e.b as usize]);
    let hi = e.left.map_or(f64::INFINITY, |x| center_param(p, q, pts[x as usize]));
    let lo = e.right.map_or(f64::NEG_INFINITY, |x| center_param(p, q, pts[x as usize]));
    pencil_fits(p, q, lo, hi)
}

/// Hyperbolic Delaunay graph of the points, which are taken to be every
/// sample point within `window` of the disk origin.
pub fn build_local(points: &[Point], window: f64, margin: f64) -> LocalGraph {
    let n = points.len();
    let pts: Vec<[f64; 2]> = points.iter().map(|p| [p.re(), p.im()]).collect();
    let mut adjacency = vec![Vec::new(); n];
    let mut r_needed = vec![f64::INFINITY; n];
    let mut degenerate = false;
    let add = |a: u32, b: u32, adj: &mut Vec<Vec<u32>>| {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    };
    let tri = Triangulation::new(&pts);
    if tri.is_flat() {
        // all points on one line: consecutive pairs, every side free
        let mut idx: Vec<u32> = (0..n as u32).filter(|i| !tri.skipped().contains(i)).collect();
        idx.sort_by(|&i, &j| {
            let (p, q) = (pts[i as usize], pts[j as usize]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
        });
        for w in idx.windows(2) {
            let e = Edge { a: w[0], b: w[1], left: None, right: None };
            if hyperbolic_edge(&pts, &e) {
                add(w[0], w[1], &mut adjacency);
            }
        }
    } else {
        degenerate = tri.degenerate();
        for e in tri.edges() {
            if hyperbolic_edge(&pts, &e) {
                add(e.a, e.b, &mut adjacency);
            }
        }
        for v in 0..n {
            if !tri.skipped().contains(&(v as u32)) {
                r_needed[v] = 0.0;
            }
        }
        for t in tri.triangles() {
            let [a, b, c] = t.v.map(|i| pts[i as usize]);
            let (cc, rho) = circumcircle(a, b, c);
            let ext = cc[0].hypot(cc[1]) + rho;
            let r = if ext < 1.0 { 2.0 * ext.atanh() } else { f64::INFINITY };
            for &v in &t.v {
                r_needed[v as usize] = r_needed[v as usize].max(r);
            }
        }
        for g in tri.ghosts() {
            for &v in g.v.iter().filter(|&&v| v != GHOST) {
                r_needed[v as usize] = f64::INFINITY;
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }
    LocalGraph { coords: points.to_vec(), adjacency, window, margin, r_needed, degenerate }
}

/// Adjacency export: a vertex table `v <id> <re> <im>` followed by one
/// `<id>: <id> <id> …` line per vertex.
pub fn export_adjacency(graph: &LocalGraph, ids: &[PointId]) -> String {
    let mut s = String::new();
    for (id, p) in ids.iter().zip(&graph.coords) {
        let _ = writeln!(s, "v {id} {:.16e} {:.16e}", p.re(), p.im());
    }
    for (v, nb) in graph.adjacency.iter().enumerate() {
        let _ = write!(s, "{}:", ids[v]);
        for &u in nb {
            let _ = write!(s, " {}", ids[u as usize]);
        }
        s.push('\n');
    }
    s
}

/// Parsed adjacency export: vertex table and undirected edge list by id.
pub fn parse_adjacency(text: &str) -> Option<(Vec<(PointId, f64, f64)>, Vec<(PointId, PointId)>)> {
    let id = |s: &str| u128::from_str_radix(s, 16).ok().map(PointId);
    let mut verts = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        if let Some(rest) = line.strip_prefix("v ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            verts.push((id(f[0])?, f[1].parse().ok()?, f[2].parse().ok()?));
        } else {
            let (head, tail) = line.split_once(':')?;
            let a = id(head.trim())?;
            for t in tail.split_whitespace() {
                let b = id(t)?;
                if a < b {
                    edges.push((a, b));
                }
            }
        }
    }
    edges.sort();
    Some((verts, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{dist, exp_ray, Isometry};
    use crate::oracle::naive_delaunay;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn uniform_ball(rng: &mut impl Rng, n: usize, r: f64) -> Vec<Point> {
        let total = r.cosh() - 1.0;
        (0..n)
            .map(|_| {
                let t = (1.0 + rng.random::<f64>() * total).acosh();
                exp_ray(rng.random::<f64>() * TAU, t).unwrap()
            })
            .collect()
    }

    #[test]
    fn two_points_make_an_edge() {
        let g = build_local(&[Point::origin(), exp_ray(0.4, 3.0).unwrap()], 5.0, 0.5);
        assert_eq!(g.edges(), vec![(0, 1)]);
        let g = build_local(&[exp_ray(0.0, 20.0).unwrap(), exp_ray(3.0, 20.0).unwrap()], 25.0, 0.5);
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn hexagon_around_root() {
        let mut pts = vec![Point::origin()];
        pts.extend((0..6).map(|k| exp_ray(k as f64 * TAU / 6.0, 1.0).unwrap()));
        let g = build_local(&pts, 3.0, 0.5);
        assert_eq!(g.adjacency[0], vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(g.edges(), naive_delaunay(&pts).unwrap().edges);
    }

    #[test]
    fn spread_out_points_match_oracle() {
        // far apart and not cocircular, so no near-ties
        let radii = [8.0, 8.5, 7.6, 8.2, 7.9];
        let pts: Vec<Point> = (0..5).map(|k| exp_ray(k as f64 * TAU / 5.0 + 0.1 * k as f64, radii[k]).unwrap()).collect();
        let g = build_local(&pts, 10.0, 0.5);
        let oracle = naive_delaunay(&pts).unwrap();
        assert_eq!(g.edges(), oracle.edges);
    }

    #[test]
    fn matches_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let pts = uniform_ball(&mut rng, 40, 6.0);
            let g = build_local(&pts, 6.0, 0.5);
            assert_eq!(g.edges(), naive_delaunay(&pts).unwrap().edges);
        }
    }

    #[test]
    fn isometry_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..30 {
            let pts = uniform_ball(&mut rng, 40, 5.0);
            let g = Isometry::translation_to(exp_ray(rng.random::<f64>() * TAU, 1.5).unwrap())
                .compose(&Isometry::rotation(rng.random::<f64>() * TAU));
            let moved: Vec<Point> = pts.iter().map(|&p| g.apply(p)).collect();
            assert_eq!(build_local(&pts, 6.0, 0.5).edges(), build_local(&moved, 8.0, 0.5).edges());
        }
    }

    #[test]
    fn certification_is_stable_under_enlargement() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut certified = 0;
        for _ in 0..40 {
            let mut pts = vec![Point::origin()];
            // intensity 1 in B_7, truncated to B_5
            let n = (crate::geom::VolumeProfile::plane().volume(7.0f64)) as usize;
            let all = uniform_ball(&mut rng, n, 7.0);
            let big_pts: Vec<Point> = pts.iter().copied().chain(all.iter().copied()).collect();
            pts.extend(all.iter().copied().filter(|&p| dist(Point::origin(), p) <= 5.0));
            let small = build_local(&pts, 5.0, 0.5);
            let big = build_local(&big_pts, 7.0, 0.5);
            if certify_root(&small, 0).status == CertStatus::Certified {
                certified += 1;
                let a: Vec<Point> = small.adjacency[0].iter().map(|&i| pts[i as usize]).collect();
                let b: Vec<Point> = big.adjacency[0].iter().map(|&i| big_pts[i as usize]).collect();
                let mut a: Vec<_> = a.iter().map(|p| (p.re().to_bits(), p.im().to_bits())).collect();
                let mut b: Vec<_> = b.iter().map(|p| (p.re().to_bits(), p.im().to_bits())).collect();
                a.sort();
                b.sort();
                assert_eq!(a, b);
            }
        }
        assert!(certified > 30);
    }

    #[test]
    fn lonely_root_is_uncertified() {
        let g = build_local(&[Point::origin()], 10.0, 0.5);
        assert_eq!(certify_root(&g, 0).status, CertStatus::Uncertified);
        let g = build_local(&[Point::origin(), exp_ray(0.0, 1.0).unwrap(), exp_ray(2.0, 1.0).unwrap()], 10.0, 0.5);
        assert_eq!(certify_root(&g, 0).status, CertStatus::Uncertified);
    }

    #[test]
    fn adjacency_export_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let pts = uniform_ball(&mut rng, 25, 4.0);
        let g = build_local(&pts, 4.0, 0.5);
        let ids: Vec<PointId> = (0..pts.len()).map(|i| PointId(1000 + i as u128)).collect();
        let (verts, edges) = parse_adjacency(&export_adjacency(&g, &ids)).unwrap();
        assert_eq!(verts.len(), 25);
        let mut expect: Vec<_> = g.edges().iter().map(|&(a, b)| (ids[a as usize], ids[b as usize])).collect();
        expect.sort();
        assert_eq!(edges, expect);
        assert_eq!(verts[3].1, pts[3].re());
    }
}
