//! Incremental Bowyer–Watson Delaunay triangulation in the Euclidean plane.
//!
//! The hull is closed off with a vertex at infinity instead of a super
//! triangle, so no artificial coordinates enter the predicates. Orientation
//! and in-circle tests are the adaptive exact predicates of `robust`; exact
//! in-circle ties are broken by lifting points onto the paraboloid with
//! infinitesimal offsets that grow with the input index, which amounts to a
//! deterministic regular triangulation with vanishing weights.

use std::cmp::Reverse;

use robust::{incircle, orient2d, Coord};

pub const GHOST: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
pub struct Tri {
    /// Counter-clockwise for real triangles. A ghost holds [`GHOST`] once; its
    /// finite edge is the pair following it cyclically, exterior on the left.
    pub v: [u32; 3],
    /// `n[i]` lies across the edge opposite `v[i]`.
    pub n: [u32; 3],
}

impl Tri {
    pub fn is_ghost(&self) -> bool {
        self.v.contains(&GHOST)
    }

    fn edge(&self, i: usize) -> (u32, u32) {
        (self.v[(i + 1) % 3], self.v[(i + 2) % 3])
    }
}

/// Edge of the triangulation with the triangles on either side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    /// Third vertex of the triangle left of `a → b`, `None` for a hull side.
    pub left: Option<u32>,
    pub right: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pts: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    alive: Vec<bool>,
    free: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    last: u32,
    degenerate: bool,
    skipped: Vec<u32>,
}

fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn hilbert_key(mut x: u32, mut y: u32) -> u64 {
    let n: u32 = 1 << 16;
    let mut d = 0u64;
    let mut s = n >> 1;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += (s as u64) * (s as u64) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

fn hilbert_order(pts: &[[f64; 2]]) -> Vec<u32> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let q = |x: f64, k: usize| (((x - lo[k]) / span) * 65535.0).clamp(0.0, 65535.0) as u32;
    let mut idx: Vec<u32> = (0..pts.len() as u32).collect();
    idx.sort_by_key(|&i| {
        let p = pts[i as usize];
        (hilbert_key(q(p[0], 0), q(p[1], 1)), i)
    });
    idx
}

impl Triangulation {
    pub fn new(pts: &[[f64; 2]]) -> Self {
        let mut t = Self {
            pts: pts.to_vec(),
            tris: Vec::new(),
            alive: Vec::new(),
            free: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            last: 0,
            degenerate: false,
            skipped: Vec::new(),
        };
        let order = hilbert_order(pts);
        let Some(rest) = t.seed(&order) else {
            return t;
        };
        for i in rest {
            t.insert(i);
        }
        t
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.pts
    }

    /// An exact in-circle tie was resolved by the perturbation.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Input indices dropped as exact duplicates.
    pub fn skipped(&self) -> &[u32] {
        &self.skipped
    }

    /// Fewer than three non-collinear points: no triangles exist.
    pub fn is_flat(&self) -> bool {
        self.tris.is_empty()
    }

    fn orient(&self, a: u32, b: u32, p: u32) -> f64 {
        orient2d(c(self.pts[a as usize]), c(self.pts[b as usize]), c(self.pts[p as usize]))
    }

    /// Creates the first triangle and returns the remaining insertion order.
    fn seed(&mut self, order: &[u32]) -> Option<Vec<u32>> {
        let mut sorted = order.to_vec();
        sorted.sort_by(|&i, &j| {
            let (p, q) = (self.pts[i as usize], self.pts[j as usize]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(i.cmp(&j))
        });
        let mut dup = vec![false; self.pts.len()];
        for w in sorted.windows(2) {
            if self.pts[w[0] as usize] == self.pts[w[1] as usize] {
                dup[w[1] as usize] = true;
            }
        }
        let order: Vec<u32> = order.iter().copied().filter(|&i| !dup[i as usize]).collect();
        self.skipped = (0..self.pts.len() as u32).filter(|&i| dup[i as usize]).collect();
        if order.len() < 3 {
            return None;
        }
        let (a, b) = (order[0], order[1]);
        let k = (2..order.len()).find(|&k| self.orient(a, b, order[k]) != 0.0)?;
        let mut cc = order[k];
        let mut bb = b;
        if self.orient(a, bb, cc) < 0.0 {
            std::mem::swap(&mut bb, &mut cc);
        }
        let tris = [
            Tri { v: [a, bb, cc], n: [1, 2, 3] },
            Tri { v: [GHOST, cc, bb], n: [0, 3, 2] },
            Tri { v: [GHOST, a, cc], n: [0, 1, 3] },
            Tri { v: [GHOST, bb, a], n: [0, 2, 1] },
        ];
        self.tris.extend(tris);
        self.alive.extend([true; 4]);
        self.stamp.extend([0; 4]);
        let rest = order.iter().copied().enumerate().filter(|&(j, _)| j != 0 && j != 1 && j != k).map(|(_, i)| i).collect();
        Some(rest)
    }

    fn in_conflict(&mut self, t: u32, p: u32) -> bool {
        let tri = self.tris[t as usize];
        if let Some(g) = tri.v.iter().position(|&v| v == GHOST) {
            let (x, y) = tri.edge(g);
            let o = self.orient(x, y, p);
            if o != 0.0 {
                return o > 0.0;
            }
            let (px, py, pp) = (self.pts[x as usize], self.pts[y as usize], self.pts[p as usize]);
            let d1 = (pp[0] - px[0]) * (py[0] - px[0]) + (pp[1] - px[1]) * (py[1] - px[1]);
            let d2 = (pp[0] - py[0]) * (px[0] - py[0]) + (pp[1] - py[1]) * (px[1] - py[1]);
            return d1 > 0.0 && d2 > 0.0;
        }
        let [a, b, cc] = tri.v;
        let s = incircle(
            c(self.pts[a as usize]),
            c(self.pts[b as usize]),
            c(self.pts[cc as usize]),
            c(self.pts[p as usize]),
        );
        if s != 0.0 {
            return s > 0.0;
        }
        self.degenerate = true;
        self.perturbed_incircle(a, b, cc, p)
    }

    /// Sign of the in-circle determinant after raising the lift of each point
    /// by an infinitesimal that dominates all lower indices.
    fn perturbed_incircle(&self, a: u32, b: u32, cc: u32, d: u32) -> bool {
        let mut terms = [
            (a, self.orient(b, cc, d)),
            (b, -self.orient(a, cc, d)),
            (cc, self.orient(a, b, d)),
            (d, -self.orient(a, b, cc)),
        ];
        terms.sort_by_key(|t| Reverse(t.0));
        terms.iter().find(|t| t.1 != 0.0).is_some_and(|t| t.1 > 0.0)
    }

    /// A triangle in conflict with `p`, or `None` if `p` repeats a vertex.
    fn locate(&mut self, p: u32) -> Option<u32> {
        let mut t = if self.alive[self.last as usize] {
            self.last
        } else {
            self.alive.iter().position(|&a| a)? as u32
        };
        let budget = 3 * self.tris.len() + 16;
        for step in 0..budget {
            let tri = self.tris[t as usize];
            if tri.is_ghost() {
                break;
            }
            let mut moved = false;
            for k in 0..3 {
                let i = (k + step) % 3;
                let (x, y) = tri.edge(i);
                if self.orient(x, y, p) < 0.0 {
                    t = tri.n[i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }
        let q = self.pts[p as usize];
        if self.tris[t as usize].v.iter().any(|&v| v != GHOST && self.pts[v as usize] == q) {
            return None;
        }
        if self.in_conflict(t, p) {
            return Some(t);
        }
        // Fallback for walks that stalled on a degenerate configuration.
        (0..self.tris.len() as u32).find(|&s| self.alive[s as usize] && self.in_conflict(s, p))
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        if let Some(i) = self.free.pop() {
            self.tris[i as usize] = tri;
            self.alive[i as usize] = true;
            i
        } else {
            self.tris.push(tri);
            self.alive.push(true);
            self.stamp.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    fn insert(&mut self, p: u32) {
        let Some(start) = self.locate(p) else {
            self.skipped.push(p);
            return;
        };
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.stamp[start as usize] = epoch;
        let mut stack = vec![start];
        // (a, b, outside triangle)
        let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
        while let Some(t) = stack.pop() {
            let tri = self.tris[t as usize];
            for i in 0..3 {
                let nb = tri.n[i];
                if self.stamp[nb as usize] == epoch {
                    continue;
                }
                if self.in_conflict(nb, p) {
                    self.stamp[nb as usize] = epoch;
                    cavity.push(nb);
                    stack.push(nb);
                }
            }
        }
        for &t in &cavity {
            let tri = self.tris[t as usize];
            for i in 0..3 {
                let nb = tri.n[i];
                if self.stamp[nb as usize] != epoch {
                    let (a, b) = tri.edge(i);
                    boundary.push((a, b, nb));
                }
            }
        }
        for &t in &cavity {
            self.alive[t as usize] = false;
            self.free.push(t);
        }
        let mut made: Vec<(u32, u32, u32)> = Vec::with_capacity(boundary.len());
        for &(a, b, out) in &boundary {
            let t = self.alloc(Tri { v: [a, b, p], n: [GHOST, GHOST, out] });
            let o = &mut self.tris[out as usize];
            let j = (0..3).find(|&j| o.edge(j) == (b, a)).expect("outside triangle shares the edge");
            o.n[j] = t;
            made.push((a, b, t));
        }
        for &(a, b, t) in &made {
            let after = made.iter().find(|m| m.0 == b).expect("cavity boundary is a cycle").2;
            let before = made.iter().find(|m| m.1 == a).expect("cavity boundary is a cycle").2;
            let tri = &mut self.tris[t as usize];
            tri.n[0] = after;
            tri.n[1] = before;
        }
        self.last = made.last().map_or(0, |m| m.2);
    }

    /// Live finite triangles.
    pub fn triangles(&self) -> impl Iterator<Item = &Tri> + '_ {
        self.tris.iter().zip(&self.alive).filter(|(t, &a)| a && !t.is_ghost()).map(|(t, _)| t)
    }

    /// Live ghost triangles.
    pub fn ghosts(&self) -> impl Iterator<Item = &Tri> + '_ {
        self.tris.iter().zip(&self.alive).filter(|(t, &a)| a && t.is_ghost()).map(|(t, _)| t)
    }

    /// Every edge once, with the apexes on both sides.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (ti, (tri, &alive)) in self.tris.iter().zip(&self.alive).enumerate() {
            if !alive || tri.is_ghost() {
                continue;
            }
            for i in 0..3 {
                let (a, b) = tri.edge(i);
                let nb = &self.tris[tri.n[i] as usize];
                let right = if nb.is_ghost() {
                    None
                } else {
                    if (tri.n[i] as usize) < ti {
                        continue;
                    }
                    let j = (0..3).find(|&j| nb.edge(j) == (b, a)).expect("twin edge");
                    Some(nb.v[j])
                };
                out.push(Edge { a, b, left: Some(tri.v[i]), right });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_edges(pts: &[[f64; 2]]) -> Vec<(u32, u32)> {
        // Delaunay edge: some triangle with empty circumcircle uses it.
        let n = pts.len();
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, mut cc) = (i, j, k);
                    let mut bb = b;
                    let o = orient2d(c(pts[a]), c(pts[bb]), c(pts[cc]));
                    if o == 0.0 {
                        continue;
                    }
                    if o < 0.0 {
                        std::mem::swap(&mut bb, &mut cc);
                    }
                    let empty = (0..n)
                        .filter(|&m| m != a && m != bb && m != cc)
                        .all(|m| incircle(c(pts[a]), c(pts[bb]), c(pts[cc]), c(pts[m])) < 0.0);
                    if empty {
                        for (x, y) in [(i, j), (j, k), (i, k)] {
                            e.push((x as u32, y as u32));
                        }
                    }
                }
            }
        }
        e.sort();
        e.dedup();
        e
    }

    fn edge_set(t: &Triangulation) -> Vec<(u32, u32)> {
        let mut e: Vec<_> = t.edges().iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
        e.sort();
        e
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3usize, 4, 5, 10, 30, 60] {
            for _ in 0..20 {
                let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
                let t = Triangulation::new(&pts);
                assert_eq!(edge_set(&t), brute_edges(&pts));
                assert!(!t.degenerate());
            }
        }
    }

    #[test]
    fn euler_characteristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<[f64; 2]> = (0..500).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let t = Triangulation::new(&pts);
        let hull = t.ghosts().count();
        // 2n − 2 − h triangles, 3n − 3 − h edges
        assert_eq!(t.triangles().count(), 2 * 500 - 2 - hull);
        assert_eq!(t.edges().len(), 3 * 500 - 3 - hull);
    }

    #[test]
    fn square_takes_one_diagonal_by_index() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = Triangulation::new(&sq);
        assert!(t.degenerate());
        let e = edge_set(&t);
        assert_eq!(e.len(), 5);
        // vertex 3 is cut off as an ear: diagonal 0–2
        assert!(e.contains(&(0, 2)) && !e.contains(&(1, 3)));
        let shuffled = [[1.0, 1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let e = edge_set(&Triangulation::new(&shuffled));
        // vertex 3 = (0,1) is cut again: diagonal between (0,0) and (1,1)
        assert!(e.contains(&(0, 1)));
    }

    #[test]
    fn grid_with_many_ties() {
        let mut pts = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                pts.push([i as f64, j as f64]);
            }
        }
        let t = Triangulation::new(&pts);
        assert_eq!(t.triangles().count(), 2 * 64 - 2 - 28);
        for tri in t.triangles() {
            let [a, b, cc] = tri.v;
            assert!(orient2d(c(pts[a as usize]), c(pts[b as usize]), c(pts[cc as usize])) > 0.0);
        }
    }

    #[test]
    fn collinear_and_duplicates() {
        let t = Triangulation::new(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(t.is_flat());
        let t = Triangulation::new(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(t.skipped(), &[3]);
        assert_eq!(t.triangles().count(), 1);
    }
}
