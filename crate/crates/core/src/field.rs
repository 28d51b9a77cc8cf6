//! Lazily sampled, mark-coupled Poisson field on the hyperbolic plane.
//!
//! The plane is cut into the dyadic horocyclic tiling of the upper
//! half-plane: tile `(j, k)` is `[kW·2^j, (k+1)W·2^j] × [2^j, 2^{j+1}]`. Every
//! tile has hyperbolic area `W/2`, adjacent tiles differ by at most one level,
//! and the offset `k` is an arbitrary-size integer, so there is no radius at
//! which the index or the coordinates run out of range. Points are stored in
//! tile-normalized coordinates `(u, v) ∈ [0, W) × [1, 2)`, i.e. the image of
//! the tile under `z ↦ z/2^j − kW`.
//!
//! A [`Chart`] pairs a tile with a real `SL(2)` map and gives disk coordinates
//! around any point; queries return positions in the caller's chart so that
//! numbers stay small no matter how far the caller is from the base point.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::FieldError;
use crate::geom::{self, Isometry};
use crate::stats::{fold, splitmix64};
use crate::{Mobius, Point};

/// Beyond this radius disk coordinates no longer resolve points.
pub const PRECISION_RADIUS: f64 = 34.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfig {
    /// Intensity of the full (all marks) process.
    pub lambda_max: f64,
    /// Tile width `W`; tile area is `W/2`.
    pub tile_width: f64,
    /// Tiles kept in memory before the oldest generation is dropped.
    pub cache_capacity: usize,
    pub max_query_radius: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { lambda_max: 1.0, tile_width: 8.0, cache_capacity: 1 << 16, max_query_radius: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tile {
    pub level: i64,
    pub offset: BigInt,
}

impl Tile {
    pub fn new(level: i64, offset: impl Into<BigInt>) -> Self {
        Self { level, offset: offset.into() }
    }

    pub fn base() -> Self {
        Self::new(0, 0)
    }

    fn words(&self) -> Vec<u64> {
        let (sign, digits) = self.offset.to_u64_digits();
        let mut w = Vec::with_capacity(digits.len() + 2);
        w.push(self.level as u64);
        w.push(match sign {
            Sign::Minus => 1,
            Sign::NoSign => 0,
            Sign::Plus => 2,
        });
        w.extend(digits);
        w
    }
}

/// Stable identity of a vertex: the base point is 0, planted points count up
/// from 1 and field points carry a 128-bit hash with the top bit set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId(pub u128);

impl PointId {
    pub const ROOT: PointId = PointId(0);

    pub fn planted(i: usize) -> Self {
        PointId(i as u128 + 1)
    }

    pub fn is_root(&self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Position of a point as tile plus normalized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub tile: Tile,
    pub u: f64,
    pub v: f64,
}

impl Location {
    /// The base point `o`, which is `i` in the half-plane.
    pub fn base() -> Self {
        Self { tile: Tile::base(), u: 0.0, v: 1.0 }
    }
}

/// A point of a tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkedPoint {
    pub id: PointId,
    pub u: f64,
    pub v: f64,
    pub mark: f64,
}

/// A vertex identity together with where it lives.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub id: PointId,
    pub location: Location,
}

impl Site {
    pub fn root() -> Self {
        Self { id: PointId::ROOT, location: Location::base() }
    }
}

/// A query result: the site and its disk coordinates in the query chart.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPoint {
    pub site: Site,
    pub mark: f64,
    pub local: Point,
}

/// Real `SL(2)` matrix `[[a, b], [c, d]]` acting on the half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sl2(pub [f64; 4]);

impl Sl2 {
    pub fn identity() -> Self {
        Sl2([1.0, 0.0, 0.0, 1.0])
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let [a, b, c, d] = self.0;
        (z * a + b) / (z * c + d)
    }

    pub fn mul(&self, o: &Sl2) -> Sl2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Sl2([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    pub fn inverse(&self) -> Sl2 {
        let [a, b, c, d] = self.0;
        Sl2([d, -b, -c, a])
    }

    pub fn normalized(&self) -> Sl2 {
        let [a, b, c, d] = self.0;
        let s = (a * d - b * c).sqrt();
        Sl2([a / s, b / s, c / s, d / s])
    }

    /// Conjugate by the Cayley map to act on the disk.
    pub fn to_disk(&self) -> Mobius {
        let [a, b, c, d] = self.0;
        Isometry::from_raw(
            Complex64::new((a + d) / 2.0, (b - c) / 2.0),
            Complex64::new((a - d) / 2.0, -(b + c) / 2.0),
        )
    }

    pub fn from_disk(g: &Mobius) -> Sl2 {
        let (al, be) = (g.a(), g.b());
        Sl2([al.re + be.re, al.im - be.im, -al.im - be.im, al.re - be.re])
    }
}

/// `z_from = scale·z_to + shift` between normalized coordinates of two tiles.
pub fn tile_offset(from: &Tile, to: &Tile, width: f64) -> (f64, f64) {
    let delta = to.level - from.level;
    let scale = (delta as f64).exp2();
    let shift = if delta >= 0 {
        let n = (&to.offset << (delta as usize)) - &from.offset;
        width * n.to_f64().unwrap_or(f64::NAN)
    } else {
        let n = &to.offset - (&from.offset << ((-delta) as usize));
        width * n.to_f64().unwrap_or(f64::NAN) * scale
    };
    (scale, shift)
}

fn pow2_big(m: i64) -> BigInt {
    BigInt::one() << (m as usize)
}

/// Finds the tile containing a point given in `tile`-normalized coordinates.
pub fn anchor(tile: &Tile, z: Complex64, width: f64) -> Location {
    let y = z.im;
    let mut m = y.log2().floor() as i64;
    let mut v = y * (-(m as f64)).exp2();
    if v < 1.0 {
        m -= 1;
        v *= 2.0;
    } else if v >= 2.0 {
        m += 1;
        v /= 2.0;
    }
    let s = (m as f64).exp2();
    let (offset, mut u) = if m >= 0 {
        let (q, rem) = tile.offset.div_mod_floor(&pow2_big(m));
        let x = z.re + width * rem.to_f64().unwrap_or(0.0);
        let t = (x / (width * s)).floor();
        (q + BigInt::from(t as i64), x / s - width * t)
    } else {
        let t = (z.re / (width * s)).floor();
        (
            (&tile.offset << ((-m) as usize)) + BigInt::from(t as i64),
            z.re / s - width * t,
        )
    };
    if !(u >= 0.0) {
        u = 0.0;
    }
    if u >= width {
        u = width * (1.0 - f64::EPSILON);
    }
    Location { tile: Tile { level: tile.level + m, offset }, u, v: v.clamp(1.0, 2.0 * (1.0 - f64::EPSILON)) }
}

/// Hyperbolic distance between two located points, exact up to rounding of
/// the tile shift.
pub fn location_distance(p: &Location, q: &Location, width: f64) -> f64 {
    let (scale, shift) = tile_offset(&p.tile, &q.tile, width);
    let zq = Complex64::new(scale * q.u + shift, scale * q.v);
    geom::half_plane_dist(Complex64::new(p.u, p.v), zq)
}

/// Disk coordinates around a point: `w ↦ m(C⁻¹(w))` lands in the
/// normalized coordinates of `tile`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub tile: Tile,
    pub m: Sl2,
}

impl Chart {
    /// Chart with the location at the disk origin.
    pub fn centered(loc: &Location) -> Self {
        let s = loc.v.sqrt();
        Self { tile: loc.tile.clone(), m: Sl2([s, loc.u / s, 0.0, 1.0 / s]) }
    }

    pub fn base() -> Self {
        Self::centered(&Location::base())
    }

    /// Normalized coordinates (in this chart's tile) of a location.
    pub fn tile_coords(&self, loc: &Location, width: f64) -> Complex64 {
        let (scale, shift) = tile_offset(&self.tile, &loc.tile, width);
        Complex64::new(scale * loc.u + shift, scale * loc.v)
    }

    pub fn to_disk(&self, loc: &Location, width: f64) -> Point {
        let z = self.m.inverse().apply(self.tile_coords(loc, width));
        geom::cayley(z).unwrap_or_else(|_| Point::new_unchecked(0.0, -1.0 + f64::EPSILON))
    }

    pub fn locate(&self, w: Point, width: f64) -> Location {
        anchor(&self.tile, self.m.apply(geom::cayley_inverse(w)), width)
    }

    /// Disk isometry taking `other`'s coordinates to this chart's.
    pub fn transition(&self, other: &Chart, width: f64) -> Mobius {
        let (scale, shift) = tile_offset(&self.tile, &other.tile, width);
        let r = scale.sqrt();
        let t = Sl2([r, shift / r, 0.0, 1.0 / r]);
        let a = self.m.inverse().mul(&t).mul(&other.m).normalized();
        a.to_disk()
    }

    /// Chart whose origin is the point `w` of this chart, re-anchored to the
    /// tile containing it.
    pub fn recenter(&self, w: Point, width: f64) -> Chart {
        Chart::centered(&self.locate(w, width))
    }
}

struct TileCache {
    capacity: usize,
    current: HashMap<Tile, Arc<[MarkedPoint]>>,
    previous: HashMap<Tile, Arc<[MarkedPoint]>>,
}

impl TileCache {
    fn get(&mut self, t: &Tile) -> Option<Arc<[MarkedPoint]>> {
        if let Some(p) = self.current.get(t) {
            return Some(p.clone());
        }
        let p = self.previous.remove(t)?;
        self.insert(t.clone(), p.clone());
        Some(p)
    }

    fn insert(&mut self, t: Tile, p: Arc<[MarkedPoint]>) -> Arc<[MarkedPoint]> {
        if self.current.len() >= self.capacity.div_ceil(2).max(1) {
            self.previous = std::mem::take(&mut self.current);
        }
        self.current.entry(t).or_insert(p).clone()
    }
}

/// Deterministic Poisson field. Tile contents are a pure function of
/// `(seed, tile, lambda_max, tile_width)`.
pub struct LazyField {
    seed: u64,
    config: FieldConfig,
    cache: Mutex<TileCache>,
    generated: AtomicUsize,
}

impl std::fmt::Debug for LazyField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LazyField").field("seed", &self.seed).field("config", &self.config).finish()
    }
}

impl LazyField {
    pub fn new(seed: u64, config: FieldConfig) -> Result<Self, FieldError> {
        if !(config.lambda_max >= 0.0 && config.lambda_max.is_finite()) {
            return Err(FieldError::Intensity(config.lambda_max));
        }
        if !(config.tile_width > 0.0 && config.tile_width.is_finite()) {
            return Err(FieldError::TileWidth(config.tile_width));
        }
        let cache = TileCache { capacity: config.cache_capacity, current: HashMap::new(), previous: HashMap::new() };
        Ok(Self { seed, config, cache: Mutex::new(cache), generated: AtomicUsize::new(0) })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::new(seed, FieldConfig::default()).expect("default config is valid")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn width(&self) -> f64 {
        self.config.tile_width
    }

    pub fn tile_area(&self) -> f64 {
        self.config.tile_width / 2.0
    }

    /// Number of tile generations so far, counting regenerations.
    pub fn tiles_generated(&self) -> usize {
        self.generated.load(Ordering::Relaxed)
    }

    fn point_id(&self, words: &[u64], index: usize) -> PointId {
        let mut w = words.to_vec();
        w.push(index as u64);
        let hi = fold(self.seed ^ 0x6869_6768, &w);
        let lo = fold(splitmix64(self.seed) ^ 0x6c6f_77, &w);
        PointId((((hi as u128) << 64) | lo as u128) | (1u128 << 127))
    }

    /// Samples a tile from scratch, bypassing the cache.
    pub fn sample_tile(&self, tile: &Tile) -> Vec<MarkedPoint> {
        self.generated.fetch_add(1, Ordering::Relaxed);
        let words = tile.words();
        let mut rng = ChaCha8Rng::seed_from_u64(fold(self.seed, &words));
        let mean = self.config.lambda_max * self.tile_area();
        if mean <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as usize;
        let w = self.config.tile_width;
        (0..count)
            .map(|i| {
                let u = w * rng.random::<f64>();
                // density ∝ 1/v² on [1, 2]
                let v = 1.0 / (1.0 - rng.random::<f64>() / 2.0);
                let mark = rng.random::<f64>();
                MarkedPoint { id: self.point_id(&words, i), u, v, mark }
            })
            .collect()
    }

    pub fn tile(&self, tile: &Tile) -> Arc<[MarkedPoint]> {
        if let Some(p) = self.cache.lock().expect("cache lock").get(tile) {
            return p;
        }
        let fresh: Arc<[MarkedPoint]> = self.sample_tile(tile).into();
        self.cache.lock().expect("cache lock").insert(tile.clone(), fresh)
    }

    fn check(&self, radius: f64, lambda: f64) -> Result<(), FieldError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(FieldError::Intensity(lambda));
        }
        if lambda > self.config.lambda_max * (1.0 + 1e-12) {
            return Err(FieldError::Coupling { lambda, lambda_max: self.config.lambda_max });
        }
        let max = self.config.max_query_radius.min(PRECISION_RADIUS);
        if !(radius <= max) {
            return Err(FieldError::Range { radius, max });
        }
        Ok(())
    }

    /// Tiles meeting the closed disk of `radius` about the chart origin,
    /// each with its `(off, scale)` placement in chart-tile coordinates.
    fn tiles_in_disk(&self, chart: &Chart, radius: f64) -> Vec<(Tile, f64, f64)> {
        let w = self.config.tile_width;
        let c = chart.m.apply(Complex64::new(0.0, 1.0));
        let (y0, rho) = (c.im * radius.cosh(), c.im * radius.sinh());
        let (ymin, ymax) = (c.im * (-radius).exp(), c.im * radius.exp());
        let mlo = ymin.log2().floor() as i64;
        let mhi = ymax.log2().floor() as i64;
        let mut out = Vec::new();
        for m in mlo..=mhi {
            let s = (m as f64).exp2();
            let (lo, hi) = (s.max(ymin), (2.0 * s).min(ymax));
            if lo > hi {
                continue;
            }
            let nearest = y0.clamp(lo, hi);
            let hw = (rho * rho - (nearest - y0).powi(2)).max(0.0).sqrt();
            let (off, base) = if m >= 0 {
                let (q, rem) = chart.tile.offset.div_mod_floor(&pow2_big(m));
                (-w * rem.to_f64().unwrap_or(0.0), q)
            } else {
                (0.0, &chart.tile.offset << ((-m) as usize))
            };
            let span = w * s;
            let t0 = ((c.re - hw - off) / span).floor() as i64;
            let t1 = ((c.re + hw - off) / span).floor() as i64;
            for t in t0..=t1 {
                let tile = Tile { level: chart.tile.level + m, offset: &base + BigInt::from(t) };
                out.push((tile, off + span * t as f64, s));
            }
        }
        out
    }

    /// Points with mark ≤ `lambda/lambda_max` within `radius` of the chart
    /// origin, in chart disk coordinates, sorted by id.
    pub fn query_disk(&self, chart: &Chart, radius: f64, lambda: f64) -> Result<Vec<FieldPoint>, FieldError> {
        self.check(radius, lambda)?;
        if radius <= 0.0 {
            return Ok(Vec::new());
        }
        let threshold = lambda / self.config.lambda_max;
        let center = chart.m.apply(Complex64::new(0.0, 1.0));
        let minv = chart.m.inverse();
        let mut out = Vec::new();
        for (tile, x0, s) in self.tiles_in_disk(chart, radius) {
            for p in self.tile(&tile).iter() {
                if p.mark > threshold {
                    continue;
                }
                let z = Complex64::new(x0 + s * p.u, s * p.v);
                if geom::half_plane_dist(center, z) > radius {
                    continue;
                }
                let Ok(local) = geom::cayley(minv.apply(z)) else { continue };
                out.push(FieldPoint {
                    site: Site { id: p.id, location: Location { tile: tile.clone(), u: p.u, v: p.v } },
                    mark: p.mark,
                    local,
                });
            }
        }
        out.sort_by_key(|p| p.site.id);
        Ok(out)
    }

    /// Like [`query_disk`](Self::query_disk), with extra always-present sites
    /// (the base point, planted points) merged in.
    pub fn query_with(
        &self,
        chart: &Chart,
        radius: f64,
        lambda: f64,
        extra: &[Site],
    ) -> Result<Vec<FieldPoint>, FieldError> {
        let mut pts = self.query_disk(chart, radius, lambda)?;
        let w = self.config.tile_width;
        let center = chart.m.apply(Complex64::new(0.0, 1.0));
        for s in extra {
            let z = chart.tile_coords(&s.location, w);
            if radius > 0.0 && geom::half_plane_dist(center, z) <= radius {
                pts.push(FieldPoint { site: s.clone(), mark: 0.0, local: chart.to_disk(&s.location, w) });
            }
        }
        pts.sort_by_key(|p| p.site.id);
        Ok(pts)
    }

    /// Text snapshot of the given tiles: a header per tile with its reference
    /// chart (centered at `(W/2, √2)`) and one `re im mark level offset` row
    /// per point, coordinates in that chart.
    pub fn snapshot(&self, tiles: &[Tile]) -> String {
        let w = self.config.tile_width;
        let mut s = String::new();
        let _ = writeln!(s, "# field seed {} lambda_max {:.16e} tile_width {:.16e}", self.seed, self.config.lambda_max, w);
        for t in tiles {
            let chart = Chart::centered(&Location { tile: t.clone(), u: w / 2.0, v: std::f64::consts::SQRT_2 });
            let [a, b, c, d] = chart.m.0;
            let _ = writeln!(s, "tile {} {} {:.16e} {:.16e} {:.16e} {:.16e}", t.level, t.offset, a, b, c, d);
            for p in self.tile(t).iter() {
                let z = chart.to_disk(&Location { tile: t.clone(), u: p.u, v: p.v }, w);
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {} {}", z.re(), z.im(), p.mark, t.level, t.offset);
            }
        }
        s
    }
}

/// Rows of a snapshot, grouped by tile, converted back to normalized
/// coordinates `(u, v, mark)`.
pub fn parse_snapshot(text: &str) -> Option<Vec<(Tile, Vec<(f64, f64, f64)>)>> {
    let mut out: Vec<(Tile, Sl2, Vec<(f64, f64, f64)>)> = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] == "tile" {
            let tile = Tile { level: f[1].parse().ok()?, offset: f[2].parse().ok()? };
            let m: Vec<f64> = f[3..7].iter().map(|x| x.parse().ok()).collect::<Option<_>>()?;
            out.push((tile, Sl2([m[0], m[1], m[2], m[3]]), Vec::new()));
        } else {
            let (_, m, rows) = out.last_mut()?;
            let re: f64 = f[0].parse().ok()?;
            let im: f64 = f[1].parse().ok()?;
            let mark: f64 = f[2].parse().ok()?;
            let z = m.apply(geom::cayley_inverse(Point::new(re, im).ok()?));
            rows.push((z.re, z.im, mark));
        }
    }
    Some(out.into_iter().map(|(t, _, r)| (t, r)).collect())
}

/// A query result with the base point flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedSet {
    pub points: Vec<FieldPoint>,
    pub root: usize,
}

/// Adds `root` to `points`, rejecting it when it duplicates an existing
/// position within 1e-12.
pub fn insert_root(mut points: Vec<FieldPoint>, root: FieldPoint) -> Result<RootedSet, FieldError> {
    let dup = points.iter().any(|p| {
        p.site.id == root.site.id || (p.local.to_complex() - root.local.to_complex()).norm() < 1e-12
    });
    if dup {
        return Err(FieldError::DuplicateRoot);
    }
    points.push(root);
    let root = points.len() - 1;
    Ok(RootedSet { points, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{dist, exp_ray, VolumeProfile};
    use crate::stats::{mean_se, weighted_mean_se};
    use std::f64::consts::TAU;

    fn sites(points: &[FieldPoint]) -> Vec<PointId> {
        points.iter().map(|p| p.site.id).collect()
    }

    #[test]
    fn tile_offset_round_trip() {
        let w = 8.0;
        let a = Tile::new(3, -5);
        let b = Tile::new(-2, 1234);
        let (s1, t1) = tile_offset(&a, &b, w);
        let (s2, t2) = tile_offset(&b, &a, w);
        // inverse maps compose to identity
        assert!((s1 * s2 - 1.0).abs() < 1e-15);
        assert!((s1 * t2 + t1).abs() < 1e-12);
    }

    #[test]
    fn anchor_recovers_location() {
        let w = 8.0;
        let loc = Location { tile: Tile::new(-7, BigInt::from(-99_999_999_999i64)), u: 3.25, v: 1.75 };
        for from in [Tile::new(-7, 0), Tile::new(-9, 17), Tile::new(-4, -3)] {
            let (s, t) = tile_offset(&from, &loc.tile, w);
            let z = Complex64::new(s * loc.u + t, s * loc.v);
            let back = anchor(&from, z, w);
            assert_eq!(back.tile, loc.tile);
            assert!((back.u - loc.u).abs() < 1e-3, "{back:?}");
            assert!((back.v - loc.v).abs() < 1e-12);
        }
    }

    #[test]
    fn location_distance_matches_disk() {
        let w = 8.0;
        let chart = Chart::base();
        for (th, r) in [(0.3, 2.0), (2.0, 7.0), (4.0, 0.5)] {
            let p = exp_ray(th, r).unwrap();
            let loc = chart.locate(p, w);
            let d = location_distance(&Location::base(), &loc, w);
            assert!((d - r).abs() < 1e-9, "{d} vs {r}");
            let q = chart.to_disk(&loc, w);
            assert!((q.to_complex() - p.to_complex()).norm() < 1e-12);
        }
    }

    #[test]
    fn location_distance_far_out() {
        let w = 8.0;
        let a = Location { tile: Tile::new(-300, 12345), u: 1.0, v: 1.5 };
        let b = Location { tile: Tile::new(200, -3), u: 4.0, v: 1.2 };
        let d = location_distance(&a, &b, w);
        let back = location_distance(&b, &a, w);
        assert!(d > 300.0 && d.is_finite());
        assert!((d - back).abs() < 1e-9 * d);
    }

    #[test]
    fn transition_matches_point_maps() {
        let w = 8.0;
        let field = LazyField::with_seed(3);
        let a = Chart::centered(&Location { tile: Tile::new(0, 0), u: 1.0, v: 1.3 });
        let b = a.recenter(exp_ray(1.0, 2.5).unwrap(), w);
        let g = a.transition(&b, w);
        assert!((g.determinant() - 1.0).abs() < 1e-12);
        let pts = field.query_disk(&b, 3.0, 1.0).unwrap();
        assert!(!pts.is_empty());
        for p in pts {
            let via = g.apply(p.local);
            let direct = a.to_disk(&p.site.location, w);
            assert!(dist(via, direct) < 1e-9);
        }
    }

    #[test]
    fn sl2_disk_conversion_round_trips() {
        let m = Sl2([2.0, 1.0, 1.0, 1.0]);
        let g = m.to_disk();
        assert!((g.determinant() - 1.0).abs() < 1e-12);
        let back = Sl2::from_disk(&g);
        for (x, y) in back.0.iter().zip(m.0.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let z = Complex64::new(0.3, 0.7);
        let via_h = geom::cayley(m.apply(geom::cayley_inverse(Point::new(0.1, 0.2).unwrap()))).unwrap();
        let via_d = g.apply(Point::new(0.1, 0.2).unwrap());
        assert!(dist(via_h, via_d) < 1e-12);
        assert!((m.inverse().apply(m.apply(z)) - z).norm() < 1e-12);
    }

    #[test]
    fn empty_at_zero_intensity() {
        let f = LazyField::new(1, FieldConfig { lambda_max: 0.0, ..FieldConfig::default() }).unwrap();
        for k in 0..20 {
            assert!(f.sample_tile(&Tile::new(k, k * 3)).is_empty());
        }
    }

    #[test]
    fn tile_is_deterministic_and_cache_transparent() {
        let f = LazyField::new(11, FieldConfig { cache_capacity: 2, ..FieldConfig::default() }).unwrap();
        let t = Tile::new(-4, 77);
        let first: Vec<_> = f.tile(&t).to_vec();
        for k in 0..10 {
            f.tile(&Tile::new(k, 0));
        }
        assert_eq!(first, f.tile(&t).to_vec());
        assert_eq!(first, LazyField::with_seed(11).sample_tile(&t));
        assert_ne!(first, LazyField::with_seed(12).sample_tile(&t));
    }

    #[test]
    fn tile_count_mean_matches_area() {
        let mut counts = Vec::new();
        for seed in 0..10_000u64 {
            counts.push(LazyField::with_seed(seed).sample_tile(&Tile::new(2, -1)).len() as f64);
        }
        let m = mean_se(&counts);
        assert!((m.mean - 4.0).abs() < 3.0 * m.se, "{m:?}");
        // Poisson: variance equals mean
        let var = m.se * m.se * counts.len() as f64;
        assert!((var / 4.0 - 1.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn tile_positions_uniform_in_area() {
        let mut us = Vec::new();
        let mut vs = Vec::new();
        for seed in 0..600u64 {
            for p in LazyField::with_seed(seed).sample_tile(&Tile::new(0, 0)) {
                us.push(p.u);
                vs.push(p.v);
            }
        }
        assert!(crate::stats::ks_passes(&us, |u| (u / 8.0).clamp(0.0, 1.0)));
        assert!(crate::stats::ks_passes(&vs, |v| (2.0 * (1.0 - 1.0 / v)).clamp(0.0, 1.0)));
    }

    #[test]
    fn query_radius_zero_and_errors() {
        let f = LazyField::with_seed(1);
        assert!(f.query_disk(&Chart::base(), 0.0, 1.0).unwrap().is_empty());
        assert!(matches!(f.query_disk(&Chart::base(), 1.0, 1.5), Err(FieldError::Coupling { .. })));
        assert!(matches!(f.query_disk(&Chart::base(), 40.0, 1.0), Err(FieldError::Range { .. })));
        assert!(f.query_disk(&Chart::base(), 1.0, 0.0).is_err());
    }

    #[test]
    fn query_returns_exactly_the_disk() {
        let f = LazyField::with_seed(5);
        let chart = Chart::base();
        let small = f.query_disk(&chart, 3.0, 1.0).unwrap();
        let big = f.query_disk(&chart, 6.0, 1.0).unwrap();
        let expected: Vec<_> = big.iter().filter(|p| dist(Point::origin(), p.local) <= 3.0).map(|p| p.site.id).collect();
        assert_eq!(sites(&small), expected);
        for p in &small {
            assert!(dist(Point::origin(), p.local) <= 3.0 + 1e-9);
        }
    }

    #[test]
    fn query_counts_match_volume() {
        let v5 = VolumeProfile::plane().volume(5.0f64);
        let mut counts = Vec::new();
        for seed in 0..200u64 {
            let f = LazyField::with_seed(seed);
            let c = Chart::centered(&Location { tile: Tile::new(seed as i64 % 7 - 3, seed as i64), u: 1.5, v: 1.2 });
            counts.push(f.query_disk(&c, 5.0, 1.0).unwrap().len() as f64);
        }
        let m = mean_se(&counts);
        assert!((m.mean - v5).abs() < 3.0 * m.se, "{} vs {v5}", m.mean);
    }

    #[test]
    fn coupling_is_monotone() {
        let f = LazyField::with_seed(8);
        let c = Chart::base();
        let lo = sites(&f.query_disk(&c, 5.0, 0.2).unwrap());
        let hi = sites(&f.query_disk(&c, 5.0, 0.8).unwrap());
        assert!(lo.iter().all(|id| hi.binary_search(id).is_ok()));
        assert!(lo.len() < hi.len());
    }

    #[test]
    fn frame_invariance() {
        let w = 8.0;
        let f = LazyField::with_seed(21);
        let a = Chart::base();
        let b = a.recenter(exp_ray(2.0, 1.5).unwrap(), w);
        let pa = f.query_disk(&a, 7.0, 1.0).unwrap();
        let g = a.transition(&b, w);
        // the radius-4 disk about b is inside the radius-7 disk about a
        let pb = f.query_disk(&b, 4.0, 1.0).unwrap();
        for p in &pb {
            let q = pa.iter().find(|q| q.site.id == p.site.id).expect("point present in both frames");
            assert!(dist(g.apply(p.local), q.local) < 1e-8);
        }
    }

    #[test]
    fn angles_are_uniform() {
        let mut th = Vec::new();
        for seed in 0..40u64 {
            for p in LazyField::with_seed(seed).query_disk(&Chart::base(), 5.0, 1.0).unwrap() {
                th.push(p.local.angle());
            }
        }
        assert!(crate::stats::ks_passes(&th, |t| t / TAU));
    }

    #[test]
    fn radial_law_matches_volume() {
        let prof = VolumeProfile::plane();
        let mut rs = Vec::new();
        for seed in 0..40u64 {
            for p in LazyField::with_seed(seed).query_disk(&Chart::base(), 5.0, 0.5).unwrap() {
                rs.push(dist(Point::origin(), p.local));
            }
        }
        let total = prof.volume(5.0f64);
        assert!(crate::stats::ks_passes(&rs, |r| prof.volume(r) / total));
    }

    #[test]
    fn disjoint_counts_uncorrelated() {
        let w = 8.0;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let other = Chart::base().recenter(exp_ray(0.0, 5.0).unwrap(), w);
        for seed in 0..1000u64 {
            let f = LazyField::with_seed(seed);
            xs.push(f.query_disk(&Chart::base(), 2.0, 1.0).unwrap().len() as f64);
            ys.push(f.query_disk(&other, 2.0, 1.0).unwrap().len() as f64);
        }
        let r = crate::stats::correlation(&xs, &ys);
        assert!(r.abs() < 3.0 / (1000f64).sqrt(), "{r}");
        let _ = weighted_mean_se(&xs, &ys);
    }

    #[test]
    fn queries_touch_only_nearby_tiles() {
        let f = LazyField::with_seed(2);
        f.query_disk(&Chart::base(), 6.0, 1.0).unwrap();
        let area = VolumeProfile::plane().volume(6.0f64);
        // tiles intersecting the disk: bounded by area plus perimeter layers
        assert!((f.tiles_generated() as f64) < 4.0 * area / f.tile_area() + 200.0, "{}", f.tiles_generated());
    }

    #[test]
    fn extras_are_merged() {
        let w = 8.0;
        let f = LazyField::with_seed(4);
        let x = Site { id: PointId::planted(0), location: Chart::base().locate(exp_ray(0.0, 1.0).unwrap(), w) };
        let pts = f.query_with(&Chart::base(), 2.0, 1.0, &[Site::root(), x]).unwrap();
        assert_eq!(pts[0].site.id, PointId::ROOT);
        assert_eq!(pts[1].site.id, PointId::planted(0));
        assert!(pts[0].local.norm_sqr() < 1e-30);
        assert!((dist(Point::origin(), pts[1].local) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn insert_root_examples() {
        let root = FieldPoint { site: Site::root(), mark: 0.0, local: Point::origin() };
        let set = insert_root(Vec::new(), root.clone()).unwrap();
        assert_eq!(set.points.len(), 1);
        let f = LazyField::with_seed(9);
        let pts = f.query_disk(&Chart::base(), 3.0, 1.0).unwrap();
        let n = pts.len();
        let set = insert_root(pts, root.clone()).unwrap();
        assert_eq!(set.points.len(), n + 1);
        assert!(set.points[set.root].site.id.is_root());
        assert!(insert_root(set.points, root).is_err());
    }

    #[test]
    fn root_flag_survives_frame_change() {
        let w = 8.0;
        let f = LazyField::with_seed(6);
        let c = Chart::base().recenter(exp_ray(0.7, 2.0).unwrap(), w);
        let pts = f.query_with(&c, 4.0, 1.0, &[Site::root()]).unwrap();
        let r = pts.iter().find(|p| p.site.id.is_root()).unwrap();
        assert!((dist(Point::origin(), r.local) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn snapshot_round_trip() {
        let f = LazyField::with_seed(14);
        let tiles = [Tile::new(0, 0), Tile::new(-3, -8), Tile::new(5, 2)];
        let text = f.snapshot(&tiles);
        let parsed = parse_snapshot(&text).unwrap();
        assert_eq!(parsed.len(), 3);
        for ((t, rows), tile) in parsed.iter().zip(&tiles) {
            assert_eq!(t, tile);
            let pts = f.tile(tile);
            assert_eq!(rows.len(), pts.len());
            for (r, p) in rows.iter().zip(pts.iter()) {
                assert!((r.0 - p.u).abs() < 1e-12 && (r.1 - p.v).abs() < 1e-12 && r.2 == p.mark);
            }
        }
    }
}
