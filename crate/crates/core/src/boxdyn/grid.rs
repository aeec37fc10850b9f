//! Dyadic boxes over the fundamental domain `[0,1) x [0,1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::LiftPoint;
use crate::scalar::Scalar;

/// Closed axis-aligned rectangle in the cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<S = f64> {
    pub x0: S,
    pub x1: S,
    pub y0: S,
    pub y1: S,
}

impl<S: Scalar> Rect<S> {
    pub fn new(x0: S, x1: S, y0: S, y1: S) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::BadParameter(format!("empty rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// Square of half-width `r` around `c`.
    pub fn around(c: LiftPoint<S>, r: S) -> Self {
        Self { x0: c.x - r, x1: c.x + r, y0: c.y - r, y1: c.y + r }
    }

    pub fn width(&self) -> S {
        self.x1 - self.x0
    }

    pub fn height(&self) -> S {
        self.y1 - self.y0
    }

    pub fn diameter(&self) -> S {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> LiftPoint<S> {
        let half = S::lit(0.5);
        LiftPoint::new(half * (self.x0 + self.x1), half * (self.y0 + self.y1))
    }

    pub fn is_valid(&self) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x0.is_finite() && self.y1.is_finite()
    }

    pub fn contains(&self, p: LiftPoint<S>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn contains_strictly(&self, p: LiftPoint<S>) -> bool {
        p.x > self.x0 && p.x < self.x1 && p.y > self.y0 && p.y < self.y1
    }

    pub fn translate(&self, k: i64) -> Self {
        let k = S::from_i64(k).expect("integer shift");
        Self { x0: self.x0 + k, x1: self.x1 + k, ..*self }
    }

    /// The integer `k` with `p - (k, 0)` horizontally inside `[x0, x0 + 1)`.
    pub fn turns_to(&self, p: LiftPoint<S>) -> i64 {
        (p.x - self.x0).floor().to_i64().unwrap_or(i64::MAX)
    }

    /// The translate of `self` by whole turns that `p` lies strictly inside, if any.
    pub fn translate_containing(&self, p: LiftPoint<S>) -> Option<i64> {
        let k = self.turns_to(p);
        self.translate(k).contains_strictly(p).then_some(k)
    }

    /// `L^inf` distance from `p` to the rectangle (zero inside).
    pub fn linf_distance(&self, p: LiftPoint<S>) -> S {
        let dx = (self.x0 - p.x).max(p.x - self.x1).max(S::zero());
        let dy = (self.y0 - p.y).max(p.y - self.y1).max(S::zero());
        dx.max(dy)
    }

    /// Grows every side by `r`.
    pub fn inflate(&self, r: S) -> Self {
        Self { x0: self.x0 - r, x1: self.x1 + r, y0: self.y0 - r, y1: self.y1 + r }
    }

    /// `s x s` interior sample points at offsets `(i + 1/2) / s`.
    pub fn samples(&self, s: usize) -> Vec<LiftPoint<S>> {
        let s = s.max(1);
        let n = S::from_usize(s).expect("sample count");
        let mut out = Vec::with_capacity(s * s);
        for j in 0..s {
            let v = (S::from_usize(j).expect("index") + S::lit(0.5)) / n;
            for i in 0..s {
                let u = (S::from_usize(i).expect("index") + S::lit(0.5)) / n;
                out.push(LiftPoint::new(self.x0 + u * self.width(), self.y0 + v * self.height()));
            }
        }
        out
    }

    /// Points on the closed boundary and interior, corners included.
    pub fn closed_samples(&self, s: usize) -> Vec<LiftPoint<S>> {
        let s = s.max(2);
        let n = S::from_usize(s - 1).expect("sample count");
        let mut out = Vec::with_capacity(s * s);
        for j in 0..s {
            let v = S::from_usize(j).expect("index") / n;
            for i in 0..s {
                let u = S::from_usize(i).expect("index") / n;
                out.push(LiftPoint::new(self.x0 + u * self.width(), self.y0 + v * self.height()));
            }
        }
        out
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Common part with nonempty interior, if any.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        self.intersects(other).then(|| Self {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        })
    }

    /// Smallest rectangle containing all points, if any.
    pub fn hull(points: &[LiftPoint<S>]) -> Option<Self> {
        let first = points.first()?;
        let mut r = Self { x0: first.x, x1: first.x, y0: first.y, y1: first.y };
        for p in &points[1..] {
            r.x0 = r.x0.min(p.x);
            r.x1 = r.x1.max(p.x);
            r.y0 = r.y0.min(p.y);
            r.y1 = r.y1.max(p.y);
        }
        Some(r)
    }
}

/// Horizontal band `[lo, hi]` of the fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::BadParameter(format!("band [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }
}

/// A box: column and row of the dyadic grid at some depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxId {
    pub row: u32,
    pub col: u32,
}

/// The dyadic grid of depth `d` restricted to the rows inside a band.
///
/// Boxes are enumerated row-major; the linear index is `row * 2^d + col` over
/// the full grid, so indices are stable across different bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub depth: u32,
    pub region: Band,
}

impl Grid {
    pub fn new(depth: u32, region: Band) -> Result<Self> {
        if !(1..=14).contains(&depth) {
            return Err(Error::BadParameter(format!("resolution 2^-{depth} outside 2^-1 ..= 2^-14")));
        }
        let g = Self { depth, region };
        if g.row_range().is_empty() {
            return Err(Error::BadParameter(format!(
                "band [{}, {}] holds no full row at resolution 2^-{depth}",
                region.lo, region.hi
            )));
        }
        Ok(g)
    }

    pub fn n(&self) -> u32 {
        1 << self.depth
    }

    pub fn side(&self) -> f64 {
        1.0 / self.n() as f64
    }

    /// Rows lying entirely inside the region.
    pub fn row_range(&self) -> std::ops::Range<u32> {
        let n = self.n() as f64;
        let lo = (self.region.lo * n - 1e-9).ceil().max(0.0) as u32;
        let hi = ((self.region.hi * n + 1e-9).floor() as u32).min(self.n());
        lo..hi.max(lo)
    }

    pub fn index(&self, id: BoxId) -> usize {
        id.row as usize * self.n() as usize + id.col as usize
    }

    pub fn id(&self, index: usize) -> BoxId {
        let n = self.n() as usize;
        BoxId { row: (index / n) as u32, col: (index % n) as u32 }
    }

    pub fn in_region(&self, index: usize) -> bool {
        self.row_range().contains(&self.id(index).row)
    }

    /// All region boxes in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.n() as usize;
        self.row_range().flat_map(move |r| (0..n).map(move |c| r as usize * n + c))
    }

    pub fn len(&self) -> usize {
        self.row_range().len() * self.n() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rect(&self, index: usize) -> Rect {
        let id = self.id(index);
        let h = self.side();
        Rect { x0: id.col as f64 * h, x1: (id.col + 1) as f64 * h, y0: id.row as f64 * h, y1: (id.row + 1) as f64 * h }
    }

    /// Box containing `p` and the deck label of the translate it lies in.
    pub fn locate(&self, p: LiftPoint<f64>) -> Option<(usize, i64)> {
        let n = self.n() as i64;
        let col = (p.x * n as f64).floor() as i64;
        let row = (p.y * n as f64).floor() as i64;
        if !self.row_range().contains(&u32::try_from(row).ok()?) {
            return None;
        }
        let idx = self.index(BoxId { row: row as u32, col: col.rem_euclid(n) as u32 });
        Some((idx, col.div_euclid(n)))
    }

    /// Boxes (with deck labels) meeting the closed square of half-width `r`
    /// around `p`. Returns `false` when part of the square leaves the region.
    pub fn cover(&self, p: LiftPoint<f64>, r: f64, out: &mut Vec<(usize, i64)>) -> bool {
        if !p.is_finite() {
            return false;
        }
        let n = self.n() as i64;
        let nf = n as f64;
        let rows = self.row_range();
        let r0 = ((p.y - r) * nf).floor() as i64;
        let r1 = ((p.y + r) * nf).floor() as i64;
        let c0 = ((p.x - r) * nf).floor() as i64;
        let c1 = ((p.x + r) * nf).floor() as i64;
        let mut inside = true;
        for row in r0..=r1 {
            if row < rows.start as i64 || row >= rows.end as i64 {
                inside = false;
                continue;
            }
            for col in c0..=c1 {
                let idx = row as usize * n as usize + col.rem_euclid(n) as usize;
                out.push((idx, col.div_euclid(n)));
            }
        }
        inside
    }

    /// Default inflation radius: half a box diagonal.
    pub fn default_inflation(&self) -> f64 {
        0.5 * std::f64::consts::SQRT_2 * self.side()
    }
}

/// A set of grid boxes, serialized as `{d, region, indices}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub d: u32,
    pub region: Band,
    pub indices: BTreeSet<usize>,
}

impl BoxSet {
    pub fn empty(grid: &Grid) -> Self {
        Self { d: grid.depth, region: grid.region, indices: BTreeSet::new() }
    }

    /// Every region box whose row lies inside `[lo, hi]`.
    pub fn band(grid: &Grid, lo: f64, hi: f64) -> Result<Self> {
        let sub = Grid::new(grid.depth, Band::new(lo, hi)?)?;
        let rows = sub.row_range();
        let indices = grid.indices().filter(|&i| rows.contains(&grid.id(i).row)).collect();
        Ok(Self { d: grid.depth, region: grid.region, indices })
    }

    /// The single box containing `p`.
    pub fn single(grid: &Grid, p: LiftPoint<f64>) -> Result<Self> {
        let (idx, _) = grid
            .locate(p)
            .ok_or_else(|| Error::BadParameter(format!("({}, {}) is outside the grid region", p.x, p.y)))?;
        Ok(Self { d: grid.depth, region: grid.region, indices: [idx].into() })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.d, self.region)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.indices.is_subset(&other.indices)
    }

    /// Fiber extent `[min y0, max y1]` of the boxes.
    pub fn y_extent(&self) -> Option<(f64, f64)> {
        let grid = self.grid().ok()?;
        let lo = self.indices.iter().map(|&i| grid.rect(i).y0).fold(f64::INFINITY, f64::min);
        let hi = self.indices.iter().map(|&i| grid.rect(i).y1).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// Whether any box of `self` meets the rectangle `r` (projected to the annulus).
    pub fn meets(&self, r: &Rect) -> bool {
        let Ok(grid) = self.grid() else { return false };
        self.indices.iter().any(|&i| {
            let b = grid.rect(i);
            let k = (r.x0 - b.x0).floor() as i64;
            (k - 1..=k + 1).any(|j| b.translate(j).intersects(r))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_inside_band() {
        let g = Grid::new(3, Band::new(0.2, 0.8).unwrap()).unwrap();
        assert_eq!(g.row_range(), 2..6);
        assert_eq!(g.len(), 32);
        let full = Grid::new(2, Band::full()).unwrap();
        assert_eq!(full.row_range(), 0..4);
        assert!(Grid::new(2, Band::new(0.3, 0.45).unwrap()).is_err());
    }

    #[test]
    fn locate_reports_deck_label() {
        let g = Grid::new(2, Band::full()).unwrap();
        let (idx, k) = g.locate(LiftPoint::new(-0.1, 0.6)).unwrap();
        assert_eq!(g.id(idx), BoxId { row: 2, col: 3 });
        assert_eq!(k, -1);
        let (_, k) = g.locate(LiftPoint::new(2.3, 0.1)).unwrap();
        assert_eq!(k, 2);
        assert!(g.locate(LiftPoint::new(0.0, 1.2)).is_none());
    }

    #[test]
    fn cover_spans_neighbours_and_flags_exits() {
        let g = Grid::new(2, Band::new(0.25, 1.0).unwrap()).unwrap();
        let mut out = Vec::new();
        assert!(g.cover(LiftPoint::new(0.5, 0.5), 0.01, &mut out));
        assert_eq!(out.len(), 4);
        out.clear();
        assert!(!g.cover(LiftPoint::new(0.02, 0.26), 0.05, &mut out));
        assert!(out.iter().any(|&(_, k)| k == -1));
    }

    #[test]
    fn rect_helpers() {
        let r = Rect::new(0.2f64, 0.4, 0.1, 0.3).unwrap();
        assert_eq!(r.samples(3).len(), 9);
        assert!(r.samples(3).iter().all(|&p| r.contains_strictly(p)));
        assert_eq!(r.translate_containing(LiftPoint::new(-1.7, 0.2)), Some(-2));
        assert_eq!(r.translate_containing(LiftPoint::new(-1.7, 0.5)), None);
        assert!((r.linf_distance(LiftPoint::new(0.5, 0.2)) - 0.1).abs() < 1e-15);
        assert!(Rect::new(0.3, 0.3, 0.0, 1.0).is_err());
    }

    #[test]
    fn band_boxset() {
        let g = Grid::new(4, Band::full()).unwrap();
        let b = BoxSet::band(&g, 0.25, 0.75).unwrap();
        assert_eq!(b.len(), 16 * 8);
        assert_eq!(b.y_extent(), Some((0.25, 0.75)));
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.starts_with("{\"d\":4,\"region\":"));
        assert_eq!(serde_json::from_str::<BoxSet>(&json).unwrap(), b);
    }
}
