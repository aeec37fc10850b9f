//! Forward-invariant windows, attractors and invariant annuli on box sets.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{box_image, GraphParams};
use super::grid::{Band, BoxSet, Grid};
use crate::error::{Error, Result};
use crate::lift::{LiftMap, LiftPoint};

/// Checks on a box set that can be recomputed from the set alone (plus the map
/// for the invariance margin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub boxes: BoxSet,
    pub inflation: f64,
    pub samples_per_side: usize,
    /// `min` over sampled images of the distance to the complement, less the
    /// inflation radius. Positive means the inflated images lie in the interior.
    #[serde(with = "crate::serde_float")]
    pub margin: f64,
    pub verified: bool,
    /// First box (row-major) whose image gets closest to the complement, on failure.
    pub counterexample: Option<usize>,
    pub components: usize,
    pub connected: bool,
    pub separates: bool,
}

pub type AttractorReport = WindowReport;

/// Box-adjacency components (8-neighbourhood, periodic in `x`).
pub fn component_count(set: &BoxSet) -> usize {
    let Ok(grid) = set.grid() else { return 0 };
    let n = grid.n() as i64;
    let mut seen = BTreeSet::new();
    let mut count = 0;
    for &start in &set.indices {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let id = grid.id(i);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let r = id.row as i64 + dr;
                    if r < 0 || r >= n {
                        continue;
                    }
                    let j = r as usize * n as usize + (id.col as i64 + dc).rem_euclid(n) as usize;
                    if set.contains(j) && seen.insert(j) {
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count
}

/// Whether removing the set disconnects the bottom of the annulus from the
/// top: no 4-connected path of complementary boxes joins row 0 to the top row.
pub fn separates_boundaries(set: &BoxSet) -> bool {
    let Ok(grid) = set.grid() else { return false };
    let n = grid.n() as usize;
    let mut seen = vec![false; n * n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&c| !set.contains(c)).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        let (row, col) = (i / n, i % n);
        if row == n - 1 {
            return false;
        }
        let mut next = vec![row * n + (col + 1) % n, row * n + (col + n - 1) % n, (row + 1) * n + col];
        if row > 0 {
            next.push((row - 1) * n + col);
        }
        for j in next {
            if !seen[j] && !set.contains(j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    true
}

/// `L^inf` distance from `w` to the complement of the set, looking at most
/// `reach` boxes away; full-grid rows outside `[0, 1]` count as complement.
fn distance_to_complement(set: &BoxSet, grid: &Grid, w: LiftPoint<f64>, reach: i64) -> f64 {
    let n = grid.n() as i64;
    let h = grid.side();
    let col = (w.x / h).floor() as i64;
    let row = (w.y / h).floor() as i64;
    let mut best = reach as f64 * h;
    for r in row - reach..=row + reach {
        for c in col - reach..=col + reach {
            let inside = r >= 0 && r < n && set.contains(r as usize * n as usize + c.rem_euclid(n) as usize);
            if inside {
                continue;
            }
            let dx = (c as f64 * h - w.x).max(w.x - (c + 1) as f64 * h).max(0.0);
            let dy = (r as f64 * h - w.y).max(w.y - (r + 1) as f64 * h).max(0.0);
            best = best.min(dx.max(dy));
        }
    }
    best
}

fn report(set: BoxSet, params: &GraphParams, margin: f64, counterexample: Option<usize>) -> WindowReport {
    let components = component_count(&set);
    let separates = separates_boundaries(&set);
    WindowReport {
        inflation: params.inflation,
        samples_per_side: params.samples_per_side,
        margin,
        verified: margin > 0.0 && !set.is_empty(),
        counterexample: if margin > 0.0 { None } else { counterexample },
        components,
        connected: components == 1,
        separates,
        boxes: set,
    }
}

/// Checks that the inflated sampled image of every box lands in the interior
/// of the set.
pub fn verify_window<M: LiftMap<f64> + ?Sized>(m: &M, w: &BoxSet, params: &GraphParams) -> Result<WindowReport> {
    if w.is_empty() {
        return Err(Error::BadParameter("window must be nonempty".into()));
    }
    let grid = w.grid()?;
    let reach = (params.inflation / grid.side()).ceil() as i64 + 2;
    let boxes: Vec<usize> = w.indices.iter().copied().collect();
    let margins: Vec<f64> = boxes
        .par_iter()
        .map(|&i| {
            grid.rect(i)
                .samples(params.samples_per_side)
                .into_iter()
                .map(|z| match m.apply(z) {
                    Ok(img) => distance_to_complement(w, &grid, img, reach) - params.inflation,
                    Err(_) => f64::NEG_INFINITY,
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (worst, margin) = margins
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bm), (i, &v)| if v < bm { (i, v) } else { (bi, bm) });
    Ok(report(w.clone(), params, margin, Some(boxes[worst])))
}

/// Covering boxes of the inflated sampled images, or `None` when some image
/// leaves the region.
fn image_cover<M: LiftMap<f64> + ?Sized>(
    m: &M,
    grid: &Grid,
    set: &BTreeSet<usize>,
    params: &GraphParams,
) -> Option<BTreeSet<usize>> {
    let boxes: Vec<usize> = set.iter().copied().collect();
    let images: Vec<_> = boxes.par_iter().map(|&i| box_image(m, grid, &grid.rect(i), params)).collect();
    if images.iter().any(|b| b.exits) {
        return None;
    }
    Some(images.into_iter().flat_map(|b| b.edges.into_iter().map(|e| e.to)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GrowOutcome {
    /// The growth stabilized and the result verifies as a window.
    Window { rounds: usize, report: WindowReport },
    /// The growth stabilized but the set has no strict interior margin.
    StabilizedUnverified { rounds: usize, report: WindowReport },
    /// Images reached the region bound, or growth did not settle in time.
    UnboundedAtScale { rounds: usize, boxes: usize, hit_bound: bool },
}

impl GrowOutcome {
    pub fn window(&self) -> Option<&WindowReport> {
        match self {
            GrowOutcome::Window { report, .. } => Some(report),
            _ => None,
        }
    }
}

/// Unions image covers into the seed until stable, then verifies. The grid
/// region of `seed` is the region bound.
pub fn grow_window<M: LiftMap<f64> + ?Sized>(
    m: &M,
    seed: &BoxSet,
    params: &GraphParams,
    max_iters: usize,
) -> Result<GrowOutcome> {
    if seed.is_empty() {
        return Err(Error::BadParameter("seed must be nonempty".into()));
    }
    let grid = seed.grid()?;
    let mut w = seed.indices.clone();
    let mut frontier = w.clone();
    for round in 1..=max_iters {
        let Some(cover) = image_cover(m, &grid, &frontier, params) else {
            return Ok(GrowOutcome::UnboundedAtScale { rounds: round, boxes: w.len(), hit_bound: true });
        };
        frontier = cover.difference(&w).copied().collect();
        if frontier.is_empty() {
            let set = BoxSet { indices: w, ..seed.clone() };
            let report = verify_window(m, &set, params)?;
            return Ok(if report.verified {
                GrowOutcome::Window { rounds: round, report }
            } else {
                GrowOutcome::StabilizedUnverified { rounds: round, report }
            });
        }
        w.extend(frontier.iter().copied());
    }
    Ok(GrowOutcome::UnboundedAtScale { rounds: max_iters, boxes: w.len(), hit_bound: false })
}

/// Iterates `A <- cover(f(A)) cap A` from a verified window `depth` times (or
/// until stable) and reports the window checks on the result; a positive
/// margin means the attractor cover is itself forward invariant.
pub fn attractor_boxes<M: LiftMap<f64> + ?Sized>(
    m: &M,
    w: &BoxSet,
    params: &GraphParams,
    depth: usize,
) -> Result<AttractorReport> {
    let check = verify_window(m, w, params)?;
    if !check.verified {
        return Err(Error::PreconditionFailed(format!(
            "attractor needs a verified window (margin {:.3e})",
            check.margin
        )));
    }
    let grid = w.grid()?;
    let mut a = w.indices.clone();
    for _ in 0..depth {
        let cover = image_cover(m, &grid, &a, params)
            .ok_or_else(|| Error::PreconditionFailed("window images left the region".into()))?;
        let next: BTreeSet<usize> = cover.intersection(&a).copied().collect();
        if next == a {
            break;
        }
        a = next;
    }
    verify_window(m, &BoxSet { indices: a, ..w.clone() }, params)
}

/// Fills every column of the set to one contiguous run between its lowest and
/// highest box.
pub fn fill_columns(set: &BoxSet) -> BoxSet {
    let Ok(grid) = set.grid() else { return set.clone() };
    let n = grid.n() as usize;
    let mut out = set.clone();
    for col in 0..n {
        let rows: Vec<usize> = set.indices.iter().filter(|&&i| i % n == col).map(|&i| i / n).collect();
        if let (Some(&lo), Some(&hi)) = (rows.first(), rows.last()) {
            out.indices.extend((lo..=hi).map(|r| r * n + col));
        }
    }
    out
}

/// A box band `A0` with `f(A0)` in its interior, one contiguous run per column,
/// and nonempty collars on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantAnnulus {
    pub report: WindowReport,
    /// Fiber extent of the band.
    pub y_extent: (f64, f64),
}

/// Grows a window from `w`, shrinks it onto the attractor, closes columns and
/// grows again until the column-filled set is forward invariant.
pub fn construct_invariant_annulus<M: LiftMap<f64> + ?Sized>(
    m: &M,
    w: &BoxSet,
    params: &GraphParams,
    max_iters: usize,
) -> Result<InvariantAnnulus> {
    let window = match grow_window(m, w, params, max_iters)? {
        GrowOutcome::Window { report, .. } => report.boxes,
        _ => return Err(Error::NotFoundAtResolution),
    };
    let grid = window.grid()?;
    let core = attractor_boxes(m, &window, params, max_iters)?.boxes;
    let mut band = fill_columns(&core);
    for _ in 0..max_iters {
        let cover = image_cover(m, &grid, &band.indices, params).ok_or(Error::NotFoundAtResolution)?;
        let grown = fill_columns(&BoxSet { indices: cover.union(&band.indices).copied().collect(), ..band.clone() });
        if grown == band {
            break;
        }
        band = grown;
    }
    let report = verify_window(m, &band, params)?;
    let n = grid.n() as usize;
    let columns_ok = (0..n).all(|c| band.indices.iter().any(|&i| i % n == c));
    let (lo, hi) = band.y_extent().ok_or(Error::NotFoundAtResolution)?;
    let rows = grid.row_range();
    let collars = band.indices.iter().all(|&i| {
        let r = (i / n) as u32;
        r > rows.start && r + 1 < rows.end
    });
    if !(report.verified && report.separates && columns_ok && collars) {
        return Err(Error::NotFoundAtResolution);
    }
    Ok(InvariantAnnulus { report, y_extent: (lo, hi) })
}

/// Grid over the band with a single seed box around `p`.
pub fn seed_box(depth: u32, region: Band, p: LiftPoint<f64>) -> Result<BoxSet> {
    BoxSet::single(&Grid::new(depth, region)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_map, Identity, MapVariant};

    fn params(grid: &Grid) -> GraphParams {
        GraphParams::defaults(grid)
    }

    fn diss() -> Box<dyn LiftMap<f64>> {
        make_map::<f64>(&MapVariant::DissRot { alpha: 0.318, lambda: 0.9 }).unwrap()
    }

    #[test]
    fn band_windows() {
        let grid = Grid::new(6, Band::full()).unwrap();
        let good = verify_window(&diss(), &BoxSet::band(&grid, 0.25, 0.75).unwrap(), &params(&grid)).unwrap();
        assert!(good.verified && good.margin > 0.0);
        assert!(good.connected && good.separates);
        let bad = verify_window(&diss(), &BoxSet::band(&grid, 0.7, 0.9).unwrap(), &params(&grid)).unwrap();
        assert!(!bad.verified);
        assert!(bad.counterexample.is_some());
        let rnf = make_map::<f64>(&MapVariant::Rnf { alpha: 0.05, beta: 6.0, lambda: 0.9 }).unwrap();
        let fine = Grid::new(8, Band::full()).unwrap();
        let thin = BoxSet::band(&fine, 0.4375, 0.5625).unwrap();
        let thin = verify_window(&rnf, &thin, &params(&fine)).unwrap();
        assert!(thin.verified);
    }

    #[test]
    fn separation_and_components() {
        let grid = Grid::new(3, Band::full()).unwrap();
        let row = BoxSet::band(&grid, 0.5, 0.625).unwrap();
        assert!(separates_boundaries(&row));
        assert_eq!(component_count(&row), 1);
        let mut gap = row.clone();
        gap.indices.remove(&(4 * 8 + 3));
        assert!(!separates_boundaries(&gap));
        assert_eq!(component_count(&gap), 1);
        let mut diagonal = BoxSet::empty(&grid);
        // a zigzag is 8-connected and still blocks 4-connected paths
        diagonal.indices.extend((0..8).map(|c| (3 + c % 2) * 8 + c));
        assert_eq!(component_count(&diagonal), 1);
        assert!(separates_boundaries(&diagonal));
    }

    #[test]
    fn grow_from_single_box() {
        let seed = seed_box(6, Band::new(0.05, 0.95).unwrap(), LiftPoint::new(0.5, 0.5)).unwrap();
        let grid = seed.grid().unwrap();
        let out = grow_window(&diss(), &seed, &params(&grid), 100).unwrap();
        let w = out.window().expect("window");
        assert!(w.separates && w.connected);
        let (lo, hi) = w.boxes.y_extent().unwrap();
        assert!(lo > 0.2 && hi < 0.8, "band [{lo}, {hi}]");
    }

    #[test]
    fn identity_never_settles() {
        let seed = seed_box(5, Band::new(0.05, 0.95).unwrap(), LiftPoint::new(0.5, 0.5)).unwrap();
        let grid = seed.grid().unwrap();
        let out = grow_window(&Identity, &seed, &params(&grid), 100).unwrap();
        assert!(matches!(out, GrowOutcome::UnboundedAtScale { hit_bound: true, .. }));
        let w = BoxSet::band(&grid, 0.25, 0.75).unwrap();
        let r = verify_window(&Identity, &w, &params(&grid)).unwrap();
        assert!(!r.verified);
    }

    #[test]
    fn attractor_inside_window() {
        let grid = Grid::new(7, Band::full()).unwrap();
        let w = BoxSet::band(&grid, 0.25, 0.75).unwrap();
        let a = attractor_boxes(&diss(), &w, &params(&grid), 30).unwrap();
        assert!(a.boxes.is_subset(&w));
        assert!(a.verified && a.connected && a.separates);
        let (lo, hi) = a.boxes.y_extent().unwrap();
        assert!(lo > 0.35 && hi < 0.65 && lo < 0.5 && hi > 0.5);
        assert!(attractor_boxes(&diss(), &BoxSet::band(&grid, 0.7, 0.9).unwrap(), &params(&grid), 3).is_err());
    }

    #[test]
    fn invariant_annulus() {
        let grid = Grid::new(6, Band::new(0.05, 0.95).unwrap()).unwrap();
        let w = BoxSet::band(&grid, 0.25, 0.75).unwrap();
        let a = construct_invariant_annulus(&diss(), &w, &params(&grid), 100).unwrap();
        assert!(a.report.verified && a.report.separates);
        let tw = construct_invariant_annulus(&crate::zoo::Twist, &w, &params(&grid), 100);
        assert_eq!(tw.unwrap_err(), Error::NotFoundAtResolution);
    }
}
