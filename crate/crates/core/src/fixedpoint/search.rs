//! Fixed point search by subdivision and damped Newton refinement.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::{displacement, winding_number, WindingOptions};
use crate::boxdyn::Rect;
use crate::error::{Error, Result};
use crate::lift::{circle_dist, wrap_unit, LiftMap, LiftPoint};
use crate::scalar::Scalar;

/// Cells survive subdivision unless some displacement component keeps one
/// sign with `min |c| > KEEP * (max c - min c)` over the cell samples.
const KEEP: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRecord<S> {
    pub point: LiftPoint<S>,
    pub index: i64,
    pub residual: S,
    pub cell: Rect<S>,
}

/// A connected set of surviving cells on which converged zeros spread out
/// instead of collapsing to one point: a curve of fixed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateComponent<S> {
    pub cells: Vec<Rect<S>>,
    pub points: Vec<LiftPoint<S>>,
    pub max_residual: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSearch<S> {
    pub records: Vec<FixedPointRecord<S>>,
    pub degenerate: Vec<DegenerateComponent<S>>,
    /// Smallest `|f~(z) - z|` over the subdivision samples.
    pub grid_min_displacement: S,
    /// Smallest `|f~(z) - z|` after local minimization from the best samples.
    pub min_displacement: S,
    pub region: Rect<S>,
    pub depth: u32,
    pub tol: S,
    /// Clusters of surviving cells on which no zero converged.
    pub unresolved_clusters: usize,
}

impl<S: Scalar> FixedPointSearch<S> {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.degenerate.is_empty()
    }
}

fn norm<S: Scalar>(d: (S, S)) -> S {
    d.0.hypot(d.1)
}

/// Damped Gauss-Newton on the displacement with a finite-difference Jacobian.
/// Returns the best point reached and its residual; the residual is below
/// `tol` when a zero was found.
pub fn refine_zero<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, start: LiftPoint<S>, tol: S) -> (LiftPoint<S>, S) {
    let eval = |p: LiftPoint<S>| displacement(m, p).ok().filter(|d| d.0.is_finite() && d.1.is_finite());
    let Some(mut d) = eval(start) else { return (start, S::infinity()) };
    let mut z = start;
    let mut r = norm(d);
    let mut mu = S::lit(1e-6);
    let h = S::epsilon().sqrt();
    let two = S::lit(2.0);
    for _ in 0..200 {
        if r < tol {
            break;
        }
        let (Some(ax), Some(bx), Some(ay), Some(by)) = (
            eval(LiftPoint::new(z.x + h, z.y)),
            eval(LiftPoint::new(z.x - h, z.y)),
            eval(LiftPoint::new(z.x, z.y + h)),
            eval(LiftPoint::new(z.x, z.y - h)),
        ) else {
            break;
        };
        let (j11, j21) = ((ax.0 - bx.0) / (two * h), (ax.1 - bx.1) / (two * h));
        let (j12, j22) = ((ay.0 - by.0) / (two * h), (ay.1 - by.1) / (two * h));
        // normal equations (J^T J + mu I) step = -J^T d
        let (g1, g2) = (j11 * d.0 + j21 * d.1, j12 * d.0 + j22 * d.1);
        let (a11, a12, a22) = (j11 * j11 + j21 * j21, j11 * j12 + j21 * j22, j12 * j12 + j22 * j22);
        let mut improved = false;
        for _ in 0..30 {
            let (b11, b22) = (a11 + mu, a22 + mu);
            let det = b11 * b22 - a12 * a12;
            if !(det.abs() > S::zero()) {
                mu = mu * S::lit(10.0);
                continue;
            }
            let sx = -(b22 * g1 - a12 * g2) / det;
            let sy = -(b11 * g2 - a12 * g1) / det;
            let trial = LiftPoint::new(z.x + sx, z.y + sy);
            if let Some(dt) = eval(trial) {
                if norm(dt) < r {
                    z = trial;
                    d = dt;
                    r = norm(dt);
                    mu = (mu / S::lit(3.0)).max(S::lit(1e-12));
                    improved = true;
                    break;
                }
            }
            mu = mu * S::lit(4.0);
        }
        if !improved {
            break;
        }
    }
    (z, r)
}

#[derive(Debug, Clone, Copy)]
struct Cell<S> {
    rect: Rect<S>,
    col: u64,
    row: u64,
    best: (S, LiftPoint<S>),
}

/// Displacement samples on the closed 3 x 3 grid of the cell; `None` when the
/// cell is excluded. Map failures keep the cell (nothing is known there).
fn survey<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, rect: &Rect<S>) -> Option<(S, LiftPoint<S>)> {
    let mut xs = Vec::with_capacity(9);
    let mut best = (S::infinity(), rect.center());
    for p in rect.closed_samples(3) {
        match displacement(m, p) {
            Ok(d) if d.0.is_finite() && d.1.is_finite() => {
                if norm(d) < best.0 {
                    best = (norm(d), p);
                }
                xs.push(d);
            }
            _ => return Some(best),
        }
    }
    let keep = S::lit(KEEP);
    let excluded = |c: &dyn Fn(&(S, S)) -> S| {
        let lo = xs.iter().map(c).fold(S::infinity(), S::min);
        let hi = xs.iter().map(c).fold(S::neg_infinity(), S::max);
        let same_sign = lo > S::zero() || hi < S::zero();
        same_sign && lo.abs().min(hi.abs()) > keep * (hi - lo)
    };
    if excluded(&|d| d.0) || excluded(&|d| d.1) {
        None
    } else {
        Some(best)
    }
}

fn wrapped_dist<S: Scalar>(a: LiftPoint<S>, b: LiftPoint<S>) -> S {
    circle_dist(a.x, b.x).hypot(a.y - b.y)
}

fn normalized<S: Scalar>(p: LiftPoint<S>) -> LiftPoint<S> {
    LiftPoint::new(wrap_unit(p.x), p.y)
}

/// Subdivides the region `max_depth` times keeping cells where the
/// displacement may vanish, clusters the survivors, refines zeros from each
/// cluster and attaches indices to isolated zeros.
///
/// The region should span one fundamental domain horizontally; zeros are
/// reported with `x` in `[0, 1)`.
pub fn find_fixed_points<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    region: Rect<S>,
    tol: S,
    max_depth: u32,
) -> Result<FixedPointSearch<S>> {
    if !region.is_valid() || !(tol > S::zero()) {
        return Err(Error::BadParameter("search needs a nonempty region and a positive tolerance".into()));
    }
    if !(1..=12).contains(&max_depth) {
        return Err(Error::BadParameter(format!("subdivision depth {max_depth} outside 1..=12")));
    }
    let periodic = (region.width() - S::one()).abs() < S::lit(1e-12);
    let mut cells = vec![Cell { rect: region, col: 0, row: 0, best: (S::infinity(), region.center()) }];
    let mut grid_min = S::infinity();
    let mut best_samples: Vec<(S, LiftPoint<S>)> = Vec::new();
    for _ in 0..max_depth {
        let children: Vec<Cell<S>> = cells
            .iter()
            .flat_map(|c| {
                let half = S::lit(0.5);
                let xm = half * (c.rect.x0 + c.rect.x1);
                let ym = half * (c.rect.y0 + c.rect.y1);
                [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(i, j)| Cell {
                    rect: Rect {
                        x0: if i == 0 { c.rect.x0 } else { xm },
                        x1: if i == 0 { xm } else { c.rect.x1 },
                        y0: if j == 0 { c.rect.y0 } else { ym },
                        y1: if j == 0 { ym } else { c.rect.y1 },
                    },
                    col: 2 * c.col + i,
                    row: 2 * c.row + j,
                    best: c.best,
                })
            })
            .collect();
        let surveyed: Vec<Option<(S, LiftPoint<S>)>> = children.par_iter().map(|c| survey(m, &c.rect)).collect();
        let mut next = Vec::new();
        for (mut c, s) in children.into_iter().zip(surveyed) {
            if let Some(best) = s {
                grid_min = grid_min.min(best.0);
                c.best = best;
                next.push(c);
            }
        }
        // excluded cells still carry information about the displacement size
        cells = next;
        best_samples.extend(cells.iter().map(|c| c.best));
    }
    let side_cols = 1u64 << max_depth;
    let cell_diag = cells.first().map(|c| c.rect.diameter()).unwrap_or_else(|| region.diameter());

    // 8-adjacent clusters of surviving cells
    let lookup: BTreeSet<(u64, u64)> = cells.iter().map(|c| (c.row, c.col)).collect();
    let position = |row: u64, col: u64| cells.iter().position(|c| (c.row, c.col) == (row, col));
    let mut seen = BTreeSet::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| (cells[i].row, cells[i].col));
    for &start in &order {
        let key = (cells[start].row, cells[start].col);
        if !seen.insert(key) {
            continue;
        }
        let mut members = vec![start];
        let mut queue = VecDeque::from([key]);
        while let Some((row, col)) = queue.pop_front() {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let r = row as i64 + dr;
                    let mut c = col as i64 + dc;
                    if periodic {
                        c = c.rem_euclid(side_cols as i64);
                    }
                    if r < 0 || c < 0 || c >= side_cols as i64 {
                        continue;
                    }
                    let k = (r as u64, c as u64);
                    if lookup.contains(&k) && seen.insert(k) {
                        queue.push_back(k);
                        members.push(position(k.0, k.1).expect("listed cell"));
                    }
                }
            }
        }
        members.sort_by_key(|&i| (cells[i].row, cells[i].col));
        clusters.push(members);
    }

    let mut isolated: Vec<(LiftPoint<S>, S)> = Vec::new();
    let mut degenerate = Vec::new();
    let mut unresolved = 0;
    let spread_limit = S::lit(4.0) * cell_diag;
    for members in &clusters {
        let mut seeds: Vec<LiftPoint<S>> = Vec::new();
        let best = members
            .iter()
            .min_by(|&&a, &&b| cells[a].best.0.partial_cmp(&cells[b].best.0).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty cluster");
        seeds.push(cells[*best].best.1);
        let stride = (members.len() / 7).max(1);
        seeds.extend(members.iter().step_by(stride).take(7).map(|&i| cells[i].rect.center()));
        let zeros: Vec<(LiftPoint<S>, S)> = seeds
            .par_iter()
            .map(|&s| refine_zero(m, s, tol))
            .filter(|&(_, r)| r < tol)
            .collect();
        if zeros.is_empty() {
            unresolved += 1;
            continue;
        }
        let spread = zeros
            .iter()
            .flat_map(|a| zeros.iter().map(move |b| wrapped_dist(a.0, b.0)))
            .fold(S::zero(), S::max);
        if spread <= spread_limit {
            let z = zeros.iter().copied().fold(zeros[0], |acc, z| if z.1 < acc.1 { z } else { acc });
            isolated.push((normalized(z.0), z.1));
        } else {
            degenerate.push(DegenerateComponent {
                cells: members.iter().map(|&i| cells[i].rect).collect(),
                points: zeros.iter().map(|z| normalized(z.0)).collect(),
                max_residual: zeros.iter().map(|z| z.1).fold(S::zero(), S::max),
            });
        }
    }
    // the same zero can be reached from clusters on both sides of x = 0
    let mut unique: Vec<(LiftPoint<S>, S)> = Vec::new();
    for z in isolated {
        if !unique.iter().any(|u| wrapped_dist(u.0, z.0) < spread_limit) {
            unique.push(z);
        }
    }
    unique.sort_by(|a, b| (a.0.x, a.0.y).partial_cmp(&(b.0.x, b.0.y)).unwrap_or(std::cmp::Ordering::Equal));

    let mut records = Vec::new();
    for (i, &(z, residual)) in unique.iter().enumerate() {
        let nearest = unique
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, u)| wrapped_dist(u.0, z))
            .fold(S::infinity(), S::min);
        let cell = index_cell(m, z, cell_diag, nearest)?;
        let index = winding_number(m, &cell, WindingOptions::for_scalar::<S>())?.index;
        records.push(FixedPointRecord { point: z, index, residual, cell });
    }

    best_samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let refined = best_samples
        .iter()
        .take(5)
        .map(|&(_, p)| refine_zero(m, p, tol).1)
        .fold(grid_min, S::min);
    Ok(FixedPointSearch {
        records,
        degenerate,
        grid_min_displacement: grid_min,
        min_displacement: refined,
        region,
        depth: max_depth,
        tol,
        unresolved_clusters: unresolved,
    })
}

/// Square around an isolated zero, small enough to exclude its neighbours,
/// with no zero of the displacement on its boundary.
fn index_cell<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    z: LiftPoint<S>,
    cell_diag: S,
    nearest: S,
) -> Result<Rect<S>> {
    let mut r = (S::lit(1.5) * cell_diag).min(S::lit(0.4) * nearest);
    let mut last = Error::BoundaryZero { min_norm: 0.0 };
    for _ in 0..6 {
        let cell = Rect::around(z, r);
        match winding_number(m, &cell, WindingOptions::for_scalar::<S>()) {
            Ok(_) => return Ok(cell),
            Err(e @ Error::BoundaryZero { .. }) => last = e,
            Err(e) => return Err(e),
        }
        r = r * S::lit(0.7);
    }
    Err(last)
}

/// Sum of indices over records whose cells are pairwise disjoint on the annulus.
pub fn lefschetz_sum<S: Scalar>(records: &[FixedPointRecord<S>]) -> Result<i64> {
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            let k = (b.cell.x0 - a.cell.x0).round().to_i64().unwrap_or(0);
            if (k - 1..=k + 1).any(|j| a.cell.translate(j).intersects(&b.cell)) {
                return Err(Error::Overlap(format!(
                    "cells around ({}, {}) and ({}, {}) intersect",
                    a.point.x, a.point.y, b.point.x, b.point.y
                )));
            }
        }
    }
    Ok(records.iter().map(|r| r.index).sum())
}

/// `[0, 1) x [y0, y1]`, the usual search region.
pub fn fundamental_region<S: Scalar>(y0: S, y1: S) -> Result<Rect<S>> {
    Rect::new(S::zero(), S::one(), y0, y1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_map, MapVariant, Twist};

    fn region() -> Rect {
        fundamental_region(0.05, 0.95).unwrap()
    }

    #[test]
    fn pt_zeros_and_indices() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap();
        let s = find_fixed_points(&m, region(), 1e-10, 7).unwrap();
        assert!(s.degenerate.is_empty());
        assert_eq!(s.records.len(), 2);
        let saddle = &s.records[0];
        let node = &s.records[1];
        assert!(circle_dist(saddle.point.x, 0.0) < 1e-9 && (saddle.point.y - 0.5).abs() < 1e-9);
        assert!((node.point.x - 0.5).abs() < 1e-9 && (node.point.y - 0.5).abs() < 1e-9);
        assert_eq!((saddle.index, node.index), (-1, 1));
        assert_eq!(lefschetz_sum(&s.records).unwrap(), 0);
    }

    #[test]
    fn twist_gives_a_curve() {
        let s = find_fixed_points(&Twist, region(), 1e-10, 6).unwrap();
        assert!(s.records.is_empty());
        assert_eq!(s.degenerate.len(), 1);
        assert!(s.degenerate[0].points.iter().all(|p| (p.y - 0.5).abs() < 1e-9));
    }

    #[test]
    fn rnf_has_none() {
        let m = make_map::<f64>(&MapVariant::Rnf { alpha: 0.05, beta: 6.0, lambda: 0.9 }).unwrap();
        let s = find_fixed_points(&m, region(), 1e-10, 7).unwrap();
        assert!(s.is_empty());
        assert!(s.min_displacement > 0.0 && s.min_displacement <= s.grid_min_displacement);
        assert_eq!(lefschetz_sum(&s.records).unwrap(), 0);
    }

    #[test]
    fn overlapping_cells_rejected() {
        let r = FixedPointRecord { point: LiftPoint::new(0.5, 0.5), index: 1, residual: 0.0, cell: Rect::around(LiftPoint::new(0.5, 0.5), 0.1) };
        let mut s = r;
        s.point.x = 1.55;
        s.cell = Rect::around(s.point, 0.1);
        assert!(matches!(lefschetz_sum(&[r, s]), Err(Error::Overlap(_))));
    }

    #[test]
    fn refine_reaches_zero() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap();
        let (z, r) = refine_zero(&m, LiftPoint::new(0.47, 0.55), 1e-12);
        assert!(r < 1e-12);
        assert!((z.x - 0.5).abs() < 1e-10);
    }
}
