//! Fixed point index as the winding number of the displacement field.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::boxdyn::Rect;
use crate::error::{Error, Result};
use crate::lift::{LiftMap, LiftPoint};
use crate::scalar::Scalar;

/// `f~(p) - p`.
pub fn displacement<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, p: LiftPoint<S>) -> Result<(S, S)> {
    let q = m.apply(p)?;
    Ok((q.x - p.x, q.y - p.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingOptions {
    /// Boundary points per side before refinement.
    pub initial_per_side: usize,
    /// Displacements at or below this norm count as zeros on the boundary.
    pub min_norm: f64,
    /// Bisection depth limit per initial segment.
    pub max_depth: u32,
}

impl WindingOptions {
    pub fn for_scalar<S: Scalar>() -> Self {
        Self { initial_per_side: 16, min_norm: S::closed_form_tol().as_f64() * 1e-3, max_depth: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub index: i64,
    pub total_angle: f64,
    pub evaluations: usize,
    pub min_boundary_norm: f64,
}

/// Point at parameter `t in [0, 4)` along the counterclockwise boundary.
fn boundary_point<S: Scalar>(cell: &Rect<S>, t: f64) -> LiftPoint<S> {
    let side = (t.floor() as usize).min(3);
    let s = S::lit(t - side as f64);
    match side {
        0 => LiftPoint::new(cell.x0 + s * cell.width(), cell.y0),
        1 => LiftPoint::new(cell.x1, cell.y0 + s * cell.height()),
        2 => LiftPoint::new(cell.x1 - s * cell.width(), cell.y1),
        _ => LiftPoint::new(cell.x0, cell.y1 - s * cell.height()),
    }
}

fn turn(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 * b.1 - a.1 * b.0).atan2(a.0 * b.0 + a.1 * b.1)
}

struct Walker<'a, S: Scalar, M: ?Sized> {
    m: &'a M,
    cell: Rect<S>,
    opts: WindingOptions,
    evaluations: usize,
    min_norm: f64,
}

impl<S: Scalar, M: LiftMap<S> + ?Sized> Walker<'_, S, M> {
    fn eval(&mut self, t: f64) -> Result<(f64, f64)> {
        let (dx, dy) = displacement(self.m, boundary_point(&self.cell, t))?;
        let d = (dx.as_f64(), dy.as_f64());
        self.evaluations += 1;
        let norm = d.0.hypot(d.1);
        self.min_norm = self.min_norm.min(norm);
        if !(norm > self.opts.min_norm) {
            return Err(Error::BoundaryZero { min_norm: norm });
        }
        Ok(d)
    }

    /// Signed angle swept from `t0` to `t1`, bisecting until every increment
    /// is below a quarter turn.
    fn sweep(&mut self, t0: f64, d0: (f64, f64), t1: f64, d1: (f64, f64), depth: u32) -> Result<f64> {
        let a = turn(d0, d1);
        if a.abs() < FRAC_PI_2 {
            return Ok(a);
        }
        if depth >= self.opts.max_depth {
            return Err(Error::BoundaryZero { min_norm: self.min_norm });
        }
        let tm = 0.5 * (t0 + t1);
        let dm = self.eval(tm)?;
        Ok(self.sweep(t0, d0, tm, dm, depth + 1)? + self.sweep(tm, dm, t1, d1, depth + 1)?)
    }
}

/// Winding number of `z -> f~(z) - z` along the counterclockwise boundary of
/// the cell, by summed angle increments refined until each is below `pi/2`.
pub fn winding_number<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    cell: &Rect<S>,
    opts: WindingOptions,
) -> Result<WindingReport> {
    if !cell.is_valid() {
        return Err(Error::BadParameter("index cell must be a nonempty rectangle".into()));
    }
    let mut w = Walker { m, cell: *cell, opts, evaluations: 0, min_norm: f64::INFINITY };
    let steps = 4 * opts.initial_per_side.max(1);
    let ts: Vec<f64> = (0..=steps).map(|i| 4.0 * i as f64 / steps as f64).collect();
    let first = w.eval(0.0)?;
    let mut prev = first;
    let mut total = 0.0;
    for pair in ts.windows(2) {
        let next = if pair[1] >= 4.0 { first } else { w.eval(pair[1])? };
        total += w.sweep(pair[0], prev, pair[1], next, 0)?;
        prev = next;
    }
    Ok(WindingReport {
        index: (total / TAU).round() as i64,
        total_angle: total,
        evaluations: w.evaluations,
        min_boundary_norm: w.min_norm,
    })
}

/// Index of the fixed points inside `cell`.
pub fn fixed_point_index<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, cell: &Rect<S>) -> Result<i64> {
    Ok(winding_number(m, cell, WindingOptions::for_scalar::<S>())?.index)
}

/// Sum of the indices of all fixed points in one fundamental domain of the
/// band `y0 <= y <= y1`, read off the boundary of `[a, a + 1] x [y0, y1]`.
/// The vertical sides cancel by equivariance; `a` is shifted off zeros.
pub fn band_index_sum<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, y0: S, y1: S) -> Result<i64> {
    let opts = WindingOptions { initial_per_side: 256, ..WindingOptions::for_scalar::<S>() };
    let mut last = Error::BoundaryZero { min_norm: 0.0 };
    for a in [0.0, 0.137, 0.291, 0.413, 0.768] {
        let band = Rect::new(S::lit(a), S::lit(a + 1.0), y0, y1)?;
        match winding_number(m, &band, opts) {
            Ok(r) => return Ok(r.index),
            Err(e @ Error::BoundaryZero { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_map, MapVariant};

    fn pt() -> Box<dyn LiftMap<f64>> {
        make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap()
    }

    #[test]
    fn node_and_saddle() {
        let node = Rect::around(LiftPoint::new(0.5, 0.5), 0.05);
        let saddle = Rect::around(LiftPoint::new(0.0, 0.5), 0.05);
        assert_eq!(fixed_point_index(&pt(), &node).unwrap(), 1);
        assert_eq!(fixed_point_index(&pt(), &saddle).unwrap(), -1);
        let empty = Rect::around(LiftPoint::new(0.25, 0.3), 0.05);
        assert_eq!(fixed_point_index(&pt(), &empty).unwrap(), 0);
    }

    #[test]
    fn boundary_zero_detected() {
        let through = Rect::new(0.5, 0.6, 0.4, 0.6).unwrap();
        assert!(matches!(fixed_point_index(&pt(), &through), Err(Error::BoundaryZero { .. })));
    }

    #[test]
    fn band_sum_vanishes() {
        assert_eq!(band_index_sum(&pt(), 0.1, 0.9).unwrap(), 0);
    }

    #[test]
    fn single_precision_index() {
        let m = make_map::<f32>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap();
        let node = Rect::around(LiftPoint::new(0.5f32, 0.5), 0.05);
        assert_eq!(fixed_point_index(&m, &node).unwrap(), 1);
    }
}
