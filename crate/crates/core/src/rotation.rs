//! Finite-horizon rotation numbers.
//!
//! The rotation number of `y` is the limit of `(f~^n(y) - y)_1 / n`. At a
//! finite horizon `N` we report the plain average at `N` and the min/max of the
//! averages over the tail window `[N/2, N]` as liminf/limsup estimates; the
//! window skips the transient of orbits still falling onto an attractor.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{orbit, LiftMap, LiftPoint};
use crate::scalar::Scalar;

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate<S> {
    pub horizon: usize,
    pub mean: S,
    pub liminf_est: S,
    pub limsup_est: S,
    pub converged: bool,
}

impl<S: Scalar> RotationEstimate<S> {
    /// Whether `value` lies in `[liminf - slack, limsup + slack]`.
    pub fn brackets(&self, value: S, slack: S) -> bool {
        self.liminf_est - slack <= value && value <= self.limsup_est + slack
    }
}

/// Rotation estimate with the default convergence tolerance.
pub fn rotation_estimate<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    p: LiftPoint<S>,
    horizon: usize,
) -> Result<RotationEstimate<S>> {
    rotation_estimate_with_tol(m, p, horizon, S::lit(DEFAULT_CONVERGENCE_TOL))
}

pub fn rotation_estimate_with_tol<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    p: LiftPoint<S>,
    horizon: usize,
    tol: S,
) -> Result<RotationEstimate<S>> {
    if horizon < 10 {
        return Err(Error::BadParameter(format!("horizon {horizon} must be at least 10")));
    }
    let pts = orbit(m, p, horizon)?;
    let avg = |n: usize| (pts[n].x - p.x) / S::from_usize(n).expect("horizon fits");
    let tail = horizon.div_ceil(2)..=horizon;
    let (lo, hi) = tail
        .map(avg)
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(RotationEstimate {
        horizon,
        mean: avg(horizon),
        liminf_est: lo,
        limsup_est: hi,
        converged: hi - lo < tol,
    })
}

/// Interval hull `[min liminf, max limsup]` over a sample of points.
pub fn rotation_interval<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    points: &[LiftPoint<S>],
    horizon: usize,
) -> Result<(S, S)> {
    if points.is_empty() {
        return Err(Error::BadParameter("rotation interval needs a nonempty sample".into()));
    }
    let estimates = points
        .par_iter()
        .map(|&p| rotation_estimate(m, p, horizon))
        .collect::<Result<Vec<_>>>()?;
    Ok(estimates
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), e| (lo.min(e.liminf_est), hi.max(e.limsup_est))))
}

/// CSV of `n, (f~^n(p) - p)_1 / n` for `n = 1..=horizon`.
pub fn rotation_csv<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, p: LiftPoint<S>, horizon: usize) -> Result<String> {
    let pts = orbit(m, p, horizon)?;
    let mut s = String::from("n,rotation\n");
    for (n, q) in pts.iter().enumerate().skip(1) {
        let _ = writeln!(s, "{n},{}", (q.x - p.x) / S::from_usize(n).expect("n fits"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::TranslatedLift;
    use crate::zoo::{make_map, MapVariant, Twist};

    #[test]
    fn rigid_rotation_exact() {
        let m = make_map::<f64>(&MapVariant::Rigid { alpha: 0.25, lambda: 0.5 }).unwrap();
        let e = rotation_estimate(&m, LiftPoint::new(0.3, 0.2), 1000).unwrap();
        assert!((e.mean - 0.25).abs() < 1e-12);
        assert!(e.converged);
        let on_circle = rotation_estimate(&m, LiftPoint::new(0.0, 0.5), 1000).unwrap();
        assert_eq!(on_circle.mean, 0.25);
    }

    #[test]
    fn twist_heights() {
        let e = rotation_estimate(&Twist, LiftPoint::new(0.0f64, 0.8), 1000).unwrap();
        assert!((e.mean - 0.3).abs() < 1e-12);
        let pts: Vec<_> = (1..=9).map(|i| LiftPoint::new(0.0, i as f64 / 10.0)).collect();
        let (lo, hi) = rotation_interval(&Twist, &pts, 1000).unwrap();
        assert!((lo + 0.4).abs() < 1e-3 && (hi - 0.4).abs() < 1e-3);
    }

    #[test]
    fn pt_orbit_settles_on_fixed_point() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap();
        let e = rotation_estimate(&m, LiftPoint::new(0.25, 0.5), 2000).unwrap();
        assert!(e.mean.abs() < 1e-3 && e.limsup_est.abs() < 1e-3);
    }

    #[test]
    fn rigid_third_interval() {
        let m = make_map::<f64>(&MapVariant::Rigid { alpha: 1.0 / 3.0, lambda: 0.5 }).unwrap();
        let pts = crate::lift::domain_samples::<f64>(20);
        let (lo, hi) = rotation_interval(&m, &pts, 1000).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-9 && (hi - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn rnf_interval_near_attractor() {
        let m = make_map::<f64>(&MapVariant::Rnf { alpha: 0.05, beta: 6.0, lambda: 0.9 }).unwrap();
        let pts: Vec<_> = (0..20).map(|i| LiftPoint::new(i as f64 / 20.0, 0.49 + 0.001 * i as f64)).collect();
        let (lo, hi) = rotation_interval(&m, &pts, 5000).unwrap();
        assert!((lo - 0.05).abs() < 1e-3 && (hi - 0.05).abs() < 1e-3, "[{lo}, {hi}]");
        // far from the circle the transient drift still shows at this horizon
        let far = rotation_estimate(&m, LiftPoint::new(0.0, 0.06), 5000).unwrap();
        assert!((far.mean - 0.05).abs() > 1e-3);
    }

    #[test]
    fn shifted_lift_shifts_estimate() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.1, gamma: 0.3, beta: 0.5, lambda: 0.7 }).unwrap();
        let p = LiftPoint::new(0.4, 0.3);
        let base = rotation_estimate(&m, p, 500).unwrap();
        let shifted = rotation_estimate(&TranslatedLift { inner: &m, k: 3 }, p, 500).unwrap();
        assert!((shifted.mean - base.mean - 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(rotation_estimate(&Twist, LiftPoint::new(0.0, 0.5), 5).is_err());
        assert!(rotation_interval::<f64, _>(&Twist, &[], 100).is_err());
    }

    #[test]
    fn csv_rows() {
        let csv = rotation_csv(&Twist, LiftPoint::new(0.0, 0.75), 12).unwrap();
        assert!(csv.starts_with("n,rotation\n1,0.25\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn single_precision() {
        let m = make_map::<f32>(&MapVariant::Rigid { alpha: 0.25, lambda: 0.5 }).unwrap();
        let e = rotation_estimate(&m, LiftPoint::new(0.0f32, 0.5), 100).unwrap();
        assert_eq!(e.mean, 0.25f32);
    }
}
