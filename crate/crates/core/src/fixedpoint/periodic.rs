//! Periodic orbits of rotation number `p/q` as fixed points of `T^-p o f~^q`.

use serde::{Deserialize, Serialize};

use super::search::{find_fixed_points, FixedPointSearch};
use crate::boxdyn::Rect;
use crate::error::{Error, Result};
use crate::lift::{circle_dist, iterate, project, DeckComposite, LiftMap, LiftPoint};
use crate::rotation::rotation_estimate;
use crate::scalar::Scalar;

const ROTATION_HORIZON: usize = 400;
const ROTATION_SLACK: f64 = 1e-6;
const SEARCH_DEPTH: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitRecord<S> {
    pub point: LiftPoint<S>,
    /// As requested; `2/6` is searched as `2/6`, not reduced to `1/3`.
    pub p: i64,
    pub q: u32,
    /// `f~^q(z)`, kept so a replay can compare against it.
    pub image: LiftPoint<S>,
    /// `|f~^q(z) - z - (p, 0)|` by direct recomputation.
    pub residual: S,
    pub index: Option<i64>,
    /// Representative of a curve of periodic points rather than an isolated one.
    pub degenerate: bool,
    pub rotation_brackets: bool,
    /// The projected point returns to itself after `q` steps of the annulus map.
    pub closes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSearch<S> {
    pub records: Vec<PeriodicOrbitRecord<S>>,
    pub search: FixedPointSearch<S>,
}

/// Fixed points of `g~ = T^-p o f~^q` in `region`, each cross-checked by a
/// rotation estimate. Degenerate curves contribute their converged points.
pub fn find_periodic_orbit<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    p: i64,
    q: u32,
    region: Rect<S>,
    tol: S,
) -> Result<PeriodicSearch<S>> {
    if q == 0 {
        return Err(Error::BadParameter("period q must be at least 1".into()));
    }
    let g = DeckComposite { inner: m, p, q };
    let search = find_fixed_points(&g, region, tol, SEARCH_DEPTH)?;
    let isolated = search.records.iter().map(|r| (r.point, Some(r.index), false));
    let curves = search.degenerate.iter().flat_map(|c| c.points.iter().map(|&z| (z, None, true)));
    let records = isolated
        .chain(curves)
        .map(|(z, index, degenerate)| check(m, z, p, q, index, degenerate))
        .collect::<Result<Vec<_>>>()?;
    Ok(PeriodicSearch { records, search })
}

fn check<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    z: LiftPoint<S>,
    p: i64,
    q: u32,
    index: Option<i64>,
    degenerate: bool,
) -> Result<PeriodicOrbitRecord<S>> {
    let img = iterate(m, z, q as i64)?;
    let residual = img.translate(-p).dist(z);
    let rotation = S::from_i64(p).expect("small integer") / S::from_u32(q).expect("small integer");
    let rotation_brackets = rotation_estimate(m, z, ROTATION_HORIZON)?.brackets(rotation, S::lit(ROTATION_SLACK));
    let (a, b) = (project(z), project(img));
    let closes = circle_dist(a.theta, b.theta).hypot(a.y - b.y) <= residual + S::closed_form_tol();
    Ok(PeriodicOrbitRecord { point: z, p, q, image: img, residual, index, degenerate, rotation_brackets, closes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::search::fundamental_region;
    use crate::zoo::{make_map, MapVariant};

    #[test]
    fn third_rotation_found() {
        let m = make_map::<f64>(&MapVariant::DissRot { alpha: 1.0 / 3.0, lambda: 0.9 }).unwrap();
        let s = find_periodic_orbit(&m, 1, 3, fundamental_region(0.05, 0.95).unwrap(), 1e-12).unwrap();
        assert!(!s.records.is_empty());
        for r in &s.records {
            assert!((r.point.y - 0.5).abs() < 1e-9);
            assert!(r.residual < 1e-10);
            assert!(r.rotation_brackets && r.closes);
        }
    }

    #[test]
    fn wrong_rotation_absent() {
        let m = make_map::<f64>(&MapVariant::DissRot { alpha: 0.5, lambda: 0.9 }).unwrap();
        let s = find_periodic_orbit(&m, 1, 3, fundamental_region(0.05, 0.95).unwrap(), 1e-12).unwrap();
        assert!(s.records.is_empty());
    }

    #[test]
    fn zero_period_rejected() {
        let m = make_map::<f64>(&MapVariant::DissRot { alpha: 0.5, lambda: 0.9 }).unwrap();
        assert!(find_periodic_orbit(&m, 0, 0, fundamental_region(0.05, 0.95).unwrap(), 1e-12).is_err());
    }
}
