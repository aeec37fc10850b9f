//! Orbit drift classification for maps without (or with few) fixed points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{circle_dist, LiftMap, LiftPoint};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum DriftTag<S> {
    ToPlusInfinity { step: usize },
    ToMinusInfinity { step: usize },
    ConvergesToFixed { fixed: LiftPoint<S>, step: usize },
    Unclassified { displacement: S },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftThresholds {
    pub horizon: usize,
    /// Escape once the orbit is this many turns from its start and never returns.
    pub escape_turns: f64,
    /// Convergence radius around a fixed point.
    pub delta: f64,
}

impl DriftThresholds {
    pub fn from_tol(tol: f64) -> Self {
        Self { horizon: 2000, escape_turns: 3.0, delta: 10.0 * tol }
    }
}

impl Default for DriftThresholds {
    fn default() -> Self {
        Self::from_tol(1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftVerdict {
    AllConverge,
    UniformPositive,
    UniformNegative,
    Mixed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftClass<S> {
    pub points: Vec<LiftPoint<S>>,
    pub tags: Vec<DriftTag<S>>,
    pub verdict: DriftVerdict,
    pub fixed_point_free: bool,
    /// False only when no fixed point is known and orbits drift both ways.
    pub consistent: bool,
}

/// `nx * ny` points, cell centred in x and spread over `[y0, y1]`.
pub fn sample_grid<S: Scalar>(nx: usize, ny: usize, y0: S, y1: S) -> Vec<LiftPoint<S>> {
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let t = if ny == 1 { S::lit(0.5) } else { S::lit(j as f64 / (ny - 1) as f64) };
        for i in 0..nx {
            pts.push(LiftPoint::new(S::lit((i as f64 + 0.5) / nx as f64), y0 + t * (y1 - y0)));
        }
    }
    pts
}

fn classify<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    z: LiftPoint<S>,
    fixed: &[LiftPoint<S>],
    th: &DriftThresholds,
) -> Result<DriftTag<S>> {
    let (x_lim, delta) = (S::lit(th.escape_turns), S::lit(th.delta));
    let mut q = z;
    // first step of the current excursion beyond the threshold, with its side
    let mut escape: Option<(usize, bool)> = None;
    for n in 1..=th.horizon {
        q = m.apply(q)?;
        if !q.is_finite() {
            return Err(Error::FiberEscape { step: n, y: q.y.as_f64() });
        }
        if let Some(&f) = fixed.iter().find(|f| circle_dist(f.x, q.x).hypot(f.y - q.y) < delta) {
            return Ok(DriftTag::ConvergesToFixed { fixed: f, step: n });
        }
        let dx = q.x - z.x;
        escape = match escape {
            Some((s, up)) if (up && dx > x_lim) || (!up && dx < -x_lim) => Some((s, up)),
            _ if dx > x_lim => Some((n, true)),
            _ if dx < -x_lim => Some((n, false)),
            _ => None,
        };
    }
    Ok(match escape {
        Some((step, true)) => DriftTag::ToPlusInfinity { step },
        Some((step, false)) => DriftTag::ToMinusInfinity { step },
        None => DriftTag::Unclassified { displacement: q.x - z.x },
    })
}

/// Tags each sample orbit and checks that, when `fixed` is empty, every
/// classified orbit drifts the same way.
pub fn drift_classification<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    points: &[LiftPoint<S>],
    fixed: &[LiftPoint<S>],
    th: &DriftThresholds,
) -> Result<DriftClass<S>> {
    if th.horizon == 0 || !(th.escape_turns > 0.0) || !(th.delta > 0.0) {
        return Err(Error::BadParameter("drift thresholds must be positive".into()));
    }
    let tags = points.iter().map(|&z| classify(m, z, fixed, th)).collect::<Result<Vec<_>>>()?;
    let count = |f: fn(&DriftTag<S>) -> bool| tags.iter().filter(|t| f(t)).count();
    let plus = count(|t| matches!(t, DriftTag::ToPlusInfinity { .. }));
    let minus = count(|t| matches!(t, DriftTag::ToMinusInfinity { .. }));
    let conv = count(|t| matches!(t, DriftTag::ConvergesToFixed { .. }));
    let n = tags.len();
    let verdict = if plus > 0 && minus > 0 {
        DriftVerdict::Mixed
    } else if n > 0 && plus == n {
        DriftVerdict::UniformPositive
    } else if n > 0 && minus == n {
        DriftVerdict::UniformNegative
    } else if n > 0 && conv == n {
        DriftVerdict::AllConverge
    } else {
        DriftVerdict::Inconclusive
    };
    let fixed_point_free = fixed.is_empty();
    Ok(DriftClass {
        points: points.to_vec(),
        tags,
        verdict,
        fixed_point_free,
        consistent: !(fixed_point_free && verdict == DriftVerdict::Mixed),
    })
}
