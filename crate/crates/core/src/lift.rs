//! The annulus, its universal cover, and annulus homeomorphisms presented by lifts.
//!
//! Points of the cover carry an unwrapped `x` (in turns) so that net
//! translation along an orbit stays observable. The fiber coordinate `y` is
//! never clamped; an orbit only fails once it leaves the chart by more than the
//! chart margin.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point of the universal cover `R x I`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftPoint<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> LiftPoint<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    /// Deck translation by `k` turns.
    pub fn translate(self, k: i64) -> Self {
        Self { x: self.x + S::from_i64(k).expect("integer shift"), y: self.y }
    }

    pub fn displacement_to(self, other: Self) -> (S, S) {
        (other.x - self.x, other.y - self.y)
    }

    pub fn dist(self, other: Self) -> S {
        let (dx, dy) = self.displacement_to(other);
        dx.hypot(dy)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A point of the annulus `(R/Z) x I`, with `theta` in turns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnulusPoint<S> {
    pub theta: S,
    pub y: S,
}

impl<S: Scalar> AnnulusPoint<S> {
    /// Builds a point, reducing `theta` into `[0, 1)`.
    pub fn new(theta: S, y: S) -> Self {
        Self { theta: wrap_unit(theta), y }
    }

    /// The lift with `x = theta`.
    pub fn lift(self) -> LiftPoint<S> {
        LiftPoint { x: self.theta, y: self.y }
    }

    /// Distance on the annulus (circle metric in `theta`).
    pub fn dist(self, other: Self) -> S {
        circle_dist(self.theta, other.theta).hypot(self.y - other.y)
    }
}

/// Reduces a lift coordinate into `[0, 1)`.
pub fn wrap_unit<S: Scalar>(x: S) -> S {
    let t = x - x.floor();
    // `-1e-20 - floor(-1e-20)` rounds to exactly 1.0
    if t >= S::one() {
        S::zero()
    } else {
        t
    }
}

/// Distance between two angles (in turns) on the circle.
pub fn circle_dist<S: Scalar>(a: S, b: S) -> S {
    let d = wrap_unit(a - b);
    d.min(S::one() - d)
}

/// Covering projection `R x I -> (R/Z) x I`.
pub fn project<S: Scalar>(p: LiftPoint<S>) -> AnnulusPoint<S> {
    AnnulusPoint { theta: wrap_unit(p.x), y: p.y }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Open,
    Closed,
}

/// Fiber chart: open `(0,1)` or closed `[0,1]`, with a margin that absorbs
/// numerical drift at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec<S> {
    pub kind: ChartKind,
    pub margin: S,
}

impl<S: Scalar> ChartSpec<S> {
    pub fn new(kind: ChartKind, margin: S) -> Result<Self> {
        if !(margin > S::zero() && margin < S::lit(0.1)) {
            return Err(Error::BadParameter(format!("chart margin {margin} outside (0, 0.1)")));
        }
        Ok(Self { kind, margin })
    }

    pub fn open() -> Self {
        Self { kind: ChartKind::Open, margin: S::lit(1e-3) }
    }

    pub fn closed() -> Self {
        Self { kind: ChartKind::Closed, margin: S::lit(1e-3) }
    }

    /// True when `y` is inside the fiber up to the margin.
    pub fn admits(&self, y: S) -> bool {
        y.is_finite() && y >= -self.margin && y <= S::one() + self.margin
    }

    /// True when `y` lies in the fiber proper.
    pub fn contains(&self, y: S) -> bool {
        match self.kind {
            ChartKind::Open => y > S::zero() && y < S::one(),
            ChartKind::Closed => y >= S::zero() && y <= S::one(),
        }
    }
}

/// How a map is evaluated, which fixes the tolerance its contracts hold to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exactness {
    ClosedForm,
    Integrated { step: f64 },
}

impl Exactness {
    /// Equivariance tolerance for this evaluation mode.
    pub fn equivariance_tol(&self) -> f64 {
        match self {
            Exactness::ClosedForm => 1e-9,
            Exactness::Integrated { .. } => 1e-6,
        }
    }

    /// Round-trip tolerance for `f^-1 (f (p)) = p`.
    pub fn inverse_tol(&self) -> f64 {
        match self {
            Exactness::ClosedForm => 1e-8,
            Exactness::Integrated { .. } => 1e-5,
        }
    }
}

/// An annulus homeomorphism presented by a lift `f~ : R x I -> R x I`.
///
/// Implementations must commute with the deck translation,
/// `f~(x + 1, y) = f~(x, y) + (1, 0)`, and be orientation preserving.
/// Partial maps (the horseshoe) report points off their domain as
/// [`Error::OutsideDomain`].
pub trait LiftMap<S: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>>;

    fn apply_inverse(&self, _p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Err(Error::MissingInverse)
    }

    fn has_inverse(&self) -> bool {
        false
    }

    fn chart(&self) -> ChartSpec<S> {
        ChartSpec::open()
    }

    fn exactness(&self) -> Exactness {
        Exactness::ClosedForm
    }
}

macro_rules! forward_lift_map {
    ($($ty:ty),*) => {$(
        impl<S: Scalar, M: LiftMap<S> + ?Sized> LiftMap<S> for $ty {
            fn name(&self) -> String { (**self).name() }
            fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> { (**self).apply(p) }
            fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> { (**self).apply_inverse(p) }
            fn has_inverse(&self) -> bool { (**self).has_inverse() }
            fn chart(&self) -> ChartSpec<S> { (**self).chart() }
            fn exactness(&self) -> Exactness { (**self).exactness() }
        }
    )*};
}

forward_lift_map!(&M, Box<M>, Arc<M>);

/// One step of the induced annulus map `f`.
pub fn annulus_step<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, a: AnnulusPoint<S>) -> Result<AnnulusPoint<S>> {
    Ok(project(m.apply(a.lift())?))
}

/// `f~^n(p)`; negative `n` uses the inverse.
pub fn iterate<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, p: LiftPoint<S>, n: i64) -> Result<LiftPoint<S>> {
    if n < 0 && !m.has_inverse() {
        return Err(Error::MissingInverse);
    }
    let chart = m.chart();
    let mut q = p;
    for step in 1..=n.unsigned_abs() as usize {
        q = if n > 0 { m.apply(q)? } else { m.apply_inverse(q)? };
        if !chart.admits(q.y) || !q.x.is_finite() {
            return Err(Error::FiberEscape { step, y: q.y.as_f64() });
        }
    }
    Ok(q)
}

/// The forward orbit `p, f~(p), ..., f~^n(p)`.
pub fn orbit<S: Scalar, M: LiftMap<S> + ?Sized>(m: &M, p: LiftPoint<S>, n: usize) -> Result<Vec<LiftPoint<S>>> {
    let chart = m.chart();
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    let mut q = p;
    for step in 1..=n {
        q = m.apply(q)?;
        if !chart.admits(q.y) || !q.x.is_finite() {
            return Err(Error::FiberEscape { step, y: q.y.as_f64() });
        }
        out.push(q);
    }
    Ok(out)
}

/// Orbit dump with columns `n,x,y`.
pub fn orbit_csv<S: Scalar>(points: &[LiftPoint<S>]) -> String {
    let mut s = String::from("n,x,y\n");
    for (n, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{n},{},{}", p.x, p.y);
    }
    s
}

/// Low-discrepancy sample of the fundamental domain `[0,1) x [0.05, 0.95]`.
pub fn domain_samples<S: Scalar>(count: usize) -> Vec<LiftPoint<S>> {
    // additive recurrences with the plastic-number constants
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (0..count)
        .map(|i| {
            let i = i as f64 + 1.0;
            let x = (0.5 + A1 * i).fract();
            let y = 0.05 + 0.9 * (0.5 + A2 * i).fract();
            LiftPoint::new(S::lit(x), S::lit(y))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub samples: usize,
    pub max_defect: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Max over samples of `|f~(x+1, y) - f~(x, y) - (1, 0)|`.
pub fn check_equivariance<S: Scalar, M: LiftMap<S> + ?Sized>(
    m: &M,
    samples: usize,
    tol: f64,
) -> Result<EquivarianceReport> {
    let samples = samples.max(1);
    let mut max_defect = 0.0f64;
    for p in domain_samples::<S>(samples) {
        let a = m.apply(p)?;
        let b = m.apply(p.translate(1))?;
        let dx = (b.x - a.x - S::one()).as_f64();
        let dy = (b.y - a.y).as_f64();
        max_defect = max_defect.max(dx.hypot(dy));
    }
    Ok(EquivarianceReport { samples, max_defect, tol, passed: max_defect < tol })
}

/// The lift `f~ + (k, 0)` of the same annulus map.
#[derive(Debug, Clone)]
pub struct TranslatedLift<M> {
    pub inner: M,
    pub k: i64,
}

impl<S: Scalar, M: LiftMap<S>> LiftMap<S> for TranslatedLift<M> {
    fn name(&self) -> String {
        format!("{}+({},0)", self.inner.name(), self.k)
    }
    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(self.inner.apply(p)?.translate(self.k))
    }
    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        self.inner.apply_inverse(p.translate(-self.k))
    }
    fn has_inverse(&self) -> bool {
        self.inner.has_inverse()
    }
    fn chart(&self) -> ChartSpec<S> {
        self.inner.chart()
    }
    fn exactness(&self) -> Exactness {
        self.inner.exactness()
    }
}

/// `g~ = T^-p o f~^q`, a lift of `f^q` whose fixed points project to periodic
/// points of rotation number `p/q`.
#[derive(Debug, Clone)]
pub struct DeckComposite<M> {
    pub inner: M,
    pub p: i64,
    pub q: u32,
}

impl<S: Scalar, M: LiftMap<S>> LiftMap<S> for DeckComposite<M> {
    fn name(&self) -> String {
        format!("T^-{} o {}^{}", self.p, self.inner.name(), self.q)
    }
    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        let mut z = p;
        for _ in 0..self.q {
            z = self.inner.apply(z)?;
        }
        Ok(z.translate(-self.p))
    }
    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        let mut z = p.translate(self.p);
        for _ in 0..self.q {
            z = self.inner.apply_inverse(z)?;
        }
        Ok(z)
    }
    fn has_inverse(&self) -> bool {
        self.inner.has_inverse()
    }
    fn chart(&self) -> ChartSpec<S> {
        self.inner.chart()
    }
    fn exactness(&self) -> Exactness {
        self.inner.exactness()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shift(f64);
    impl LiftMap<f64> for Shift {
        fn name(&self) -> String {
            "shift".into()
        }
        fn apply(&self, p: LiftPoint<f64>) -> Result<LiftPoint<f64>> {
            Ok(LiftPoint::new(p.x + self.0, p.y))
        }
    }

    struct Sink;
    impl LiftMap<f64> for Sink {
        fn name(&self) -> String {
            "sink".into()
        }
        fn apply(&self, p: LiftPoint<f64>) -> Result<LiftPoint<f64>> {
            Ok(LiftPoint::new(p.x, p.y - 0.3))
        }
    }

    #[test]
    fn project_reduces_mod_one() {
        let a = project(LiftPoint::new(2.25, 0.5));
        assert_eq!((a.theta, a.y), (0.25, 0.5));
        let b = project(LiftPoint::new(-0.75, 0.3));
        assert_eq!((b.theta, b.y), (0.25, 0.3));
        let c = project(LiftPoint::new(0.0, 0.5));
        assert_eq!((c.theta, c.y), (0.0, 0.5));
        assert_eq!(project(LiftPoint::new(-1e-20f64, 0.5)).theta, 0.0);
    }

    #[test]
    fn zero_iterate_is_identity() {
        let p = LiftPoint::new(0.3, 0.4);
        assert_eq!(iterate(&Shift(0.1), p, 0).unwrap(), p);
    }

    #[test]
    fn negative_iterate_needs_inverse() {
        let err = iterate(&Shift(0.1), LiftPoint::new(0.0, 0.5), -1).unwrap_err();
        assert_eq!(err, Error::MissingInverse);
    }

    #[test]
    fn fiber_escape_reports_step() {
        let err = iterate(&Sink, LiftPoint::new(0.0, 0.9), 5).unwrap_err();
        assert!(matches!(err, Error::FiberEscape { step: 4, .. }), "{err:?}");
    }

    #[test]
    fn chart_margin_validated() {
        assert!(ChartSpec::<f64>::new(ChartKind::Open, 0.2).is_err());
        assert!(ChartSpec::<f64>::new(ChartKind::Open, 0.0).is_err());
        let c = ChartSpec::<f64>::new(ChartKind::Closed, 0.01).unwrap();
        assert!(c.admits(-0.005) && !c.admits(-0.02));
        assert!(c.contains(0.0) && !ChartSpec::<f64>::open().contains(0.0));
    }

    #[test]
    fn translated_and_composite_lifts() {
        let t = TranslatedLift { inner: Shift(0.25), k: 2 };
        assert_eq!(t.apply(LiftPoint::new(0.0, 0.5)).unwrap().x, 2.25);
        let g = DeckComposite { inner: Shift(0.25), p: 1, q: 4 };
        assert_eq!(g.apply(LiftPoint::new(0.5, 0.5)).unwrap().x, 0.5);
    }

    #[test]
    fn orbit_csv_has_header_and_rows() {
        let pts = orbit(&Shift(0.5), LiftPoint::new(0.0, 0.5), 2).unwrap();
        assert_eq!(orbit_csv(&pts), "n,x,y\n0,0,0.5\n1,0.5,0.5\n2,1,0.5\n");
    }
}
