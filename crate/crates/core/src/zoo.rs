//! The example systems, each delivered as a [`LiftMap`].
//!
//! The closed-form members share one shape,
//! `f~(x, y) = (x + (gamma/2pi) sin(2pi x) + alpha + beta (y - 1/2), h(y))`,
//! where `h` is the tan-conjugated contraction toward the middle circle. The
//! x-component is an increasing circle homeomorphism for `|gamma| < 1`, so the
//! maps invert triangularly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::billiards::{BilliardLift, TableSpec};
use crate::error::{Error, Result};
use crate::lift::{ChartSpec, Exactness, LiftMap, LiftPoint};
use crate::scalar::Scalar;

/// Contraction of the open fiber toward `1/2`: `h(y) = phi^-1(lambda phi(y))`
/// with `phi(y) = tan(pi (y - 1/2))`.
///
/// Increasing bijection of `(0, 1)` fixing `1/2`; `h(y) > y` below the middle.
/// Points on or past the fiber boundary are left where they are.
pub fn h_lambda<S: Scalar>(lambda: S, y: S) -> S {
    if y <= S::zero() || y >= S::one() {
        return y;
    }
    let half = S::lit(0.5);
    let pi = S::PI();
    half + (lambda * (pi * (y - half)).tan()).atan() / pi
}

/// Closed-form member of the zoo (RIGID, DISS_ROT, PT, RNF).
#[derive(Debug, Clone, PartialEq)]
pub struct TwistContraction<S> {
    pub label: String,
    pub alpha: S,
    pub gamma: S,
    pub beta: S,
    pub lambda: S,
}

impl<S: Scalar> TwistContraction<S> {
    pub fn new(label: impl Into<String>, alpha: S, gamma: S, beta: S, lambda: S) -> Result<Self> {
        if !(lambda > S::zero() && lambda < S::one()) {
            return Err(Error::BadParameter(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        if gamma.abs() >= S::one() {
            return Err(Error::BadParameter(format!("|gamma| = {} must be < 1", gamma.abs())));
        }
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::BadParameter("alpha and beta must be finite".into()));
        }
        Ok(Self { label: label.into(), alpha, gamma, beta, lambda })
    }

    fn circle_part(&self, x: S) -> S {
        let two_pi = S::lit(2.0) * S::PI();
        x + self.gamma / two_pi * (two_pi * x).sin()
    }

    /// Solves `x + (gamma/2pi) sin(2pi x) = c` by Newton; the derivative is
    /// bounded below by `1 - |gamma|`.
    fn invert_circle_part(&self, c: S) -> S {
        let two_pi = S::lit(2.0) * S::PI();
        let mut x = c;
        for _ in 0..100 {
            let f = self.circle_part(x) - c;
            let df = S::one() + self.gamma * (two_pi * x).cos();
            let step = f / df;
            x = x - step;
            if step.abs() <= S::epsilon() * (S::one() + x.abs()) {
                break;
            }
        }
        x
    }
}

impl<S: Scalar> LiftMap<S> for TwistContraction<S> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        let half = S::lit(0.5);
        let x = self.circle_part(p.x) + self.alpha + self.beta * (p.y - half);
        Ok(LiftPoint::new(x, h_lambda(self.lambda, p.y)))
    }

    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        let half = S::lit(0.5);
        let y = h_lambda(S::one() / self.lambda, p.y);
        let c = p.x - self.alpha - self.beta * (y - half);
        Ok(LiftPoint::new(self.invert_circle_part(c), y))
    }

    fn has_inverse(&self) -> bool {
        true
    }
}

/// The integrable twist `TW: (x, y) -> (x + y - 1/2, y)`; area preserving and
/// unbounded.
#[derive(Debug, Clone, Copy, Default)]
pub struct Twist;

impl<S: Scalar> LiftMap<S> for Twist {
    fn name(&self) -> String {
        "TW".into()
    }
    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(LiftPoint::new(p.x + p.y - S::lit(0.5), p.y))
    }
    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(LiftPoint::new(p.x - p.y + S::lit(0.5), p.y))
    }
    fn has_inverse(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<S: Scalar> LiftMap<S> for Identity {
    fn name(&self) -> String {
        "ID".into()
    }
    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(p)
    }
    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(p)
    }
    fn has_inverse(&self) -> bool {
        true
    }
}

/// Planar vector field on the cover, 1-periodic in `x`.
pub trait VectorField<S: Scalar>: Send + Sync {
    fn name(&self) -> String;
    fn eval(&self, p: LiftPoint<S>) -> (S, S);
}

/// `V(x, y) = (sin^2(pi x) + (y - 1/2)^2, mu (1/2 - y) y (1 - y))`.
///
/// Its only zero on the open annulus is `(0, 1/2)`, a saddle-node: the time-one
/// map is bounded and has exactly one fixed point, of index zero.
#[derive(Debug, Clone, Copy)]
pub struct SaddleNodeField<S> {
    pub mu: S,
}

impl<S: Scalar> VectorField<S> for SaddleNodeField<S> {
    fn name(&self) -> String {
        "IZ".into()
    }
    fn eval(&self, p: LiftPoint<S>) -> (S, S) {
        let half = S::lit(0.5);
        let s = (S::PI() * p.x).sin();
        let u = p.y - half;
        (s * s + u * u, self.mu * (half - p.y) * p.y * (S::one() - p.y))
    }
}

/// A constant field, handy for checking the integrator.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField<S> {
    pub vx: S,
    pub vy: S,
}

impl<S: Scalar> VectorField<S> for ConstantField<S> {
    fn name(&self) -> String {
        format!("const({},{})", self.vx, self.vy)
    }
    fn eval(&self, _p: LiftPoint<S>) -> (S, S) {
        (self.vx, self.vy)
    }
}

/// Time-one map of a vector field by fixed-step classical RK4.
/// The inverse integrates backward in time with the same step.
#[derive(Debug, Clone)]
pub struct TimeOneMap<F> {
    pub field: F,
    step: f64,
    steps: usize,
}

impl<F> TimeOneMap<F> {
    pub fn step(&self) -> f64 {
        self.step
    }
}

/// Builds the time-one map of `field` integrated with step `step`
/// (rounded so that an integer number of steps covers unit time).
pub fn vector_field_time_one<S: Scalar, F: VectorField<S>>(field: F, step: f64) -> Result<TimeOneMap<F>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::BadParameter(format!("integration step {step} outside (0, 1]")));
    }
    let steps = (1.0 / step).round().max(1.0) as usize;
    Ok(TimeOneMap { field, step: 1.0 / steps as f64, steps })
}

impl<F> TimeOneMap<F> {
    fn integrate<S: Scalar>(&self, p: LiftPoint<S>, dir: S) -> LiftPoint<S>
    where
        F: VectorField<S>,
    {
        let h = dir * S::lit(self.step);
        let half = S::lit(0.5);
        let sixth = S::one() / S::lit(6.0);
        let two = S::lit(2.0);
        let mut z = p;
        for _ in 0..self.steps {
            let k1 = self.field.eval(z);
            let k2 = self.field.eval(LiftPoint::new(z.x + half * h * k1.0, z.y + half * h * k1.1));
            let k3 = self.field.eval(LiftPoint::new(z.x + half * h * k2.0, z.y + half * h * k2.1));
            let k4 = self.field.eval(LiftPoint::new(z.x + h * k3.0, z.y + h * k3.1));
            z = LiftPoint::new(
                z.x + h * sixth * (k1.0 + two * k2.0 + two * k3.0 + k4.0),
                z.y + h * sixth * (k1.1 + two * k2.1 + two * k3.1 + k4.1),
            );
        }
        z
    }
}

impl<S: Scalar, F: VectorField<S>> LiftMap<S> for TimeOneMap<F> {
    fn name(&self) -> String {
        format!("time-one({})", self.field.name())
    }
    fn apply(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(self.integrate(p, S::one()))
    }
    fn apply_inverse(&self, p: LiftPoint<S>) -> Result<LiftPoint<S>> {
        Ok(self.integrate(p, -S::one()))
    }
    fn has_inverse(&self) -> bool {
        true
    }
    fn exactness(&self) -> Exactness {
        Exactness::Integrated { step: self.step }
    }
}

/// Default RK4 step for integrated zoo members.
pub const DEFAULT_STEP: f64 = 1.0 / 64.0;

/// Parametric zoo entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MapVariant {
    Rigid { alpha: f64, lambda: f64 },
    Tw,
    DissRot { alpha: f64, lambda: f64 },
    Pt { alpha: f64, gamma: f64, beta: f64, lambda: f64 },
    Iz { mu: f64 },
    Rnf { alpha: f64, beta: f64, lambda: f64 },
    Identity,
    BilliardCircle,
    BilliardEllipse { a: f64, b: f64 },
}

impl MapVariant {
    pub fn name(&self) -> &'static str {
        match self {
            MapVariant::Rigid { .. } => "RIGID",
            MapVariant::Tw => "TW",
            MapVariant::DissRot { .. } => "DISS_ROT",
            MapVariant::Pt { .. } => "PT",
            MapVariant::Iz { .. } => "IZ",
            MapVariant::Rnf { .. } => "RNF",
            MapVariant::Identity => "ID",
            MapVariant::BilliardCircle => "billiard-circle",
            MapVariant::BilliardEllipse { .. } => "billiard-ellipse",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            MapVariant::Rigid { alpha, lambda } | MapVariant::DissRot { alpha, lambda } => {
                vec![("alpha", alpha), ("lambda", lambda)]
            }
            MapVariant::Pt { alpha, gamma, beta, lambda } => {
                vec![("alpha", alpha), ("gamma", gamma), ("beta", beta), ("lambda", lambda)]
            }
            MapVariant::Iz { mu } => vec![("mu", mu)],
            MapVariant::Rnf { alpha, beta, lambda } => vec![("alpha", alpha), ("beta", beta), ("lambda", lambda)],
            MapVariant::BilliardEllipse { a, b } => vec![("a", a), ("b", b)],
            MapVariant::Tw | MapVariant::Identity | MapVariant::BilliardCircle => vec![],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Builds a variant from its name and a (possibly partial) parameter record;
    /// missing parameters take the zoo defaults.
    pub fn from_parts(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allowed: &[&str] = match name.to_ascii_uppercase().replace('-', "_").as_str() {
            "RIGID" => &["alpha", "lambda"],
            "DISS_ROT" => &["alpha", "lambda"],
            "PT" => &["alpha", "gamma", "beta", "lambda"],
            "IZ" => &["mu"],
            "RNF" => &["alpha", "beta", "lambda"],
            "BILLIARD_ELLIPSE" => &["a", "b"],
            "TW" | "ID" | "IDENTITY" | "BILLIARD_CIRCLE" => &[],
            other => return Err(Error::BadParameter(format!("unknown map variant `{other}`"))),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::BadParameter(format!("variant {name} has no parameter `{bad}`")));
        }
        let v = match name.to_ascii_uppercase().replace('-', "_").as_str() {
            "RIGID" => MapVariant::Rigid { alpha: get("alpha", 0.25), lambda: get("lambda", 0.5) },
            "DISS_ROT" => MapVariant::DissRot { alpha: get("alpha", 0.318), lambda: get("lambda", 0.9) },
            "PT" => MapVariant::Pt {
                alpha: get("alpha", 0.0),
                gamma: get("gamma", 0.1),
                beta: get("beta", 0.0),
                lambda: get("lambda", 0.5),
            },
            "IZ" => MapVariant::Iz { mu: get("mu", 1.0) },
            "RNF" => MapVariant::Rnf { alpha: get("alpha", 0.05), beta: get("beta", 6.0), lambda: get("lambda", 0.9) },
            "BILLIARD_ELLIPSE" => MapVariant::BilliardEllipse { a: get("a", 2.0), b: get("b", 1.0) },
            "TW" => MapVariant::Tw,
            "BILLIARD_CIRCLE" => MapVariant::BilliardCircle,
            _ => MapVariant::Identity,
        };
        Ok(v)
    }
}

/// Serialized map record `{name, params, chart}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub chart: ChartSpec<f64>,
}

impl MapSpec {
    pub fn variant(&self) -> Result<MapVariant> {
        MapVariant::from_parts(&self.name, &self.params)
    }
}

impl From<MapVariant> for MapSpec {
    fn from(v: MapVariant) -> Self {
        MapSpec { name: v.name().to_string(), params: v.params(), chart: ChartSpec::open() }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        let mut sep = ':';
        for (k, v) in &self.params {
            write!(f, "{sep}{k}={v}")?;
            sep = ',';
        }
        Ok(())
    }
}

/// Parses `NAME[:key=value,...]` or `variant=NAME,key=value,...`.
impl FromStr for MapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = if let Some(body) = s.strip_prefix("variant=") {
            match body.split_once(',') {
                Some((n, r)) => (n, r),
                None => (body, ""),
            }
        } else {
            match s.split_once(':') {
                Some((n, r)) => (n, r),
                None => (s, ""),
            }
        };
        let mut params = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::BadParameter(format!("expected key=value, got `{pair}`")))?;
            let v: f64 = parse_number(v.trim())?;
            params.insert(k.trim().to_string(), v);
        }
        let variant = MapVariant::from_parts(name.trim(), &params)?;
        Ok(variant.into())
    }
}

/// Accepts plain decimals and simple fractions such as `1/3`.
fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::BadParameter(format!("not a number: `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| bad())?;
        let d: f64 = d.trim().parse().map_err(|_| bad())?;
        return Ok(n / d);
    }
    s.parse().map_err(|_| bad())
}

fn convert<S: Scalar>(v: f64) -> S {
    S::lit(v)
}

/// Builds a zoo member at any scalar precision. Billiard variants are
/// `f64`-only; use [`make_map_f64`].
pub fn make_map<S: Scalar>(variant: &MapVariant) -> Result<Box<dyn LiftMap<S>>> {
    let c = convert::<S>;
    Ok(match *variant {
        MapVariant::Rigid { alpha, lambda } => {
            Box::new(TwistContraction::new("RIGID", c(alpha), S::zero(), S::zero(), c(lambda))?)
        }
        MapVariant::DissRot { alpha, lambda } => {
            Box::new(TwistContraction::new("DISS_ROT", c(alpha), S::zero(), S::zero(), c(lambda))?)
        }
        MapVariant::Pt { alpha, gamma, beta, lambda } => {
            Box::new(TwistContraction::new("PT", c(alpha), c(gamma), c(beta), c(lambda))?)
        }
        MapVariant::Rnf { alpha, beta, lambda } => {
            Box::new(TwistContraction::new("RNF", c(alpha), S::zero(), c(beta), c(lambda))?)
        }
        MapVariant::Tw => Box::new(Twist),
        MapVariant::Identity => Box::new(Identity),
        MapVariant::Iz { mu } => {
            if !(mu > 0.0) {
                return Err(Error::BadParameter(format!("mu = {mu} must be positive")));
            }
            Box::new(vector_field_time_one(SaddleNodeField { mu: c(mu) }, DEFAULT_STEP)?)
        }
        MapVariant::BilliardCircle | MapVariant::BilliardEllipse { .. } => {
            return Err(Error::BadParameter("billiard maps are only available in f64".into()))
        }
    })
}

/// Builds any catalogued map, billiards included, in `f64`.
pub fn make_map_f64(variant: &MapVariant) -> Result<Box<dyn LiftMap<f64>>> {
    match *variant {
        MapVariant::BilliardCircle => Ok(Box::new(BilliardLift::new(TableSpec::circle(1.0)?))),
        MapVariant::BilliardEllipse { a, b } => Ok(Box::new(BilliardLift::new(TableSpec::ellipse(a, b)?))),
        _ => make_map::<f64>(variant),
    }
}

/// Shorthand used throughout the tests and the CLI.
pub fn build(spec: &MapSpec) -> Result<Box<dyn LiftMap<f64>>> {
    make_map_f64(&spec.variant()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{check_equivariance, iterate};

    fn pt() -> Box<dyn LiftMap<f64>> {
        make_map(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap()
    }

    #[test]
    fn h_lambda_shape_on_grid() {
        for lambda in [0.1, 0.5, 0.9] {
            assert_eq!(h_lambda(lambda, 0.5), 0.5);
            let mut prev = 0.0;
            for i in 1..1000 {
                let y = i as f64 / 1000.0;
                let h = h_lambda(lambda, y);
                assert!(h > prev, "increasing");
                assert!(h > 0.0 && h < 1.0);
                if y < 0.5 {
                    assert!(h > y);
                } else if y > 0.5 {
                    assert!(h < y);
                }
                let back = h_lambda(1.0 / lambda, h);
                assert!((back - y).abs() < 1e-12, "inverse at {y}: {back}");
                prev = h;
            }
        }
    }

    #[test]
    fn rigid_quarter_turn() {
        let m = make_map::<f64>(&MapVariant::Rigid { alpha: 0.25, lambda: 0.5 }).unwrap();
        let p = iterate(&m, LiftPoint::new(0.0, 0.5), 4).unwrap();
        assert_eq!(p, LiftPoint::new(1.0, 0.5));
        assert_eq!(check_equivariance(&m, 100, 1e-9).unwrap().max_defect, 0.0);
    }

    #[test]
    fn twist_affine_composition() {
        let p = iterate(&Twist, LiftPoint::new(0.0, 0.75), 2).unwrap();
        assert_eq!(p, LiftPoint::new(0.5, 0.75));
    }

    #[test]
    fn pt_fixed_points_are_where_sine_vanishes() {
        let m = pt();
        for x in [0.0, 0.5] {
            let z = LiftPoint::new(x, 0.5);
            assert!(m.apply(z).unwrap().dist(z) < 1e-15);
        }
        assert!(check_equivariance(&m, 100, 1e-9).unwrap().passed);
    }

    #[test]
    fn pt_inverse_round_trip() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.2, gamma: 0.9, beta: 1.5, lambda: 0.3 }).unwrap();
        for p in crate::lift::domain_samples::<f64>(200) {
            let back = m.apply_inverse(m.apply(p).unwrap()).unwrap();
            assert!(back.dist(p) < 1e-8, "{p:?} -> {back:?}");
        }
    }

    #[test]
    fn iz_integrated_contracts() {
        let m = make_map::<f64>(&MapVariant::Iz { mu: 1.0 }).unwrap();
        assert!(matches!(m.exactness(), Exactness::Integrated { .. }));
        let r = check_equivariance(&m, 100, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
        let z = LiftPoint::new(0.0, 0.5);
        assert!(m.apply(z).unwrap().dist(z) < 1e-15);
        for p in crate::lift::domain_samples::<f64>(50) {
            let back = m.apply_inverse(m.apply(p).unwrap()).unwrap();
            assert!(back.dist(p) < 1e-5);
        }
    }

    #[test]
    fn zero_and_constant_fields() {
        let zero = vector_field_time_one(ConstantField { vx: 0.0, vy: 0.0 }, DEFAULT_STEP).unwrap();
        let p = LiftPoint::new(0.3, 0.7);
        assert_eq!(zero.apply(p).unwrap(), p);
        let unit = vector_field_time_one(ConstantField { vx: 1.0, vy: 0.0 }, DEFAULT_STEP).unwrap();
        let q: LiftPoint<f64> = unit.apply(p).unwrap();
        assert!((q.x - 1.3).abs() < 1e-12 && q.y == 0.7);
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(make_map::<f64>(&MapVariant::DissRot { alpha: 0.3, lambda: 1.0 }).is_err());
        assert!(make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 1.0, beta: 0.0, lambda: 0.5 }).is_err());
        assert!(make_map::<f64>(&MapVariant::Iz { mu: 0.0 }).is_err());
        assert!("PT:omega=1".parse::<MapSpec>().is_err());
        assert!("NOPE".parse::<MapSpec>().is_err());
    }

    #[test]
    fn spec_string_forms() {
        let a: MapSpec = "RIGID:alpha=0.25".parse().unwrap();
        assert_eq!(a.variant().unwrap(), MapVariant::Rigid { alpha: 0.25, lambda: 0.5 });
        let b: MapSpec = "variant=DISS_ROT,alpha=1/3,lambda=0.9".parse().unwrap();
        assert_eq!(b.variant().unwrap(), MapVariant::DissRot { alpha: 1.0 / 3.0, lambda: 0.9 });
        let c: MapSpec = a.to_string().parse().unwrap();
        assert_eq!(a, c);
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.starts_with("{\"name\":\"DISS_ROT\",\"params\":"));
        assert_eq!(serde_json::from_str::<MapSpec>(&json).unwrap(), b);
    }

    #[test]
    fn single_precision_members() {
        let m = make_map::<f32>(&MapVariant::Rigid { alpha: 0.25, lambda: 0.5 }).unwrap();
        let p = iterate(&m, LiftPoint::new(0.0f32, 0.5), 4).unwrap();
        assert_eq!(p.x, 1.0f32);
        assert!(check_equivariance(&m, 50, f32::closed_form_tol() as f64).unwrap().passed);
    }
}
