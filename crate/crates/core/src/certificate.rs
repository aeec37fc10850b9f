//! Self-contained JSON certificates and their replay.
//!
//! A certificate names its map, carries a few probe evaluations of that map
//! and the witness data of one finding. Re-verification rebuilds the map,
//! compares the probes and replays the witness checks without searching.

use serde::{Deserialize, Serialize};

use crate::billiards::{billiard_step, verify_avoidance, AvoidanceCertificate, BilliardState, TableSpec};
use crate::boxdyn::{verify_chain, verify_window, Band, DiskChain, GraphParams, ReturningWitness, WindowReport};
use crate::boxdyn::{verify_witness, DEFAULT_KMAX};
use crate::error::{Error, Result};
use crate::fixedpoint::{
    displacement, drift_classification, fixed_point_index, lefschetz_sum, DegenerateComponent, DriftClass,
    DriftThresholds, FixedPointRecord, PeriodicOrbitRecord,
};
use crate::horseshoe::{exhaustive_returns, make_horseshoe, HorseshoeReport, HorseshoeSpec};
use crate::lift::{iterate, LiftMap, LiftPoint};
use crate::rotation::rotation_estimate;
use crate::zoo::{build, MapSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MapSource {
    Zoo { spec: String },
    Horseshoe { spec: HorseshoeSpec },
    Table { table: TableSpec },
}

impl MapSource {
    pub fn zoo(spec: &MapSpec) -> Self {
        MapSource::Zoo { spec: spec.to_string() }
    }

    fn lift(&self) -> Result<Box<dyn LiftMap<f64>>> {
        match self {
            MapSource::Zoo { spec } => build(&spec.parse()?),
            MapSource::Horseshoe { spec } => Ok(Box::new(make_horseshoe(spec.clone())?)),
            MapSource::Table { .. } => Err(Error::Schema("billiard tables have no lift in certificates".into())),
        }
    }

    /// Evaluations used to detect a certificate whose map was edited.
    fn probe(&self) -> Result<Vec<Probe>> {
        match self {
            MapSource::Table { table } => [(0.1, 0.4), (0.35, 1.2), (0.8, 2.5)]
                .into_iter()
                .map(|(s, th)| {
                    let st = BilliardState::new(s, th)?;
                    let img = billiard_step(table, st)?;
                    Ok(Probe { point: LiftPoint::new(st.s, st.theta), image: LiftPoint::new(img.s, img.theta) })
                })
                .collect(),
            _ => {
                let m = self.lift()?;
                let points: Vec<LiftPoint<f64>> = match self {
                    MapSource::Horseshoe { spec } => (0..3).map(|j| spec.strip(j).center()).collect(),
                    _ => [(0.1, 0.3), (0.45, 0.5), (0.8, 0.62)].map(|(x, y)| LiftPoint::new(x, y)).to_vec(),
                };
                Ok(points
                    .into_iter()
                    .filter_map(|p| m.apply(p).ok().map(|image| Probe { point: p, image }))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub point: LiftPoint<f64>,
    pub image: LiftPoint<f64>,
}

/// Chain-recurrent boxes computed alongside a returning search, summarized by
/// their vertical hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceNote {
    pub depth: u32,
    pub band: Band,
    pub boxes: usize,
    pub y_extent: [f64; 2],
    /// Per witness: its disk lies entirely above or below the hull.
    pub witness_disjoint: Vec<bool>,
}

impl RecurrenceNote {
    pub fn new(depth: u32, band: Band, boxes: usize, y_extent: [f64; 2], witnesses: &[ReturningWitness]) -> Self {
        let witness_disjoint = witnesses.iter().map(|w| misses(&w.disk, y_extent)).collect();
        Self { depth, band, boxes, y_extent, witness_disjoint }
    }
}

fn misses(disk: &crate::boxdyn::Rect, y: [f64; 2]) -> bool {
    disk.y1 <= y[0] || disk.y0 >= y[1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturningPayload {
    pub witnesses: Vec<ReturningWitness>,
    pub recurrence: Option<RecurrenceNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPayload {
    pub region: crate::boxdyn::Rect,
    pub tol: f64,
    pub depth: u32,
    pub records: Vec<FixedPointRecord<f64>>,
    pub degenerate: Vec<DegenerateComponent<f64>>,
    #[serde(with = "crate::serde_float")]
    pub min_displacement: f64,
    pub lefschetz: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPayload {
    pub p: i64,
    pub q: u32,
    pub tol: f64,
    pub records: Vec<PeriodicOrbitRecord<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPayload {
    pub thresholds: DriftThresholds,
    pub fixed: Vec<LiftPoint<f64>>,
    pub class: DriftClass<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Payload {
    Window(WindowReport),
    Attractor(WindowReport),
    Returning(ReturningPayload),
    Chain(DiskChain),
    Fixed(FixedPayload),
    Periodic(PeriodicPayload),
    Drift(DriftPayload),
    Billiard(AvoidanceCertificate),
    Horseshoe(HorseshoeReport),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Window(_) => "window",
            Payload::Attractor(_) => "attractor",
            Payload::Returning(_) => "returning",
            Payload::Chain(_) => "chain",
            Payload::Fixed(_) => "fixed",
            Payload::Periodic(_) => "periodic",
            Payload::Drift(_) => "drift",
            Payload::Billiard(_) => "billiard",
            Payload::Horseshoe(_) => "horseshoe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub map: MapSource,
    pub probe: Vec<Probe>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Certificate {
    pub fn new(map: MapSource, payload: Payload) -> Result<Self> {
        let probe = map.probe()?;
        Ok(Self { version: FORMAT_VERSION, map, probe, payload })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Certificate = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        if c.version != FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported certificate version {}", c.version)));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverifyReport {
    pub kind: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Replays the checks recorded in `c`. Malformed data is an error; failed
/// checks are reported.
pub fn reverify(c: &Certificate) -> Result<ReverifyReport> {
    let mut failures = Vec::new();
    let fresh = c.map.probe()?;
    if fresh.len() != c.probe.len() {
        failures.push(format!("map mismatch: {} probes recorded, {} computed", c.probe.len(), fresh.len()));
    }
    for (i, (a, b)) in c.probe.iter().zip(&fresh).enumerate() {
        if a.point != b.point || a.image.dist(b.image) > 1e-9 {
            failures.push(format!(
                "map mismatch at probe {i}: recorded image ({}, {}), computed ({}, {})",
                a.image.x, a.image.y, b.image.x, b.image.y
            ));
        }
    }
    if failures.is_empty() {
        replay(c, &mut failures)?;
    }
    Ok(ReverifyReport { kind: c.payload.kind().into(), passed: failures.is_empty(), failures })
}

fn replay(c: &Certificate, failures: &mut Vec<String>) -> Result<()> {
    let mut fail = |msg: String| failures.push(msg);
    match &c.payload {
        Payload::Window(r) | Payload::Attractor(r) => {
            let m = c.map.lift()?;
            let params = GraphParams { inflation: r.inflation, samples_per_side: r.samples_per_side, kmax: DEFAULT_KMAX };
            let again = verify_window(&m, &r.boxes, &params)?;
            if !again.verified {
                fail(format!("window no longer verifies: margin {}", again.margin));
            }
            if (again.margin - r.margin).abs() > 1e-9 {
                fail(format!("margin {} differs from recorded {}", again.margin, r.margin));
            }
            if (again.connected, again.separates) != (r.connected, r.separates) {
                fail("connectivity or separation differs from the record".into());
            }
            if !r.verified {
                fail("recorded report is not verified".into());
            }
        }
        Payload::Returning(p) => {
            let m = c.map.lift()?;
            if p.witnesses.is_empty() {
                fail("no witnesses".into());
            }
            for (i, w) in p.witnesses.iter().enumerate() {
                let check = verify_witness(&m, w);
                if !check.passed {
                    fail(format!("witness {i}: {}", check.failures.join("; ")));
                }
            }
            if let Some(note) = &p.recurrence {
                let expected: Vec<bool> = p.witnesses.iter().map(|w| misses(&w.disk, note.y_extent)).collect();
                if expected != note.witness_disjoint {
                    fail("recorded disjointness from the chain-recurrent boxes does not hold".into());
                }
            }
        }
        Payload::Chain(chain) => {
            let m = c.map.lift()?;
            if let Err(e) = verify_chain(&m, chain) {
                fail(e.to_string());
            }
        }
        Payload::Fixed(p) => {
            let m = c.map.lift()?;
            for (i, r) in p.records.iter().enumerate() {
                let d = displacement(&m, r.point)?;
                let res = d.0.hypot(d.1);
                if !(res < p.tol) {
                    fail(format!("record {i}: residual {res:e} exceeds {:e}", p.tol));
                    continue;
                }
                if !r.cell.contains_strictly(r.point) {
                    fail(format!("record {i}: point is not inside its cell"));
                }
                match fixed_point_index(&m, &r.cell) {
                    Ok(ix) if ix == r.index => {}
                    Ok(ix) => fail(format!("record {i}: index {ix}, recorded {}", r.index)),
                    Err(e) => fail(format!("record {i}: {e}")),
                }
            }
            for (i, comp) in p.degenerate.iter().enumerate() {
                for z in &comp.points {
                    let d = displacement(&m, *z)?;
                    if !(d.0.hypot(d.1) < p.tol) {
                        fail(format!("curve {i}: point ({}, {}) is not fixed", z.x, z.y));
                    }
                }
            }
            if let Some(sum) = p.lefschetz {
                match lefschetz_sum(&p.records) {
                    Ok(s) if s == sum => {}
                    Ok(s) => fail(format!("index sum {s}, recorded {sum}")),
                    Err(e) => fail(e.to_string()),
                }
            }
        }
        Payload::Periodic(p) => {
            let m = c.map.lift()?;
            let rot = p.p as f64 / p.q as f64;
            for (i, r) in p.records.iter().enumerate() {
                if (r.p, r.q) != (p.p, p.q) {
                    fail(format!("record {i}: rotation {}/{} differs from {}/{}", r.p, r.q, p.p, p.q));
                }
                let img = iterate(&m, r.point, p.q as i64)?;
                if img.dist(r.image) > m.exactness().equivariance_tol() {
                    fail(format!("record {i}: recomputed image differs from the record"));
                    continue;
                }
                let res = img.translate(-p.p).dist(r.point);
                if !(res < p.tol) {
                    fail(format!("record {i}: residual {res:e} exceeds {:e}", p.tol));
                    continue;
                }
                if !rotation_estimate(&m, r.point, 400)?.brackets(rot, 1e-6) {
                    fail(format!("record {i}: rotation estimate misses {rot}"));
                }
            }
        }
        Payload::Drift(p) => {
            let m = c.map.lift()?;
            let again = drift_classification(&m, &p.class.points, &p.fixed, &p.thresholds)?;
            if again.tags != p.class.tags || again.verdict != p.class.verdict {
                fail("recomputed drift tags differ from the record".into());
            }
        }
        Payload::Billiard(cert) => {
            if let MapSource::Table { table } = &c.map {
                if table != &cert.table {
                    fail("certificate table differs from the map source".into());
                }
            }
            if !verify_avoidance(cert)? {
                fail("replayed trajectory does not reproduce the clearances".into());
            }
        }
        Payload::Horseshoe(r) => {
            let MapSource::Horseshoe { spec } = &c.map else {
                return Err(Error::Schema("horseshoe certificate needs a horseshoe map".into()));
            };
            let hs = make_horseshoe(spec.clone())?;
            let named = [("negative", &r.negative, (1, -1)), ("positive", &r.positive, (5, 1))];
            for (name, w, nk) in named {
                let check = verify_witness(&hs, w);
                if !check.passed {
                    fail(format!("{name} witness: {}", check.failures.join("; ")));
                }
                if (w.n, w.k) != nk || w.disk != r.disk {
                    fail(format!("{name} witness is not the claimed return"));
                }
            }
            let small = &r.small_disk.witness;
            let check = verify_witness(&hs, small);
            if !check.passed || small.k != 1 || small.n != 4 * r.small_disk.n_param - 1 {
                fail(format!("small disk witness: {}", check.failures.join("; ")));
            }
            for b in &r.below_five {
                if exhaustive_returns(&hs, &r.disk, b.n) != *b || b.max_k.is_some_and(|k| k > 0) {
                    fail(format!("enumeration for n = {} differs from the record", b.n));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horseshoe::verify_example_claims;

    #[test]
    fn horseshoe_roundtrip_and_tamper() {
        let spec = HorseshoeSpec::default();
        let hs = make_horseshoe(spec.clone()).unwrap();
        let report = verify_example_claims(&hs).unwrap();
        let cert = Certificate::new(MapSource::Horseshoe { spec }, Payload::Horseshoe(report)).unwrap();
        let json = cert.to_json().unwrap();
        assert_eq!(json, Certificate::from_json(&json).unwrap().to_json().unwrap());
        assert!(reverify(&Certificate::from_json(&json).unwrap()).unwrap().passed);
        let mut bad = cert.clone();
        if let Payload::Horseshoe(r) = &mut bad.payload {
            r.positive.point.y += 0.05;
        }
        assert!(!reverify(&bad).unwrap().passed);
    }

    #[test]
    fn wrong_map_reported() {
        let spec: MapSpec = "DISS_ROT:alpha=0.3,lambda=0.9".parse().unwrap();
        let w = ReturningWitness {
            disk: crate::boxdyn::Rect { x0: 0.1, x1: 0.2, y0: 0.45, y1: 0.55 },
            n: 10,
            k: 3,
            point: LiftPoint::new(0.15, 0.5),
            image: LiftPoint::new(3.15, 0.5),
            sign: crate::boxdyn::Sign::Positive,
        };
        let payload = Payload::Returning(ReturningPayload { witnesses: vec![w], recurrence: None });
        let mut cert = Certificate::new(MapSource::zoo(&spec), payload).unwrap();
        assert!(reverify(&cert).unwrap().passed);
        cert.map = MapSource::Zoo { spec: "DISS_ROT:alpha=0.31,lambda=0.9".into() };
        let r = reverify(&cert).unwrap();
        assert!(!r.passed && r.failures[0].starts_with("map mismatch"));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Certificate::from_json("{}"), Err(Error::Schema(_))));
        assert!(matches!(Certificate::from_json("not json"), Err(Error::Schema(_))));
    }
}
