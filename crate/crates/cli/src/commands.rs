use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;

use annulab::billiards::{
    billiard_step, bumper_avoidance_search, AvoidanceOutcome, BilliardState, BumperSet, Disk, TableSpec,
};
use annulab::boxdyn::{
    assemble_periodic_chain, attractor_boxes, build_box_graph, chain_recurrent_boxes, construct_invariant_annulus,
    find_returning_disk, grow_window, seed_box, verify_chain, verify_window, Band, BoxGraph, BoxSet, GraphParams,
    Grid, GrowOutcome, ReturningOutcome, ReturningWitness, Sign, DEFAULT_HORIZON,
};
use annulab::certificate::{
    reverify, Certificate, DriftPayload, FixedPayload, MapSource, Payload, PeriodicPayload, RecurrenceNote,
    ReturningPayload,
};
use annulab::fixedpoint::{
    drift_classification, find_fixed_points, find_periodic_orbit, fundamental_region, lefschetz_sum, sample_grid,
    DriftTag, DriftThresholds, DriftVerdict,
};
use annulab::horseshoe::{
    cylinder_box, make_horseshoe, shift_conjugacy_check, verify_example_claims, HorseshoeSpec, ItineraryWord,
};
use annulab::rotation::{rotation_csv, rotation_estimate};
use annulab::{build, DynMap, Error, MapSpec, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{Cli, Command, Common};
use crate::output::{boxes_csv, witnesses_csv, Output};

#[derive(Debug)]
pub enum Failure {
    /// An honest negative finding at the requested scale.
    NotFound(String),
    Error(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotFoundAtResolution => Failure::NotFound(e.to_string()),
            other => Failure::Error(other.to_string()),
        }
    }
}

type Run = Result<(), Failure>;

const DEFAULT_TOL: f64 = 1e-10;

#[derive(Serialize)]
struct RunConfig<'a> {
    version: &'static str,
    #[serde(flatten)]
    cli: &'a Cli,
}

pub fn run(cli: &Cli) -> Run {
    let c = &cli.common;
    let out = Output::new(&c.out, cli.command.name())?;
    if !matches!(cli.command, Command::Reverify { .. }) {
        out.config(&RunConfig { version: env!("CARGO_PKG_VERSION"), cli })?;
    }
    match &cli.command {
        Command::Rotation { point, steps } => rotation(c, &out, *point, *steps),
        Command::Window { band, window, grow, start, annulus, iters } => {
            window_cmd(c, &out, *band, *window, *grow, *start, *annulus, *iters)
        }
        Command::Attractor { band, window, iters } => attractor(c, &out, *band, *window, *iters),
        Command::Recurrence { band } => recurrence(c, &out, *band),
        Command::Returning { band, sign, recurrence, recurrence_band } => {
            returning(c, &out, *band, sign, *recurrence, *recurrence_band)
        }
        Command::Fixed { band } => fixed(c, &out, *band),
        Command::Periodic { p, q, band } => periodic(c, &out, *p, *q, *band),
        Command::Drift { band, nx, ny, samples } => drift(c, &out, *band, *nx, *ny, *samples),
        Command::Billiard { table, theta0, s0, steps, bumpers, bumper } => {
            billiard(c, &out, table, *theta0, *s0, *steps, bumpers.as_deref(), bumper)
        }
        Command::Horseshoe { verify, depth, word } => horseshoe(&out, *verify, *depth, word.as_deref()),
        Command::Reverify { file } => reverify_cmd(file),
    }
}

fn map(c: &Common, command: &str) -> Result<(MapSpec, DynMap), Failure> {
    let text = c.map.as_deref().ok_or_else(|| Failure::Error(format!("{command} needs --map")))?;
    let spec: MapSpec = text.parse()?;
    let m = build(&spec)?;
    Ok((spec, m))
}

fn band((lo, hi): (f64, f64)) -> Result<Band, Failure> {
    Ok(Band::new(lo, hi)?)
}

fn point((x, y): (f64, f64)) -> Point {
    Point::new(x, y)
}

fn certificate(out: &Output, map: MapSource, payload: Payload) -> Run {
    let c = Certificate::new(map, payload)?;
    out.certificate("", &c)
}

fn rotation(c: &Common, out: &Output, p: (f64, f64), steps: Option<usize>) -> Run {
    let (spec, m) = map(c, "rotation")?;
    let n = steps.or(c.horizon).unwrap_or(1000);
    let est = rotation_estimate(&m, point(p), n)?;
    out.csv("", &rotation_csv(&m, point(p), n)?)?;
    out.json("-estimate", &est)?;
    println!(
        "{spec}: rotation {:.12} over {n} steps, tail range [{:.12}, {:.12}]{}",
        est.mean,
        est.liminf_est,
        est.limsup_est,
        if est.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn window_cmd(
    c: &Common,
    out: &Output,
    region: (f64, f64),
    window: (f64, f64),
    grow: bool,
    start: (f64, f64),
    annulus: bool,
    iters: usize,
) -> Run {
    let (spec, m) = map(c, "window")?;
    let d = c.resolution.unwrap_or(6);
    let grid = Grid::new(d, band(region)?)?;
    let params = GraphParams::defaults(&grid);
    let source = MapSource::zoo(&spec);
    let report = if grow {
        let seed = seed_box(d, grid.region, point(start))?;
        let outcome = grow_window(&m, &seed, &params, iters)?;
        match outcome {
            GrowOutcome::Window { rounds, report } => {
                println!("window after {rounds} rounds: {} boxes, margin {:.3e}", report.boxes.len(), report.margin);
                report
            }
            other => {
                out.json("-report", &other)?;
                return Err(Failure::NotFound(match other {
                    GrowOutcome::UnboundedAtScale { rounds, boxes, .. } => {
                        format!("unbounded at scale 2^-{d}: {boxes} boxes after {rounds} rounds")
                    }
                    _ => "growth stabilized but the set is not forward invariant".into(),
                }));
            }
        }
    } else {
        let report = verify_window(&m, &BoxSet::band(&grid, window.0, window.1)?, &params)?;
        if !report.verified {
            out.json("-report", &report)?;
            return Err(Failure::NotFound(format!("band is not a window (margin {:.3e})", report.margin)));
        }
        println!("band window verified: margin {:.3e}", report.margin);
        report
    };
    out.csv("", &boxes_csv(&report.boxes))?;
    certificate(out, source, Payload::Window(report))?;
    if annulus {
        let seed = seed_box(d, grid.region, point(start))?;
        let a = construct_invariant_annulus(&m, &seed, &params, iters)?;
        println!("invariant annulus over [{:.4}, {:.4}]", a.y_extent.0, a.y_extent.1);
        out.json("-annulus", &a)?;
    }
    Ok(())
}

fn attractor(c: &Common, out: &Output, region: (f64, f64), window: (f64, f64), iters: usize) -> Run {
    let (spec, m) = map(c, "attractor")?;
    let grid = Grid::new(c.resolution.unwrap_or(8), band(region)?)?;
    let w = BoxSet::band(&grid, window.0, window.1)?;
    let a = match attractor_boxes(&m, &w, &GraphParams::defaults(&grid), iters) {
        Err(Error::PreconditionFailed(msg)) => return Err(Failure::NotFound(msg)),
        other => other?,
    };
    let extent = a.boxes.y_extent().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "{} boxes in y [{:.4}, {:.4}]; {} component(s); separates boundaries: {}",
        a.boxes.len(),
        extent.0,
        extent.1,
        a.components,
        a.separates
    );
    out.csv("", &boxes_csv(&a.boxes))?;
    certificate(out, MapSource::zoo(&spec), Payload::Attractor(a))
}

fn graph(m: &DynMap, d: u32, region: Band) -> Result<BoxGraph, Failure> {
    let grid = Grid::new(d, region)?;
    Ok(build_box_graph(m, grid, GraphParams::defaults(&grid))?)
}

fn recurrence(c: &Common, out: &Output, region: (f64, f64)) -> Run {
    let (_, m) = map(c, "recurrence")?;
    let cr = chain_recurrent_boxes(&graph(&m, c.resolution.unwrap_or(7), band(region)?)?);
    out.csv("", &boxes_csv(&cr))?;
    out.json("-boxes", &cr)?;
    match cr.y_extent() {
        Some((lo, hi)) => {
            println!("{} chain-recurrent boxes in y [{lo:.4}, {hi:.4}]", cr.len());
            Ok(())
        }
        None => Err(Failure::NotFound("no chain-recurrent boxes in the region".into())),
    }
}

fn returning(
    c: &Common,
    out: &Output,
    region: (f64, f64),
    sign: &str,
    recurrence: Option<u32>,
    recurrence_band: Option<(f64, f64)>,
) -> Run {
    let (spec, m) = map(c, "returning")?;
    let signs = match sign {
        "both" => vec![Sign::Positive, Sign::Negative],
        s => vec![s.parse::<Sign>()?],
    };
    let horizon = c.horizon.unwrap_or(DEFAULT_HORIZON);
    let g = graph(&m, c.resolution.unwrap_or(6), band(region)?)?;
    let mut witnesses: Vec<ReturningWitness> = Vec::new();
    let mut missing = Vec::new();
    for s in signs {
        match find_returning_disk(&m, &g, s, horizon)? {
            ReturningOutcome::Found { witness } => {
                let d = witness.disk;
                println!(
                    "{s:?} witness: n = {}, k = {} on [{:.4}, {:.4}] x [{:.4}, {:.4}]",
                    witness.n, witness.k, d.x0, d.x1, d.y0, d.y1
                );
                witnesses.push(witness);
            }
            ReturningOutcome::NotFound { candidates, .. } => {
                missing.push(format!("no {s:?} witness within {horizon} steps ({candidates} candidate boxes)"));
            }
        }
    }
    let note = match recurrence {
        Some(depth) => {
            let rb = band(recurrence_band.unwrap_or(region))?;
            let cr = chain_recurrent_boxes(&graph(&m, depth, rb)?);
            let extent = cr.y_extent().unwrap_or((f64::NAN, f64::NAN));
            let note = RecurrenceNote::new(depth, rb, cr.len(), [extent.0, extent.1], &witnesses);
            println!(
                "chain-recurrent boxes in y [{:.4}, {:.4}]; witness disks disjoint: {:?}",
                extent.0, extent.1, note.witness_disjoint
            );
            Some(note)
        }
        None => None,
    };
    if !witnesses.is_empty() {
        let rows: Vec<_> = witnesses.iter().map(|w| ("witness", w)).collect();
        out.csv("", &witnesses_csv(&rows))?;
        certificate(
            out,
            MapSource::zoo(&spec),
            Payload::Returning(ReturningPayload { witnesses: witnesses.clone(), recurrence: note }),
        )?;
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotFound(missing.join("; ")))
    }
}

fn fixed(c: &Common, out: &Output, region: (f64, f64)) -> Run {
    let (spec, m) = map(c, "fixed")?;
    let region = fundamental_region(region.0, region.1)?;
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let depth = c.resolution.unwrap_or(7);
    let s = find_fixed_points(&m, region, tol, depth)?;
    let mut csv = String::from("x,y,index,residual\n");
    for r in &s.records {
        let _ = writeln!(csv, "{},{},{},{}", r.point.x, r.point.y, r.index, r.residual);
        println!("fixed point ({:.10}, {:.10}) index {:+} residual {:.1e}", r.point.x, r.point.y, r.index, r.residual);
    }
    for comp in &s.degenerate {
        println!("curve of fixed points: {} cells, {} converged points", comp.cells.len(), comp.points.len());
    }
    let lefschetz = lefschetz_sum(&s.records).ok();
    if let Some(l) = lefschetz {
        println!("index sum {l}");
    }
    println!("minimum displacement {:.3e}", s.min_displacement);
    out.csv("", &csv)?;
    let empty = s.is_empty();
    certificate(
        out,
        MapSource::zoo(&spec),
        Payload::Fixed(FixedPayload {
            region,
            tol,
            depth,
            records: s.records,
            degenerate: s.degenerate,
            min_displacement: s.min_displacement,
            lefschetz,
        }),
    )?;
    if empty {
        return Err(Failure::NotFound(format!("no fixed point at resolution 2^-{depth}")));
    }
    Ok(())
}

fn periodic(c: &Common, out: &Output, p: i64, q: u32, region: (f64, f64)) -> Run {
    let (spec, m) = map(c, "periodic")?;
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let s = find_periodic_orbit(&m, p, q, fundamental_region(region.0, region.1)?, tol)?;
    let mut csv = String::from("x,y,p,q,residual,index,degenerate,rotation_brackets\n");
    for r in &s.records {
        let index = r.index.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{p},{q},{},{index},{},{}",
            r.point.x, r.point.y, r.residual, r.degenerate, r.rotation_brackets
        );
    }
    println!("{} point(s) of rotation {p}/{q}", s.records.len());
    out.csv("", &csv)?;
    if s.records.is_empty() {
        return Err(Failure::NotFound(format!("no periodic point of type {p}/{q}")));
    }
    certificate(out, MapSource::zoo(&spec), Payload::Periodic(PeriodicPayload { p, q, tol, records: s.records }))
}

fn drift(c: &Common, out: &Output, region: (f64, f64), nx: usize, ny: usize, samples: Option<usize>) -> Run {
    let (spec, m) = map(c, "drift")?;
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let mut th = DriftThresholds::from_tol(tol);
    if let Some(h) = c.horizon {
        th.horizon = h;
    }
    let (y0, y1) = region;
    let points = match samples {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(0));
            (0..n).map(|_| Point::new(rng.gen_range(0.0..1.0), rng.gen_range(y0..y1))).collect()
        }
        None => sample_grid(nx, ny, y0, y1),
    };
    let search = find_fixed_points(&m, fundamental_region(y0, y1)?, tol, c.resolution.unwrap_or(7))?;
    let fixed: Vec<Point> = search
        .records
        .iter()
        .map(|r| r.point)
        .chain(search.degenerate.iter().flat_map(|d| d.points.iter().copied()))
        .collect();
    let class = drift_classification(&m, &points, &fixed, &th)?;
    let mut csv = String::from("x,y,tag,step\n");
    for (p, t) in class.points.iter().zip(&class.tags) {
        let (tag, step) = match t {
            DriftTag::ToPlusInfinity { step } => ("to-plus-infinity", step.to_string()),
            DriftTag::ToMinusInfinity { step } => ("to-minus-infinity", step.to_string()),
            DriftTag::ConvergesToFixed { step, .. } => ("converges-to-fixed", step.to_string()),
            DriftTag::Unclassified { .. } => ("unclassified", String::new()),
        };
        let _ = writeln!(csv, "{},{},{tag},{step}", p.x, p.y);
    }
    println!("{} samples, verdict {:?}, {} fixed point(s) known", points.len(), class.verdict, fixed.len());
    out.csv("", &csv)?;
    let inconclusive = class.verdict == DriftVerdict::Inconclusive;
    certificate(out, MapSource::zoo(&spec), Payload::Drift(DriftPayload { thresholds: th, fixed, class }))?;
    if inconclusive {
        return Err(Failure::NotFound(format!("no orbit classified within {} steps", th.horizon)));
    }
    Ok(())
}

fn table(s: &str) -> Result<TableSpec, Failure> {
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums = args
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Error(format!("not a number: `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match (kind, nums.as_slice()) {
        ("circle", []) => TableSpec::circle(1.0)?,
        ("circle", [r]) => TableSpec::circle(*r)?,
        ("ellipse", [a, b]) => TableSpec::ellipse(*a, *b)?,
        _ => return Err(Failure::Error(format!("table must be `circle[:r]` or `ellipse:a,b`, got `{s}`"))),
    })
}

fn bumper_set(file: Option<&std::path::Path>, inline: &[String]) -> Result<BumperSet, Failure> {
    let mut set = match file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<BumperSet>(&text)
                .map_err(|e| Failure::Error(format!("bad bumper file {}: {e}", path.display())))?
        }
        None => BumperSet::default(),
    };
    for b in inline {
        let v: Vec<f64> = b.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| {
            Failure::Error(format!("bumper must be `x,y,r`, got `{b}`"))
        })?;
        let [x, y, r] = v[..] else {
            return Err(Failure::Error(format!("bumper must be `x,y,r`, got `{b}`")));
        };
        set.bumpers.push(Disk { center: [x, y], radius: r });
    }
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn billiard(
    c: &Common,
    out: &Output,
    table_text: &str,
    theta0: f64,
    s0: f64,
    steps: Option<usize>,
    file: Option<&std::path::Path>,
    inline: &[String],
) -> Run {
    let t = table(table_text)?;
    let steps = steps.or(c.horizon).unwrap_or(10_000);
    let bumpers = bumper_set(file, inline)?;
    let start = BilliardState::new(s0, theta0)?;
    let mut csv = String::from("step,s,theta\n");
    let mut st = start;
    for n in 0..=steps {
        let _ = writeln!(csv, "{n},{},{}", st.s, st.theta);
        if n < steps {
            st = billiard_step(&t, st)?;
        }
    }
    out.csv("", &csv)?;
    println!("{steps} collisions from s = {s0}, theta = {theta0} (theta/pi = {:.6})", theta0 / PI);
    if bumpers.bumpers.is_empty() {
        return Ok(());
    }
    match bumper_avoidance_search(&t, &bumpers, &[theta0], &[s0], steps)? {
        AvoidanceOutcome::Certified(cert) => {
            println!("no chord meets a bumper; minimum clearance {:.4}", cert.min_clearance);
            certificate(out, MapSource::Table { table: t }, Payload::Billiard(cert))
        }
        AvoidanceOutcome::NotFound { .. } => {
            Err(Failure::NotFound(format!("the trajectory meets a bumper within {steps} chords")))
        }
    }
}

fn horseshoe(out: &Output, verify: bool, depth: usize, word: Option<&str>) -> Run {
    let spec = HorseshoeSpec::default();
    let hs = make_horseshoe(spec.clone())?;
    let conj = shift_conjugacy_check(&hs, depth)?;
    println!(
        "shift conjugacy to depth {depth}: {} words, max defect {}",
        conj.words_checked, conj.max_defect
    );
    out.json("-conjugacy", &conj)?;
    if let Some(w) = word {
        let w: ItineraryWord = w.parse()?;
        let r = cylinder_box(&hs, &w)?.rect;
        println!("cylinder {w}: [{}, {}] x [{}, {}]", r.x0, r.x1, r.y0, r.y1);
    }
    if conj.max_defect > 0 {
        return Err(Failure::Error(format!(
            "itinerary mismatch at {}",
            conj.first_failure.unwrap_or_default()
        )));
    }
    if !verify {
        return Ok(());
    }
    let report = verify_example_claims(&hs)?;
    let chain = assemble_periodic_chain(&report.positive, &report.negative)?;
    verify_chain(&hs, &chain)?;
    println!("negative witness {}: n = {}, k = {}", report.negative_word, report.negative.n, report.negative.k);
    println!("positive witness {}: n = {}, k = {}", report.positive_word, report.positive.n, report.positive.k);
    for b in &report.below_five {
        println!("n = {}: {} returning words, largest k {:?}", b.n, b.returning_words, b.max_k);
    }
    let small = &report.small_disk;
    println!("small disk, N = {}, word {}: n = {}, k = {}", small.n_param, small.word, small.witness.n, small.witness.k);
    out.csv(
        "",
        &witnesses_csv(&[("negative", &report.negative), ("positive", &report.positive), ("small_disk", &small.witness)]),
    )?;
    out.certificate("-chain", &Certificate::new(MapSource::Horseshoe { spec: spec.clone() }, Payload::Chain(chain))?)?;
    certificate(out, MapSource::Horseshoe { spec }, Payload::Horseshoe(report))
}

fn reverify_cmd(file: &std::path::Path) -> Run {
    let text =
        fs::read_to_string(file).map_err(|e| Failure::Error(format!("cannot read {}: {e}", file.display())))?;
    let cert = Certificate::from_json(&text)?;
    let r = reverify(&cert)?;
    if r.passed {
        println!("PASS {} certificate {}", r.kind, file.display());
        Ok(())
    } else {
        for f in &r.failures {
            println!("  {f}");
        }
        Err(Failure::Error(format!("{} certificate {} failed re-verification", r.kind, file.display())))
    }
}
