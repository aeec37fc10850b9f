//! Positively and negatively returning disks, periodic disk chains and their
//! pull-backs along orbits.
//!
//! A disk `U` (here a rectangle of the cover) is returning when `f~(U)` misses
//! `U` while some iterate `f~^n(U)` meets a translate `U + k`, `k != 0`. Every
//! witness carries a point `z` of `U` and its image `f~^n(z)`, so it can be
//! checked again by direct iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::BoxGraph;
use super::grid::Rect;
use crate::error::{Error, Result};
use crate::lift::{iterate, AnnulusPoint, LiftMap, LiftPoint};

pub const DEFAULT_HORIZON: usize = 64;
const WITNESS_SAMPLES: usize = 24;
const DISJOINT_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn admits(self, k: i64) -> bool {
        match self {
            Sign::Positive => k > 0,
            Sign::Negative => k < 0,
        }
    }

    pub fn of(k: i64) -> Option<Sign> {
        match k.signum() {
            1 => Some(Sign::Positive),
            -1 => Some(Sign::Negative),
            _ => None,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "positive" | "pos" => Ok(Sign::Positive),
            "-" | "negative" | "neg" => Ok(Sign::Negative),
            other => Err(Error::BadParameter(format!("sign must be + or -, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturningWitness {
    pub disk: Rect,
    pub n: usize,
    pub k: i64,
    pub point: LiftPoint<f64>,
    pub image: LiftPoint<f64>,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ReturningOutcome {
    Found { witness: ReturningWitness },
    NotFound { horizon: usize, candidates: usize },
}

impl ReturningOutcome {
    pub fn witness(&self) -> Option<&ReturningWitness> {
        match self {
            ReturningOutcome::Found { witness } => Some(witness),
            ReturningOutcome::NotFound { .. } => None,
        }
    }
}

/// Result of replaying a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub passed: bool,
    pub failures: Vec<String>,
    /// Smallest `L^inf` distance from a sampled `f~(u)`, `u` in `U`, to `U`.
    pub self_disjoint_margin: f64,
}

fn replay_tol<M: LiftMap<f64> + ?Sized>(m: &M) -> f64 {
    m.exactness().equivariance_tol()
}

/// Sampled check of `f~(U) cap U = {}`; returns the smallest distance from a
/// sampled image to `U` (negative infinity when the map fails on `U`).
pub fn self_disjoint_margin<M: LiftMap<f64> + ?Sized>(m: &M, disk: &Rect) -> f64 {
    disk.closed_samples(DISJOINT_SAMPLES)
        .into_iter()
        .map(|u| m.apply(u).map(|w| disk.linf_distance(w)).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min)
}

/// Replays a witness: `z` inside `U`, `f~^n(z)` recomputed and strictly inside
/// `U + k`, the sign consistent with `k`, and `f~(U)` disjoint from `U` on a
/// sample grid.
pub fn verify_witness<M: LiftMap<f64> + ?Sized>(m: &M, w: &ReturningWitness) -> WitnessCheck {
    let mut failures = Vec::new();
    if !w.disk.is_valid() {
        failures.push("disk is not a nonempty rectangle".to_string());
    }
    if w.n == 0 {
        failures.push("return time must be positive".into());
    }
    if !w.sign.admits(w.k) {
        failures.push(format!("translation {} does not have the recorded sign", w.k));
    }
    if !w.disk.contains_strictly(w.point) {
        failures.push(format!("witness point ({}, {}) is not inside the disk", w.point.x, w.point.y));
    }
    match iterate(m, w.point, w.n as i64) {
        Ok(img) => {
            if img.dist(w.image) > replay_tol(m) {
                failures.push(format!(
                    "recomputed image ({}, {}) differs from the recorded ({}, {})",
                    img.x, img.y, w.image.x, w.image.y
                ));
            }
            if !w.disk.translate(w.k).contains_strictly(img) {
                failures.push(format!("image is not inside U + {}", w.k));
            }
        }
        Err(e) => failures.push(format!("iteration failed: {e}")),
    }
    let margin = if w.disk.is_valid() { self_disjoint_margin(m, &w.disk) } else { f64::NEG_INFINITY };
    if !(margin > 0.0) {
        failures.push("sampled image f(U) meets U".into());
    }
    WitnessCheck { passed: failures.is_empty(), failures, self_disjoint_margin: margin }
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    n: usize,
    k: i64,
    point: LiftPoint<f64>,
    image: LiftPoint<f64>,
}

/// First return of `z` to a translate `U + k` of the requested sign, and the
/// closest approach to such a translate along the way.
fn scan_orbit<M: LiftMap<f64> + ?Sized>(
    m: &M,
    disk: &Rect,
    sign: Sign,
    horizon: usize,
    z: LiftPoint<f64>,
) -> (Option<Hit>, f64) {
    let mut w = z;
    let mut closest = f64::INFINITY;
    for n in 1..=horizon {
        w = match m.apply(w) {
            Ok(v) if v.is_finite() => v,
            _ => break,
        };
        let k0 = disk.turns_to(w);
        for k in [k0 - 1, k0, k0 + 1] {
            if !sign.admits(k) {
                continue;
            }
            let t = disk.translate(k);
            if t.contains_strictly(w) {
                return (Some(Hit { n, k, point: z, image: w }), 0.0);
            }
            closest = closest.min(t.linf_distance(w));
        }
        let nearest = match sign {
            Sign::Positive => 1.max(k0),
            Sign::Negative => (-1).min(k0),
        };
        closest = closest.min(disk.translate(nearest).linf_distance(w));
    }
    (None, closest)
}

fn best_hit(hits: impl IntoIterator<Item = Hit>) -> Option<Hit> {
    // smallest n, then smallest |k|; sample order breaks remaining ties
    hits.into_iter().fold(None, |best: Option<Hit>, h| match best {
        Some(b) if (b.n, b.k.abs()) <= (h.n, h.k.abs()) => Some(b),
        _ => Some(h),
    })
}

fn witness_from(hit: Hit, disk: Rect, sign: Sign) -> ReturningWitness {
    ReturningWitness { disk, n: hit.n, k: hit.k, point: hit.point, image: hit.image, sign }
}

/// Searches the rectangle `U` directly: a dense sample grid first, then a beam
/// of zoomed grids around the samples whose orbits come closest to a translate
/// of the requested sign.
pub fn find_returning_disk_in<M: LiftMap<f64> + ?Sized>(
    m: &M,
    disk: Rect,
    sign: Sign,
    horizon: usize,
) -> Result<ReturningOutcome> {
    if !disk.is_valid() {
        return Err(Error::BadParameter("disk must be a nonempty rectangle".into()));
    }
    if !(self_disjoint_margin(m, &disk) > 0.0) {
        return Ok(ReturningOutcome::NotFound { horizon, candidates: 0 });
    }
    const BEAM: usize = 8;
    const LEVELS: usize = 14;
    let mut frames = vec![disk];
    let mut tried = 0;
    for _ in 0..LEVELS {
        let tagged: Vec<(usize, LiftPoint<f64>)> = frames
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| f.samples(WITNESS_SAMPLES).into_iter().map(move |p| (fi, p)))
            .filter(|&(_, p)| disk.contains_strictly(p))
            .collect();
        tried += tagged.len();
        let scans: Vec<_> = tagged.par_iter().map(|&(_, z)| scan_orbit(m, &disk, sign, horizon, z)).collect();
        if let Some(hit) = best_hit(scans.iter().filter_map(|s| s.0)) {
            let w = witness_from(hit, disk, sign);
            if verify_witness(m, &w).passed {
                return Ok(ReturningOutcome::Found { witness: w });
            }
        }
        let mut order: Vec<usize> = (0..tagged.len()).filter(|&i| scans[i].1.is_finite()).collect();
        order.sort_by(|&a, &b| scans[a].1.total_cmp(&scans[b].1).then(a.cmp(&b)));
        let next: Vec<Rect> = order
            .iter()
            .take(BEAM)
            .map(|&i| {
                let (fi, c) = tagged[i];
                let hx = frames[fi].width() / WITNESS_SAMPLES as f64;
                let hy = frames[fi].height() / WITNESS_SAMPLES as f64;
                Rect { x0: c.x - hx, x1: c.x + hx, y0: c.y - hy, y1: c.y + hy }
            })
            .collect();
        if next.is_empty() {
            break;
        }
        frames = next;
    }
    Ok(ReturningOutcome::NotFound { horizon, candidates: tried })
}

/// Component id of every region node.
fn component_ids(g: &BoxGraph) -> Vec<Option<usize>> {
    let mut ids = vec![None; g.len()];
    for (c, comp) in g.recurrent_components().iter().enumerate() {
        for &i in comp {
            if let Some(v) = g.node(i) {
                ids[v] = Some(c);
            }
        }
    }
    ids
}

/// Breadth-first search over `(box, cumulative k)` states, restricted to the
/// component of the start box. `seen` is scratch space stamped per search.
struct ReturnSearch<'g> {
    g: &'g BoxGraph,
    ids: Vec<Option<usize>>,
    seen: Vec<u32>,
    stamp: u32,
}

impl<'g> ReturnSearch<'g> {
    fn new(g: &'g BoxGraph) -> Self {
        let width = (2 * g.params.kmax + 1) as usize;
        Self { g, ids: component_ids(g), seen: vec![0; g.len() * width], stamp: 0 }
    }

    /// Whether the graph has a path `U -> U + k` of length at most `horizon`
    /// with `k` of the requested sign.
    fn admits_return(&mut self, u: usize, sign: Sign, horizon: usize) -> bool {
        let g = self.g;
        let Some(start) = g.node(u) else { return false };
        let Some(comp) = self.ids[start] else { return false };
        let kmax = g.params.kmax;
        let width = (2 * kmax + 1) as usize;
        self.stamp += 1;
        let slot = |v: usize, k: i64| v * width + (k + kmax) as usize;
        self.seen[slot(start, 0)] = self.stamp;
        let mut layer = vec![(start, 0i64)];
        for _ in 0..horizon {
            let mut next = Vec::new();
            for &(v, k) in &layer {
                for e in &g.images[v].edges {
                    let Some(w) = g.node(e.to) else { continue };
                    let k2 = k + e.k;
                    if self.ids[w] != Some(comp) || k2.abs() > kmax {
                        continue;
                    }
                    if w == start && sign.admits(k2) {
                        return true;
                    }
                    let s = slot(w, k2);
                    if self.seen[s] != self.stamp {
                        self.seen[s] = self.stamp;
                        next.push((w, k2));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layer = next;
        }
        false
    }
}

/// Graph-guided search over boxes in row-major order: a box qualifies when it
/// carries no `(U, U, 0)` edge and the graph admits a return of the requested
/// sign within the horizon; the witness is then found by direct iteration of
/// a dense sample of the box.
pub fn find_returning_disk<M: LiftMap<f64> + ?Sized>(
    m: &M,
    g: &BoxGraph,
    sign: Sign,
    horizon: usize,
) -> Result<ReturningOutcome> {
    let mut search = ReturnSearch::new(g);
    let mut candidates = 0;
    for node in 0..g.len() {
        if search.ids[node].is_none() {
            continue;
        }
        let u = g.index(node);
        if g.has_edge(u, u, 0) || !search.admits_return(u, sign, horizon) {
            continue;
        }
        candidates += 1;
        let disk = g.grid.rect(u);
        // a coarse pass first; boxes whose coarse orbits never come near a
        // translate are not worth the dense sample
        let coarse: Vec<_> = disk.samples(8).par_iter().map(|&z| scan_orbit(m, &disk, sign, horizon, z).1).collect();
        if coarse.iter().all(|&d| d > 0.5 * disk.width().max(disk.height())) {
            continue;
        }
        let pts = disk.samples(WITNESS_SAMPLES);
        let hits: Vec<_> = pts.par_iter().map(|&z| scan_orbit(m, &disk, sign, horizon, z).0).collect();
        if let Some(hit) = best_hit(hits.into_iter().flatten()) {
            let w = witness_from(hit, disk, sign);
            if verify_witness(m, &w).passed {
                return Ok(ReturningOutcome::Found { witness: w });
            }
        }
    }
    Ok(ReturningOutcome::NotFound { horizon, candidates })
}

/// Given `x` whose lift reaches `U + j` after `n` steps, returns a returning
/// disk around the lift of `x`: the hull of `f~^-n(U + j)` (sampled, inflated),
/// normalized so that its left edge lies in `[0, 1)`.
pub fn pull_back_returning<M: LiftMap<f64> + ?Sized>(
    m: &M,
    x: AnnulusPoint<f64>,
    w: &ReturningWitness,
    n: usize,
) -> Result<ReturningWitness> {
    let start = x.lift();
    let fwd = iterate(m, start, n as i64)?;
    let j = w.disk.translate_containing(fwd).ok_or_else(|| {
        Error::PreconditionFailed(format!("f^{n}(x) does not lie in a translate of the witness disk"))
    })?;
    if n == 0 {
        return Ok(*w);
    }
    if !m.has_inverse() {
        return Err(Error::MissingInverse);
    }
    let target = w.disk.translate(j);
    let mut pre = Vec::new();
    for u in target.closed_samples(WITNESS_SAMPLES) {
        pre.push(iterate(m, u, -(n as i64))?);
    }
    let z = iterate(m, w.point.translate(j), -(n as i64))?;
    pre.push(z);
    pre.push(start);
    let hull = Rect::hull(&pre).expect("nonempty");
    let pad = 0.25 * (hull.width() / WITNESS_SAMPLES as f64).max(hull.height() / WITNESS_SAMPLES as f64);
    let shift = hull.x0.floor() as i64;
    let disk = hull.inflate(pad).translate(-shift);
    let point = z.translate(-shift);
    let image = iterate(m, point, w.n as i64)?;
    Ok(ReturningWitness { disk, n: w.n, k: w.k, point, image, sign: w.sign })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxdyn::graph::{build_box_graph, GraphParams};
    use crate::boxdyn::grid::{Band, Grid};
    use crate::zoo::{make_map, MapVariant};

    fn diss() -> Box<dyn LiftMap<f64>> {
        make_map::<f64>(&MapVariant::DissRot { alpha: 0.318, lambda: 0.9 }).unwrap()
    }

    fn diss_graph(d: u32) -> BoxGraph {
        let grid = Grid::new(d, Band::new(0.3, 0.7).unwrap()).unwrap();
        build_box_graph(&diss(), grid, GraphParams::defaults(&grid)).unwrap()
    }

    #[test]
    fn rotation_returns_only_forward() {
        let g = diss_graph(6);
        let pos = find_returning_disk(&diss(), &g, Sign::Positive, DEFAULT_HORIZON).unwrap();
        let w = pos.witness().expect("positive witness");
        assert!(w.k > 0);
        // 22 steps of 0.318 turns come within 0.004 of 7 turns
        assert_eq!((w.n, w.k), (22, 7));
        assert!(verify_witness(&diss(), w).passed);
        let neg = find_returning_disk(&diss(), &g, Sign::Negative, 50).unwrap();
        assert!(neg.witness().is_none());
    }

    #[test]
    fn tampered_witness_fails() {
        let g = diss_graph(6);
        let w = *find_returning_disk(&diss(), &g, Sign::Positive, 64).unwrap().witness().unwrap();
        for (dx, dy) in [(0.05, 0.0), (-0.05, 0.0), (0.0, 0.05), (0.0, -0.05)] {
            let mut t = w;
            t.point = LiftPoint::new(w.point.x + dx, w.point.y + dy);
            assert!(!verify_witness(&diss(), &t).passed);
            let mut t = w;
            t.image = LiftPoint::new(w.image.x + dx, w.image.y + dy);
            assert!(!verify_witness(&diss(), &t).passed);
        }
        let mut t = w;
        t.k = -t.k;
        assert!(!verify_witness(&diss(), &t).passed);
    }

    #[test]
    fn explicit_disk_search_matches_graph() {
        let g = diss_graph(6);
        let w = *find_returning_disk(&diss(), &g, Sign::Positive, 64).unwrap().witness().unwrap();
        let again = find_returning_disk_in(&diss(), w.disk, Sign::Positive, 64).unwrap();
        assert_eq!(again.witness().map(|v| (v.n, v.k)), Some((w.n, w.k)));
    }

    #[test]
    fn pull_back_contains_lift() {
        let m = diss();
        let g = diss_graph(6);
        let w = *find_returning_disk(&m, &g, Sign::Positive, 64).unwrap().witness().unwrap();
        // walk a point back 12 steps from the witness disk
        let x = iterate(&m, w.disk.center(), -12).unwrap();
        let ax = crate::lift::project(x);
        let v = pull_back_returning(&m, ax, &w, 12).unwrap();
        assert!(v.disk.translate_containing(ax.lift()).is_some() || v.disk.contains(ax.lift()));
        assert!(verify_witness(&m, &v).passed, "{:?}", verify_witness(&m, &v).failures);
        assert_eq!(pull_back_returning(&m, crate::lift::project(w.point), &w, 0).unwrap(), w);
        let far = AnnulusPoint::new(0.0, 0.05);
        assert!(matches!(pull_back_returning(&m, far, &w, 1), Err(Error::PreconditionFailed(_))));
    }
}
