//! A piecewise affine triple horseshoe on a rectangle `N` of the annulus.
//!
//! Three vertical strips `H_j` of `N` are stretched across `N` and squeezed
//! into horizontal bars `V_j`, with the lift moved by `k_j = j - 1` turns. The
//! map is left undefined off the strips: every orbit used below stays in `N`,
//! so the claims hold for any extension to the whole annulus.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boxdyn::{verify_witness, Rect, ReturningWitness, Sign};
use crate::error::{Error, Result};
use crate::lift::{LiftMap, LiftPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeSpec {
    pub rect: Rect,
    /// Left edges of the strips `H_j = [a_j, a_j + width] x [y0, y1]`.
    pub strip_offsets: [f64; 3],
    pub strip_width: f64,
    /// Bottom edges of the bars `V_j = [x0, x1] x [b_j, b_j + height]`.
    pub bar_offsets: [f64; 3],
    pub bar_height: f64,
    pub translations: [i64; 3],
    /// `(x, y)` orientation signs of each branch.
    pub orientations: [(i8, i8); 3],
}

impl Default for HorseshoeSpec {
    fn default() -> Self {
        Self {
            rect: Rect { x0: 0.0, x1: 0.3, y0: 0.3, y1: 0.7 },
            strip_offsets: [0.02, 0.12, 0.22],
            strip_width: 0.06,
            bar_offsets: [0.32, 0.46, 0.60],
            bar_height: 0.08,
            translations: [-1, 0, 1],
            orientations: [(1, 1), (-1, -1), (1, 1)],
        }
    }
}

impl HorseshoeSpec {
    pub fn strip(&self, j: usize) -> Rect {
        let a = self.strip_offsets[j];
        Rect { x0: a, x1: a + self.strip_width, y0: self.rect.y0, y1: self.rect.y1 }
    }

    pub fn bar(&self, j: usize) -> Rect {
        let b = self.bar_offsets[j];
        Rect { x0: self.rect.x0, x1: self.rect.x1, y0: b, y1: b + self.bar_height }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::BadParameter(format!("horseshoe: {msg}")));
        let n = &self.rect;
        if !n.is_valid() || n.width() >= 1.0 || n.y0 <= 0.0 || n.y1 >= 1.0 {
            return bad("N must be a rectangle of width < 1 inside the open annulus");
        }
        if !(self.strip_width > 0.0) || !(self.bar_height > 0.0) {
            return bad("strip width and bar height must be positive");
        }
        for j in 0..3 {
            let (h, v) = (self.strip(j), self.bar(j));
            if h.x0 < n.x0 || h.x1 > n.x1 || v.y0 < n.y0 || v.y1 > n.y1 {
                return bad("strips and bars must lie in N");
            }
            let (sx, sy) = self.orientations[j];
            if sx.abs() != 1 || sy.abs() != 1 {
                return bad("orientation signs must be +1 or -1");
            }
            if sx * sy < 0 {
                return bad("branch reverses orientation");
            }
            for i in 0..j {
                if h.intersects(&self.strip(i)) {
                    return bad("strips overlap");
                }
                if v.intersects(&self.bar(i)) {
                    return bad("bars overlap");
                }
            }
        }
        Ok(())
    }
}

/// The horseshoe as a partial lift, defined on the strips and their translates.
#[derive(Debug, Clone, PartialEq)]
pub struct Horseshoe {
    spec: HorseshoeSpec,
}

pub fn make_horseshoe(spec: HorseshoeSpec) -> Result<Horseshoe> {
    spec.validate()?;
    Ok(Horseshoe { spec })
}

impl Horseshoe {
    pub fn spec(&self) -> &HorseshoeSpec {
        &self.spec
    }

    fn x_branch(&self, j: usize, x: f64) -> f64 {
        let (n, a) = (&self.spec.rect, self.spec.strip_offsets[j]);
        let t = (x - a) / self.spec.strip_width;
        if self.spec.orientations[j].0 > 0 {
            n.x0 + t * n.width()
        } else {
            n.x1 - t * n.width()
        }
    }

    fn x_branch_inv(&self, j: usize, x: f64) -> f64 {
        let (n, a) = (&self.spec.rect, self.spec.strip_offsets[j]);
        let t = if self.spec.orientations[j].0 > 0 { (x - n.x0) / n.width() } else { (n.x1 - x) / n.width() };
        a + t * self.spec.strip_width
    }

    fn y_branch(&self, j: usize, y: f64) -> f64 {
        let (n, b) = (&self.spec.rect, self.spec.bar_offsets[j]);
        let t = (y - n.y0) / n.height();
        if self.spec.orientations[j].1 > 0 {
            b + t * self.spec.bar_height
        } else {
            b + self.spec.bar_height - t * self.spec.bar_height
        }
    }

    fn y_branch_inv(&self, j: usize, y: f64) -> f64 {
        let (n, b) = (&self.spec.rect, self.spec.bar_offsets[j]);
        let t = if self.spec.orientations[j].1 > 0 {
            (y - b) / self.spec.bar_height
        } else {
            (b + self.spec.bar_height - y) / self.spec.bar_height
        };
        n.y0 + t * n.height()
    }

    /// Branch containing `p` together with the turn count of its translate.
    pub fn symbol_at(&self, p: LiftPoint<f64>) -> Option<(usize, i64)> {
        let m = (p.x - self.spec.rect.x0).floor();
        let q = LiftPoint::new(p.x - m, p.y);
        (0..3).find(|&j| self.spec.strip(j).contains(q)).map(|j| (j, m as i64))
    }

    fn branch(&self, j: usize, p: LiftPoint<f64>) -> LiftPoint<f64> {
        let m = (p.x - self.spec.rect.x0).floor();
        let x = self.x_branch(j, p.x - m);
        LiftPoint::new(x + m + self.spec.translations[j] as f64, self.y_branch(j, p.y))
    }

    /// Exact image of `r cap (H_j + m)` under branch `j`, where `m` is the
    /// translate of `N` holding `r`; `None` when the intersection has empty
    /// interior.
    fn branch_rect(&self, j: usize, r: &Rect) -> Option<Rect> {
        let m = (r.center().x - self.spec.rect.x0).floor();
        let h = self.spec.strip(j).translate(m as i64);
        let (x0, x1, y0, y1) = (r.x0.max(h.x0), r.x1.min(h.x1), r.y0.max(h.y0), r.y1.min(h.y1));
        if !(x0 < x1 && y0 < y1) {
            return None;
        }
        let shift = m + self.spec.translations[j] as f64;
        let (a, b) = (self.x_branch(j, x0 - m) + shift, self.x_branch(j, x1 - m) + shift);
        let (c, d) = (self.y_branch(j, y0), self.y_branch(j, y1));
        Some(Rect { x0: a.min(b), x1: a.max(b), y0: c.min(d), y1: c.max(d) })
    }

    /// The fixed point of branch `j` in `N` (a fixed point of `T^-k_j o f~`).
    pub fn branch_fixed_point(&self, j: usize) -> LiftPoint<f64> {
        // both coordinates are affine contractions or expansions with one fixed point
        let solve = |f: &dyn Fn(f64) -> f64| {
            let (f0, f1) = (f(0.0), f(1.0));
            f0 / (1.0 - (f1 - f0))
        };
        LiftPoint::new(solve(&|x| self.x_branch(j, x)), solve(&|y| self.y_branch(j, y)))
    }
}

impl LiftMap<f64> for Horseshoe {
    fn name(&self) -> String {
        "horseshoe".into()
    }

    fn apply(&self, p: LiftPoint<f64>) -> Result<LiftPoint<f64>> {
        match self.symbol_at(p) {
            Some((j, _)) => Ok(self.branch(j, p)),
            None => Err(Error::OutsideDomain { x: p.x, y: p.y }),
        }
    }

    fn apply_inverse(&self, p: LiftPoint<f64>) -> Result<LiftPoint<f64>> {
        for j in 0..3 {
            let q = LiftPoint::new(p.x - self.spec.translations[j] as f64, p.y);
            let m = (q.x - self.spec.rect.x0).floor();
            if self.spec.bar(j).contains(LiftPoint::new(q.x - m, q.y)) {
                return Ok(LiftPoint::new(self.x_branch_inv(j, q.x - m) + m, self.y_branch_inv(j, q.y)));
            }
        }
        Err(Error::OutsideDomain { x: p.x, y: p.y })
    }

    fn has_inverse(&self) -> bool {
        true
    }
}

/// Finite word over `{0, 1, 2}`; `symbols[anchor..]` are the symbols from time
/// 0 on, the ones before `anchor` are the past. Written `past.future`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItineraryWord {
    pub symbols: Vec<u8>,
    pub anchor: usize,
}

impl ItineraryWord {
    pub fn future(symbols: Vec<u8>) -> Self {
        Self { symbols, anchor: 0 }
    }

    pub fn new(past: &[u8], future: &[u8]) -> Self {
        Self { symbols: [past, future].concat(), anchor: past.len() }
    }

    pub fn past(&self) -> &[u8] {
        &self.symbols[..self.anchor]
    }

    pub fn forward(&self) -> &[u8] {
        &self.symbols[self.anchor..]
    }

    /// Net turn count of the future symbols.
    pub fn translation(&self, hs: &HorseshoeSpec) -> i64 {
        self.forward().iter().map(|&s| hs.translations[s as usize]).sum()
    }
}

impl fmt::Display for ItineraryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = |s: &[u8]| s.iter().map(|d| char::from(b'0' + d)).collect::<String>();
        if self.anchor > 0 {
            write!(f, "{}.", digits(self.past()))?;
        }
        write!(f, "{}", digits(self.forward()))
    }
}

impl FromStr for ItineraryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = |t: &str| {
            t.chars()
                .map(|c| match c {
                    '0'..='2' => Ok(c as u8 - b'0'),
                    _ => Err(Error::BadParameter(format!("symbol {c:?} is not 0, 1 or 2"))),
                })
                .collect::<Result<Vec<u8>>>()
        };
        match s.split_once('.') {
            Some((past, future)) => Ok(Self::new(&digits(past)?, &digits(future)?)),
            None => Ok(Self::future(digits(s)?)),
        }
    }
}

/// Symbols of `p, f~(p), ..., f~^(length-1)(p)`.
pub fn itinerary(hs: &Horseshoe, p: LiftPoint<f64>, length: usize) -> Result<ItineraryWord> {
    let mut symbols = Vec::with_capacity(length);
    let mut q = p;
    for step in 0..length {
        let Some((j, _)) = hs.symbol_at(q) else { return Err(Error::OrbitLeavesN { step }) };
        symbols.push(j as u8);
        if step + 1 < length {
            q = hs.branch(j, q);
        }
    }
    Ok(ItineraryWord::future(symbols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderBox {
    pub word: ItineraryWord,
    pub rect: Rect,
    pub depth: usize,
}

/// Points of `N` whose future follows `word.forward()` and whose past follows
/// `word.past()`. Future symbols cut the strip horizontally, past ones cut
/// the bars vertically; both cuts are exact for the affine branches.
pub fn cylinder_box(hs: &Horseshoe, word: &ItineraryWord) -> Result<CylinderBox> {
    if word.symbols.iter().any(|&s| s > 2) || word.anchor > word.symbols.len() {
        return Err(Error::BadParameter(format!("malformed word {word:?}")));
    }
    let n = &hs.spec.rect;
    let (mut x0, mut x1) = (n.x0, n.x1);
    for &s in word.forward().iter().rev() {
        let (a, b) = (hs.x_branch_inv(s as usize, x0), hs.x_branch_inv(s as usize, x1));
        (x0, x1) = (a.min(b), a.max(b));
    }
    let (mut y0, mut y1) = (n.y0, n.y1);
    for &s in word.past() {
        let (a, b) = (hs.y_branch(s as usize, y0), hs.y_branch(s as usize, y1));
        (y0, y1) = (a.min(b), a.max(b));
    }
    Ok(CylinderBox { word: word.clone(), rect: Rect { x0, x1, y0, y1 }, depth: word.symbols.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub depth: usize,
    pub words_checked: usize,
    /// Largest number of positions where a computed itinerary disagrees with its word.
    pub max_defect: usize,
    pub first_failure: Option<String>,
}

fn all_words(len: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..3usize.pow(len as u32)).map(move |mut c| {
        let mut w = vec![0u8; len];
        for s in w.iter_mut().rev() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        w
    })
}

/// For every word up to length 6 (and a deterministic sample of longer ones),
/// the centre of its cylinder has that word as itinerary, and the itinerary of
/// its image is the shifted word.
pub fn shift_conjugacy_check(hs: &Horseshoe, depth: usize) -> Result<ConjugacyReport> {
    if depth == 0 || depth > 12 {
        return Err(Error::BadParameter(format!("conjugacy depth {depth} outside 1..=12")));
    }
    let mut words: Vec<Vec<u8>> = (1..=depth.min(6)).flat_map(all_words).collect();
    for len in 7..=depth {
        // fixed stride through the 3^len words
        let total = 3u64.pow(len as u32);
        words.extend((0..500u64).map(|i| {
            let mut c = (i * 2_654_435_761) % total;
            let mut w = vec![0u8; len];
            for s in w.iter_mut().rev() {
                *s = (c % 3) as u8;
                c /= 3;
            }
            w
        }));
    }
    let mut report = ConjugacyReport { depth, words_checked: 0, max_defect: 0, first_failure: None };
    for w in words {
        let word = ItineraryWord::future(w.clone());
        let c = cylinder_box(hs, &word)?.rect.center();
        let defect = match itinerary(hs, c, w.len()) {
            Ok(it) => {
                let mut d = it.symbols.iter().zip(&w).filter(|(a, b)| a != b).count();
                if w.len() > 1 {
                    let shifted = itinerary(hs, hs.apply(c)?, w.len() - 1)?;
                    d += shifted.symbols.iter().zip(&w[1..]).filter(|(a, b)| a != b).count();
                }
                d
            }
            Err(_) => w.len(),
        };
        if defect > 0 && report.first_failure.is_none() {
            report.first_failure = Some(word.to_string());
        }
        report.max_defect = report.max_defect.max(defect);
        report.words_checked += 1;
    }
    Ok(report)
}

/// Largest `k` with `f~^n(U) cap (U + k)` of nonempty interior over all
/// itineraries of length `n`, computed exactly on rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnBound {
    pub n: usize,
    pub returning_words: usize,
    pub max_k: Option<i64>,
}

pub fn exhaustive_returns(hs: &Horseshoe, u: &Rect, n: usize) -> ReturnBound {
    let mut bound = ReturnBound { n, returning_words: 0, max_k: None };
    for w in all_words(n) {
        let mut r = Some(*u);
        for &s in &w {
            r = r.and_then(|r| hs.branch_rect(s as usize, &r));
        }
        let Some(r) = r else { continue };
        let m = (r.center().x - hs.spec.rect.x0).floor() as i64;
        for k in [m - 1, m, m + 1] {
            let t = u.translate(k);
            if r.x0.max(t.x0) < r.x1.min(t.x1) && r.y0.max(t.y0) < r.y1.min(t.y1) {
                bound.returning_words += 1;
                bound.max_k = Some(bound.max_k.map_or(k, |b| b.max(k)));
            }
        }
    }
    bound
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallDiskCheck {
    pub n_param: usize,
    pub word: ItineraryWord,
    pub witness: ReturningWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeReport {
    /// `H_0 cap V_0`, the disk around the all-0 fixed point.
    pub disk: Rect,
    pub fixed_point: LiftPoint<f64>,
    pub negative: ReturningWitness,
    pub negative_word: ItineraryWord,
    pub positive: ReturningWitness,
    pub positive_word: ItineraryWord,
    pub below_five: Vec<ReturnBound>,
    pub small_disk: SmallDiskCheck,
}

/// Returning witness for the point at the centre of the cylinder of `word`,
/// iterated `n` steps; fails unless it verifies as returning to `disk + k`.
fn cylinder_witness(hs: &Horseshoe, disk: Rect, word: &ItineraryWord, n: usize) -> Result<ReturningWitness> {
    let point = cylinder_box(hs, word)?.rect.center();
    let mut image = point;
    for _ in 0..n {
        image = hs.apply(image)?;
    }
    let k = disk.turns_to(image);
    let sign = Sign::of(k).ok_or_else(|| Error::ClaimFailed(format!("word {word} does not move the disk")))?;
    let w = ReturningWitness { disk, n, k, point, image, sign };
    let check = verify_witness(hs, &w);
    if !check.passed {
        return Err(Error::ClaimFailed(format!("witness for {word}: {}", check.failures.join("; "))));
    }
    Ok(w)
}

/// The returning-disk claims about the default horseshoe: `U` returns
/// negatively after one step, positively after five, never positively sooner,
/// and the sub-disk `U_N` returns positively after `4N - 1` steps (`N = 2`).
pub fn verify_example_claims(hs: &Horseshoe) -> Result<HorseshoeReport> {
    let fail = |msg: String| Error::ClaimFailed(msg);
    let disk = hs.spec.strip(0).intersect(&hs.spec.bar(0)).ok_or_else(|| fail("H_0 misses V_0".into()))?;
    let fixed_point = hs.branch_fixed_point(0);
    if !disk.contains_strictly(fixed_point) {
        return Err(fail("the all-0 fixed point is not inside H_0 cap V_0".into()));
    }

    let negative_word: ItineraryWord = "0.00".parse()?;
    let negative = cylinder_witness(hs, disk, &negative_word, 1)?;
    if (negative.n, negative.k) != (1, -1) {
        return Err(fail(format!("negative return is (n={}, k={})", negative.n, negative.k)));
    }
    let positive_word: ItineraryWord = "0.022200".parse()?;
    let positive = cylinder_witness(hs, disk, &positive_word, 5)?;
    if (positive.n, positive.k) != (5, 1) {
        return Err(fail(format!("positive return is (n={}, k={})", positive.n, positive.k)));
    }

    let below_five: Vec<ReturnBound> = (1..5).map(|n| exhaustive_returns(hs, &disk, n)).collect();
    if let Some(b) = below_five.iter().find(|b| b.max_k.is_some_and(|k| k > 0)) {
        return Err(fail(format!("positive return after {} steps", b.n)));
    }
    if exhaustive_returns(hs, &disk, 5).max_k != Some(1) {
        return Err(fail("no positive return after five steps".into()));
    }

    let n_param = 2;
    let small = ItineraryWord::new(&vec![0; n_param - 1], &vec![0; n_param]);
    let small_disk = cylinder_box(hs, &small)?.rect;
    let future: Vec<u8> = [vec![0; n_param], vec![2; 2 * n_param], vec![0; 2 * n_param - 1]].concat();
    let word = ItineraryWord::new(&vec![0; n_param - 1], &future);
    let n = 4 * n_param - 1;
    let witness = cylinder_witness(hs, small_disk, &word, n)?;
    if witness.k != 1 {
        return Err(fail(format!("small disk returns with k = {}", witness.k)));
    }
    Ok(HorseshoeReport {
        disk,
        fixed_point,
        negative,
        negative_word,
        positive,
        positive_word,
        below_five,
        small_disk: SmallDiskCheck { n_param, word, witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs() -> Horseshoe {
        make_horseshoe(HorseshoeSpec::default()).unwrap()
    }

    #[test]
    fn branches() {
        let h = hs();
        let mid = h.spec().strip(1).center();
        let img = h.apply(mid).unwrap();
        assert!(h.spec().bar(1).contains(img));
        let left = h.apply(LiftPoint::new(0.05, 0.5)).unwrap();
        assert!(left.x < -0.7 && left.x > -1.0);
        assert!(matches!(h.apply(LiftPoint::new(0.1, 0.5)), Err(Error::OutsideDomain { .. })));
        assert!(matches!(h.apply(LiftPoint::new(0.05, 0.8)), Err(Error::OutsideDomain { .. })));
        let p = LiftPoint::new(0.25, 0.41);
        let back = h.apply_inverse(h.apply(p).unwrap()).unwrap();
        assert!(back.dist(p) < 1e-14);
        assert_eq!(h.apply(p.translate(3)).unwrap(), h.apply(p).unwrap().translate(3));
    }

    #[test]
    fn branch_fixed_points() {
        let h = hs();
        let z0 = h.branch_fixed_point(0);
        assert!((z0.x - 0.025).abs() < 1e-12 && (z0.y - 0.325).abs() < 1e-12);
        for j in 0..3 {
            let z = h.branch_fixed_point(j);
            assert!(h.apply(z).unwrap().translate(-(j as i64 - 1)).dist(z) < 1e-12);
            let it = itinerary(&h, z, 6).unwrap();
            assert!(it.symbols.iter().all(|&s| s as usize == j));
        }
        assert!((iterate_x(&h, z0, 4) - (z0.x - 4.0)).abs() < 1e-12);
    }

    fn iterate_x(h: &Horseshoe, p: LiftPoint<f64>, n: usize) -> f64 {
        (0..n).fold(p, |q, _| h.apply(q).unwrap()).x
    }

    #[test]
    fn cylinders() {
        let h = hs();
        assert_eq!(cylinder_box(&h, &"0".parse().unwrap()).unwrap().rect, h.spec().strip(0));
        let w: ItineraryWord = "02220".parse().unwrap();
        let c = cylinder_box(&h, &w).unwrap();
        assert_eq!(itinerary(&h, c.rect.center(), 5).unwrap().symbols, vec![0, 2, 2, 2, 0]);
        assert_eq!("02220".parse::<ItineraryWord>().unwrap().translation(h.spec()), 1);
        let two = cylinder_box(&h, &"00".parse().unwrap()).unwrap().rect;
        assert!(two.is_valid() && h.spec().strip(0).contains(two.center()));
        assert_eq!("1.20".parse::<ItineraryWord>().unwrap().to_string(), "1.20");
        assert!("013".parse::<ItineraryWord>().is_err());
    }

    #[test]
    fn conjugacy() {
        let h = hs();
        let r = shift_conjugacy_check(&h, 3).unwrap();
        assert_eq!((r.words_checked, r.max_defect), (3 + 9 + 27, 0));
        let r = shift_conjugacy_check(&h, 6).unwrap();
        assert_eq!(r.max_defect, 0);
    }

    #[test]
    fn example_claims() {
        let r = verify_example_claims(&hs()).unwrap();
        assert_eq!((r.negative.n, r.negative.k), (1, -1));
        assert_eq!((r.positive.n, r.positive.k), (5, 1));
        assert!(r.below_five.iter().all(|b| b.max_k.unwrap() <= 0));
        assert_eq!((r.small_disk.witness.n, r.small_disk.witness.k), (7, 1));
        assert_eq!(r.disk, Rect { x0: 0.02, x1: 0.08, y0: 0.32, y1: 0.40 });
    }

    #[test]
    fn spec_validation() {
        let mut s = HorseshoeSpec::default();
        s.strip_offsets[1] = 0.05;
        assert!(make_horseshoe(s).is_err());
        let mut s = HorseshoeSpec::default();
        s.orientations[0] = (1, -1);
        assert!(make_horseshoe(s).is_err());
        let mut s = HorseshoeSpec::default();
        s.bar_offsets[2] = 0.65;
        assert!(make_horseshoe(s).is_err());
    }
}
