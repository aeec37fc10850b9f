//! Periodic disk chains assembled from a positive and a negative return of the
//! same disk.

use serde::{Deserialize, Serialize};

use super::grid::Rect;
use super::returning::{self_disjoint_margin, ReturningWitness, Sign};
use crate::error::{Error, Result};
use crate::lift::{iterate, LiftMap, LiftPoint};

/// `f~^m(U + from) cap (U + to) != {}`, witnessed by `point -> image`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: i64,
    pub to: i64,
    pub m: usize,
    pub point: LiftPoint<f64>,
    pub image: LiftPoint<f64>,
}

/// Disks `U + t_1, ..., U + t_n` (all translates of one base disk, so pairwise
/// equal or disjoint) with a link from each disk to the next; periodic chains
/// also link the last disk back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskChain {
    pub base: Rect,
    pub translations: Vec<i64>,
    pub links: Vec<ChainLink>,
    pub periodic: bool,
}

impl DiskChain {
    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    pub fn disks(&self) -> Vec<Rect> {
        self.translations.iter().map(|&t| self.base.translate(t)).collect()
    }
}

fn link(w: &ReturningWitness, from: i64) -> ChainLink {
    ChainLink { from, to: from + w.k, m: w.n, point: w.point.translate(from), image: w.image.translate(from) }
}

/// With `f~^n1(U) cap (U + k1)` and `f~^n2(U) cap (U - k2)` nonempty (`k1, k2 > 0`),
/// the chain `U + k1, U + 2 k1, ..., U + k2 k1, U + (k1 - 1) k2, ..., U + k2, U`
/// closes up: `k2` positive steps followed by `k1` negative ones.
pub fn assemble_periodic_chain(pos: &ReturningWitness, neg: &ReturningWitness) -> Result<DiskChain> {
    if pos.disk != neg.disk {
        return Err(Error::LinkVerificationFailed("witnesses have different base disks".into()));
    }
    if pos.sign != Sign::Positive || neg.sign != Sign::Negative || pos.k <= 0 || neg.k >= 0 {
        return Err(Error::LinkVerificationFailed("need one positive and one negative witness".into()));
    }
    let (k1, k2) = (pos.k, -neg.k);
    if k1 + k2 > 10_000 {
        return Err(Error::LinkVerificationFailed(format!("chain of length {} is too long", k1 + k2)));
    }
    let mut translations = Vec::new();
    let mut links = Vec::new();
    let mut at = 0;
    for _ in 0..k2 {
        links.push(link(pos, at));
        at += k1;
        translations.push(at);
    }
    for _ in 0..k1 {
        links.push(link(neg, at));
        at -= k2;
        translations.push(at);
    }
    debug_assert_eq!(at, 0);
    // list the chain starting at U + k1, closing through U
    let first = links.remove(0);
    links.push(first);
    Ok(DiskChain { base: pos.disk, translations, links, periodic: true })
}

/// Replays every link of the chain by direct iteration.
pub fn verify_chain<M: LiftMap<f64> + ?Sized>(m: &M, c: &DiskChain) -> Result<()> {
    let fail = |msg: String| Err(Error::LinkVerificationFailed(msg));
    if c.is_empty() || !c.base.is_valid() {
        return fail("empty chain".into());
    }
    if c.base.width() >= 1.0 {
        return fail("translates of the base disk overlap".into());
    }
    if !(self_disjoint_margin(m, &c.base) > 0.0) {
        return fail("sampled f(U) meets U".into());
    }
    let expected = if c.periodic { c.len() } else { c.len() - 1 };
    if c.links.len() != expected {
        return fail(format!("{} links for {} disks", c.links.len(), c.len()));
    }
    let tol = m.exactness().equivariance_tol();
    for (i, l) in c.links.iter().enumerate() {
        let (from, to) = (c.translations[i], c.translations[(i + 1) % c.len()]);
        if (l.from, l.to) != (from, to) {
            return fail(format!("link {i} joins U{:+} to U{:+}, expected U{from:+} to U{to:+}", l.from, l.to));
        }
        if l.m == 0 {
            return fail(format!("link {i} has zero exponent"));
        }
        if !c.base.translate(from).contains_strictly(l.point) {
            return fail(format!("link {i}: point is not in U{from:+}"));
        }
        let img = iterate(m, l.point, l.m as i64).map_err(|e| Error::LinkVerificationFailed(e.to_string()))?;
        if img.dist(l.image) > tol {
            return fail(format!("link {i}: recomputed image differs from the record"));
        }
        if !c.base.translate(to).contains_strictly(img) {
            return fail(format!("link {i}: image is not in U{to:+}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn witness(k: i64) -> ReturningWitness {
        let disk = Rect { x0: 0.1, x1: 0.2, y0: 0.4, y1: 0.5 };
        let point = LiftPoint::new(0.15, 0.45);
        ReturningWitness {
            disk,
            n: 3,
            k,
            point,
            image: point.translate(k),
            sign: Sign::of(k).unwrap(),
        }
    }

    #[test]
    fn construction_order() {
        let c = assemble_periodic_chain(&witness(2), &witness(-3)).unwrap();
        assert_eq!(c.translations, vec![2, 4, 6, 3, 0]);
        assert_eq!(c.len(), 5);
        assert_eq!(c.links.last().unwrap().from, 0);
        assert_eq!(c.links.last().unwrap().to, 2);
        let unit = assemble_periodic_chain(&witness(1), &witness(-1)).unwrap();
        assert_eq!(unit.translations, vec![1, 0]);
    }

    #[test]
    fn mismatched_bases_rejected() {
        let mut other = witness(-1);
        other.disk.x1 = 0.3;
        assert!(matches!(
            assemble_periodic_chain(&witness(1), &other),
            Err(Error::LinkVerificationFailed(_))
        ));
        assert!(assemble_periodic_chain(&witness(-1), &witness(1)).is_err());
    }
}
