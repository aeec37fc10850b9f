//! Translation-labeled transition graph on grid boxes.

use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{BoxSet, Grid, Rect};
use crate::error::Result;
use crate::lift::{LiftMap, LiftPoint};

pub const DEFAULT_SAMPLES: usize = 3;
pub const DEFAULT_KMAX: i64 = 8;

/// Edge `B -> B' + k`: the inflated sampled image of `B` meets `B' + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    pub k: i64,
}

/// Sampled image enclosure of one box.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxImage {
    pub edges: Vec<Edge>,
    /// Part of the image left the region, or the map failed on a sample.
    pub exits: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub inflation: f64,
    pub samples_per_side: usize,
    pub kmax: i64,
}

impl GraphParams {
    pub fn defaults(grid: &Grid) -> Self {
        Self { inflation: grid.default_inflation(), samples_per_side: DEFAULT_SAMPLES, kmax: DEFAULT_KMAX }
    }
}

/// Covering boxes of `f~(B)` for one box `B`.
pub fn box_image<M: LiftMap<f64> + ?Sized>(m: &M, grid: &Grid, rect: &Rect, params: &GraphParams) -> BoxImage {
    let mut hits = Vec::new();
    let mut exits = false;
    for z in rect.samples(params.samples_per_side) {
        match m.apply(z) {
            Ok(w) => exits |= !grid.cover(w, params.inflation, &mut hits),
            Err(_) => exits = true,
        }
    }
    let before = hits.len();
    hits.retain(|&(_, k)| k.abs() <= params.kmax);
    exits |= hits.len() < before;
    let edges: BTreeSet<Edge> = hits.into_iter().map(|(to, k)| Edge { to, k }).collect();
    BoxImage { edges: edges.into_iter().collect(), exits }
}

/// Sampled images of every region box, computed in parallel and stored in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGraph {
    pub grid: Grid,
    pub params: GraphParams,
    pub images: Vec<BoxImage>,
}

impl BoxGraph {
    /// Position of a grid index among the region boxes.
    pub fn node(&self, index: usize) -> Option<usize> {
        if !self.grid.in_region(index) {
            return None;
        }
        let n = self.grid.n() as usize;
        Some(index - self.grid.row_range().start as usize * n)
    }

    pub fn index(&self, node: usize) -> usize {
        node + self.grid.row_range().start as usize * self.grid.n() as usize
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn edges(&self, index: usize) -> &[Edge] {
        self.node(index).map(|v| self.images[v].edges.as_slice()).unwrap_or(&[])
    }

    pub fn has_edge(&self, from: usize, to: usize, k: i64) -> bool {
        self.edges(from).binary_search(&Edge { to, k }).is_ok()
    }

    /// Largest label magnitude present.
    pub fn max_label(&self) -> i64 {
        self.images.iter().flat_map(|b| b.edges.iter().map(|e| e.k.abs())).max().unwrap_or(0)
    }

    /// Strongly connected components of the unlabeled graph, as grid indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.len(), 0);
        let nodes: Vec<_> = (0..self.len()).map(|_| g.add_node(())).collect();
        for (v, img) in self.images.iter().enumerate() {
            let mut last = None;
            for e in &img.edges {
                if last == Some(e.to) {
                    continue;
                }
                last = Some(e.to);
                if let Some(w) = self.node(e.to) {
                    g.add_edge(nodes[v], nodes[w], ());
                }
            }
        }
        tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|n| self.index(n.index())).collect();
                c.sort_unstable();
                c
            })
            .collect()
    }

    /// Components that carry a cycle (size above one, or a self loop).
    pub fn recurrent_components(&self) -> Vec<Vec<usize>> {
        let mut comps: Vec<_> = self
            .components()
            .into_iter()
            .filter(|c| c.len() > 1 || self.edges(c[0]).iter().any(|e| e.to == c[0]))
            .collect();
        comps.sort();
        comps
    }
}

pub fn build_box_graph<M: LiftMap<f64> + ?Sized>(m: &M, grid: Grid, params: GraphParams) -> Result<BoxGraph> {
    let idx: Vec<usize> = grid.indices().collect();
    let images = idx.par_iter().map(|&i| box_image(m, &grid, &grid.rect(i), &params)).collect();
    Ok(BoxGraph { grid, params, images })
}

/// Union of the recurrent strongly connected components; an outer
/// approximation of the nonwandering set at this resolution.
pub fn chain_recurrent_boxes(g: &BoxGraph) -> BoxSet {
    let mut out = BoxSet::empty(&g.grid);
    out.indices.extend(g.recurrent_components().into_iter().flatten());
    out
}

/// Boxes visited by `f~^n(p)` for `transient < n <= horizon`; the flag is set
/// when the orbit failed or left the region.
pub fn omega_limit_boxes<M: LiftMap<f64> + ?Sized>(
    m: &M,
    grid: &Grid,
    p: LiftPoint<f64>,
    transient: usize,
    horizon: usize,
) -> (BoxSet, bool) {
    let mut out = BoxSet::empty(grid);
    if horizon <= transient {
        return (out, true);
    }
    let mut z = p;
    for n in 1..=horizon {
        z = match m.apply(z) {
            Ok(w) => w,
            Err(_) => return (BoxSet::empty(grid), true),
        };
        if n > transient {
            match grid.locate(z) {
                Some((i, _)) => {
                    out.indices.insert(i);
                }
                None => return (BoxSet::empty(grid), true),
            }
        }
    }
    (out, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxdyn::grid::Band;
    use crate::zoo::{make_map, MapVariant, Twist};

    fn graph(v: MapVariant, d: u32, lo: f64, hi: f64) -> BoxGraph {
        let m = make_map::<f64>(&v).unwrap();
        let grid = Grid::new(d, Band::new(lo, hi).unwrap()).unwrap();
        build_box_graph(&m, grid, GraphParams::defaults(&grid)).unwrap()
    }

    #[test]
    fn rigid_labels() {
        let g = graph(MapVariant::Rigid { alpha: 0.25, lambda: 0.5 }, 5, 0.0, 1.0);
        assert!(g.images.iter().all(|b| !b.edges.is_empty()));
        let labels: BTreeSet<i64> = g.images.iter().flat_map(|b| b.edges.iter().map(|e| e.k)).collect();
        assert_eq!(labels, [0, 1].into());
    }

    #[test]
    fn twist_labels() {
        let m = Twist;
        let grid = Grid::new(6, Band::new(0.1, 0.9).unwrap()).unwrap();
        let g = build_box_graph(&m, grid, GraphParams::defaults(&grid)).unwrap();
        let labels: BTreeSet<i64> = g.images.iter().flat_map(|b| b.edges.iter().map(|e| e.k)).collect();
        assert_eq!(labels, [-1, 0, 1].into());
        assert_eq!(chain_recurrent_boxes(&g).len(), grid.len());
    }

    #[test]
    fn rnf_labels_both_ways() {
        let g = graph(MapVariant::Rnf { alpha: 0.05, beta: 6.0, lambda: 0.9 }, 7, 0.0, 1.0);
        assert!(g.max_label() >= 2);
        let low = g.grid.index(crate::boxdyn::grid::BoxId { row: 10, col: 0 });
        assert!(g.edges(low).iter().all(|e| e.k <= -1));
    }

    #[test]
    fn sampled_orbits_follow_edges() {
        let v = MapVariant::Pt { alpha: 0.1, gamma: 0.2, beta: 0.3, lambda: 0.7 };
        let g = graph(v, 6, 0.0, 1.0);
        let m = make_map::<f64>(&v).unwrap();
        for p in crate::lift::domain_samples::<f64>(200) {
            let q = m.apply(p).unwrap();
            let (a, ka) = g.grid.locate(p).unwrap();
            let (b, kb) = g.grid.locate(q).unwrap();
            assert!(g.has_edge(a, b, kb - ka), "no edge for {p:?}");
        }
    }

    #[test]
    fn recurrence_around_attracting_circle_thins() {
        let v = MapVariant::DissRot { alpha: 0.318, lambda: 0.9 };
        let extent = |d| {
            let cr = chain_recurrent_boxes(&graph(v, d, 0.3, 0.7));
            assert!(cr.meets(&crate::boxdyn::Rect { x0: 0.0, x1: 1.0, y0: 0.499, y1: 0.501 }));
            cr.y_extent().unwrap()
        };
        let (coarse, fine) = (extent(7), extent(9));
        assert!(coarse.0 > 0.3 && coarse.1 < 0.7, "{coarse:?}");
        assert!(fine.0 >= coarse.0 && fine.1 <= coarse.1, "{fine:?} vs {coarse:?}");
        assert!(fine.1 - fine.0 < coarse.1 - coarse.0);
    }

    #[test]
    fn omega_limit_of_pt_orbit() {
        let m = make_map::<f64>(&MapVariant::Pt { alpha: 0.0, gamma: 0.1, beta: 0.0, lambda: 0.5 }).unwrap();
        let grid = Grid::new(7, Band::full()).unwrap();
        let (set, escaped) = omega_limit_boxes(&m, &grid, LiftPoint::new(0.3, 0.6), 500, 1000);
        assert!(!escaped);
        assert_eq!(set.len(), 1);
        let r = grid.rect(*set.indices.first().unwrap());
        assert!(r.contains(LiftPoint::new(0.5, 0.5)));
    }
}
