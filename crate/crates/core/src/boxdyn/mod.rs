//! Set-oriented dynamics on dyadic boxes of the fundamental domain.
//!
//! Images of boxes are enclosed by sampling (a 3 x 3 interior grid per box)
//! and inflating by a radius, half a box diagonal by default. This is a
//! sampled enclosure, not a rigorous one; the returning-disk and chain
//! witnesses are checked point by point instead.

pub mod chain;
pub mod graph;
pub mod grid;
pub mod returning;
pub mod window;

pub use chain::{assemble_periodic_chain, verify_chain, ChainLink, DiskChain};
pub use graph::{
    build_box_graph, chain_recurrent_boxes, omega_limit_boxes, BoxGraph, BoxImage, Edge, GraphParams,
    DEFAULT_KMAX, DEFAULT_SAMPLES,
};
pub use grid::{Band, BoxId, BoxSet, Grid, Rect};
pub use returning::{
    find_returning_disk, find_returning_disk_in, pull_back_returning, self_disjoint_margin, verify_witness,
    ReturningOutcome, ReturningWitness, Sign, WitnessCheck, DEFAULT_HORIZON,
};
pub use window::{
    attractor_boxes, component_count, construct_invariant_annulus, fill_columns, grow_window, seed_box,
    separates_boundaries, verify_window, AttractorReport, GrowOutcome, InvariantAnnulus, WindowReport,
};
