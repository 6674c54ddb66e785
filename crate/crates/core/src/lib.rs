//! Granular-rectangle federated learning.
//!
//! Images are compressed into graphs of purity/variance-constrained
//! rectangles ([`granulation`], [`graph`]), classified by a small GCN
//! ([`nn`]) trained across simulated clients with a proximal local objective
//! ([`federation`]), and evaluated for privacy against gradient-inversion
//! attacks ([`attack`]) together with efficiency and utility ([`metrics`]).

pub mod attack;
pub mod bench;
pub mod cli;
pub mod data;
pub mod federation;
pub mod granulation;
pub mod graph;
pub mod metrics;
pub mod nn;
