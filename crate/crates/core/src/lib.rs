//! Inverse-optimal synthesis and numerical verification for low-order
//! control-affine systems.
//!
//! The pipeline is: describe a [`model::Problem`], pick a cost block with
//! [`synth::select_cost`], synthesize a [`synth::SynthesisResult`], then check
//! it with [`verify::verify_all`] or simulate it with [`sim::integrate`].

pub mod domain;
pub mod expr;
pub mod model;
pub mod par;
pub mod plot;
pub mod registry;
pub mod sim;
pub mod synth;
pub mod verify;
