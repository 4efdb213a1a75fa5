//! Requirement falsification for closed-loop cyber-physical systems.
//!
//! The crate bundles an STL robustness monitor ([`stl`]), a t-way covering
//! array generator ([`covering`]), a deterministic desk-scale driving
//! simulator with a surrogate perception model ([`sim`]), the search
//! strategies that drive it ([`falsify`]), and experiment orchestration
//! ([`experiment`]).

pub mod covering;
pub mod experiment;
pub mod falsify;
pub mod par;
pub mod sim;
pub mod stl;
pub mod trace;
