//! Continuous-variable toric code with Gaussian graph states, anyon bookkeeping
//! and a small logical-gate language.

pub mod lattice;
pub mod wh;
pub mod gaussian;
pub mod anyons;
pub mod gates;
pub mod circuit;
pub mod verify;
