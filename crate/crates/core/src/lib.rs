//! Temporal structural equation models: simulation, ultimately periodic
//! computations, past-and-future LTL with interventions, equivalence
//! testing and compilation of delayed equations.

pub mod delays;
pub mod doc;
pub mod engine;
pub mod equivalence;
pub mod lexer;
pub mod logic;
pub mod model;
pub mod trace;
