pub mod ablate;
pub mod eval;
pub mod rank;
pub mod stats;
pub mod synth;
