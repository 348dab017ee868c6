//! Approximate entropy measure-valued solutions of hyperbolic conservation
//! laws: entropy-stable schemes, perturbed ensembles and Young-measure
//! statistics.

pub mod ensemble;
pub mod grid;
pub mod models;
pub mod oracles;
pub mod presets;
pub mod randfield;
pub mod schemes;
pub mod sum;
pub mod ymstats;
