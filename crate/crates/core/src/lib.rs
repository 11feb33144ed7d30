//! Thermodynamic formalism for countable-branch expanding interval maps.

pub mod error;
pub mod infinity;
pub mod maps;
pub mod measure;
pub mod perron;
pub mod potential;
pub mod shift;
pub mod spectrum;
pub mod suspension;
pub mod thermo;

pub use error::{Error, Result};
pub use maps::{MapFamily, MapSystem};
pub use measure::MarkovMeasure;
pub use potential::Potential;
pub use shift::{FiniteSubshift, Symbol, TransitionRule, Word};
