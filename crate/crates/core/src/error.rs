use thiserror::Error;

use crate::shift::Symbol;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation too small: every symbol of {{1..{k}}} was pruned")]
    TruncationTooSmall { k: usize },

    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("word {word:?} is not admissible")]
    NotAdmissible { word: Vec<Symbol> },

    #[error("symbol {symbol} is not in the truncated alphabet")]
    UnknownSymbol { symbol: Symbol },

    #[error("non-Markov branch layout: image of branch {from} partially covers branch {to}")]
    NonMarkov { from: Symbol, to: Symbol },

    #[error("invalid map definition: {0}")]
    InvalidMap(String),

    #[error("matrix is reducible: closed class {closed_class:?} is a proper subset")]
    Reducible { closed_class: Vec<Symbol> },

    #[error("invalid stochastic data: {0}")]
    InvalidStochastic(String),

    #[error("zero roof value on cylinder {word:?}; use a base l with 1/l < log(zeta) or a larger block length")]
    ZeroRoof { word: Vec<Symbol> },

    #[error("translation by {offset} leaves the admissible set at edge ({from}, {to})")]
    TranslationNotAdmissible {
        offset: usize,
        from: Symbol,
        to: Symbol,
    },

    #[error("count overflow while enumerating cylinders of length {length}")]
    CountOverflow { length: usize },

    #[error("constraints are infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported for this map family: {0}")]
    Unsupported(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
