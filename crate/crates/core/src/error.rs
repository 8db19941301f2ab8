use alloc::string::String;

/// Errors raised by validation and by bounded searches.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("atom lists differ")]
    AtomMismatch,
    #[error("map undefined on support atom {0}")]
    UndefinedMap(String),
    #[error("reduction {arrow} is not measure preserving at atom {atom}")]
    NotMeasurePreserving { arrow: String, atom: String },
    #[error("arrows {first} and {second} do not commute at atom {atom}")]
    NotCommuting {
        first: String,
        second: String,
        atom: String,
    },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("shape is not complete")]
    NotComplete,
    #[error("two-fan is not minimal")]
    NotMinimal,
    #[error("atom {0} has zero weight")]
    ZeroWeight(String),
    #[error("distribution is not on the lattice with denominator {0}")]
    OffLattice(u64),
    #[error("{what} exceeds budget: {size} > {cap}")]
    Budget {
        what: &'static str,
        size: u128,
        cap: u128,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = core::result::Result<T, Error>;
