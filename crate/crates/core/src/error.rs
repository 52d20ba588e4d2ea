use thiserror::Error;

#[derive(Debug, Error)]
pub enum IcosError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed chain file: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("too few usable strikes: {found} (need at least {required})")]
    TooFewStrikes { found: usize, required: usize },

    #[error("no strike with both call and put quotes; cannot infer the forward")]
    NoParityPair,

    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper}]")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("point {point} outside the interval [{alpha}, {beta}]")]
    OutOfInterval { point: f64, alpha: f64, beta: f64 },

    #[error("simpson's rule needs an odd number of nodes on a uniform grid, got {0}")]
    EvenSimpson(usize),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("singular regression design")]
    SingularDesign,

    #[error("non-positive degrees of freedom {nu} (n = {n}, N = {terms})")]
    DegreesOfFreedom { nu: f64, n: usize, terms: usize },

    #[error("kernel weights vanish at {0}")]
    DegenerateKernel(f64),

    #[error("refit failed at N = {terms}: {source}")]
    Refit {
        terms: usize,
        #[source]
        source: Box<IcosError>,
    },
}

pub type Result<T> = std::result::Result<T, IcosError>;
