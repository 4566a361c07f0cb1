use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate lattice: b = {b} must be positive and finite")]
    DegenerateLattice { b: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("enumeration radius {radius} would produce about {estimate} points (cap {cap})")]
    RadiusTooLarge { radius: f64, estimate: usize, cap: usize },
    #[error("index {index} is beyond the {available} computed eigenvalues")]
    IndexBeyondComputed { index: usize, available: usize },
    #[error("no dual lattice point within cutoff {cutoff}")]
    EmptyBasis { cutoff: f64 },
    #[error("transform grid {grid} still aliases (tail {tail:e}); the conformal factor is too rough")]
    AliasingRisk { grid: usize, tail: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("eigenpair is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("quadrature insufficient: orthonormality residual {residual:e}")]
    QuadratureInsufficient { residual: f64 },
    #[error("first eigenvalue is indistinguishable from the kernel")]
    ZeroEigenvalue,
    #[error("lift vanishes at sample point (|F| = {norm:e})")]
    LiftVanishes { norm: f64 },
    #[error("quadrature does not resolve the map: degree residual {residual:e}")]
    QuadratureUnresolved { residual: f64 },
    #[error("target CP^{n} has even dimension; no quaternionic structure")]
    EvenAmbientDimension { n: usize },
    #[error("spinors have a common zero on the sample grid (min |F| = {min_norm:e})")]
    CommonZeroOnGrid { min_norm: f64 },
    #[error("spinors do not share one eigenvalue (spread {spread:e})")]
    MixedEigenvalues { spread: f64 },
    #[error("map is holomorphic: the anti-holomorphic differential vanishes identically")]
    HolomorphicMap,
    #[error("holomorphic curve is not linearly full: derivative flag drops rank at order {order}")]
    NotLinearlyFull { order: usize },
    #[error("spinor field is not an eigenspinor (relative residual {residual:e})")]
    NotAnEigenspinor { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
