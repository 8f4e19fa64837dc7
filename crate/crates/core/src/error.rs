use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tolerance must be positive and finite (rel {rel_eps}, abs {abs_eps})")]
    InvalidTolerance { rel_eps: f64, abs_eps: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("algebra does not contain the identity")]
    NotUnital,
    #[error("span is not closed under products and adjoints (residual {residual:.3e})")]
    NotClosed { residual: f64 },
    #[error("structure recovery failed after {attempts} attempts")]
    StructureRecoveryFailed { attempts: usize },
    #[error("element is not in the algebra (residual {residual:.3e})")]
    NotInAlgebra { residual: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("projections are not Murray-von Neumann equivalent")]
    NotEquivalent,
    #[error("inclusion violated: {0}")]
    InclusionViolated(String),
    #[error("algebra is not abelian")]
    NotAbelian,
    #[error("element is not in the module (residual {residual:.3e})")]
    NotInModule { residual: f64 },
    #[error("span is not a submodule of the form pNe (residual {residual:.3e})")]
    NotASubmodule { residual: f64 },
    #[error("map is not linear over the centre (residual {residual:.3e})")]
    NotZLinear { residual: f64 },
    #[error("map is not a left multiplication (residual {residual:.3e})")]
    NotLeftMultiplication { residual: f64 },
    #[error("element is not a partial isometry with the required support (residual {residual:.3e})")]
    NotAPartialIsometry { residual: f64 },
    #[error("element does not lie in the compressed corner p2 N p1")]
    NotCompressed,
    #[error("character patterns of the two representations differ")]
    CharacterMismatch,
    #[error("operator does not intertwine the central actions (residual {residual:.3e})")]
    NotIntertwiner { residual: f64 },
    #[error("state is not faithful")]
    NotFaithful,
    #[error("vector is not cyclic (span dimension {span} of {dim})")]
    NotCyclic { span: usize, dim: usize },
    #[error("randomized search exhausted after {attempts} attempts")]
    SearchExhausted { attempts: usize },
    #[error("algebra is not in standard form (block n={n}, m={m})")]
    NotStandard { n: usize, m: usize },
    #[error("hypothesis failed: {name} residual {residual:.3e}")]
    HypothesisFailed { name: String, residual: f64 },
    #[error("module maps have incompatible modules")]
    IncompatibleModules,
}

pub type Result<T> = std::result::Result<T, Error>;
