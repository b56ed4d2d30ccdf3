//! Sparse identification of the governing ODE from (voltage, displacement)
//! trajectories: finite-difference rates, a monomial candidate library, and
//! sparse regressors over it.

mod derivative;
mod lasso;
mod library;
mod model;
mod stlsq;

pub use derivative::{differentiate, estimate_derivative};
pub use lasso::lasso;
pub use library::{
    build_library, build_library_with_rates, enumerate_monomials, LibraryConfig,
    RegressionProblem, StageTwoSignals,
};
pub use model::{render_equations, FitDiagnostics, FitMethod, SparseModel, STATE_SYMBOLS};
pub use stlsq::{stlsq, DEFAULT_MAX_ITER, DEFAULT_THRESHOLD};
