//! Numerical engines: convex QP, NNLS, least squares, CMA-ES and PCA.

pub mod cmaes;
pub mod lstsq;
pub mod nnls;
pub mod pca;
pub mod qp;

pub use cmaes::{cmaes_minimize, CmaesResult, CmaesSettings, Dimension, StopReason};
pub use lstsq::{solve_least_squares, LeastSquares};
pub use nnls::{solve_nnls, Nnls};
pub use pca::{pca_fit, AffineFit};
pub use qp::{solve_qp, KktResiduals, QpError, QpProblem, QpSolution, QpStatus};
