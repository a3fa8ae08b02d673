//! Actuation-parameter synthesis for tendon-driven underactuated hands.
//!
//! Given a hand model with fixed kinematics and tendon routing plus a set of
//! desired grasps, the pipeline in [`optimize`] chooses tendon moment arms,
//! spring stiffnesses and spring preloads in three stages: torque-manifold
//! fitting, inter-tendon travel matching and intra-tendon spring balancing.
//!
//! Units throughout: rad, mm, Nmm, N.

// `!(a <= b)` is deliberate where NaN must take the failing branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contact;
pub mod designs;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod kinematics;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod report;
pub mod scalar;
pub mod solvers;
pub mod synth;

pub use error::{Diagnostic, Error, Result, Severity};
pub use model::{DesignConfig, GraspRecord, HandModel, ParamVector};
pub use scalar::Real;

pub type Mat64 = linalg::Mat<f64>;
pub type Mat32 = linalg::Mat<f32>;
pub type QpProblem64 = solvers::QpProblem<f64>;
pub type QpProblem32 = solvers::QpProblem<f32>;
pub type CmaesSettings64 = solvers::CmaesSettings<f64>;
pub type UJointGeometry64 = kinematics::UJointGeometry<f64>;
pub type UJointGeometry32 = kinematics::UJointGeometry<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
