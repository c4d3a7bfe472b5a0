//! Numerical engine for two-scale-in-space homogenization of nonlinear
//! monotone elliptic operators with Orlicz-type growth: N-function calculus,
//! mean values and weak reiterated convergence testing, nested periodic cell
//! problems with effective-flux upscaling, fine-scale and macroscopic solvers,
//! and a convergence-study harness.

pub mod cell;
pub mod coeff;
pub mod config;
pub mod error;
pub mod fields;
pub mod halton;
pub mod linalg;
pub mod meanvalue;
pub mod mesh;
pub mod nfunc;
pub mod quad;
pub mod scalar;
pub mod solver;
pub mod study;
pub mod trig;

pub use error::{Error, Result};
pub use scalar::Real;

// Concrete f64 aliases for downstream binaries.
pub type Scalar = f64;
pub type NFunction64 = nfunc::NFunction<Scalar>;
pub type GrowthReport64 = nfunc::GrowthReport<Scalar>;
pub type Mesh64 = mesh::Mesh<Scalar>;
pub type Field64 = mesh::Field<Scalar>;
pub type MultiscaleField64 = fields::MultiscaleField<Scalar>;
pub type AlgebraRep64 = meanvalue::AlgebraRep<Scalar>;
pub type TrigPoly64 = trig::TrigPoly<Scalar>;
pub type Coefficient64 = coeff::Coefficient<Scalar>;
pub type HypothesisReport64 = coeff::HypothesisReport<Scalar>;
pub type CellSolution64 = cell::CellSolution<Scalar>;
pub type FluxTable64 = cell::FluxTable<Scalar>;
pub type EllipticProblem64 = solver::EllipticProblem<Scalar>;
pub type SolveReport64 = solver::SolveReport<Scalar>;
pub type ProblemConfig64 = config::ProblemConfig;
pub type ConvergenceTable64 = study::ConvergenceTable<Scalar>;
