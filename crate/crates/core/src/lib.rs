pub mod cases;
pub mod central;
pub mod dmp;
pub mod error;
pub mod hyper;
pub mod mesh;
pub mod tensor;

pub use cases::{CaseName, CaseSpec, TensorField};
pub use dmp::{DmpInterval, MinimalMeshOperator, StencilCoeffs, ThresholdPair};
pub use error::{Error, Result};
pub use hyper::{solve_steady, ConvergenceHistory, HyperScheme, SolverConfig, SourceSolve};
pub use mesh::{DmpReport, FieldState, GridSpec, NodeRole};
pub use tensor::DiffusionTensor;
