//! Quaternionic S-functional calculus on matrices and periodic grids.
//!
//! The crate covers quaternion arithmetic and slice functions, the
//! S-spectrum and S-resolvents of quaternionic matrices, the contour-integral
//! functional calculus, fractional powers by several independent routes, the
//! fractional power of the quaternionic nabla operator on a periodic 3-D
//! grid, and the fractional heat equation built on top of it.

pub mod acceptance;
pub mod calculus;
pub mod contour;
pub mod error;
pub mod expr;
pub mod field;
pub mod frac_power;
pub mod heat;
pub mod nabla;
pub mod quad;
pub mod qmatrix;
pub mod quat;
pub mod random;
pub mod report;
pub mod slice_fn;

pub use calculus::{FunCalcResult, SpectralMappingReport};
pub use contour::{ContourArc, ContourSpec};
pub use error::{Error, Result};
pub use field::{SpectralField, Wavenumbers};
pub use frac_power::{KomatsuForm, PowerMethod, PowerResult, SectorialReport};
pub use quad::{Endpoint, QuadOutcome, QuadSpec, Tail};
pub use heat::{EvolutionConfig, HeatForm, InitialCondition, LogGridOperator, NormRow, Scheme, SimulationConfig};
pub use nabla::{NablaProbe, Splitting, Symbol, SymbolTable};
pub use qmatrix::{ComplexAdjointMatrix, QMatrixOperator, SpectralSphere};
pub use quat::{Quaternion, SlicePoint};
pub use slice_fn::{Domain, IntrinsicSliceFunction, LeftSliceFunction, RightSliceFunction};
