//! Simulator for a quantum system coupled simultaneously to a continuous
//! structured bosonic reservoir and a time-discrete quantum-feedback
//! reservoir.
//!
//! The continuous reservoir is handled by an SVD-compressed matrix-product
//! realization of the discrete real-time path integral; the feedback
//! reservoir by a Liouville-space time-bin matrix-product state. The two
//! evolutions share the current system tensor through a junction leg,
//! forming a quasi-2D network that captures inter-reservoir entanglement.
//!
//! Modules:
//! - [`tensor`], [`mps`]: dense tensor algebra and matrix-product containers;
//! - [`quad`]: Gauss-Legendre quadrature;
//! - [`bath`]: spectral densities, the bath autocorrelation function, and
//!   discretized memory coefficients;
//! - [`tempo`]: augmented-density-tensor evolution under the continuous
//!   reservoir;
//! - [`feedback`]: time-bin evolution under time-delayed coherent feedback
//!   with optional Lindblad dephasing;
//! - [`quasi2d`]: the combined two-reservoir evolution;
//! - [`oracles`]: independent reference solutions used for validation;
//! - [`series`]: per-step observable records and CSV export.

pub mod bath;
pub mod error;
pub mod feedback;
pub mod mps;
pub mod oracles;
pub mod quad;
pub mod quasi2d;
pub mod series;
pub mod tempo;
pub mod tensor;

pub use error::{SimError, SimResult, TensorError, TensorResult};
pub use mps::{apply_mpo, canonicalize, swap_adjacent, Fold, MatrixProductOperator, MatrixProductState};
pub use series::{TimeSeries, TimeSeriesRow};
pub use tensor::{contract, svd_split, DenseTensor, SvdSplit, TruncationPolicy};

/// ħ/k_B in kelvin-picoseconds; temperature enters only through
/// ħω/(k_B T) with frequencies in inverse picoseconds.
pub const HBAR_OVER_KB_K_PS: f64 = 7.6382;
