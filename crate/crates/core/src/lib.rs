//! Relaxation-limited polarization and coherence transfer between two coupled
//! spins 1/2.
//!
//! * [`spin`]: product-operator states and the free/rf generators.
//! * [`bounds`]: closed-form efficiency limits and their composites.
//! * [`synth`]: synthesis of the optimal (CROP) rf waveform.
//! * [`propagate`]: full master-equation simulation of pulse programs.
//! * [`baselines`]: INEPT, CRIPT and CRINEPT transfer blocks.
//! * [`oracle`]: brute-force and gradient checks of the bound on the reduced system.
//! * [`report`]: CSV/JSON writers shared by the binary and the examples.
//! * [`cli`]: the `crop` command-line front end.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod propagate;
pub mod report;
pub mod spin;
pub mod synth;

pub use bounds::{compute_bound, compute_composite_bounds, CompositeBounds, RateSet, TransferBound};
pub use error::{Error, Result};
pub use spin::{Operator, ProductOperatorState, Spin, SystemParams};
