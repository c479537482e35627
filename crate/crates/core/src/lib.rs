//! Learning a positive-semidefinite metric inside kernel ridge regression.
//!
//! The kernel `k_Σ(x, x') = φ((x - x')ᵀ Σ (x - x'))` (or `ψ(xᵀ Σ x')` for
//! inner-product kernels) is fitted jointly with a ridge-regularized predictor
//! and an intercept. For fixed `Σ` the predictor has a closed form, which
//! leaves an objective `J_n(Σ)` over the PSD cone. This crate provides
//!
//! - [`spectral`]: symmetric eigendecomposition, PSD projections, rank and subspace diagnostics;
//! - [`kernels`]: radial and inner-product kernel families, Gram matrices, the gradient contraction;
//! - [`krr`]: the closed-form ridge fit, `J_n(Σ)` and its gradient;
//! - [`optimizer`]: projected gradient descent with Armijo backtracking;
//! - [`scenarios`]: synthetic regression problems with known central mean subspace;
//! - [`harness`]: sweeps over `λ` and replicates, CSV records and SVG reports.
//!
//! The minimizer of `J_n` tends to have rank at most the dimension of the
//! central mean subspace without any explicit low-rank penalty; the harness
//! measures how often that happens.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod krr;
pub mod optimizer;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
pub use kernels::{InnerProductProfile, KernelSpec, RadialProfile};
pub use krr::{Dataset, KrrFit};
pub use optimizer::{PgdConfig, PgdStatus, PgdTrace};
pub use scenarios::{CovariateLaw, FnId, GroundTruth, ScenarioSpec};
pub use spectral::{MetricMatrix, SpectralDecomposition, SymMatrix};
