//! Kernel ridge regression with an intercept at a fixed metric `Σ`.
//!
//! For fixed `Σ` the inner problem
//!
//! ```text
//! J_n(Σ) = min_{f, γ} (1/2n) Σ_i (y_i - f(x_i) - γ)² + (λ/2) ‖f‖²_{H_Σ}
//! ```
//!
//! has the solution `f = Σ_i α_i k_Σ(x_i, ·)` where `α` solves the centered
//! system `(HKH + nλI) α = Hy`, `H = I - 11ᵀ/n`, and `γ = mean(y - Kα)`.
//! At the optimum the residuals satisfy `r = nλα`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, KernelSpec, PairwiseGeometry};
use crate::optimizer::Oracle;
use crate::spectral::SymMatrix;

/// `n` samples of `p` covariates with a scalar response.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("need at least one covariate".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `(1/n) Σ (y_i - ȳ)²`.
    pub fn sample_variance(&self) -> f64 {
        let mean = self.y.mean();
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.n() as f64
    }

    /// Same responses, covariates replaced by `x`.
    pub fn with_covariates(&self, x: DMatrix<f64>) -> Result<Dataset> {
        Dataset::new(x, self.y.clone())
    }
}

/// Minimizer of the inner ridge problem for one `(Σ, λ, data)` triple.
#[derive(Clone, Debug)]
pub struct KrrFit {
    pub alpha: DVector<f64>,
    pub gamma: f64,
    pub residuals: DVector<f64>,
    pub objective: f64,
    pub lambda: f64,
}

impl KrrFit {
    /// `‖r - nλα‖_∞`; zero at an exact optimum.
    pub fn euler_lagrange_gap(&self) -> f64 {
        let n = self.alpha.len() as f64;
        (&self.residuals - &self.alpha * (n * self.lambda)).amax()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_metric(data: &Dataset, sigma: &SymMatrix) -> Result<()> {
    if sigma.dim() != data.p() {
        return Err(Error::InvalidInput(format!(
            "metric is {}x{} but data has {} covariates",
            sigma.dim(),
            sigma.dim(),
            data.p()
        )));
    }
    if !sigma.is_finite() {
        return Err(Error::InvalidInput("metric has non-finite entries".into()));
    }
    Ok(())
}

/// Solves the ridge problem for a given Gram matrix.
fn fit_gram(k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<KrrFit> {
    let n = y.len();
    let nf = n as f64;
    if y.iter().all(|&v| v == y[0]) {
        return Ok(KrrFit {
            alpha: DVector::zeros(n),
            gamma: y[0],
            residuals: DVector::zeros(n),
            objective: 0.0,
            lambda,
        });
    }

    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let grand_mean = row_means.iter().sum::<f64>() / nf;
    let ridge = nf * lambda;
    // K is symmetric, so its column means equal its row means.
    let system = DMatrix::from_fn(n, n, |i, j| {
        let centered = k[(i, j)] - row_means[i] - row_means[j] + grand_mean;
        if i == j {
            centered + ridge
        } else {
            centered
        }
    });
    let y_mean = y.mean();
    let hy = y.map(|v| v - y_mean);

    let chol = Cholesky::new(system.clone()).ok_or_else(|| {
        let diag = system.diagonal();
        Error::NumericalFailure(format!(
            "Cholesky factorization of the centered ridge system failed \
             (n={n}, nλ={ridge:e}, diagonal range [{:e}, {:e}], max |K|={:e})",
            diag.min(),
            diag.max(),
            k.amax()
        ))
    })?;
    let mut alpha = chol.solve(&hy);
    // One step of iterative refinement.
    let correction = chol.solve(&(&hy - &system * &alpha));
    alpha += correction;

    let k_alpha = k * &alpha;
    let fitted = &y.clone() - &k_alpha;
    let gamma = fitted.mean();
    let residuals = fitted.map(|v| v - gamma);
    let penalty = alpha.dot(&k_alpha);
    let objective = residuals.norm_squared() / (2.0 * nf) + 0.5 * lambda * penalty;
    if !objective.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "non-finite objective (max |K|={:e})",
            k.amax()
        )));
    }
    Ok(KrrFit {
        alpha,
        gamma,
        residuals,
        objective,
        lambda,
    })
}

/// Closed-form ridge fit with intercept at metric `sigma`.
pub fn fit(kernel: &KernelSpec, data: &Dataset, sigma: &SymMatrix, lambda: f64) -> Result<KrrFit> {
    check_lambda(lambda)?;
    check_metric(data, sigma)?;
    let geometry = PairwiseGeometry::compute(kernel, data.x(), sigma)?;
    fit_gram(&geometry.gram(kernel), data.y(), lambda)
}

/// `J_n(Σ)`.
pub fn objective(kernel: &KernelSpec, data: &Dataset, sigma: &SymMatrix, lambda: f64) -> Result<f64> {
    Ok(fit(kernel, data, sigma, lambda)?.objective)
}

/// `J_n(Σ)` and `∇J_n(Σ)` from one Gram build and one factorization.
pub fn objective_and_gradient(
    kernel: &KernelSpec,
    data: &Dataset,
    sigma: &SymMatrix,
    lambda: f64,
) -> Result<(f64, SymMatrix)> {
    let (fit, gradient) = fit_and_gradient(kernel, data, sigma, lambda)?;
    Ok((fit.objective, gradient))
}

pub fn fit_and_gradient(
    kernel: &KernelSpec,
    data: &Dataset,
    sigma: &SymMatrix,
    lambda: f64,
) -> Result<(KrrFit, SymMatrix)> {
    check_lambda(lambda)?;
    check_metric(data, sigma)?;
    let geometry = PairwiseGeometry::compute(kernel, data.x(), sigma)?;
    let fit = fit_gram(&geometry.gram(kernel), data.y(), lambda)?;
    let gradient = if fit.residuals.iter().all(|&v| v == 0.0) {
        SymMatrix::zeros(data.p())
    } else {
        geometry.contraction(kernel, data.x(), &fit.residuals, lambda)
    };
    Ok((fit, gradient))
}

/// Predictions `K_new α + γ` at new points.
pub fn predict(
    fit: &KrrFit,
    kernel: &KernelSpec,
    sigma: &SymMatrix,
    x_train: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if x_train.nrows() != fit.alpha.len() {
        return Err(Error::InvalidInput(format!(
            "fit has {} coefficients but x_train has {} rows",
            fit.alpha.len(),
            x_train.nrows()
        )));
    }
    if x_new.ncols() != x_train.ncols() {
        return Err(Error::InvalidInput(format!(
            "x_new has {} columns, x_train has {}",
            x_new.ncols(),
            x_train.ncols()
        )));
    }
    let k_new = cross_gram(kernel, x_new, x_train, sigma)?;
    Ok((k_new * &fit.alpha).add_scalar(fit.gamma))
}

/// `Σ ↦ (J_n(Σ), ∇J_n(Σ))` for a fixed kernel, dataset and `λ`.
#[derive(Clone, Copy, Debug)]
pub struct KrrOracle<'a> {
    pub kernel: &'a KernelSpec,
    pub data: &'a Dataset,
    pub lambda: f64,
}

impl Oracle for KrrOracle<'_> {
    fn evaluate(&self, sigma: &SymMatrix) -> Result<(f64, SymMatrix)> {
        objective_and_gradient(self.kernel, self.data, sigma, self.lambda)
    }
}
