//! Finite-difference gradient check and the sharpness certificate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::krr::{objective, objective_and_gradient, Dataset};
use crate::scenarios::GroundTruth;
use crate::spectral::{eigh, SymMatrix};

/// Entries of the analytic gradient smaller than this fraction of its largest
/// entry are compared on that absolute scale rather than relative to themselves.
pub const GRADCHECK_RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// `(i, j)` of the worst entry.
    pub worst_entry: (usize, usize),
    pub analytic: SymMatrix,
    pub finite_difference: SymMatrix,
}

/// Compares `⟨∇J_n(Σ), E_ij⟩` with the central difference of `J_n` along
/// `E_ij = (e_i e_jᵀ + e_j e_iᵀ)/2` for every `i ≤ j`.
///
/// The error for each entry is `|fd - an| / max(|fd|, |an|, 1e-3·‖∇J_n‖_max)`.
/// Both `Σ ± step·E_ij` must stay PSD, so `λ_min(Σ)` has to exceed `step`.
pub fn gradient_check_detailed(
    kernel: &KernelSpec,
    data: &Dataset,
    sigma: &SymMatrix,
    lambda: f64,
    step: f64,
) -> Result<GradientCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    let min_eigenvalue = eigh(sigma)?.min_eigenvalue();
    if min_eigenvalue <= step {
        return Err(Error::BoundaryProximity {
            step,
            min_eigenvalue,
        });
    }
    let (_, analytic) = objective_and_gradient(kernel, data, sigma, lambda)?;
    let p = sigma.dim();
    let floor = GRADCHECK_RELATIVE_FLOOR * analytic.max_abs();
    let mut fd = DMatrix::zeros(p, p);
    let mut worst = (0.0, (0, 0));
    for i in 0..p {
        for j in i..p {
            let mut dir = DMatrix::zeros(p, p);
            dir[(i, j)] += 0.5;
            dir[(j, i)] += 0.5;
            let dir = SymMatrix::symmetrized(dir) * step;
            let plus = objective(kernel, data, &(sigma + &dir), lambda)?;
            let minus = objective(kernel, data, &(sigma - &dir), lambda)?;
            let slope = (plus - minus) / (2.0 * step);
            fd[(i, j)] = slope;
            fd[(j, i)] = slope;
            let an = analytic.get(i, j);
            let denom = slope.abs().max(an.abs()).max(floor);
            let err = if denom == 0.0 { 0.0 } else { (slope - an).abs() / denom };
            if err > worst.0 {
                worst = (err, (i, j));
            }
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst.0,
        worst_entry: worst.1,
        analytic,
        finite_difference: SymMatrix::symmetrized(fd),
    })
}

/// Maximum relative error between the analytic gradient and central differences.
pub fn gradient_check(
    kernel: &KernelSpec,
    data: &Dataset,
    sigma: &SymMatrix,
    lambda: f64,
    step: f64,
) -> Result<f64> {
    Ok(gradient_check_detailed(kernel, data, sigma, lambda, step)?.max_relative_error)
}

/// `λ_min(Bᵀ ∇J B)` for an orthonormal basis `B` of the orthocomplement of `S*`.
/// A positive value certifies that the gradient pushes every direction outside
/// `S*` back to zero.
pub fn sharpness_certificate(gradient: &SymMatrix, truth: &GroundTruth) -> Result<f64> {
    if gradient.dim() != truth.ambient_dim() {
        return Err(Error::InvalidInput(format!(
            "gradient is {}x{} but the subspace lives in dimension {}",
            gradient.dim(),
            gradient.dim(),
            truth.ambient_dim()
        )));
    }
    if truth.dim() >= truth.ambient_dim() {
        return Err(Error::NotApplicable(
            "the central mean subspace is the whole space; its complement is empty".into(),
        ));
    }
    let basis = truth.complement_basis()?;
    Ok(eigh(&gradient.congruence(&basis)?)?.min_eigenvalue())
}
