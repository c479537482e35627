//! Kernel families parameterized by a metric `Σ`.
//!
//! Radial kernels evaluate a completely monotone profile on the squared
//! Mahalanobis-type distance, `k_Σ(x, x') = φ((x - x')ᵀ Σ (x - x'))`, with
//! `φ(z) = Σ_k w_k exp(-t_k z)`. Inner-product kernels evaluate a polynomial
//! with nonnegative coefficients on `xᵀ Σ x'`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

/// `φ(z) = Σ_k w_k exp(-t_k z)`, a finite mixture of exponentials.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    components: Vec<(f64, f64)>,
    min_rate: f64,
}

impl RadialProfile {
    /// `φ(z) = exp(-z)`.
    pub fn gaussian() -> Self {
        RadialProfile {
            components: vec![(1.0, 1.0)],
            min_rate: 1.0,
        }
    }

    /// Mixture of `(weight, rate)` pairs; every weight and rate must be positive.
    pub fn mixture(components: Vec<(f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("radial profile needs at least one component".into()));
        }
        for &(w, t) in &components {
            if !(w > 0.0 && w.is_finite()) || !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "radial component (w={w}, t={t}) must have positive finite weight and rate"
                )));
            }
        }
        let min_rate = components.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        Ok(RadialProfile {
            components,
            min_rate,
        })
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    /// Smallest rate in the mixing measure; the support is bounded away from zero by it.
    pub fn min_rate(&self) -> f64 {
        self.min_rate
    }

    pub fn value(&self, z: f64) -> f64 {
        self.components.iter().map(|&(w, t)| w * (-t * z).exp()).sum()
    }

    /// `φ'(z) = -Σ_k w_k t_k exp(-t_k z)`.
    pub fn derivative(&self, z: f64) -> f64 {
        -self
            .components
            .iter()
            .map(|&(w, t)| w * t * (-t * z).exp())
            .sum::<f64>()
    }

    /// The profile `-φ'` written as a mixture with weights `w_k t_k`.
    pub fn rate_weighted(&self) -> RadialProfile {
        RadialProfile {
            components: self.components.iter().map(|&(w, t)| (w * t, t)).collect(),
            min_rate: self.min_rate,
        }
    }
}

/// `ψ(t) = Σ_k ξ_k t^k` with `ξ_k ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductProfile {
    coefficients: Vec<f64>,
}

impl InnerProductProfile {
    /// Coefficients indexed by degree. At least one coefficient of degree ≥ 1 must be positive.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "inner-product coefficients must be nonnegative and finite".into(),
            ));
        }
        if !coefficients.iter().skip(1).any(|&c| c > 0.0) {
            return Err(Error::InvalidConfig(
                "inner-product profile needs a positive coefficient of degree >= 1".into(),
            ));
        }
        Ok(InnerProductProfile { coefficients })
    }

    /// `ψ(t) = t`.
    pub fn linear() -> Self {
        InnerProductProfile {
            coefficients: vec![0.0, 1.0],
        }
    }

    /// `ψ(t) = t³`.
    pub fn cubic() -> Self {
        InnerProductProfile {
            coefficients: vec![0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn value(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * t + k as f64 * c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KernelSpec {
    Radial(RadialProfile),
    InnerProduct(InnerProductProfile),
}

impl KernelSpec {
    pub fn gaussian() -> Self {
        KernelSpec::Radial(RadialProfile::gaussian())
    }

    pub fn linear() -> Self {
        KernelSpec::InnerProduct(InnerProductProfile::linear())
    }

    pub fn cubic() -> Self {
        KernelSpec::InnerProduct(InnerProductProfile::cubic())
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, KernelSpec::Radial(_))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Radial(r) if *r == RadialProfile::gaussian() => write!(f, "gauss"),
            KernelSpec::Radial(r) => {
                let parts: Vec<String> = r
                    .components
                    .iter()
                    .map(|(w, t)| format!("{w}:{t}"))
                    .collect();
                write!(f, "mix:{}", parts.join(","))
            }
            KernelSpec::InnerProduct(ip) if *ip == InnerProductProfile::linear() => {
                write!(f, "linear")
            }
            KernelSpec::InnerProduct(ip) if *ip == InnerProductProfile::cubic() => {
                write!(f, "cubic")
            }
            KernelSpec::InnerProduct(ip) => {
                let parts: Vec<String> = ip.coefficients.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Accepts `gauss`, `mix:w:t,w:t,...`, `linear`, `cubic` and `poly:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidConfig(format!("kernel `{s}`: {why}"));
        match s.trim() {
            "gauss" | "gaussian" => Ok(KernelSpec::gaussian()),
            "linear" => Ok(KernelSpec::linear()),
            "cubic" => Ok(KernelSpec::cubic()),
            other => {
                if let Some(rest) = other.strip_prefix("mix:") {
                    let comps = rest
                        .split(',')
                        .map(|pair| {
                            let (w, t) = pair.split_once(':').ok_or_else(|| bad("expected w:t pairs"))?;
                            let w: f64 = w.trim().parse().map_err(|_| bad("bad weight"))?;
                            let t: f64 = t.trim().parse().map_err(|_| bad("bad rate"))?;
                            Ok((w, t))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(KernelSpec::Radial(RadialProfile::mixture(comps)?))
                } else if let Some(rest) = other.strip_prefix("poly:") {
                    let coeffs = rest
                        .split(',')
                        .map(|c| c.trim().parse::<f64>().map_err(|_| bad("bad coefficient")))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(KernelSpec::InnerProduct(InnerProductProfile::new(coeffs)?))
                } else {
                    Err(bad("expected gauss, mix:<w:t,...>, linear, cubic or poly:<c0,c1,...>"))
                }
            }
        }
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn check_dims(x: &DMatrix<f64>, sigma: &SymMatrix) -> Result<()> {
    if x.ncols() != sigma.dim() {
        return Err(Error::InvalidInput(format!(
            "data has {} columns but the metric is {}x{}",
            x.ncols(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `X Σ Xᵀ`, exactly symmetric.
fn metric_inner_products(x: &DMatrix<f64>, sigma: &SymMatrix) -> DMatrix<f64> {
    let xs = x * sigma.as_matrix();
    let mut g = xs * x.transpose();
    let n = g.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

fn distances_from_inner_products(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// `d_ij = (x_i - x_j)ᵀ Σ (x_i - x_j)`, clamped at zero, with an exactly zero diagonal.
pub fn squared_metric_distances(x: &DMatrix<f64>, sigma: &SymMatrix) -> Result<DMatrix<f64>> {
    check_dims(x, sigma)?;
    Ok(distances_from_inner_products(&metric_inner_products(x, sigma)))
}

/// The pairwise quantity each family evaluates its profile on: squared
/// distances for radial kernels, inner products `xᵢᵀ Σ xⱼ` otherwise.
#[derive(Clone, Debug)]
pub(crate) struct PairwiseGeometry(DMatrix<f64>);

impl PairwiseGeometry {
    pub(crate) fn compute(kernel: &KernelSpec, x: &DMatrix<f64>, sigma: &SymMatrix) -> Result<Self> {
        check_dims(x, sigma)?;
        let g = metric_inner_products(x, sigma);
        Ok(match kernel {
            KernelSpec::Radial(_) => PairwiseGeometry(distances_from_inner_products(&g)),
            KernelSpec::InnerProduct(_) => PairwiseGeometry(g),
        })
    }

    pub(crate) fn gram(&self, kernel: &KernelSpec) -> DMatrix<f64> {
        match kernel {
            KernelSpec::Radial(phi) => self.0.map(|d| phi.value(d)),
            KernelSpec::InnerProduct(psi) => self.0.map(|s| psi.value(s)),
        }
    }

    /// `-(1/(2λn²)) Σ_ij r_i r_j ∂_Σ k_Σ(x_i, x_j)`.
    pub(crate) fn contraction(
        &self,
        kernel: &KernelSpec,
        x: &DMatrix<f64>,
        r: &DVector<f64>,
        lambda: f64,
    ) -> SymMatrix {
        let n = x.nrows();
        let scale = 1.0 / (lambda * (n * n) as f64);
        match kernel {
            KernelSpec::Radial(phi) => {
                // Σ_ij W_ij Δ_ij Δ_ijᵀ = 2 Xᵀ (D - W) X, D = diag(W 1).
                let mut lap = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut col_sum = 0.0;
                    for i in 0..n {
                        if i == j {
                            continue;
                        }
                        let w = r[i] * r[j] * phi.derivative(self.0[(i, j)]);
                        lap[(i, j)] = -w;
                        col_sum += w;
                    }
                    lap[(j, j)] = col_sum;
                }
                let c = x.transpose() * (lap * x);
                SymMatrix::symmetrized(c * (-scale))
            }
            KernelSpec::InnerProduct(psi) => {
                let w = DMatrix::from_fn(n, n, |i, j| r[i] * r[j] * psi.derivative(self.0[(i, j)]));
                let c = x.transpose() * (w * x);
                SymMatrix::symmetrized(c * (-0.5 * scale))
            }
        }
    }
}

/// Gram matrix `K_ij = k_Σ(x_i, x_j)`.
pub fn gram(kernel: &KernelSpec, x: &DMatrix<f64>, sigma: &SymMatrix) -> Result<DMatrix<f64>> {
    Ok(PairwiseGeometry::compute(kernel, x, sigma)?.gram(kernel))
}

/// Cross Gram matrix `K_ij = k_Σ(a_i, b_j)` between two point sets.
pub fn cross_gram(
    kernel: &KernelSpec,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: &SymMatrix,
) -> Result<DMatrix<f64>> {
    check_dims(a, sigma)?;
    check_dims(b, sigma)?;
    let a_sigma = a * sigma.as_matrix();
    let cross = &a_sigma * b.transpose();
    match kernel {
        KernelSpec::InnerProduct(psi) => Ok(cross.map(|s| psi.value(s))),
        KernelSpec::Radial(phi) => {
            let b_sigma = b * sigma.as_matrix();
            let norm_a: Vec<f64> = (0..a.nrows()).map(|i| a_sigma.row(i).dot(&a.row(i))).collect();
            let norm_b: Vec<f64> = (0..b.nrows()).map(|j| b_sigma.row(j).dot(&b.row(j))).collect();
            Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
                phi.value((norm_a[i] + norm_b[j] - 2.0 * cross[(i, j)]).max(0.0))
            }))
        }
    }
}

/// Gradient of `J_n` at `Σ` given the ridge residuals `r`:
/// `-(1/(2λn²)) Σ_{i,j} r_i r_j ∂_Σ k_Σ(x_i, x_j)` over all ordered pairs.
pub fn gradient_contraction(
    kernel: &KernelSpec,
    x: &DMatrix<f64>,
    sigma: &SymMatrix,
    r: &DVector<f64>,
    lambda: f64,
) -> Result<SymMatrix> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    if r.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "residual length {} does not match {} samples",
            r.len(),
            x.nrows()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("residuals contain non-finite values".into()));
    }
    Ok(PairwiseGeometry::compute(kernel, x, sigma)?.contraction(kernel, x, r, lambda))
}
