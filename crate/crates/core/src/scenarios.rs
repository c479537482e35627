//! Synthetic regression problems with a known central mean subspace.
//!
//! Responses are `Y = f(X) + ε` with `ε ~ N(0, σ²)` and one of five
//! regression functions:
//!
//! | id | `f(x)` | `S*` |
//! |----|--------|------|
//! | a | `x₁ + x₂ + x₃` | `span{(1,1,1,0,…)}` |
//! | b | `x₁ x₂` | `span{e₁, e₂}` |
//! | c | `0.1(x₁ + x₂ + x₃)³ + tanh(x₁ + x₃ + x₅)` | `span{(1,1,1,0,…), (1,0,1,0,1,0,…)}` |
//! | d | `2(x₁ + x₂) + (x₂ + x₃)² + (x₄ − 0.5)³` | `span{(1,1,0,…), (0,1,1,0,…), e₄}` |
//! | e | `0` | `{0}` |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Bernoulli, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krr::Dataset;
use crate::spectral::{eigh, SymMatrix};

/// Identifies the random number generator and Gaussian sampler behind [`sample`].
pub const GENERATOR_ID: &str = "rand_chacha-0.9 ChaCha12Rng; rand_distr-0.5 ziggurat StandardNormal";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnId {
    A,
    B,
    C,
    D,
    E,
}

impl FnId {
    pub const ALL: [FnId; 5] = [FnId::A, FnId::B, FnId::C, FnId::D, FnId::E];

    /// Smallest number of covariates the function needs.
    pub fn min_dim(self) -> usize {
        match self {
            FnId::A | FnId::C => 5,
            FnId::D => 4,
            FnId::B => 2,
            FnId::E => 1,
        }
    }

    pub fn check_dim(self, p: usize) -> Result<()> {
        if p < self.min_dim() {
            return Err(Error::InvalidConfig(format!(
                "regression function ({self}) needs p >= {}, got {p}",
                self.min_dim()
            )));
        }
        Ok(())
    }

    /// Unnormalized spanning directions of the central mean subspace.
    fn directions(self, p: usize) -> Vec<DVector<f64>> {
        let dir = |idx: &[usize]| {
            let mut v = DVector::zeros(p);
            for &i in idx {
                v[i] = 1.0;
            }
            v
        };
        match self {
            FnId::A => vec![dir(&[0, 1, 2])],
            FnId::B => vec![dir(&[0]), dir(&[1])],
            FnId::C => vec![dir(&[0, 1, 2]), dir(&[0, 2, 4])],
            FnId::D => vec![dir(&[0, 1]), dir(&[1, 2]), dir(&[3])],
            FnId::E => vec![],
        }
    }
}

impl fmt::Display for FnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FnId::A => "a",
            FnId::B => "b",
            FnId::C => "c",
            FnId::D => "d",
            FnId::E => "e",
        };
        f.write_str(s)
    }
}

impl FromStr for FnId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(FnId::A),
            "b" => Ok(FnId::B),
            "c" => Ok(FnId::C),
            "d" => Ok(FnId::D),
            "e" => Ok(FnId::E),
            other => Err(Error::InvalidConfig(format!(
                "unknown regression function `{other}`, expected one of a..e"
            ))),
        }
    }
}

/// Distribution of the covariate vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CovariateLaw {
    /// `N(0, I)`.
    IsoGaussian,
    /// `N(0, K)` with `K_ij = ρ^|i-j|`.
    ArGaussian { rho: f64 },
    /// Independent coordinates with `P(X_i = 1) = P(X_i = 0) = 1/2`.
    BernoulliHalf,
    /// Independent coordinates uniform on `[0, 1]`.
    Uniform01,
}

impl CovariateLaw {
    pub fn validate(&self) -> Result<()> {
        if let CovariateLaw::ArGaussian { rho } = *self {
            if !(rho > -1.0 && rho < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "AR correlation must lie in (-1, 1), got {rho}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateLaw::IsoGaussian => f.write_str("iso"),
            CovariateLaw::ArGaussian { rho } => write!(f, "ar:{rho}"),
            CovariateLaw::BernoulliHalf => f.write_str("bernoulli"),
            CovariateLaw::Uniform01 => f.write_str("uniform"),
        }
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let law = match s.trim() {
            "iso" => CovariateLaw::IsoGaussian,
            "bernoulli" => CovariateLaw::BernoulliHalf,
            "uniform" => CovariateLaw::Uniform01,
            other => {
                let rho = other
                    .strip_prefix("ar:")
                    .and_then(|r| r.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "unknown covariate law `{other}`, expected iso, ar:<rho>, bernoulli or uniform"
                        ))
                    })?;
                CovariateLaw::ArGaussian { rho }
            }
        };
        law.validate()?;
        Ok(law)
    }
}

impl From<CovariateLaw> for String {
    fn from(law: CovariateLaw) -> String {
        law.to_string()
    }
}

impl TryFrom<String> for CovariateLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub covariate_law: CovariateLaw,
    pub fn_id: FnId,
    pub sigma_noise: f64,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            covariate_law: CovariateLaw::IsoGaussian,
            fn_id: FnId::C,
            sigma_noise: 0.1,
            n: 300,
            p: 50,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.covariate_law.validate()?;
        self.fn_id.check_dim(self.p)?;
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise level must be nonnegative, got {}",
                self.sigma_noise
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

/// Orthonormal basis of the central mean subspace and its projector.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// `p × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub projector: SymMatrix,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal basis of the orthogonal complement, `p × (p - d)`.
    pub fn complement_basis(&self) -> Result<DMatrix<f64>> {
        let p = self.ambient_dim();
        let d = self.dim();
        let complement = &SymMatrix::identity(p) - &self.projector;
        let dec = eigh(&complement)?;
        Ok(dec.eigenvectors.columns(0, p - d).into_owned())
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
fn orthonormalize(dirs: &[DVector<f64>], p: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dirs.len());
    for d in dirs {
        let mut v = d.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        assert!(norm > 1e-12, "subspace directions must be linearly independent");
        basis.push(v / norm);
    }
    if basis.is_empty() {
        DMatrix::zeros(p, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

pub fn central_subspace(fn_id: FnId, p: usize) -> Result<GroundTruth> {
    fn_id.check_dim(p)?;
    let basis = orthonormalize(&fn_id.directions(p), p);
    let projector = if basis.ncols() == 0 {
        SymMatrix::zeros(p)
    } else {
        SymMatrix::gram_of(&basis)
    };
    Ok(GroundTruth { basis, projector })
}

/// `f(x)` for the selected regression function.
pub fn regression_value(fn_id: FnId, x: &[f64]) -> Result<f64> {
    fn_id.check_dim(x.len())?;
    Ok(eval_unchecked(fn_id, x))
}

fn eval_unchecked(fn_id: FnId, x: &[f64]) -> f64 {
    match fn_id {
        FnId::A => x[0] + x[1] + x[2],
        FnId::B => x[0] * x[1],
        FnId::C => 0.1 * (x[0] + x[1] + x[2]).powi(3) + (x[0] + x[2] + x[4]).tanh(),
        FnId::D => 2.0 * (x[0] + x[1]) + (x[1] + x[2]).powi(2) + (x[3] - 0.5).powi(3),
        FnId::E => 0.0,
    }
}

/// `Var(E[Y|X])` where it has a closed form.
pub fn explained_variance(fn_id: FnId, law: CovariateLaw) -> Option<f64> {
    match (fn_id, law) {
        (FnId::A, CovariateLaw::IsoGaussian) => Some(3.0),
        (FnId::B, CovariateLaw::IsoGaussian) => Some(1.0),
        (FnId::E, _) => Some(0.0),
        _ => None,
    }
}

fn draw_covariates(law: CovariateLaw, n: usize, p: usize, rng: &mut ChaCha12Rng) -> Result<DMatrix<f64>> {
    // Filled row by row so that the first rows of a larger sample agree with a smaller one.
    let mut x = DMatrix::zeros(n, p);
    match law {
        CovariateLaw::IsoGaussian => {
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        CovariateLaw::ArGaussian { rho } => {
            let cov = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
            let chol = nalgebra::Cholesky::new(cov).ok_or_else(|| {
                Error::NumericalFailure(format!("AR({rho}) covariance is not positive definite"))
            })?;
            let l = chol.l();
            let mut z = DVector::zeros(p);
            for i in 0..n {
                for j in 0..p {
                    z[j] = rng.sample(StandardNormal);
                }
                let row = &l * &z;
                x.row_mut(i).copy_from(&row.transpose());
            }
        }
        CovariateLaw::BernoulliHalf => {
            let coin = Bernoulli::new(0.5).expect("valid probability");
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = if rng.sample(coin) { 1.0 } else { 0.0 };
                }
            }
        }
        CovariateLaw::Uniform01 => {
            let unif = Uniform::new(0.0, 1.0).expect("valid range");
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = rng.sample(unif);
                }
            }
        }
    }
    Ok(x)
}

/// Draws `n` samples; the result is fully determined by `spec.seed`.
pub fn sample(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let x = draw_covariates(spec.covariate_law, spec.n, spec.p, &mut rng)?;
    let noise = Normal::new(0.0, spec.sigma_noise)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let y = DVector::from_fn(spec.n, |i, _| {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        eval_unchecked(spec.fn_id, &row) + rng.sample(noise)
    });
    Dataset::new(x, y)
}
