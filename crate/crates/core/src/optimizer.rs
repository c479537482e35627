//! Projected gradient descent on the PSD cone with Armijo backtracking.
//!
//! Each iteration takes `Σ⁺(η) = Π(Σ - η∇J(Σ))` where `Π` is the projection
//! onto `{Σ ⪰ 0}` (or onto `{0 ⪯ Σ, ‖Σ‖_op ≤ M}` when a cap is set). The step
//! starts at `initial_step` and is multiplied by `backtrack_beta` until
//!
//! ```text
//! J(Σ⁺(η)) ≤ J(Σ) + c ⟨∇J(Σ), Σ⁺(η) - Σ⟩.
//! ```
//!
//! Iteration stops once `‖Σ⁺ - Σ‖_F / η < Δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{project_psd, project_psd_capped, SymMatrix};

/// Objective and gradient at a feasible point.
pub trait Oracle {
    fn evaluate(&self, sigma: &SymMatrix) -> Result<(f64, SymMatrix)>;
}

impl<F> Oracle for F
where
    F: Fn(&SymMatrix) -> Result<(f64, SymMatrix)>,
{
    fn evaluate(&self, sigma: &SymMatrix) -> Result<(f64, SymMatrix)> {
        self(sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdConfig {
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack_beta: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub stop_delta: f64,
    /// Operator-norm cap `M`; `None` projects onto the whole cone.
    pub cap: Option<f64>,
    /// Diagonal of the initial iterate; `None` means `1/p`.
    pub init_diag: Option<f64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            max_iter: 2000,
            armijo_c: 1e-3,
            backtrack_beta: 0.5,
            initial_step: 0.1,
            min_step: 1e-12,
            stop_delta: 1e-3,
            cap: None,
            init_diag: None,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.max_iter == 0 {
            return fail("max_iter must be positive".into());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return fail(format!("armijo_c must lie in (0,1), got {}", self.armijo_c));
        }
        if !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0) {
            return fail(format!(
                "backtrack_beta must lie in (0,1), got {}",
                self.backtrack_beta
            ));
        }
        for (name, v) in [
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("stop_delta", self.stop_delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(cap) = self.cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return fail(format!("cap must be positive, got {cap}"));
            }
        }
        if let Some(d) = self.init_diag {
            if !(d > 0.0 && d.is_finite()) {
                return fail(format!("init_diag must be positive, got {d}"));
            }
        }
        Ok(())
    }

    pub fn project(&self, a: &SymMatrix) -> Result<SymMatrix> {
        match self.cap {
            Some(cap) => project_psd_capped(a, cap),
            None => project_psd(a),
        }
    }

    /// `init_diag · I_p`, projected onto the feasible set.
    pub fn initial_point(&self, p: usize) -> Result<SymMatrix> {
        let d = self.init_diag.unwrap_or(1.0 / p as f64);
        self.project(&SymMatrix::scaled_identity(p, d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgdStatus {
    Converged,
    MaxIterReached,
    StepUnderflow,
}

impl PgdStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PgdStatus::Converged => "converged",
            PgdStatus::MaxIterReached => "max_iter_reached",
            PgdStatus::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective at the accepted iterate.
    pub objective: f64,
    pub step: f64,
    /// `‖Σ_{t+1} - Σ_t‖_F / η_t`.
    pub step_ratio: f64,
    pub backtracks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdTrace {
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub status: PgdStatus,
}

impl PgdTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_step(&self) -> Option<f64> {
        self.records.last().map(|r| r.step)
    }
}

#[derive(Clone, Debug)]
pub struct PgdResult {
    pub sigma: SymMatrix,
    pub objective: f64,
    pub gradient: SymMatrix,
    pub trace: PgdTrace,
}

#[derive(Clone, Debug)]
pub struct ArmijoStep {
    pub eta: f64,
    pub sigma_next: SymMatrix,
    pub value_next: f64,
    pub gradient_next: SymMatrix,
    pub backtracks: usize,
}

/// One backtracking search along the projection arc. `Ok(None)` signals that
/// the step fell below `min_step` without sufficient decrease.
pub fn armijo_step<O: Oracle + ?Sized>(
    oracle: &O,
    sigma: &SymMatrix,
    value: f64,
    gradient: &SymMatrix,
    config: &PgdConfig,
) -> Result<Option<ArmijoStep>> {
    let mut eta = config.initial_step;
    let mut backtracks = 0;
    while eta >= config.min_step {
        let sigma_next = config.project(&(sigma - &(gradient * eta)))?;
        let (value_next, gradient_next) = oracle.evaluate(&sigma_next)?;
        let decrease = gradient.inner(&(&sigma_next - sigma));
        if value_next <= value + config.armijo_c * decrease {
            return Ok(Some(ArmijoStep {
                eta,
                sigma_next,
                value_next,
                gradient_next,
                backtracks,
            }));
        }
        eta *= config.backtrack_beta;
        backtracks += 1;
    }
    Ok(None)
}

/// Minimizes the oracle over the feasible set starting from `init_diag · I_p`.
///
/// On convergence the returned point is the iterate `Σ_t` whose projected
/// step satisfied the stopping rule, so `‖Π(Σ_t - η∇J(Σ_t)) - Σ_t‖_F < Δη`
/// holds for the returned point and the last recorded step.
pub fn minimize<O: Oracle + ?Sized>(oracle: &O, p: usize, config: &PgdConfig) -> Result<PgdResult> {
    config.validate()?;
    if p == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let wrap = |iteration: usize, iterate: &SymMatrix, e: Error| Error::OracleFailure {
        iteration,
        iterate: Box::new(iterate.clone()),
        source: Box::new(e),
    };

    let mut sigma = config.initial_point(p)?;
    let (mut value, mut gradient) = oracle.evaluate(&sigma).map_err(|e| wrap(0, &sigma, e))?;
    let initial_objective = value;
    let mut records = Vec::new();
    let mut status = PgdStatus::MaxIterReached;

    for iteration in 0..config.max_iter {
        let step = armijo_step(oracle, &sigma, value, &gradient, config)
            .map_err(|e| wrap(iteration, &sigma, e))?;
        let Some(step) = step else {
            status = PgdStatus::StepUnderflow;
            break;
        };
        let step_ratio = (&step.sigma_next - &sigma).frobenius_norm() / step.eta;
        records.push(IterationRecord {
            iteration,
            objective: step.value_next,
            step: step.eta,
            step_ratio,
            backtracks: step.backtracks,
        });
        if step_ratio < config.stop_delta {
            status = PgdStatus::Converged;
            break;
        }
        sigma = step.sigma_next;
        value = step.value_next;
        gradient = step.gradient_next;
    }

    Ok(PgdResult {
        sigma,
        objective: value,
        gradient,
        trace: PgdTrace {
            initial_objective,
            records,
            status,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigh;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_oracle(
        f: impl Fn(f64) -> (f64, f64),
    ) -> impl Fn(&SymMatrix) -> Result<(f64, SymMatrix)> {
        move |s: &SymMatrix| {
            let (v, g) = f(s.get(0, 0));
            Ok((v, SymMatrix::from_diagonal(&[g])))
        }
    }

    /// J(Σ) = ½‖Σ - T‖²_F for a fixed symmetric target T.
    fn quadratic_oracle(target: SymMatrix) -> impl Fn(&SymMatrix) -> Result<(f64, SymMatrix)> {
        move |s: &SymMatrix| {
            let d = s - &target;
            Ok((0.5 * d.inner(&d), d))
        }
    }

    #[test]
    fn zero_gradient_converges_immediately() {
        let oracle = |s: &SymMatrix| Ok((1.0, SymMatrix::zeros(s.dim())));
        let res = minimize(&oracle, 3, &PgdConfig::default()).unwrap();
        assert_eq!(res.trace.status, PgdStatus::Converged);
        assert_eq!(res.trace.iterations(), 1);
        assert_eq!(res.sigma, SymMatrix::scaled_identity(3, 1.0 / 3.0));
        assert_eq!(res.trace.records[0].step, 0.1);
    }

    #[test]
    fn interior_minimizer() {
        let oracle = scalar_oracle(|s| (0.5 * (s - 2.0).powi(2), s - 2.0));
        let res = minimize(&oracle, 1, &PgdConfig::default()).unwrap();
        assert_eq!(res.trace.status, PgdStatus::Converged);
        assert_abs_diff_eq!(res.sigma.get(0, 0), 2.0, epsilon = 1e-3);
    }

    #[test]
    fn boundary_minimizer() {
        let oracle = scalar_oracle(|s| (0.5 * (s + 1.0).powi(2), s + 1.0));
        let res = minimize(&oracle, 1, &PgdConfig::default()).unwrap();
        assert_eq!(res.trace.status, PgdStatus::Converged);
        assert_eq!(res.sigma.get(0, 0), 0.0);
    }

    #[test]
    fn armijo_accepts_small_step() {
        let oracle = scalar_oracle(|s| (0.5 * s * s, s));
        let sigma = SymMatrix::from_diagonal(&[1.0]);
        let step = armijo_step(&oracle, &sigma, 0.5, &SymMatrix::from_diagonal(&[1.0]), &PgdConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(step.backtracks, 0);
        assert_eq!(step.eta, 0.1);
        assert_abs_diff_eq!(step.sigma_next.get(0, 0), 0.9, epsilon = 1e-15);
    }

    #[test]
    fn armijo_large_step_on_the_cone() {
        // J = σ²/2 at σ = 1 with η = 10: the raw step lands at -9, the
        // projection maps it to 0 and J(0) = 0 ≤ 0.5 - 1e-3, so no backtracking.
        let oracle = scalar_oracle(|s| (0.5 * s * s, s));
        let sigma = SymMatrix::from_diagonal(&[1.0]);
        let config = PgdConfig {
            initial_step: 10.0,
            ..PgdConfig::default()
        };
        let step = armijo_step(&oracle, &sigma, 0.5, &SymMatrix::from_diagonal(&[1.0]), &config)
            .unwrap()
            .unwrap();
        assert_eq!(step.backtracks, 0);
        assert_eq!(step.sigma_next.get(0, 0), 0.0);

        // J = (σ-2)²/2 at σ = 1: trial points 11, 6, 3.5 fail the decrease
        // test and 2.25 passes (J = 1/32 ≤ 0.5 - 1.25e-3).
        let shifted = scalar_oracle(|s| (0.5 * (s - 2.0).powi(2), s - 2.0));
        let step = armijo_step(&shifted, &sigma, 0.5, &SymMatrix::from_diagonal(&[-1.0]), &config)
            .unwrap()
            .unwrap();
        assert_eq!(step.backtracks, 3);
        assert_eq!(step.eta, 1.25);
        assert_abs_diff_eq!(step.sigma_next.get(0, 0), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn armijo_zero_gradient() {
        let oracle = scalar_oracle(|_| (3.0, 0.0));
        let sigma = SymMatrix::from_diagonal(&[0.4]);
        let step = armijo_step(&oracle, &sigma, 3.0, &SymMatrix::zeros(1), &PgdConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(step.eta, 0.1);
        assert_eq!(step.sigma_next, sigma);
    }

    #[test]
    fn armijo_underflow() {
        // The oracle claims a descent direction but the objective only grows.
        let oracle = scalar_oracle(|s| (s * s + 10.0 * (s - 1.0).abs(), -1.0));
        let sigma = SymMatrix::from_diagonal(&[1.0]);
        let step = armijo_step(&oracle, &sigma, 1.0, &SymMatrix::from_diagonal(&[-1.0]), &PgdConfig::default())
            .unwrap();
        assert!(step.is_none());
        let res = minimize(&oracle, 1, &PgdConfig {
            init_diag: Some(1.0),
            ..PgdConfig::default()
        })
        .unwrap();
        assert_eq!(res.trace.status, PgdStatus::StepUnderflow);
    }

    #[test]
    fn max_iter_status() {
        let oracle = scalar_oracle(|s| (0.5 * (s - 2.0).powi(2), s - 2.0));
        let config = PgdConfig {
            max_iter: 3,
            ..PgdConfig::default()
        };
        let res = minimize(&oracle, 1, &config).unwrap();
        assert_eq!(res.trace.status, PgdStatus::MaxIterReached);
        assert_eq!(res.trace.iterations(), 3);
    }

    #[test]
    fn oracle_failure_carries_iterate() {
        let oracle = |s: &SymMatrix| -> Result<(f64, SymMatrix)> {
            if s.get(0, 0) < 0.5 {
                Err(Error::NumericalFailure("boom".into()))
            } else {
                Ok((s.get(0, 0), SymMatrix::from_diagonal(&[1.0])))
            }
        };
        let config = PgdConfig {
            init_diag: Some(1.0),
            initial_step: 0.3,
            ..PgdConfig::default()
        };
        match minimize(&oracle, 1, &config) {
            Err(Error::OracleFailure { iteration, iterate, .. }) => {
                assert_eq!(iteration, 1);
                assert_abs_diff_eq!(iterate.get(0, 0), 0.7, epsilon = 1e-14);
            }
            other => panic!("expected oracle failure, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            PgdConfig { max_iter: 0, ..PgdConfig::default() },
            PgdConfig { armijo_c: 1.0, ..PgdConfig::default() },
            PgdConfig { backtrack_beta: 0.0, ..PgdConfig::default() },
            PgdConfig { initial_step: -1.0, ..PgdConfig::default() },
            PgdConfig { stop_delta: 0.0, ..PgdConfig::default() },
            PgdConfig { cap: Some(0.0), ..PgdConfig::default() },
            PgdConfig { init_diag: Some(f64::NAN), ..PgdConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    fn random_target(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> SymMatrix {
        SymMatrix::new(DMatrix::from_fn(p, p, |_, _| scale * rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn feasibility_descent_and_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for trial in 0..10 {
            let target = random_target(&mut rng, 4, 3.0);
            let cap = if trial % 2 == 0 { None } else { Some(1.5) };
            let config = PgdConfig {
                cap,
                initial_step: 0.7,
                ..PgdConfig::default()
            };
            let oracle = quadratic_oracle(target.clone());
            let res = minimize(&oracle, 4, &config).unwrap();
            assert_eq!(res.trace.status, PgdStatus::Converged);

            let mut prev = res.trace.initial_objective;
            for rec in &res.trace.records {
                assert!(rec.objective <= prev + 1e-12);
                prev = rec.objective;
            }

            let dec = eigh(&res.sigma).unwrap();
            assert!(dec.min_eigenvalue() >= -1e-10);
            if let Some(c) = cap {
                assert!(dec.max_eigenvalue() <= c + 1e-10);
            }

            let eta = res.trace.last_step().unwrap();
            let moved = config.project(&(&res.sigma - &(&res.gradient * eta))).unwrap();
            assert!((&moved - &res.sigma).frobenius_norm() <= config.stop_delta * eta);
        }
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let target = random_target(&mut rng, 5, 2.0);
        let oracle = quadratic_oracle(target);
        let a = minimize(&oracle, 5, &PgdConfig::default()).unwrap();
        let b = minimize(&oracle, 5, &PgdConfig::default()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.sigma, b.sigma);
    }
}
