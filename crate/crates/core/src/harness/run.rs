use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::krr::KrrOracle;
use crate::optimizer::{minimize, PgdConfig, PgdTrace};
use crate::scenarios::{central_subspace, sample, ScenarioSpec};
use crate::spectral::{
    eigh, projector_from_decomposition, rank_of_decomposition, subspace_distance, RankTolerance,
    SubspaceNorm, SymMatrix,
};

use super::config::SweepConfig;
use super::diagnostics::sharpness_certificate;
use super::records::{RunRecord, RunStatus};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Data seed of a replicate: `splitmix64(base ^ splitmix64(replicate))`.
///
/// The seed does not depend on `λ`, so every `λ` of a replicate sees the same sample.
pub fn replicate_seed(base_seed: u64, replicate: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(replicate as u64))
}

pub fn scenario_id(spec: &ScenarioSpec) -> String {
    format!("{}/{}", spec.fn_id, spec.covariate_law)
}

/// A run record together with the optimizer output it summarizes.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Final iterate, or the iterate at which the oracle failed.
    pub sigma: SymMatrix,
    pub trace: Option<PgdTrace>,
    /// Message of the numerical failure, if any.
    pub failure: Option<String>,
}

/// Samples data for `scenario` (using `scenario.seed` directly), minimizes
/// `J_n` and summarizes the minimizer. Optimizer failures are reported in the
/// record status; only invalid configurations are returned as errors.
pub fn run_single_detailed(
    scenario: &ScenarioSpec,
    kernel: &KernelSpec,
    lambda: f64,
    pgd: &PgdConfig,
    tolerance: RankTolerance,
) -> Result<RunOutcome> {
    scenario.validate()?;
    pgd.validate()?;
    tolerance.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let started = Instant::now();
    let data = sample(scenario)?;
    let truth = central_subspace(scenario.fn_id, scenario.p)?;
    let oracle = KrrOracle {
        kernel,
        data: &data,
        lambda,
    };

    let (sigma, trace, gradient, objective, status, failure) = match minimize(&oracle, scenario.p, pgd) {
        Ok(res) => {
            let status = RunStatus::from(res.trace.status);
            (res.sigma, Some(res.trace), Some(res.gradient), res.objective, status, None)
        }
        Err(Error::OracleFailure {
            iterate, source, ..
        }) => (
            *iterate,
            None,
            None,
            f64::NAN,
            RunStatus::NumericalFailure,
            Some(source.to_string()),
        ),
        Err(e) => return Err(e),
    };

    let dec = eigh(&sigma)?;
    let rank = rank_of_decomposition(&dec, tolerance);
    let projector = projector_from_decomposition(&dec, rank)?;
    let subspace_dist_fro = subspace_distance(&projector, &truth.projector, SubspaceNorm::Frobenius)?;
    let sharpness_rho_hat = match &gradient {
        Some(g) if truth.dim() < scenario.p => Some(sharpness_certificate(g, &truth)?),
        _ => None,
    };
    let iterations = trace.as_ref().map(|t| t.iterations()).unwrap_or(0);

    let record = RunRecord {
        seed: scenario.seed,
        lambda,
        scenario: scenario_id(scenario),
        kernel: kernel.to_string(),
        n: scenario.n,
        p: scenario.p,
        iterations,
        status,
        rank,
        dim_s_star: truth.dim(),
        subspace_dist_fro,
        objective_final: objective,
        sharpness_rho_hat,
        wall_time_s: Some(started.elapsed().as_secs_f64()),
    };
    Ok(RunOutcome {
        record,
        sigma,
        trace,
        failure,
    })
}

pub fn run_single(
    scenario: &ScenarioSpec,
    kernel: &KernelSpec,
    lambda: f64,
    pgd: &PgdConfig,
    tolerance: RankTolerance,
) -> Result<RunRecord> {
    Ok(run_single_detailed(scenario, kernel, lambda, pgd, tolerance)?.record)
}

/// Runs every `(replicate, λ)` cell on a pool of `config.workers` threads.
/// Records come back ordered by replicate, then by `λ`.
pub fn sweep(config: &SweepConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let cells: Vec<(usize, f64)> = (0..config.replicates)
        .flat_map(|rep| config.lambdas.iter().map(move |&l| (rep, l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(rep, lambda)| {
                let scenario = ScenarioSpec {
                    seed: replicate_seed(config.scenario.seed, rep),
                    ..config.scenario.clone()
                };
                let mut record =
                    run_single(&scenario, &config.kernel, lambda, &config.pgd, config.rank_tolerance)?;
                if !config.record_wall_time {
                    record.wall_time_s = None;
                }
                Ok(record)
            })
            .collect()
    });
    results.into_iter().collect()
}
