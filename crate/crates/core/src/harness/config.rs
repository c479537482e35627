use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::optimizer::PgdConfig;
use crate::scenarios::{ScenarioSpec, GENERATOR_ID};
use crate::spectral::RankTolerance;

/// Operator-norm cap applied by default to inner-product kernels.
pub const INNER_PRODUCT_CAP: f64 = 100_000.0;

/// Default `λ` grid over `(0, 3]`.
pub const DEFAULT_LAMBDAS: [f64; 8] = [0.05, 0.08, 0.14, 0.24, 0.41, 0.70, 1.20, 3.00];

/// Optimizer defaults for a kernel family: radial kernels project onto the
/// whole PSD cone, inner-product kernels onto `‖Σ‖_op ≤ 100000`.
pub fn default_pgd_for(kernel: &KernelSpec) -> PgdConfig {
    PgdConfig {
        cap: if kernel.is_radial() {
            None
        } else {
            Some(INNER_PRODUCT_CAP)
        },
        ..PgdConfig::default()
    }
}

/// A grid of `λ` values crossed with independent data replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Template scenario; its `seed` is the base seed for all replicates.
    pub scenario: ScenarioSpec,
    pub kernel: KernelSpec,
    pub lambdas: Vec<f64>,
    pub replicates: usize,
    pub workers: usize,
    /// Wall-clock timings make the CSV output non-reproducible, so they are opt-in.
    #[serde(default)]
    pub record_wall_time: bool,
    pub pgd: PgdConfig,
    pub rank_tolerance: RankTolerance,
}

impl SweepConfig {
    pub fn new(scenario: ScenarioSpec, kernel: KernelSpec) -> Self {
        let pgd = default_pgd_for(&kernel);
        SweepConfig {
            scenario,
            kernel,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            replicates: 20,
            workers: 1,
            record_wall_time: false,
            pgd,
            rank_tolerance: RankTolerance::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.pgd.validate()?;
        self.rank_tolerance.validate()?;
        if self.lambdas.is_empty() {
            return Err(Error::InvalidConfig("lambda grid is empty".into()));
        }
        if let Some(bad) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("lambda values must be positive, got {bad}")));
        }
        if self.lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("lambda grid must be strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The effective configuration as TOML, headed by the sampler identity.
    pub fn to_toml_string(&self) -> String {
        let body = toml::to_string(self).expect("sweep config serializes to TOML");
        format!("# generator: {GENERATOR_ID}\n{body}")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// Parses `a,b,c` as an explicit list or `lo:hi:count` as a log-spaced grid.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || {
        Error::InvalidConfig(format!(
            "lambda grid `{text}`: expected a comma-separated list or lo:hi:count"
        ))
    };
    let mut values = if let Some((lo, rest)) = text.split_once(':') {
        let (hi, count) = rest.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if !(lo > 0.0) || !(hi >= lo) || count == 0 {
            return Err(bad());
        }
        if count == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i + 1 == count {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(bad());
    }
    Ok(values)
}
