use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kernel_metric::harness::{
    self, default_pgd_for, parse_lambda_grid, read_records, render_report, run_single_detailed, sweep,
    write_records, ReportSummary, RunRecord, RunStatus, SweepConfig,
};
use kernel_metric::scenarios::{sample, ScenarioSpec};
use kernel_metric::{CovariateLaw, Error, FnId, KernelSpec, SymMatrix};

#[derive(Parser)]
#[command(name = "kmetric", version, about = "Kernel metric learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one (scenario, λ) cell and print its record
    Run(ExperimentArgs),
    /// Run a λ × replicate grid and write records.csv
    Sweep(ExperimentArgs),
    /// Compare the analytic gradient with central differences
    Gradcheck(GradcheckArgs),
    /// Turn a records.csv into summary.csv and SVG plots
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML sweep configuration; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Regression function a..e
    #[arg(long)]
    scenario: Option<FnId>,
    /// iso | ar:<rho> | bernoulli | uniform
    #[arg(long)]
    covariates: Option<CovariateLaw>,
    /// gauss | mix:<w:t,...> | linear | cubic | poly:<c0,c1,...>
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// Comma-separated list or lo:hi:count (log-spaced)
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    sigma_noise: Option<f64>,
    /// Base seed; replicate seeds are derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// Operator-norm cap on Σ
    #[arg(long, conflicts_with = "no_cap")]
    cap: Option<f64>,
    /// Project onto the whole PSD cone
    #[arg(long)]
    no_cap: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    stop_delta: Option<f64>,
    #[arg(long)]
    rank_rel_tol: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also record wall-clock time per run (makes the CSV non-reproducible)
    #[arg(long)]
    timing: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "c")]
    scenario: FnId,
    #[arg(long, default_value = "iso")]
    covariates: CovariateLaw,
    #[arg(long, default_value = "gauss")]
    kernel: KernelSpec,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Σ = diag * I
    #[arg(long)]
    diag: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// records.csv produced by `sweep`
    input: PathBuf,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

struct Style {
    color: bool,
}

impl Style {
    fn detect() -> Self {
        Style {
            color: std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal(),
        }
    }

    fn paint(&self, text: &str, code: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn status(&self, status: RunStatus) -> String {
        let code = match status {
            RunStatus::Converged => "32",
            RunStatus::MaxIterReached => "33",
            _ => "31",
        };
        self.paint(status.as_str(), code)
    }
}

fn build_config(args: &ExperimentArgs) -> Result<SweepConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => {
            let kernel = args.kernel.clone().unwrap_or_else(KernelSpec::gaussian);
            SweepConfig::new(ScenarioSpec::default(), kernel)
        }
    };
    if let Some(kernel) = &args.kernel {
        if args.config.is_some() && kernel.is_radial() != cfg.kernel.is_radial() {
            cfg.pgd.cap = default_pgd_for(kernel).cap;
        }
        cfg.kernel = kernel.clone();
    }
    let sc = &mut cfg.scenario;
    if let Some(v) = args.scenario {
        sc.fn_id = v;
    }
    if let Some(v) = args.covariates {
        sc.covariate_law = v;
    }
    if let Some(v) = args.n {
        sc.n = v;
    }
    if let Some(v) = args.p {
        sc.p = v;
    }
    if let Some(v) = args.sigma_noise {
        sc.sigma_noise = v;
    }
    if let Some(v) = args.seed {
        sc.seed = v;
    }
    if let Some(text) = &args.lambda {
        cfg.lambdas = parse_lambda_grid(text)?;
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.cap {
        cfg.pgd.cap = Some(v);
    }
    if args.no_cap {
        cfg.pgd.cap = None;
    }
    if let Some(v) = args.max_iter {
        cfg.pgd.max_iter = v;
    }
    if let Some(v) = args.stop_delta {
        cfg.pgd.stop_delta = v;
    }
    if let Some(v) = args.rank_rel_tol {
        cfg.rank_tolerance.rel_tol = v;
    }
    if args.timing {
        cfg.record_wall_time = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path, cfg: &SweepConfig) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    cfg.save(&dir.join("config.toml"))
}

fn print_record(style: &Style, r: &RunRecord) {
    let rho = r
        .sharpness_rho_hat
        .map(|v| format!("{v:.4e}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "seed={} lambda={} status={} iterations={} rank={} dim_s_star={} dist={:.4} objective={:.6e} rho_hat={}",
        r.seed,
        r.lambda,
        style.status(r.status),
        r.iterations,
        r.rank,
        r.dim_s_star,
        r.subspace_dist_fro,
        r.objective_final,
        rho
    );
}

fn print_summary(summary: &ReportSummary) {
    let d = summary.dim_s_star;
    println!("{} / {} (dim S* = {d}, p = {})", summary.scenario, summary.kernel, summary.p);
    println!("{:>10} {:>6} {:>14} {:>14} {:>10}", "lambda", "count", format!("P(rank<={d})"), format!("P(rank={d})"), "mean dist");
    for s in &summary.per_lambda {
        println!(
            "{:>10.4} {:>6} {:>14.3} {:>14.3} {:>10.4}",
            s.lambda, s.count, s.prob_rank_le_d, s.prob_rank_eq_d, s.mean_subspace_dist
        );
    }
}

fn cmd_run(style: &Style, args: &ExperimentArgs) -> Result<(), Error> {
    let cfg = build_config(args)?;
    if cfg.lambdas.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "`run` takes a single lambda (pass --lambda), got {}",
            cfg.lambdas.len()
        )));
    }
    let out = run_single_detailed(&cfg.scenario, &cfg.kernel, cfg.lambdas[0], &cfg.pgd, cfg.rank_tolerance)?;
    let mut record = out.record;
    if !cfg.record_wall_time {
        record.wall_time_s = None;
    }
    print_record(style, &record);
    if let Some(msg) = &out.failure {
        eprintln!("numerical failure: {msg}");
    }
    if let Some(dir) = &args.out {
        prepare_out(dir, &cfg)?;
        write_records(std::slice::from_ref(&record), &dir.join("records.csv"))?;
    }
    Ok(())
}

fn cmd_sweep(style: &Style, args: &ExperimentArgs) -> Result<(), Error> {
    let cfg = build_config(args)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    prepare_out(&dir, &cfg)?;
    eprintln!(
        "sweeping {} lambdas x {} replicates on {} worker(s)",
        cfg.lambdas.len(),
        cfg.replicates,
        cfg.workers
    );
    let records = sweep(&cfg)?;
    let path = dir.join("records.csv");
    write_records(&records, &path)?;
    let flagged = records.iter().filter(|r| r.status != RunStatus::Converged).count();
    if flagged > 0 {
        eprintln!(
            "{}",
            style.paint(&format!("{flagged} of {} runs did not converge", records.len()), "33")
        );
    }
    print_summary(&ReportSummary::from_records(&records)?);
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), Error> {
    let spec = ScenarioSpec {
        covariate_law: args.covariates,
        fn_id: args.scenario,
        sigma_noise: args.sigma_noise,
        n: args.n,
        p: args.p,
        seed: args.seed,
    };
    spec.validate()?;
    let data = sample(&spec)?;
    let sigma = SymMatrix::scaled_identity(args.p, args.diag.unwrap_or(1.0 / args.p as f64));
    let check = harness::gradient_check_detailed(&args.kernel, &data, &sigma, args.lambda, args.step)?;
    let (i, j) = check.worst_entry;
    println!(
        "max relative error {:.3e} at ({i}, {j}): analytic {:.6e}, finite difference {:.6e}",
        check.max_relative_error,
        check.analytic.get(i, j),
        check.finite_difference.get(i, j)
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Error> {
    let records = read_records(&args.input)?;
    let summary = render_report(&records, &args.out)?;
    print_summary(&summary);
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn dispatch(cli: &Cli, style: &Style) -> Result<(), Error> {
    match &cli.command {
        Command::Run(args) => cmd_run(style, args),
        Command::Sweep(args) => cmd_sweep(style, args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli, &Style::detect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
