//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any criterion fails.
//!
//! Runtime is dominated by the n = 300, p = 50 sweeps (several minutes on one core).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use kernel_metric::harness::{
    gradient_check, read_records, records_to_csv, replicate_seed, run_single_detailed, sweep, write_records,
    RunRecord, RunStatus, SweepConfig,
};
use kernel_metric::kernels::gradient_contraction;
use kernel_metric::krr::{fit, objective, KrrFit};
use kernel_metric::scenarios::{sample, ScenarioSpec};
use kernel_metric::spectral::{
    column_space_projector, eigh, project_psd, subspace_distance, RankTolerance, SubspaceNorm,
};
use kernel_metric::{CovariateLaw, Dataset, FnId, KernelSpec, SymMatrix};

const LAMBDAS_HIGH: [f64; 4] = [0.5, 0.7, 1.2, 3.0];
const LAMBDAS_EXACT: [f64; 2] = [0.24, 0.41];

struct Outcome {
    id: &'static str,
    passed: bool,
}

fn verdict(outcomes: &mut Vec<Outcome>, id: &'static str, title: &str, passed: bool, detail: String) {
    println!("{} [{id}] {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    outcomes.push(Outcome { id, passed });
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_symmetric(rng: &mut ChaCha8Rng, p: usize) -> SymMatrix {
    let a = random_matrix(rng, p, p);
    SymMatrix::new(&a + a.transpose()).unwrap()
}

fn random_psd(rng: &mut ChaCha8Rng, p: usize, rank: usize) -> SymMatrix {
    SymMatrix::gram_of(&random_matrix(rng, p, rank))
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let x = random_matrix(rng, n, p);
    let y = DVector::from_fn(n, |i, _| {
        (x[(i, 0)] + 0.5 * x[(i, 1)]).sin() + x[(i, 1)] * x[(i, 2 % p)] + 0.1 * rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(x, y).unwrap()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn fraction(records: &[RunRecord], lambda: f64, pred: impl Fn(&RunRecord) -> bool) -> (f64, usize) {
    let group: Vec<_> = records.iter().filter(|r| r.lambda == lambda).collect();
    let hits = group.iter().filter(|r| pred(r)).count();
    (hits as f64 / group.len() as f64, group.len())
}

fn rank_histogram(records: &[RunRecord], lambda: f64) -> String {
    let mut ranks: Vec<usize> = records.iter().filter(|r| r.lambda == lambda).map(|r| r.rank).collect();
    ranks.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < ranks.len() {
        let j = ranks[i..].iter().take_while(|&&r| r == ranks[i]).count();
        out.push(format!("{}x{}", ranks[i], j));
        i += j;
    }
    out.join(" ")
}

fn status_counts(records: &[RunRecord]) -> String {
    let count = |s: RunStatus| records.iter().filter(|r| r.status == s).count();
    format!(
        "converged {}, max_iter {}, underflow {}, failure {}",
        count(RunStatus::Converged),
        count(RunStatus::MaxIterReached),
        count(RunStatus::StepUnderflow),
        count(RunStatus::NumericalFailure)
    )
}

fn sweep_config(fn_id: FnId, law: CovariateLaw, kernel: KernelSpec, lambdas: &[f64], replicates: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(
        ScenarioSpec {
            covariate_law: law,
            fn_id,
            sigma_noise: 0.1,
            n: 300,
            p: 50,
            seed: 2024,
        },
        kernel,
    );
    cfg.lambdas = lambdas.to_vec();
    cfg.replicates = replicates;
    cfg.workers = workers();
    cfg
}

/// Pair-loop gradient `-(1/(2λn²)) Σ_ij r_i r_j ∂_Σ k(x_i, x_j)` with the
/// kernel derivatives written out by hand.
fn naive_gradient(kernel: &str, x: &DMatrix<f64>, sigma: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut acc = DMatrix::zeros(p, p);
    for i in 0..n {
        for j in 0..n {
            let xi = x.row(i).transpose();
            let xj = x.row(j).transpose();
            let dk = match kernel {
                // k = exp(-dᵀΣd), ∂k/∂Σ = -exp(-dᵀΣd) ddᵀ
                "gauss" => {
                    let d = &xi - &xj;
                    let q = (d.transpose() * sigma * &d)[(0, 0)];
                    &d * d.transpose() * -(-q).exp()
                }
                // k = (x_iᵀΣx_j)³, ∂k/∂Σ = 3(x_iᵀΣx_j)² sym(x_i x_jᵀ)
                "cubic" => {
                    let t = (xi.transpose() * sigma * &xj)[(0, 0)];
                    (&xi * xj.transpose() + &xj * xi.transpose()) * (1.5 * t * t)
                }
                _ => unreachable!(),
            };
            acc += dk * (r[i] * r[j]);
        }
    }
    acc / (-2.0 * lambda * (n * n) as f64)
}

fn main() {
    let started = Instant::now();
    let mut outcomes = Vec::new();
    // Every fit produced below, for the Euler-Lagrange criterion.
    let mut fits: Vec<KrrFit> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);

    // 1. Gradient check.
    {
        let t0 = Instant::now();
        let mut worst: f64 = 0.0;
        for inst in 0..10 {
            let data = random_dataset(&mut rng, 40, 5);
            let sigma = &SymMatrix::scaled_identity(5, 0.2) + &(random_psd(&mut rng, 5, 5) * 0.1);
            for kernel in [KernelSpec::gaussian(), KernelSpec::cubic()] {
                let err = gradient_check(&kernel, &data, &sigma, 0.5 + 0.1 * inst as f64, 1e-5).unwrap();
                worst = worst.max(err);
                fits.push(fit(&kernel, &data, &sigma, 0.5 + 0.1 * inst as f64).unwrap());
            }
        }
        let secs = t0.elapsed().as_secs_f64();
        verdict(
            &mut outcomes,
            "1",
            "gradient check, 10 instances x 2 kernels",
            worst <= 1e-5 && secs < 10.0,
            format!("max relative error {worst:.3e} (tol 1e-5), {secs:.2}s (limit 10s)"),
        );
    }

    // 3. J(UUᵀ; X) = J(I; XU), including rank-deficient U.
    {
        let mut worst: f64 = 0.0;
        for pair in 0..20 {
            let p = 4 + pair % 3;
            let k = 1 + pair % p;
            let data = random_dataset(&mut rng, 25, p);
            let mut u = random_matrix(&mut rng, p, k) * 0.5;
            if pair % 4 == 0 && k > 1 {
                // Duplicate a column so that U is rank deficient.
                let c0 = u.column(0).clone_owned();
                u.set_column(k - 1, &c0);
            }
            let kernel = if pair % 2 == 0 { KernelSpec::gaussian() } else { KernelSpec::cubic() };
            let lhs = objective(&kernel, &data, &SymMatrix::gram_of(&u), 0.3).unwrap();
            let reduced = data.with_covariates(data.x() * &u).unwrap();
            let rhs = objective(&kernel, &reduced, &SymMatrix::identity(k), 0.3).unwrap();
            worst = worst.max((lhs - rhs).abs());
            fits.push(fit(&kernel, &reduced, &SymMatrix::identity(k), 0.3).unwrap());
        }
        verdict(
            &mut outcomes,
            "3",
            "J(UU^T; X) = J(I; XU) on 20 pairs",
            worst <= 1e-10,
            format!("max |difference| {worst:.3e} (tol 1e-10)"),
        );
    }

    // 4. Fast contraction against the pair loop.
    {
        let mut worst: f64 = 0.0;
        for inst in 0..10 {
            let x = random_matrix(&mut rng, 12, 4);
            let sigma = random_psd(&mut rng, 4, 1 + inst % 4) * 0.3;
            let r = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
            for name in ["gauss", "cubic"] {
                let kernel: KernelSpec = name.parse().unwrap();
                let fast = gradient_contraction(&kernel, &x, &sigma, &r, 0.7).unwrap();
                let slow = naive_gradient(name, &x, sigma.as_matrix(), &r, 0.7);
                worst = worst.max((fast.as_matrix() - slow).amax());
            }
        }
        verdict(
            &mut outcomes,
            "4",
            "fast contraction vs pair loop (n=12, p=4)",
            worst <= 1e-12,
            format!("max |difference| {worst:.3e} (tol 1e-12)"),
        );
    }

    // 10 and 11. Subspace convergence and sharpness on scenario (a).
    {
        let t0 = Instant::now();
        let mut medians = Vec::new();
        // (n, rank, ρ̂) of every converged run.
        let mut certificates: Vec<(usize, usize, f64)> = Vec::new();
        for n in [150, 300, 600] {
            let mut dists = Vec::new();
            for rep in 0..10 {
                let spec = ScenarioSpec {
                    covariate_law: CovariateLaw::IsoGaussian,
                    fn_id: FnId::A,
                    sigma_noise: 0.1,
                    n,
                    p: 50,
                    seed: replicate_seed(2024, rep),
                };
                let kernel = KernelSpec::gaussian();
                let out = run_single_detailed(&spec, &kernel, 0.5, &Default::default(), RankTolerance::default())
                    .unwrap();
                dists.push(out.record.subspace_dist_fro);
                if out.record.status == RunStatus::Converged {
                    certificates.push((n, out.record.rank, out.record.sharpness_rho_hat.unwrap()));
                    fits.push(fit(&kernel, &sample(&spec).unwrap(), &out.sigma, 0.5).unwrap());
                }
            }
            medians.push((n, median(&mut dists)));
        }
        let m300 = medians[1].1;
        let (m150, m600) = (medians[0].1, medians[2].1);
        verdict(
            &mut outcomes,
            "10",
            "subspace distance, scenario (a), lambda=0.5",
            m300 <= 0.5 && m600 < m150,
            format!(
                "median at n=150/300/600: {m150:.4} / {m300:.4} / {m600:.4} (need n=300 <= 0.5 and n=600 < n=150), {:.0}s",
                t0.elapsed().as_secs_f64()
            ),
        );
        let per_n: Vec<String> = [150, 300, 600]
            .iter()
            .map(|&n| {
                let rhos: Vec<f64> = certificates.iter().filter(|c| c.0 == n).map(|c| c.2).collect();
                let min = rhos.iter().copied().fold(f64::INFINITY, f64::min);
                format!("n={n}: {} runs, min {min:.4e}", rhos.len())
            })
            .collect();
        let offenders: Vec<String> = certificates
            .iter()
            .filter(|c| !(c.2 > 0.0))
            .map(|c| format!("n={} rank={} rho_hat={:.4e}", c.0, c.1, c.2))
            .collect();
        verdict(
            &mut outcomes,
            "11",
            "sharpness certificate on converged runs of [10]",
            offenders.is_empty() && !certificates.is_empty(),
            format!(
                "{} (need > 0){}",
                per_n.join("; "),
                if offenders.is_empty() { String::new() } else { format!("; non-positive: {}", offenders.join(", ")) }
            ),
        );
    }

    // 2. Euler-Lagrange identity on every fit above.
    {
        let mut worst: f64 = 0.0;
        for f in &fits {
            let scale = f.residuals.amax().max(1.0);
            worst = worst.max(f.euler_lagrange_gap() / scale);
        }
        verdict(
            &mut outcomes,
            "2",
            "Euler-Lagrange identity r = n*lambda*alpha",
            worst <= 1e-8,
            format!("{} fits, max ||r - n lambda alpha||_inf / max(1, ||r||_inf) = {worst:.3e} (tol 1e-8)", fits.len()),
        );
    }

    // 7. Null regression function stays full rank.
    {
        let t0 = Instant::now();
        let cfg = sweep_config(FnId::E, CovariateLaw::IsoGaussian, KernelSpec::gaussian(), &LAMBDAS_HIGH, 10);
        let recs = sweep(&cfg).unwrap();
        let full = recs.iter().filter(|r| r.rank == 50).count();
        verdict(
            &mut outcomes,
            "7",
            "scenario (e), gauss: rank 50 everywhere",
            full == recs.len(),
            format!("{full}/{} records at rank 50; {}; {:.0}s", recs.len(), status_counts(&recs), t0.elapsed().as_secs_f64()),
        );
    }

    // 9. Correlated and discrete covariates.
    {
        let t0 = Instant::now();
        let mut parts = Vec::new();
        let mut ok = true;
        for law in [CovariateLaw::ArGaussian { rho: 0.5 }, CovariateLaw::BernoulliHalf] {
            let cfg = sweep_config(FnId::A, law, KernelSpec::gaussian(), &[0.7], 10);
            let recs = sweep(&cfg).unwrap();
            let (frac, _) = fraction(&recs, 0.7, |r| r.rank <= 1);
            ok &= frac >= 0.8;
            parts.push(format!("{law}: P(rank<=1) = {frac:.2} [{}]", rank_histogram(&recs, 0.7)));
        }
        verdict(
            &mut outcomes,
            "9",
            "scenario (a) under ar:0.5 and bernoulli, lambda=0.7",
            ok,
            format!("{} (need >= 0.8 each); {:.0}s", parts.join("; "), t0.elapsed().as_secs_f64()),
        );
    }

    // 5 and 6. Low-rank probability on scenario (c).
    {
        let t0 = Instant::now();
        let lambdas: Vec<f64> = LAMBDAS_EXACT.iter().chain(LAMBDAS_HIGH.iter()).copied().collect();
        let cfg = sweep_config(FnId::C, CovariateLaw::IsoGaussian, KernelSpec::gaussian(), &lambdas, 20);
        let recs = sweep(&cfg).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let mut ok5 = true;
        let mut parts5 = Vec::new();
        for &l in &LAMBDAS_HIGH {
            let (frac, _) = fraction(&recs, l, |r| r.rank <= 2);
            ok5 &= frac >= 0.9;
            parts5.push(format!("{l}: {frac:.2}"));
        }
        verdict(
            &mut outcomes,
            "5",
            "scenario (c), gauss, 20 replicates: P(rank <= 2)",
            ok5,
            format!("{} (need >= 0.9 each); {}; {secs:.0}s", parts5.join(", "), status_counts(&recs)),
        );
        let mut ok6 = true;
        let mut parts6 = Vec::new();
        for &l in &LAMBDAS_EXACT {
            let (frac, _) = fraction(&recs, l, |r| r.rank == 2);
            ok6 &= frac >= 0.7;
            parts6.push(format!("{l}: {frac:.2} [ranks {}]", rank_histogram(&recs, l)));
        }
        verdict(
            &mut outcomes,
            "6",
            "scenario (c), gauss, 20 replicates: P(rank = 2)",
            ok6,
            format!("{} (need >= 0.7 each)", parts6.join(", ")),
        );
    }

    // 8. Linear kernel stays full rank.
    {
        let t0 = Instant::now();
        let cfg = sweep_config(FnId::A, CovariateLaw::IsoGaussian, KernelSpec::linear(), &LAMBDAS_HIGH, 10);
        assert_eq!(cfg.pgd.cap, Some(100_000.0));
        let recs = sweep(&cfg).unwrap();
        let full = recs.iter().filter(|r| r.rank == 50).count();
        verdict(
            &mut outcomes,
            "8",
            "scenario (a), linear kernel, cap 1e5: rank 50 everywhere",
            full == recs.len(),
            format!("{full}/{} records at rank 50; {}; {:.0}s", recs.len(), status_counts(&recs), t0.elapsed().as_secs_f64()),
        );
    }

    // 12. Property suites, 100 randomized cases each.
    {
        let cases = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        // Nearest point: P is PSD, beats 200 PSD candidates, and satisfies
        // the variational inequality <A - P, C - P> <= 0 for PSD C.
        let mut nearest_ok = 0;
        for case in 0..cases {
            let p = 2 + case % 5;
            let a = random_symmetric(&mut rng, p);
            let proj = project_psd(&a).unwrap();
            let psd = eigh(&proj).unwrap().min_eigenvalue() >= -1e-12 * a.frobenius_norm().max(1.0);
            let best = (&a - &proj).frobenius_norm();
            let residual = &a - &proj;
            let mut ok = psd;
            for _ in 0..200 {
                let rank = 1 + rng.random_range(0..p);
                let scale = rng.random_range(0.0..2.0);
                let c = random_psd(&mut rng, p, rank) * scale;
                ok &= best <= (&a - &c).frobenius_norm() + 1e-12;
                ok &= residual.inner(&(&c - &proj)) <= 1e-10 * (1.0 + c.frobenius_norm());
            }
            nearest_ok += ok as usize;
        }

        // Projector idempotence, symmetry and trace.
        let mut proj_ok = 0;
        for case in 0..cases {
            let p = 3 + case % 6;
            let r = 1 + case % p;
            let a = random_psd(&mut rng, p, r);
            let pr = column_space_projector(&a, r).unwrap();
            let m = pr.as_matrix();
            let ok = (m * m - m).amax() <= 1e-10
                && (m - m.transpose()).amax() == 0.0
                && (pr.trace() - r as f64).abs() <= 1e-10
                && subspace_distance(&pr, &pr, SubspaceNorm::Frobenius).unwrap() == 0.0;
            proj_ok += ok as usize;
        }

        // Sweep determinism across worker counts.
        let mut det_ok = 0;
        for case in 0..cases {
            let mut cfg = SweepConfig::new(
                ScenarioSpec {
                    covariate_law: CovariateLaw::IsoGaussian,
                    fn_id: [FnId::A, FnId::B, FnId::E][case % 3],
                    sigma_noise: 0.1,
                    n: 16,
                    p: 5,
                    seed: rng.random(),
                },
                KernelSpec::gaussian(),
            );
            cfg.lambdas = vec![0.3, 1.0];
            cfg.replicates = 2;
            cfg.pgd.max_iter = 40;
            let one = records_to_csv(&sweep(&cfg).unwrap());
            let again = records_to_csv(&sweep(&cfg).unwrap());
            cfg.workers = 3;
            let three = records_to_csv(&sweep(&cfg).unwrap());
            det_ok += (one == three && one == again) as usize;
        }

        // CSV round trip.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let mut csv_ok = 0;
        for _ in 0..cases {
            let recs: Vec<RunRecord> = (0..rng.random_range(0..6))
                .map(|_| RunRecord {
                    seed: rng.random(),
                    lambda: rng.random_range(1e-6..10.0),
                    scenario: "c/ar:0.5".into(),
                    kernel: "mix:1:1,0.5:2".into(),
                    n: rng.random_range(2..1000),
                    p: rng.random_range(1..100),
                    iterations: rng.random_range(0..3000),
                    status: [RunStatus::Converged, RunStatus::MaxIterReached, RunStatus::StepUnderflow, RunStatus::NumericalFailure]
                        [rng.random_range(0..4)],
                    rank: rng.random_range(0..50),
                    dim_s_star: rng.random_range(0..5),
                    subspace_dist_fro: rng.random_range(0.0..3.0),
                    objective_final: f64::from_bits(rng.random::<u64>() >> 2),
                    sharpness_rho_hat: rng.random_bool(0.5).then(|| rng.random_range(-1.0..1.0)),
                    wall_time_s: rng.random_bool(0.5).then(|| rng.random_range(0.0..100.0)),
                })
                .collect();
            write_records(&recs, &path).unwrap();
            csv_ok += (read_records(&path).unwrap() == recs) as usize;
        }

        verdict(
            &mut outcomes,
            "12",
            "property suites",
            [nearest_ok, proj_ok, det_ok, csv_ok].iter().all(|&k| k == cases),
            format!(
                "PSD nearest point {nearest_ok}/{cases}, projector {proj_ok}/{cases}, sweep determinism {det_ok}/{cases}, CSV round trip {csv_ok}/{cases}"
            ),
        );
    }

    outcomes.sort_by_key(|o| o.id.parse::<u32>().unwrap());
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0}s{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
