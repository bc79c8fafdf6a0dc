//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subset_qubo::dataset::{
    generate_synthetic, load_csv, CsvOptions, Dataset, SyntheticSpec, XDistribution,
};
use subset_qubo::linalg::{default_alpha, gram_summary, neumann_inverse_approx};
use subset_qubo::pbf::compile_objective;
use subset_qubo::pipeline::{
    compile_instance, fit, run_experiment, AnnealSettings, ExperimentSpec, FitConfig, LambdaGrid,
    DESK_N, LAMBDA_TIMES_D_GRID,
};
use subset_qubo::qubo::{qubo_value, spins, to_ising, QuboModel};
use subset_qubo::regress::SolverKind;
use subset_qubo::samplers::{enumerate_qubo, exhaustive_subset_search};

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(pass: bool, elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    let ok_time = elapsed <= limit;
    outcome(
        pass && ok_time,
        format!(
            "{detail}; {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    loop {
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if let Some(ds) = dataset(x, y, n, d) {
            return ds;
        }
    }
}

fn central_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for inst in 0..60 {
        let d = 1 + inst % 6;
        let n = rng.random_range(2..=50);
        let ds = random_dataset(&mut rng, n, d);
        let gs = gram_summary(&ds, None).unwrap();
        for lambda in [0.0, 0.01, 1.0] {
            let poly = compile_objective(&ds, &gs, lambda).unwrap();
            for m in 0..1usize << d {
                let z = bits(m, d);
                let got = poly.evaluate(&z).unwrap();
                let want = neumann_objective(&ds, &z, lambda, default_alpha(d));
                worst = worst.max((got - want).abs() / want.abs());
            }
        }
        instances += 1;
    }
    within(
        worst <= 1e-8,
        start.elapsed(),
        Duration::from_secs(10),
        format!("{instances} instances, max relative error {worst:.2e} (tol 1e-8)"),
    )
}

fn quadratization_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rel: f64 = 0.0;
    let mut argmin_ok = 0;
    let mut total = 0;
    for d in 1..=5 {
        for rep in 0..4 {
            let ds = if rep % 2 == 0 {
                generate_synthetic(&SyntheticSpec::half_support(100, d, 20 + rep as u64))
                    .unwrap()
                    .0
            } else {
                random_dataset(&mut rng, 40, d)
            };
            let lambda = [0.0, 0.01, 0.1, 1.0][rep] / d as f64;
            let inst = compile_instance(&ds, lambda, None, None).unwrap();
            let q = &inst.qubo;
            let scale = q.penalty_m + inst.poly.abs_coefficient_sum();
            let mut values = Vec::new();
            for m in 0..1usize << d {
                let z = bits(m, d);
                let want = inst.poly.evaluate(&z).unwrap();
                worst_rel = worst_rel.max((min_over_aux(q, &z) - want).abs() / scale);
                values.push(want);
            }
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * scale;
            let ground = enumerate_qubo(q).unwrap();
            let ok = ground.reads.iter().all(|r| {
                let z = q.project(&r.assignment);
                values[z
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| 1 << i)
                    .sum::<usize>()]
                    <= min + tol
            });
            argmin_ok += ok as usize;
            total += 1;
        }
    }
    within(
        worst_rel <= 1e-12 && argmin_ok == total,
        start.elapsed(),
        Duration::from_secs(30),
        format!(
            "{total} instances, max |min_aux - quartic| / (M + sum|c|) = {worst_rel:.2e}, projected ground state = quartic argmin in {argmin_ok}/{total}"
        ),
    )
}

fn ising_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut models = 0;
    for n in 1..=6 {
        for _ in 0..20 {
            let mut q = QuboModel::new(n, rng.random_range(-2.0..2.0));
            for i in 0..n {
                q.add_linear(i, rng.random_range(-3.0..3.0));
                for j in i + 1..n {
                    if rng.random_bool(0.7) {
                        q.add_quadratic(i, j, rng.random_range(-3.0..3.0));
                    }
                }
            }
            let ising = to_ising(&q);
            for m in 0..1usize << n {
                let x = bits(m, n);
                worst = worst
                    .max((qubo_value(&q, &x).unwrap() - ising.value(&spins(&x)).unwrap()).abs());
            }
            models += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{models} models, max |qubo - ising| {worst:.2e} (tol 1e-12)"),
    )
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn gram_and_neumann() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut eig_bad = 0;
    let mut bound_bad = 0;
    let mut worst_ratio: f64 = 0.0;
    for t in 0..100u64 {
        let d = 1 + (t as usize % 8);
        let n = rng.random_range(d + 2..=60);
        let mut spec = SyntheticSpec::new(n, d, 1, 400 + t);
        if t % 2 == 1 {
            spec.x_distribution = XDistribution::StandardNormal;
        }
        let (ds, _) = generate_synthetic(&spec).unwrap();
        let gs = gram_summary(&ds, None).unwrap();
        let eig = SymmetricEigen::new(gs.p.clone()).eigenvalues;
        if eig.min() < -1e-9 || eig.max() > d as f64 + 1e-9 {
            eig_bad += 1;
        }
        let inv =
            gs.p.clone()
                .try_inverse()
                .expect("random design has full rank");
        let rho = eig
            .iter()
            .map(|l| (1.0 - gs.alpha * l).abs())
            .fold(0.0, f64::max);
        let inv_norm = spectral_norm(&inv);
        for k in [0usize, 1, 2, 5, 10] {
            let approx = neumann_inverse_approx(&gs.p, gs.alpha, k).unwrap();
            let err = spectral_norm(&(&inv - approx));
            let bound = inv_norm * rho.powi(k as i32 + 1);
            if bound > 1e-10 {
                worst_ratio = worst_ratio.max(err / bound);
            }
            if err > bound * (1.0 + 1e-9) + 1e-12 {
                bound_bad += 1;
            }
        }
    }
    outcome(
        eig_bad == 0 && bound_bad == 0,
        format!(
            "100 designs: eigenvalues outside [0, d] in {eig_bad}, bound violations {bound_bad}, max err/bound {worst_ratio:.3} where bound > 1e-10"
        ),
    )
}

fn config(seed: u64, reads: usize) -> FitConfig {
    FitConfig {
        anneal: AnnealSettings {
            num_reads: reads,
            seed,
            ..AnnealSettings::default()
        },
        ..FitConfig::default()
    }
}

fn small_lambda_reproduction() -> Outcome {
    let start = Instant::now();
    let mut exhaustive_ok = true;
    let mut cells = Vec::new();
    let mut all_cells_ok = true;
    for d in [5usize, 6, 7] {
        let k = d / 2;
        for ld in [0.1, 0.01, 0.001] {
            let lambda = ld / d as f64;
            let mut matches = 0;
            for seed in 0..10u64 {
                let (ds, _) =
                    generate_synthetic(&SyntheticSpec::half_support(DESK_N, d, seed + d as u64))
                        .unwrap();
                let ex = fit(&ds, lambda, SolverKind::Exhaustive, &FitConfig::default()).unwrap();
                if ex.cardinality != k || (ex.objective - lambda * k as f64).abs() > 1e-9 {
                    exhaustive_ok = false;
                }
                let sa = fit(&ds, lambda, SolverKind::Sa, &config(seed, 100)).unwrap();
                if (sa.objective - ex.objective).abs() <= 1e-9 {
                    matches += 1;
                }
            }
            all_cells_ok &= matches >= 9;
            cells.push(format!("d{d}/{ld}:{matches}"));
        }
    }
    within(
        exhaustive_ok && all_cells_ok,
        start.elapsed(),
        Duration::from_secs(120),
        format!(
            "exhaustive = lambda*k_true: {}; SA matches per cell (need 9/10): {}",
            if exhaustive_ok { "all" } else { "NO" },
            cells.join(" ")
        ),
    )
}

fn read_count_monotonicity() -> Outcome {
    let start = Instant::now();
    let d = 10;
    let (ds, _) = generate_synthetic(&SyntheticSpec::half_support(DESK_N, d, d as u64)).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for ld in LAMBDA_TIMES_D_GRID {
        let lambda = ld / d as f64;
        let a = fit(&ds, lambda, SolverKind::Sa, &config(0, 100)).unwrap();
        let b = fit(&ds, lambda, SolverKind::Sa, &config(0, 500)).unwrap();
        ok &= b.objective <= a.objective;
        cells.push(format!("{ld}: {:.6} <= {:.6}", b.objective, a.objective));
    }
    within(
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        format!("500 vs 100 reads, {}", cells.join(", ")),
    )
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn diabetes() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut any = false;
    for file in ["diabetes.csv", "diabetes_raw.csv"] {
        let ds = match load_csv(data_dir().join(file), &CsvOptions::default()) {
            Ok(ds) => ds,
            Err(e) => {
                lines.push(format!("{file}: {e}"));
                continue;
            }
        };
        let hi = exhaustive_subset_search(&ds, 10000.0).unwrap();
        let lo = exhaustive_subset_search(&ds, 1.0).unwrap();
        let card = |z: &[bool]| z.iter().filter(|&&b| b).count();
        let rel_hi = (hi.objective - 11561403.16).abs() / 11561403.16;
        let rel_lo = (lo.objective - 11493905.03).abs() / 11493905.03;
        let pass = card(&hi.z) == 6 && card(&lo.z) == 10 && rel_hi <= 0.005 && rel_lo <= 0.005;
        any |= pass;
        lines.push(format!(
            "{file}: {} card {} obj {:.2} ({:.1e}), card {} obj {:.2} ({:.1e})",
            if pass { "ok" } else { "off" },
            card(&hi.z),
            hi.objective,
            rel_hi,
            card(&lo.z),
            lo.objective,
            rel_lo
        ));
    }
    within(
        any,
        start.elapsed(),
        Duration::from_secs(60),
        lines.join("; "),
    )
}

fn mse_gap() -> Outcome {
    let mut spec = ExperimentSpec::synthetic(&[5, 6, 7, 8, 9, 10], DESK_N, 0);
    spec.lambda_grid = LambdaGrid::TimesD(vec![1.0, 0.1, 0.01, 0.001]);
    let report = run_experiment(&spec).unwrap();
    let gaps: Vec<f64> = report
        .rows
        .iter()
        .map(|r| r.test_mse_gap.expect("held-out set"))
        .collect();
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    let bad = gaps.iter().filter(|&&g| g >= 1e-6 || g.is_nan()).count();
    outcome(
        bad == 0,
        format!(
            "{} cells, held-out gap >= 1e-6 in {bad}, max gap {worst:.2e}",
            gaps.len()
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_subset-qubo"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let diabetes = data_dir().join("diabetes.csv");
    let diabetes = diabetes.to_str().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec![
            "fit",
            "a.csv",
            "--lambda-times-d",
            "0.1",
            "--seed",
            "11",
            "--format",
            "json",
        ],
        vec![
            "fit",
            "a.csv",
            "--lambda",
            "0.05",
            "--solver",
            "enumerate",
            "--format",
            "csv",
        ],
        vec![
            "fit",
            "a.csv",
            "--lambda",
            "0.05",
            "--solver",
            "exhaustive",
            "--format",
            "json",
        ],
        vec![
            "sweep", "--dims", "5,6", "--n", "80", "--n-test", "40", "--reads", "20", "--seed",
            "4", "--format", "json",
        ],
        vec![
            "diabetes", diabetes, "--lambda", "10000,1", "--reads", "20", "--seed", "9",
            "--format", "csv",
        ],
        vec!["export-qubo", "a.csv", "--lambda", "0.02"],
        vec!["solve-qubo", "m.qubo", "--seed", "2", "--reads", "30"],
        vec![
            "solve-qubo",
            "m.qubo",
            "--seed",
            "2",
            "--reads",
            "30",
            "--data",
            "a.csv",
            "--lambda",
            "0.02",
        ],
    ];
    let prepare = || -> Result<(), String> {
        cli(
            dir,
            &[
                "gen", "--d", "6", "--n", "150", "--seed", "3", "--output", "a.csv",
            ],
        )?;
        cli(
            dir,
            &[
                "export-qubo",
                "a.csv",
                "--lambda",
                "0.02",
                "--output",
                "m.qubo",
            ],
        )?;
        Ok(())
    };
    if let Err(e) = prepare() {
        return outcome(false, e);
    }
    let gen_a = std::fs::read(dir.join("a.csv")).unwrap();
    let mut identical = 0;
    let mut failures = Vec::new();
    for args in &invocations {
        let runs: Result<Vec<Vec<u8>>, String> = [None, Some("1"), Some("4")]
            .iter()
            .map(|t| {
                let mut a = args.clone();
                // export-qubo has no parallel work and no --threads flag
                if let (Some(t), false) = (t, args[0] == "export-qubo") {
                    a.extend(["--threads", t]);
                }
                cli(dir, &a)
            })
            .collect();
        match runs {
            Ok(r) if r.iter().all(|o| o == &r[0]) && !r[0].is_empty() => identical += 1,
            Ok(_) => failures.push(args[0].to_string()),
            Err(e) => failures.push(e),
        }
    }
    let regen = cli(
        dir,
        &[
            "gen", "--d", "6", "--n", "150", "--seed", "3", "--output", "b.csv",
        ],
    )
    .is_ok()
        && std::fs::read(dir.join("b.csv")).ok() == Some(gen_a);
    outcome(
        failures.is_empty() && regen,
        format!(
            "{identical}/{} invocations byte-identical across repeats and --threads 1/4, gen repeatable: {regen}{}",
            invocations.len(),
            if failures.is_empty() { String::new() } else { format!("; differing: {}", failures.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("central algebraic identity", central_identity),
        ("quadratization soundness", quadratization_soundness),
        ("Ising equivalence", ising_equivalence),
        ("Gram spectrum and Neumann bound", gram_and_neumann),
        (
            "small-lambda synthetic reproduction",
            small_lambda_reproduction,
        ),
        ("read-count monotonicity", read_count_monotonicity),
        ("Diabetes reference objectives", diabetes),
        ("held-out MSE gap", mse_gap),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!(
            "criterion {}: {} {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
