//! End-to-end fits and the classical-vs-QUBO comparison experiments.
//!
//! Every QUBO solver follows the same protocol: each read is projected onto
//! the original selection bits, refit exactly, scored on the true objective,
//! and the best-scoring read wins (ties to the lowest read index).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, format_real, generate_held_out, generate_synthetic, CsvOptions, Dataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{default_alpha, gram_summary, GramSummary};
use crate::pbf::{compile_objective, MultilinearPoly};
use crate::qubo::{quadratize, QuboModel};
use crate::regress::{mse, score, FitReport, SolverKind, Timings};
use crate::samplers::{
    enumerate_qubo, simulated_anneal_threads, AnnealSchedule, SampleSet, SubsetTable,
};

/// The λ×d values swept for the synthetic experiments.
pub const LAMBDA_TIMES_D_GRID: [f64; 5] = [10.0, 1.0, 0.1, 0.01, 0.001];
/// The λ values used on the Diabetes data.
pub const DIABETES_LAMBDAS: [f64; 5] = [10000.0, 1000.0, 100.0, 10.0, 1.0];
/// Default training-set size for synthetic sweeps; `FULL_N` is the large-scale size.
pub const DESK_N: usize = 300;
pub const FULL_N: usize = 3000;
pub const HELD_OUT_N: usize = 1000;

/// Sampler settings that do not depend on the compiled model. Betas default
/// to [`crate::samplers::default_betas`] of the model being sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSettings {
    pub num_reads: usize,
    pub sweeps_per_read: usize,
    pub seed: u64,
    #[serde(default)]
    pub beta_range: Option<(f64, f64)>,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        AnnealSettings {
            num_reads: AnnealSchedule::DEFAULT_READS,
            sweeps_per_read: AnnealSchedule::DEFAULT_SWEEPS,
            seed: 0,
            beta_range: None,
        }
    }
}

impl AnnealSettings {
    pub fn schedule_for(&self, q: &QuboModel) -> Result<AnnealSchedule> {
        match self.beta_range {
            Some((beta_initial, beta_final)) => Ok(AnnealSchedule {
                num_reads: self.num_reads,
                sweeps_per_read: self.sweeps_per_read,
                beta_initial,
                beta_final,
                seed: self.seed,
            }),
            None => AnnealSchedule::for_model(q, self.num_reads, self.sweeps_per_read, self.seed),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Neumann step size; 2/(d+1) when unset.
    pub alpha: Option<f64>,
    /// Quadratization penalty; 1 + 2·Σ|c| when unset.
    pub penalty: Option<f64>,
    pub anneal: AnnealSettings,
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// A regression instance compiled down to a QUBO.
#[derive(Debug, Clone)]
pub struct CompiledInstance {
    pub gram: GramSummary,
    pub poly: MultilinearPoly,
    pub qubo: QuboModel,
}

pub fn compile_instance(
    ds: &Dataset,
    lambda: f64,
    alpha: Option<f64>,
    penalty: Option<f64>,
) -> Result<CompiledInstance> {
    let gram = gram_summary(ds, alpha)?;
    let poly = compile_objective(ds, &gram, lambda)?;
    let qubo = quadratize(&poly, penalty)?;
    Ok(CompiledInstance { gram, poly, qubo })
}

/// Projects every read onto the selection bits, refits and keeps the read
/// with the smallest exact objective.
pub fn best_of_reads(
    ds: &Dataset,
    q: &QuboModel,
    samples: &SampleSet,
    lambda: f64,
) -> Result<FitReport> {
    let mut cache: HashMap<Vec<bool>, FitReport> = HashMap::new();
    let mut best: Option<(f64, usize, Vec<bool>)> = None;
    for read in &samples.reads {
        let z = q.project(&read.assignment);
        let objective = match cache.get(&z) {
            Some(r) => r.objective,
            None => {
                let r = score(ds, &z, lambda)?;
                let o = r.objective;
                cache.insert(z.clone(), r);
                o
            }
        };
        let better = match &best {
            None => true,
            Some((o, idx, _)) => objective < *o || (objective == *o && read.read_index < *idx),
        };
        if better {
            best = Some((objective, read.read_index, z));
        }
    }
    let (_, _, z) = best.ok_or_else(|| Error::InvalidSchedule("no reads".into()))?;
    let mut report = cache.remove(&z).expect("scored");
    report.read_energies = samples.reads.iter().map(|r| r.energy).collect();
    Ok(report)
}

/// Fits one dataset at one λ with the chosen solver.
pub fn fit(ds: &Dataset, lambda: f64, solver: SolverKind, config: &FitConfig) -> Result<FitReport> {
    match solver {
        SolverKind::Exhaustive => {
            let start = Instant::now();
            let table = SubsetTable::new(ds)?;
            fit_from_table(ds, &table, lambda, start)
        }
        SolverKind::Sa | SolverKind::Enumerate => {
            let start = Instant::now();
            let inst = compile_instance(ds, lambda, config.alpha, config.penalty)?;
            let compile_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let samples = match solver {
                SolverKind::Sa => {
                    let sched = config.anneal.schedule_for(&inst.qubo)?;
                    simulated_anneal_threads(&inst.qubo, &sched, config.threads)?
                }
                _ => enumerate_qubo(&inst.qubo)?,
            };
            let mut report = best_of_reads(ds, &inst.qubo, &samples, lambda)?;
            report.solver = Some(solver);
            report.timings = Some(Timings {
                compile_seconds,
                solve_seconds: start.elapsed().as_secs_f64(),
            });
            Ok(report)
        }
    }
}

fn fit_from_table(
    ds: &Dataset,
    table: &SubsetTable,
    lambda: f64,
    start: Instant,
) -> Result<FitReport> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    let (z, _) = table.best(lambda);
    let mut report = score(ds, &z, lambda)?;
    report.solver = Some(SolverKind::Exhaustive);
    report.timings = Some(Timings {
        compile_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        #[serde(default)]
        target: Option<String>,
        #[serde(default)]
        center: bool,
    },
}

impl DatasetSource {
    fn load(&self) -> Result<(Dataset, Option<Vec<f64>>)> {
        match self {
            DatasetSource::Synthetic(spec) => {
                let (ds, w) = generate_synthetic(spec)?;
                Ok((ds, Some(w)))
            }
            DatasetSource::Csv {
                path,
                target,
                center,
            } => {
                let opts = CsvOptions {
                    target: target
                        .as_deref()
                        .map(|t| t.parse().expect("infallible"))
                        .unwrap_or_default(),
                    center: *center,
                };
                Ok((dataset::load_csv(path, &opts)?, None))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    Absolute(Vec<f64>),
    /// λ = value / d for each dataset.
    TimesD(Vec<f64>),
}

impl LambdaGrid {
    fn values(&self) -> &[f64] {
        match self {
            LambdaGrid::Absolute(v) | LambdaGrid::TimesD(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub datasets: Vec<DatasetSource>,
    pub lambda_grid: LambdaGrid,
    pub solvers: Vec<SolverKind>,
    pub fit: FitConfig,
    /// Held-out rows drawn per synthetic dataset (0 disables test MSE).
    pub n_test: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Synthetic sweep over `ds` feature counts with ⌊d/2⌋-sparse truths.
    pub fn synthetic(dims: &[usize], n: usize, seed: u64) -> Self {
        ExperimentSpec {
            datasets: dims
                .iter()
                .map(|&d| {
                    DatasetSource::Synthetic(SyntheticSpec::half_support(
                        n,
                        d,
                        seed.wrapping_add(d as u64),
                    ))
                })
                .collect(),
            lambda_grid: LambdaGrid::TimesD(LAMBDA_TIMES_D_GRID.to_vec()),
            solvers: vec![SolverKind::Exhaustive, SolverKind::Sa],
            fit: FitConfig {
                anneal: AnnealSettings {
                    seed,
                    ..AnnealSettings::default()
                },
                ..FitConfig::default()
            },
            n_test: HELD_OUT_N,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidExperiment("no datasets".into()));
        }
        let grid = self.lambda_grid.values();
        if grid.is_empty() {
            return Err(Error::InvalidExperiment("empty lambda grid".into()));
        }
        if let Some(bad) = grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidLambda(*bad));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidExperiment("no solvers".into()));
        }
        Ok(())
    }
}

/// One (dataset, λ, QUBO solver) line of a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub d: usize,
    pub lambda_times_d: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub classical: Option<FitReport>,
    pub qubo: Option<FitReport>,
    /// |classical − QUBO| train MSE.
    pub train_mse_gap: Option<f64>,
    pub test_mse_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentSpec,
    pub rows: Vec<ComparisonRow>,
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

impl SweepReport {
    /// Clears wall-clock measurements so the report is reproducible byte for byte.
    pub fn strip_timings(&mut self) {
        for row in &mut self.rows {
            for fit in [&mut row.classical, &mut row.qubo].into_iter().flatten() {
                fit.timings = None;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,d,lambda_times_d,lambda,alpha,qubo_solver,card_classical,card_qubo,objective_classical,objective_qubo,\
             z_classical,z_qubo,compile_seconds,solve_seconds,train_mse_gap,test_mse_gap\n",
        );
        for r in &self.rows {
            let bits = |f: &Option<FitReport>| {
                f.as_ref()
                    .map(|f| crate::samplers::bitstring::to_string(&f.z))
                    .unwrap_or_default()
            };
            let timings = r.qubo.as_ref().and_then(|f| f.timings);
            let cols = [
                r.n.to_string(),
                r.d.to_string(),
                opt_real(r.lambda_times_d),
                format_real(r.lambda),
                format_real(r.alpha),
                r.qubo
                    .as_ref()
                    .and_then(|f| f.solver)
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
                r.classical
                    .as_ref()
                    .map(|f| f.cardinality.to_string())
                    .unwrap_or_default(),
                r.qubo
                    .as_ref()
                    .map(|f| f.cardinality.to_string())
                    .unwrap_or_default(),
                opt_real(r.classical.as_ref().map(|f| f.objective)),
                opt_real(r.qubo.as_ref().map(|f| f.objective)),
                bits(&r.classical),
                bits(&r.qubo),
                opt_real(timings.map(|t| t.compile_seconds)),
                opt_real(timings.map(|t| t.solve_seconds)),
                opt_real(r.train_mse_gap),
                opt_real(r.test_mse_gap),
            ];
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    /// Fixed-width table in the column order N, d, λ×d (or λ), cardinalities,
    /// objectives, compile and solve seconds, MSE gaps.
    pub fn render_table(&self) -> String {
        let times_d = self.rows.iter().any(|r| r.lambda_times_d.is_some());
        let header = [
            "N",
            "d",
            if times_d { "lambda*d" } else { "lambda" },
            "|w|0 classical",
            "|w|0 QUBO",
            "objective classical",
            "objective QUBO",
            "compile (s)",
            "solve (s)",
            "train gap",
            "test gap",
        ];
        let widths = [6, 4, 10, 15, 10, 20, 20, 12, 10, 10, 10];
        let mut out = String::new();
        for (h, w) in header.iter().zip(widths) {
            out.push_str(&format!("{h:>w$} "));
        }
        out.push('\n');
        let dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let timings = r.qubo.as_ref().and_then(|f| f.timings);
            let cells = [
                r.n.to_string(),
                r.d.to_string(),
                format!("{:.4}", r.lambda_times_d.unwrap_or(r.lambda)),
                dash(r.classical.as_ref().map(|f| f.cardinality.to_string())),
                dash(r.qubo.as_ref().map(|f| f.cardinality.to_string())),
                dash(r.classical.as_ref().map(|f| format!("{:.4}", f.objective))),
                dash(r.qubo.as_ref().map(|f| format!("{:.4}", f.objective))),
                dash(timings.map(|t| format!("{:.4}", t.compile_seconds))),
                dash(timings.map(|t| format!("{:.4}", t.solve_seconds))),
                dash(r.train_mse_gap.map(|g| format!("{g:.1e}"))),
                dash(r.test_mse_gap.map(|g| format!("{g:.1e}"))),
            ];
            for (c, w) in cells.iter().zip(widths) {
                out.push_str(&format!("{c:>w$} "));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&json_path, self.to_json()? + "\n").map_err(|e| Error::io(&json_path, e))
    }
}

/// Runs every dataset × λ × solver cell of `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let qubo_solvers: Vec<SolverKind> = spec
        .solvers
        .iter()
        .copied()
        .filter(|s| *s != SolverKind::Exhaustive)
        .collect();
    let want_classical = spec.solvers.contains(&SolverKind::Exhaustive);
    let mut rows = Vec::new();

    for (k, source) in spec.datasets.iter().enumerate() {
        let (ds, true_w) = source.load()?;
        let test = match (source, &true_w) {
            (DatasetSource::Synthetic(s), Some(w)) if spec.n_test > 0 => {
                let seed = s.seed ^ 0x7E57_0000_0000_0000 ^ k as u64;
                Some(generate_held_out(s, w, &ds, spec.n_test, seed)?)
            }
            _ => None,
        };
        let d = ds.d();
        let alpha = spec.fit.alpha.unwrap_or_else(|| default_alpha(d));
        let table_start = Instant::now();
        let table = if want_classical {
            Some(SubsetTable::new(&ds)?)
        } else {
            None
        };
        let table_seconds = table_start.elapsed().as_secs_f64();

        for &value in spec.lambda_grid.values() {
            let (lambda, lambda_times_d) = match spec.lambda_grid {
                LambdaGrid::Absolute(_) => (value, None),
                LambdaGrid::TimesD(_) => (value / d as f64, Some(value)),
            };
            let with_test = |mut f: FitReport| -> Result<FitReport> {
                if let Some(t) = &test {
                    f.mse_test = Some(mse(t, &f.w)?);
                }
                Ok(f)
            };
            let classical = match &table {
                Some(table) => {
                    let start = Instant::now();
                    let mut f = fit_from_table(&ds, table, lambda, start)?;
                    if let Some(t) = f.timings.as_mut() {
                        t.solve_seconds += table_seconds;
                    }
                    Some(with_test(f)?)
                }
                None => None,
            };
            let qubos: Vec<Option<FitReport>> = if qubo_solvers.is_empty() {
                vec![None]
            } else {
                qubo_solvers
                    .iter()
                    .map(|&s| fit(&ds, lambda, s, &spec.fit).and_then(with_test).map(Some))
                    .collect::<Result<_>>()?
            };
            for qubo in qubos {
                let gap = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(a), Some(b)) => Some((a - b).abs()),
                    _ => None,
                };
                let train_mse_gap = gap(
                    classical.as_ref().map(|f| f.mse_train),
                    qubo.as_ref().map(|f| f.mse_train),
                );
                let test_mse_gap = gap(
                    classical.as_ref().and_then(|f| f.mse_test),
                    qubo.as_ref().and_then(|f| f.mse_test),
                );
                rows.push(ComparisonRow {
                    n: ds.n(),
                    d,
                    lambda_times_d,
                    lambda,
                    alpha,
                    classical: classical.clone(),
                    qubo,
                    train_mse_gap,
                    test_mse_gap,
                });
            }
        }
    }
    let report = SweepReport {
        config: spec.clone(),
        rows,
    };
    if let Some(dir) = &spec.output_dir {
        report.write(dir, "report")?;
    }
    Ok(report)
}

/// Classical vs QUBO comparison over synthetic datasets and a λ grid.
pub fn run_synthetic_sweep(spec: &ExperimentSpec) -> Result<SweepReport> {
    run_experiment(spec)
}

/// Classical vs simulated-annealing comparison on the Diabetes table.
pub fn run_diabetes(
    path: impl AsRef<Path>,
    lambdas: &[f64],
    reads: usize,
    config: &FitConfig,
) -> Result<SweepReport> {
    let lambdas = if lambdas.is_empty() {
        DIABETES_LAMBDAS.to_vec()
    } else {
        lambdas.to_vec()
    };
    let mut fit = config.clone();
    fit.anneal.num_reads = reads;
    let spec = ExperimentSpec {
        datasets: vec![DatasetSource::Csv {
            path: path.as_ref().to_path_buf(),
            target: None,
            center: false,
        }],
        lambda_grid: LambdaGrid::Absolute(lambdas),
        solvers: vec![SolverKind::Exhaustive, SolverKind::Sa],
        fit,
        n_test: 0,
        output_dir: None,
    };
    run_experiment(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = ExperimentSpec::synthetic(&[5], 50, 1);
        spec.lambda_grid = LambdaGrid::TimesD(vec![]);
        assert!(matches!(
            run_synthetic_sweep(&spec),
            Err(Error::InvalidExperiment(_))
        ));
        spec.lambda_grid = LambdaGrid::Absolute(vec![-1.0]);
        assert!(matches!(
            run_synthetic_sweep(&spec),
            Err(Error::InvalidLambda(_))
        ));
        spec.lambda_grid = LambdaGrid::Absolute(vec![1.0]);
        spec.solvers.clear();
        assert!(run_synthetic_sweep(&spec).is_err());
    }

    #[test]
    fn huge_lambda_selects_nothing() {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(60, 4, 2, 2)).unwrap();
        let lambda = 2.0 * ds.y_sq_sum();
        let config = FitConfig::default();
        for solver in [
            SolverKind::Exhaustive,
            SolverKind::Sa,
            SolverKind::Enumerate,
        ] {
            let r = fit(&ds, lambda, solver, &config).unwrap();
            assert_eq!(r.cardinality, 0, "{solver}");
            assert_eq!(r.objective, ds.y_sq_sum());
        }
    }

    #[test]
    fn small_sweep_shapes() {
        let mut spec = ExperimentSpec::synthetic(&[4, 5], 80, 3);
        spec.lambda_grid = LambdaGrid::TimesD(vec![0.1, 0.01]);
        spec.n_test = 50;
        spec.fit.anneal.num_reads = 20;
        spec.fit.anneal.sweeps_per_read = 200;
        let mut report = run_synthetic_sweep(&spec).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            let c = row.classical.as_ref().unwrap();
            let q = row.qubo.as_ref().unwrap();
            assert!(q.objective >= c.objective - 1e-12);
            assert!(c.mse_test.is_some() && row.test_mse_gap.is_some());
        }
        assert_eq!(report.to_csv().lines().count(), 5);
        assert!(report.render_table().contains("lambda*d"));
        report.strip_timings();
        let json = report.to_json().unwrap();
        assert!(!json.contains("solve_seconds"));
        let back: SweepReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
