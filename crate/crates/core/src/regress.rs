//! Scoring of feature selections on the exact ℓ0-penalized objective.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_real, Dataset};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::samplers::bitstring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exhaustive,
    Sa,
    Enumerate,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::Sa => "sa",
            SolverKind::Enumerate => "enumerate",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exhaustive" => Ok(SolverKind::Exhaustive),
            "sa" => Ok(SolverKind::Sa),
            "enumerate" => Ok(SolverKind::Enumerate),
            other => Err(format!(
                "unknown solver {other:?} (expected exhaustive, sa or enumerate)"
            )),
        }
    }
}

/// Wall-clock seconds. `compile` covers Gram, polynomial and QUBO
/// construction; `solve` covers sampling and refits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub compile_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(with = "bitstring")]
    pub z: Vec<bool>,
    pub w: Vec<f64>,
    pub cardinality: usize,
    pub objective: f64,
    pub sse: f64,
    pub mse_train: f64,
    #[serde(default)]
    pub mse_test: Option<f64>,
    pub lambda: f64,
    #[serde(default)]
    pub solver: Option<SolverKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    /// QUBO energy of every read, in read order (sampling solvers only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub read_energies: Vec<f64>,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_header(d: usize) -> String {
        let mut cols: Vec<String> = [
            "solver",
            "lambda",
            "z",
            "cardinality",
            "objective",
            "sse",
            "mse_train",
            "mse_test",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend((0..d).map(|j| format!("w{j}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.solver.map(|s| s.to_string()).unwrap_or_default(),
            format_real(self.lambda),
            bitstring::to_string(&self.z),
            self.cardinality.to_string(),
            format_real(self.objective),
            format_real(self.sse),
            format_real(self.mse_train),
            self.mse_test.map(format_real).unwrap_or_default(),
        ];
        cols.extend(self.w.iter().map(|&v| format_real(v)));
        cols.join(",")
    }

    /// Two-column human-readable summary with 4-decimal reals.
    pub fn to_table(&self) -> String {
        let mut rows = vec![
            (
                "solver",
                self.solver
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "-".into()),
            ),
            ("lambda", format!("{:.4}", self.lambda)),
            ("z", bitstring::to_string(&self.z)),
            ("cardinality", self.cardinality.to_string()),
            ("objective", format!("{:.4}", self.objective)),
            ("sse", format!("{:.4}", self.sse)),
            ("mse_train", format!("{:.4}", self.mse_train)),
        ];
        if let Some(m) = self.mse_test {
            rows.push(("mse_test", format!("{m:.4}")));
        }
        if let Some(t) = self.timings {
            rows.push(("compile_s", format!("{:.4}", t.compile_seconds)));
            rows.push(("solve_s", format!("{:.4}", t.solve_seconds)));
        }
        let weights: Vec<String> = self.w.iter().map(|v| format!("{v:.4}")).collect();
        rows.push(("w", weights.join(" ")));
        rows.iter().map(|(k, v)| format!("{k:<12} {v}\n")).collect()
    }
}

/// Exact least-squares refit on the selected columns. Returns the full-length
/// weight vector (zeros off-support) and the residual sum of squares.
pub fn refit(ds: &Dataset, z: &[bool]) -> (Vec<f64>, f64) {
    let support: Vec<usize> = z
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| j)
        .collect();
    let mut w = vec![0.0; ds.d()];
    if support.is_empty() {
        return (w, ds.y_sq_sum());
    }
    let x_sub = ds.x().select_columns(&support);
    let w_sub = least_squares(&x_sub, ds.y());
    let resid = ds.y() - &x_sub * &w_sub;
    for (&j, &v) in support.iter().zip(w_sub.iter()) {
        w[j] = v;
    }
    (w, resid.norm_squared())
}

/// Refits the selection and evaluates SSE + λ‖z‖₀.
pub fn score(ds: &Dataset, z: &[bool], lambda: f64) -> Result<FitReport> {
    if z.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            got: z.len(),
        });
    }
    let (w, sse) = refit(ds, z);
    let cardinality = z.iter().filter(|&&b| b).count();
    Ok(FitReport {
        z: z.to_vec(),
        w,
        cardinality,
        objective: sse + lambda * cardinality as f64,
        sse,
        mse_train: sse / ds.n() as f64,
        mse_test: None,
        lambda,
        solver: None,
        timings: None,
        read_energies: Vec::new(),
    })
}

/// (1/N)·Σ_t (y_t − wᵀx_t)².
pub fn mse(ds: &Dataset, w: &[f64]) -> Result<f64> {
    if w.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            got: w.len(),
        });
    }
    let resid = ds.y() - ds.x() * DVector::from_column_slice(w);
    Ok(resid.norm_squared() / ds.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    #[test]
    fn empty_selection() {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(30, 4, 2, 1)).unwrap();
        let r = score(&ds, &[false; 4], 0.7).unwrap();
        assert_eq!(r.objective, ds.y_sq_sum());
        assert_eq!(r.w, vec![0.0; 4]);
        assert_eq!(r.cardinality, 0);
        let m = mse(&ds, &[0.0; 4]).unwrap();
        assert!((m - ds.y_sq_sum() / 30.0).abs() < 1e-15);
    }

    #[test]
    fn true_support_is_exact() {
        let (ds, w) = generate_synthetic(&SyntheticSpec::new(300, 5, 2, 7)).unwrap();
        let z: Vec<bool> = w.iter().map(|&v| v != 0.0).collect();
        let r = score(&ds, &z, 0.02).unwrap();
        assert!(r.sse <= 1e-10);
        assert!((r.objective - 0.04).abs() <= 1e-9);
        assert!(mse(&ds, &w).unwrap() <= 1e-12);
        for (a, b) in r.w.iter().zip(&w) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn report_invariants() {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(40, 5, 3, 3)).unwrap();
        let z = [true, false, true, true, false];
        let r = score(&ds, &z, 0.3).unwrap();
        assert_eq!(r.cardinality, 3);
        assert!((r.objective - (r.sse + 0.3 * 3.0)).abs() <= 1e-10);
        assert_eq!(r.w[1], 0.0);
        assert_eq!(r.w[4], 0.0);
        assert!((r.mse_train - mse(&ds, &r.w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(10, 3, 1, 0)).unwrap();
        assert!(score(&ds, &[true], 0.0).is_err());
        assert!(mse(&ds, &[0.0; 2]).is_err());
    }

    #[test]
    fn json_and_csv_forms() {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(10, 3, 1, 0)).unwrap();
        let mut r = score(&ds, &[true, false, true], 0.1).unwrap();
        r.solver = Some(SolverKind::Sa);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"z\": \"101\""));
        assert!(json.contains("\"solver\": \"sa\""));
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(
            FitReport::csv_header(3).split(',').count(),
            r.csv_row().split(',').count()
        );
        assert!(r.to_table().contains("cardinality  2"));
    }

    #[test]
    fn solver_names() {
        for s in [
            SolverKind::Exhaustive,
            SolverKind::Sa,
            SolverKind::Enumerate,
        ] {
            assert_eq!(s.as_str().parse::<SolverKind>().unwrap(), s);
        }
        assert!("tabu".parse::<SolverKind>().is_err());
    }
}
