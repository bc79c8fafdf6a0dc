#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use subset_qubo::dataset::Dataset;
use subset_qubo::qubo::{qubo_value, QuboModel};

pub fn bits(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn support(z: &[bool]) -> Vec<usize> {
    z.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect()
}

/// ‖y − X_S w_S‖² + λ|S| with w_S = α(2I − αX_Sᵀ X_S)·X_Sᵀ y, from dense products.
pub fn neumann_objective(ds: &Dataset, z: &[bool], lambda: f64, alpha: f64) -> f64 {
    let s = support(z);
    if s.is_empty() {
        return ds.y().norm_squared();
    }
    let xs = ds.x().select_columns(&s);
    let gram = xs.transpose() * &xs;
    let k = s.len();
    let approx = (DMatrix::<f64>::identity(k, k) * 2.0 - gram * alpha) * alpha;
    let w = approx * (xs.transpose() * ds.y());
    (ds.y() - &xs * w).norm_squared() + lambda * k as f64
}

/// Least squares on the support through the normal equations.
pub fn normal_equations_sse(ds: &Dataset, z: &[bool]) -> f64 {
    let s = support(z);
    if s.is_empty() {
        return ds.y().norm_squared();
    }
    let xs = ds.x().select_columns(&s);
    let gram = xs.transpose() * &xs;
    let rhs: DVector<f64> = xs.transpose() * ds.y();
    let w = gram.cholesky().expect("full column rank").solve(&rhs);
    (ds.y() - &xs * w).norm_squared()
}

/// min over auxiliary completions of the QUBO value at original bits z.
pub fn min_over_aux(q: &QuboModel, z: &[bool]) -> f64 {
    let na = q.num_vars - q.num_original;
    let mut best = f64::INFINITY;
    for m in 0..1usize << na {
        let mut x = z.to_vec();
        x.extend(bits(m, na));
        best = best.min(qubo_value(q, &x).unwrap());
    }
    best
}

/// Brute-force QUBO minimum over every assignment.
pub fn qubo_brute_min(q: &QuboModel) -> (f64, Vec<bool>) {
    let mut best = (f64::INFINITY, Vec::new());
    for m in 0..1usize << q.num_vars {
        let x = bits(m, q.num_vars);
        let v = qubo_value(q, &x).unwrap();
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

pub fn dataset(x: Vec<f64>, y: Vec<f64>, n: usize, d: usize) -> Option<Dataset> {
    let x = DMatrix::from_row_slice(n, d, &x);
    Dataset::from_raw(x, DVector::from_vec(y), None).ok()
}
