//! Dense kernels: Gram summaries, minimum-norm least squares, the truncated
//! Neumann-series inverse and symmetric eigenvalues.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

/// Default Neumann step size 2/(d+1).
pub fn default_alpha(d: usize) -> f64 {
    2.0 / (d as f64 + 1.0)
}

/// XᵀX, Xᵀy and the Neumann step size for a normalized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSummary {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub alpha: f64,
}

impl GramSummary {
    pub fn d(&self) -> usize {
        self.q.len()
    }
}

pub fn gram_summary(ds: &Dataset, alpha_override: Option<f64>) -> Result<GramSummary> {
    let d = ds.d();
    let max = default_alpha(d);
    let alpha = match alpha_override {
        Some(a) if a > 0.0 && a <= max => a,
        Some(a) => return Err(Error::AlphaOutOfRange { alpha: a, max }),
        None => max,
    };
    let x = ds.x();
    let gram = x.tr_mul(x);
    let p = (&gram + gram.transpose()) * 0.5;
    let q = x.tr_mul(ds.y());
    Ok(GramSummary { p, q, alpha })
}

/// Minimum-norm minimizer of ‖y − X′w‖₂ via SVD.
pub fn least_squares(x_sub: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let cols = x_sub.ncols();
    if cols == 0 {
        return DVector::zeros(0);
    }
    let svd = x_sub.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return DVector::zeros(cols);
    }
    let cutoff = SINGULAR_CUTOFF * sigma_max;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut coords = u.tr_mul(y);
    for (c, &s) in coords.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cutoff { *c / s } else { 0.0 };
    }
    v_t.tr_mul(&coords)
}

/// α·Σ_{i=0..order} (I − α·P)^i, the order-`order` Neumann approximation of P⁻¹.
pub fn neumann_inverse_approx(
    p_sub: &DMatrix<f64>,
    alpha: f64,
    order: usize,
) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange {
            alpha,
            max: default_alpha(p_sub.nrows()),
        });
    }
    let n = p_sub.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let step = &identity - p_sub * alpha;
    let mut term = identity.clone();
    let mut sum = identity;
    for _ in 0..order {
        term = &term * &step;
        sum += &term;
    }
    Ok(sum * alpha)
}

/// Largest absolute asymmetry |p_ij − p_ji|.
pub fn asymmetry(p: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in i + 1..p.ncols() {
            worst = worst.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    if p.nrows() != p.ncols() {
        return Err(Error::DimensionMismatch {
            expected: p.nrows(),
            got: p.ncols(),
        });
    }
    let scale = p.amax().max(1.0);
    let asym = asymmetry(p);
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let n = p.nrows();
    let mut a = (p + p.transpose()) * 0.5;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for k in 0..n {
            for l in k + 1..n {
                let akl = a[(k, l)];
                if akl == 0.0 {
                    continue;
                }
                let theta = (a[(l, l)] - a[(k, k)]) / (2.0 * akl);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let ark = a[(r, k)];
                    let arl = a[(r, l)];
                    a[(r, k)] = c * ark - s * arl;
                    a[(r, l)] = s * ark + c * arl;
                }
                for r in 0..n {
                    let akr = a[(k, r)];
                    let alr = a[(l, r)];
                    a[(k, r)] = c * akr - s * alr;
                    a[(l, r)] = s * akr + c * alr;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Extremal eigenvalues (λ_min, λ_max) of a symmetric matrix. For a Gram
/// matrix of d unit-norm columns both lie in [0, d].
pub fn eigen_range_check(p: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(p)?;
    match (eig.first(), eig.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        }),
    }
}
