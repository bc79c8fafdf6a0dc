//! Multilinear pseudo-Boolean polynomials and the compiler that turns the
//! ℓ0-penalized least-squares objective into one.
//!
//! Replacing (X′ᵀX′)⁻¹ by its first-order Neumann approximation
//! α(2I − αX′ᵀX′) makes the refit weights a quadratic function of the
//! selection vector z:
//!
//! ```text
//! w_i = z_i (q′_i − α² Σ_{j≠i} z_j p_ij q_j),   q′_i = α(2−α) q_i
//! ```
//!
//! so the per-sample residual is `y_t − Σ q′_i x_ti z_i + Σ_{i<j} b(t)_ij z_i z_j`
//! with `b(t)_ij = α² p_ij (q_j x_ti + q_i x_tj)`, and its square is a quartic in z.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::GramSummary;

/// Coefficients at or below this magnitude are not stored.
pub const PRUNE_EPS: f64 = 1e-15;

pub const MAX_DEGREE: usize = 4;

/// `constant + Σ c_I Π_{j∈I} z_j` over binary z. Keys are strictly increasing
/// index tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolyJson", try_from = "PolyJson")]
pub struct MultilinearPoly {
    num_vars: usize,
    constant: f64,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl MultilinearPoly {
    pub fn new(num_vars: usize, constant: f64) -> Self {
        MultilinearPoly {
            num_vars,
            constant,
            terms: BTreeMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    pub fn coefficient(&self, indices: &[usize]) -> f64 {
        let mut key = indices.to_vec();
        key.sort_unstable();
        key.dedup();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Adds `coeff` to the monomial over `indices`. Repeated indices collapse
    /// since z² = z; the empty monomial is the constant.
    pub fn add_term(&mut self, indices: &[usize], coeff: f64) -> Result<()> {
        let mut key = indices.to_vec();
        key.sort_unstable();
        key.dedup();
        if let Some(&bad) = key.iter().find(|&&i| i >= self.num_vars) {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: bad + 1,
            });
        }
        if key.is_empty() {
            self.constant += coeff;
            return Ok(());
        }
        if key.len() > MAX_DEGREE {
            return Err(Error::DegreeTooHigh(key.len()));
        }
        let slot = self.terms.entry(key).or_insert(0.0);
        *slot += coeff;
        Ok(())
    }

    /// Drops coefficients with |c| ≤ [`PRUNE_EPS`].
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() > PRUNE_EPS);
    }

    /// Σ|c| over all non-constant coefficients.
    pub fn abs_coefficient_sum(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn evaluate(&self, z: &[bool]) -> Result<f64> {
        if z.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: z.len(),
            });
        }
        Ok(self.constant
            + self
                .terms
                .iter()
                .filter(|(idx, _)| idx.iter().all(|&i| z[i]))
                .map(|(_, c)| c)
                .sum::<f64>())
    }

    /// λ-shifted copy: adds `delta` to every linear coefficient.
    pub fn shift_linear(&self, delta: f64) -> MultilinearPoly {
        let mut out = self.clone();
        for i in 0..self.num_vars {
            out.add_term(&[i], delta).expect("index in range");
        }
        out.prune();
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    num_vars: usize,
    constant: f64,
    terms: Vec<(Vec<usize>, f64)>,
}

impl From<MultilinearPoly> for PolyJson {
    fn from(p: MultilinearPoly) -> Self {
        PolyJson {
            num_vars: p.num_vars,
            constant: p.constant,
            terms: p.terms.into_iter().collect(),
        }
    }
}

impl TryFrom<PolyJson> for MultilinearPoly {
    type Error = Error;

    fn try_from(j: PolyJson) -> Result<Self> {
        let mut poly = MultilinearPoly::new(j.num_vars, j.constant);
        for (idx, c) in j.terms {
            if idx.windows(2).any(|w| w[0] >= w[1]) || idx.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "term {idx:?} is not strictly increasing"
                )));
            }
            poly.add_term(&idx, c)?;
        }
        Ok(poly)
    }
}

/// Quantities shared by every sample when expanding the residual square.
#[derive(Debug, Clone)]
pub struct CompileIntermediates {
    /// q′_i = α(2−α) q_i
    pub q_prime: Vec<f64>,
    alpha_sq: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    d: usize,
}

impl CompileIntermediates {
    pub fn new(gs: &GramSummary) -> Self {
        let d = gs.d();
        let alpha = gs.alpha;
        let q: Vec<f64> = gs.q.iter().copied().collect();
        CompileIntermediates {
            q_prime: q.iter().map(|qi| alpha * (2.0 - alpha) * qi).collect(),
            alpha_sq: alpha * alpha,
            p: (0..d * d).map(|k| gs.p[(k / d, k % d)]).collect(),
            q,
            d,
        }
    }

    /// b(t)_ij = α² p_ij (q_j x_ti + q_i x_tj) for one sample row.
    pub fn b(&self, row: &[f64], i: usize, j: usize) -> f64 {
        self.alpha_sq * self.p[i * self.d + j] * (self.q[j] * row[i] + self.q[i] * row[j])
    }

    /// Fills a d×d row-major table with b(t)_ij for i<j; other entries are
    /// left untouched.
    pub fn fill_b(&self, row: &[f64], table: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for j in i + 1..d {
                table[i * d + j] = self.b(row, i, j);
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Compiles Σ_t (y_t − w(z)ᵀx_t)² + λ‖z‖₀ with Neumann weights w(z) into a
/// quartic polynomial over the d selection bits. Cost is O(N·d⁴).
pub fn compile_objective(ds: &Dataset, gs: &GramSummary, lambda: f64) -> Result<MultilinearPoly> {
    check_lambda(lambda)?;
    let d = ds.d();
    if gs.d() != d || gs.p.nrows() != d || gs.p.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: gs.d(),
        });
    }
    let inter = CompileIntermediates::new(gs);
    let qp = &inter.q_prime;

    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let triples: Vec<(usize, usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).flat_map(move |j| (j + 1..d).map(move |k| (i, j, k))))
        .collect();
    let quads: Vec<(usize, usize, usize, usize)> = triples
        .iter()
        .flat_map(|&(i, j, k)| (k + 1..d).map(move |l| (i, j, k, l)))
        .collect();

    let mut constant = 0.0;
    let mut e = vec![0.0; d];
    let mut f = vec![0.0; pairs.len()];
    let mut g = vec![0.0; triples.len()];
    let mut h = vec![0.0; quads.len()];

    let mut row = vec![0.0; d];
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d * d];
    let x = ds.x();
    for t in 0..ds.n() {
        let yt = ds.y()[t];
        for i in 0..d {
            row[i] = x[(t, i)];
            a[i] = qp[i] * row[i];
        }
        inter.fill_b(&row, &mut b);
        let bij = |i: usize, j: usize| b[i * d + j];

        constant += yt * yt;
        for i in 0..d {
            e[i] += a[i] * a[i] - 2.0 * a[i] * yt;
        }
        for (slot, &(i, j)) in f.iter_mut().zip(&pairs) {
            let bb = bij(i, j);
            *slot += bb * bb + 2.0 * (a[i] * a[j] - (a[i] + a[j] - yt) * bb);
        }
        for (slot, &(i, j, k)) in g.iter_mut().zip(&triples) {
            let (b_ij, b_ik, b_jk) = (bij(i, j), bij(i, k), bij(j, k));
            *slot += 2.0
                * (b_ij * b_ik + b_ij * b_jk + b_ik * b_jk
                    - a[k] * b_ij
                    - a[i] * b_jk
                    - a[j] * b_ik);
        }
        for (slot, &(i, j, k, l)) in h.iter_mut().zip(&quads) {
            *slot += 2.0 * (bij(i, j) * bij(k, l) + bij(i, k) * bij(j, l) + bij(i, l) * bij(j, k));
        }
    }

    let mut poly = MultilinearPoly::new(d, constant);
    for (i, ei) in e.into_iter().enumerate() {
        poly.add_term(&[i], ei + lambda)?;
    }
    for (&(i, j), c) in pairs.iter().zip(f) {
        poly.add_term(&[i, j], c)?;
    }
    for (&(i, j, k), c) in triples.iter().zip(g) {
        poly.add_term(&[i, j, k], c)?;
    }
    for (&(i, j, k, l), c) in quads.iter().zip(h) {
        poly.add_term(&[i, j, k, l], c)?;
    }
    poly.prune();
    Ok(poly)
}

/// Neumann-approximated refit weights for selection `z`, zero off-support.
pub fn approx_weights(ds: &Dataset, gs: &GramSummary, z: &[bool]) -> Result<Vec<f64>> {
    let d = ds.d();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    if gs.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: gs.d(),
        });
    }
    let alpha = gs.alpha;
    Ok((0..d)
        .map(|i| {
            if !z[i] {
                return 0.0;
            }
            let cross: f64 = (0..d)
                .filter(|&j| j != i && z[j])
                .map(|j| gs.p[(i, j)] * gs.q[j])
                .sum();
            alpha * (2.0 - alpha) * gs.q[i] - alpha * alpha * cross
        })
        .collect())
}
