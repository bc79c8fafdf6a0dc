//! Quadratic binary models: reduction from quartic polynomials, Ising
//! conversion and the plain-text QUBO format.
//!
//! Reduction replaces a variable pair (i, j) shared by higher-degree terms
//! with an auxiliary bit u and adds the gadget
//! `M·(z_i z_j − 2 z_i u − 2 z_j u + 3u)`, which is 0 when u = z_i z_j and at
//! least M otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::format_real;
use crate::error::{Error, Result};
use crate::pbf::{MultilinearPoly, MAX_DEGREE};

/// Auxiliary variable `aux` standing for the product `left * right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxDef {
    pub aux: usize,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    pub num_vars: usize,
    pub num_original: usize,
    pub offset: f64,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub aux_defs: Vec<AuxDef>,
    pub penalty_m: f64,
}

impl QuboModel {
    /// Model with no auxiliaries and all-zero coefficients.
    pub fn new(num_vars: usize, offset: f64) -> Self {
        QuboModel {
            num_vars,
            num_original: num_vars,
            offset,
            linear: vec![0.0; num_vars],
            quadratic: BTreeMap::new(),
            aux_defs: Vec::new(),
            penalty_m: 1.0,
        }
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        self.linear[i] += c;
    }

    /// Adds `c·x_i·x_j`; i = j folds into the linear term.
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.add_linear(i, c);
            return;
        }
        let key = (i.min(j), i.max(j));
        *self.quadratic.entry(key).or_insert(0.0) += c;
    }

    fn drop_zeros(&mut self) {
        self.quadratic.retain(|_, c| *c != 0.0);
    }

    pub fn num_aux(&self) -> usize {
        self.num_vars - self.num_original
    }

    /// Restriction of an assignment to the original variables.
    pub fn project(&self, x: &[bool]) -> Vec<bool> {
        x[..self.num_original].to_vec()
    }

    /// Completes an assignment of the original variables with consistent
    /// auxiliary values.
    pub fn complete(&self, z: &[bool]) -> Vec<bool> {
        let mut x = z.to_vec();
        x.resize(self.num_vars, false);
        for def in &self.aux_defs {
            x[def.aux] = x[def.left] && x[def.right];
        }
        x
    }

    pub fn aux_consistent(&self, x: &[bool]) -> bool {
        self.aux_defs
            .iter()
            .all(|def| x[def.aux] == (x[def.left] && x[def.right]))
    }

    /// Sum of |coefficient| over linear and quadratic terms.
    pub fn abs_coefficient_sum(&self) -> f64 {
        self.linear.iter().map(|c| c.abs()).sum::<f64>()
            + self.quadratic.values().map(|c| c.abs()).sum::<f64>()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# subset-qubo model");
        let _ = writeln!(out, "p qubo {} {}", self.num_vars, self.num_original);
        let _ = writeln!(out, "offset {}", format_real(self.offset));
        for (i, &c) in self.linear.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(out, "{i} {i} {}", format_real(c));
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            let _ = writeln!(out, "{i} {j} {}", format_real(c));
        }
        let _ = writeln!(out, "# penalty {}", format_real(self.penalty_m));
        for def in &self.aux_defs {
            let _ = writeln!(out, "# aux {} = {}*{}", def.aux, def.left, def.right);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::QuboFormat { line, message };
        let mut model: Option<QuboModel> = None;
        let mut penalty = None;
        let mut aux_defs = Vec::new();
        let mut offset_seen = false;
        let mut seen_linear = std::collections::BTreeSet::new();

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(rest) = comment.strip_prefix("penalty ") {
                    let v: f64 = rest
                        .trim()
                        .parse()
                        .map_err(|_| err(lineno, format!("bad penalty {rest:?}")))?;
                    penalty = Some(v);
                } else if let Some(rest) = comment.strip_prefix("aux ") {
                    aux_defs.push(
                        parse_aux(rest)
                            .ok_or_else(|| err(lineno, format!("bad aux definition {rest:?}")))?,
                    );
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["p", "qubo", nv, no] => {
                    if model.is_some() {
                        return Err(err(lineno, "duplicate header".into()));
                    }
                    let nv: usize = nv.parse().map_err(|_| err(lineno, "bad num_vars".into()))?;
                    let no: usize = no
                        .parse()
                        .map_err(|_| err(lineno, "bad num_original".into()))?;
                    if no > nv || nv == 0 {
                        return Err(err(lineno, format!("invalid sizes {nv} / {no}")));
                    }
                    let mut m = QuboModel::new(nv, 0.0);
                    m.num_original = no;
                    model = Some(m);
                }
                ["offset", v] => {
                    let m = model
                        .as_mut()
                        .ok_or_else(|| err(lineno, "offset before header".into()))?;
                    if offset_seen {
                        return Err(err(lineno, "duplicate offset".into()));
                    }
                    m.offset = v
                        .parse()
                        .map_err(|_| err(lineno, format!("bad real {v:?}")))?;
                    offset_seen = true;
                }
                [i, j, v] => {
                    let m = model
                        .as_mut()
                        .ok_or_else(|| err(lineno, "entry before header".into()))?;
                    let i: usize = i
                        .parse()
                        .map_err(|_| err(lineno, format!("bad index {i:?}")))?;
                    let j: usize = j
                        .parse()
                        .map_err(|_| err(lineno, format!("bad index {j:?}")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| err(lineno, format!("bad real {v:?}")))?;
                    if i > j || j >= m.num_vars {
                        return Err(err(
                            lineno,
                            format!("index pair ({i}, {j}) out of order or range"),
                        ));
                    }
                    if !v.is_finite() {
                        return Err(err(lineno, "non-finite coefficient".into()));
                    }
                    if i == j {
                        if !seen_linear.insert(i) {
                            return Err(err(lineno, format!("duplicate linear term {i}")));
                        }
                        m.linear[i] = v;
                    } else if m.quadratic.insert((i, j), v).is_some() {
                        return Err(err(lineno, format!("duplicate quadratic term ({i}, {j})")));
                    }
                }
                _ => return Err(err(lineno, format!("unrecognized line {line:?}"))),
            }
        }
        let mut m = model.ok_or_else(|| err(0, "missing header".into()))?;
        for def in &aux_defs {
            if def.aux < m.num_original
                || def.aux >= m.num_vars
                || def.left >= def.aux
                || def.right >= def.aux
            {
                return Err(err(0, format!("aux {} has invalid parents", def.aux)));
            }
        }
        if aux_defs.len() != m.num_aux() {
            return Err(err(
                0,
                format!(
                    "{} aux definitions for {} auxiliary variables",
                    aux_defs.len(),
                    m.num_aux()
                ),
            ));
        }
        m.aux_defs = aux_defs;
        if let Some(p) = penalty {
            m.penalty_m = p;
        }
        m.drop_zeros();
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_aux(rest: &str) -> Option<AuxDef> {
    let (aux, prod) = rest.split_once('=')?;
    let (left, right) = prod.split_once('*')?;
    Some(AuxDef {
        aux: aux.trim().parse().ok()?,
        left: left.trim().parse().ok()?,
        right: right.trim().parse().ok()?,
    })
}

/// offset + Σ linear_i x_i + Σ quadratic_ij x_i x_j, gadget terms included.
pub fn qubo_value(q: &QuboModel, x: &[bool]) -> Result<f64> {
    if x.len() != q.num_vars {
        return Err(Error::DimensionMismatch {
            expected: q.num_vars,
            got: x.len(),
        });
    }
    let linear: f64 = q
        .linear
        .iter()
        .zip(x)
        .filter(|(_, &b)| b)
        .map(|(c, _)| c)
        .sum();
    let quad: f64 = q
        .quadratic
        .iter()
        .filter(|(&(i, j), _)| x[i] && x[j])
        .map(|(_, c)| c)
        .sum();
    Ok(q.offset + linear + quad)
}

/// Reduces a polynomial of degree ≤ 4 to a QUBO by repeated pair
/// substitution. The pair shared by the most terms of degree ≥ 3 is replaced
/// first, ties going to the lexicographically smallest pair. Without an
/// explicit penalty M = 1 + 2·Σ|c| over the non-constant coefficients.
pub fn quadratize(poly: &MultilinearPoly, penalty: Option<f64>) -> Result<QuboModel> {
    let degree = poly.degree();
    if degree > MAX_DEGREE {
        return Err(Error::DegreeTooHigh(degree));
    }
    let m = match penalty {
        Some(p) if p > 0.0 && p.is_finite() => p,
        Some(p) => return Err(Error::InvalidPenalty(p)),
        None => 1.0 + 2.0 * poly.abs_coefficient_sum(),
    };

    let mut terms: BTreeMap<Vec<usize>, f64> = poly.terms().clone();
    let mut next = poly.num_vars();
    let mut aux_defs = Vec::new();
    loop {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for key in terms.keys().filter(|k| k.len() >= 3) {
            for a in 0..key.len() {
                for b in a + 1..key.len() {
                    *counts.entry((key[a], key[b])).or_insert(0) += 1;
                }
            }
        }
        let mut best: Option<((usize, usize), usize)> = None;
        for (&pair, &count) in &counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((pair, count));
            }
        }
        let Some(((i, j), _)) = best else { break };

        let aux = next;
        next += 1;
        aux_defs.push(AuxDef {
            aux,
            left: i,
            right: j,
        });
        let affected: Vec<Vec<usize>> = terms
            .keys()
            .filter(|k| k.len() >= 3 && k.contains(&i) && k.contains(&j))
            .cloned()
            .collect();
        for key in affected {
            let c = terms.remove(&key).expect("key present");
            let mut reduced: Vec<usize> = key.into_iter().filter(|&v| v != i && v != j).collect();
            reduced.push(aux);
            *terms.entry(reduced).or_insert(0.0) += c;
        }
    }

    let mut model = QuboModel::new(next, poly.constant());
    model.num_original = poly.num_vars();
    model.penalty_m = m;
    for (key, &c) in &terms {
        match key.as_slice() {
            [i] => model.add_linear(*i, c),
            [i, j] => model.add_quadratic(*i, *j, c),
            _ => unreachable!("reduction leaves degree ≤ 2"),
        }
    }
    for def in &aux_defs {
        model.add_quadratic(def.left, def.right, m);
        model.add_quadratic(def.left, def.aux, -2.0 * m);
        model.add_quadratic(def.right, def.aux, -2.0 * m);
        model.add_linear(def.aux, 3.0 * m);
    }
    model.aux_defs = aux_defs;
    model.drop_zeros();
    Ok(model)
}

/// Spin model Σ h_i s_i + Σ J_ij s_i s_j + offset over s ∈ {−1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub num_spins: usize,
    pub offset: f64,
    pub h: Vec<f64>,
    pub j: BTreeMap<(usize, usize), f64>,
}

impl IsingModel {
    pub fn value(&self, s: &[i8]) -> Result<f64> {
        if s.len() != self.num_spins {
            return Err(Error::DimensionMismatch {
                expected: self.num_spins,
                got: s.len(),
            });
        }
        let field: f64 = self.h.iter().zip(s).map(|(h, &si)| h * f64::from(si)).sum();
        let coupling: f64 = self
            .j
            .iter()
            .map(|(&(u, v), c)| c * f64::from(s[u]) * f64::from(s[v]))
            .sum();
        Ok(self.offset + field + coupling)
    }
}

/// Spin image s = 2x − 1.
pub fn spins(x: &[bool]) -> Vec<i8> {
    x.iter().map(|&b| if b { 1 } else { -1 }).collect()
}

/// Substitutes x = (1 + s)/2.
pub fn to_ising(q: &QuboModel) -> IsingModel {
    let mut h: Vec<f64> = q.linear.iter().map(|a| a / 2.0).collect();
    let mut offset = q.offset + q.linear.iter().map(|a| a / 2.0).sum::<f64>();
    let mut j = BTreeMap::new();
    for (&(u, v), &b) in &q.quadratic {
        let quarter = b / 4.0;
        h[u] += quarter;
        h[v] += quarter;
        offset += quarter;
        if quarter != 0.0 {
            j.insert((u, v), quarter);
        }
    }
    IsingModel {
        num_spins: q.num_vars,
        offset,
        h,
        j,
    }
}
