//! Minimizers: exhaustive subset search on the exact objective, exhaustive
//! enumeration of a QUBO, and simulated annealing on a QUBO.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::qubo::{qubo_value, QuboModel};
use crate::regress::refit;

pub const MAX_SUBSET_FEATURES: usize = 25;
pub const MAX_ENUMERATE_VARS: usize = 22;
/// Largest number of degenerate ground states kept by [`enumerate_qubo`].
pub const MAX_GROUND_STATES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Read {
    #[serde(with = "bitstring")]
    pub assignment: Vec<bool>,
    pub energy: f64,
    pub read_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub reads: Vec<Read>,
    /// Position in `reads` of the lowest-energy read.
    pub best: usize,
}

impl SampleSet {
    /// Wraps reads and marks the lowest-energy one. `reads` must be non-empty.
    pub fn from_reads(reads: Vec<Read>) -> Self {
        let mut best = 0;
        for (k, r) in reads.iter().enumerate() {
            let cur = &reads[best];
            if r.energy < cur.energy || (r.energy == cur.energy && r.read_index < cur.read_index) {
                best = k;
            }
        }
        SampleSet { reads, best }
    }

    pub fn best_read(&self) -> &Read {
        &self.reads[self.best]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) mod bitstring {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn to_string(bits: &[bool]) -> String {
        bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn parse(s: &str) -> Option<Vec<bool>> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect()
    }

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).ok_or_else(|| de::Error::custom(format!("invalid bitstring {s:?}")))
    }
}

/// Result of exhaustive subset search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetOptimum {
    pub z: Vec<bool>,
    pub w: Vec<f64>,
    pub objective: f64,
}

/// Exact refit of every one of the 2^d selections, reusable across λ.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    d: usize,
    sse: Vec<f64>,
    tie_tol: f64,
}

impl SubsetTable {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let d = ds.d();
        if d > MAX_SUBSET_FEATURES {
            return Err(Error::SizeGuard {
                what: "exhaustive subset search",
                limit: MAX_SUBSET_FEATURES,
                got: d,
            });
        }
        let sse: Vec<f64> = (0..1usize << d)
            .into_par_iter()
            .map(|mask| refit(ds, &mask_bits(mask, d)).1)
            .collect();
        Ok(SubsetTable {
            d,
            sse,
            tie_tol: 1e-12 * ds.y_sq_sum().max(1.0),
        })
    }

    pub fn sse(&self, z: &[bool]) -> f64 {
        self.sse[bits_mask(z)]
    }

    /// Minimizer of SSE + λ‖z‖₀. Objectives within a relative 1e−12 of each
    /// other tie; ties go to the smaller support, then the lexicographically
    /// smallest z.
    pub fn best(&self, lambda: f64) -> (Vec<bool>, f64) {
        let mut best_z = mask_bits(0, self.d);
        let mut best_obj = self.sse[0];
        let mut best_card = 0;
        for mask in 1..self.sse.len() {
            let card = mask.count_ones() as usize;
            let obj = self.sse[mask] + lambda * card as f64;
            let better = if obj < best_obj - self.tie_tol {
                true
            } else if (obj - best_obj).abs() <= self.tie_tol {
                let z = mask_bits(mask, self.d);
                card < best_card || (card == best_card && z < best_z)
            } else {
                false
            };
            if better {
                best_z = mask_bits(mask, self.d);
                best_obj = obj;
                best_card = card;
            }
        }
        (best_z, best_obj)
    }
}

pub fn mask_bits(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn bits_mask(z: &[bool]) -> usize {
    z.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| 1usize << i)
        .sum()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Best subset by exhaustive enumeration with exact least-squares refits.
pub fn exhaustive_subset_search(ds: &Dataset, lambda: f64) -> Result<SubsetOptimum> {
    check_lambda(lambda)?;
    let table = SubsetTable::new(ds)?;
    let (z, objective) = table.best(lambda);
    let (w, _) = refit(ds, &z);
    Ok(SubsetOptimum { z, w, objective })
}

/// Exact ground states of a QUBO by Gray-code enumeration. The returned reads
/// are the (capped) set of minimum-energy assignments in increasing binary
/// order, energies re-evaluated exactly.
pub fn enumerate_qubo(q: &QuboModel) -> Result<SampleSet> {
    let n = q.num_vars;
    if n > MAX_ENUMERATE_VARS {
        return Err(Error::SizeGuard {
            what: "QUBO enumeration",
            limit: MAX_ENUMERATE_VARS,
            got: n,
        });
    }
    let adj = Adjacency::new(q);
    let tol = 1e-9 * (1.0 + q.abs_coefficient_sum() + q.offset.abs());
    let mut x = vec![false; n];
    let mut field = q.linear.clone();
    let mut energy = q.offset;
    let mut min = energy;
    let mut candidates: Vec<usize> = vec![0];
    let mut gray = 0usize;
    for step in 1..1usize << n {
        let i = step.trailing_zeros() as usize;
        energy += adj.flip(i, &mut x, &mut field);
        gray ^= 1 << i;
        if energy < min - tol {
            min = energy;
            candidates.clear();
            candidates.push(gray);
        } else if energy <= min + tol {
            min = min.min(energy);
            candidates.push(gray);
        }
    }
    candidates.sort_unstable();
    let mut reads: Vec<Read> = candidates
        .into_iter()
        .map(|mask| {
            let assignment = mask_bits(mask, n);
            let energy = qubo_value(q, &assignment).expect("sized");
            Read {
                assignment,
                energy,
                read_index: 0,
            }
        })
        .collect();
    let exact_min = reads.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    reads.retain(|r| r.energy <= exact_min + tol);
    reads.truncate(MAX_GROUND_STATES);
    for (k, r) in reads.iter_mut().enumerate() {
        r.read_index = k;
    }
    Ok(SampleSet::from_reads(reads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub num_reads: usize,
    pub sweeps_per_read: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub seed: u64,
}

impl AnnealSchedule {
    pub const DEFAULT_READS: usize = 100;
    pub const DEFAULT_SWEEPS: usize = 1000;

    /// Schedule with [`default_betas`] for `q`.
    pub fn for_model(
        q: &QuboModel,
        num_reads: usize,
        sweeps_per_read: usize,
        seed: u64,
    ) -> Result<Self> {
        let (beta_initial, beta_final) = default_betas(q)?;
        Ok(AnnealSchedule {
            num_reads,
            sweeps_per_read,
            beta_initial,
            beta_final,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps_per_read == 0 {
            return Err(Error::InvalidSchedule(
                "reads and sweeps must be positive".into(),
            ));
        }
        if !(self.beta_initial > 0.0
            && self.beta_final > self.beta_initial
            && self.beta_final.is_finite())
        {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < beta_initial < beta_final, got {} / {}",
                self.beta_initial, self.beta_final
            )));
        }
        Ok(())
    }

    /// Geometric interpolation from `beta_initial` to `beta_final`.
    pub fn betas(&self) -> Vec<f64> {
        let s = self.sweeps_per_read;
        if s == 1 {
            return vec![self.beta_final];
        }
        let ratio = (self.beta_final / self.beta_initial).ln();
        (0..s)
            .map(|k| self.beta_initial * (ratio * k as f64 / (s - 1) as f64).exp())
            .collect()
    }
}

/// Hot and cold inverse temperatures: ln 2 over the largest single-flip
/// energy bound and ln 100 over the smallest nonzero coefficient magnitude.
pub fn default_betas(q: &QuboModel) -> Result<(f64, f64)> {
    let n = q.num_vars;
    let mut sum_abs: Vec<f64> = q.linear.iter().map(|c| c.abs()).collect();
    let mut min_abs: Vec<f64> = q
        .linear
        .iter()
        .map(|c| if *c != 0.0 { c.abs() } else { f64::INFINITY })
        .collect();
    for (&(i, j), &c) in &q.quadratic {
        if c == 0.0 {
            continue;
        }
        for v in [i, j] {
            sum_abs[v] += c.abs();
            min_abs[v] = min_abs[v].min(c.abs());
        }
    }
    let max_delta = sum_abs.iter().copied().fold(0.0, f64::max);
    let min_delta = (0..n).map(|i| min_abs[i]).fold(f64::INFINITY, f64::min);
    if max_delta == 0.0 || !min_delta.is_finite() {
        return Err(Error::EmptyModel);
    }
    Ok((2f64.ln() / max_delta, 100f64.ln() / min_delta))
}

/// SplitMix64 finalizer over (seed, read_index).
pub fn read_seed(seed: u64, read_index: u64) -> u64 {
    let mut z = seed
        ^ read_index
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Adjacency {
    start: Vec<usize>,
    nbr: Vec<(usize, f64)>,
}

impl Adjacency {
    fn new(q: &QuboModel) -> Self {
        let n = q.num_vars;
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &c) in &q.quadratic {
            lists[i].push((j, c));
            lists[j].push((i, c));
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut nbr = Vec::new();
        for l in lists {
            start.push(nbr.len());
            nbr.extend(l);
        }
        start.push(nbr.len());
        Adjacency { start, nbr }
    }

    /// Energy change of flipping `i`; `field[i]` is lin_i + Σ_j Q_ij x_j.
    #[inline]
    fn delta(i: usize, x: &[bool], field: &[f64]) -> f64 {
        if x[i] {
            -field[i]
        } else {
            field[i]
        }
    }

    /// Flips `i`, updates neighbour fields and returns the energy change.
    #[inline]
    fn flip(&self, i: usize, x: &mut [bool], field: &mut [f64]) -> f64 {
        let delta = Self::delta(i, x, field);
        x[i] = !x[i];
        let sign = if x[i] { 1.0 } else { -1.0 };
        for &(j, c) in &self.nbr[self.start[i]..self.start[i + 1]] {
            field[j] += sign * c;
        }
        delta
    }
}

fn anneal_one(q: &QuboModel, adj: &Adjacency, betas: &[f64], seed: u64, read_index: usize) -> Read {
    let n = q.num_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(read_seed(seed, read_index as u64));
    let mut x: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut field = q.linear.clone();
    for (&(i, j), &c) in &q.quadratic {
        if x[j] {
            field[i] += c;
        }
        if x[i] {
            field[j] += c;
        }
    }
    for &beta in betas {
        for i in 0..n {
            let delta = Adjacency::delta(i, &x, &field);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                adj.flip(i, &mut x, &mut field);
            }
        }
    }
    let energy = qubo_value(q, &x).expect("sized");
    Read {
        assignment: x,
        energy,
        read_index,
    }
}

/// Independent single-flip Metropolis anneals, one per read. Per-read seeds
/// depend only on (seed, read index), so the result does not depend on the
/// thread count.
pub fn simulated_anneal(q: &QuboModel, sched: &AnnealSchedule) -> Result<SampleSet> {
    simulated_anneal_threads(q, sched, None)
}

/// As [`simulated_anneal`], on a dedicated pool of `threads` workers
/// (`None` uses the global pool).
pub fn simulated_anneal_threads(
    q: &QuboModel,
    sched: &AnnealSchedule,
    threads: Option<usize>,
) -> Result<SampleSet> {
    sched.validate()?;
    let adj = Adjacency::new(q);
    let betas = sched.betas();
    let run = || -> Vec<Read> {
        (0..sched.num_reads)
            .into_par_iter()
            .map(|r| anneal_one(q, &adj, &betas, sched.seed, r))
            .collect()
    };
    let reads = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidSchedule(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(SampleSet::from_reads(reads))
}
