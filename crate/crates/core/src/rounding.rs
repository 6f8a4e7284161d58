//! Random-hyperplane rounding and cut evaluation.
//!
//! Cut values are in single-counted edge-weight units: the weight of edges
//! whose endpoints land on different sides.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Trial
//! `t` uses stream `t` of that key, so trials are independent of each other
//! and of the total trial count. Normal deviates use the ziggurat sampler of
//! `rand_distr`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{psd_factor, Entry, SymMatrix};

/// Largest `n` accepted by [`brute_force_maxcut`].
pub const BRUTE_FORCE_MAX_N: usize = 22;

/// Eigenvalue clipping used when factoring a solution for rounding.
pub const DEFAULT_CLIP: f64 = 1e-6;

/// Best cut found over a number of rounding trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub assignment: Vec<i8>,
    pub cut: i64,
    pub trials: usize,
    pub seed: u64,
    pub mean_cut: f64,
}

/// Total weight of edges crossing the partition `x`.
pub fn cut_value(g: &Graph, x: &[i8]) -> Result<i64> {
    check_assignment(g, x)?;
    Ok(g.edges().iter().filter(|e| x[e.u] != x[e.v]).map(|e| e.w).sum())
}

fn check_assignment(g: &Graph, x: &[i8]) -> Result<()> {
    if x.len() != g.n() {
        return Err(Error::InvalidAssignment(format!("length {} for {} vertices", x.len(), g.n())));
    }
    if let Some(bad) = x.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidAssignment(format!("entry {bad} is not +1 or -1")));
    }
    Ok(())
}

/// `(Σ_ij c_ij − Tr(CX)) / 4`, the relaxation value in cut units.
pub fn sdp_cut_bound<T: Entry>(g: &Graph, x: &SymMatrix<T>) -> Result<f64> {
    if x.order() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: x.order() });
    }
    let bits = x.storage_bits().max(64);
    let mut tr = Float::new(bits);
    let mut prod = Float::new(bits);
    for e in g.edges() {
        prod.assign(&x.entry(e.u, e.v).to_float(bits) * (2 * e.w));
        tr += &prod;
    }
    let mut b = Float::with_val(bits, g.total_weight());
    b -= &tr;
    b /= 4;
    Ok(b.to_f64())
}

/// Draws `r ~ N(0, I)` and returns `sign(V_i · r)`, with `0 ↦ +1`.
pub fn hyperplane_round<R: Rng + ?Sized>(v: &DMatrix<f64>, rng: &mut R) -> Vec<i8> {
    let r = DVector::<f64>::from_fn(v.ncols(), |_, _| rng.sample(StandardNormal));
    let p = v * r;
    p.iter().map(|&d| if d >= 0.0 { 1 } else { -1 }).collect()
}

/// Generator for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Factors `X` once and keeps the best of `trials` roundings (first best on
/// ties). Also reports the mean cut over all trials.
pub fn best_of_rounds<T: Entry>(g: &Graph, x: &SymMatrix<T>, trials: usize, seed: u64) -> Result<CutResult> {
    if trials == 0 {
        return Err(Error::Config("at least one rounding trial is required".into()));
    }
    if x.order() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: x.order() });
    }
    let v = psd_factor(x, DEFAULT_CLIP)?;
    let mut best: Option<(i64, Vec<i8>)> = None;
    let mut total = 0i128;
    for t in 0..trials {
        let assignment = hyperplane_round(&v, &mut trial_rng(seed, t as u64));
        let cut = cut_value(g, &assignment)?;
        total += cut as i128;
        if best.as_ref().is_none_or(|(b, _)| cut > *b) {
            best = Some((cut, assignment));
        }
    }
    let (cut, assignment) = best.expect("trials >= 1");
    Ok(CutResult { assignment, cut, trials, seed, mean_cut: total as f64 / trials as f64 })
}

/// Exact maximum cut by enumeration with `x_1 = +1`. Ties resolve to the
/// lexicographically smallest assignment, ordering `−1 < +1`.
pub fn brute_force_maxcut(g: &Graph) -> Result<(i64, Vec<i8>)> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge { n, max: BRUTE_FORCE_MAX_N });
    }
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    // Vertex i > 0 sits at bit (n - 1 - i) so that counting up walks the
    // assignments in lexicographic order. Vertex 0 is fixed to +1.
    let bit = |mask: u32, i: usize| -> bool { i == 0 || mask >> (n - 1 - i) & 1 == 1 };
    let mut best = (i64::MIN, 0u32);
    for mask in 0..(1u32 << (n - 1)) {
        let cut: i64 = g.edges().iter().filter(|e| bit(mask, e.u) != bit(mask, e.v)).map(|e| e.w).sum();
        if cut > best.0 {
            best = (cut, mask);
        }
    }
    let x = (0..n).map(|i| if bit(best.1, i) { 1 } else { -1 }).collect();
    Ok((best.0, x))
}
