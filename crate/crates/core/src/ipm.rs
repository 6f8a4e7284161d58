//! Primal-dual barrier method for the Max-Cut SDP
//!
//! ```text
//! minimize Tr(C X)  subject to  X_ii = 1,  X ⪰ 0
//! ```
//!
//! Each Newton step solves the normal equations `M y = rhs` with CG, forms
//! `Z = C − diag(y)` and `D = X − μ⁻¹ (X Z) X`, then takes `X ← X + α D`,
//! `S ← Z`, `μ ← η μ`. The state (`X`, `y`, `S`, `μ`) lives at the configured
//! precision; `M` is handed to CG as `f64`.
//!
//! Two safeguards sit on top of the bare iteration. `α` is halved until
//! `X + α D` passes the strict Cholesky test, and when `Z` is not positive
//! definite the dual moves only part of the way, `S ← S + β (Z − S)` and
//! `y ← y + β (y_next − y)`, which keeps `C − diag(y) − S` consistent.
//!
//! The right-hand side carries a feasibility term: it is
//! `diag(XCX) − μ (diag X − r_p)` rather than `diag(XCX) − μ diag X`, so a
//! full step lands on `diag(X + D) = 1` even when the current `X` has
//! drifted. At a feasible `X` the two coincide.

use std::time::Instant;

use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::arith::{ExtFloat, ExtVector, PrecisionContext};
use crate::cg::{cg_solve, CgConfig, CgReport};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{
    condition_estimate, is_positive_definite, mul_dense_sparse, normal_matrix, rhs_from_xc, right_mul_sym, Cholesky,
    SymMatrix,
};

/// `min Tr(CX)` over `{X ⪰ 0, diag X = 1}`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    c: SymMatrix<f64>,
}

impl SdpProblem {
    pub fn new(c: SymMatrix<f64>) -> Result<Self> {
        if c.order() == 0 {
            return Err(Error::InvalidGraph("empty problem".into()));
        }
        if (0..c.order()).any(|i| c.get_f64(i, i) != 0.0) {
            return Err(Error::InvalidGraph("objective must have a zero diagonal".into()));
        }
        Ok(Self { c })
    }

    pub fn from_graph(g: &Graph) -> Result<Self> {
        Self::new(g.weight_matrix())
    }

    pub fn n(&self) -> usize {
        self.c.order()
    }

    pub fn c(&self) -> &SymMatrix<f64> {
        &self.c
    }
}

/// Solver settings. Every field is echoed into output artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpmConfig {
    /// Absolute tolerance on `max(‖r_p‖₂, ‖r_d‖_F, |e_g|)`.
    pub tol_sdp: f64,
    /// Relative CG residual tolerance.
    pub tol_cg: f64,
    /// `μ₀ = θ / n` when set, else `Tr(X₀ S₀) / n`.
    pub theta: Option<f64>,
    /// Barrier reduction per step, in `(0, 1)`.
    pub eta: f64,
    /// Mantissa width of the state and the CG vectors.
    pub bits: u32,
    pub max_iter: usize,
    /// Halvings allowed when backtracking `α` or `β`.
    pub max_backtracks: u32,
    /// CG iteration cap; `20·n` when unset.
    pub cg_max_iter: Option<usize>,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            tol_sdp: 0.005,
            tol_cg: crate::cg::DEFAULT_TOL,
            theta: None,
            eta: DEFAULT_ETA,
            bits: 64,
            max_iter: 200,
            max_backtracks: 30,
            cg_max_iter: None,
        }
    }
}

/// Default barrier reduction factor.
pub const DEFAULT_ETA: f64 = 0.6;

impl IpmConfig {
    pub fn validate(&self) -> Result<PrecisionContext> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.tol_sdp > 0.0) || !self.tol_sdp.is_finite() {
            return Err(Error::Config(format!("tol_sdp must be positive, got {}", self.tol_sdp)));
        }
        if !(self.tol_cg > 0.0) || !self.tol_cg.is_finite() {
            return Err(Error::Config(format!("tol_cg must be positive, got {}", self.tol_cg)));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("theta must be positive, got {t}")));
            }
        }
        if self.cg_max_iter == Some(0) {
            return Err(Error::Config("cg_max_iter must be at least 1".into()));
        }
        PrecisionContext::new(self.bits)
    }
}

/// Primal-dual iterate.
#[derive(Clone, Debug)]
pub struct IpmState {
    pub x: SymMatrix,
    pub y: ExtVector,
    pub s: SymMatrix,
    pub mu: ExtFloat,
    pub k: usize,
}

/// `r_p = 1 − diag X`, `r_d = C − diag(y) − S`, `e_g = Tr(CX) − Σ y`.
#[derive(Clone, Debug)]
pub struct Residuals {
    pub rp: ExtVector,
    pub rd: SymMatrix,
    pub gap: ExtFloat,
}

impl Residuals {
    pub fn rp_norm(&self) -> f64 {
        crate::arith::norm(&self.rp, self.rp.ctx()).to_f64()
    }

    pub fn rd_norm(&self) -> f64 {
        self.rd.frobenius().to_f64()
    }

    pub fn gap_abs(&self) -> f64 {
        self.gap.to_f64().abs()
    }

    /// The stopping quantity.
    pub fn max_norm(&self) -> f64 {
        self.rp_norm().max(self.rd_norm()).max(self.gap_abs())
    }
}

/// Output of one Newton step before it is applied.
#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub y: ExtVector,
    pub z: SymMatrix,
    pub d: SymMatrix,
    pub cg: CgReport,
    /// The CG input matrix.
    pub normal: SymMatrix<f64>,
}

/// Step lengths chosen by [`apply_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLengths {
    pub alpha: f64,
    /// `1` when `S ← Z` was taken in full.
    pub beta: f64,
}

/// One row of the trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub mu: f64,
    pub rp: f64,
    pub rd: f64,
    pub gap: f64,
    pub cg_iters: usize,
    pub kappa: f64,
    pub alpha: f64,
    /// Software emulation time of the step.
    pub wall_s: f64,
    pub dual_beta: f64,
    pub cg_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum Status {
    Converged,
    IterationLimit,
    StepFailure(String),
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub state: IpmState,
    pub trace: Vec<StepRecord>,
    pub status: Status,
    /// Residuals of the returned state.
    pub final_rp: f64,
    pub final_rd: f64,
    pub final_gap: f64,
}

impl SolveOutput {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn total_cg_iterations(&self) -> usize {
        self.trace.iter().map(|r| r.cg_iters).sum()
    }
}

/// `X₀ = I`, `y₀_i = −(Σ_j |c_ij| + 1)`, `S₀ = C − diag(y₀)`.
pub fn init_state(problem: &SdpProblem, config: &IpmConfig) -> Result<IpmState> {
    let ctx = config.validate()?;
    let n = problem.n();
    let c = problem.c();
    let y = ExtVector::from_f64s(
        &(0..n).map(|i| -((0..n).map(|j| c.get_f64(i, j).abs()).sum::<f64>() + 1.0)).collect::<Vec<_>>(),
        ctx,
    );
    let s = dual_slack(c, &y);
    let mu = match config.theta {
        Some(theta) => ctx.div(&ctx.from_f64(theta), &ctx.from_i64(n as i64)),
        None => ctx.div(&s.trace(), &ctx.from_i64(n as i64)),
    };
    Ok(IpmState { x: SymMatrix::identity(n, ctx), y, s, mu, k: 0 })
}

/// `C − diag(y)` at `y`'s precision.
fn dual_slack(c: &SymMatrix<f64>, y: &ExtVector) -> SymMatrix {
    let mut z = c.to_ext(y.ctx());
    for i in 0..c.order() {
        z.set(i, i, &y.get(i).neg());
    }
    z
}

pub fn residuals(state: &IpmState, problem: &SdpProblem) -> Residuals {
    let ctx = state.x.ctx();
    let n = problem.n();
    let one = ctx.one();
    let rp = ExtVector::from_elems((0..n).map(|i| ctx.sub(&one, &state.x.get(i, i))), ctx);
    let rd = dual_slack(problem.c(), &state.y).sub(&state.s).expect("orders agree");
    let mut sum_y = Float::new(ctx.bits());
    for v in state.y.iter() {
        sum_y += v.as_float();
    }
    let gap = ctx.sub(&trace_product(problem.c(), &state.x), &ExtFloat::from_float(sum_y));
    Residuals { rp, rd, gap }
}

/// `Tr(CX) = Σ_ij c_ij X_ij`, skipping zero `c_ij`, at `X`'s precision.
pub fn trace_product(c: &SymMatrix<f64>, x: &SymMatrix) -> ExtFloat {
    let bits = x.storage_bits();
    let n = c.order();
    let mut acc = Float::new(bits);
    let mut prod = Float::new(bits);
    for i in 0..n {
        for j in 0..n {
            let cij = c.get_f64(i, j);
            if cij != 0.0 {
                prod.assign(x.raw(i, j) * cij);
                acc += &prod;
            }
        }
    }
    ExtFloat::from_float(acc)
}

/// Solves the normal equations and forms `Z` and `D`.
pub fn newton_step(state: &IpmState, problem: &SdpProblem, config: &IpmConfig) -> Result<NewtonStep> {
    let ctx = config.validate()?;
    let n = problem.n();
    let x = &state.x;
    let mu = &state.mu;

    let xc = mul_dense_sparse(x, problem.c());
    let mut rhs = rhs_from_xc(&xc, x, mu);
    drop(xc);
    let one = ctx.one();
    for i in 0..n {
        let rp = ctx.sub(&one, &x.get(i, i));
        let corrected = ctx.add(&rhs.get(i), &ctx.mul(mu, &rp));
        rhs.raw_mut()[i] = corrected.as_float().clone();
    }

    let normal = normal_matrix(x).to_f64();
    let cfg = CgConfig {
        tol: config.tol_cg,
        max_iter: config.cg_max_iter.unwrap_or(20 * n),
        ctx,
        record_residuals: false,
    };
    let (y, cg) = cg_solve(&normal, &rhs, &cfg)?;

    let z = dual_slack(problem.c(), &y);
    let xz = mul_dense_sparse(x, &z);
    let xzx = right_mul_sym(&xz, x);
    drop(xz);
    let d = SymMatrix::from_fn(n, ctx, |i, j| ctx.sub(&x.get(i, j), &ctx.div(&xzx.get(i, j), mu)));
    Ok(NewtonStep { y, z, d, cg, normal })
}

/// Takes the safeguarded step and reduces `μ`.
pub fn apply_step(state: &IpmState, step: &NewtonStep, config: &IpmConfig) -> Result<(IpmState, StepLengths)> {
    let ctx = config.validate()?;
    let half = ctx.from_f64(0.5);

    let mut alpha = ctx.one();
    let mut x_next = None;
    for _ in 0..=config.max_backtracks {
        let trial = state.x.add_scaled(&alpha, &step.d)?;
        if is_positive_definite(&trial) {
            x_next = Some(trial);
            break;
        }
        alpha = ctx.mul(&alpha, &half);
    }
    let x = x_next.ok_or_else(|| Error::StepFailure("no step length keeps X positive definite".into()))?;

    let (s, y, beta) = if is_positive_definite(&step.z) {
        (step.z.clone(), step.y.clone(), 1.0)
    } else {
        let dz = step.z.sub(&state.s)?;
        let neg = ctx.from_f64(-1.0);
        let dy = crate::arith::axpy(&neg, &state.y, &step.y, ctx)?;
        let mut beta = half.clone();
        let mut found = None;
        for _ in 0..config.max_backtracks {
            let trial = state.s.add_scaled(&beta, &dz)?;
            if is_positive_definite(&trial) {
                found = Some((trial, crate::arith::axpy(&beta, &dy, &state.y, ctx)?, beta.to_f64()));
                break;
            }
            beta = ctx.mul(&beta, &half);
        }
        found.ok_or_else(|| Error::StepFailure("no dual step keeps S positive definite".into()))?
    };

    let mu = ctx.mul_f64(&state.mu, config.eta);
    Ok((IpmState { x, y, s, mu, k: state.k + 1 }, StepLengths { alpha: alpha.to_f64(), beta }))
}

/// Runs the method to convergence, the iteration cap, or a failed step.
pub fn solve(problem: &SdpProblem, config: &IpmConfig) -> Result<SolveOutput> {
    let mut state = init_state(problem, config)?;
    let mut trace = Vec::new();
    let mut status = Status::IterationLimit;
    loop {
        let res = residuals(&state, problem);
        if res.max_norm() <= config.tol_sdp {
            status = Status::Converged;
            break;
        }
        if state.k >= config.max_iter {
            break;
        }
        let started = Instant::now();
        let step = newton_step(&state, problem, config)?;
        let mut record = StepRecord {
            k: state.k,
            mu: state.mu.to_f64(),
            rp: res.rp_norm(),
            rd: res.rd_norm(),
            gap: res.gap.to_f64(),
            cg_iters: step.cg.iterations,
            kappa: condition_estimate(&step.normal),
            alpha: 0.0,
            wall_s: 0.0,
            dual_beta: 0.0,
            cg_converged: step.cg.converged,
        };
        if step.cg.breakdown {
            record.wall_s = started.elapsed().as_secs_f64();
            trace.push(record);
            status = Status::StepFailure(format!("CG breakdown at step {}", state.k));
            break;
        }
        match apply_step(&state, &step, config) {
            Ok((next, lengths)) => {
                record.alpha = lengths.alpha;
                record.dual_beta = lengths.beta;
                record.wall_s = started.elapsed().as_secs_f64();
                trace.push(record);
                state = next;
            }
            Err(Error::StepFailure(reason)) => {
                record.wall_s = started.elapsed().as_secs_f64();
                trace.push(record);
                status = Status::StepFailure(format!("step {}: {reason}", state.k));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let res = residuals(&state, problem);
    Ok(SolveOutput {
        final_rp: res.rp_norm(),
        final_rd: res.rd_norm(),
        final_gap: res.gap.to_f64(),
        state,
        trace,
        status,
    })
}

/// `Tr(CX) − μ log det X`.
pub fn barrier_objective(x: &SymMatrix, c: &SymMatrix<f64>, mu: &ExtFloat) -> Result<ExtFloat> {
    let ctx = x.ctx();
    let chol = Cholesky::factor(x).ok_or(Error::NotPositiveDefinite)?;
    Ok(ctx.sub(&trace_product(c, x), &ctx.mul(mu, &chol.log_det())))
}

/// `‖I − μ⁻¹ Gᵀ S G‖_F` with `X = G Gᵀ` (lower Cholesky `G`). This is
/// similar to `X^{1/2} S X^{1/2} / μ`, so it vanishes exactly on the central
/// path `XS = μI`.
pub fn central_path_proximity(x: &SymMatrix, s: &SymMatrix, mu: &ExtFloat) -> Result<ExtFloat> {
    let n = x.order();
    if s.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.order() });
    }
    if !is_positive_definite(s) {
        return Err(Error::NotPositiveDefinite);
    }
    let g = Cholesky::factor(x).ok_or(Error::NotPositiveDefinite)?;
    let ctx = x.ctx();
    let bits = ctx.bits();
    let mut prod = Float::new(bits);
    // T = S G
    let mut t: Vec<Float> = (0..n * n).map(|_| Float::new(bits)).collect();
    for i in 0..n {
        for j in 0..n {
            let acc = &mut t[i * n + j];
            for k in j..n {
                prod.assign(s.raw(i, k) * g.entry(k, j).as_float());
                *acc += &prod;
            }
        }
    }
    let one = ctx.one();
    let mut sq = Float::new(bits);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Float::new(bits);
            for k in i..n {
                prod.assign(g.entry(k, i).as_float() * &t[k * n + j]);
                acc += &prod;
            }
            let scaled = ctx.div(&ExtFloat::from_float(acc), mu);
            let e = if i == j { ctx.sub(&one, &scaled) } else { scaled.neg() };
            prod.assign(e.as_float().square_ref());
            sq += &prod;
        }
    }
    Ok(ExtFloat::from_float(Float::with_val(bits, sq.sqrt_ref())))
}
