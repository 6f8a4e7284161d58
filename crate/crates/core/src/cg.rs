//! Conjugate gradient with a configurable working precision.
//!
//! The matrix is read at its storage precision (normally `f64`); every vector
//! operation and scalar recurrence runs at the configured context. Plain
//! Hestenes–Stiefel recurrences, `x₀ = 0`, no restarts and no
//! reorthogonalization: loss of orthogonality is the quantity under study.

use rug::{Assign, Float};
use serde::Serialize;

use crate::arith::{axpy_raw, dot_raw, xpby_raw, ExtFloat, ExtVector, PrecisionContext};
use crate::error::{Error, Result};
use crate::linalg::{matvec_into, Entry, SymMatrix};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgConfig {
    /// Stop once `‖r_k‖ / ‖b‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub ctx: PrecisionContext,
    /// Keep every residual vector for [`orthogonality_decay`].
    pub record_residuals: bool,
}

impl CgConfig {
    /// `tol` with `max_iter = 20·n`.
    pub fn new(tol: f64, n: usize, ctx: PrecisionContext) -> Result<Self> {
        let cfg = Self { tol, max_iter: 20 * n.max(1), ctx, record_residuals: false };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!("CG tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("CG max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// What happened during a solve.
#[derive(Clone, Debug, Serialize)]
pub struct CgReport {
    pub iterations: usize,
    /// `‖r_k‖ / ‖b‖` after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Set when `pᵀMp ≤ 0` stopped the iteration.
    pub breakdown: bool,
    pub bits: u32,
    #[serde(skip)]
    pub residuals: Vec<ExtVector>,
}

/// Solves `M y = b` from `y₀ = 0`.
///
/// On breakdown the iterate with the smallest recorded residual is returned.
pub fn cg_solve<T: Entry>(m: &SymMatrix<T>, b: &ExtVector, cfg: &CgConfig) -> Result<(ExtVector, CgReport)> {
    cfg.validate()?;
    let n = m.order();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let ctx = cfg.ctx;
    let bits = ctx.bits();
    let b = if b.ctx() == ctx { b.clone() } else { b.with_ctx(ctx) };

    let mut x = ExtVector::zeros(n, ctx);
    let mut r = b.clone();
    let mut p = b.clone();
    let mut q = ExtVector::zeros(n, ctx);
    let mut rr = dot_raw(r.raw(), r.raw(), bits);
    let b_norm = Float::with_val(bits, rr.sqrt_ref());

    let mut report = CgReport {
        iterations: 0,
        residual_history: Vec::new(),
        converged: false,
        breakdown: false,
        bits,
        residuals: Vec::new(),
    };
    if b_norm.is_zero() {
        report.converged = true;
        return Ok((x, report));
    }

    let mut best = (f64::INFINITY, x.clone());
    let mut alpha = Float::new(bits);
    let mut beta = Float::new(bits);
    let mut rel = Float::new(bits);
    while report.iterations < cfg.max_iter {
        if cfg.record_residuals {
            report.residuals.push(r.clone());
        }
        matvec_into(m, p.raw(), q.raw_mut());
        let pq = dot_raw(p.raw(), q.raw(), bits);
        if pq <= 0 || !pq.is_finite() {
            report.breakdown = true;
            if cfg.record_residuals {
                report.residuals.pop();
            }
            if best.0.is_finite() {
                x = best.1;
            }
            return Ok((x, report));
        }
        alpha.assign(&rr / &pq);
        axpy_raw(&alpha, p.raw(), x.raw_mut());
        alpha = -alpha;
        axpy_raw(&alpha, q.raw(), r.raw_mut());
        let rr_next = dot_raw(r.raw(), r.raw(), bits);
        rel.assign(rr_next.sqrt_ref());
        rel /= &b_norm;
        let rel_f = rel.to_f64();
        report.iterations += 1;
        report.residual_history.push(rel_f);
        if rel_f <= cfg.tol {
            report.converged = true;
            return Ok((x, report));
        }
        if rel_f < best.0 {
            best = (rel_f, x.clone());
        }
        beta.assign(&rr_next / &rr);
        xpby_raw(r.raw(), &beta, p.raw_mut());
        rr = rr_next;
    }
    Ok((x, report))
}

/// `G_ij = |r_iᵀ r_j| / (‖r_i‖ ‖r_j‖)` over the residuals recorded by a run
/// with `record_residuals` set. In exact arithmetic `G = I`.
pub fn orthogonality_decay(report: &CgReport) -> Vec<Vec<f64>> {
    let k = report.residuals.len();
    let bits = report.bits;
    let norms: Vec<Float> = report
        .residuals
        .iter()
        .map(|r| Float::with_val(bits, dot_raw(r.raw(), r.raw(), bits).sqrt_ref()))
        .collect();
    let mut g = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let v = if i == j {
                1.0
            } else {
                let d = dot_raw(report.residuals[i].raw(), report.residuals[j].raw(), bits);
                let den = Float::with_val(bits, &norms[i] * &norms[j]);
                Float::with_val(bits, d.abs() / den).to_f64()
            };
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    g
}

/// Relative residual of the true system, `‖b − M y‖ / ‖b‖`, at `ctx`.
pub fn true_residual<T: Entry>(m: &SymMatrix<T>, b: &ExtVector, y: &ExtVector, ctx: PrecisionContext) -> Result<f64> {
    let my = crate::linalg::matvec(m, y, ctx)?;
    let bb = b.with_ctx(ctx.widest(b.ctx()));
    let neg = ExtFloat::from_float(Float::with_val(ctx.bits(), -1));
    let r = crate::arith::axpy(&neg, &my, &bb, ctx)?;
    let num = crate::arith::norm(&r, ctx).to_f64();
    let den = crate::arith::norm(&bb, ctx).to_f64();
    Ok(if den == 0.0 { num } else { num / den })
}

/// Error bound components after `k` iterations:
/// `((√κ−1)/(√κ+1))^k`, `eps·k·√κ`, and their sum.
pub fn error_model(k: u32, kappa: f64, eps: f64) -> Result<(f64, f64, f64)> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be finite and >= 1, got {kappa}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be finite and > 0, got {eps}")));
    }
    let s = kappa.sqrt();
    let exact = ((s - 1.0) / (s + 1.0)).powi(k as i32);
    let finite = eps * k as f64 * s;
    Ok((exact, finite, exact + finite))
}

/// The `k ∈ [0, k_max]` minimizing the total of [`error_model`]; ties go to
/// the smaller `k`.
pub fn sweet_spot(kappa: f64, eps: f64, k_max: u32) -> Result<u32> {
    let mut best = (0, error_model(0, kappa, eps)?.2);
    for k in 1..=k_max {
        let t = error_model(k, kappa, eps)?.2;
        if t < best.1 {
            best = (k, t);
        }
    }
    Ok(best.0)
}
