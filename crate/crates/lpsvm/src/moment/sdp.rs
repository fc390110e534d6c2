//! Dense log-det barrier solver for small semidefinite programs
//!
//! ```text
//!   min  c'x   s.t.   F_b(x) = C_b + sum_k x_k A_{bk}  PSD for each block b.
//! ```
//!
//! Phase I maximizes a uniform eigenvalue margin theta with the same
//! machinery to find a strictly feasible start; Phase II follows the central
//! path min t c'x - sum_b logdet F_b(x) with damped Newton steps, multiplying
//! t until the barrier duality gap (total dimension / t) drops below the
//! tolerance. One-dimensional blocks (scalar inequalities) are batched into a
//! single matrix-vector pipeline; they tend to outnumber the matrix blocks by
//! an order of magnitude.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One PSD block of the reduced problem.
#[derive(Debug, Clone)]
pub struct ReducedBlock {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl ReducedBlock {
    pub(crate) fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (k, a) in self.coeffs.iter().enumerate() {
            if x[k] != 0.0 {
                m += a * x[k];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSdp {
    pub objective: Vec<f64>,
    pub blocks: Vec<ReducedBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    IterationLimit,
}

/// Blocks split into matrix blocks and batched scalar (1x1) blocks.
struct Partitioned<'a> {
    big: Vec<&'a ReducedBlock>,
    /// Constant terms of the scalar blocks.
    scal_const: DVector<f64>,
    /// Row b holds the coefficients of scalar block b.
    scal_coeffs: DMatrix<f64>,
    total_dim: usize,
}

impl<'a> Partitioned<'a> {
    fn new(blocks: &'a [ReducedBlock], nvar: usize) -> Self {
        let mut big = Vec::new();
        let mut consts = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for b in blocks {
            if b.constant.nrows() == 1 {
                consts.push(b.constant[(0, 0)]);
                rows.push(b.coeffs.iter().map(|a| a[(0, 0)]).collect());
            } else {
                big.push(b);
            }
        }
        let nscal = consts.len();
        let mut scal_coeffs = DMatrix::zeros(nscal, nvar);
        for (i, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                scal_coeffs[(i, k)] = v;
            }
        }
        let total_dim = blocks.iter().map(|b| b.constant.nrows()).sum();
        Partitioned {
            big,
            scal_const: DVector::from_vec(consts),
            scal_coeffs,
            total_dim,
        }
    }

    fn scalar_values(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.scal_const + &self.scal_coeffs * x
    }

    /// Sum of log det F_b(x); None when x is outside the cone.
    fn logdet(&self, x: &DVector<f64>) -> Option<f64> {
        let mut sum = 0.0;
        for b in &self.big {
            let chol = b.eval(x).cholesky()?;
            let logdet: f64 = (0..chol.l().nrows()).map(|i| chol.l()[(i, i)].ln()).sum();
            sum += 2.0 * logdet;
        }
        if self.scal_const.len() > 0 {
            for v in self.scalar_values(x).iter() {
                if *v <= 0.0 {
                    return None;
                }
                sum += v.ln();
            }
        }
        Some(sum)
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.logdet(x).is_some()
    }
}

fn debug_enabled() -> bool {
    std::env::var_os("LPSVM_SDP_DEBUG").is_some()
}

/// Damped Newton minimization of the barrier at fixed t; returns the Newton
/// iteration count used.
fn newton_center(
    t_bar: f64,
    c: &DVector<f64>,
    p: &Partitioned<'_>,
    x: &mut DVector<f64>,
    max_newton: usize,
) -> Result<usize> {
    let nvar = c.len();
    let mut last_decrement = f64::NAN;
    for iter in 0..max_newton {
        let mut grad = c * t_bar;
        let mut hess = DMatrix::<f64>::zeros(nvar, nvar);
        for b in &p.big {
            let chol = b
                .eval(x)
                .cholesky()
                .ok_or_else(|| Error::SolverFailure("barrier iterate left the cone".into()))?;
            let finv = chol.inverse();
            let dim = finv.nrows();
            // M_k = F^{-1} A_k; gradient -tr M_k, Hessian tr(M_k M_l) formed
            // as a single product of flattened matrices.
            let mut vmat = DMatrix::<f64>::zeros(dim * dim, nvar);
            let mut wmat = DMatrix::<f64>::zeros(dim * dim, nvar);
            for (k, a) in b.coeffs.iter().enumerate() {
                let m = &finv * a;
                let mut tr = 0.0;
                for j in 0..dim {
                    for i in 0..dim {
                        vmat[(j * dim + i, k)] = m[(i, j)];
                        wmat[(j * dim + i, k)] = m[(j, i)];
                    }
                    tr += m[(j, j)];
                }
                grad[k] -= tr;
            }
            hess.gemm_tr(1.0, &wmat, &vmat, 1.0);
        }
        if p.scal_const.len() > 0 {
            let vals = p.scalar_values(x);
            if vals.iter().any(|&v| v <= 0.0) {
                return Err(Error::SolverFailure("barrier iterate left the cone".into()));
            }
            let inv = vals.map(|v| 1.0 / v);
            grad.gemv_tr(-1.0, &p.scal_coeffs, &inv, 1.0);
            let mut scaled = p.scal_coeffs.clone();
            for (i, v) in inv.iter().enumerate() {
                scaled.row_mut(i).scale_mut(*v);
            }
            hess.gemm_tr(1.0, &scaled, &scaled, 1.0);
        }
        // Regularize only when the factorization fails: the Hessian's dynamic
        // range spans many orders of magnitude near the boundary, and an
        // up-front shift proportional to the largest diagonal entry would
        // flatten the Newton direction in the weakly curved subspace.
        let diag_scale = 1.0 + hess.diagonal().amax();
        let mut reg = 0.0;
        let direction = loop {
            let shifted = if reg == 0.0 {
                hess.clone()
            } else {
                &hess + DMatrix::<f64>::identity(nvar, nvar) * reg
            };
            if let Some(ch) = shifted.cholesky() {
                break ch.solve(&(-&grad));
            }
            reg = if reg == 0.0 { 1e-14 * diag_scale } else { reg * 100.0 };
            if reg > 1e-2 * diag_scale {
                return Err(Error::SolverFailure("barrier Hessian is not positive".into()));
            }
        };
        let decrement = -grad.dot(&direction);
        last_decrement = decrement;
        if decrement < 2e-9 {
            if debug_enabled() {
                eprintln!("    newton t={t_bar:.2e} iters={iter} decrement={decrement:.2e} (converged)");
            }
            return Ok(iter);
        }
        let base_logdet = p
            .logdet(x)
            .ok_or_else(|| Error::SolverFailure("barrier iterate left the cone".into()))?;
        // Compare barrier differences directly: t c'x itself can be ~1e9 at
        // the end of the path, where forming the two values and subtracting
        // would lose the decrease to cancellation.
        let c_dir = c.dot(&direction);
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-13 {
            let trial = &*x + &direction * step;
            if let Some(trial_logdet) = p.logdet(&trial) {
                let delta = t_bar * step * c_dir - (trial_logdet - base_logdet);
                if delta <= -0.25 * step * decrement {
                    *x = trial;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        // A vanishing accepted step means line-search progress has hit the
        // floating-point floor; further iterations only burn the budget.
        if !moved || step < 1e-8 {
            if debug_enabled() {
                eprintln!(
                    "    newton t={t_bar:.2e} iters={iter} decrement={decrement:.2e} step={step:.1e} (stalled)"
                );
            }
            return Ok(iter);
        }
    }
    if debug_enabled() {
        eprintln!("    newton t={t_bar:.2e} iters={max_newton} decrement={last_decrement:.2e} (cap)");
    }
    Ok(max_newton)
}

fn path_follow(
    c: &DVector<f64>,
    p: &Partitioned<'_>,
    x: &mut DVector<f64>,
    tol: f64,
    early_exit: Option<f64>,
    stage_newton: usize,
    total_newton_cap: usize,
) -> Result<SdpStatus> {
    let mut t_bar = 1.0;
    let mut total_newton = 0usize;
    loop {
        total_newton += newton_center(t_bar, c, p, x, stage_newton)?;
        if let Some(threshold) = early_exit {
            if c.dot(x) < threshold {
                return Ok(SdpStatus::Optimal);
            }
        }
        if p.total_dim as f64 / t_bar <= tol {
            return Ok(SdpStatus::Optimal);
        }
        if total_newton > total_newton_cap {
            return Ok(SdpStatus::IterationLimit);
        }
        // A gentle multiplier keeps each re-centering cheap even when many
        // small blocks push the barrier parameter up.
        t_bar *= 5.0;
    }
}

/// Solves the reduced SDP starting from a known strictly feasible point,
/// skipping Phase I.
pub fn solve_reduced_warm(
    sdp: &ReducedSdp,
    start: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, f64, SdpStatus)> {
    let c = DVector::from_vec(sdp.objective.clone());
    let p = Partitioned::new(&sdp.blocks, c.len());
    let mut x = start.clone();
    if !p.strictly_feasible(&x) {
        return Err(Error::SolverFailure("warm start is not strictly feasible".into()));
    }
    // Warm starts tend to sit close to the boundary, where Newton needs many
    // short steps before the path behaves; allow a generous budget.
    let status = path_follow(&c, &p, &mut x, tol, None, 300, 20_000)?;
    let lower = c.dot(&x) - tol;
    Ok((x, lower, status))
}

/// Solves the reduced SDP; returns the optimizer, a lower bound on the
/// optimal value certified by the barrier gap, and the status.
pub fn solve_reduced(sdp: &ReducedSdp, tol: f64) -> Result<(DVector<f64>, f64, SdpStatus)> {
    let nvar = sdp.objective.len();
    let c = DVector::from_vec(sdp.objective.clone());
    let mut x = DVector::zeros(nvar);

    // Phase I: push the uniform eigenvalue margin positive if the origin is
    // not strictly feasible.
    let margin = sdp
        .blocks
        .iter()
        .map(|b| {
            b.eval(&x)
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v))
        })
        .fold(f64::INFINITY, |m, v| m.min(v));
    if !margin.is_finite() {
        return Err(Error::SolverFailure("empty SDP block".into()));
    }
    let scale = 1.0
        + sdp
            .blocks
            .iter()
            .map(|b| b.constant.amax())
            .fold(0.0f64, |m, v| m.max(v));
    if margin <= 1e-7 * scale {
        let theta0 = margin - 1.0;
        let mut aug_blocks = Vec::with_capacity(sdp.blocks.len());
        for b in &sdp.blocks {
            let dim = b.constant.nrows();
            let mut coeffs = b.coeffs.clone();
            coeffs.push(-DMatrix::<f64>::identity(dim, dim));
            // Shift the constant so the augmented origin (zeta=0, theta
            // relative to theta0) is strictly inside.
            let constant = &b.constant - DMatrix::<f64>::identity(dim, dim) * theta0;
            aug_blocks.push(ReducedBlock { constant, coeffs });
        }
        let aug_c = DVector::from_fn(nvar + 1, |k, _| if k == nvar { -1.0 } else { 0.0 });
        let aug_p = Partitioned::new(&aug_blocks, nvar + 1);
        let mut aug_x = DVector::zeros(nvar + 1);
        // The augmented objective is -theta_aug with theta = theta0 +
        // theta_aug; exit early once theta clears a positive margin.
        let want = theta0 - 1e-6 * scale;
        let status = path_follow(
            &aug_c,
            &aug_p,
            &mut aug_x,
            1e-6 * scale.max(1.0),
            Some(want),
            200,
            20_000,
        )?;
        let theta = theta0 + aug_x[nvar];
        if status != SdpStatus::Optimal || theta <= 0.0 {
            return Err(Error::Infeasible);
        }
        x = aug_x.rows(0, nvar).into_owned();
    }

    let p = Partitioned::new(&sdp.blocks, nvar);
    if !p.strictly_feasible(&x) {
        return Err(Error::Infeasible);
    }
    let status = path_follow(&c, &p, &mut x, tol, None, 200, 20_000)?;
    // path_follow returns once the barrier gap total_dim / t is below tol,
    // so the central-path value minus tol is a valid lower bound.
    let lower = c.dot(&x) - tol;
    Ok((x, lower, status))
}
