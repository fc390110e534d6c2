//! Homogeneous self-dual interior-point method for programs of the form
//!
//! ```text
//!   min c'x   s.t.  A x = b,   G x + s = h,   s in K,
//! ```
//!
//! where K is a product of a nonnegative orthant and second-order cones.
//! Search directions use Nesterov-Todd scaling with a Mehrotra
//! predictor-corrector; the embedding certifies infeasibility instead of
//! guessing it. Everything is dense.

use nalgebra::{DMatrix, DVector};

use super::{ConeBlock, ConicProgram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// Objective pair and complementarity measure at one iterate of the central
/// path; complementarity s'z / tau^2 is nonnegative by cone membership.
#[derive(Debug, Clone, Copy)]
pub struct IterateStats {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub eq_duals: DVector<f64>,
    pub ineq_duals: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub trace: Vec<IterateStats>,
}

/// Layout of the cone space: leading orthant coordinates, then second-order
/// cone blocks of the listed dimensions.
#[derive(Debug, Clone)]
struct ConeLayout {
    nonneg: usize,
    soc: Vec<usize>,
}

impl ConeLayout {
    fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate, one per cone block.
    fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    fn soc_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&d| {
            let range = start..start + d;
            start += d;
            range
        })
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        for i in 0..self.nonneg {
            e[i] = 1.0;
        }
        for range in self.soc_ranges() {
            e[range.start] = 1.0;
        }
        e
    }
}

struct StandardForm {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    layout: ConeLayout,
    n_ineq: usize,
}

fn standard_form(prog: &ConicProgram) -> StandardForm {
    let n = prog.nvar();
    let mut c = DVector::zeros(n);
    for &(var, coeff) in prog.objective() {
        c[var] += coeff;
    }

    let p = prog.eq_rows().len();
    let mut a = DMatrix::zeros(p, n);
    let mut b = DVector::zeros(p);
    for (i, row) in prog.eq_rows().iter().enumerate() {
        for &(var, coeff) in &row.terms {
            a[(i, var)] += coeff;
        }
        b[i] = row.rhs;
    }

    let n_ineq = prog.ineq_rows().len();
    let n_lower = prog.lower().iter().flatten().count();
    let n_upper = prog.upper().iter().flatten().count();
    let nonneg = n_ineq + n_lower + n_upper;
    let soc: Vec<usize> = prog
        .cones()
        .iter()
        .map(|cone| match cone {
            ConeBlock::Soc { tail, .. } => 1 + tail.len(),
            ConeBlock::Rotated { z, .. } => 2 + z.len(),
        })
        .collect();
    let layout = ConeLayout { nonneg, soc };

    let m = layout.dim();
    let mut g = DMatrix::zeros(m, n);
    let mut h = DVector::zeros(m);
    let mut row = 0;
    // a'x >= rhs  <=>  s = a'x - rhs >= 0.
    for lin in prog.ineq_rows() {
        for &(var, coeff) in &lin.terms {
            g[(row, var)] -= coeff;
        }
        h[row] = -lin.rhs;
        row += 1;
    }
    for (var, bound) in prog.lower().iter().enumerate() {
        if let Some(l) = bound {
            g[(row, var)] = -1.0;
            h[row] = -l;
            row += 1;
        }
    }
    for (var, bound) in prog.upper().iter().enumerate() {
        if let Some(u) = bound {
            g[(row, var)] = 1.0;
            h[row] = *u;
            row += 1;
        }
    }
    for cone in prog.cones() {
        match cone {
            ConeBlock::Soc { head, tail } => {
                g[(row, *head)] = -1.0;
                row += 1;
                for &t in tail {
                    g[(row, t)] = -1.0;
                    row += 1;
                }
            }
            ConeBlock::Rotated { u, v, z } => {
                // u v >= ||z||^2  <=>  (u + v, u - v, 2z) in a standard cone.
                g[(row, *u)] = -1.0;
                g[(row, *v)] = -1.0;
                row += 1;
                g[(row, *u)] = -1.0;
                g[(row, *v)] += 1.0;
                row += 1;
                for &t in z {
                    g[(row, t)] = -2.0;
                    row += 1;
                }
            }
        }
    }
    debug_assert_eq!(row, m);

    StandardForm { c, a, b, g, h, layout, n_ineq }
}

/// Nesterov-Todd scaling point: W symmetric positive definite with
/// W^{-1} s = W z = lambda.
struct Scaling {
    /// Orthant: w_i = sqrt(s_i / z_i).
    orthant: DVector<f64>,
    soc: Vec<SocScaling>,
}

struct SocScaling {
    eta: f64,
    wbar: DVector<f64>,
    /// q = wbar^{1/2} in the Jordan algebra sense (q o q = wbar, q'Jq = 1).
    q: DVector<f64>,
}

fn jdot(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut acc = u[0] * v[0];
    for i in 1..u.len() {
        acc -= u[i] * v[i];
    }
    acc
}

fn compute_scaling(layout: &ConeLayout, s: &DVector<f64>, z: &DVector<f64>) -> Result<Scaling> {
    let mut orthant = DVector::zeros(layout.nonneg);
    for i in 0..layout.nonneg {
        if s[i] <= 0.0 || z[i] <= 0.0 {
            return Err(Error::SolverFailure("iterate left the orthant interior".into()));
        }
        orthant[i] = (s[i] / z[i]).sqrt();
    }
    let mut soc = Vec::with_capacity(layout.soc.len());
    for range in layout.soc_ranges() {
        let sb = DVector::from(s.rows(range.start, range.len()).clone_owned());
        let zb = DVector::from(z.rows(range.start, range.len()).clone_owned());
        let ss = jdot(&sb, &sb);
        let zz = jdot(&zb, &zb);
        if ss <= 0.0 || zz <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0 {
            return Err(Error::SolverFailure("iterate left a cone interior".into()));
        }
        let sbar = &sb / ss.sqrt();
        let zbar = &zb / zz.sqrt();
        let gamma = ((1.0 + sbar.dot(&zbar)) / 2.0).sqrt();
        let mut wbar = DVector::zeros(range.len());
        wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
        for i in 1..range.len() {
            wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
        }
        let mut q = DVector::zeros(range.len());
        q[0] = ((wbar[0] + 1.0) / 2.0).sqrt();
        for i in 1..range.len() {
            q[i] = wbar[i] / (2.0 * q[0]);
        }
        let eta = (ss / zz).powf(0.25);
        soc.push(SocScaling { eta, wbar, q });
    }
    Ok(Scaling { orthant, soc })
}

#[derive(Clone, Copy)]
enum Apply {
    W,
    WInv,
    WSquared,
    WSquaredInv,
}

impl Scaling {
    fn apply(&self, layout: &ConeLayout, u: &DVector<f64>, mode: Apply) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for i in 0..layout.nonneg {
            let w = self.orthant[i];
            out[i] = match mode {
                Apply::W => w * u[i],
                Apply::WInv => u[i] / w,
                Apply::WSquared => w * w * u[i],
                Apply::WSquaredInv => u[i] / (w * w),
            };
        }
        for (block, range) in self.soc.iter().zip(layout.soc_ranges()) {
            let ub = DVector::from(u.rows(range.start, range.len()).clone_owned());
            // With J = diag(1, -I) and q'Jq = wbar'Jwbar = 1:
            //   W    = eta (2 q q' - J),        W^{-1}  = eta^{-1} (2 Jq q'J - J),
            //   W^2  = eta^2 (2 wbar wbar' - J), W^{-2} = eta^{-2} (2 Jwbar wbar'J - J).
            let (scale, vecref, j_wrap) = match mode {
                Apply::W => (block.eta, &block.q, false),
                Apply::WInv => (1.0 / block.eta, &block.q, true),
                Apply::WSquared => (block.eta * block.eta, &block.wbar, false),
                Apply::WSquaredInv => (1.0 / (block.eta * block.eta), &block.wbar, true),
            };
            let inner = if j_wrap { jdot(vecref, &ub) } else { vecref.dot(&ub) };
            for i in 0..range.len() {
                let vi = if j_wrap {
                    if i == 0 { vecref[0] } else { -vecref[i] }
                } else {
                    vecref[i]
                };
                let jui = if i == 0 { ub[0] } else { -ub[i] };
                out[range.start + i] = scale * (2.0 * vi * inner - jui);
            }
        }
        out
    }
}

/// Jordan product u o v per cone.
fn jordan_mul(layout: &ConeLayout, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for i in 0..layout.nonneg {
        out[i] = u[i] * v[i];
    }
    for range in layout.soc_ranges() {
        let (lo, len) = (range.start, range.len());
        let mut head = 0.0;
        for i in 0..len {
            head += u[lo + i] * v[lo + i];
        }
        out[lo] = head;
        for i in 1..len {
            out[lo + i] = u[lo] * v[lo + i] + v[lo] * u[lo + i];
        }
    }
    out
}

/// Solves lambda o x = d per cone (lambda interior).
fn jordan_div(layout: &ConeLayout, lambda: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(d.len());
    for i in 0..layout.nonneg {
        out[i] = d[i] / lambda[i];
    }
    for range in layout.soc_ranges() {
        let (lo, len) = (range.start, range.len());
        let mut det = lambda[lo] * lambda[lo];
        let mut cross = lambda[lo] * d[lo];
        for i in 1..len {
            det -= lambda[lo + i] * lambda[lo + i];
            cross -= lambda[lo + i] * d[lo + i];
        }
        let x0 = cross / det;
        out[lo] = x0;
        for i in 1..len {
            out[lo + i] = (d[lo + i] - x0 * lambda[lo + i]) / lambda[lo];
        }
    }
    out
}

/// Largest alpha with u + alpha du still in the cone (u strictly interior);
/// infinity when the ray never leaves.
fn max_step(layout: &ConeLayout, u: &DVector<f64>, du: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..layout.nonneg {
        if du[i] < 0.0 {
            alpha = alpha.min(-u[i] / du[i]);
        }
    }
    for range in layout.soc_ranges() {
        let (lo, len) = (range.start, range.len());
        let mut qa = du[lo] * du[lo];
        let mut qb = u[lo] * du[lo];
        let mut qc = u[lo] * u[lo];
        for i in 1..len {
            qa -= du[lo + i] * du[lo + i];
            qb -= u[lo + i] * du[lo + i];
            qc -= u[lo + i] * u[lo + i];
        }
        alpha = alpha.min(smallest_positive_root(qa, qb, qc));
    }
    alpha
}

/// Smallest positive root of qa t^2 + 2 qb t + qc = 0 with qc > 0, or
/// infinity when none exists.
fn smallest_positive_root(qa: f64, qb: f64, qc: f64) -> f64 {
    if qa.abs() < 1e-300 {
        return if qb < 0.0 { -qc / (2.0 * qb) } else { f64::INFINITY };
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let t = -(qb + qb.signum() * sq);
    let r1 = t / qa;
    let r2 = if t.abs() > 1e-300 { qc / t } else { f64::INFINITY };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Factorization of the symmetric quasidefinite reduction of the scaled KKT
/// matrix [0 A' G'; A 0 0; G 0 -W^2].
struct KktSolver<'a> {
    sf: &'a StandardForm,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    w2inv_g: DMatrix<f64>,
}

const REG: f64 = 1e-9;

impl<'a> KktSolver<'a> {
    fn factor(sf: &'a StandardForm, scaling: &Scaling) -> Self {
        let n = sf.c.len();
        let p = sf.b.len();
        let m = sf.h.len();
        let mut w2inv_g = DMatrix::zeros(m, n);
        for j in 0..n {
            let col = DVector::from(sf.g.column(j).clone_owned());
            w2inv_g.set_column(j, &scaling.apply(&sf.layout, &col, Apply::WSquaredInv));
        }
        let gtw2g = sf.g.transpose() * &w2inv_g;
        let mut kkt = DMatrix::zeros(n + p, n + p);
        kkt.view_mut((0, 0), (n, n)).copy_from(&gtw2g);
        for i in 0..n {
            kkt[(i, i)] += REG;
        }
        kkt.view_mut((0, n), (n, p)).copy_from(&sf.a.transpose());
        kkt.view_mut((n, 0), (p, n)).copy_from(&sf.a);
        for i in 0..p {
            kkt[(n + i, n + i)] = -REG;
        }
        let lu = kkt.lu();
        Self { sf, lu, w2inv_g }
    }

    /// Solves [0 A' G'; A 0 0; G 0 -W^2] (dx, dy, dz) = (ra, rb, rc), with
    /// one iterative-refinement pass against the unregularized system.
    fn solve3(
        &self,
        scaling: &Scaling,
        ra: &DVector<f64>,
        rb: &DVector<f64>,
        rc: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (mut dx, mut dy) = self.solve_reduced(scaling, ra, rb, rc);
        let mut dz =
            scaling.apply(&self.sf.layout, &(&self.sf.g * &dx - rc), Apply::WSquaredInv);

        // Iterative refinement against the unregularized full system.
        for _ in 0..3 {
            let res_a = ra - self.sf.a.transpose() * &dy - self.sf.g.transpose() * &dz;
            let res_b = rb - &self.sf.a * &dx;
            let w2dz = scaling.apply(&self.sf.layout, &dz, Apply::WSquared);
            let res_c = rc - (&self.sf.g * &dx - w2dz);
            let (cx, cy) = self.solve_reduced(scaling, &res_a, &res_b, &res_c);
            let cz =
                scaling.apply(&self.sf.layout, &(&self.sf.g * &cx - res_c), Apply::WSquaredInv);
            dx += cx;
            dy += cy;
            dz += cz;
        }
        (dx, dy, dz)
    }

    fn solve_reduced(
        &self,
        scaling: &Scaling,
        ra: &DVector<f64>,
        rb: &DVector<f64>,
        rc: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let _ = scaling;
        let n = self.sf.c.len();
        let p = self.sf.b.len();
        let mut rhs = DVector::zeros(n + p);
        let top = ra + self.w2inv_g.transpose() * rc;
        rhs.rows_mut(0, n).copy_from(&top);
        rhs.rows_mut(n, p).copy_from(rb);
        let sol = self.lu.solve(&rhs).expect("kkt system is singular");
        (DVector::from(sol.rows(0, n).clone_owned()), DVector::from(sol.rows(n, p).clone_owned()))
    }
}

pub fn solve(prog: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution> {
    prog.validate()?;
    let sf = standard_form(prog);
    run_ipm(&sf, opts)
}

fn run_ipm(sf: &StandardForm, opts: &SolveOptions) -> Result<ConicSolution> {
    let layout = &sf.layout;
    let n = sf.c.len();
    let p = sf.b.len();
    let m = sf.h.len();
    let nu = (layout.degree() + 1) as f64;

    let e = layout.identity();
    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    let mut s = e.clone();
    let mut z = e.clone();
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let norm_b = 1.0 + sf.b.norm();
    let norm_h = 1.0 + sf.h.norm();
    let norm_c = 1.0 + sf.c.norm();

    let mut trace = Vec::new();
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = opts.max_iter;

    for iter in 0..opts.max_iter {
        // Residuals of the embedding.
        let r1 = sf.a.transpose() * &y + sf.g.transpose() * &z + &sf.c * tau;
        let r2 = &sf.a * &x - &sf.b * tau;
        let r3 = &sf.g * &x + &s - &sf.h * tau;
        let r4 = kappa + sf.c.dot(&x) + sf.b.dot(&y) + sf.h.dot(&z);

        let pobj = sf.c.dot(&x) / tau;
        let dobj = -(sf.b.dot(&y) + sf.h.dot(&z)) / tau;
        let compl = s.dot(&z) / (tau * tau);
        trace.push(IterateStats {
            primal_objective: pobj,
            dual_objective: dobj,
            complementarity: compl,
        });

        if std::env::var("LPSVM_IPM_DEBUG").is_ok() {
            eprintln!(
                "iter {iter}: tau={tau:.3e} kappa={kappa:.3e} r1={:.3e} r2={:.3e} r3={:.3e} r4={:.3e} gap={:.3e} pobj={pobj:.6} dobj={dobj:.6}",
                r1.norm(), r2.norm(), r3.norm(), r4, compl
            );
        }
        let pres = (r2.norm() / norm_b).max(r3.norm() / norm_h) / tau;
        let dres = r1.norm() / norm_c / tau;
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));
        if pres <= opts.tol && dres <= opts.tol && relgap <= opts.tol.max(1e-10) {
            status = SolveStatus::Optimal;
            iterations = iter;
            break;
        }

        // Certificates of primal or dual infeasibility of the original pair.
        let by_hz = sf.b.dot(&y) + sf.h.dot(&z);
        if by_hz < -1e-10 {
            let res = (sf.a.transpose() * &y + sf.g.transpose() * &z).norm();
            if res <= opts.tol.max(1e-9) * (-by_hz) {
                status = SolveStatus::Infeasible;
                iterations = iter;
                break;
            }
        }
        let cx = sf.c.dot(&x);
        if cx < -1e-10 {
            let res = (&sf.a * &x).norm().max((&sf.g * &x + &s).norm());
            if res <= opts.tol.max(1e-9) * (-cx) {
                // Unboundedness of the primal; reported as the absence of a
                // complementary solution.
                status = SolveStatus::Infeasible;
                iterations = iter;
                break;
            }
        }

        let scaling = compute_scaling(layout, &s, &z)?;
        let lambda = scaling.apply(layout, &z, Apply::W);
        let mu = (s.dot(&z) + tau * kappa) / nu;

        let kkt = KktSolver::factor(sf, &scaling);
        let (x1, y1, z1) = kkt.solve3(&scaling, &(-&sf.c), &sf.b, &sf.h);

        let direction = |dvx: &DVector<f64>,
                         dvy: &DVector<f64>,
                         dvz: &DVector<f64>,
                         d_tau_rhs: f64,
                         d_s: &DVector<f64>,
                         d_kappa: f64|
         -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>, f64, f64) {
            let w_lds = scaling.apply(layout, &jordan_div(layout, &lambda, d_s), Apply::W);
            let rc = dvz - &w_lds;
            let (x2, y2, z2) = kkt.solve3(&scaling, dvx, dvy, &rc);
            let numer = -d_tau_rhs + d_kappa / tau + sf.c.dot(&x2) + sf.b.dot(&y2) + sf.h.dot(&z2);
            let denom = kappa / tau - sf.c.dot(&x1) - sf.b.dot(&y1) - sf.h.dot(&z1);
            let dtau = numer / denom;
            let dx = x2 + &x1 * dtau;
            let dy = y2 + &y1 * dtau;
            let dz = z2 + &z1 * dtau;
            let ds = w_lds - scaling.apply(layout, &dz, Apply::WSquared);
            let dkappa = (d_kappa - kappa * dtau) / tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };

        // Predictor: pure Newton step towards the boundary.
        let neg_ll = -jordan_mul(layout, &lambda, &lambda);
        let (_ax, _ay, az, a_s, atau, akappa) =
            direction(&(-&r1), &(-&r2), &(-&r3), -r4, &neg_ll, -tau * kappa);

        let mut alpha = max_step(layout, &s, &a_s).min(max_step(layout, &z, &az));
        if atau < 0.0 {
            alpha = alpha.min(-tau / atau);
        }
        if akappa < 0.0 {
            alpha = alpha.min(-kappa / akappa);
        }
        let alpha_aff = alpha.min(1.0);
        let mu_aff = ((&s + &a_s * alpha_aff).dot(&(&z + &az * alpha_aff))
            + (tau + alpha_aff * atau) * (kappa + alpha_aff * akappa))
            / nu;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // Corrector with the Mehrotra second-order term.
        let winv_as = scaling.apply(layout, &a_s, Apply::WInv);
        let w_az = scaling.apply(layout, &az, Apply::W);
        let corr = jordan_mul(layout, &winv_as, &w_az);
        let mut d_s = neg_ll - corr;
        d_s += &e * (sigma * mu);
        let d_kappa = -tau * kappa - atau * akappa + sigma * mu;
        let shrink = 1.0 - sigma;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(
            &(-&r1 * shrink),
            &(-&r2 * shrink),
            &(-&r3 * shrink),
            -r4 * shrink,
            &d_s,
            d_kappa,
        );

        let mut step = max_step(layout, &s, &ds).min(max_step(layout, &z, &dz));
        if dtau < 0.0 {
            step = step.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            step = step.min(-kappa / dkappa);
        }
        let step = (0.99 * step).min(1.0);

        x += &dx * step;
        y += &dy * step;
        z += &dz * step;
        s += &ds * step;
        tau += step * dtau;
        kappa += step * dkappa;

        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::SolverFailure("tau collapsed".into()));
        }
    }

    let scale = if status == SolveStatus::Infeasible { 1.0 } else { tau };
    let xs = &x / scale;
    let zs = &z / scale;
    let ys = &y / scale;
    let objective = if status == SolveStatus::Infeasible { f64::NAN } else { sf.c.dot(&xs) };
    let ineq_duals = DVector::from(zs.rows(0, sf.n_ineq.min(m)).clone_owned());
    Ok(ConicSolution {
        x: xs,
        eq_duals: ys,
        ineq_duals,
        objective,
        status,
        iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConeBlock;
    use approx::assert_relative_eq;

    fn default_solve(prog: &ConicProgram) -> ConicSolution {
        solve(prog, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn euclidean_norm_epigraph() {
        // min t s.t. t >= ||(3, 4)|| -> 5.
        let mut prog = ConicProgram::new();
        let t = prog.add_var();
        let a = prog.add_var();
        let b = prog.add_var();
        prog.add_eq(vec![(a, 1.0)], 3.0);
        prog.add_eq(vec![(b, 1.0)], 4.0);
        prog.add_cone(ConeBlock::Soc { head: t, tail: vec![a, b] });
        prog.set_objective_term(t, 1.0);
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn pure_lp() {
        // min x s.t. x >= 7.
        let mut prog = ConicProgram::new();
        let x = prog.add_var();
        prog.add_ineq(vec![(x, 1.0)], 7.0);
        prog.set_objective_term(x, 1.0);
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 7.0, epsilon = 1e-6);
        // The constraint is active: its multiplier carries the whole gradient.
        assert_relative_eq!(sol.ineq_duals[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rotated_cone_program() {
        // min u s.t. u * v >= ||(1, 2)||^2, v = 2  ->  u = 5/2.
        let mut prog = ConicProgram::new();
        let u = prog.add_var();
        let v = prog.add_var();
        let z1 = prog.add_var();
        let z2 = prog.add_var();
        prog.add_eq(vec![(v, 1.0)], 2.0);
        prog.add_eq(vec![(z1, 1.0)], 1.0);
        prog.add_eq(vec![(z2, 1.0)], 2.0);
        prog.add_cone(ConeBlock::Rotated { u, v, z: vec![z1, z2] });
        prog.set_objective_term(u, 1.0);
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.5, epsilon = 1e-6);
    }

    #[test]
    fn ball_constrained_linear_objective_matches_closed_form() {
        // min c'x over ||x - a|| <= radius: optimum c'a - radius ||c||.
        let cases = [
            (vec![1.0, -2.0], vec![0.5, 0.25], 1.5),
            (vec![-3.0, 0.7], vec![-1.0, 2.0], 0.8),
            (vec![0.3, 0.4, -0.5], vec![1.0, -1.0, 0.0], 2.0),
        ];
        for (cvec, center, radius) in cases {
            let k = cvec.len();
            let mut prog = ConicProgram::new();
            let xs = prog.add_vars(k);
            let t = prog.add_var();
            let ds = prog.add_vars(k);
            prog.add_eq(vec![(t, 1.0)], radius);
            for i in 0..k {
                prog.add_eq(vec![(ds[i], 1.0), (xs[i], -1.0)], -center[i]);
            }
            prog.add_cone(ConeBlock::Soc { head: t, tail: ds.clone() });
            for i in 0..k {
                prog.set_objective_term(xs[i], cvec[i]);
            }
            let sol = default_solve(&prog);
            assert_eq!(sol.status, SolveStatus::Optimal);
            let cnorm: f64 = cvec.iter().map(|v| v * v).sum::<f64>().sqrt();
            let expected: f64 =
                cvec.iter().zip(&center).map(|(c, a)| c * a).sum::<f64>() - radius * cnorm;
            assert_relative_eq!(sol.objective, expected, epsilon = 1e-5);
        }
    }

    #[test]
    fn box_lp_matches_closed_form() {
        let cvec = [2.0, -1.0, 0.3, -0.7];
        let mut prog = ConicProgram::new();
        let xs = prog.add_vars(4);
        for (i, &x) in xs.iter().enumerate() {
            prog.set_lower(x, -1.5);
            prog.set_upper(x, 2.0);
            prog.set_objective_term(x, cvec[i]);
        }
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expected: f64 = cvec.iter().map(|&c| (c * -1.5f64).min(c * 2.0)).sum();
        assert_relative_eq!(sol.objective, expected, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_lp_certified() {
        // x >= 3 and x <= 1 simultaneously.
        let mut prog = ConicProgram::new();
        let x = prog.add_var();
        prog.add_ineq(vec![(x, 1.0)], 3.0);
        prog.add_ineq(vec![(x, -1.0)], -1.0);
        prog.set_objective_term(x, 1.0);
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn weak_duality_along_the_trace() {
        let mut prog = ConicProgram::new();
        let t = prog.add_var();
        let a = prog.add_var();
        let b = prog.add_var();
        prog.add_eq(vec![(a, 1.0)], 1.0);
        prog.add_ineq(vec![(b, 1.0), (a, 0.5)], 0.25);
        prog.add_cone(ConeBlock::Soc { head: t, tail: vec![a, b] });
        prog.set_objective_term(t, 1.0);
        prog.set_objective_term(b, 0.1);
        let sol = default_solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        for stats in &sol.trace {
            assert!(stats.complementarity >= -1e-12);
        }
        let last = sol.trace.last().unwrap();
        assert!(last.primal_objective >= last.dual_objective - 1e-6);
    }

    #[test]
    fn deterministic_across_runs() {
        let build = || {
            let mut prog = ConicProgram::new();
            let t = prog.add_var();
            let a = prog.add_var();
            let b = prog.add_var();
            prog.add_eq(vec![(a, 1.0), (b, 0.3)], 2.0);
            prog.add_cone(ConeBlock::Soc { head: t, tail: vec![a, b] });
            prog.set_objective_term(t, 1.0);
            prog
        };
        let s1 = default_solve(&build());
        let s2 = default_solve(&build());
        assert_eq!(s1.x.as_slice(), s2.x.as_slice());
        assert_eq!(s1.iterations, s2.iterations);
    }
}
