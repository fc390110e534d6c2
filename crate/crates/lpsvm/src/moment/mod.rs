//! Moment relaxations of the cellwise dual polynomial program.
//!
//! For a polynomial F over alpha in H_y intersected with a sign cell, the
//! order-t relaxation minimizes L_w(-F) over pseudo-moment sequences
//! w = (w_gamma), |gamma| <= 2t, subject to
//!
//! ```text
//!   M_t(w) PSD,   M_{t-1}(g w) PSD for each cell row g,
//!   M_{t-1}(+-l0 w) PSD (the balance equality sum_i alpha_i y_i = 0),
//!   M_{t-1}((C - alpha_i) w) PSD,  M_{t-1}(alpha_i w) PSD,  w_0 = 1,
//! ```
//!
//! where M_t(w)(gamma, beta) = w_{gamma+beta}. The negated optimal value is
//! an upper bound on max F that becomes exact when the flat-extension rank
//! condition holds, in which case the maximizer is read off the first-order
//! moments.

pub mod sdp;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::core::{binomial, multi_index_enumerate, MultiIndex};
use crate::dual::{HomogeneousPoly, SignCell};
use crate::error::{Error, Result};
use sdp::{ReducedBlock, ReducedSdp};

pub use sdp::SdpStatus;

/// A truncated pseudo-moment sequence over n variables up to degree 2t.
#[derive(Debug, Clone)]
pub struct MomentSequence {
    pub n: usize,
    pub t: usize,
    w: BTreeMap<MultiIndex, f64>,
}

impl MomentSequence {
    pub fn new(n: usize, t: usize) -> Self {
        let mut w = BTreeMap::new();
        w.insert(MultiIndex::zero(n), 1.0);
        Self { n, t, w }
    }

    /// Moments of the point mass at alpha: w_gamma = alpha^gamma.
    pub fn dirac(alpha: &DVector<f64>, t: usize) -> Self {
        let mut seq = Self::new(alpha.len(), t);
        for gamma in multi_index_enumerate(alpha.len(), 2 * t as u32, false) {
            let value = gamma.monomial(alpha);
            seq.set(gamma, value);
        }
        seq
    }

    pub fn max_degree(&self) -> u32 {
        2 * self.t as u32
    }

    pub fn get(&self, gamma: &MultiIndex) -> Result<f64> {
        self.w.get(gamma).copied().ok_or(Error::MissingMomentEntry {
            degree: gamma.degree(),
            max_degree: self.max_degree(),
        })
    }

    pub fn set(&mut self, gamma: MultiIndex, value: f64) {
        self.w.insert(gamma, value);
    }
}

/// Graded-lex monomial basis of degree <= t in n variables.
pub fn moment_basis(n: usize, t: usize) -> Vec<MultiIndex> {
    multi_index_enumerate(n, t as u32, false)
}

/// M_t(w)(gamma, beta) = w_{gamma+beta}.
pub fn moment_matrix(w: &MomentSequence, t: usize) -> Result<DMatrix<f64>> {
    localizing_matrix(w, &[(MultiIndex::zero(w.n), 1.0)], t)
}

/// M_t(gw)(gamma, beta) = sum_zeta g_zeta w_{zeta+gamma+beta}.
pub fn localizing_matrix(
    w: &MomentSequence,
    g: &[(MultiIndex, f64)],
    t: usize,
) -> Result<DMatrix<f64>> {
    let basis = moment_basis(w.n, t);
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (a, ga) in basis.iter().enumerate() {
        for (b, gb) in basis.iter().enumerate().skip(a) {
            let mut value = 0.0;
            for (zeta, coeff) in g {
                value += coeff * w.get(&ga.add(gb).add(zeta))?;
            }
            m[(a, b)] = value;
            m[(b, a)] = value;
        }
    }
    Ok(m)
}

/// What a PSD block of the assembled SDP stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockKind {
    /// M_t(w).
    Moment,
    /// M_{t-1}(g w) for cell row j.
    Cell(usize),
    /// M_{t-1}(l0 w) with l0 = sum_i y_i alpha_i.
    EqPlus,
    /// M_{t-1}(-l0 w).
    EqMinus,
    /// M_{t-1}((C - alpha_i) w).
    BoxUpper(usize),
    /// M_{t-1}(alpha_i w).
    BoxLower(usize),
    /// Scalar bound 0 <= w_gamma <= C w_{gamma - e_i} added while solving;
    /// never part of the assembled problem display.
    Cap,
}

/// A PSD block with entries affine in the moment vector: entry (i, j) is
/// sum over (var, coeff) of coeff * w_var.
#[derive(Debug, Clone)]
pub struct SdpBlockSpec {
    pub kind: BlockKind,
    pub dim: usize,
    pub entries: Vec<(usize, usize, Vec<(usize, f64)>)>,
}

impl SdpBlockSpec {
    /// Evaluates the block at a concrete moment vector.
    pub fn matrix(&self, wvec: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, terms) in &self.entries {
            let value: f64 = terms.iter().map(|&(var, coeff)| coeff * wvec[var]).sum();
            m[(*i, *j)] = value;
            m[(*j, *i)] = value;
        }
        m
    }
}

/// The assembled order-t relaxation over the moment vector indexed by
/// `basis` (graded-lex, degree <= 2t).
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub t: usize,
    pub c_box: f64,
    pub y: Vec<f64>,
    pub basis: Vec<MultiIndex>,
    /// Minimize objective . w  ( = L_w(-F) ).
    pub objective: Vec<f64>,
    pub blocks: Vec<SdpBlockSpec>,
}

impl SdpProblem {
    pub fn var_index(&self, gamma: &MultiIndex) -> Option<usize> {
        self.basis.iter().position(|g| g == gamma)
    }

    /// L_w(-F) at a concrete moment vector.
    pub fn objective_value(&self, wvec: &DVector<f64>) -> f64 {
        self.objective.iter().zip(wvec.iter()).map(|(c, w)| c * w).sum()
    }

    /// Moment vector of the point mass at alpha.
    pub fn dirac_vector(&self, alpha: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|g| g.monomial(alpha)))
    }

    /// Every block PSD (eigenvalues >= -tol) at the given moment vector.
    pub fn is_feasible(&self, wvec: &DVector<f64>, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            b.matrix(wvec).symmetric_eigenvalues().iter().all(|&v| v >= -tol)
        })
    }

    /// Plain text rendering: the objective row, then one labeled block per
    /// constraint family.
    pub fn emit_text(&self) -> String {
        let fmt_gamma = |g: &MultiIndex| -> String {
            g.0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("")
        };
        let mut out = String::from("minimize");
        for (var, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                out.push_str(&format!(" {:+} w_{}", c, fmt_gamma(&self.basis[var])));
            }
        }
        out.push('\n');
        out.push_str(&format!("subject to w_{} = 1\n", fmt_gamma(&MultiIndex::zero(self.n))));
        for block in &self.blocks {
            let label = match &block.kind {
                BlockKind::Moment => "moment".to_string(),
                BlockKind::Cell(j) => format!("cell_row_{j}"),
                BlockKind::EqPlus => "balance_plus".to_string(),
                BlockKind::EqMinus => "balance_minus".to_string(),
                BlockKind::BoxUpper(i) => format!("box_upper_{i}"),
                BlockKind::BoxLower(i) => format!("box_lower_{i}"),
                BlockKind::Cap => "cap".to_string(),
            };
            out.push_str(&format!("block {label} dim {}\n", block.dim));
            for (i, j, terms) in &block.entries {
                out.push_str(&format!("  ({i},{j}) ="));
                for (var, coeff) in terms {
                    out.push_str(&format!(" {:+} w_{}", coeff, fmt_gamma(&self.basis[*var])));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Localizing block of order `t_loc` for the polynomial g given by
/// (exponent, coefficient) pairs.
fn assemble_block(
    kind: BlockKind,
    g: &[(MultiIndex, f64)],
    n: usize,
    t_loc: usize,
    index_of: &BTreeMap<MultiIndex, usize>,
) -> SdpBlockSpec {
    let basis = moment_basis(n, t_loc);
    let dim = basis.len();
    let mut entries = Vec::new();
    for (a, ga) in basis.iter().enumerate() {
        for (b, gb) in basis.iter().enumerate().skip(a) {
            let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
            for (zeta, coeff) in g {
                let var = index_of[&ga.add(gb).add(zeta)];
                *terms.entry(var).or_insert(0.0) += coeff;
            }
            terms.retain(|_, c| *c != 0.0);
            if !terms.is_empty() {
                entries.push((a, b, terms.into_iter().collect()));
            }
        }
    }
    SdpBlockSpec { kind, dim, entries }
}

/// Builds the order-t relaxation of max F(alpha) = coef * poly(alpha) +
/// linear . alpha over H_y intersected with the cell.
pub fn build_relaxation(
    poly: &HomogeneousPoly,
    coef: f64,
    linear: &[f64],
    cell: &SignCell,
    y: &[f64],
    c_box: f64,
    t: usize,
) -> Result<SdpProblem> {
    let n = y.len();
    let t_min = (poly.degree as usize).div_ceil(2).max(1);
    if t < t_min {
        return Err(Error::OrderTooLow { t, t_min });
    }
    let moment_count = binomial((n + 2 * t) as u64, (2 * t) as u64);
    if moment_count > 2000 {
        return Err(Error::SizeGuard(format!(
            "relaxation needs {moment_count} moments (limit 2000)"
        )));
    }
    let block_dim = binomial((n + t) as u64, t as u64);
    if block_dim > 200 {
        return Err(Error::SizeGuard(format!(
            "moment matrix dimension {block_dim} exceeds 200"
        )));
    }

    let basis = moment_basis(n, 2 * t);
    let index_of: BTreeMap<MultiIndex, usize> =
        basis.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();

    let mut objective = vec![0.0; basis.len()];
    for (gamma, pc) in &poly.terms {
        objective[index_of[gamma]] -= coef * pc;
    }
    for (i, li) in linear.iter().enumerate() {
        if *li != 0.0 {
            objective[index_of[&MultiIndex::unit(n, i)]] -= li;
        }
    }

    let one = vec![(MultiIndex::zero(n), 1.0)];
    let l0: Vec<(MultiIndex, f64)> =
        (0..n).map(|i| (MultiIndex::unit(n, i), y[i])).collect();
    let neg_l0: Vec<(MultiIndex, f64)> = l0.iter().map(|(g, c)| (g.clone(), -c)).collect();

    let mut blocks = Vec::new();
    blocks.push(assemble_block(BlockKind::Moment, &one, n, t, &index_of));
    for (j, row) in cell.rows.iter().enumerate() {
        let g: Vec<(MultiIndex, f64)> = (0..n)
            .filter(|&i| row[i] != 0.0)
            .map(|i| (MultiIndex::unit(n, i), row[i]))
            .collect();
        blocks.push(assemble_block(BlockKind::Cell(j), &g, n, t - 1, &index_of));
    }
    blocks.push(assemble_block(BlockKind::EqPlus, &l0, n, t - 1, &index_of));
    blocks.push(assemble_block(BlockKind::EqMinus, &neg_l0, n, t - 1, &index_of));
    for i in 0..n {
        let upper = vec![
            (MultiIndex::zero(n), c_box),
            (MultiIndex::unit(n, i), -1.0),
        ];
        blocks.push(assemble_block(BlockKind::BoxUpper(i), &upper, n, t - 1, &index_of));
        let lower = vec![(MultiIndex::unit(n, i), 1.0)];
        blocks.push(assemble_block(BlockKind::BoxLower(i), &lower, n, t - 1, &index_of));
    }

    Ok(SdpProblem { n, t, c_box, y: y.to_vec(), basis, objective, blocks })
}

/// Coefficient vector of l0 * alpha^delta in the degree <= `cap` basis.
fn ideal_vector(
    y: &[f64],
    delta: &MultiIndex,
    basis: &[MultiIndex],
    index_of: &BTreeMap<MultiIndex, usize>,
) -> DVector<f64> {
    let mut v = DVector::zeros(basis.len());
    for (i, &yi) in y.iter().enumerate() {
        let gamma = delta.add(&MultiIndex::unit(y.len(), i));
        if let Some(&idx) = index_of.get(&gamma) {
            v[idx] += yi;
        }
    }
    v
}

/// Orthonormal basis of the orthogonal complement of the span of `vectors`
/// (columns), via SVD.
fn complement_basis(dim: usize, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    if vectors.is_empty() {
        return DMatrix::identity(dim, dim);
    }
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count();
    // Columns of u beyond the rank already lie in the complement; complete
    // them to a full orthonormal basis of im(m)^perp by Gram-Schmidt over
    // the coordinate vectors.
    let mut span: Vec<DVector<f64>> = (0..rank).map(|j| u.column(j).into_owned()).collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in rank..u.ncols() {
        let c = u.column(j).into_owned();
        span.push(c.clone());
        cols.push(c);
    }
    for e in 0..dim {
        if span.len() >= dim {
            break;
        }
        let mut cand = DVector::zeros(dim);
        cand[e] = 1.0;
        for s in &span {
            let dot = cand.dot(s);
            cand -= s * dot;
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cand /= norm;
            span.push(cand.clone());
            cols.push(cand);
        }
    }
    let mut out = DMatrix::zeros(dim, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Solves the relaxation: the balance equality is expanded into linear rows
/// L(l0 alpha^delta) = 0 up to degree 2t-1, the equality pair blocks are
/// dropped, the remaining blocks are facially reduced by the forced
/// nullspace of the hyperplane ideal, the linear rows are eliminated through
/// an SVD nullspace parameterization, and the reduced SDP goes to the
/// barrier solver. Returns (rho, w*, status).
pub fn solve_sdp(problem: &SdpProblem, tol: f64) -> Result<(f64, MomentSequence, SdpStatus)> {
    let n = problem.n;
    let t = problem.t;
    let nvar = problem.basis.len();
    let index_of: BTreeMap<MultiIndex, usize> =
        problem.basis.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();

    // Linear equalities: w_0 = 1 and L(l0 alpha^delta) = 0, |delta| <= 2t-1.
    let mut eq_rows: Vec<DVector<f64>> = Vec::new();
    let mut eq_rhs: Vec<f64> = Vec::new();
    let mut w0 = DVector::zeros(nvar);
    w0[index_of[&MultiIndex::zero(n)]] = 1.0;
    eq_rows.push(w0);
    eq_rhs.push(1.0);
    for delta in multi_index_enumerate(n, 2 * t as u32 - 1, false) {
        let row = ideal_vector(&problem.y, &delta, &problem.basis, &index_of);
        if row.norm() > 0.0 {
            eq_rows.push(row);
            eq_rhs.push(0.0);
        }
    }
    let m_eq = eq_rows.len();
    let mut e = DMatrix::zeros(m_eq, nvar);
    for (i, row) in eq_rows.iter().enumerate() {
        e.set_row(i, &row.transpose());
    }
    let rhs = DVector::from_vec(eq_rhs);
    let svd = e.clone().svd(true, true);
    let w_p = svd.solve(&rhs, 1e-10).map_err(|m| Error::SolverFailure(m.to_string()))?;
    // Nullspace of E: right singular vectors past the numerical rank.
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count();
    let mut null_cols: Vec<DVector<f64>> =
        (rank..vt.nrows()).map(|i| vt.row(i).transpose().into_owned()).collect();
    // vt only carries min(m_eq, nvar) rows; complete the nullspace basis.
    {
        let mut span: Vec<DVector<f64>> =
            (0..rank).map(|i| vt.row(i).transpose().into_owned()).collect();
        span.extend(null_cols.iter().cloned());
        for ei in 0..nvar {
            if span.len() >= nvar {
                break;
            }
            let mut cand = DVector::zeros(nvar);
            cand[ei] = 1.0;
            for s in &span {
                let dot = cand.dot(s);
                cand -= s * dot;
            }
            let norm = cand.norm();
            if norm > 1e-8 {
                cand /= norm;
                span.push(cand.clone());
                null_cols.push(cand);
            }
        }
    }
    let zdim = null_cols.len();
    let mut nmat = DMatrix::zeros(nvar, zdim);
    for (j, c) in null_cols.iter().enumerate() {
        nmat.set_column(j, c);
    }

    // Facial reduction bases: the hyperplane ideal forces M_t(w) q = 0 for
    // q = l0 * alpha^delta, |delta| <= t-1, and similarly at order t-1 for
    // the localizing blocks.
    let reduction = |order: usize| -> DMatrix<f64> {
        let b = moment_basis(n, order);
        let idx: BTreeMap<MultiIndex, usize> =
            b.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
        if order == 0 {
            return DMatrix::identity(1, 1);
        }
        let vectors: Vec<DVector<f64>> = multi_index_enumerate(n, order as u32 - 1, false)
            .into_iter()
            .map(|delta| ideal_vector(&problem.y, &delta, &b, &idx))
            .filter(|v| v.norm() > 0.0)
            .collect();
        complement_basis(b.len(), &vectors)
    };
    let u_t = reduction(t);
    let u_t1 = reduction(t - 1);
    let u_cap = DMatrix::identity(1, 1);

    // Scalar sandwich bounds 0 <= w_gamma <= C w_{gamma - e_i} for every
    // monomial. Both hold for any measure supported in the box, so the bound
    // is unchanged; they make the feasible set compact so the barrier cannot
    // drift along high-degree moments that only appear inside M_t(w), which
    // would wreck the rank test on the returned sequence.
    let mut caps: Vec<SdpBlockSpec> = Vec::new();
    for (var, gamma) in problem.basis.iter().enumerate() {
        if gamma.degree() == 0 {
            continue;
        }
        let i = gamma.0.iter().position(|&e| e > 0).expect("positive degree");
        let mut delta = gamma.clone();
        delta.0[i] -= 1;
        let below = index_of[&delta];
        caps.push(SdpBlockSpec {
            kind: BlockKind::Cap,
            dim: 1,
            entries: vec![(0, 0, vec![(var, 1.0)])],
        });
        caps.push(SdpBlockSpec {
            kind: BlockKind::Cap,
            dim: 1,
            entries: vec![(0, 0, vec![(below, problem.c_box), (var, -1.0)])],
        });
    }

    let mut blocks = Vec::new();
    for spec in problem.blocks.iter().chain(caps.iter()) {
        if matches!(spec.kind, BlockKind::EqPlus | BlockKind::EqMinus) {
            continue;
        }
        let u = match spec.kind {
            BlockKind::Moment => &u_t,
            BlockKind::Cap => &u_cap,
            _ => &u_t1,
        };
        let reduce = |wvec: &DVector<f64>| -> DMatrix<f64> {
            let full = spec.matrix(wvec);
            u.transpose() * full * u
        };
        let constant = reduce(&w_p);
        let coeffs: Vec<DMatrix<f64>> =
            (0..zdim).map(|k| reduce(&nmat.column(k).into_owned())).collect();
        if constant.nrows() > 0 {
            blocks.push(ReducedBlock { constant, coeffs });
        }
    }

    let c0: f64 = problem.objective.iter().zip(w_p.iter()).map(|(c, w)| c * w).sum();
    let c_red: Vec<f64> = (0..zdim)
        .map(|k| {
            problem
                .objective
                .iter()
                .zip(nmat.column(k).iter())
                .map(|(c, w)| c * w)
                .sum()
        })
        .collect();

    let reduced = ReducedSdp { objective: c_red.clone(), blocks };
    let (zeta, lower, status) = sdp::solve_reduced(&reduced, tol)?;

    // Re-center for extraction: on the slice where the objective equals the
    // attained value, minimize tr M_t(w). The trace is linear in w, so its
    // minimum over that slice is attained at a low-rank extreme point; when
    // the maximizer set is a face rather than a single point (duplicate
    // samples, say, leave the objective blind to how mass is split between
    // them) this selects the minimum-norm representative and keeps the rank
    // test meaningful. The slice constraint is eliminated by substitution,
    // with the first solution as the interior starting point, and the
    // certified bound from the first solve is unaffected.
    let mut trace = DVector::<f64>::zeros(nvar);
    for gamma in moment_basis(n, t) {
        trace[index_of[&gamma.add(&gamma)]] += 1.0;
    }
    let d_red = DVector::from_iterator(zdim, (0..zdim).map(|k| trace.dot(&nmat.column(k))));
    let c_vec = DVector::from_vec(c_red.clone());
    let zeta = if c_vec.norm() > 1e-14 {
        let nslice = complement_basis(zdim, &[c_vec]);
        let sdim = nslice.ncols();
        let mut slice_blocks = Vec::with_capacity(reduced.blocks.len());
        for b in &reduced.blocks {
            let dim = b.constant.nrows();
            let constant = b.eval(&zeta);
            let coeffs: Vec<DMatrix<f64>> = (0..sdim)
                .map(|j| {
                    let mut a = DMatrix::<f64>::zeros(dim, dim);
                    for k in 0..zdim {
                        let weight = nslice[(k, j)];
                        if weight != 0.0 {
                            a += &b.coeffs[k] * weight;
                        }
                    }
                    a
                })
                .collect();
            slice_blocks.push(ReducedBlock { constant, coeffs });
        }
        let d_slice: Vec<f64> = (0..sdim).map(|j| nslice.column(j).dot(&d_red)).collect();
        let slice = ReducedSdp { objective: d_slice, blocks: slice_blocks };
        // The re-center only feeds extraction; a looser gap keeps it cheap
        // while the atoms stay well inside the rank test's resolution.
        match sdp::solve_reduced_warm(&slice, &DVector::zeros(sdim), tol.max(1e-5)) {
            Ok((xi, _, _)) => &zeta + &nslice * &xi,
            Err(_) => zeta,
        }
    } else {
        zeta
    };

    let wvec = &w_p + &nmat * &zeta;
    let mut seq = MomentSequence::new(n, t);
    for (gamma, &value) in problem.basis.iter().zip(wvec.iter()) {
        seq.set(gamma.clone(), value);
    }
    Ok((lower + c0, seq, status))
}

/// Reads the candidate maximizer off the first-order moments and certifies
/// it when the numerical ranks of M_t and M_{t-1} agree (flatness).
pub fn extract_solution(
    w: &MomentSequence,
    t: usize,
    rank_tol: f64,
) -> Result<(DVector<f64>, bool)> {
    let alpha = DVector::from_iterator(
        w.n,
        (0..w.n)
            .map(|i| w.get(&MultiIndex::unit(w.n, i)))
            .collect::<Result<Vec<f64>>>()?,
    );
    let rank = |order: usize| -> Result<usize> {
        let m = moment_matrix(w, order)?;
        let sv = m.svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(sv.iter().filter(|&&s| s > rank_tol * smax.max(1e-300)).count())
    };
    let certified = rank(t)? == rank(t - 1)?;
    Ok((alpha, certified))
}
