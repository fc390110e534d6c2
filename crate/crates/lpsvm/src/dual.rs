//! The Lagrangian dual of the lp-SVM over H_y = {alpha in [0,C]^n :
//! sum_i alpha_i y_i = 0}:
//!
//! ```text
//!   max  (1/p^q - 1/p^(q-1)) sum_j |sum_i alpha_i y_i x_ij|^q + sum_i alpha_i
//! ```
//!
//! The leading coefficient is negative, so the objective is concave on H_y.
//! For integer q = r the absolute values resolve on each cell of the sign
//! arrangement {sum_i alpha_i y_i x_ij = 0}, where the power sum becomes a
//! homogeneous degree-r polynomial; even r collapses the arrangement to a
//! single cell. The optimizer is a projected gradient ascent, either over
//! H_y directly (even q) or cell by cell with Dykstra projections.

use nalgebra::{DMatrix, DVector};

use crate::conic::{solve, ConicProgram, SolveOptions, SolveStatus};
use crate::core::{multi_index_enumerate, multinomial_coeff, Dataset, Hyperplane, MultiIndex, NormParam};
use crate::error::{Error, Result};

/// H_y as a membership test.
#[derive(Debug, Clone)]
pub struct DualFeasibleSet {
    pub y: Vec<f64>,
    pub c: f64,
}

impl DualFeasibleSet {
    pub fn contains(&self, alpha: &DVector<f64>, tol: f64) -> bool {
        if alpha.len() != self.y.len() {
            return false;
        }
        let balance: f64 = alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum();
        alpha.iter().all(|&a| (-tol..=self.c + tol).contains(&a)) && balance.abs() <= tol
    }
}

/// One cell of the sign arrangement: sign vector over the D features and the
/// inequality normals {alpha : rows_l . alpha >= 0}.
#[derive(Debug, Clone)]
pub struct SignCell {
    pub signs: Vec<i8>,
    pub rows: Vec<DVector<f64>>,
}

impl SignCell {
    /// The single all-plus cell with no rows (even r).
    pub fn trivial(d: usize) -> Self {
        Self { signs: vec![1; d], rows: Vec::new() }
    }
}

/// A homogeneous polynomial of fixed degree as a coefficient map.
#[derive(Debug, Clone)]
pub struct HomogeneousPoly {
    pub degree: u32,
    pub terms: Vec<(MultiIndex, f64)>,
}

impl HomogeneousPoly {
    pub fn evaluate(&self, alpha: &DVector<f64>) -> f64 {
        self.terms.iter().map(|(gamma, coeff)| coeff * gamma.monomial(alpha)).sum()
    }

    pub fn coefficient(&self, gamma: &MultiIndex) -> f64 {
        self.terms
            .iter()
            .find(|(g, _)| g == gamma)
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }
}

/// sum_i alpha_i y_i x_ij for each feature j.
fn feature_sums(alpha: &DVector<f64>, ds: &Dataset) -> DVector<f64> {
    let x = ds.features();
    DVector::from_iterator(
        ds.d(),
        (0..ds.d()).map(|j| (0..ds.n()).map(|i| alpha[i] * ds.labels()[i] * x[(i, j)]).sum()),
    )
}

/// The dual objective; alpha need not satisfy the balance equality.
pub fn dual_objective(alpha: &DVector<f64>, ds: &Dataset, np: NormParam) -> f64 {
    let q = np.q();
    let coeff = np.dual_coefficient();
    let sums = feature_sums(alpha, ds);
    coeff * sums.iter().map(|s| s.abs().powf(q)).sum::<f64>() + alpha.sum()
}

/// Gradient of the dual objective. For even integer q it exists everywhere;
/// otherwise alpha must keep every feature sum away from zero.
pub fn dual_gradient(alpha: &DVector<f64>, ds: &Dataset, np: NormParam) -> Result<DVector<f64>> {
    let q = np.q();
    let coeff = np.dual_coefficient();
    let sums = feature_sums(alpha, ds);
    let mut powers = DVector::zeros(ds.d());
    for j in 0..ds.d() {
        powers[j] = if np.q_is_even_integer() {
            sums[j].powi(np.r() as i32 - 1)
        } else {
            if sums[j].abs() < 1e-12 {
                return Err(Error::CellBoundary { feature: j });
            }
            sums[j].signum() * sums[j].abs().powf(q - 1.0)
        };
    }
    let x = ds.features();
    Ok(DVector::from_iterator(
        ds.n(),
        (0..ds.n()).map(|i| {
            let yi = ds.labels()[i];
            let power_term: f64 = (0..ds.d()).map(|j| powers[j] * yi * x[(i, j)]).sum();
            q * coeff * power_term + 1.0
        }),
    ))
}

/// Strict feasibility of {alpha in [0,1]^n, sum alpha_i y_i = 0,
/// rows . alpha >= margin}: solves max margin and compares against tol.
fn strict_cell_feasibility(ds: &Dataset, rows: &[DVector<f64>]) -> Result<bool> {
    let n = ds.n();
    let mut prog = ConicProgram::new();
    let alphas = prog.add_vars(n);
    let t = prog.add_var();
    for &a in &alphas {
        prog.set_lower(a, 0.0);
        prog.set_upper(a, 1.0);
    }
    prog.set_upper(t, 1.0);
    prog.set_lower(t, -1.0);
    let balance: Vec<(usize, f64)> =
        alphas.iter().enumerate().map(|(i, &a)| (a, ds.labels()[i])).collect();
    prog.add_eq(balance, 0.0);
    for row in rows {
        let mut terms: Vec<(usize, f64)> =
            alphas.iter().enumerate().map(|(i, &a)| (a, row[i])).collect();
        terms.push((t, -1.0));
        prog.add_ineq(terms, 0.0);
    }
    prog.set_objective_term(t, -1.0);
    let sol = solve(&prog, &SolveOptions::default())?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol.x[t] > 1e-7),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::IterationLimit => Err(Error::IterationLimit),
    }
}

/// The cells of the arrangement {sum_i alpha_i y_i x_ij = 0} that meet H_y
/// with nonempty relative interior. Even r gives the single all-plus cell.
pub fn enumerate_cells(ds: &Dataset, np: NormParam) -> Result<Vec<SignCell>> {
    let d = ds.d();
    if d > 20 {
        return Err(Error::SizeGuard(format!("cell enumeration limited to 20 features, got {d}")));
    }
    if np.r() % 2 == 0 {
        return Ok(vec![SignCell::trivial(d)]);
    }
    let normals: Vec<DVector<f64>> = (0..d)
        .map(|j| {
            DVector::from_iterator(
                ds.n(),
                (0..ds.n()).map(|i| ds.labels()[i] * ds.features()[(i, j)]),
            )
        })
        .collect();

    let mut cells = Vec::new();
    let mut stack: Vec<(usize, Vec<i8>, Vec<DVector<f64>>)> = vec![(0, Vec::new(), Vec::new())];
    while let Some((j, signs, rows)) = stack.pop() {
        if j == d {
            cells.push(SignCell { signs, rows });
            continue;
        }
        let mut feasible = Vec::new();
        for sign in [1i8, -1i8] {
            let mut candidate = rows.clone();
            candidate.push(&normals[j] * f64::from(sign));
            if strict_cell_feasibility(ds, &candidate)? {
                feasible.push((sign, candidate));
            }
        }
        if feasible.is_empty() {
            // The hyperplane is trivial on the current region (for instance a
            // zero column); no branching and no row.
            let mut signs = signs;
            signs.push(1);
            stack.push((j + 1, signs, rows));
        } else {
            // Depth-first with +1 explored before -1.
            for (sign, candidate) in feasible.into_iter().rev() {
                let mut signs = signs.clone();
                signs.push(sign);
                stack.push((j + 1, signs, candidate));
            }
        }
    }
    Ok(cells)
}

/// Expands sum_j (s_j sum_i alpha_i y_i x_ij)^r into its monomials: the
/// coefficient of gamma is c_gamma y^gamma sum_j s_j^r x_j^gamma.
pub fn expand_homogeneous(ds: &Dataset, cell: &SignCell, r: u32) -> Result<HomogeneousPoly> {
    let n = ds.n();
    let count_estimate = crate::core::binomial((n as u64) + u64::from(r) - 1, u64::from(r));
    if count_estimate > 50_000 {
        return Err(Error::SizeGuard(format!(
            "homogeneous expansion would need {count_estimate} coefficients"
        )));
    }
    let x = ds.features();
    let indices = multi_index_enumerate(n, r, true);
    let mut terms = Vec::with_capacity(indices.len());
    for gamma in indices {
        let c_gamma = multinomial_coeff(&gamma)? as f64;
        let y_gamma: f64 = gamma
            .0
            .iter()
            .zip(ds.labels())
            .map(|(&g, &y)| y.powi(g as i32))
            .product();
        let mut sum = 0.0;
        for j in 0..ds.d() {
            let s_pow = f64::from(i32::from(cell.signs[j])).powi(r as i32);
            let col_pow: f64 =
                gamma.0.iter().enumerate().map(|(i, &g)| x[(i, j)].powi(g as i32)).product();
            sum += s_pow * col_pow;
        }
        let coeff = c_gamma * y_gamma * sum;
        if coeff != 0.0 {
            terms.push((gamma, coeff));
        }
    }
    Ok(HomogeneousPoly { degree: r, terms })
}

/// Exact Euclidean projection onto [0, C]^n intersected with
/// {sum alpha_i y_i = 0}: clip composed with bisection on the multiplier.
pub fn project_feasible(beta: &DVector<f64>, y: &[f64], c: f64) -> DVector<f64> {
    let point = |lambda: f64| -> DVector<f64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().zip(y).map(|(&b, &yi)| (b + lambda * yi).clamp(0.0, c)),
        )
    };
    let balance = |lambda: f64| -> f64 {
        point(lambda).iter().zip(y).map(|(a, &yi)| a * yi).sum()
    };
    let bound = c + beta.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // balance is nondecreasing in lambda.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(0.5 * (lo + hi))
}

/// Dykstra alternating projections onto the intersection of the exact
/// box-plus-balance projector and the cell halfspaces.
fn project_cell(
    beta: &DVector<f64>,
    y: &[f64],
    c: f64,
    rows: &[DVector<f64>],
) -> DVector<f64> {
    if rows.is_empty() {
        return project_feasible(beta, y, c);
    }
    let k = rows.len() + 1;
    let n = beta.len();
    let mut point = beta.clone();
    let mut corrections = vec![DVector::zeros(n); k];
    let norms: Vec<f64> = rows.iter().map(|r| r.norm_squared().max(1e-300)).collect();
    for _ in 0..500 {
        let before = point.clone();
        for (set, correction) in corrections.iter_mut().enumerate() {
            let shifted = &point + &*correction;
            let projected = if set == 0 {
                project_feasible(&shifted, y, c)
            } else {
                let row = &rows[set - 1];
                let violation = row.dot(&shifted).min(0.0);
                &shifted - row * (violation / norms[set - 1])
            };
            *correction = shifted - &projected;
            point = projected;
        }
        if (&point - before).norm() < 1e-12 {
            break;
        }
    }
    point
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMethod {
    ProjectedGradient,
    Cellwise,
}

/// Projected gradient ascent of a concave objective over a convex set given
/// by a projection oracle; Armijo backtracking on the step.
fn ascend<F, G, P>(
    start: DVector<f64>,
    value: F,
    gradient: G,
    project: P,
    tol: f64,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    P: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut alpha = project(&start);
    let mut step = 1.0;
    for _ in 0..50_000 {
        let grad = gradient(&alpha)?;
        let mapped = project(&(&alpha + &grad));
        if (&mapped - &alpha).norm() <= tol {
            return Ok(alpha);
        }
        let current = value(&alpha);
        let mut accepted = false;
        for _ in 0..60 {
            let trial = project(&(&alpha + &grad * step));
            let move_vec = &trial - &alpha;
            if value(&trial) >= current + 1e-4 * grad.dot(&move_vec) && move_vec.norm() > 0.0 {
                alpha = trial;
                step *= 1.2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(alpha);
        }
    }
    Err(Error::IterationLimit)
}

/// Maximizes the dual over H_y. Projected gradient needs even integer q;
/// the cellwise method needs integer q and enumerable cells.
pub fn solve_dual(
    ds: &Dataset,
    np: NormParam,
    c: f64,
    method: DualMethod,
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
    }
    let y = ds.labels().to_vec();
    let start = DVector::from_element(ds.n(), c / 2.0);
    match method {
        DualMethod::ProjectedGradient => {
            if !np.q_is_even_integer() {
                return Err(Error::InvalidConfig(
                    "projected gradient needs an even integer q".into(),
                ));
            }
            let alpha = ascend(
                start,
                |a| dual_objective(a, ds, np),
                |a| dual_gradient(a, ds, np),
                |a| project_feasible(a, &y, c),
                tol,
            )?;
            let value = dual_objective(&alpha, ds, np);
            Ok((alpha, value))
        }
        DualMethod::Cellwise => {
            if !np.q_is_integer() {
                return Err(Error::InvalidConfig(
                    "cellwise maximization needs integer q; use the fractional program form".into(),
                ));
            }
            let cells = enumerate_cells(ds, np)?;
            let coeff = np.dual_coefficient();
            let mut best: Option<(DVector<f64>, f64)> = None;
            for cell in &cells {
                let poly = expand_homogeneous(ds, cell, np.r())?;
                let value_fn =
                    |a: &DVector<f64>| -> f64 { coeff * poly.evaluate(a) + a.sum() };
                let grad_fn = |a: &DVector<f64>| -> Result<DVector<f64>> {
                    let sums = feature_sums(a, ds);
                    let x = ds.features();
                    Ok(DVector::from_iterator(
                        ds.n(),
                        (0..ds.n()).map(|i| {
                            let yi = ds.labels()[i];
                            let power: f64 = (0..ds.d())
                                .map(|j| {
                                    let s = f64::from(i32::from(cell.signs[j]));
                                    s * (s * sums[j]).powi(np.r() as i32 - 1) * yi * x[(i, j)]
                                })
                                .sum();
                            coeff * f64::from(np.r()) * power + 1.0
                        }),
                    ))
                };
                let alpha = ascend(
                    start.clone(),
                    value_fn,
                    grad_fn,
                    |a| project_cell(a, &y, c, &cell.rows),
                    tol,
                )?;
                let value = dual_objective(&alpha, ds, np);
                let better = match &best {
                    Some((_, incumbent)) => value > *incumbent + 1e-12,
                    None => true,
                };
                if better {
                    best = Some((alpha, value));
                }
            }
            best.ok_or_else(|| Error::SolverFailure("no feasible cell".into()))
        }
    }
}

/// Recovers the hyperplane from near-optimal multipliers:
/// omega_j = (1/p^(q-1)) sgn(S_j) |S_j|^(q-1), with the intercept averaged
/// over strictly interior support vectors.
pub fn recover_hyperplane(
    alpha: &DVector<f64>,
    ds: &Dataset,
    np: NormParam,
    c: f64,
) -> Result<Hyperplane> {
    let q = np.q();
    let p = np.p();
    let sums = feature_sums(alpha, ds);
    let omega = DVector::from_iterator(
        ds.d(),
        sums.iter().map(|&s| p.powf(-(q - 1.0)) * s.signum() * s.abs().powf(q - 1.0)),
    );
    let tol = 1e-6 * c.max(1.0);
    let mut b_sum = 0.0;
    let mut count = 0usize;
    for i in 0..ds.n() {
        if alpha[i] > tol && alpha[i] < c - tol {
            b_sum += ds.labels()[i] - omega.dot(&ds.row(i));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoInteriorSupportVector);
    }
    Ok(Hyperplane { omega, b: b_sum / count as f64 })
}

/// The fractional-q (s > 1) dual in its constrained polynomial form over one
/// cell: objective coeff sum_j delta_j + sum_i alpha_i, subject to
/// (s_j S_j(alpha))^r - delta_j^s <= 0 per feature.
#[derive(Debug, Clone)]
pub struct FractionalDualProgram {
    pub np: NormParam,
    pub c: f64,
    pub signs: Vec<i8>,
    /// Homogeneous expansion of (s_j S_j)^r per feature.
    pub feature_polys: Vec<HomogeneousPoly>,
}

impl FractionalDualProgram {
    pub fn objective(&self, alpha: &DVector<f64>, delta: &DVector<f64>) -> f64 {
        self.np.dual_coefficient() * delta.sum() + alpha.sum()
    }

    /// Value of constraint j; feasible when <= 0.
    pub fn constraint(&self, j: usize, alpha: &DVector<f64>, delta: &DVector<f64>) -> f64 {
        self.feature_polys[j].evaluate(alpha) - delta[j].powi(self.np.s() as i32)
    }
}

pub fn build_fractional_dual(
    ds: &Dataset,
    np: NormParam,
    c: f64,
    cell: &SignCell,
) -> Result<FractionalDualProgram> {
    if np.s() == 1 {
        return Err(Error::InvalidConfig(
            "integer q has a plain homogeneous expansion; the fractional form needs s > 1".into(),
        ));
    }
    let mut feature_polys = Vec::with_capacity(ds.d());
    for j in 0..ds.d() {
        let single = SignCell { signs: cell.signs.clone(), rows: Vec::new() };
        let mut poly = expand_homogeneous(&restrict_to_feature(ds, j), &single, np.r())?;
        // restrict_to_feature keeps only column j, so the expansion is the
        // wanted per-feature power.
        poly.terms.retain(|(_, coeff)| *coeff != 0.0);
        feature_polys.push(poly);
    }
    Ok(FractionalDualProgram { np, c, signs: cell.signs.clone(), feature_polys })
}

fn restrict_to_feature(ds: &Dataset, j: usize) -> Dataset {
    let col = DMatrix::from_iterator(ds.n(), 1, (0..ds.n()).map(|i| ds.features()[(i, j)]));
    Dataset::new(col, ds.labels().to_vec()).expect("single-column restriction stays valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_maps::{apply_transform, TransformSpec};
    use crate::fixtures::six_point_dataset;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn lifted_six_points() -> Dataset {
        apply_transform(&six_point_dataset(), &TransformSpec::quadratic(3)).unwrap()
    }

    fn optimal_alpha() -> DVector<f64> {
        DVector::from_vec(vec![0.0, 2.1213, 2.1213, 2.1213, 1.0611, 1.0611])
    }

    #[test]
    fn objective_at_zero_and_reference_point() {
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        assert_eq!(dual_objective(&DVector::zeros(6), &ds, np), 0.0);
        // The reference multipliers are rounded to four decimals, which
        // shifts the objective by a few millis.
        let value = dual_objective(&optimal_alpha(), &ds, np);
        assert_relative_eq!(value, 5.6569, epsilon = 5e-3);
    }

    #[test]
    fn objective_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let np = NormParam::new(2, 1).unwrap();
        for _ in 0..20 {
            let x = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-2.0..2.0));
            let ds = Dataset::new(x.clone(), vec![1.0, -1.0, 1.0]).unwrap();
            let alpha = DVector::from_fn(3, |_, _| rng.gen_range(0.0..1.0));
            let mut naive = alpha.sum();
            for j in 0..2 {
                let mut s = 0.0;
                for i in 0..3 {
                    s += alpha[i] * ds.labels()[i] * x[(i, j)];
                }
                naive += np.dual_coefficient() * s * s;
            }
            assert_relative_eq!(dual_objective(&alpha, &ds, np), naive, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_at_zero_is_all_ones() {
        let ds = lifted_six_points();
        for (r, s) in [(2u32, 1u32), (4, 1)] {
            let np = NormParam::new(r, s).unwrap();
            let grad = dual_gradient(&DVector::zeros(6), &ds, np).unwrap();
            for g in grad.iter() {
                assert_eq!(*g, 1.0);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (r, s) in [(2u32, 1u32), (4, 1)] {
            let np = NormParam::new(r, s).unwrap();
            for _ in 0..10 {
                let x = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.5..1.5));
                let ds = Dataset::new(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
                let alpha = DVector::from_fn(4, |_, _| rng.gen_range(0.1..0.9));
                let grad = dual_gradient(&alpha, &ds, np).unwrap();
                let h = 1e-6;
                for i in 0..4 {
                    let mut hi = alpha.clone();
                    let mut lo = alpha.clone();
                    hi[i] += h;
                    lo[i] -= h;
                    let fd =
                        (dual_objective(&hi, &ds, np) - dual_objective(&lo, &ds, np)) / (2.0 * h);
                    assert_relative_eq!(grad[i], fd, epsilon = 1e-5 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn gradient_rejects_cell_boundary_for_odd_q() {
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        assert!(matches!(
            dual_gradient(&DVector::zeros(6), &ds, np),
            Err(Error::CellBoundary { .. })
        ));
    }

    #[test]
    fn even_r_has_one_cell() {
        let ds = lifted_six_points();
        let np = NormParam::new(4, 1).unwrap();
        let cells = enumerate_cells(&ds, np).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].signs.iter().all(|&s| s == 1));
    }

    #[test]
    fn six_point_arrangement_has_two_cells() {
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        let cells = enumerate_cells(&ds, np).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].signs, vec![-1, 1, -1]);
        assert_eq!(cells[1].signs, vec![-1, -1, -1]);
    }

    #[test]
    fn zero_column_gives_single_cell() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let ds = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let np = NormParam::new(3, 1).unwrap();
        let cells = enumerate_cells(&ds, np).unwrap();
        assert_eq!(cells.len(), 1);
    }

    #[test]
    fn expansion_matches_direct_power_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, d, r) in [(3usize, 2usize, 2u32), (4, 2, 3), (5, 3, 4)] {
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
            let mut y = vec![1.0; n];
            y[0] = -1.0;
            let ds = Dataset::new(x.clone(), y.clone()).unwrap();
            let signs: Vec<i8> = (0..d).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect();
            let cell = SignCell { signs: signs.clone(), rows: Vec::new() };
            let poly = expand_homogeneous(&ds, &cell, r).unwrap();
            for _ in 0..30 {
                let alpha = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
                let mut direct = 0.0;
                for j in 0..d {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += alpha[i] * y[i] * x[(i, j)];
                    }
                    direct += (f64::from(i32::from(signs[j])) * s).powi(r as i32);
                }
                let expanded = poly.evaluate(&alpha);
                assert_relative_eq!(expanded, direct, epsilon = 1e-10 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn expansion_reference_coefficient() {
        // The alpha_2^3 coefficient of the first-cell expansion is -1, which
        // the negative leading factor -4/27 turns into +4/27.
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        let cells = enumerate_cells(&ds, np).unwrap();
        let poly = expand_homogeneous(&ds, &cells[0], 3).unwrap();
        let gamma = MultiIndex(vec![0, 3, 0, 0, 0, 0]);
        assert_relative_eq!(poly.coefficient(&gamma), -1.0, epsilon = 1e-12);
        assert_relative_eq!(np.dual_coefficient(), -4.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn single_point_expansion() {
        let x = DMatrix::from_row_slice(2, 2, &[0.5, -1.5, 0.0, 0.0]);
        let ds = Dataset::new(x, vec![-1.0, 1.0]).unwrap();
        let cell = SignCell { signs: vec![1, 1], rows: Vec::new() };
        let poly = expand_homogeneous(&ds, &cell, 3).unwrap();
        // Only alpha_1 couples to the data; gamma = (3, 0).
        let gamma = MultiIndex(vec![3, 0]);
        let expected = (-1.0f64).powi(3) * (0.5f64.powi(3) + (-1.5f64).powi(3));
        assert_relative_eq!(poly.coefficient(&gamma), expected, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_exact_on_feasible_points() {
        let y = [1.0, -1.0, 1.0];
        let inside = DVector::from_vec(vec![0.5, 0.7, 0.2]);
        let proj = project_feasible(&inside, &y, 1.0);
        assert_relative_eq!((proj - &inside).norm(), 0.0, epsilon = 1e-10);
        let outside = DVector::from_vec(vec![2.0, -0.5, 0.9]);
        let proj = project_feasible(&outside, &y, 1.0);
        let fs = DualFeasibleSet { y: y.to_vec(), c: 1.0 };
        assert!(fs.contains(&proj, 1e-8));
    }

    #[test]
    fn two_point_instance_solved_by_projected_gradient() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ds = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let np = NormParam::new(2, 1).unwrap();
        let (alpha, value) =
            solve_dual(&ds, np, 10.0, DualMethod::ProjectedGradient, 1e-9).unwrap();
        assert_relative_eq!(alpha[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(alpha[1], 1.0, epsilon = 1e-6);
        assert_relative_eq!(value, 1.0, epsilon = 1e-8);
        let h = recover_hyperplane(&alpha, &ds, np, 10.0).unwrap();
        assert_relative_eq!(h.omega[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(h.b, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn cellwise_solves_six_point_instance() {
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        let (alpha, value) = solve_dual(&ds, np, 10.0, DualMethod::Cellwise, 1e-9).unwrap();
        assert_relative_eq!(value, 5.6569, epsilon = 1e-2);
        let expected = optimal_alpha();
        for i in 0..6 {
            assert_relative_eq!(alpha[i], expected[i], epsilon = 1e-2);
        }
    }

    #[test]
    fn flipping_labels_preserves_value() {
        let ds = lifted_six_points();
        let flipped = Dataset::new(
            ds.features().clone(),
            ds.labels().iter().map(|y| -y).collect(),
        )
        .unwrap();
        let np = NormParam::new(3, 1).unwrap();
        let (_, v1) = solve_dual(&ds, np, 10.0, DualMethod::Cellwise, 1e-9).unwrap();
        let (_, v2) = solve_dual(&flipped, np, 10.0, DualMethod::Cellwise, 1e-9).unwrap();
        assert_relative_eq!(v1, v2, epsilon = 1e-5);
    }

    #[test]
    fn recovery_matches_reference_hyperplane() {
        let ds = lifted_six_points();
        let np = NormParam::new(3, 1).unwrap();
        let h = recover_hyperplane(&optimal_alpha(), &ds, np, 10.0).unwrap();
        assert_relative_eq!(h.omega[0], -2.0, epsilon = 1e-2);
        assert_relative_eq!(h.omega[1], 0.0, epsilon = 1e-2);
        assert_relative_eq!(h.omega[2], -2.0, epsilon = 1e-2);
        assert_relative_eq!(h.b, 3.0, epsilon = 1e-2);
    }

    #[test]
    fn recovery_requires_interior_support_vector() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ds = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let np = NormParam::new(2, 1).unwrap();
        let boundary = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(
            recover_hyperplane(&boundary, &ds, np, 1.0),
            Err(Error::NoInteriorSupportVector)
        ));
    }

    #[test]
    fn fractional_program_guards_and_substitution() {
        let ds = lifted_six_points();
        let np32 = NormParam::new(3, 2).unwrap();
        let np31 = NormParam::new(3, 1).unwrap();
        let cell = SignCell::trivial(ds.d());
        assert!(build_fractional_dual(&ds, np31, 10.0, &cell).is_err());
        let prog = build_fractional_dual(&ds, np32, 10.0, &cell).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let alpha = DVector::from_fn(6, |_, _| rng.gen_range(0.0..2.0));
            let sums = feature_sums(&alpha, &ds);
            let delta = DVector::from_iterator(
                ds.d(),
                sums.iter().map(|s| s.abs().powf(np32.q())),
            );
            assert_relative_eq!(
                prog.objective(&alpha, &delta),
                dual_objective(&alpha, &ds, np32),
                epsilon = 1e-9
            );
            for j in 0..ds.d() {
                // With delta at its defining value each constraint is within
                // sign tolerance of its boundary for even powers, and
                // feasible in general.
                let cval = prog.constraint(j, &alpha, &delta);
                assert!(cval <= 1e-9, "constraint {j} = {cval}");
            }
        }
    }

    #[test]
    fn concavity_for_even_q() {
        let ds = lifted_six_points();
        let np = NormParam::new(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y = ds.labels().to_vec();
        for _ in 0..200 {
            let a = project_feasible(&DVector::from_fn(6, |_, _| rng.gen_range(0.0..10.0)), &y, 10.0);
            let b = project_feasible(&DVector::from_fn(6, |_, _| rng.gen_range(0.0..10.0)), &y, 10.0);
            let lambda: f64 = rng.gen_range(0.0..1.0);
            let mix = &a * lambda + &b * (1.0 - lambda);
            let lhs = dual_objective(&mix, &ds, np);
            let rhs = lambda * dual_objective(&a, &ds, np)
                + (1.0 - lambda) * dual_objective(&b, &ds, np);
            assert!(lhs >= rhs - 1e-9);
        }
    }
}
