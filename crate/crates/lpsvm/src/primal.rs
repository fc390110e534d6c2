//! The soft-margin lp-SVM primal over (optionally transformed) data,
//!
//! ```text
//!   min  t + C sum_i xi_i
//!   s.t. y_i (omega' phi(x_i) + b) >= 1 - xi_i,
//!        v_j >= omega_j,  v_j >= -omega_j,
//!        t >= sum_j u_j,  u_j^(r-s) >= v_j^r,   xi >= 0,
//! ```
//!
//! so that t dominates ||omega||_p^p with p = r/(r-s); solved through the
//! conic reformulation of the rational-power constraints.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::conic::{solve, ConicProgram, ConicSolution, SolveOptions, SolveStatus};
use crate::core::{Dataset, Hyperplane, NormParam};
use crate::error::{Error, Result};
use crate::feature_maps::{apply_transform, map_point, TransformKind, TransformSpec};

/// Variable indices of the assembled primal program.
#[derive(Debug, Clone)]
pub struct PrimalLayout {
    pub omega: Vec<usize>,
    pub b: usize,
    pub t: usize,
    pub xi: Vec<usize>,
    pub v: Vec<usize>,
    pub u: Vec<usize>,
}

/// A trained primal classifier.
#[derive(Debug, Clone)]
pub struct PrimalModel {
    pub hyperplane: Hyperplane,
    pub slack: DVector<f64>,
    /// 2 / ||omega||_p.
    pub margin_value: f64,
    pub transform: TransformSpec,
    pub norm: NormParam,
    pub c: f64,
    /// ||omega||_p^p + C sum xi at the solution.
    pub objective: f64,
}

/// Assembles the conic program on the transformed data.
pub fn build_primal(
    ds: &Dataset,
    np: NormParam,
    c: f64,
    spec: &TransformSpec,
) -> Result<(ConicProgram, PrimalLayout)> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
    }
    let lifted = apply_transform(ds, spec)?;
    let n = lifted.n();
    let d = lifted.d();
    let mut prog = ConicProgram::new();
    let omega = prog.add_vars(d);
    let b = prog.add_var();
    let t = prog.add_var();
    let xi = prog.add_vars(n);
    let v = prog.add_vars(d);
    let u = prog.add_vars(d);

    prog.set_objective_term(t, 1.0);
    for &x in &xi {
        prog.set_objective_term(x, c);
        prog.set_lower(x, 0.0);
    }
    for i in 0..n {
        let yi = lifted.labels()[i];
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(d + 2);
        for j in 0..d {
            terms.push((omega[j], yi * lifted.features()[(i, j)]));
        }
        terms.push((b, yi));
        terms.push((xi[i], 1.0));
        prog.add_ineq(terms, 1.0);
    }
    for j in 0..d {
        prog.add_ineq(vec![(v[j], 1.0), (omega[j], -1.0)], 0.0);
        prog.add_ineq(vec![(v[j], 1.0), (omega[j], 1.0)], 0.0);
        prog.set_lower(u[j], 0.0);
        prog.power_tower(u[j], v[j], np.r(), np.s())?;
    }
    let mut budget: Vec<(usize, f64)> = vec![(t, 1.0)];
    for &uj in &u {
        budget.push((uj, -1.0));
    }
    prog.add_ineq(budget, 0.0);

    Ok((prog, PrimalLayout { omega, b, t, xi, v, u }))
}

/// Trains the classifier; the dataset is transformed internally by `spec`.
pub fn train_primal(
    ds: &Dataset,
    np: NormParam,
    c: f64,
    spec: &TransformSpec,
    tol: f64,
) -> Result<PrimalModel> {
    let (prog, layout) = build_primal(ds, np, c, spec)?;
    let sol = solve(&prog, &SolveOptions { tol, ..SolveOptions::default() })?;
    model_from_solution(&sol, &layout, np, c, spec)
}

pub(crate) fn model_from_solution(
    sol: &ConicSolution,
    layout: &PrimalLayout,
    np: NormParam,
    c: f64,
    spec: &TransformSpec,
) -> Result<PrimalModel> {
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::IterationLimit => return Err(Error::IterationLimit),
    }
    let omega =
        DVector::from_iterator(layout.omega.len(), layout.omega.iter().map(|&j| sol.x[j]));
    let slack = DVector::from_iterator(
        layout.xi.len(),
        layout.xi.iter().map(|&j| sol.x[j].max(0.0)),
    );
    let p = np.p();
    let norm_p = omega.iter().map(|w| w.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    Ok(PrimalModel {
        hyperplane: Hyperplane { omega, b: sol.x[layout.b] },
        slack,
        margin_value: 2.0 / norm_p,
        transform: *spec,
        norm: np,
        c,
        objective: sol.objective,
    })
}

/// Label of a raw (untransformed) point; exact zero maps to +1.
pub fn classify(model: &PrimalModel, z: &DVector<f64>) -> Result<f64> {
    let phi = map_point(&model.transform, z)?;
    Ok(model.hyperplane.classify(&phi))
}

impl PrimalModel {
    /// Flat key-value document: r, s, C, transform, eta, sigma, omega, b.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "r {}", self.norm.r()).unwrap();
        writeln!(out, "s {}", self.norm.s()).unwrap();
        writeln!(out, "C {}", self.c).unwrap();
        let kind = match self.transform.kind {
            TransformKind::Identity => "identity",
            TransformKind::Monomial => "monomial",
            TransformKind::GaussianWeighted => "gaussian",
            TransformKind::Quadratic => "quadratic",
        };
        writeln!(out, "transform {kind}").unwrap();
        writeln!(out, "eta {}", self.transform.eta).unwrap();
        writeln!(out, "sigma {}", self.transform.sigma).unwrap();
        let coeffs: Vec<String> = self.hyperplane.omega.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "omega {}", coeffs.join(" ")).unwrap();
        writeln!(out, "b {}", self.hyperplane.b).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "expected 'key value'".into(),
            })?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| -> Result<String> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Parse { line: 0, message: format!("missing field {key}") })
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?.parse::<f64>().map_err(|e| Error::Parse {
                line: 0,
                message: format!("field {key}: {e}"),
            })
        };
        let r: u32 = get("r")?.parse().map_err(|e| Error::Parse {
            line: 0,
            message: format!("field r: {e}"),
        })?;
        let s: u32 = get("s")?.parse().map_err(|e| Error::Parse {
            line: 0,
            message: format!("field s: {e}"),
        })?;
        let np = NormParam::new(r, s)?;
        let c = parse_f64("C")?;
        let eta: u32 = get("eta")?.parse().map_err(|e| Error::Parse {
            line: 0,
            message: format!("field eta: {e}"),
        })?;
        let sigma = parse_f64("sigma")?;
        let kind = match get("transform")?.as_str() {
            "identity" => TransformKind::Identity,
            "monomial" => TransformKind::Monomial,
            "gaussian" => TransformKind::GaussianWeighted,
            "quadratic" => TransformKind::Quadratic,
            other => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("unknown transform kind {other}"),
                })
            }
        };
        let transform = TransformSpec { kind, eta, sigma, r };
        let omega: Vec<f64> = get("omega")?
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: 0,
                    message: format!("omega entry: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        let omega = DVector::from_vec(omega);
        let b = parse_f64("b")?;
        let p = np.p();
        let norm_p = omega.iter().map(|w| w.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        Ok(Self {
            hyperplane: Hyperplane { omega, b },
            slack: DVector::zeros(0),
            margin_value: 2.0 / norm_p,
            transform,
            norm: np,
            c,
            objective: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::six_point_dataset;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn quadratic_lift_recovers_separating_ellipse() {
        let ds = six_point_dataset();
        let np = NormParam::new(3, 1).unwrap();
        let model = train_primal(&ds, np, 10.0, &TransformSpec::quadratic(3), 1e-8).unwrap();
        let omega = &model.hyperplane.omega;
        assert_relative_eq!(omega[0], -2.0, epsilon = 1e-4);
        assert_relative_eq!(omega[1], 0.0, epsilon = 1e-4);
        assert_relative_eq!(omega[2], -2.0, epsilon = 1e-4);
        assert_relative_eq!(model.hyperplane.b, 3.0, epsilon = 1e-4);
        for xi in model.slack.iter() {
            assert!(xi.abs() < 1e-5);
        }
        assert_relative_eq!(model.objective, 4.0 * 2f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn printed_program_row_for_fourth_point() {
        // -omega_1 - 2^(1/3) omega_2 - omega_3 - b + xi_4 >= 1.
        let ds = six_point_dataset();
        let np = NormParam::new(3, 1).unwrap();
        let (prog, layout) =
            build_primal(&ds, np, 10.0, &TransformSpec::quadratic(3)).unwrap();
        let row = &prog.ineq_rows()[3];
        assert_eq!(row.rhs, 1.0);
        let coeff = |var: usize| -> f64 {
            row.terms.iter().filter(|(v, _)| *v == var).map(|(_, c)| c).sum()
        };
        assert_relative_eq!(coeff(layout.omega[0]), -1.0);
        assert_relative_eq!(coeff(layout.omega[1]), -(2f64.powf(1.0 / 3.0)));
        assert_relative_eq!(coeff(layout.omega[2]), -1.0);
        assert_relative_eq!(coeff(layout.b), -1.0);
        assert_relative_eq!(coeff(layout.xi[3]), 1.0);
    }

    #[test]
    fn quadratic_norm_uses_one_cone_per_feature() {
        let ds = six_point_dataset();
        let np = NormParam::new(2, 1).unwrap();
        let (prog, _) = build_primal(&ds, np, 1.0, &TransformSpec::identity()).unwrap();
        assert_eq!(prog.cones().len(), ds.d());
    }

    #[test]
    fn degree_three_monomial_lift_matches_reported_solution() {
        let ds = six_point_dataset();
        let np = NormParam::new(3, 1).unwrap();
        let model = train_primal(&ds, np, 10.0, &TransformSpec::monomial(3), 1e-9).unwrap();
        let expected = [
            0.0, 0.1117, 0.1117, -1.3295, 0.4469, -1.3295, 0.1117, -0.6704, -0.6704, 0.1117,
        ];
        for (j, &e) in expected.iter().enumerate() {
            assert_relative_eq!(model.hyperplane.omega[j], e, epsilon = 1.5e-3);
        }
        assert_relative_eq!(model.hyperplane.b, 2.1060, epsilon = 1.5e-3);
    }

    #[test]
    fn one_dimensional_symmetric_pair() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ds = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let np = NormParam::new(2, 1).unwrap();
        let model = train_primal(&ds, np, 10.0, &TransformSpec::identity(), 1e-8).unwrap();
        assert_relative_eq!(model.hyperplane.omega[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(model.hyperplane.b, 0.0, epsilon = 1e-5);
        assert_relative_eq!(model.margin_value, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn classify_all_six_points() {
        let ds = six_point_dataset();
        let np = NormParam::new(3, 1).unwrap();
        let model = train_primal(&ds, np, 10.0, &TransformSpec::quadratic(3), 1e-8).unwrap();
        for i in 0..ds.n() {
            let label = classify(&model, &ds.row(i)).unwrap();
            assert_eq!(label, ds.labels()[i], "point {i}");
        }
    }

    #[test]
    fn objective_is_consistent_and_monotone_in_c() {
        let x = DMatrix::from_row_slice(4, 2, &[
            0.0, 0.3, //
            0.4, -0.1, //
            0.2, 0.2, //
            0.5, 0.1,
        ]);
        let ds = Dataset::new(x, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let np = NormParam::new(3, 1).unwrap();
        let mut prev = 0.0;
        for c in [1.0, 2.0, 4.0, 8.0] {
            let model = train_primal(&ds, np, c, &TransformSpec::identity(), 1e-9).unwrap();
            let p = np.p();
            let direct = model
                .hyperplane
                .omega
                .iter()
                .map(|w| w.abs().powf(p))
                .sum::<f64>()
                + c * model.slack.sum();
            assert_relative_eq!(model.objective, direct, epsilon = 1e-6 * (1.0 + direct));
            assert!(model.objective >= prev - 1e-7, "objective decreased in C");
            prev = model.objective;
        }
    }

    #[test]
    fn serialization_round_trip() {
        let ds = six_point_dataset();
        let np = NormParam::new(3, 1).unwrap();
        let model = train_primal(&ds, np, 10.0, &TransformSpec::quadratic(3), 1e-8).unwrap();
        let text = model.to_text();
        let loaded = PrimalModel::from_text(&text).unwrap();
        assert_eq!(loaded.norm, model.norm);
        assert_eq!(loaded.c, model.c);
        assert_eq!(loaded.transform, model.transform);
        assert_eq!(loaded.hyperplane.omega.as_slice(), model.hyperplane.omega.as_slice());
        assert_eq!(loaded.hyperplane.b, model.hyperplane.b);
    }
}
