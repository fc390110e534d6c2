//! Linear programs with second-order cone constraints, and the rational-power
//! tower that reduces u^(r-s) >= v^r (u, v >= 0) to rotated cones.
//!
//! Programs are built incrementally: variables are appended, then linear rows
//! and cone blocks reference them by index. A rotated block (u, v, z) means
//!
//! ```text
//!   u v >= ||z||^2,   u >= 0,  v >= 0,
//! ```
//!
//! and a standard block (head, tail) means head >= ||tail||_2.

mod solver;

pub use solver::{solve, ConicSolution, IterateStats, SolveOptions, SolveStatus};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// An affine row: sum of terms compared against rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A cone membership constraint over existing variables.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock {
    /// head >= ||tail||_2.
    Soc { head: usize, tail: Vec<usize> },
    /// u v >= ||z||^2 with u, v >= 0.
    Rotated { u: usize, v: usize, z: Vec<usize> },
}

/// A minimization problem: linear objective, affine equalities and
/// inequalities (>=), variable bounds, cone blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    nvar: usize,
    objective: Vec<(usize, f64)>,
    eq_rows: Vec<LinearRow>,
    ineq_rows: Vec<LinearRow>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    cones: Vec<ConeBlock>,
    one_var: Option<usize>,
    pair_cache: HashMap<(usize, usize), usize>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.nvar += 1;
        self.lower.push(None);
        self.upper.push(None);
        self.nvar - 1
    }

    pub fn add_vars(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.add_var()).collect()
    }

    pub fn nvar(&self) -> usize {
        self.nvar
    }

    pub fn set_objective_term(&mut self, var: usize, coeff: f64) {
        self.objective.push((var, coeff));
    }

    /// sum terms = rhs.
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push(LinearRow { terms, rhs });
    }

    /// sum terms >= rhs.
    pub fn add_ineq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.ineq_rows.push(LinearRow { terms, rhs });
    }

    pub fn set_lower(&mut self, var: usize, bound: f64) {
        self.lower[var] = Some(bound);
    }

    pub fn set_upper(&mut self, var: usize, bound: f64) {
        self.upper[var] = Some(bound);
    }

    pub fn add_cone(&mut self, cone: ConeBlock) {
        self.cones.push(cone);
    }

    pub fn eq_rows(&self) -> &[LinearRow] {
        &self.eq_rows
    }

    pub fn ineq_rows(&self) -> &[LinearRow] {
        &self.ineq_rows
    }

    pub fn cones(&self) -> &[ConeBlock] {
        &self.cones
    }

    pub fn lower(&self) -> &[Option<f64>] {
        &self.lower
    }

    pub fn upper(&self) -> &[Option<f64>] {
        &self.upper
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    /// A variable pinned to the constant 1, created lazily and shared.
    pub fn constant_one(&mut self) -> usize {
        if let Some(v) = self.one_var {
            return v;
        }
        let v = self.add_var();
        self.add_eq(vec![(v, 1.0)], 1.0);
        self.one_var = Some(v);
        v
    }

    /// Encodes v^r <= u^(r-s) (with u, v >= 0 supplied by the caller) through
    /// a balanced tree of rotated cones.
    ///
    /// v is bounded by the geometric mean of 2^L factors (L minimal with
    /// 2^L >= r): u repeated r-s times, the constant 1 repeated s times, and
    /// v itself repeated 2^L - r times, since
    ///
    /// ```text
    ///   v <= (u^(r-s) 1^s v^(2^L - r))^(1/2^L)   <=>   v^r <= u^(r-s).
    /// ```
    ///
    /// Pairwise geometric means become rotated cones a b >= w^2; a pair of
    /// identical factors collapses without a cone, and repeated pairs share
    /// one auxiliary variable, so the cone count is O(log r).
    pub fn power_tower(&mut self, u: usize, v: usize, r: u32, s: u32) -> Result<()> {
        if r > 64 {
            return Err(Error::InvalidProgram(format!("power tower depth guard: r = {r} > 64")));
        }
        if s < 1 || r <= s {
            return Err(Error::InvalidProgram(format!("power tower needs r > s >= 1, got ({r}, {s})")));
        }
        let one = self.constant_one();
        let width = r.next_power_of_two() as usize;
        let mut level: Vec<usize> = Vec::with_capacity(width);
        level.extend(std::iter::repeat(u).take((r - s) as usize));
        level.extend(std::iter::repeat(one).take(s as usize));
        level.extend(std::iter::repeat(v).take(width - r as usize));
        level.sort_unstable();
        while level.len() > 2 {
            let mut next = Vec::with_capacity(level.len() / 2);
            for pair in level.chunks(2) {
                next.push(self.geometric_mean_node(pair[0], pair[1]));
            }
            next.sort_unstable();
            level = next;
        }
        self.add_cone(ConeBlock::Rotated { u: level[0], v: level[1], z: vec![v] });
        Ok(())
    }

    /// A variable w with a b >= w^2; gm(a, a) is a itself, and each unordered
    /// pair is materialized once.
    fn geometric_mean_node(&mut self, a: usize, b: usize) -> usize {
        if a == b {
            return a;
        }
        let key = (a.min(b), a.max(b));
        if let Some(&w) = self.pair_cache.get(&key) {
            return w;
        }
        let w = self.add_var();
        self.add_cone(ConeBlock::Rotated { u: key.0, v: key.1, z: vec![w] });
        self.pair_cache.insert(key, w);
        w
    }

    pub fn validate(&self) -> Result<()> {
        let check = |var: usize| -> Result<()> {
            if var >= self.nvar {
                Err(Error::InvalidProgram(format!("variable index {var} out of range (nvar = {})", self.nvar)))
            } else {
                Ok(())
            }
        };
        for (var, coeff) in &self.objective {
            check(*var)?;
            if !coeff.is_finite() {
                return Err(Error::InvalidProgram("non-finite objective coefficient".into()));
            }
        }
        for row in self.eq_rows.iter().chain(&self.ineq_rows) {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidProgram("non-finite right-hand side".into()));
            }
            for (var, coeff) in &row.terms {
                check(*var)?;
                if !coeff.is_finite() {
                    return Err(Error::InvalidProgram("non-finite row coefficient".into()));
                }
            }
        }
        let mut soc_heads = std::collections::HashSet::new();
        for cone in &self.cones {
            match cone {
                ConeBlock::Soc { head, tail } => {
                    check(*head)?;
                    if tail.is_empty() {
                        return Err(Error::InvalidProgram("empty second-order cone tail".into()));
                    }
                    for &t in tail {
                        check(t)?;
                    }
                    if !soc_heads.insert(*head) {
                        return Err(Error::InvalidProgram(format!(
                            "variable {head} heads more than one standard cone"
                        )));
                    }
                }
                ConeBlock::Rotated { u, v, z } => {
                    check(*u)?;
                    check(*v)?;
                    if z.is_empty() {
                        return Err(Error::InvalidProgram("empty rotated cone".into()));
                    }
                    for &t in z {
                        check(t)?;
                    }
                }
            }
        }
        Ok(())
    }
}
