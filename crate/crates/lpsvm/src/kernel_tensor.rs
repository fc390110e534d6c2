//! r-order kernels and their induced symmetric tensors.
//!
//! A transformation Phi with sign vector s over one cell induces the kernel
//!
//! ```text
//!   K_{gamma,lambda}(z) = sum_j s_j^r Phi_j(x)^gamma Phi_j(z)^lambda,
//!   |gamma| + lambda = r,
//! ```
//!
//! whose slice at a fixed z-hat packs into an r-order (n+1)-dimensional
//! symmetric tensor: the entry at (i_1..i_r) evaluates the kernel at the
//! multi-index counting how often each data row appears, with lambda counting
//! the occurrences of the extra z-hat index. Conversely, a rank-one
//! decomposition sum_j psi_j v_j^(x r) with admissible eigenvalues recovers a
//! transformation Phi_j(x_i) = psi_j^(1/r) v_{ji}, extending Mercer's
//! positive-semidefiniteness condition from r = 2 to higher orders.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::core::MultiIndex;
use crate::error::{Error, Result};

/// An order-r tensor over indices 0..dim with full permutation symmetry;
/// every entry is stored once under its sorted index.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: u32,
    dim: usize,
    values: BTreeMap<Vec<usize>, f64>,
}

impl SymmetricTensor {
    pub fn new(order: u32, dim: usize) -> Self {
        assert!(order >= 1 && dim >= 1);
        Self { order, dim, values: BTreeMap::new() }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn key(&self, indices: &[usize]) -> Vec<usize> {
        assert_eq!(indices.len(), self.order as usize, "index arity must match the order");
        assert!(indices.iter().all(|&i| i < self.dim), "index out of range");
        let mut key = indices.to_vec();
        key.sort_unstable();
        key
    }

    pub fn get(&self, indices: &[usize]) -> f64 {
        self.values.get(&self.key(indices)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, indices: &[usize], value: f64) {
        let key = self.key(indices);
        self.values.insert(key, value);
    }

    /// All sorted index tuples of the tensor together with the number of
    /// distinct permutations each one represents.
    pub fn sorted_indices(&self) -> Vec<(Vec<usize>, u64)> {
        let mut out = Vec::new();
        let mut current = vec![0usize; self.order as usize];
        loop {
            out.push((current.clone(), permutation_count(&current)));
            // Advance to the next nondecreasing tuple.
            let mut pos = self.order as usize;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if current[pos] + 1 < self.dim {
                    let next = current[pos] + 1;
                    for slot in current.iter_mut().skip(pos) {
                        *slot = next;
                    }
                    break;
                }
            }
        }
    }

    /// Frobenius norm over all dim^order entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.sorted_indices()
            .iter()
            .map(|(idx, mult)| {
                let v = self.get(idx);
                *mult as f64 * v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Header line "order dim", then one "i1 ... ir value" line per stored
    /// sorted index.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.order, self.dim);
        for (idx, value) in &self.values {
            for i in idx {
                out.push_str(&format!("{i} "));
            }
            out.push_str(&format!("{value}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty tensor text".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse { line: 1, message: "header must be 'order dim'".into() });
        }
        let order: u32 = parts[0]
            .parse()
            .map_err(|_| Error::Parse { line: 1, message: "bad order".into() })?;
        let dim: usize =
            parts[1].parse().map_err(|_| Error::Parse { line: 1, message: "bad dim".into() })?;
        let mut tensor = SymmetricTensor::new(order, dim);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != order as usize + 1 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} indices and a value", order),
                });
            }
            let mut idx = Vec::with_capacity(order as usize);
            for f in &fields[..order as usize] {
                idx.push(f.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: "bad index".into(),
                })?);
            }
            let value: f64 = fields[order as usize].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: "bad value".into(),
            })?;
            tensor.set(&idx, value);
        }
        Ok(tensor)
    }
}

/// Number of distinct permutations of a sorted index tuple: the multinomial
/// r! / prod(run lengths!), accumulated as a product of binomials.
fn permutation_count(sorted: &[usize]) -> u64 {
    let mut result: u64 = 1;
    let mut remaining = sorted.len() as u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let run = (j - i) as u64;
        result *= crate::core::binomial(remaining, run);
        remaining -= run;
        i = j;
    }
    result
}

/// K_{gamma,lambda}(z) = sum_j s_j^r Phi_j(x)^gamma Phi_j(z)^lambda where
/// Phi_j(x)^gamma = prod_i phi[(i,j)]^{gamma_i}.
pub fn kernel_value(
    phi: &DMatrix<f64>,
    phi_z: &DVector<f64>,
    signs: &[i8],
    gamma: &MultiIndex,
    lambda: u32,
    r: u32,
) -> Result<f64> {
    if gamma.degree() + lambda != r {
        return Err(Error::DegreeMismatch { got: gamma.degree() + lambda, expected: r });
    }
    assert_eq!(gamma.len(), phi.nrows(), "gamma must index the data rows");
    assert_eq!(signs.len(), phi.ncols(), "one sign per feature");
    assert_eq!(phi_z.len(), phi.ncols(), "z image must match the feature count");
    let mut value = 0.0;
    for j in 0..phi.ncols() {
        let sign_pow = if r % 2 == 0 { 1.0 } else { f64::from(i32::from(signs[j])) };
        let mut prod = sign_pow * phi_z[j].powi(lambda as i32);
        for i in 0..phi.nrows() {
            prod *= phi[(i, j)].powi(gamma.0[i] as i32);
        }
        value += prod;
    }
    Ok(value)
}

/// Packs a kernel slice at fixed z-hat into an order-r tensor of dimension
/// n+1: the index counts become gamma, with lambda the multiplicity of the
/// extra index n.
pub fn tensor_from_kernel<F>(slice: F, n: usize, r: u32) -> SymmetricTensor
where
    F: Fn(&MultiIndex, u32) -> f64,
{
    let mut tensor = SymmetricTensor::new(r, n + 1);
    for (idx, _) in tensor.sorted_indices() {
        let mut gamma = MultiIndex::zero(n);
        let mut lambda = 0u32;
        for &i in &idx {
            if i == n {
                lambda += 1;
            } else {
                gamma.0[i] += 1;
            }
        }
        tensor.set(&idx, slice(&gamma, lambda));
    }
    tensor
}

/// Approximate rank-one decomposition sum_j psi_j v_j^(x r).
#[derive(Debug, Clone)]
pub struct RankOneDecomposition {
    pub d_hat: usize,
    pub psi: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub residual: f64,
    /// Frobenius residual after each accepted term (nonincreasing).
    pub residual_history: Vec<f64>,
}

impl RankOneDecomposition {
    pub fn reconstruct_entry(&self, indices: &[usize]) -> f64 {
        self.psi
            .iter()
            .zip(&self.vectors)
            .map(|(&psi, v)| psi * indices.iter().map(|&i| v[i]).product::<f64>())
            .sum()
    }
}

/// Dense working copy indexed by sorted tuples; operations loop over all
/// dim^order entries, which stays cheap at desk scale.
struct DenseView {
    order: usize,
    dim: usize,
    entries: Vec<((Vec<usize>, u64), f64)>,
}

impl DenseView {
    fn from_tensor(t: &SymmetricTensor) -> Self {
        let entries =
            t.sorted_indices().into_iter().map(|pair| (pair.clone(), t.get(&pair.0))).collect();
        Self { order: t.order() as usize, dim: t.dim(), entries }
    }

    fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|((_, mult), v)| *mult as f64 * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// T(., v, ..., v): contracts all but the first slot. Each stored entry
    /// stands for `mult` dense positions; those with head index h number
    /// mult * count(h) / order and share the same tail product.
    fn contract(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for ((idx, mult), value) in &self.entries {
            if *value == 0.0 {
                continue;
            }
            let mut seen: Vec<usize> = Vec::new();
            for (pos, &head) in idx.iter().enumerate() {
                if seen.contains(&head) {
                    continue;
                }
                seen.push(head);
                let count_head = idx.iter().filter(|&&i| i == head).count() as u64;
                let perms_with_head = mult * count_head / self.order as u64;
                let mut tail_prod = 1.0;
                for (l, &i) in idx.iter().enumerate() {
                    if l != pos {
                        tail_prod *= v[i];
                    }
                }
                out[head] += value * perms_with_head as f64 * tail_prod;
            }
        }
        out
    }

    fn apply_rank_one(&mut self, psi: f64, v: &DVector<f64>) {
        for ((idx, _), value) in &mut self.entries {
            let prod: f64 = idx.iter().map(|&i| v[i]).product();
            *value -= psi * prod;
        }
    }

    fn eval(&self, v: &DVector<f64>) -> f64 {
        self.entries
            .iter()
            .map(|((idx, mult), value)| {
                *mult as f64 * value * idx.iter().map(|&i| v[i]).product::<f64>()
            })
            .sum()
    }
}

/// Shifted symmetric power iteration on `target` from a starting vector;
/// returns the unit vector and its Rayleigh value target(v^r).
fn power_fit(target: &DenseView, start: &DVector<f64>, direction: f64) -> (DVector<f64>, f64) {
    let shift = 1.0 + target.frobenius();
    let mut v = start.clone();
    if v.norm() == 0.0 {
        v[0] = 1.0;
    }
    v /= v.norm();
    for _ in 0..500 {
        let mut w = target.contract(&v) * direction + &v * shift;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        w /= norm;
        let delta = (&w - &v).norm();
        v = w;
        if delta < 1e-12 {
            break;
        }
    }
    let lambda = target.eval(&v);
    (v, lambda)
}

/// Sequential symmetric rank-one fitting: shifted power iterations with
/// random restarts, deflating each accepted term and jointly refining all
/// terms after each acceptance.
pub fn als_decompose(
    tensor: &SymmetricTensor,
    d_max: usize,
    restarts: usize,
    tol: f64,
    seed: u64,
) -> RankOneDecomposition {
    let unconstrained = als_fit(tensor, d_max, restarts, tol, seed, false);
    if tensor.order() % 2 == 0 && unconstrained.psi.iter().any(|&p| p < 0.0) {
        // An even-order tensor wants nonnegative eigenvalues; retry with the
        // sign restriction and keep the restricted fit unless it is much
        // worse, so genuinely indefinite tensors still surface negatives.
        let restricted = als_fit(tensor, d_max, restarts, tol, seed, true);
        if restricted.residual <= tol.max(0.01 * tensor.frobenius_norm()) {
            return restricted;
        }
    }
    unconstrained
}

fn als_fit(
    tensor: &SymmetricTensor,
    d_max: usize,
    restarts: usize,
    tol: f64,
    seed: u64,
    nonneg: bool,
) -> RankOneDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = DenseView::from_tensor(tensor);
    let mut psi: Vec<f64> = Vec::new();
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    let mut history = Vec::new();
    let dim = tensor.dim();

    // Residual of the base tensor with every term subtracted except the
    // skipped one.
    let residual_view = |psi: &[f64], vectors: &[DVector<f64>], skip: Option<usize>| {
        let mut view = DenseView {
            order: base.order,
            dim: base.dim,
            entries: base.entries.clone(),
        };
        for (j, (&p, v)) in psi.iter().zip(vectors).enumerate() {
            if Some(j) != skip {
                view.apply_rank_one(p, v);
            }
        }
        view
    };

    let mut residual = base.frobenius();

    while psi.len() < d_max && residual > tol {
        let current = residual_view(&psi, &vectors, None);
        let mut best: Option<(f64, DVector<f64>)> = None;
        let directions: &[f64] = if nonneg { &[1.0] } else { &[1.0, -1.0] };
        for _ in 0..restarts.max(1) {
            for &direction in directions {
                let start = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
                let (v, lambda) = power_fit(&current, &start, direction);
                if nonneg && lambda <= 0.0 {
                    continue;
                }
                // v is unit, so subtracting lambda v^(x r) drops the squared
                // Frobenius residual by exactly lambda^2: bigger |lambda| wins.
                let better = match &best {
                    Some((incumbent, _)) => lambda.abs() > incumbent.abs() + 1e-15,
                    None => true,
                };
                if better {
                    best = Some((lambda, v));
                }
            }
        }
        let Some((lambda, v)) = best else { break };
        if lambda.abs() < 1e-14 {
            break;
        }
        psi.push(lambda);
        vectors.push(v);

        // Joint refinement: cyclically re-fit each term against the residual
        // of the others, accepting only improvements.
        let mut current_res = residual_view(&psi, &vectors, None).frobenius();
        for _ in 0..100 {
            let mut improved = false;
            for j in 0..psi.len() {
                let others = residual_view(&psi, &vectors, Some(j));
                let mut candidate: Option<(f64, DVector<f64>, f64)> = None;
                let refit_dirs: &[f64] =
                    if nonneg { &[1.0] } else { &[1.0, -1.0] };
                for &direction in refit_dirs {
                    let (v, lambda) = power_fit(&others, &vectors[j], direction);
                    if nonneg && lambda <= 0.0 {
                        continue;
                    }
                    let others_sq = others.frobenius().powi(2);
                    let res = (others_sq - lambda * lambda).max(0.0).sqrt();
                    let better = match &candidate {
                        Some((_, _, incumbent)) => res < *incumbent - 1e-15,
                        None => true,
                    };
                    if better {
                        candidate = Some((lambda, v, res));
                    }
                }
                if let Some((lambda, v, res)) = candidate {
                    if res < current_res - 1e-14 {
                        psi[j] = lambda;
                        vectors[j] = v;
                        current_res = res;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }

        let new_residual = residual_view(&psi, &vectors, None).frobenius();
        if new_residual > residual - 1e-15 {
            // No progress; drop the new term and stop.
            psi.pop();
            vectors.pop();
            break;
        }
        residual = new_residual;
        history.push(residual);
    }

    RankOneDecomposition { d_hat: psi.len(), psi, vectors, residual, residual_history: history }
}

/// Sample data for the odd-r admissibility check on one cell: the sign of
/// each eigenvalue must match the sign of sum_i alpha_i y_i Phi_j(x_i) at
/// every sampled alpha.
#[derive(Debug, Clone)]
pub struct OddSignCheck {
    pub cell: usize,
    pub y: Vec<f64>,
    pub samples: Vec<DVector<f64>>,
}

/// Builds the transformed rows Phi_j = psi_j^(1/r) v_j (one column per kept
/// eigenvalue, one row per tensor index including the z-hat row). Even r
/// needs nonnegative eigenvalues; odd r needs the sampled sign condition.
pub fn transform_from_decomposition(
    dec: &RankOneDecomposition,
    r: u32,
    odd: Option<&OddSignCheck>,
) -> Result<DMatrix<f64>> {
    let dim = dec.vectors.first().map_or(0, |v| v.len());
    let scale = dec.psi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let tol = 1e-8 * (1.0 + scale);
    let mut phi = DMatrix::zeros(dim, dec.d_hat);
    if r % 2 == 0 {
        for (j, (&psi, v)) in dec.psi.iter().zip(&dec.vectors).enumerate() {
            if psi < -tol {
                return Err(Error::NegativeEigenvalue { value: psi });
            }
            let root = psi.max(0.0).powf(1.0 / f64::from(r));
            for i in 0..dim {
                phi[(i, j)] = root * v[i];
            }
        }
        return Ok(phi);
    }
    let check = odd.ok_or_else(|| {
        Error::InvalidConfig("odd order needs cell sign data for the admissibility check".into())
    })?;
    let n = check.y.len();
    if n + 1 != dim {
        return Err(Error::InvalidConfig(format!(
            "sign data has {n} labels but the tensor dimension is {dim}"
        )));
    }
    for (j, (&psi, v)) in dec.psi.iter().zip(&dec.vectors).enumerate() {
        let root = psi.abs().powf(1.0 / f64::from(r));
        for i in 0..dim {
            phi[(i, j)] = root * v[i];
        }
        for alpha in &check.samples {
            let s: f64 = (0..n).map(|i| alpha[i] * check.y[i] * phi[(i, j)]).sum();
            // A vanishing factor cannot flip the kernel value.
            if s.abs() > tol && s.signum() != psi.signum() {
                return Err(Error::ConditionViolated { cell: check.cell, component: j });
            }
        }
    }
    Ok(phi)
}

/// The Cauchy-shaped tensor 1/(||x_{i_1}||^e + ... + ||x_{i_r}||^e) over the
/// given rows (the z-hat row included); r must be even.
pub fn cauchy_tensor(rows: &DMatrix<f64>, r: u32, exponent: f64) -> Result<SymmetricTensor> {
    if r % 2 != 0 {
        return Err(Error::InvalidConfig("the Cauchy tensor construction needs even r".into()));
    }
    let norms: Vec<f64> = (0..rows.nrows()).map(|i| rows.row(i).norm()).collect();
    for (i, &norm) in norms.iter().enumerate() {
        if !(norm > 0.0) {
            return Err(Error::ZeroRow { row: i });
        }
    }
    let mut tensor = SymmetricTensor::new(r, rows.nrows());
    for (idx, _) in tensor.sorted_indices() {
        let denom: f64 = idx.iter().map(|&i| norms[i].powf(exponent)).sum();
        tensor.set(&idx, 1.0 / denom);
    }
    Ok(tensor)
}
