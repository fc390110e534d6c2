//! Feature transformations applied before primal training: monomial maps up
//! to degree eta, Gaussian-weighted monomial maps
//!
//! ```text
//!   Phi~[eta]_gamma(z) = exp(-sigma ||z||^2) (2 sigma)^(1/r) z^gamma / (gamma!)^(1/r),
//! ```
//!
//! a quadratic preset for two-dimensional data, and per-column z-score
//! standardization.

use nalgebra::{DMatrix, DVector};

use crate::core::{multi_index_enumerate, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Monomial,
    GaussianWeighted,
    /// (x1, x2) -> (x1^2, 2^(1/r) x1 x2, x2^2); requires d = 2.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Truncation degree (monomial and Gaussian-weighted maps).
    pub eta: u32,
    /// Gaussian width (Gaussian-weighted map only).
    pub sigma: f64,
    /// Root order of the norm (Gaussian-weighted and quadratic maps).
    pub r: u32,
}

impl TransformSpec {
    pub fn identity() -> Self {
        Self { kind: TransformKind::Identity, eta: 1, sigma: 0.0, r: 2 }
    }

    pub fn monomial(eta: u32) -> Self {
        Self { kind: TransformKind::Monomial, eta, sigma: 0.0, r: 2 }
    }

    pub fn gaussian(eta: u32, sigma: f64, r: u32) -> Self {
        Self { kind: TransformKind::GaussianWeighted, eta, sigma, r }
    }

    pub fn quadratic(r: u32) -> Self {
        Self { kind: TransformKind::Quadratic, eta: 2, sigma: 0.0, r }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta < 1 {
            return Err(Error::InvalidConfig("transform degree eta must be >= 1".into()));
        }
        if self.kind == TransformKind::GaussianWeighted && !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig("gaussian transform needs sigma > 0".into()));
        }
        if matches!(self.kind, TransformKind::GaussianWeighted | TransformKind::Quadratic)
            && self.r < 2
        {
            return Err(Error::InvalidConfig("transform root order r must be >= 2".into()));
        }
        Ok(())
    }
}

/// Monomials z^gamma for |gamma| <= eta, graded-lex with the constant first.
pub fn monomial_map(z: &DVector<f64>, eta: u32) -> DVector<f64> {
    let indices = multi_index_enumerate(z.len(), eta, false);
    DVector::from_iterator(indices.len(), indices.iter().map(|gamma| gamma.monomial(z)))
}

/// The Gaussian-weighted monomial map of width sigma and root order r.
pub fn gaussian_weighted_map(z: &DVector<f64>, eta: u32, sigma: f64, r: u32) -> DVector<f64> {
    let indices = multi_index_enumerate(z.len(), eta, false);
    let envelope = (-sigma * z.norm_squared()).exp() * (2.0 * sigma).powf(1.0 / f64::from(r));
    DVector::from_iterator(
        indices.len(),
        indices.iter().map(|gamma| {
            let fact: f64 = gamma.0.iter().map(|&g| factorial(g)).product();
            envelope * gamma.monomial(z) / fact.powf(1.0 / f64::from(r))
        }),
    )
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product::<f64>().max(1.0)
}

/// Series limit of sum_gamma Phi~_gamma(z) Phi~_gamma(z') as eta -> infinity,
/// in the quadratic case r = 2:
/// 2 sigma exp(-sigma(||z||^2 + ||z'||^2)) exp(z . z').
pub fn gaussian_series_limit(z: &DVector<f64>, zp: &DVector<f64>, sigma: f64) -> f64 {
    2.0 * sigma * (-sigma * (z.norm_squared() + zp.norm_squared()) + z.dot(zp)).exp()
}

/// Applies the transform to a single point.
pub fn map_point(spec: &TransformSpec, z: &DVector<f64>) -> Result<DVector<f64>> {
    spec.validate()?;
    match spec.kind {
        TransformKind::Identity => Ok(z.clone()),
        TransformKind::Monomial => Ok(monomial_map(z, spec.eta)),
        TransformKind::GaussianWeighted => {
            Ok(gaussian_weighted_map(z, spec.eta, spec.sigma, spec.r))
        }
        TransformKind::Quadratic => {
            if z.len() != 2 {
                return Err(Error::InvalidConfig(format!(
                    "quadratic preset needs 2 features, got {}",
                    z.len()
                )));
            }
            let root = 2f64.powf(1.0 / f64::from(spec.r));
            Ok(DVector::from_vec(vec![z[0] * z[0], root * z[0] * z[1], z[1] * z[1]]))
        }
    }
}

/// Transforms every observation row, keeping labels.
pub fn apply_transform(ds: &Dataset, spec: &TransformSpec) -> Result<Dataset> {
    if spec.kind == TransformKind::Identity {
        return Ok(ds.clone());
    }
    let rows: Vec<DVector<f64>> =
        (0..ds.n()).map(|i| map_point(spec, &ds.row(i))).collect::<Result<_>>()?;
    let d_new = rows[0].len();
    let mut x = DMatrix::zeros(ds.n(), d_new);
    for (i, row) in rows.iter().enumerate() {
        x.row_mut(i).copy_from(&row.transpose());
    }
    Dataset::new(x, ds.labels().to_vec())
}

/// Per-column affine rescaling to zero mean and unit variance, fitted on
/// training data and reusable on held-out data.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let n = ds.n() as f64;
        let x = ds.features();
        let mean = DVector::from_iterator(ds.d(), (0..ds.d()).map(|j| x.column(j).sum() / n));
        let std = DVector::from_iterator(
            ds.d(),
            (0..ds.d()).map(|j| {
                let var = x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
                // Constant columns pass through unscaled.
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            }),
        );
        Self { mean, std }
    }

    pub fn apply_point(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(z.len(), (0..z.len()).map(|j| (z[j] - self.mean[j]) / self.std[j]))
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut x = ds.features().clone();
        for i in 0..ds.n() {
            for j in 0..ds.d() {
                x[(i, j)] = (x[(i, j)] - self.mean[j]) / self.std[j];
            }
        }
        Dataset::new(x, ds.labels().to_vec()).expect("rescaling keeps the dataset valid")
    }
}
