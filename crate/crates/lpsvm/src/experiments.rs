//! Dataset files, stratified cross-validation, parameter grids, and reports
//!
//! Ingests CSV (header row, label last) and LIBSVM-format files, runs a
//! seeded stratified k-fold protocol per (norm, transform, C) combination,
//! and reports
//!
//! ```text
//!   ACC    = (TP + TN) / n * 100,
//!   %NonZ  = 100 * #{j : |omega_j| > 1e-6 max_j |omega_j|} / d,
//! ```
//!
//! together with the mean wall-clock time of the conic solve per fold. The
//! same seed always produces the same fold assignment and a byte-identical
//! report.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{solve, SolveOptions};
use crate::core::{Dataset, NormParam};
use crate::error::{Error, Result};
use crate::feature_maps::{Standardizer, TransformKind, TransformSpec};
use crate::primal::{build_primal, classify, model_from_solution, PrimalModel};

/// Everything a cross-validation run needs besides the dataset.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub norms: Vec<NormParam>,
    pub transforms: Vec<TransformSpec>,
    pub c_grid: Vec<f64>,
    /// Gaussian width grid; consulted by grid search when the transform is
    /// Gaussian-weighted.
    pub sigma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
}

/// The grid {2^k : k = -7..7} used for both C and sigma.
pub fn power_grid() -> Vec<f64> {
    (-7..=7).map(|k| 2.0f64.powi(k)).collect()
}

/// The four norms p in {4/3, 3/2, 2, 3} as (r, s) = (4,1), (3,1), (2,1),
/// (3,2).
pub fn default_norms() -> Vec<NormParam> {
    [(4, 1), (3, 1), (2, 1), (3, 2)]
        .into_iter()
        .map(|(r, s)| NormParam::new(r, s).expect("valid preset"))
        .collect()
}

impl ExperimentConfig {
    pub fn new(norms: Vec<NormParam>, transforms: Vec<TransformSpec>, c_grid: Vec<f64>) -> Self {
        Self {
            norms,
            transforms,
            c_grid,
            sigma_grid: power_grid(),
            folds: 10,
            seed: 0,
            standardize: true,
        }
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.norms.is_empty() || self.transforms.is_empty() || self.c_grid.is_empty() {
            return Err(Error::InvalidConfig("norm, transform, and C grids must be nonempty".into()));
        }
        if self.c_grid.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidConfig("C grid entries must be positive".into()));
        }
        for spec in &self.transforms {
            spec.validate()?;
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", self.folds)));
        }
        let positives = ds.labels().iter().filter(|&&y| y > 0.0).count();
        let minority = positives.min(ds.n() - positives);
        if self.folds > minority {
            return Err(Error::InvalidConfig(format!(
                "{} folds exceed the minority class count {minority}",
                self.folds
            )));
        }
        Ok(())
    }
}

/// Mean metrics for one (norm, transform, C) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub norm: NormParam,
    pub transform: TransformSpec,
    pub c: f64,
    /// Percent correct on the training folds.
    pub acc_train: f64,
    /// Percent correct on the held-out folds.
    pub acc_test: f64,
    /// Mean conic solve time per fold, seconds.
    pub time: f64,
    /// Percent of |omega_j| above 1e-6 * ||omega||_inf.
    pub pct_nonzero: f64,
    /// Folds whose training failed; metrics average over the rest.
    pub failed_folds: usize,
}

fn parse_label(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("bad label {token:?}") })?;
    if value == 1.0 || value == -1.0 {
        Ok(value)
    } else if value == 0.0 {
        Ok(-1.0)
    } else {
        Err(Error::Parse {
            line,
            message: format!("label {value} outside {{-1, 0, 1}}"),
        })
    }
}

/// Reads a CSV file with one header row; the last column is the label, from
/// {-1, 1} or {0, 1} with 0 mapped to -1.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: "need at least one feature column and a label".into(),
            });
        }
        let mut row = Vec::with_capacity(cells.len() - 1);
        for (j, cell) in cells[..cells.len() - 1].iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column {} is not a number: {cell:?}", j + 1),
            })?;
            row.push(value);
        }
        if let Some(first) = features.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} feature columns, got {}", first.len(), row.len()),
                });
            }
        }
        labels.push(parse_label(cells[cells.len() - 1], lineno)?);
        features.push(row);
    }
    dataset_from_rows(features, labels)
}

/// Reads a LIBSVM-format file: lines of `label idx:val ...` with 1-based
/// strictly ascending indices; absent entries are zero.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        labels.push(parse_label(label_tok, lineno)?);
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature index {idx_s:?}"),
            })?;
            let value: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            if idx == last {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("duplicate feature index {idx}"),
                });
            }
            if idx < last {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("feature indices must ascend, {idx} after {last}"),
                });
            }
            last = idx;
            d = d.max(idx);
            row.push((idx - 1, value));
        }
        rows.push(row);
    }
    let features = rows
        .into_iter()
        .map(|sparse| {
            let mut dense = vec![0.0; d];
            for (j, v) in sparse {
                dense[j] = v;
            }
            dense
        })
        .collect();
    dataset_from_rows(features, labels)
}

fn dataset_from_rows(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::InvalidDataset("no data rows".into()));
    }
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Dataset::new(x, labels)
}

/// Assigns each index to a fold, stratified by class: each class is shuffled
/// with the seeded generator and dealt round-robin, so per-fold class counts
/// differ by at most one.
pub fn stratified_folds(labels: &[f64], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    // The deal counter runs across classes so overall fold sizes stay within
    // one of each other as well.
    let mut next = 0usize;
    for class in [1.0, -1.0] {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for &idx in &members {
            assignment[idx] = next % k;
            next += 1;
        }
    }
    assignment
}

fn subset(ds: &Dataset, keep: &[usize]) -> Result<Dataset> {
    let x = DMatrix::from_fn(keep.len(), ds.d(), |i, j| ds.features()[(keep[i], j)]);
    let y = keep.iter().map(|&i| ds.labels()[i]).collect();
    Dataset::new(x, y)
}

/// Trains on `train`, timing only the conic solve.
fn train_timed(
    train: &Dataset,
    np: NormParam,
    c: f64,
    spec: &TransformSpec,
) -> Result<(PrimalModel, f64)> {
    let (prog, layout) = build_primal(train, np, c, spec)?;
    let started = Instant::now();
    let sol = solve(&prog, &SolveOptions::default())?;
    let elapsed = started.elapsed().as_secs_f64();
    let model = model_from_solution(&sol, &layout, np, c, spec)?;
    Ok((model, elapsed))
}

fn accuracy(model: &PrimalModel, ds: &Dataset, scaler: Option<&Standardizer>) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..ds.n() {
        let mut z = ds.row(i);
        if let Some(s) = scaler {
            z = s.apply_point(&z);
        }
        if classify(model, &z)? == ds.labels()[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / ds.n() as f64)
}

fn pct_nonzero(model: &PrimalModel) -> f64 {
    let omega = &model.hyperplane.omega;
    let max = omega.amax();
    if max == 0.0 {
        return 0.0;
    }
    let count = omega.iter().filter(|w| w.abs() > 1e-6 * max).count();
    100.0 * count as f64 / omega.len() as f64
}

/// Runs the k-fold protocol for every (norm, transform, C) combination.
pub fn cross_validate(ds: &Dataset, config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate(ds)?;
    let assignment = stratified_folds(ds.labels(), config.folds, config.seed);
    let mut rows = Vec::new();
    for &np in &config.norms {
        for spec in &config.transforms {
            for &c in &config.c_grid {
                let mut acc_train = 0.0;
                let mut acc_test = 0.0;
                let mut time = 0.0;
                let mut nonzero = 0.0;
                let mut failed = 0usize;
                for fold in 0..config.folds {
                    let train_idx: Vec<usize> =
                        (0..ds.n()).filter(|&i| assignment[i] != fold).collect();
                    let test_idx: Vec<usize> =
                        (0..ds.n()).filter(|&i| assignment[i] == fold).collect();
                    let outcome = (|| -> Result<(f64, f64, f64, f64)> {
                        let mut train = subset(ds, &train_idx)?;
                        let mut test = subset(ds, &test_idx)?;
                        let scaler = if config.standardize {
                            let s = Standardizer::fit(&train);
                            train = s.apply(&train);
                            test = s.apply(&test);
                            Some(s)
                        } else {
                            None
                        };
                        // Both sets are already in model coordinates.
                        let _ = scaler;
                        let (model, secs) = train_timed(&train, np, c, spec)?;
                        Ok((
                            accuracy(&model, &train, None)?,
                            accuracy(&model, &test, None)?,
                            secs,
                            pct_nonzero(&model),
                        ))
                    })();
                    match outcome {
                        Ok((tr, te, secs, nz)) => {
                            acc_train += tr;
                            acc_test += te;
                            time += secs;
                            nonzero += nz;
                        }
                        Err(_) => failed += 1,
                    }
                }
                let good = (config.folds - failed) as f64;
                let scale = if good > 0.0 { good } else { 1.0 };
                rows.push(MetricsRow {
                    norm: np,
                    transform: *spec,
                    c,
                    acc_train: acc_train / scale,
                    acc_test: acc_test / scale,
                    time: time / scale,
                    pct_nonzero: nonzero / scale,
                    failed_folds: failed,
                });
            }
        }
    }
    Ok(rows)
}

/// Picks the (C, sigma) pair with the best mean test accuracy for the first
/// norm and transform in the config; ties go to the smaller C, then the
/// smaller sigma. Sigma is None unless the transform is Gaussian-weighted.
pub fn grid_search(ds: &Dataset, config: &ExperimentConfig) -> Result<(f64, Option<f64>)> {
    config.validate(ds)?;
    let np = config.norms[0];
    let base = config.transforms[0];
    let mut c_grid = config.c_grid.clone();
    c_grid.sort_by(f64::total_cmp);
    let sigmas: Vec<Option<f64>> = if base.kind == TransformKind::GaussianWeighted {
        let mut grid = config.sigma_grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut best: Option<(f64, Option<f64>, f64)> = None;
    for &sigma in &sigmas {
        let spec = match sigma {
            Some(s) => TransformSpec { sigma: s, ..base },
            None => base,
        };
        for &c in &c_grid {
            let sub = ExperimentConfig {
                norms: vec![np],
                transforms: vec![spec],
                c_grid: vec![c],
                ..config.clone()
            };
            let row = cross_validate(ds, &sub)?.remove(0);
            // Strict improvement keeps the earliest (smallest) entry on ties.
            if best.map_or(true, |(_, _, acc)| row.acc_test > acc) {
                best = Some((c, sigma, row.acc_test));
            }
        }
    }
    let (c, sigma, _) = best.expect("nonempty grids");
    Ok((c, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// p = r/(r-s) in lowest terms.
fn p_label(np: NormParam) -> String {
    let num = np.r();
    let den = np.r() - np.s();
    if den == 1 {
        format!("{num}")
    } else {
        format!("{num}/{den}")
    }
}

fn transform_label(spec: &TransformSpec) -> String {
    match spec.kind {
        TransformKind::Identity => "identity".into(),
        TransformKind::Monomial => format!("monomial(eta={})", spec.eta),
        TransformKind::GaussianWeighted => {
            format!("gaussian(eta={}, sigma={})", spec.eta, spec.sigma)
        }
        TransformKind::Quadratic => "quadratic".into(),
    }
}

fn kind_tag(kind: TransformKind) -> &'static str {
    match kind {
        TransformKind::Identity => "identity",
        TransformKind::Monomial => "monomial",
        TransformKind::GaussianWeighted => "gaussian",
        TransformKind::Quadratic => "quadratic",
    }
}

fn kind_from_tag(tag: &str, line: usize) -> Result<TransformKind> {
    match tag {
        "identity" => Ok(TransformKind::Identity),
        "monomial" => Ok(TransformKind::Monomial),
        "gaussian" => Ok(TransformKind::GaussianWeighted),
        "quadratic" => Ok(TransformKind::Quadratic),
        other => Err(Error::Parse {
            line,
            message: format!("unknown transform kind {other:?}"),
        }),
    }
}

/// Renders rows as a rounded markdown table or a full-precision CSV.
pub fn emit_report(rows: &[MetricsRow], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("| p | transform | C | ACC^Tr | ACC^Test | Time | %NonZ |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            for row in rows {
                let mark = if row.failed_folds > 0 {
                    format!(" ({} failed folds)", row.failed_folds)
                } else {
                    String::new()
                };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.2} | {:.2} | {:.4} | {:.2} |{mark}",
                    p_label(row.norm),
                    transform_label(&row.transform),
                    row.c,
                    row.acc_train,
                    row.acc_test,
                    row.time,
                    row.pct_nonzero,
                );
            }
        }
        ReportFormat::Csv => {
            out.push_str("r,s,kind,eta,sigma,tr,c,acc_train,acc_test,time,pct_nonzero,failed_folds\n");
            for row in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    row.norm.r(),
                    row.norm.s(),
                    kind_tag(row.transform.kind),
                    row.transform.eta,
                    row.transform.sigma,
                    row.transform.r,
                    row.c,
                    row.acc_train,
                    row.acc_test,
                    row.time,
                    row.pct_nonzero,
                    row.failed_folds,
                );
            }
        }
    }
    out
}

/// Parses a CSV report back into rows; inverse of `emit_report(_, Csv)`.
pub fn parse_report_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 12 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 12 columns, got {}", cells.len()),
            });
        }
        let field = |j: usize| -> Result<f64> {
            cells[j].parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad number in column {}: {:?}", j + 1, cells[j]),
            })
        };
        let int = |j: usize| -> Result<u32> {
            cells[j].parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad integer in column {}: {:?}", j + 1, cells[j]),
            })
        };
        rows.push(MetricsRow {
            norm: NormParam::new(int(0)?, int(1)?)?,
            transform: TransformSpec {
                kind: kind_from_tag(cells[2], lineno)?,
                eta: int(3)?,
                sigma: field(4)?,
                r: int(5)?,
            },
            c: field(6)?,
            acc_train: field(7)?,
            acc_test: field(8)?,
            time: field(9)?,
            pct_nonzero: field(10)?,
            failed_folds: int(11)? as usize,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::six_point_dataset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("lpsvm-test-{name}-{}", std::process::id()));
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn csv_reads_features_and_labels() {
        let path = write_temp("csv-basic", "a,b,y\n1,2,1\n3,4,-1\n");
        let ds = load_csv(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        assert_eq!(ds.features()[(1, 0)], 3.0);
    }

    #[test]
    fn csv_maps_zero_label_to_minus_one() {
        let path = write_temp("csv-zero", "a,y\n1,0\n2,1\n");
        let ds = load_csv(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn csv_rejects_non_numeric_cell_with_position() {
        let path = write_temp("csv-bad", "a,b,y\n1,2,1\n3,oops,-1\n");
        let err = load_csv(&path).unwrap_err();
        std::fs::remove_file(&path).unwrap();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("column 2"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn libsvm_fills_absent_indices_with_zero() {
        let path = write_temp("libsvm-basic", "+1 1:0.5 3:2\n-1 2:1\n");
        let ds = load_libsvm(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        let expect = [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(ds.features()[(i, j)], expect[i][j]);
            }
        }
    }

    #[test]
    fn libsvm_accepts_empty_feature_list() {
        let path = write_temp("libsvm-empty", "+1 2:1\n-1\n");
        let ds = load_libsvm(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(ds.d(), 2);
        assert!(ds.features().row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn libsvm_rejects_duplicate_index() {
        let path = write_temp("libsvm-dup", "+1 1:1 1:2\n-1 1:1\n");
        let err = load_libsvm(&path).unwrap_err();
        std::fs::remove_file(&path).unwrap();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn folds_partition_and_stratify() {
        let labels: Vec<f64> =
            (0..23).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let k = 4;
        let assignment = stratified_folds(&labels, k, 7);
        assert_eq!(assignment.len(), labels.len());
        for class in [1.0, -1.0] {
            let mut counts = vec![0usize; k];
            for i in 0..labels.len() {
                if labels[i] == class {
                    counts[assignment[i]] += 1;
                }
            }
            let lo = counts.iter().min().unwrap();
            let hi = counts.iter().max().unwrap();
            assert!(hi - lo <= 1, "class {class}: {counts:?}");
        }
        assert_eq!(assignment, stratified_folds(&labels, k, 7));
        assert_ne!(assignment, stratified_folds(&labels, k, 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn folds_are_always_a_stratified_partition(
            bits in proptest::collection::vec(any::<bool>(), 8..60),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let labels: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
            let assignment = stratified_folds(&labels, k, seed);
            prop_assert_eq!(assignment.len(), labels.len());
            prop_assert!(assignment.iter().all(|&f| f < k));
            for class in [1.0, -1.0] {
                let mut counts = vec![0usize; k];
                for i in 0..labels.len() {
                    if labels[i] == class {
                        counts[assignment[i]] += 1;
                    }
                }
                let lo = *counts.iter().min().unwrap();
                let hi = *counts.iter().max().unwrap();
                prop_assert!(hi - lo <= 1);
            }
        }
    }

    fn toy_config() -> ExperimentConfig {
        let np = NormParam::new(3, 1).unwrap();
        let mut config = ExperimentConfig::new(
            vec![np],
            vec![TransformSpec::quadratic(3)],
            vec![10.0],
        );
        config.folds = 2;
        config.standardize = false;
        config
    }

    #[test]
    fn separable_toy_set_fits_every_training_fold_exactly() {
        // Every stratified 3/3 split of the six points stays separable under
        // the quadratic lift, so training accuracy is exact. Models fit on
        // only three points do not classify the held-out half perfectly (no
        // split does), so the test accuracy is only required to be sane.
        let ds = six_point_dataset();
        let rows = cross_validate(&ds, &toy_config()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].failed_folds, 0);
        assert_relative_eq!(rows[0].acc_train, 100.0);
        assert!(rows[0].acc_test > 0.0 && rows[0].acc_test <= 100.0);
        assert!(rows[0].time > 0.0);
        assert!(rows[0].pct_nonzero > 0.0 && rows[0].pct_nonzero <= 100.0);
    }

    #[test]
    fn too_many_folds_are_rejected() {
        let ds = six_point_dataset();
        let mut config = toy_config();
        config.folds = 4; // minority class has 3 samples
        let err = cross_validate(&ds, &config).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn grid_search_single_point_returns_it() {
        let ds = six_point_dataset();
        let config = toy_config();
        let (c, sigma) = grid_search(&ds, &config).unwrap();
        assert_eq!(c, 10.0);
        assert_eq!(sigma, None);
    }

    #[test]
    fn grid_search_breaks_ties_toward_smaller_c() {
        let ds = six_point_dataset();
        let mut config = toy_config();
        // Both C values classify the separable toy set perfectly.
        config.c_grid = vec![16.0, 4.0];
        let (c, _) = grid_search(&ds, &config).unwrap();
        assert_eq!(c, 4.0);
    }

    #[test]
    fn power_grid_matches_the_fifteen_values() {
        let grid = power_grid();
        assert_eq!(grid.len(), 15);
        assert_eq!(grid[0], 2.0f64.powi(-7));
        assert_eq!(grid[14], 128.0);
    }

    #[test]
    fn markdown_report_has_four_metric_columns() {
        let ds = six_point_dataset();
        let rows = cross_validate(&ds, &toy_config()).unwrap();
        let report = emit_report(&rows, ReportFormat::Markdown);
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("ACC^Tr"));
        assert_eq!(lines[2].matches('|').count(), 8);
    }

    #[test]
    fn csv_report_round_trips() {
        let ds = six_point_dataset();
        let rows = cross_validate(&ds, &toy_config()).unwrap();
        let report = emit_report(&rows, ReportFormat::Csv);
        let parsed = parse_report_csv(&report).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn same_seed_gives_identical_reports() {
        let ds = six_point_dataset();
        let config = toy_config();
        let a = cross_validate(&ds, &config).unwrap();
        let b = cross_validate(&ds, &config).unwrap();
        // Fold assignment and metrics agree exactly; only the timing column
        // varies between runs, so compare reports with it masked.
        let strip = |rows: &[MetricsRow]| {
            let masked: Vec<MetricsRow> =
                rows.iter().cloned().map(|mut r| { r.time = 0.0; r }).collect();
            emit_report(&masked, ReportFormat::Csv)
        };
        assert_eq!(strip(&a), strip(&b));
    }
}
