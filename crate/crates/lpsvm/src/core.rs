//! Shared domain types: datasets, the rational norm pair (r, s), multi-index
//! arithmetic in graded-lexicographic order and separating hyperplanes.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An n x d observation matrix with +/-1 class labels.
///
/// Immutable after construction; both classes must be present.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidDataset("need at least two observations".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        for &label in &y {
            if label != 1.0 && label != -1.0 {
                return Err(Error::InvalidDataset(format!("label {label} not in {{-1, +1}}")));
            }
        }
        if !y.contains(&1.0) || !y.contains(&-1.0) {
            return Err(Error::InvalidDataset("both classes must be present".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }
}

/// The rational pair (r, s) encoding q = r/s and p = r/(r-s).
///
/// Requires gcd(r, s) = 1 and r > s >= 1, so that p, q > 1 and
/// 1/p + 1/q = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormParam {
    r: u32,
    s: u32,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl NormParam {
    pub fn new(r: u32, s: u32) -> Result<Self> {
        if s < 1 || r <= s {
            return Err(Error::InvalidNormParam(format!("need r > s >= 1, got r={r}, s={s}")));
        }
        if gcd(r, s) != 1 {
            return Err(Error::InvalidNormParam(format!("gcd({r}, {s}) != 1")));
        }
        let np = Self { r, s };
        // The dual objective coefficient 1/p^q - 1/p^(q-1) must be negative
        // for every 1 < p < infinity.
        debug_assert!(np.dual_coefficient() < 0.0);
        Ok(np)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    /// q = r/s.
    pub fn q(&self) -> f64 {
        f64::from(self.r) / f64::from(self.s)
    }

    /// p = r/(r-s), the Hoelder conjugate of q.
    pub fn p(&self) -> f64 {
        f64::from(self.r) / f64::from(self.r - self.s)
    }

    /// True when q is an even integer (s = 1, r even).
    pub fn q_is_even_integer(&self) -> bool {
        self.s == 1 && self.r % 2 == 0
    }

    /// True when q is an integer (s = 1).
    pub fn q_is_integer(&self) -> bool {
        self.s == 1
    }

    /// The coefficient 1/p^q - 1/p^(q-1) of the q-norm power in the
    /// Lagrangian dual objective; always negative.
    pub fn dual_coefficient(&self) -> f64 {
        let p = self.p();
        let q = self.q();
        p.powf(-q) - p.powf(-(q - 1.0))
    }
}

impl fmt::Display for NormParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={}/{}", self.r, self.s)
    }
}

/// A multi-index gamma in N^m with the graded-lexicographic total order
/// (constant index first; within a degree, higher leading exponents first).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn unit(m: usize, i: usize) -> Self {
        let mut v = vec![0; m];
        v[i] = 1;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// z^gamma for a point z.
    pub fn monomial(&self, z: &DVector<f64>) -> f64 {
        debug_assert_eq!(self.len(), z.len());
        self.0
            .iter()
            .zip(z.iter())
            .map(|(&g, &zi)| zi.powi(g as i32))
            .product()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // Within a degree the lexicographically larger exponent vector
            // comes first: (2,0) precedes (1,1) precedes (0,2).
            .then_with(|| other.0.cmp(&self.0))
    }
}

/// The multinomial coefficient c_gamma = (|gamma|)! / (gamma_1! ... gamma_m!),
/// in exact integer arithmetic.
pub fn multinomial_coeff(gamma: &MultiIndex) -> Result<u64> {
    let degree = gamma.degree();
    let mut value: u128 = 1;
    let mut consumed: u32 = 0;
    for &g in &gamma.0 {
        // c = prod over parts of binom(consumed + g, g)
        for j in 1..=g {
            consumed += 1;
            value = value
                .checked_mul(u128::from(consumed))
                .ok_or(Error::DegreeOverflow { degree })?
                / u128::from(j);
        }
    }
    u64::try_from(value).map_err(|_| Error::DegreeOverflow { degree })
}

/// All multi-indices in N^m with degree <= degree_cap (or exactly degree_cap
/// when homogeneous), in graded-lexicographic order.
pub fn multi_index_enumerate(m: usize, degree_cap: u32, homogeneous: bool) -> Vec<MultiIndex> {
    assert!(m >= 1, "need at least one variable");
    let mut out = Vec::new();
    let degrees: Vec<u32> = if homogeneous {
        vec![degree_cap]
    } else {
        (0..=degree_cap).collect()
    };
    let mut current = vec![0u32; m];
    for deg in degrees {
        emit_degree(&mut out, &mut current, 0, deg);
    }
    out
}

fn emit_degree(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for g in (0..=remaining).rev() {
        current[pos] = g;
        emit_degree(out, current, pos + 1, remaining - g);
    }
    current[pos] = 0;
}

/// Binomial coefficient, exact in u128 with saturation avoided by the small
/// arguments used throughout this crate.
pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut value: u128 = 1;
    for j in 1..=k {
        value = value * u128::from(n - k + j) / u128::from(j);
    }
    value as u64
}

/// A separating hyperplane omega^t z + b = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub omega: DVector<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn evaluate(&self, z: &DVector<f64>) -> f64 {
        self.omega.dot(z) + self.b
    }

    /// Classification by the sign of the evaluation; exact zero maps to +1.
    pub fn classify(&self, z: &DVector<f64>) -> f64 {
        if self.evaluate(z) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_one_class() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(Dataset::new(x, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(Dataset::new(x, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn norm_param_accessors() {
        let np = NormParam::new(3, 1).unwrap();
        assert_eq!(np.q(), 3.0);
        assert!((np.p() - 1.5).abs() < 1e-15);
        assert!((1.0 / np.p() + 1.0 / np.q() - 1.0).abs() < 1e-15);
        assert!(NormParam::new(2, 2).is_err());
        assert!(NormParam::new(4, 2).is_err());
        assert!(NormParam::new(1, 1).is_err());
    }

    #[test]
    fn dual_coefficient_negative_for_all_small_pairs() {
        for r in 2..=9u32 {
            for s in 1..r {
                if gcd(r, s) == 1 {
                    let np = NormParam::new(r, s).unwrap();
                    assert!(np.dual_coefficient() < 0.0, "{np}");
                }
            }
        }
    }

    #[test]
    fn multinomial_examples() {
        let g = MultiIndex(vec![3, 0, 0, 0, 0, 0]);
        assert_eq!(multinomial_coeff(&g).unwrap(), 1);
        let g = MultiIndex(vec![1, 1, 0, 0]);
        assert_eq!(multinomial_coeff(&g).unwrap(), 2);
        let g = MultiIndex(vec![1, 1, 1, 0]);
        assert_eq!(multinomial_coeff(&g).unwrap(), 6);
    }

    #[test]
    fn multinomial_counts_orderings() {
        // Brute-force oracle: number of distinct arrangements of the multiset
        // {i repeated gamma_i times}, counted by enumerating permutations.
        fn arrangements(gamma: &[u32]) -> u64 {
            let mut word = Vec::new();
            for (i, &g) in gamma.iter().enumerate() {
                for _ in 0..g {
                    word.push(i);
                }
            }
            if word.is_empty() {
                return 1;
            }
            let mut perms = std::collections::BTreeSet::new();
            permute(&mut word, 0, &mut perms);
            perms.len() as u64
        }
        fn permute(word: &mut Vec<usize>, k: usize, out: &mut std::collections::BTreeSet<Vec<usize>>) {
            if k == word.len() {
                out.insert(word.clone());
                return;
            }
            for i in k..word.len() {
                word.swap(k, i);
                permute(word, k + 1, out);
                word.swap(k, i);
            }
        }
        let cases: Vec<Vec<u32>> = vec![
            vec![2, 1],
            vec![2, 2],
            vec![1, 1, 1],
            vec![3, 2],
            vec![2, 2, 2],
            vec![4, 1, 1],
            vec![0, 0, 3],
        ];
        for gamma in cases {
            let mi = MultiIndex(gamma.clone());
            assert!(mi.degree() <= 6);
            assert_eq!(multinomial_coeff(&mi).unwrap(), arrangements(&gamma), "{gamma:?}");
        }
    }

    #[test]
    fn multinomial_overflow_rejected() {
        let g = MultiIndex(vec![40; 64]);
        assert!(matches!(multinomial_coeff(&g), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn enumeration_sizes_match_paper_counts() {
        assert_eq!(multi_index_enumerate(6, 2, false).len(), 28);
        assert_eq!(multi_index_enumerate(6, 4, false).len(), 210);
        assert_eq!(multi_index_enumerate(2, 3, false).len(), 10);
    }

    #[test]
    fn enumeration_size_matches_pascal_oracle() {
        // C(m+t, m) by the Pascal recursion, independent of binomial().
        fn pascal(m: u64, t: u64) -> u64 {
            if m == 0 || t == 0 {
                1
            } else {
                pascal(m - 1, t) + pascal(m, t - 1)
            }
        }
        for m in 1..=8usize {
            for t in 0..=8u32 {
                let inhom = multi_index_enumerate(m, t, false);
                assert_eq!(inhom.len() as u64, pascal(m as u64, u64::from(t)));
                let hom = multi_index_enumerate(m, t, true);
                assert_eq!(hom.len() as u64, binomial(m as u64 + u64::from(t) - 1, u64::from(t)));
            }
        }
    }

    #[test]
    fn enumeration_is_graded_lex_sorted() {
        let seq = multi_index_enumerate(3, 4, false);
        for pair in seq.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        // Constant index first.
        assert_eq!(seq[0], MultiIndex::zero(3));
    }

    #[test]
    fn graded_lex_order_for_two_variables() {
        let seq = multi_index_enumerate(2, 3, false);
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
            vec![3, 0],
            vec![2, 1],
            vec![1, 2],
            vec![0, 3],
        ];
        let got: Vec<Vec<u32>> = seq.into_iter().map(|g| g.0).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn classify_tie_rule() {
        let h = Hyperplane { omega: DVector::from_vec(vec![1.0]), b: 0.0 };
        assert_eq!(h.classify(&DVector::from_vec(vec![0.0])), 1.0);
        assert_eq!(h.classify(&DVector::from_vec(vec![-0.5])), -1.0);
    }
}
