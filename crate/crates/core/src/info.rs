//! Probability objects over finite alphabets and the information measures
//! built on them. All logarithms are natural, so every quantity is in nats.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;
const JOINT_TOL: f64 = 1e-9;

/// Masses below this are treated as exact zeros in `x log x` sums.
pub const NEGLIGIBLE_MASS: f64 = 1e-300;

/// `x ln y` with `0 ln y = 0`.
#[inline]
pub(crate) fn xlogy(x: f64, y: f64) -> f64 {
    if x < NEGLIGIBLE_MASS {
        0.0
    } else {
        x * y.ln()
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is not a nonnegative real"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is not a nonnegative real"
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution(
                "weights have zero total mass".into(),
            ));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution over an empty alphabet");
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    /// Expected value of `values` under this distribution.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Row-stochastic matrix `s[i][j] = W(y_j | x_i)` of a discrete memoryless channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: Array2<f64>,
}

impl TransitionMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (m, n) = entries.dim();
        if m == 0 || n == 0 {
            return Err(Error::InvalidTransition("empty matrix".into()));
        }
        for (i, row) in entries.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidTransition(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.sum();
            if (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidTransition(format!("row {i} sums to {total}")));
            }
        }
        Ok(Self {
            entries: entries.as_standard_layout().into_owned(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows).map_err(Error::InvalidTransition)?)
    }

    pub fn inputs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        row_slice(&self.entries, i)
    }

    /// Output law `q_j = sum_i s_ij p_i`.
    pub fn output_distribution(&self, p: &ProbabilityVector) -> Vec<f64> {
        assert_eq!(p.len(), self.inputs(), "input distribution length");
        let mut q = vec![0.0; self.outputs()];
        for (i, &pi) in p.as_slice().iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (qj, &sij) in q.iter_mut().zip(self.row(i)) {
                *qj += pi * sij;
            }
        }
        q
    }
}

/// Decoding metric `d[i][j] = -ln q(x_i, y_j)`, entrywise finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    entries: Array2<f64>,
}

impl MetricMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMetric(
                "entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            entries: entries.as_standard_layout().into_owned(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows).map_err(Error::InvalidMetric)?)
    }

    /// The matched metric `d = -ln s`. Fails on zero transition probabilities.
    pub fn matched(s: &TransitionMatrix) -> Result<Self> {
        if s.entries.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidMetric(
                "matched metric needs strictly positive transition probabilities".into(),
            ));
        }
        Self::new(s.entries.mapv(|v| -v.ln()))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        row_slice(&self.entries, i)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }

    /// `sum_ij d_ij s_ij p_i`, the metric expectation under the true joint law.
    pub fn expected_under(&self, p: &ProbabilityVector, s: &TransitionMatrix) -> f64 {
        assert_eq!(self.entries.dim(), s.entries.dim());
        p.as_slice()
            .iter()
            .enumerate()
            .map(|(i, &pi)| {
                let inner: f64 = self.row(i).iter().zip(s.row(i)).map(|(d, s)| d * s).sum();
                pi * inner
            })
            .sum()
    }
}

/// A joint law over the product alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    entries: Array2<f64>,
}

impl JointDistribution {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidJoint(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total = entries.sum();
        if (total - 1.0).abs() > JOINT_TOL {
            return Err(Error::InvalidJoint(format!("total mass {total}")));
        }
        Ok(Self { entries })
    }

    /// Divides nonnegative weights by their total.
    pub fn normalized(mut entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidJoint(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total = entries.sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidJoint(format!("total mass {total}")));
        }
        entries.mapv_inplace(|v| v / total);
        Ok(Self { entries })
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn row_marginal(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(1))
    }

    pub fn column_marginal(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(0))
    }

    /// Mutual information between the two coordinates of this joint law.
    pub fn mutual_information(&self) -> f64 {
        let rows = self.row_marginal();
        let cols = self.column_marginal();
        let mut total = 0.0;
        for ((i, j), &g) in self.entries.indexed_iter() {
            total += xlogy(g, g / (rows[i] * cols[j]));
        }
        total.max(0.0)
    }

    /// `sum_ij gamma_ij d_ij`.
    pub fn expectation(&self, d: &MetricMatrix) -> f64 {
        (&self.entries * &d.entries).sum()
    }
}

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    entropy_of(p.as_slice())
}

pub(crate) fn entropy_of(weights: &[f64]) -> f64 {
    -weights.iter().map(|&w| xlogy(w, w)).sum::<f64>()
}

/// `I(X;Y)` for input law `p` through channel `s`, in nats.
pub fn mutual_information(p: &ProbabilityVector, s: &TransitionMatrix) -> f64 {
    assert_eq!(p.len(), s.inputs(), "input distribution length");
    let q = s.output_distribution(p);
    let mut total = 0.0;
    for (i, &pi) in p.as_slice().iter().enumerate() {
        if pi < NEGLIGIBLE_MASS {
            continue;
        }
        let row_term: f64 = s
            .row(i)
            .iter()
            .zip(&q)
            .map(|(&sij, &qj)| xlogy(sij, sij / qj))
            .sum();
        total += pi * row_term;
    }
    total.max(0.0)
}

/// The joint law `gamma_ij = p_i s_ij` induced by the channel.
pub fn joint_from_input(p: &ProbabilityVector, s: &TransitionMatrix) -> Result<JointDistribution> {
    check_dim("joint_from_input", s.inputs(), p.len())?;
    let mut entries = s.entries.clone();
    for (mut row, &pi) in entries.axis_iter_mut(Axis(0)).zip(p.as_slice()) {
        row *= pi;
    }
    JointDistribution::new(entries)
}

fn rows_to_array(rows: &[Vec<f64>]) -> std::result::Result<Array2<f64>, String> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err("ragged rows".into());
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), n), flat).map_err(|e| e.to_string())
}

fn row_slice(a: &Array2<f64>, i: usize) -> &[f64] {
    let n = a.ncols();
    &a.as_slice().expect("standard layout")[i * n..(i + 1) * n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bsc(flip: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(&[vec![1.0 - flip, flip], vec![flip, 1.0 - flip]]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let one = ProbabilityVector::new(vec![1.0]).unwrap();
        assert_eq!(entropy(&one), 0.0);
        let half = ProbabilityVector::uniform(2);
        assert!((entropy(&half) - 2f64.ln()).abs() < 1e-15);
        let skew = ProbabilityVector::new(vec![0.9, 0.1]).unwrap();
        assert!((entropy(&skew) - 0.325_082_973_391_448_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_ignores_zero_mass() {
        let p = ProbabilityVector::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert!((entropy(&p) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        let id = TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(
            (mutual_information(&ProbabilityVector::uniform(2), &id) - 2f64.ln()).abs() < 1e-15
        );

        let same = TransitionMatrix::from_rows(&[vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let p = ProbabilityVector::new(vec![0.2, 0.8]).unwrap();
        assert!(mutual_information(&p, &same).abs() < 1e-15);

        let expected = 2f64.ln() - (-0.9 * 0.9f64.ln() - 0.1 * 0.1f64.ln());
        let got = mutual_information(&ProbabilityVector::uniform(2), &bsc(0.1));
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.368_064).abs() < 1e-6);
    }

    #[test]
    fn joint_examples() {
        let s = TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let p = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        let joint = joint_from_input(&p, &s).unwrap();
        let expected = [[0.27, 0.03], [0.14, 0.56]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((joint.entries()[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }

        let degenerate = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let joint = joint_from_input(&degenerate, &s).unwrap();
        assert_eq!(joint.entries().row(1).sum(), 0.0);

        let id = TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let joint = joint_from_input(&ProbabilityVector::uniform(2), &id).unwrap();
        assert_eq!(joint.entries()[(0, 0)], 0.5);
        assert_eq!(joint.entries()[(1, 1)], 0.5);
        assert_eq!(joint.entries()[(0, 1)], 0.0);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.4]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(MetricMatrix::from_rows(&[vec![-1.0]]).is_err());
        assert!(MetricMatrix::from_rows(&[vec![f64::INFINITY]]).is_err());
        let zero = TransitionMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(MetricMatrix::matched(&zero).is_err());
        assert!(joint_from_input(&ProbabilityVector::uniform(3), &bsc(0.1)).is_err());
    }

    fn simplex(len: usize) -> impl Strategy<Value = ProbabilityVector> {
        prop::collection::vec(0.0f64..1.0, len).prop_filter_map("zero mass", |w| {
            ProbabilityVector::from_unnormalized(w).ok()
        })
    }

    fn channel(m: usize, n: usize) -> impl Strategy<Value = TransitionMatrix> {
        prop::collection::vec(prop::collection::vec(0.001f64..1.0, n), m).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let t: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / t).collect()
                })
                .collect();
            let mut a = rows_to_array(&rows).unwrap();
            // exact row sums after rounding
            for mut row in a.axis_iter_mut(Axis(0)) {
                let t = row.sum();
                row /= t;
            }
            TransitionMatrix::new(a).unwrap()
        })
    }

    proptest! {
        #[test]
        fn mutual_information_is_entropy_difference(
            (p, s) in (2usize..6, 2usize..7).prop_flat_map(|(m, n)| (simplex(m), channel(m, n)))
        ) {
            let q = s.output_distribution(&p);
            let conditional: f64 = p.as_slice().iter().enumerate()
                .map(|(i, &pi)| pi * entropy_of(s.row(i)))
                .sum();
            let via_entropies = entropy_of(&q) - conditional;
            prop_assert!((mutual_information(&p, &s) - via_entropies).abs() < 1e-12);
        }

        #[test]
        fn joint_marginals_reproduce_inputs(
            (p, s) in (2usize..6, 2usize..7).prop_flat_map(|(m, n)| (simplex(m), channel(m, n)))
        ) {
            let joint = joint_from_input(&p, &s).unwrap();
            for (a, b) in joint.row_marginal().iter().zip(p.as_slice()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            for (a, b) in joint.column_marginal().iter().zip(s.output_distribution(&p)) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }

        #[test]
        fn entropy_is_concave(
            (p, r) in (1usize..8).prop_flat_map(|l| (simplex(l), simplex(l))),
            alpha in 0.0f64..1.0,
        ) {
            let mix: Vec<f64> = p.as_slice().iter().zip(r.as_slice())
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            let lhs = entropy_of(&mix);
            let rhs = alpha * entropy(&p) + (1.0 - alpha) * entropy(&r);
            prop_assert!(lhs >= rhs - 1e-12);
            prop_assert!(entropy(&p) <= (p.len() as f64).ln() + 1e-12);
        }
    }
}
