//! Finite-state couplings: measures, stochastic matrices, the kernel-to-joint
//! embedding, composition of joints and disintegration.
//!
//! Joints may be rectangular (`n × m`); every formula is dimension-agnostic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::sum::{csum, NeumaierSum};

/// Row-sum tolerance for stochastic matrices and probability vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Right marginal of the left joint must match the left marginal of the
/// right joint within this tolerance, entrywise.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl TryFrom<Matrix> for DiscreteMeasure {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        if m.rows() != 1 && m.cols() != 1 {
            return Err(invalid(format!("a measure must be a vector, got shape {:?}", m.shape())));
        }
        DiscreteMeasure::new(m.data().to_vec())
    }
}

impl From<DiscreteMeasure> for Matrix {
    fn from(x: DiscreteMeasure) -> Self {
        let n = x.weights.len();
        Matrix::from_vec(1, n, x.weights).expect("validated")
    }
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(format!("measure weight {w} is not a nonnegative real")));
        }
        Ok(DiscreteMeasure { weights })
    }

    /// Like [`new`](Self::new) but also requires total mass 1.
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        let x = Self::new(weights)?;
        if (x.total() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(invalid(format!("probability weights sum to {}", x.total())));
        }
        Ok(x)
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteMeasure { weights: vec![1.0 / n as f64; n] }
    }

    pub fn point(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        DiscreteMeasure { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        csum(self.weights.iter().copied())
    }

    /// `xᵀA`.
    pub fn push(&self, a: &DiscreteKernel) -> Result<DiscreteMeasure> {
        check_len(a.rows(), self.len())?;
        let m = a.cols();
        let w = (0..m)
            .map(|j| csum((0..self.len()).map(|i| self.weights[i] * a.matrix[(i, j)])))
            .collect();
        Ok(DiscreteMeasure { weights: w })
    }
}

/// Row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct DiscreteKernel {
    matrix: Matrix,
}

impl TryFrom<Matrix> for DiscreteKernel {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        DiscreteKernel::new(m)
    }
}

impl From<DiscreteKernel> for Matrix {
    fn from(k: DiscreteKernel) -> Self {
        k.matrix
    }
}

impl DiscreteKernel {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if let Some(v) = matrix.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("kernel entry {v} outside [0, 1]")));
        }
        for (i, s) in matrix.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(invalid(format!("kernel row {i} sums to {s}")));
            }
        }
        Ok(DiscreteKernel { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        DiscreteKernel { matrix: Matrix::identity(n) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// Sequential composition `A·B`.
    pub fn then(&self, b: &DiscreteKernel) -> Result<DiscreteKernel> {
        let mut product = self.matrix.matmul(&b.matrix)?;
        // Rounding can leave entries a hair outside [0, 1]; clamp every row.
        for i in 0..product.rows() {
            for x in product.row_mut(i) {
                *x = x.clamp(0.0, 1.0);
            }
        }
        DiscreteKernel::new(product)
    }

    /// The lift `A′` with `A′(i, j, k) = A(i, k)` when `i = j`, else 0.
    pub fn lift(&self) -> LiftedKernel<'_> {
        LiftedKernel { kernel: self }
    }
}

/// Indexed view of the `n × n × m` lifted tensor.
#[derive(Debug, Clone, Copy)]
pub struct LiftedKernel<'a> {
    kernel: &'a DiscreteKernel,
}

impl LiftedKernel<'_> {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j {
            self.kernel.get(i, k)
        } else {
            0.0
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.kernel.rows(), self.kernel.rows(), self.kernel.cols())
    }
}

pub fn lift_kernel(a: &DiscreteKernel) -> LiftedKernel<'_> {
    a.lift()
}

/// Nonnegative matrix of cell masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct DiscreteJoint {
    cells: Matrix,
}

impl TryFrom<Matrix> for DiscreteJoint {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        DiscreteJoint::new(m)
    }
}

impl From<DiscreteJoint> for Matrix {
    fn from(j: DiscreteJoint) -> Self {
        j.cells
    }
}

impl DiscreteJoint {
    pub fn new(cells: Matrix) -> Result<Self> {
        if let Some(v) = cells.data().iter().find(|v| **v < 0.0) {
            return Err(invalid(format!("joint cell {v} is negative")));
        }
        Ok(DiscreteJoint { cells })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn cells(&self) -> &Matrix {
        &self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cells.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[(i, j)]
    }

    pub fn total(&self) -> f64 {
        self.cells.total()
    }

    pub fn left_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure { weights: self.cells.row_sums() }
    }

    pub fn right_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure { weights: self.cells.col_sums() }
    }

    pub fn max_abs_diff(&self, other: &DiscreteJoint) -> f64 {
        self.cells.max_abs_diff(&other.cells)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// `J A` relative to `x`: the joint with cells `A(i, j)·x_i`.
pub fn j_embed(x: &DiscreteMeasure, a: &DiscreteKernel) -> Result<DiscreteJoint> {
    check_len(a.rows(), x.len())?;
    let (n, m) = a.matrix.shape();
    let mut cells = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            cells[(i, j)] = a.get(i, j) * x.weights[i];
        }
    }
    Ok(DiscreteJoint { cells })
}

/// Composition of joints through the shared middle marginal:
/// `γ(i, k) = Σ_{j : y_j > 0} α(i, j)·β(j, k) / y_j`.
pub fn compose_joints(alpha: &DiscreteJoint, beta: &DiscreteJoint) -> Result<DiscreteJoint> {
    let (n, m) = alpha.shape();
    let (m2, p) = beta.shape();
    check_len(m, m2)?;
    let y = alpha.cells.col_sums();
    let y_beta = beta.cells.row_sums();
    let defect = y.iter().zip(&y_beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if defect > MARGINAL_TOL {
        return Err(Error::MarginalMismatch { max_defect: defect, tolerance: MARGINAL_TOL });
    }
    let mut cells = Matrix::zeros(n, p);
    for i in 0..n {
        for k in 0..p {
            let mut s = NeumaierSum::new();
            for j in 0..m {
                if y[j] > 0.0 {
                    s.add(alpha.get(i, j) * beta.get(j, k) / y[j]);
                }
            }
            cells[(i, k)] = s.value();
        }
    }
    Ok(DiscreteJoint { cells })
}

/// Kernel `A` with `α(i, j) = A(i, j)·x_i`; rows with `x_i = 0` take `fill`.
pub fn disintegrate(alpha: &DiscreteJoint, fill: &DiscreteMeasure) -> Result<DiscreteKernel> {
    let (n, m) = alpha.shape();
    check_len(m, fill.len())?;
    let x = alpha.cells.row_sums();
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let row = out.row_mut(i);
        if x[i] > 0.0 {
            for j in 0..m {
                row[j] = (alpha.get(i, j) / x[i]).min(1.0);
            }
        } else {
            row.copy_from_slice(fill.weights());
        }
    }
    DiscreteKernel::new(out)
}

/// `A ≡ₓ B`: rows agree (within 1e-12) wherever `x_i > 0`.
pub fn kernel_equiv(a: &DiscreteKernel, b: &DiscreteKernel, x: &DiscreteMeasure) -> Result<bool> {
    check_len(a.rows(), b.rows())?;
    check_len(a.cols(), b.cols())?;
    check_len(a.rows(), x.len())?;
    Ok((0..a.rows()).filter(|&i| x.weights[i] > 0.0).all(|i| {
        a.row(i)
            .iter()
            .zip(b.row(i))
            .all(|(p, q)| (p - q).abs() <= STOCHASTIC_TOL)
    }))
}

/// Transpose.
pub fn dagger(alpha: &DiscreteJoint) -> DiscreteJoint {
    DiscreteJoint { cells: alpha.cells.transpose() }
}

/// Bayesian inverse: `B(j, i) = A(i, j)·x_i / y_j` with `y = xᵀA`; rows with
/// `y_j = 0` take `fill`.
pub fn bayes_inverse(
    a: &DiscreteKernel,
    x: &DiscreteMeasure,
    fill: &DiscreteMeasure,
) -> Result<DiscreteKernel> {
    check_len(a.rows(), x.len())?;
    check_len(a.rows(), fill.len())?;
    let y = x.push(a)?;
    let (n, m) = a.matrix.shape();
    let mut out = Matrix::zeros(m, n);
    for j in 0..m {
        let yj = y.weights[j];
        let row = out.row_mut(j);
        if yj > 0.0 {
            for i in 0..n {
                row[i] = (a.get(i, j) * x.weights[i] / yj).min(1.0);
            }
        } else {
            row.copy_from_slice(fill.weights());
        }
    }
    // Row sums equal Σᵢ A(i, j)·xᵢ / yⱼ = 1 up to rounding.
    DiscreteKernel::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> DiscreteKernel {
        DiscreteKernel::from_rows(&[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()
    }

    #[test]
    fn lift_cases() {
        let id = DiscreteKernel::identity(2);
        let l = id.lift();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let expect = if i == j && j == k { 1.0 } else { 0.0 };
                    assert_eq!(l.get(i, j, k), expect);
                }
            }
        }
        let a = a();
        let l = lift_kernel(&a);
        assert_eq!(l.get(0, 0, 1), 0.2);
        assert_eq!(l.get(0, 1, 1), 0.0);
        assert_eq!(l.get(1, 1, 0), 0.4);
        assert_eq!(l.shape(), (2, 2, 2));
    }

    #[test]
    fn embed_examples() {
        let j = j_embed(&DiscreteMeasure::point(2, 0), &a()).unwrap();
        assert_eq!(j, DiscreteJoint::from_rows(&[vec![0.8, 0.2], vec![0.0, 0.0]]).unwrap());

        let x = DiscreteMeasure::uniform(2);
        let j = j_embed(&x, &DiscreteKernel::identity(2)).unwrap();
        assert_eq!(j, DiscreteJoint::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap());

        let p = vec![0.1, 0.3, 0.6];
        let n = 4;
        let k = DiscreteKernel::from_rows(&vec![p.clone(); n]).unwrap();
        let j = j_embed(&DiscreteMeasure::uniform(n), &k).unwrap();
        for i in 0..n {
            for (c, pc) in p.iter().enumerate() {
                assert!((j.get(i, c) - pc / n as f64).abs() < 1e-16);
            }
        }
        assert!(matches!(
            j_embed(&DiscreteMeasure::uniform(3), &a()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn composition_matches_kernel_product() {
        // Oracle: the matrix product A·B, embedded against x.
        let x = DiscreteMeasure::uniform(2);
        let a = a();
        let b = DiscreteKernel::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let ab = [[0.8 * 0.5, 0.8 * 0.5 + 0.2], [0.4 * 0.5, 0.4 * 0.5 + 0.6]];
        let expected = DiscreteJoint::from_rows(&[
            vec![0.5 * ab[0][0], 0.5 * ab[0][1]],
            vec![0.5 * ab[1][0], 0.5 * ab[1][1]],
        ])
        .unwrap();
        let alpha = j_embed(&x, &a).unwrap();
        let beta = j_embed(&x.push(&a).unwrap(), &b).unwrap();
        let gamma = compose_joints(&alpha, &beta).unwrap();
        assert!(gamma.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn right_identity() {
        let alpha = DiscreteJoint::from_rows(&[vec![0.1, 0.2, 0.0], vec![0.3, 0.05, 0.35]]).unwrap();
        let y = alpha.right_marginal();
        let id = j_embed(&y, &DiscreteKernel::identity(3)).unwrap();
        let g = compose_joints(&alpha, &id).unwrap();
        assert!(g.max_abs_diff(&alpha) < 1e-16);
    }

    #[test]
    fn zero_middle_mass_is_skipped() {
        let alpha = DiscreteJoint::from_rows(&[vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        let beta = DiscreteJoint::from_rows(&[vec![0.25, 0.75], vec![0.0, 0.0]]).unwrap();
        let g = compose_joints(&alpha, &beta).unwrap();
        assert!(g.total().is_finite());
        assert!((g.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_refused() {
        let alpha = DiscreteJoint::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let beta = DiscreteJoint::from_rows(&[vec![0.6], vec![0.4]]).unwrap();
        match compose_joints(&alpha, &beta) {
            Err(Error::MarginalMismatch { max_defect, .. }) => assert!((max_defect - 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disintegration_cases() {
        let d = DiscreteJoint::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let fill = DiscreteMeasure::point(2, 1);
        assert_eq!(disintegrate(&d, &fill).unwrap(), DiscreteKernel::identity(2));

        let x = DiscreteMeasure::probability(vec![0.3, 0.7]).unwrap();
        let back = disintegrate(&j_embed(&x, &a()).unwrap(), &fill).unwrap();
        assert!(back.matrix().max_abs_diff(a().matrix()) < 1e-15);

        let alpha = DiscreteJoint::from_rows(&[vec![0.0, 0.0], vec![0.4, 0.6]]).unwrap();
        let k = disintegrate(&alpha, &DiscreteMeasure::point(2, 0)).unwrap();
        assert_eq!(k.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn equivalence_cases() {
        let a = a();
        let b = DiscreteKernel::from_rows(&[vec![0.8, 0.2], vec![0.1, 0.9]]).unwrap();
        let x = DiscreteMeasure::point(2, 0);
        assert!(kernel_equiv(&a, &a, &x).unwrap());
        assert!(kernel_equiv(&a, &b, &x).unwrap());
        assert!(!kernel_equiv(&a, &b, &DiscreteMeasure::uniform(2)).unwrap());
    }

    #[test]
    fn transpose_cases() {
        let d = DiscreteJoint::from_rows(&[vec![0.2, 0.0], vec![0.0, 0.8]]).unwrap();
        assert_eq!(dagger(&d), d);
        let m = DiscreteJoint::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert_eq!(dagger(&m), DiscreteJoint::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.4]]).unwrap());
        assert_eq!(dagger(&dagger(&m)), m);
    }

    #[test]
    fn bayes_inverse_transposes_embedding() {
        let x = DiscreteMeasure::uniform(2);
        let a = a();
        let fill = DiscreteMeasure::uniform(2);
        let b = bayes_inverse(&a, &x, &fill).unwrap();
        let y = x.push(&a).unwrap();
        let lhs = j_embed(&y, &b).unwrap();
        let rhs = dagger(&j_embed(&x, &a).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);

        let id = bayes_inverse(&DiscreteKernel::identity(3), &DiscreteMeasure::uniform(3), &DiscreteMeasure::uniform(3))
            .unwrap();
        assert_eq!(id, DiscreteKernel::identity(3));

        // y_1 = 0: second column of A never reached.
        let a0 = DiscreteKernel::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let fill = DiscreteMeasure::point(2, 1);
        let b = bayes_inverse(&a0, &DiscreteMeasure::uniform(2), &fill).unwrap();
        assert_eq!(b.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn measure_json_shape() {
        let x = DiscreteMeasure::uniform(2);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"shape":[1,2],"data":[0.5,0.5]}"#);
        let k: std::result::Result<DiscreteKernel, _> =
            serde_json::from_str(r#"{"shape":[1,2],"data":[0.5,0.6]}"#);
        assert!(k.is_err());
    }
}
