//! Dense complex linear algebra: Kronecker products, column-stacking
//! vectorization, general eigendecomposition, matrix exponentials and
//! numerical null spaces. Everything operates on `Array2<Complex64>`
//! at desk scale; LAPACK (via the system OpenBLAS) does the heavy work.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Factorize, Norm, Solve, SVD};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// n-by-n identity matrix.
pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    let mut out = m.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

/// Column-stacking vectorization: entry (i, j) lands at index `j*rows + i`.
pub fn vectorize(m: &CMat) -> CVec {
    let (rows, cols) = m.dim();
    Array1::from_shape_fn(rows * cols, |k| m[[k % rows, k / rows]])
}

/// Inverse of [`vectorize`] for square matrices.
pub fn devectorize(v: &CVec) -> Result<CMat> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Dimension(format!(
            "vector of length {n} is not a vectorized square matrix"
        )));
    }
    Ok(Array2::from_shape_fn((d, d), |(i, j)| v[j * d + i]))
}

/// Frobenius norm.
pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    let (_, s, _) = m
        .svd(false, false)
        .map_err(|e| Error::Eigensolver(format!("SVD failed: {e}")))?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    let (_, s, _) = m
        .svd(false, false)
        .map_err(|e| Error::Eigensolver(format!("SVD failed: {e}")))?;
    let mut out: Vec<f64> = s.to_vec();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(out)
}

/// Partial trace over the B factor of an operator on an
/// `n_a * n_b`-dimensional space (A-major index layout).
pub fn partial_trace_b(m: &CMat, n_a: usize, n_b: usize) -> Result<CMat> {
    if m.dim() != (n_a * n_b, n_a * n_b) {
        return Err(Error::Dimension(format!(
            "partial trace expects a {0}x{0} matrix for factors {1}x{2}",
            n_a * n_b,
            n_a,
            n_b
        )));
    }
    Ok(Array2::from_shape_fn((n_a, n_a), |(i, j)| {
        (0..n_b).map(|k| m[[i * n_b + k, j * n_b + k]]).sum()
    }))
}

/// Partial trace over the A factor.
pub fn partial_trace_a(m: &CMat, n_a: usize, n_b: usize) -> Result<CMat> {
    if m.dim() != (n_a * n_b, n_a * n_b) {
        return Err(Error::Dimension(format!(
            "partial trace expects a {0}x{0} matrix for factors {1}x{2}",
            n_a * n_b,
            n_a,
            n_b
        )));
    }
    Ok(Array2::from_shape_fn((n_b, n_b), |(k, l)| {
        (0..n_a).map(|i| m[[i * n_b + k, i * n_b + l]]).sum()
    }))
}

/// Errors unless every entry is finite.
pub fn verify_finite(m: &CMat, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Checks `‖m − m†‖_F ≤ tol · max(1, ‖m‖_F)`.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = frobenius_norm(m).max(1.0);
    frobenius_norm(&(m - &dagger(m))) <= tol * scale
}

/// Eigendecomposition of a general (non-Hermitian) square matrix.
///
/// Pairs are sorted by descending real part (ties by descending
/// imaginary part). `residuals[k] = ‖M v_k − λ_k v_k‖₂` is the
/// backward-error certificate for each pair; `basis_min_singular` is
/// the smallest singular value of the (column-normalized) eigenvector
/// matrix, which collapses to ~0 for a near-defective input.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<C64>,
    /// Eigenvectors as matrix columns, same order as `values`.
    pub vectors: CMat,
    pub residuals: Vec<f64>,
    pub matrix_norm: f64,
    pub basis_min_singular: f64,
}

impl EigDecomposition {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Flags eigenvector bases too ill-conditioned to trust for
    /// diagonalization (defective or nearly defective input).
    pub fn near_defective(&self, tol: f64) -> bool {
        self.basis_min_singular <= tol
    }
}

/// Full eigendecomposition with per-pair residuals. Residuals are
/// reported, not enforced; callers with accuracy contracts compare
/// against `1e-9 * matrix_norm`.
pub fn eig_general(m: &CMat) -> Result<EigDecomposition> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    verify_finite(m, "eigendecomposition input")?;
    let (vals, vecs) = m
        .eig()
        .map_err(|e| Error::Eigensolver(format!("zgeev did not converge: {e}")))?;
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (vals[b].re, vals[b].im)
            .partial_cmp(&(vals[a].re, vals[a].im))
            .unwrap()
    });

    let values: Vec<C64> = order.iter().map(|&k| vals[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = vecs.column(src);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut out = vectors.column_mut(dst);
        for (o, &z) in out.iter_mut().zip(col.iter()) {
            *o = z / norm;
        }
    }

    let mut residuals = Vec::with_capacity(n);
    for k in 0..n {
        let v = vectors.column(k).to_owned();
        let mv = m.dot(&v);
        let r = (&mv - &v.mapv(|z| z * values[k])).norm_l2();
        residuals.push(r);
    }

    let (_, sing, _) = vectors
        .svd(false, false)
        .map_err(|e| Error::Eigensolver(format!("eigenbasis SVD failed: {e}")))?;
    let basis_min_singular = sing.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(EigDecomposition {
        values,
        vectors,
        residuals,
        matrix_norm: frobenius_norm(m),
        basis_min_singular,
    })
}

// Pade-13 coefficients for the scaling-and-squaring matrix exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn opnorm_one(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant.
pub fn expm(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    verify_finite(m, "expm input")?;
    let n = m.nrows();
    let norm = opnorm_one(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = m.mapv(|z| z / 2f64.powi(squarings as i32));

    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = identity(n);

    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let u_inner = a6.mapv(|z| z * b(13)) + a4.mapv(|z| z * b(11)) + a2.mapv(|z| z * b(9));
    let u_poly = a6.dot(&u_inner)
        + a6.mapv(|z| z * b(7))
        + a4.mapv(|z| z * b(5))
        + a2.mapv(|z| z * b(3))
        + id.mapv(|z| z * b(1));
    let u = a.dot(&u_poly);

    let v_inner = a6.mapv(|z| z * b(12)) + a4.mapv(|z| z * b(10)) + a2.mapv(|z| z * b(8));
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * b(6))
        + a4.mapv(|z| z * b(4))
        + a2.mapv(|z| z * b(2))
        + id.mapv(|z| z * b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .factorize()
        .and_then(|f| {
            let mut cols = Vec::with_capacity(n);
            for j in 0..n {
                cols.push(f.solve(&p.column(j).to_owned())?);
            }
            let mut out = Array2::zeros((n, n));
            for (j, c) in cols.into_iter().enumerate() {
                out.column_mut(j).assign(&c);
            }
            Ok(out)
        })
        .map_err(|e| Error::LinearSolve(format!("expm Pade solve failed: {e}")))?;

    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Action of the matrix exponential: `exp(m t) v`.
pub fn expm_apply(m: &CMat, v: &CVec, t: f64) -> Result<CVec> {
    if m.nrows() != v.len() {
        return Err(Error::Dimension(format!(
            "expm_apply: matrix is {}x{} but vector has length {}",
            m.nrows(),
            m.ncols(),
            v.len()
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("expm_apply: t must be finite".into()));
    }
    let e = expm(&m.mapv(|z| z * t))?;
    Ok(e.dot(v))
}

/// Orthonormal basis of the numerical null space: right singular
/// vectors whose singular values satisfy `σ ≤ rel_tol · σ_max`.
pub fn null_space(m: &CMat, rel_tol: f64) -> Result<Vec<CVec>> {
    verify_finite(m, "null_space input")?;
    let (_, s, vt) = m
        .svd(false, true)
        .map_err(|e| Error::Eigensolver(format!("SVD failed: {e}")))?;
    let vt = vt.expect("requested Vt");
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax;
    let n = m.ncols();
    let mut basis = Vec::new();
    for k in 0..n {
        let sigma = if k < s.len() { s[k] } else { 0.0 };
        if sigma <= cut {
            basis.push(vt.row(k).mapv(|z| z.conj()));
        }
    }
    Ok(basis)
}

/// LU factorization wrapper for repeated dense solves.
pub struct LuSolver {
    factors: ndarray_linalg::LUFactorized<ndarray::OwnedRepr<C64>>,
}

impl LuSolver {
    pub fn new(m: CMat) -> Result<Self> {
        use ndarray_linalg::FactorizeInto;
        let factors = m
            .factorize_into()
            .map_err(|e| Error::LinearSolve(format!("LU factorization failed: {e}")))?;
        Ok(Self { factors })
    }

    pub fn solve(&self, b: &CVec) -> Result<CVec> {
        self.factors
            .solve(b)
            .map_err(|e| Error::LinearSolve(format!("LU solve failed: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_of_known_2x2() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]];
        let b = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], c(1.0, 0.0));
        assert_eq!(k[[0, 3]], c(2.0, 0.0));
        assert_eq!(k[[3, 0]], c(3.0, 0.0));
        assert_eq!(k[[2, 3]], c(4.0, 0.0));
    }

    #[test]
    fn vectorize_roundtrip_and_layout() {
        let m = array![[c(1.0, 0.0), c(3.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]];
        let v = vectorize(&m);
        // columns stacked: (1, 2, 3, 4)
        assert_eq!(v[0], c(1.0, 0.0));
        assert_eq!(v[1], c(2.0, 0.0));
        assert_eq!(v[2], c(3.0, 0.0));
        assert_eq!(v[3], c(4.0, 0.0));
        let back = devectorize(&v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        let v = Array1::from_elem(6, ONE);
        assert!(devectorize(&v).is_err());
    }

    #[test]
    fn eig_diag_matrix_sorted() {
        let m = array![
            [c(-1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(2.0, 0.0)]
        ];
        let d = eig_general(&m).unwrap();
        assert_abs_diff_eq!(d.values[0].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.values[1].re, -1.0, epsilon = 1e-12);
        assert!(d.max_residual() <= 1e-9 * d.matrix_norm);
    }

    #[test]
    fn eig_jordan_block_flagged_defective() {
        let m = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let d = eig_general(&m).unwrap();
        // eigenvalue 0 with algebraic multiplicity 2
        assert!(d.values.iter().all(|z| z.norm() < 1e-12));
        // only one eigendirection survives, so the basis collapses
        assert!(d.near_defective(1e-9));
    }

    #[test]
    fn expm_nilpotent_exact() {
        let m = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let e = expm(&m).unwrap();
        assert_abs_diff_eq!(e[[0, 0]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[0, 1]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 1]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 0]].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_apply_matches_analytic_rotation() {
        // exp(i t sigma_x) rotates |0> to cos(t)|0> + i sin(t)|1>
        let sx = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let m = sx.mapv(|z| z * I);
        let v = array![ONE, c(0.0, 0.0)];
        let t = 0.7;
        let w = expm_apply(&m, &v, t).unwrap();
        assert_abs_diff_eq!(w[0].re, t.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(w[1].im, t.sin(), epsilon = 1e-12);
    }

    #[test]
    fn null_space_of_zero_and_invertible() {
        let z = Array2::<C64>::zeros((3, 3));
        assert_eq!(null_space(&z, 1e-12).unwrap().len(), 3);
        let inv = identity(3).mapv(|z| z * c(2.0, 1.0));
        assert!(null_space(&inv, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn null_space_rank_one_projector() {
        // |0><0| has a 2-dim kernel in 3 dims
        let mut m = Array2::<C64>::zeros((3, 3));
        m[[0, 0]] = ONE;
        let basis = null_space(&m, 1e-12).unwrap();
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(v[0].norm() < 1e-12);
        }
    }
}
