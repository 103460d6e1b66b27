//! Schmidt-decomposed pure states of a bipartite system and their
//! entanglement measures.
//!
//! A state is stored as its Schmidt weights `p_1 >= p_2 >= ... >= 0`
//! (squared Schmidt coefficients), which is all the analysis here
//! depends on; basis rotations recovered from an explicit vector are
//! carried separately by [`SchmidtDecomposition`].

use ndarray::prelude::*;
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMat, CVec};
use crate::{Error, Result};

/// Weights below this are clamped to zero and the state flagged
/// rank-deficient; full-rank preconditions consult the flag.
pub const WEIGHT_CLAMP: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SchmidtState {
    n_a: usize,
    n_b: usize,
    weights: Vec<f64>,
    rank_deficient: bool,
}

impl SchmidtState {
    /// Builds a state from Schmidt weights. Weights are sorted into
    /// descending order; they must be nonnegative and sum to 1 within
    /// 1e-12. Entries below [`WEIGHT_CLAMP`] are zeroed and the state
    /// marked rank-deficient.
    pub fn new(n_a: usize, n_b: usize, mut weights: Vec<f64>) -> Result<Self> {
        let rank = n_a.min(n_b);
        if n_a == 0 || n_b == 0 {
            return Err(Error::Dimension("subsystem dimensions must be positive".into()));
        }
        if weights.len() != rank {
            return Err(Error::Dimension(format!(
                "expected {} Schmidt weights for a {}x{} bipartition, got {}",
                rank,
                n_a,
                n_b,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(Error::InvalidArgument(
                "Schmidt weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(format!(
                "Schmidt weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        let mut rank_deficient = false;
        for w in weights.iter_mut() {
            if *w < WEIGHT_CLAMP {
                *w = 0.0;
                rank_deficient = true;
            }
        }
        weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(Self { n_a, n_b, weights, rank_deficient })
    }

    /// Maximally entangled state on an n-by-n bipartition.
    pub fn uniform(n: usize) -> Self {
        Self {
            n_a: n,
            n_b: n,
            weights: vec![1.0 / n as f64; n],
            rank_deficient: false,
        }
    }

    pub fn dim_a(&self) -> usize {
        self.n_a
    }

    pub fn dim_b(&self) -> usize {
        self.n_b
    }

    /// Schmidt rank bound min(n_a, n_b).
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p_min(&self) -> f64 {
        *self.weights.last().expect("nonempty weights")
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// The state vector sum_i sqrt(p_i) |i>_A |i>_B in the Schmidt
    /// basis, A-major layout (index = i_a * n_b + i_b).
    pub fn state_vector(&self) -> CVec {
        let mut v = Array1::zeros(self.n_a * self.n_b);
        for (i, w) in self.weights.iter().enumerate() {
            v[i * self.n_b + i] = C64::new(w.sqrt(), 0.0);
        }
        v
    }

    /// Density matrix of the pure state.
    pub fn density_matrix(&self) -> CMat {
        let v = self.state_vector();
        let d = v.len();
        Array2::from_shape_fn((d, d), |(i, j)| v[i] * v[j].conj())
    }
}

/// Scalar entanglement measures of a Schmidt state.
///
/// `renyi2` is -log(sum p^2); `scaled_e2` rescales the purity deficit
/// to [0, 1] with 1 at maximal entanglement; `delta_e2` is the purity
/// excess sum p^2 - 1/N, which vanishes at maximal entanglement.
#[derive(Debug, Clone, Copy)]
pub struct EntanglementMeasures {
    pub renyi2: f64,
    pub scaled_e2: f64,
    pub delta_e2: f64,
    pub p_min: f64,
}

/// Computes the entanglement measures of a state.
pub fn measures(state: &SchmidtState) -> EntanglementMeasures {
    let n = state.rank() as f64;
    let purity: f64 = state.weights().iter().map(|p| p * p).sum();
    let scaled_e2 = if state.rank() == 1 {
        0.0
    } else {
        (1.0 - purity) / (1.0 - 1.0 / n)
    };
    EntanglementMeasures {
        renyi2: -purity.ln(),
        scaled_e2,
        delta_e2: purity - 1.0 / n,
        p_min: state.p_min(),
    }
}

/// Diagonal operator Psi = diag(sqrt(p_i)), the square root of the
/// reduced density matrix in the Schmidt basis.
pub fn psi_operator(state: &SchmidtState) -> CMat {
    let r = state.rank();
    let mut m = Array2::zeros((r, r));
    for (i, w) in state.weights().iter().enumerate() {
        m[[i, i]] = C64::new(w.sqrt(), 0.0);
    }
    m
}

/// A Schmidt decomposition of an explicit state vector: the weights
/// plus the local basis rotations that bring operators into the
/// Schmidt frame (columns are the Schmidt basis vectors).
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub state: SchmidtState,
    pub basis_a: CMat,
    pub basis_b: CMat,
}

/// Schmidt-decomposes a normalized vector on an n_a x n_b bipartition
/// (A-major layout). Errors if the vector is not normalized to 1e-10.
pub fn schmidt_from_vector(psi: &CVec, n_a: usize, n_b: usize) -> Result<SchmidtDecomposition> {
    if psi.len() != n_a * n_b {
        return Err(Error::Dimension(format!(
            "vector of length {} does not match {}x{} bipartition",
            psi.len(),
            n_a,
            n_b
        )));
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(format!(
            "state vector has norm {norm}, expected 1 within 1e-10"
        )));
    }
    let coeff = Array2::from_shape_fn((n_a, n_b), |(i, j)| psi[i * n_b + j]);
    let (u, s, vt) = coeff
        .svd(true, true)
        .map_err(|e| Error::Eigensolver(format!("Schmidt SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested Vt");
    let weights: Vec<f64> = s.iter().map(|x| x * x).collect();
    // SVD returns singular values descending, so weights are sorted.
    let sum: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    let state = SchmidtState::new(n_a, n_b, weights)?;
    // psi = sum_k s_k (U col k) (conj(V) col k), so the B-side basis
    // is the complex conjugate of V's columns.
    let basis_b = vt.t().to_owned();
    Ok(SchmidtDecomposition { state, basis_a: u, basis_b })
}

/// Draws Schmidt weights with an exactly prescribed purity excess
/// delta_e2. Weights are Boltzmann-shaped, p_i ~ exp(-beta l_i) with
/// i.i.d. standard-normal l, and beta is bisected until the realized
/// delta_e2 matches the target to 1e-10 (at most 200 iterations).
pub fn sample_schmidt_fixed_e2<R: Rng + ?Sized>(
    n: usize,
    target_delta_e2: f64,
    rng: &mut R,
) -> Result<SchmidtState> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "fixed-entanglement sampling needs n >= 2".into(),
        ));
    }
    let max = 1.0 - 1.0 / n as f64;
    if !(0.0..=max).contains(&target_delta_e2) {
        return Err(Error::Unreachable(format!(
            "delta_e2 target {target_delta_e2} outside [0, 1 - 1/n] = [0, {max}]"
        )));
    }
    let mut levels: Vec<f64> = (0..n)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let mean = levels.iter().sum::<f64>() / n as f64;
    for l in levels.iter_mut() {
        *l -= mean;
    }

    let weights_at = |beta: f64| -> Vec<f64> {
        let m = levels.iter().map(|l| -beta * l).fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = levels.iter().map(|l| (-beta * l - m).exp()).collect();
        let s: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= s;
        }
        w
    };
    let delta_at = |beta: f64| -> f64 {
        let w = weights_at(beta);
        w.iter().map(|x| x * x).sum::<f64>() - 1.0 / n as f64
    };

    let beta = if target_delta_e2 <= 0.0 {
        0.0
    } else {
        let mut hi = 1.0;
        let mut grew = 0;
        while delta_at(hi) < target_delta_e2 {
            hi *= 2.0;
            grew += 1;
            if grew > 200 {
                return Err(Error::Unreachable(format!(
                    "bisection could not bracket delta_e2 = {target_delta_e2}"
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if delta_at(mid) < target_delta_e2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let weights = weights_at(beta);
    let realized: f64 = weights.iter().map(|x| x * x).sum::<f64>() - 1.0 / n as f64;
    if (realized - target_delta_e2).abs() > 1e-10 {
        return Err(Error::Unreachable(format!(
            "bisection realized delta_e2 = {realized}, target {target_delta_e2}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / sum).collect();
    SchmidtState::new(n, n, weights)
}
