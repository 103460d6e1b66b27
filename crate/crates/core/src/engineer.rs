//! Reverse engineering of dissipative dynamics from a target state.
//!
//! Given a Schmidt state, [`partner_operator`] produces the B-side
//! factor that makes `a (x) 1 + 1 (x) b` annihilate the state, so any
//! collection of such jumps has the state in its dark space.
//! [`random_jump`] draws the A factor from one of several matrix
//! ensembles; [`uneven_partner`] extends the construction to a larger
//! B factor, where extra levels can absorb into the Schmidt support;
//! [`cqa_construct`] adds the Hamiltonian that makes the coupling
//! directional, so the A factor carries closed reduced dynamics.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{
    dagger, frobenius_norm, identity, kron, null_space, singular_values, verify_finite, CMat, I,
    ONE,
};
use crate::lindblad::{build_superoperator, dissipator, JumpOperator, Lindbladian};
use crate::states::{psi_operator, SchmidtState};
use crate::{Error, Result};

/// Weight floor below which the partner map is refused: entries are
/// amplified by `sqrt(p_max/p_min)`, so an almost-singular weight
/// matrix turns the construction into noise. Rank-deficient targets
/// should go through [`uneven_partner`] instead.
pub const PARTNER_WEIGHT_FLOOR: f64 = 1e-12;

/// Relative kernel tolerance for [`kernel_dimension`].
pub const KERNEL_TOL: f64 = 1e-10;

/// Matrix ensembles for the random A factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleTag {
    /// I.i.d. complex Gaussian entries.
    Ginibre,
    /// `(A + A^+)/sqrt(2)` of a Ginibre draw.
    Hermitian,
    /// `(A + A^T)/sqrt(2)` of a Ginibre draw.
    Symmetric,
    /// Symmetrized under the weighted transpose so that
    /// `A = Psi A^T Psi^{-1}` holds exactly.
    DetailedBalance,
}

/// An ensemble choice together with the element standard deviation.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleKind {
    tag: EnsembleTag,
    sigma: f64,
}

impl EnsembleKind {
    pub fn new(tag: EnsembleTag, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ensemble sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { tag, sigma })
    }

    pub fn ginibre(sigma: f64) -> Result<Self> {
        Self::new(EnsembleTag::Ginibre, sigma)
    }

    pub fn tag(&self) -> EnsembleTag {
        self.tag
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn require_partner_compatible(a: &CMat, state: &SchmidtState) -> Result<()> {
    let n = state.dim_a();
    if state.dim_b() != n {
        return Err(Error::Dimension(format!(
            "partner map needs equal factor dimensions, got {}x{}; use uneven_partner",
            n,
            state.dim_b()
        )));
    }
    if state.p_min() <= PARTNER_WEIGHT_FLOOR {
        return Err(Error::RankDeficient(format!(
            "partner map needs a full-rank state (p_min > {PARTNER_WEIGHT_FLOOR:.0e}); \
             use uneven_partner for rank-deficient targets"
        )));
    }
    if a.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "A factor must be {n}x{n}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    verify_finite(a, "A factor")
}

/// B-side factor `-Psi a^T Psi^{-1}` making the jump
/// `a (x) 1 + 1 (x) b` annihilate the state: entrywise
/// `b_ij = -sqrt(p_i/p_j) a_ji`.
pub fn partner_operator(a: &CMat, state: &SchmidtState) -> Result<CMat> {
    require_partner_compatible(a, state)?;
    let p = state.weights();
    let n = state.dim_a();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        -a[[j, i]] * C64::new((p[i] / p[j]).sqrt(), 0.0)
    }))
}

fn ginibre_draw<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> CMat {
    let s = sigma / 2f64.sqrt();
    Array2::from_shape_fn((n, n), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Weighted transpose `Psi m^T Psi^{-1}`, the involution whose fixed
/// points satisfy the classical detailed-balance condition.
pub fn weighted_transpose(m: &CMat, state: &SchmidtState) -> CMat {
    let p = state.weights();
    let n = m.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        m[[j, i]] * C64::new((p[i] / p[j]).sqrt(), 0.0)
    })
}

/// Draws an A factor from the requested ensemble and pairs it with its
/// partner so the target state is dark. The rate is fixed at kappa=1;
/// sigma carries the scale.
pub fn random_jump<R: Rng + ?Sized>(
    kind: &EnsembleKind,
    state: &SchmidtState,
    rng: &mut R,
) -> Result<JumpOperator> {
    let n = state.dim_a();
    let g = ginibre_draw(n, kind.sigma, rng);
    let inv_sqrt2 = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let a = match kind.tag {
        EnsembleTag::Ginibre => g,
        EnsembleTag::Hermitian => (&g + &dagger(&g)).mapv(|z| z * inv_sqrt2),
        EnsembleTag::Symmetric => (&g + &g.t().to_owned()).mapv(|z| z * inv_sqrt2),
        EnsembleTag::DetailedBalance => {
            require_partner_compatible(&g, state)?;
            let sym = (&g + &g.t().to_owned()).mapv(|z| z * inv_sqrt2);
            (&sym + &weighted_transpose(&sym, state)).mapv(|z| z * inv_sqrt2)
        }
    };
    let b = partner_operator(&a, state)?;
    JumpOperator::new(a, b, 1.0)
}

/// Numerical kernel dimension of the full jump matrix
/// `sqrt(kappa)(a (x) 1 + 1 (x) b)`, at relative tolerance
/// [`KERNEL_TOL`]. For engineered jumps on an N-level pair this is at
/// least N: the dark state is one kernel vector among a whole family.
pub fn kernel_dimension(j: &JumpOperator) -> Result<usize> {
    let m = j.full_matrix();
    let s = singular_values(&m)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(m.nrows());
    }
    Ok(s.iter().filter(|&&x| x <= KERNEL_TOL * top).count())
}

/// Parameters of the uneven-dimension construction: a B factor with
/// `n_b > n_a` levels, whose extra levels couple into the Schmidt
/// support with Gaussian amplitudes of standard deviation `sigma_b`.
#[derive(Debug, Clone, Copy)]
pub struct UnevenSpec {
    n_a: usize,
    n_b: usize,
    sigma_b: f64,
}

impl UnevenSpec {
    pub fn new(n_a: usize, n_b: usize, sigma_b: f64) -> Result<Self> {
        if n_b <= n_a {
            return Err(Error::Dimension(format!(
                "uneven construction needs n_b > n_a, got n_a={n_a}, n_b={n_b}"
            )));
        }
        if n_a == 0 {
            return Err(Error::Dimension("n_a must be positive".into()));
        }
        if !(sigma_b.is_finite() && sigma_b >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_b must be nonnegative and finite, got {sigma_b}"
            )));
        }
        Ok(Self { n_a, n_b, sigma_b })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }
}

/// B factor for an uneven bipartition, `n_b x n_b`, built in blocks
/// around the `n_a`-level Schmidt support:
///
/// - support block (rows and columns < n_a): the partner pattern
///   `-sqrt(p_i/p_j) a_ji`, exactly as in [`partner_operator`];
/// - support rows, complement columns: real Gaussian entries of
///   standard deviation `sigma_b` (the coupling block; these let the
///   extra levels decay into the support without disturbing darkness);
/// - complement rows: zero. The block below the support is forced to
///   vanish by the dark-state condition; the complement-complement
///   block never enters it and is pinned to zero as the simplest
///   choice.
///
/// The resulting jump annihilates the target for every `sigma_b`.
pub fn uneven_partner<R: Rng + ?Sized>(
    a: &CMat,
    spec: &UnevenSpec,
    state: &SchmidtState,
    rng: &mut R,
) -> Result<CMat> {
    let (n_a, n_b) = (spec.n_a, spec.n_b);
    if state.dim_a() != n_a || state.dim_b() != n_b {
        return Err(Error::Dimension(format!(
            "state is {}x{} but the spec wants {}x{}",
            state.dim_a(),
            state.dim_b(),
            n_a,
            n_b
        )));
    }
    if state.p_min() <= PARTNER_WEIGHT_FLOOR {
        return Err(Error::RankDeficient(
            "uneven construction needs full rank on the A side".into(),
        ));
    }
    if a.dim() != (n_a, n_a) {
        return Err(Error::Dimension(format!(
            "A factor must be {n_a}x{n_a}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    verify_finite(a, "A factor")?;
    let p = state.weights();
    let mut b: CMat = Array2::zeros((n_b, n_b));
    for i in 0..n_a {
        for j in 0..n_a {
            b[[i, j]] = -a[[j, i]] * C64::new((p[i] / p[j]).sqrt(), 0.0);
        }
        for j in n_a..n_b {
            let g: f64 = StandardNormal.sample(rng);
            b[[i, j]] = C64::new(g * spec.sigma_b, 0.0);
        }
    }
    Ok(b)
}

/// Compression of the superoperator to the A-compatible block: both
/// Hilbert-space indices restricted to `H_A (x) span{|0..n_a-1>_B}`,
/// the support of the target's B marginal. For an uneven generator
/// this is the `n_a^4`-dimensional effective dynamics of the support;
/// for equal dimensions it returns the full matrix unchanged.
pub fn reduced_superoperator(l: &Lindbladian, n_a: usize) -> Result<CMat> {
    if n_a == 0 || n_a > l.dim_b() {
        return Err(Error::Dimension(format!(
            "cannot keep {n_a} B levels out of {}",
            l.dim_b()
        )));
    }
    let s = build_superoperator(l);
    if n_a == l.dim_b() {
        return Ok(s);
    }
    let n_b = l.dim_b();
    let kept: Vec<usize> = (0..l.dim_a())
        .flat_map(|ia| (0..n_a).map(move |ib| ia * n_b + ib))
        .collect();
    let d = kept.len();
    let mut out: CMat = Array2::zeros((d * d, d * d));
    for (ci, &c) in kept.iter().enumerate() {
        for (ri, &r) in kept.iter().enumerate() {
            for (cj, &c2) in kept.iter().enumerate() {
                for (rj, &r2) in kept.iter().enumerate() {
                    out[[ci * d + ri, cj * d + rj]] = s[[c * l.dim() + r, c2 * l.dim() + r2]];
                }
            }
        }
    }
    Ok(out)
}

/// Output of [`cqa_construct`]: the three Hamiltonian pieces and the
/// assembled generator whose A-to-B coupling is directional.
#[derive(Debug, Clone)]
pub struct CqaConstruction {
    /// Local Hamiltonian on A that closes the reduced dynamics.
    pub h_a: CMat,
    /// Local Hamiltonian on B.
    pub h_b: CMat,
    /// Coupling Hamiltonian `(i/2)(a^+ (x) b - a (x) b^+)`.
    pub h_ab: CMat,
    /// Full generator: jump `a (x) 1 - 1 (x) a` plus the Hamiltonian
    /// `h_a (x) 1 + 1 (x) h_b + h_ab`.
    pub lindbladian: Lindbladian,
}

impl CqaConstruction {
    /// The closed A-side generator `-i[h_a, .] + D[a]`, packaged with a
    /// trivial B factor so the spectrum/steady-state machinery applies.
    pub fn reduced_lindbladian(&self) -> Result<Lindbladian> {
        let a = self.lindbladian.jumps()[0].a().clone();
        let jump = JumpOperator::new(a, Array2::zeros((1, 1)), 1.0)?;
        Lindbladian::new(self.h_a.clone(), vec![jump])
    }
}

/// Builds the directional (cascaded) completion of a detailed-balance
/// jump: Hamiltonians `h_a`, `h_b`, `h_ab` such that the full generator
/// keeps the target state steady while the partial trace over B of its
/// action reproduces the closed A-side generator `-i[h_a, .] + D[a]`.
/// Consequently every eigenvalue of the reduced generator reappears in
/// the full spectrum, and the full gap can sit far below the reduced
/// one.
///
/// Requires `a = Psi a^T Psi^{-1}` (so the partner is `-a`) to 1e-9,
/// and pairwise-distinct Schmidt weights (the off-diagonal `h_a`
/// elements divide by their differences).
pub fn cqa_construct(a: &CMat, state: &SchmidtState) -> Result<CqaConstruction> {
    require_partner_compatible(a, state)?;
    let n = state.dim_a();
    let p = state.weights();
    for m in 0..n {
        for k in (m + 1)..n {
            if (p[m] - p[k]).abs() <= 1e-9 {
                return Err(Error::DegenerateWeights(format!(
                    "weights {m} and {k} differ by {:.3e}; the construction needs \
                     pairwise-distinct Schmidt weights",
                    (p[m] - p[k]).abs()
                )));
            }
        }
    }
    let db_residual = frobenius_norm(&(a - &weighted_transpose(a, state)));
    if db_residual > 1e-9 * frobenius_norm(a).max(1.0) {
        return Err(Error::DetailedBalance(format!(
            "A factor violates the weighted-transpose symmetry by {db_residual:.3e}"
        )));
    }

    let rho_a = Array2::from_diag(&Array1::from_iter(p.iter().map(|&x| C64::new(x, 0.0))));
    let diss = dissipator(a, &rho_a);
    let h_a = Array2::from_shape_fn((n, n), |(r, c)| {
        if r == c {
            C64::new(0.0, 0.0)
        } else {
            I * diss[[r, c]] / C64::new(p[r] - p[c], 0.0)
        }
    });

    // h_b = -1/2 Psi (h_a - (i/2) a^+ a)^T Psi^{-1} + h.c.
    let ada = dagger(a).dot(a);
    let x = &h_a - &ada.mapv(|z| z * I * C64::new(0.5, 0.0));
    let psi = psi_operator(state);
    let psi_inv = {
        let mut m = psi.clone();
        for i in 0..n {
            m[[i, i]] = ONE / psi[[i, i]];
        }
        m
    };
    let y = psi
        .dot(&x.t().to_owned())
        .dot(&psi_inv)
        .mapv(|z| z * C64::new(-0.5, 0.0));
    let h_b = &y + &dagger(&y);

    let b = a.mapv(|z| -z);
    let h_ab = (kron(&dagger(a), &b) - kron(a, &dagger(&b))).mapv(|z| z * I * C64::new(0.5, 0.0));

    let h_full = kron(&h_a, &identity(n)) + kron(&identity(n), &h_b) + &h_ab;
    let jump = JumpOperator::new(a.clone(), b, 1.0)?;
    let lindbladian = Lindbladian::new(h_full, vec![jump])?;
    Ok(CqaConstruction { h_a, h_b, h_ab, lindbladian })
}

/// Joint kernel dimension of a family of jumps: the null space of the
/// stacked full matrices. Generic pairs of engineered jumps intersect
/// in exactly the dark line.
pub fn joint_kernel_dimension(jumps: &[JumpOperator]) -> Result<usize> {
    if jumps.is_empty() {
        return Err(Error::InvalidArgument("no jumps given".into()));
    }
    let d = jumps[0].dim_a() * jumps[0].dim_b();
    let mut stacked: CMat = Array2::zeros((d * jumps.len(), d));
    for (k, j) in jumps.iter().enumerate() {
        let m = j.full_matrix();
        if m.nrows() != d {
            return Err(Error::Dimension("jumps act on different spaces".into()));
        }
        stacked.slice_mut(ndarray::s![k * d..(k + 1) * d, ..]).assign(&m);
    }
    Ok(null_space(&stacked, KERNEL_TOL)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_general, partial_trace_b, vectorize};
    use crate::states::sample_schmidt_fixed_e2;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dark_residual(j: &JumpOperator, state: &SchmidtState) -> f64 {
        let psi = state.state_vector();
        let l = j.full_matrix();
        l.dot(&psi).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn partner_of_uniform_state_is_negative_transpose() {
        let state = SchmidtState::uniform(3);
        let a = Array2::from_shape_fn((3, 3), |(i, j)| c((i + 2 * j) as f64, (i * j) as f64));
        let b = partner_operator(&a, &state).unwrap();
        let expected = a.t().mapv(|z| -z);
        assert!(frobenius_norm(&(&b - &expected)) < 1e-14);
    }

    #[test]
    fn partner_matches_hand_example() {
        let state = SchmidtState::new(2, 2, vec![0.8, 0.2]).unwrap();
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let b = partner_operator(&a, &state).unwrap();
        assert_abs_diff_eq!(b[[1, 0]].re, -0.5, epsilon = 1e-14);
        for (idx, v) in b.indexed_iter() {
            if idx != (1, 0) {
                assert_eq!(v.norm(), 0.0);
            }
        }
        let j = JumpOperator::new(a, b, 1.0).unwrap();
        assert!(dark_residual(&j, &state) <= 1e-10 * max_norm(&j));
    }

    fn max_norm(j: &JumpOperator) -> f64 {
        frobenius_norm(&j.full_matrix()).max(1.0)
    }

    #[test]
    fn partner_rejects_rank_deficient_state() {
        let state = SchmidtState::new(2, 2, vec![1.0, 0.0]).unwrap();
        let a = identity(2);
        match partner_operator(&a, &state) {
            Err(Error::RankDeficient(msg)) => assert!(msg.contains("uneven_partner")),
            other => panic!("expected rank-deficiency error, got {other:?}"),
        }
    }

    #[test]
    fn random_jumps_are_dark_for_all_ensembles() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for n in [2usize, 4, 6] {
            let state = sample_schmidt_fixed_e2(n, 0.05, &mut rng).unwrap();
            for tag in [
                EnsembleTag::Ginibre,
                EnsembleTag::Hermitian,
                EnsembleTag::Symmetric,
                EnsembleTag::DetailedBalance,
            ] {
                let kind = EnsembleKind::new(tag, 1.0).unwrap();
                let j = random_jump(&kind, &state, &mut rng).unwrap();
                assert!(
                    dark_residual(&j, &state) <= 1e-10 * max_norm(&j),
                    "{tag:?} jump is not dark at n={n}"
                );
            }
        }
    }

    #[test]
    fn ensemble_structural_constraints() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let state = sample_schmidt_fixed_e2(4, 0.1, &mut rng).unwrap();
        let herm = random_jump(
            &EnsembleKind::new(EnsembleTag::Hermitian, 0.8).unwrap(),
            &state,
            &mut rng,
        )
        .unwrap();
        assert!(frobenius_norm(&(herm.a() - &dagger(herm.a()))) < 1e-12);

        let db = random_jump(
            &EnsembleKind::new(EnsembleTag::DetailedBalance, 0.8).unwrap(),
            &state,
            &mut rng,
        )
        .unwrap();
        let twisted = weighted_transpose(db.a(), &state);
        assert!(frobenius_norm(&(db.a() - &twisted)) < 1e-10 * frobenius_norm(db.a()).max(1.0));
        // under detailed balance the partner is -a
        assert!(frobenius_norm(&(db.b() + db.a())) < 1e-10 * frobenius_norm(db.a()).max(1.0));
    }

    #[test]
    fn ginibre_second_moment() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let state = SchmidtState::uniform(2);
        let sigma = 0.7;
        let kind = EnsembleKind::ginibre(sigma).unwrap();
        let mut acc = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let j = random_jump(&kind, &state, &mut rng).unwrap();
            acc += j.a().iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
        }
        let mean = acc / draws as f64;
        assert!(
            (mean - sigma * sigma).abs() < 0.03 * sigma * sigma,
            "second moment {mean} vs sigma^2 {}",
            sigma * sigma
        );
    }

    #[test]
    fn kernel_dimension_of_engineered_and_zero_jumps() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let state = sample_schmidt_fixed_e2(3, 0.08, &mut rng).unwrap();
        let kind = EnsembleKind::ginibre(1.0).unwrap();
        let j = random_jump(&kind, &state, &mut rng).unwrap();
        assert!(kernel_dimension(&j).unwrap() >= 3);

        let zero = JumpOperator::new(Array2::zeros((2, 2)), Array2::zeros((2, 2)), 1.0).unwrap();
        assert_eq!(kernel_dimension(&zero).unwrap(), 4);

        let j2 = random_jump(&kind, &state, &mut rng).unwrap();
        assert_eq!(joint_kernel_dimension(&[j, j2]).unwrap(), 1);
    }

    #[test]
    fn uneven_partner_keeps_state_dark_for_any_coupling() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let state = SchmidtState::new(2, 3, vec![0.7, 0.3]).unwrap();
        let a = ginibre_draw(2, 1.0, &mut rng);
        for sigma_b in [0.0, 0.4, 2.0] {
            let spec = UnevenSpec::new(2, 3, sigma_b).unwrap();
            let b = uneven_partner(&a, &spec, &state, &mut rng).unwrap();
            // rows below the support vanish identically
            for jcol in 0..3 {
                assert_eq!(b[[2, jcol]].norm(), 0.0);
            }
            let j = JumpOperator::new(a.clone(), b, 1.0).unwrap();
            assert!(
                dark_residual(&j, &state) <= 1e-10 * max_norm(&j),
                "not dark at sigma_b={sigma_b}"
            );
        }
    }

    #[test]
    fn uneven_coupling_block_statistics() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let state = SchmidtState::new(2, 4, vec![0.6, 0.4]).unwrap();
        let a = ginibre_draw(2, 1.0, &mut rng);
        let spec = UnevenSpec::new(2, 4, 0.5).unwrap();
        let mut acc = 0.0;
        let reps = 4000;
        for _ in 0..reps {
            let b = uneven_partner(&a, &spec, &state, &mut rng).unwrap();
            for i in 0..2 {
                for j in 2..4 {
                    assert_eq!(b[[i, j]].im, 0.0);
                    acc += b[[i, j]].norm_sqr();
                }
            }
        }
        let var = acc / (reps * 4) as f64;
        assert!((var - 0.25).abs() < 0.02, "coupling variance {var} vs 0.25");
    }

    #[test]
    fn reduced_superoperator_equal_dims_is_identity_compression() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let state = sample_schmidt_fixed_e2(2, 0.1, &mut rng).unwrap();
        let kind = EnsembleKind::ginibre(1.0).unwrap();
        let j = random_jump(&kind, &state, &mut rng).unwrap();
        let l = Lindbladian::new(Array2::zeros((4, 4)), vec![j]).unwrap();
        let s = build_superoperator(&l);
        let r = reduced_superoperator(&l, 2).unwrap();
        assert!(frobenius_norm(&(&s - &r)) == 0.0);
    }

    #[test]
    fn reduced_superoperator_ignores_coupling_block() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let state = SchmidtState::new(2, 3, vec![0.65, 0.35]).unwrap();
        let a = ginibre_draw(2, 1.0, &mut rng);
        let build = |sigma_b: f64, rng: &mut ChaCha12Rng| {
            let spec = UnevenSpec::new(2, 3, sigma_b).unwrap();
            let b = uneven_partner(&a, &spec, &state, rng).unwrap();
            let j = JumpOperator::new(a.clone(), b, 1.0).unwrap();
            Lindbladian::new(Array2::zeros((6, 6)), vec![j]).unwrap()
        };
        let r0 = reduced_superoperator(&build(0.0, &mut rng), 2).unwrap();
        let r1 = reduced_superoperator(&build(1.5, &mut rng), 2).unwrap();
        assert!(
            frobenius_norm(&(&r0 - &r1)) < 1e-13 * frobenius_norm(&r0).max(1.0),
            "compressed dynamics should not see the coupling block"
        );
    }

    fn db_draw(state: &SchmidtState, rng: &mut ChaCha12Rng) -> CMat {
        let n = state.dim_a();
        let g = ginibre_draw(n, 1.0, rng);
        let inv_sqrt2 = c(1.0 / 2f64.sqrt(), 0.0);
        let sym = (&g + &g.t().to_owned()).mapv(|z| z * inv_sqrt2);
        (&sym + &weighted_transpose(&sym, state)).mapv(|z| z * inv_sqrt2)
    }

    #[test]
    fn cqa_keeps_target_steady_and_closes_reduced_dynamics() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let state = sample_schmidt_fixed_e2(3, 0.05, &mut rng).unwrap();
        let a = db_draw(&state, &mut rng);
        let cqa = cqa_construct(&a, &state).unwrap();

        let psi = state.state_vector();
        let proj = Array2::from_shape_fn((9, 9), |(i, j)| psi[i] * psi[j].conj());
        let steady_residual = frobenius_norm(&cqa.lindbladian.apply(&proj).unwrap());
        assert!(steady_residual < 1e-12, "steady residual {steady_residual}");

        // partial trace over B intertwines the two generators
        let mut x = Array2::from_shape_fn((9, 9), |(i, j)| {
            c(((i * 5 + j) % 7) as f64 * 0.1, ((i + 3 * j) % 5) as f64 * 0.1)
        });
        x = (&x + &dagger(&x)).mapv(|z| z * c(0.5, 0.0));
        let tr: C64 = (0..9).map(|i| x[[i, i]]).sum();
        x[[0, 0]] += ONE - tr;
        let reduced = cqa.reduced_lindbladian().unwrap();
        let lhs = partial_trace_b(&cqa.lindbladian.apply(&x).unwrap(), 3, 3).unwrap();
        let rhs = reduced.apply(&partial_trace_b(&x, 3, 3).unwrap()).unwrap();
        assert!(frobenius_norm(&(&lhs - &rhs)) < 1e-12);
    }

    #[test]
    fn cqa_reduced_spectrum_embeds_in_full_spectrum() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let state = sample_schmidt_fixed_e2(3, 0.02, &mut rng).unwrap();
        let a = db_draw(&state, &mut rng);
        let cqa = cqa_construct(&a, &state).unwrap();
        let full = eig_general(&build_superoperator(&cqa.lindbladian)).unwrap();
        let reduced = eig_general(&build_superoperator(&cqa.reduced_lindbladian().unwrap())).unwrap();
        for lam in &reduced.values {
            let nearest = full
                .values
                .iter()
                .map(|z| (z - lam).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-7, "reduced eigenvalue {lam} missing from full spectrum");
        }
    }

    #[test]
    fn cqa_diagonal_jump_gives_zero_h_a() {
        let state = SchmidtState::new(3, 3, vec![0.5, 0.3, 0.2]).unwrap();
        let a = Array2::from_diag(&array![c(0.4, 0.0), c(-0.2, 0.0), c(1.1, 0.0)]);
        let cqa = cqa_construct(&a, &state).unwrap();
        assert!(frobenius_norm(&cqa.h_a) < 1e-14);
    }

    #[test]
    fn cqa_rejects_bad_inputs() {
        let state = SchmidtState::new(2, 2, vec![0.8, 0.2]).unwrap();
        let not_db = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        assert!(matches!(
            cqa_construct(&not_db, &state),
            Err(Error::DetailedBalance(_))
        ));
        let degenerate = SchmidtState::uniform(2);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = db_draw(&degenerate, &mut rng);
        assert!(matches!(
            cqa_construct(&a, &degenerate),
            Err(Error::DegenerateWeights(_))
        ));
    }

    #[test]
    fn vectorization_consistency_for_reduced_block() {
        // the compressed matrix must act like rho -> P L(P rho P) P
        let mut rng = ChaCha12Rng::seed_from_u64(57);
        let state = SchmidtState::new(2, 3, vec![0.55, 0.45]).unwrap();
        let a = ginibre_draw(2, 1.0, &mut rng);
        let spec = UnevenSpec::new(2, 3, 0.8).unwrap();
        let b = uneven_partner(&a, &spec, &state, &mut rng).unwrap();
        let j = JumpOperator::new(a, b, 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((6, 6)), vec![j]).unwrap();
        let r = reduced_superoperator(&l, 2).unwrap();

        // embed a support-only density matrix, act, compress
        let kept: Vec<usize> = vec![0, 1, 3, 4];
        let mut rho_small = Array2::<C64>::zeros((4, 4));
        rho_small[[0, 0]] = c(0.4, 0.0);
        rho_small[[3, 3]] = c(0.6, 0.0);
        rho_small[[0, 3]] = c(0.1, 0.05);
        rho_small[[3, 0]] = c(0.1, -0.05);
        let mut rho_big = Array2::<C64>::zeros((6, 6));
        for (i, &gi) in kept.iter().enumerate() {
            for (j2, &gj) in kept.iter().enumerate() {
                rho_big[[gi, gj]] = rho_small[[i, j2]];
            }
        }
        let moved = l.apply(&rho_big).unwrap();
        let mut compressed = Array2::<C64>::zeros((4, 4));
        for (i, &gi) in kept.iter().enumerate() {
            for (j2, &gj) in kept.iter().enumerate() {
                compressed[[i, j2]] = moved[[gi, gj]];
            }
        }
        let via_matrix = r.dot(&vectorize(&rho_small));
        let direct = vectorize(&compressed);
        let diff: f64 = via_matrix
            .iter()
            .zip(direct.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-12);
    }
}
