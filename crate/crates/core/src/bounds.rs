//! Speed limits on relaxation toward entangled steady states, and the
//! ensemble-level predictions they calibrate against.
//!
//! All rates share the same ingredients: the per-jump scale
//! `kappa_mu = |max element of the scaled A factor|^2`, the Schmidt
//! weights of the target, and its purity measures. The central
//! statement is that fidelity toward the target cannot grow faster
//! than a rate proportional to `1 - E_2`, which collapses as the
//! target approaches maximal entanglement.

use crate::engineer::UnevenSpec;
use crate::linalg::{max_abs, spectral_norm, CMat};
use crate::lindblad::{strong_symmetry_check, Lindbladian};
use crate::states::{measures, SchmidtState};
use crate::{Error, Result};

/// Weight floor below which the `1/p_min` rates are refused.
pub const RATE_WEIGHT_FLOOR: f64 = 1e-12;

fn require_matching(l: &Lindbladian, state: &SchmidtState) -> Result<()> {
    if l.dim_a() != state.dim_a() || l.dim_b() != state.dim_b() {
        return Err(Error::Dimension(format!(
            "generator acts on {}x{} but the state lives on {}x{}",
            l.dim_a(),
            l.dim_b(),
            state.dim_a(),
            state.dim_b()
        )));
    }
    Ok(())
}

fn require_square(state: &SchmidtState) -> Result<usize> {
    if state.dim_a() != state.dim_b() {
        return Err(Error::Dimension(
            "this rate assumes equal factor dimensions".into(),
        ));
    }
    Ok(state.dim_a())
}

fn require_full_rank(state: &SchmidtState, redirect: &str) -> Result<()> {
    if state.p_min() <= RATE_WEIGHT_FLOOR {
        return Err(Error::RankDeficient(format!(
            "rate diverges for rank-deficient states (p_min = {:.3e}); use {redirect}",
            state.p_min()
        )));
    }
    Ok(())
}

/// Fidelity growth-rate bound for full-rank targets:
/// `M kappa_bar sqrt(2) (N-1) p_min^{-1} (1 - E_2)`.
///
/// Vanishes at maximal entanglement, making highly entangled targets
/// slow to reach from any initial state.
pub fn gamma_max(l: &Lindbladian, state: &SchmidtState) -> Result<f64> {
    require_matching(l, state)?;
    let n = require_square(state)?;
    require_full_rank(state, "gamma_max_prime")?;
    let m = l.jumps().len() as f64;
    let kbar = l.mean_jump_rate();
    let e2 = measures(state).scaled_e2;
    Ok(m * kbar * 2f64.sqrt() * (n as f64 - 1.0) / state.p_min() * (1.0 - e2))
}

/// Rank-robust variant of [`gamma_max`]:
/// `sqrt(2(N^3 - N^2)) [ (sum_mu |A_mu|)^2 + (sum_mu |B_mu|)^2 ] (1 - E_2)^{1/2}`,
/// where `|A_mu|` is the largest element magnitude of the scaled factor.
pub fn gamma_max_prime(l: &Lindbladian, state: &SchmidtState) -> Result<f64> {
    require_matching(l, state)?;
    let n = require_square(state)? as f64;
    let sum_a: f64 = l.jumps().iter().map(|j| max_abs(&j.scaled_a())).sum();
    let sum_b: f64 = l.jumps().iter().map(|j| max_abs(&j.scaled_b())).sum();
    let e2 = measures(state).scaled_e2;
    Ok((2.0 * (n.powi(3) - n.powi(2))).sqrt()
        * (sum_a * sum_a + sum_b * sum_b)
        * (1.0 - e2).max(0.0).sqrt())
}

/// Growth-rate bound for uneven factor dimensions:
/// `sqrt(2) N_A p_min^{-1} (sum_mu kappa_mu) dE_2` plus the squared
/// operator norms of each jump's coupling block (the B-factor entries
/// that feed the extra levels into the Schmidt support). The second
/// term survives at maximal entanglement, which is what makes maximal
/// targets reachable when `n_b > n_a`.
pub fn gamma_uneven(l: &Lindbladian, state: &SchmidtState, spec: &UnevenSpec) -> Result<f64> {
    require_matching(l, state)?;
    if spec.n_a() != l.dim_a() || spec.n_b() != l.dim_b() {
        return Err(Error::Dimension("spec does not match the generator".into()));
    }
    require_full_rank(state, "a higher-rank target")?;
    let n_a = spec.n_a();
    let sum_kappa: f64 = l.jumps().iter().map(|j| j.peak_rate()).sum();
    let de2 = measures(state).delta_e2;
    let base = 2f64.sqrt() * n_a as f64 / state.p_min() * sum_kappa * de2;

    let mut coupling = 0.0;
    for j in l.jumps() {
        let b = j.scaled_b();
        if b.ncols() > n_a {
            let block: CMat = b.slice(ndarray::s![..n_a, n_a..]).to_owned();
            let top = spectral_norm(&block)?;
            coupling += top * top;
        }
    }
    Ok(base + coupling)
}

/// Haar-averaged fidelity rate toward the target, computed along two
/// independent routes that must agree (their mismatch flags a
/// generator that does not actually hold the target dark in its
/// Schmidt frame).
#[derive(Debug, Clone, Copy)]
pub struct HaarRate {
    /// Closed-form double sum
    /// `(1/D) sum_mu sum_jk |(A_mu)_jk|^2 (p_j - p_k)^2 / p_j`.
    pub rate: f64,
    /// Matrix route `(1/D) tr(L^+ applied to the target projector)`.
    pub generator_route: f64,
}

/// Exact Haar average of the instantaneous fidelity rate over initial
/// pure states, `D = N^2` the full dimension. Requires a full-rank
/// target and jumps expressed in its Schmidt frame.
pub fn haar_rate_exact(l: &Lindbladian, state: &SchmidtState) -> Result<HaarRate> {
    require_matching(l, state)?;
    let n = require_square(state)?;
    require_full_rank(state, "a full-rank target")?;
    let d = (n * n) as f64;
    let p = state.weights();

    let mut double_sum = 0.0;
    for jop in l.jumps() {
        let a = jop.scaled_a();
        for j in 0..n {
            for k in 0..n {
                let diff = p[j] - p[k];
                double_sum += a[[j, k]].norm_sqr() * diff * diff / p[j];
            }
        }
    }
    let rate = double_sum / d;

    // independent route: total absorbed weight of the target projector
    let psi = state.state_vector();
    let mut absorbed = 0.0;
    for jop in l.jumps() {
        let lf = jop.full_matrix();
        let ld = crate::linalg::dagger(&lf);
        let up: f64 = ld.dot(&psi).iter().map(|z| z.norm_sqr()).sum();
        let down: f64 = lf.dot(&psi).iter().map(|z| z.norm_sqr()).sum();
        absorbed += up - down;
    }
    let generator_route = absorbed / d;

    let scale = rate.abs().max(generator_route.abs()).max(1e-300);
    if (rate - generator_route).abs() > 1e-10 * scale.max(1e-10) {
        return Err(Error::InvalidArgument(format!(
            "Haar-rate routes disagree ({rate:.6e} vs {generator_route:.6e}); \
             the jumps are not dark for this state in its Schmidt frame"
        )));
    }
    Ok(HaarRate { rate, generator_route })
}

/// Closed-form bound on the Haar-averaged fidelity rate:
/// `2 M kappa_bar (N-1)/N^2 p_min^{-1} (1 - E_2)`.
pub fn haar_bound(l: &Lindbladian, state: &SchmidtState) -> Result<f64> {
    require_matching(l, state)?;
    let n = require_square(state)? as f64;
    require_full_rank(state, "a full-rank target")?;
    let m = l.jumps().len() as f64;
    let kbar = l.mean_jump_rate();
    let e2 = measures(state).scaled_e2;
    Ok(2.0 * m * kbar * (n - 1.0) / (n * n) / state.p_min() * (1.0 - e2))
}

/// Ensemble-averaged predictions for engineered random generators with
/// `m` jumps of element deviation `sigma` holding a target at purity
/// excess `delta_e2`.
#[derive(Debug, Clone, Copy)]
pub struct EnsemblePredictions {
    /// Mean dissipative gap `2 (m-1) sigma^2 delta_e2` (zero for a
    /// single jump, whose steady space stays degenerate).
    pub mean_gap: f64,
    /// Gap variance `(m-1) sigma^4 delta_e2^2` (unit proportionality
    /// constant; the linear scaling is the prediction, the prefactor a
    /// convention).
    pub var_gap: f64,
    /// Mean Haar fidelity rate `2 m sigma^2 delta_e2`.
    pub mean_haar_rate: f64,
}

pub fn ensemble_predictions(
    n: usize,
    m: usize,
    sigma: f64,
    delta_e2: f64,
) -> Result<EnsemblePredictions> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least a qubit pair".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("need at least one jump".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) || !(delta_e2.is_finite() && delta_e2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "sigma must be positive, delta_e2 nonnegative".into(),
        ));
    }
    let s2 = sigma * sigma;
    let mm = (m - 1) as f64;
    Ok(EnsemblePredictions {
        mean_gap: 2.0 * mm * s2 * delta_e2,
        var_gap: mm * s2 * s2 * delta_e2 * delta_e2,
        mean_haar_rate: 2.0 * m as f64 * s2 * delta_e2,
    })
}

/// Lower bound on the mixing time from a fidelity growth rate:
/// `(1 - epsilon)/gamma`. A vanishing rate (maximal-entanglement
/// target) makes the state unreachable, returned as infinity.
pub fn mixing_lower_bound(gamma: f64, epsilon: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be finite and nonnegative, got {gamma}"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    if gamma == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - epsilon) / gamma)
}

/// First-order splitting rate of the near-degenerate steady space: the
/// total absorbed weight of the target projector, `D` times the Haar
/// rate. The identity between the two is asserted; per near-steady
/// mode this spreads over the `D - 1` split directions.
pub fn perturbative_gap(l: &Lindbladian, state: &SchmidtState) -> Result<f64> {
    let n = require_square(state)?;
    let hr = haar_rate_exact(l, state)?;
    let d = (n * n) as f64;
    // the rate struct already certified the two routes agree
    Ok(d * hr.generator_route)
}

/// Every bound and prediction for one generator/target pair, as used
/// by sweep outputs.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub gamma_max: f64,
    pub gamma_max_prime: f64,
    /// Present only for uneven factor dimensions.
    pub gamma_uneven: Option<f64>,
    pub haar_bound: f64,
    pub haar_rate_exact: f64,
    pub mixing_lower: f64,
    /// Total absorbed weight of the target projector; zero exactly
    /// when the target generates a strong symmetry.
    pub symmetry_error: f64,
    pub ensemble_mean_gap: f64,
    pub ensemble_var_gap: f64,
}

/// Evaluates the full set of bounds for a generator engineered around
/// `state`, with `sigma` the ensemble deviation used for the
/// predictions and `epsilon` the mixing threshold.
pub fn bound_report(
    l: &Lindbladian,
    state: &SchmidtState,
    epsilon: f64,
    sigma: f64,
) -> Result<BoundReport> {
    let gm = gamma_max(l, state)?;
    let gmp = gamma_max_prime(l, state)?;
    let gu = if l.dim_b() > l.dim_a() {
        let spec = UnevenSpec::new(l.dim_a(), l.dim_b(), 0.0)?;
        Some(gamma_uneven(l, state, &spec)?)
    } else {
        None
    };
    let hb = haar_bound(l, state)?;
    let hr = haar_rate_exact(l, state)?;
    let ml = mixing_lower_bound(gm, epsilon)?;
    let sym = strong_symmetry_check(l, &state.state_vector())?.symmetry_error;
    let preds = ensemble_predictions(
        state.dim_a(),
        l.jumps().len().max(1),
        sigma,
        measures(state).delta_e2.max(0.0),
    )?;
    Ok(BoundReport {
        gamma_max: gm,
        gamma_max_prime: gmp,
        gamma_uneven: gu,
        haar_bound: hb,
        haar_rate_exact: hr.rate,
        mixing_lower: ml,
        symmetry_error: sym,
        ensemble_mean_gap: preds.mean_gap,
        ensemble_var_gap: preds.var_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engineer::{partner_operator, random_jump, EnsembleKind};
    use crate::lindblad::JumpOperator;
    use crate::states::sample_schmidt_fixed_e2;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hand_instance() -> (Lindbladian, SchmidtState) {
        let state = SchmidtState::new(2, 2, vec![0.8, 0.2]).unwrap();
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let b = partner_operator(&a, &state).unwrap();
        let j = JumpOperator::new(a, b, 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((4, 4)), vec![j]).unwrap();
        (l, state)
    }

    #[test]
    fn gamma_max_hand_value() {
        let (l, state) = hand_instance();
        let g = gamma_max(&l, &state).unwrap();
        assert_abs_diff_eq!(g, 2f64.sqrt() * 5.0 * 0.36, epsilon = 1e-12);
    }

    #[test]
    fn gamma_max_vanishes_at_maximal_entanglement() {
        let state = SchmidtState::uniform(4);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let j = random_jump(&EnsembleKind::ginibre(1.0).unwrap(), &state, &mut rng).unwrap();
        let l = Lindbladian::new(Array2::zeros((16, 16)), vec![j]).unwrap();
        assert!(gamma_max(&l, &state).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gamma_max_rejects_rank_deficient() {
        let state = SchmidtState::new(2, 2, vec![1.0, 0.0]).unwrap();
        let j = JumpOperator::new(Array2::zeros((2, 2)), Array2::zeros((2, 2)), 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((4, 4)), vec![j]).unwrap();
        match gamma_max(&l, &state) {
            Err(Error::RankDeficient(msg)) => assert!(msg.contains("gamma_max_prime")),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn gamma_max_prime_hand_value_and_scaling() {
        let state = SchmidtState::new(2, 2, vec![1.0, 0.0]).unwrap();
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let b = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let j = JumpOperator::new(a, b, 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((4, 4)), vec![j]).unwrap();
        let g = gamma_max_prime(&l, &state).unwrap();
        assert_abs_diff_eq!(g, 8f64.sqrt() * 2.0, epsilon = 1e-12);

        // (1 - E_2)^(1/2) functional form; s2 solves p^2 + (1-p)^2 = 0.5625
        // so that 1 - E_2 halves relative to s1
        let p2 = (2.0 + 0.5f64.sqrt()) / 4.0;
        let s1 = SchmidtState::new(2, 2, vec![0.75, 0.25]).unwrap();
        let s2 = SchmidtState::new(2, 2, vec![p2, 1.0 - p2]).unwrap();
        let m1 = measures(&s1);
        let m2 = measures(&s2);
        assert_abs_diff_eq!(1.0 - m2.scaled_e2, (1.0 - m1.scaled_e2) / 2.0, epsilon = 1e-12);
        let g1 = gamma_max_prime(&l, &s1).unwrap();
        let g2 = gamma_max_prime(&l, &s2).unwrap();
        assert_abs_diff_eq!(g2, g1 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gamma_uneven_reduces_and_adds_coupling_norm() {
        let state = SchmidtState::new(2, 4, vec![0.7, 0.3]).unwrap();
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        // partner pattern on the support, explicit coupling block
        let mut b = Array2::<C64>::zeros((4, 4));
        b[[1, 0]] = c(-(0.3f64 / 0.7).sqrt(), 0.0);
        let spec = UnevenSpec::new(2, 4, 0.0).unwrap();
        let j = JumpOperator::new(a.clone(), b.clone(), 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((8, 8)), vec![j]).unwrap();
        let base = gamma_uneven(&l, &state, &spec).unwrap();
        let de2 = measures(&state).delta_e2;
        assert_abs_diff_eq!(base, 2f64.sqrt() * 2.0 / 0.3 * de2, epsilon = 1e-12);

        b[[0, 2]] = c(3.0, 0.0);
        b[[1, 3]] = c(4.0, 0.0);
        let j = JumpOperator::new(a, b, 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((8, 8)), vec![j]).unwrap();
        let with_block = gamma_uneven(&l, &state, &spec).unwrap();
        assert_abs_diff_eq!(with_block - base, 16.0, epsilon = 1e-12);
    }

    #[test]
    fn haar_rate_hand_value_and_route_agreement() {
        let (l, state) = hand_instance();
        let hr = haar_rate_exact(&l, &state).unwrap();
        assert_abs_diff_eq!(hr.rate, 0.45 / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hr.generator_route, hr.rate, epsilon = 1e-14);
    }

    #[test]
    fn haar_rate_rejects_non_dark_jumps() {
        let state = SchmidtState::new(2, 2, vec![0.8, 0.2]).unwrap();
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let j = JumpOperator::new(a, Array2::zeros((2, 2)), 1.0).unwrap();
        let l = Lindbladian::new(Array2::zeros((4, 4)), vec![j]).unwrap();
        assert!(haar_rate_exact(&l, &state).is_err());
    }

    #[test]
    fn haar_bound_hand_value_and_dominance() {
        let (l, state) = hand_instance();
        assert_abs_diff_eq!(haar_bound(&l, &state).unwrap(), 0.9, epsilon = 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for n in [2usize, 4] {
            for _ in 0..10 {
                let state = sample_schmidt_fixed_e2(n, 0.05, &mut rng).unwrap();
                let kind = EnsembleKind::ginibre(1.0).unwrap();
                let jumps = vec![
                    random_jump(&kind, &state, &mut rng).unwrap(),
                    random_jump(&kind, &state, &mut rng).unwrap(),
                ];
                let l = Lindbladian::new(Array2::zeros((n * n, n * n)), jumps).unwrap();
                let hr = haar_rate_exact(&l, &state).unwrap();
                let hb = haar_bound(&l, &state).unwrap();
                assert!(hr.rate <= hb * (1.0 + 1e-12), "rate {} > bound {}", hr.rate, hb);
            }
        }
    }

    #[test]
    fn ensemble_prediction_values() {
        let p = ensemble_predictions(4, 1, 1.0, 1e-3).unwrap();
        assert_eq!(p.mean_gap, 0.0);
        let p = ensemble_predictions(4, 2, 1.0, 1e-3).unwrap();
        assert_abs_diff_eq!(p.mean_gap, 2e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(p.mean_haar_rate, 4e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(p.var_gap, 1e-6, epsilon = 1e-18);
    }

    #[test]
    fn mixing_lower_bound_edges() {
        assert_eq!(mixing_lower_bound(2.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mixing_lower_bound(2f64.sqrt() * 5.0 * 0.36, 0.5).unwrap(),
            0.5 / (2f64.sqrt() * 5.0 * 0.36),
            epsilon = 1e-12
        );
        assert!(mixing_lower_bound(0.0, 0.5).unwrap().is_infinite());
        assert!(mixing_lower_bound(-1.0, 0.5).is_err());
        assert!(mixing_lower_bound(1.0, 1.5).is_err());
    }

    #[test]
    fn perturbative_gap_equals_symmetry_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let state = sample_schmidt_fixed_e2(3, 0.01, &mut rng).unwrap();
        let kind = EnsembleKind::ginibre(1.0).unwrap();
        let jumps = vec![
            random_jump(&kind, &state, &mut rng).unwrap(),
            random_jump(&kind, &state, &mut rng).unwrap(),
        ];
        let l = Lindbladian::new(Array2::zeros((9, 9)), jumps).unwrap();
        let pg = perturbative_gap(&l, &state).unwrap();
        let sym = strong_symmetry_check(&l, &state.state_vector())
            .unwrap()
            .symmetry_error;
        assert_abs_diff_eq!(pg, sym, epsilon = 1e-12 * pg.abs().max(1.0));
        assert!(pg >= 0.0);
    }

    #[test]
    fn perturbative_gap_per_mode_tracks_the_measured_gap() {
        // The total leak rate spreads over the N^2 - 1 slow directions.
        // For a qubit pair (three slow modes) the per-mode share stays
        // within a factor of 3 of the true gap deep in the perturbative
        // regime; at larger N the minimum over many modes drifts lower.
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for trial in 0..5 {
            let state = sample_schmidt_fixed_e2(2, 1e-3, &mut rng).unwrap();
            let kind = EnsembleKind::ginibre(1.0).unwrap();
            let jumps = vec![
                random_jump(&kind, &state, &mut rng).unwrap(),
                random_jump(&kind, &state, &mut rng).unwrap(),
            ];
            let l = Lindbladian::new(Array2::zeros((4, 4)), jumps).unwrap();
            let per_mode = perturbative_gap(&l, &state).unwrap() / 3.0;
            let gap = crate::lindblad::spectrum(&l).unwrap().gap;
            assert!(
                per_mode <= 3.0 * gap && gap <= 3.0 * per_mode,
                "trial {trial}: per-mode rate {per_mode:.3e} vs measured gap {gap:.3e}"
            );
        }
    }

    #[test]
    fn bound_report_is_nonnegative_and_consistent() {
        let (l, state) = hand_instance();
        let r = bound_report(&l, &state, 0.25, 1.0).unwrap();
        for v in [
            r.gamma_max,
            r.gamma_max_prime,
            r.haar_bound,
            r.haar_rate_exact,
            r.mixing_lower,
            r.symmetry_error,
            r.ensemble_mean_gap,
            r.ensemble_var_gap,
        ] {
            assert!(v >= 0.0);
        }
        assert!(r.gamma_uneven.is_none());
        assert_abs_diff_eq!(r.gamma_max, 2f64.sqrt() * 5.0 * 0.36, epsilon = 1e-12);
        assert!(r.haar_rate_exact <= r.haar_bound);
    }
}
