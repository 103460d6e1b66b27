//! Structured spin-chain models whose boundary dissipation stabilizes
//! an entangled rainbow state: two XXZ chains with sign-flipped ZZ
//! couplings, and a two-leg ladder whose rung coupling keeps the same
//! steady state. Both use a pair of two-mode-squeezing jumps acting on
//! the first site of each chain.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::linalg::{identity, kron, CMat, CVec};
use crate::lindblad::{JumpOperator, Lindbladian, SpectrumResult};
use crate::{Error, Result};

/// Largest supported chain length; n = 3 already means a
/// 4096-dimensional superoperator per spectrum call.
pub const MAX_CHAIN_LEN: usize = 3;

/// Fraction of the median decay rate below which a mode counts as
/// midgap. The bulk/midgap separation spans decades, so counts are
/// insensitive to this choice over roughly [0.02, 0.3].
pub const DEFAULT_BULK_FRACTION: f64 = 0.1;

/// Two n-qubit chains with hopping `j`, ZZ coupling `j_z`, and
/// squeezing amplitudes `u`, `v` (normalized, `u^2 + v^2 = 1`).
#[derive(Debug, Clone, Copy)]
pub struct ChainSpec {
    n: usize,
    j: f64,
    j_z: f64,
    u: f64,
    v: f64,
}

impl ChainSpec {
    pub fn new(n: usize, j: f64, j_z: f64, u: f64, v: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("need at least one qubit per chain".into()));
        }
        if n > MAX_CHAIN_LEN {
            return Err(Error::InvalidArgument(format!(
                "chain length {n} exceeds the supported maximum of {MAX_CHAIN_LEN}"
            )));
        }
        for (x, name) in [(j, "j"), (j_z, "j_z"), (u, "u"), (v, "v")] {
            if !x.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        if (u * u + v * v - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(format!(
                "squeezing amplitudes must satisfy u^2 + v^2 = 1, got {}",
                u * u + v * v
            )));
        }
        Ok(Self { n, j, j_z, u, v })
    }

    /// Convenience constructor fixing `u = sqrt(1 - v^2)`.
    pub fn from_v(n: usize, j: f64, j_z: f64, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "v must lie in [0, 1], got {v}"
            )));
        }
        Self::new(n, j, j_z, (1.0 - v * v).sqrt(), v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    pub fn j_z(&self) -> f64 {
        self.j_z
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Hilbert dimension of one chain.
    pub fn chain_dim(&self) -> usize {
        1 << self.n
    }
}

fn sigma_plus() -> CMat {
    let mut m = Array2::zeros((2, 2));
    m[[1, 0]] = C64::new(1.0, 0.0);
    m
}

fn sigma_minus() -> CMat {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = C64::new(1.0, 0.0);
    m
}

fn sigma_x() -> CMat {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = C64::new(1.0, 0.0);
    m[[1, 0]] = C64::new(1.0, 0.0);
    m
}

fn sigma_y() -> CMat {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = C64::new(0.0, -1.0);
    m[[1, 0]] = C64::new(0.0, 1.0);
    m
}

fn sigma_z() -> CMat {
    let mut m: CMat = Array2::zeros((2, 2));
    m[[0, 0]] = C64::new(1.0, 0.0);
    m[[1, 1]] = C64::new(-1.0, 0.0);
    m
}

/// Single-site operator on an n-qubit register; site 1 is the most
/// significant bit.
fn site_op(n: usize, site: usize, op: &CMat) -> CMat {
    let left = 1 << (site - 1);
    let right = 1 << (n - site);
    kron(&kron(&identity(left), op), &identity(right))
}

/// Nearest-neighbor chain Hamiltonian
/// `sum_i j (s+_i s-_{i+1} + h.c.) + jz_signed sz_i sz_{i+1}`.
fn chain_hamiltonian(n: usize, j: f64, jz_signed: f64) -> CMat {
    let d = 1 << n;
    let mut h: CMat = Array2::zeros((d, d));
    let (sp, sm, sz) = (sigma_plus(), sigma_minus(), sigma_z());
    for i in 1..n {
        let hop = site_op(n, i, &sp).dot(&site_op(n, i + 1, &sm));
        h = h + hop.mapv(|z| z * C64::new(j, 0.0));
        let hop_hc = site_op(n, i, &sm).dot(&site_op(n, i + 1, &sp));
        h = h + hop_hc.mapv(|z| z * C64::new(j, 0.0));
        let zz = site_op(n, i, &sz).dot(&site_op(n, i + 1, &sz));
        h = h + zz.mapv(|z| z * C64::new(jz_signed, 0.0));
    }
    h
}

fn boundary_jumps(spec: &ChainSpec) -> Vec<JumpOperator> {
    let n = spec.n();
    let us = C64::new(spec.u(), 0.0);
    let vs = C64::new(spec.v(), 0.0);
    let sm1 = site_op(n, 1, &sigma_minus());
    let sp1 = site_op(n, 1, &sigma_plus());
    vec![
        JumpOperator::new(sm1.mapv(|z| z * us), sp1.mapv(|z| z * vs), 1.0).unwrap(),
        JumpOperator::new(sp1.mapv(|z| z * vs), sm1.mapv(|z| z * us), 1.0).unwrap(),
    ]
}

/// Two XXZ chains (ZZ sign +1 on A, -1 on B) with two-mode-squeezing
/// dissipation on their first sites.
pub fn xxz_lindbladian(spec: &ChainSpec) -> Result<Lindbladian> {
    let d = spec.chain_dim();
    let ha = chain_hamiltonian(spec.n(), spec.j(), spec.j_z());
    let hb = chain_hamiltonian(spec.n(), spec.j(), -spec.j_z());
    let h = kron(&ha, &identity(d)) + kron(&identity(d), &hb);
    Lindbladian::new(h, boundary_jumps(spec))
}

/// Two-leg ladder: XX hopping along each leg plus an anisotropic XXZ
/// coupling across every rung, with the same boundary dissipation.
/// The rung term acts on the rainbow state as `n * j_z` times the
/// identity, so the steady state is unchanged while the Hamiltonian
/// mixes the legs.
pub fn ladder_lindbladian(spec: &ChainSpec) -> Result<Lindbladian> {
    let n = spec.n();
    let d = spec.chain_dim();
    let leg = chain_hamiltonian(n, spec.j(), 0.0);
    let mut h = kron(&leg, &identity(d)) + kron(&identity(d), &leg);
    let (sx, sy, sz) = (sigma_x(), sigma_y(), sigma_z());
    for i in 1..=n {
        let xx = kron(&site_op(n, i, &sx), &site_op(n, i, &sx));
        let yy = kron(&site_op(n, i, &sy), &site_op(n, i, &sy));
        let zz = kron(&site_op(n, i, &sz), &site_op(n, i, &sz));
        h = h + (xx + yy).mapv(|z| z * C64::new(spec.j(), 0.0));
        h = h + zz.mapv(|z| z * C64::new(spec.j_z(), 0.0));
    }
    Lindbladian::new(h, boundary_jumps(spec))
}

/// The rainbow state `prod_i [ sqrt(1-v^2)|00> + (-1)^i v |11> ]`
/// pairing site i of chain A with site i of chain B, in the A-major
/// basis layout. Its Schmidt weights across the A|B cut are n-fold
/// products of `(1 - v^2, v^2)`.
pub fn rainbow_state(n: usize, v: f64) -> Result<CVec> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one rung".into()));
    }
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("v must lie in [0, 1], got {v}")));
    }
    let d = 1usize << n;
    let q0 = (1.0 - v * v).sqrt();
    let mut out: CVec = Array1::zeros(d * d);
    for bits in 0..d {
        let mut amp = 1.0;
        for site in 1..=n {
            let occupied = bits >> (n - site) & 1 == 1;
            amp *= if occupied {
                if site % 2 == 1 {
                    -v
                } else {
                    v
                }
            } else {
                q0
            };
        }
        out[bits * d + bits] = C64::new(amp, 0.0);
    }
    Ok(out)
}

/// Squeezing amplitude whose rainbow state realizes a requested purity
/// excess: inverts `delta_e2 = ((1-v^2)^2 + v^4)^n - 2^{-n}`.
pub fn v_for_delta_e2(n: usize, delta_e2: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one rung".into()));
    }
    let inv_n = (0.5f64).powi(n as i32);
    let max = 1.0 - inv_n;
    if !(0.0..=max).contains(&delta_e2) {
        return Err(Error::InvalidArgument(format!(
            "delta_e2 for {n} rungs must lie in [0, {max}], got {delta_e2}"
        )));
    }
    let q = (delta_e2 + inv_n).powf(1.0 / n as f64);
    let v2 = (1.0 - (2.0 * q - 1.0).max(0.0).sqrt()) / 2.0;
    Ok(v2.max(0.0).sqrt())
}

/// Number of anomalously slow decay modes: non-steady eigenvalues
/// whose decay rate sits below `bulk_threshold_fraction` times the
/// median rate. The steady modes (leading entries of the sorted
/// spectrum) are excluded.
pub fn count_midgap(spectrum: &SpectrumResult, bulk_threshold_fraction: f64) -> Result<usize> {
    if !(bulk_threshold_fraction > 0.0 && bulk_threshold_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bulk threshold fraction must lie in (0, 1), got {bulk_threshold_fraction}"
        )));
    }
    let mut rates: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .skip(spectrum.steady_count)
        .map(|z| (-z.re).max(0.0))
        .collect();
    if rates.is_empty() {
        return Ok(0);
    }
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if rates.len() % 2 == 1 {
        rates[rates.len() / 2]
    } else {
        0.5 * (rates[rates.len() / 2 - 1] + rates[rates.len() / 2])
    };
    let cut = bulk_threshold_fraction * median;
    Ok(rates.iter().filter(|&&r| r < cut).count())
}
