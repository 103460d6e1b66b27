//! Experiment execution: seeded parallel sweeps, CSV emission, and the
//! JSON sidecar.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use forge_core::bounds::{
    bound_report, ensemble_predictions, gamma_uneven, haar_bound, haar_rate_exact,
};
use forge_core::engineer::{
    cqa_construct, random_jump, uneven_partner, EnsembleKind, UnevenSpec,
};
use forge_core::linalg::frobenius_norm;
use forge_core::lindblad::{
    fidelity_rate, slow_spectrum_with_tol, spectrum_with_tol, JumpOperator, Lindbladian,
    SpectrumResult,
};
use forge_core::models::{
    count_midgap, ladder_lindbladian, rainbow_state, v_for_delta_e2, xxz_lindbladian,
    ChainSpec,
};
use forge_core::states::{measures, sample_schmidt_fixed_e2, SchmidtState};

use crate::config::{echo_json, ChainModel, Config, Kind};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-realization seed, independent of worker count and scheduling:
/// two splitmix64 rounds fold the target and realization indices into
/// the master seed.
pub fn sub_seed(master: u64, target_index: usize, realization_index: usize) -> u64 {
    let t = splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(target_index as u64 + 1)));
    splitmix64(t.wrapping_add(GOLDEN.wrapping_mul(realization_index as u64 + 1)))
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    fn write_to(&self, out: &mut String) {
        match self {
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Float(x) => {
                let _ = write!(out, "{x:.16e}");
            }
        }
    }
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                cell.write_to(&mut s);
            }
            s.push('\n');
        }
        s
    }
}

pub struct RunSummary {
    pub total_rows: usize,
    pub failed_rows: usize,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

pub fn execute(cfg: &Config, workers: Option<usize>) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("building the worker pool")?;

    let (table, summary, failed) = pool.install(|| dispatch(cfg))?;

    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let stem = cfg.kind.name().replace('-', "_");
    let csv_path = cfg.out.join(format!("{stem}.csv"));
    let json_path = cfg.out.join(format!("{stem}.json"));

    std::fs::write(&csv_path, table.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let sidecar = serde_json::json!({
        "config": echo_json(cfg),
        "versions": { "forge": env!("CARGO_PKG_VERSION") },
        "summary": summary,
    });
    std::fs::write(&json_path, format!("{:#}\n", sidecar))
        .with_context(|| format!("writing {}", json_path.display()))?;

    Ok(RunSummary {
        total_rows: table.rows.len(),
        failed_rows: failed,
        csv_path,
        json_path,
    })
}

fn dispatch(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    match cfg.kind {
        Kind::GapSweep => gap_sweep(cfg),
        Kind::BoundAudit => bound_audit(cfg),
        Kind::HaarRate => haar_rate(cfg),
        Kind::Cqa => cqa(cfg),
        Kind::Uneven => uneven(cfg),
        Kind::Xxz => chain(cfg, ChainModel::Xxz),
        Kind::Ladder => chain(cfg, ChainModel::Ladder),
        Kind::Spectrum => model_spectrum(cfg),
    }
}

/// Fans (target, realization) cells over the pool. A failing cell
/// becomes a NaN-flagged row (seed and target stay legible); the sweep
/// continues.
fn sweep<F>(cfg: &Config, width: usize, cell: F) -> (Vec<Vec<Cell>>, usize)
where
    F: Fn(u64, f64, &mut ChaCha12Rng) -> Result<Vec<Cell>> + Sync,
{
    use rayon::prelude::*;
    let targets = &cfg.delta_e2;
    let jobs: Vec<(usize, usize)> = (0..targets.len())
        .flat_map(|t| (0..cfg.samples).map(move |r| (t, r)))
        .collect();
    let rows: Vec<(usize, usize, Vec<Cell>, bool)> = jobs
        .par_iter()
        .map(|&(t, r)| {
            let seed = sub_seed(cfg.seed, t, r);
            let delta = targets[t];
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            match cell(seed, delta, &mut rng) {
                Ok(cells) => (t, r, cells, false),
                Err(_) => {
                    let mut cells = vec![Cell::Int(seed), Cell::Float(delta)];
                    cells.extend(std::iter::repeat(Cell::Float(f64::NAN)).take(width - 2));
                    (t, r, cells, true)
                }
            }
        })
        .collect();
    let mut rows = rows;
    rows.sort_by_key(|&(t, r, _, _)| (t, r));
    let failed = rows.iter().filter(|&&(_, _, _, f)| f).count();
    (rows.into_iter().map(|(_, _, c, _)| c).collect(), failed)
}

fn engineered_instance(
    cfg: &Config,
    delta: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(SchmidtState, Lindbladian)> {
    let state = sample_schmidt_fixed_e2(cfg.n, delta, rng)?;
    let kind = EnsembleKind::new(cfg.ensemble, cfg.sigma)?;
    let jumps: Result<Vec<_>, _> = (0..cfg.m).map(|_| random_jump(&kind, &state, rng)).collect();
    let dim = cfg.n * cfg.n;
    let l = Lindbladian::new(Array2::zeros((dim, dim)), jumps?)?;
    Ok((state, l))
}

fn engineered_spectrum(cfg: &Config, l: &Lindbladian) -> Result<SpectrumResult> {
    // Dense eigendecomposition up to 81-dimensional superoperators;
    // shift-invert for the slow modes beyond that.
    if cfg.n <= 3 {
        Ok(spectrum_with_tol(l, cfg.tol)?)
    } else {
        Ok(slow_spectrum_with_tol(l, cfg.n * cfg.n + 4, cfg.tol)?)
    }
}

const GAP_SWEEP_HEADER: &[&str] = &[
    "seed",
    "delta_e2_target",
    "delta_e2_realized",
    "gap",
    "gamma_max",
    "gamma_max_prime",
    "haar_rate_exact",
    "haar_bound",
    "symmetry_error",
    "steady_count",
];

fn gap_sweep(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let (rows, failed) = sweep(cfg, GAP_SWEEP_HEADER.len(), |seed, delta, rng| {
        let (state, l) = engineered_instance(cfg, delta, rng)?;
        let spec = engineered_spectrum(cfg, &l)?;
        let report = bound_report(&l, &state, 0.1, cfg.sigma)?;
        Ok(vec![
            Cell::Int(seed),
            Cell::Float(delta),
            Cell::Float(measures(&state).delta_e2),
            Cell::Float(spec.gap),
            Cell::Float(report.gamma_max),
            Cell::Float(report.gamma_max_prime),
            Cell::Float(report.haar_rate_exact),
            Cell::Float(report.haar_bound),
            Cell::Float(report.symmetry_error),
            Cell::Int(spec.steady_count as u64),
        ])
    });

    // Summary: measured moments per target next to the predictions.
    let mut per_target = Vec::new();
    for (t, &delta) in cfg.delta_e2.iter().enumerate() {
        let gaps: Vec<f64> = rows[t * cfg.samples..(t + 1) * cfg.samples]
            .iter()
            .filter_map(|row| match row[3] {
                Cell::Float(g) if g.is_finite() => Some(g),
                _ => None,
            })
            .collect();
        let pred = ensemble_predictions(cfg.n, cfg.m, cfg.sigma, delta)?;
        let (mean, std) = moments(&gaps);
        per_target.push(serde_json::json!({
            "delta_e2": delta,
            "realizations": gaps.len(),
            "mean_gap": mean,
            "std_gap": std,
            "predicted_mean_gap": pred.mean_gap,
            "predicted_var_gap": pred.var_gap,
        }));
    }
    let summary = serde_json::json!({ "per_target": per_target });
    Ok((Table { header: GAP_SWEEP_HEADER, rows }, summary, failed))
}

const BOUND_AUDIT_HEADER: &[&str] = &[
    "seed",
    "delta_e2_target",
    "delta_e2_realized",
    "fidelity_rate",
    "gamma_max",
    "gamma_max_prime",
    "within_bounds",
];

fn bound_audit(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let (rows, failed) = sweep(cfg, BOUND_AUDIT_HEADER.len(), |seed, delta, rng| {
        let (state, l) = engineered_instance(cfg, delta, rng)?;
        let rho = random_density(cfg.n * cfg.n, rng);
        let rate = fidelity_rate(&l, &state.state_vector(), &rho)?;
        let report = bound_report(&l, &state, 0.1, cfg.sigma)?;
        let slack = 1e-10 * (1.0 + rate.abs());
        let ok = rate.abs() <= report.gamma_max + slack
            && rate.abs() <= report.gamma_max_prime + slack;
        Ok(vec![
            Cell::Int(seed),
            Cell::Float(delta),
            Cell::Float(measures(&state).delta_e2),
            Cell::Float(rate),
            Cell::Float(report.gamma_max),
            Cell::Float(report.gamma_max_prime),
            Cell::Int(ok as u64),
        ])
    });

    let violations = rows
        .iter()
        .filter(|row| matches!(row[6], Cell::Int(0)))
        .count();
    let summary = serde_json::json!({
        "triples": rows.len(),
        "violations": violations,
    });
    Ok((Table { header: BOUND_AUDIT_HEADER, rows }, summary, failed))
}

const HAAR_RATE_HEADER: &[&str] = &[
    "seed",
    "delta_e2_target",
    "delta_e2_realized",
    "haar_rate_exact",
    "haar_bound",
    "predicted_mean",
];

fn haar_rate(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let (rows, failed) = sweep(cfg, HAAR_RATE_HEADER.len(), |seed, delta, rng| {
        let (state, l) = engineered_instance(cfg, delta, rng)?;
        let hr = haar_rate_exact(&l, &state)?;
        let hb = haar_bound(&l, &state)?;
        let pred = ensemble_predictions(cfg.n, cfg.m, cfg.sigma, delta)?.mean_haar_rate;
        Ok(vec![
            Cell::Int(seed),
            Cell::Float(delta),
            Cell::Float(measures(&state).delta_e2),
            Cell::Float(hr.rate),
            Cell::Float(hb),
            Cell::Float(pred),
        ])
    });

    let mut per_target = Vec::new();
    for (t, &delta) in cfg.delta_e2.iter().enumerate() {
        let rates: Vec<f64> = rows[t * cfg.samples..(t + 1) * cfg.samples]
            .iter()
            .filter_map(|row| match row[3] {
                Cell::Float(x) if x.is_finite() => Some(x),
                _ => None,
            })
            .collect();
        let (mean, std) = moments(&rates);
        per_target.push(serde_json::json!({
            "delta_e2": delta,
            "realizations": rates.len(),
            "mean_rate": mean,
            "std_rate": std,
            "predicted_mean": ensemble_predictions(cfg.n, cfg.m, cfg.sigma, delta)?.mean_haar_rate,
        }));
    }
    let summary = serde_json::json!({ "per_target": per_target });
    Ok((Table { header: HAAR_RATE_HEADER, rows }, summary, failed))
}

const CQA_HEADER: &[&str] = &[
    "seed",
    "delta_e2_target",
    "delta_e2_realized",
    "reduced_gap",
    "full_gap",
    "gap_ratio",
    "inclusion_error",
];

fn cqa(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let (rows, failed) = sweep(cfg, CQA_HEADER.len(), |seed, delta, rng| {
        let state = sample_schmidt_fixed_e2(cfg.n, delta, rng)?;
        let kind = EnsembleKind::new(
            forge_core::engineer::EnsembleTag::DetailedBalance,
            cfg.sigma,
        )?;
        let a = random_jump(&kind, &state, rng)?.a().clone();
        let built = cqa_construct(&a, &state)?;
        let full = spectrum_with_tol(&built.lindbladian, cfg.tol)?;
        let reduced = spectrum_with_tol(&built.reduced_lindbladian()?, cfg.tol)?;
        let inclusion = reduced
            .eigenvalues
            .iter()
            .map(|z| {
                full.eigenvalues
                    .iter()
                    .map(|w| (z - w).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        Ok(vec![
            Cell::Int(seed),
            Cell::Float(delta),
            Cell::Float(measures(&state).delta_e2),
            Cell::Float(reduced.gap),
            Cell::Float(full.gap),
            Cell::Float(full.gap / reduced.gap),
            Cell::Float(inclusion),
        ])
    });

    let worst_inclusion = rows
        .iter()
        .filter_map(|row| match row[6] {
            Cell::Float(x) if x.is_finite() => Some(x),
            _ => None,
        })
        .fold(0.0f64, f64::max);
    let summary = serde_json::json!({
        "rows": rows.len(),
        "worst_inclusion_error": worst_inclusion,
    });
    Ok((Table { header: CQA_HEADER, rows }, summary, failed))
}

const UNEVEN_HEADER: &[&str] = &[
    "seed",
    "delta_e2_target",
    "delta_e2_realized",
    "gamma_uneven",
    "gap",
    "steady_count",
    "dark_residual",
];

fn uneven(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let n_b = cfg.n_b.expect("validated");
    let spec = UnevenSpec::new(cfg.n, n_b, cfg.sigma_b)?;
    let (rows, failed) = sweep(cfg, UNEVEN_HEADER.len(), |seed, delta, rng| {
        let square = sample_schmidt_fixed_e2(cfg.n, delta, rng)?;
        let state = SchmidtState::new(cfg.n, n_b, square.weights().to_vec())?;
        let psi = state.state_vector();
        let mut jumps = Vec::with_capacity(cfg.m);
        let mut dark_residual = 0.0f64;
        for _ in 0..cfg.m {
            let a = complex_gaussian(cfg.n, cfg.sigma, rng);
            let b = uneven_partner(&a, &spec, &state, rng)?;
            let j = JumpOperator::new(a, b, 1.0)?;
            let moved = j.full_matrix().dot(&psi);
            let resid: f64 = moved.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            dark_residual = dark_residual.max(resid);
            jumps.push(j);
        }
        let dim = cfg.n * n_b;
        let l = Lindbladian::new(Array2::zeros((dim, dim)), jumps)?;
        let sp = spectrum_with_tol(&l, cfg.tol)?;
        let g = gamma_uneven(&l, &state, &spec)?;
        Ok(vec![
            Cell::Int(seed),
            Cell::Float(delta),
            Cell::Float(measures(&state).delta_e2),
            Cell::Float(g),
            Cell::Float(sp.gap),
            Cell::Int(sp.steady_count as u64),
            Cell::Float(dark_residual),
        ])
    });

    let summary = serde_json::json!({ "rows": rows.len() });
    Ok((Table { header: UNEVEN_HEADER, rows }, summary, failed))
}

const CHAIN_HEADER: &[&str] = &[
    "delta_e2",
    "v",
    "gap",
    "midgap_count",
    "steady_count",
    "rainbow_residual",
];

fn chain_targets(cfg: &Config) -> Result<Vec<f64>> {
    match cfg.v {
        Some(v) => Ok(vec![v]),
        None => cfg
            .delta_e2
            .iter()
            .map(|&d| Ok(v_for_delta_e2(cfg.n, d)?))
            .collect(),
    }
}

fn chain_row(cfg: &Config, model: ChainModel, v: f64) -> Result<Vec<Cell>> {
    let spec = ChainSpec::from_v(cfg.n, cfg.j, cfg.j_z, v)?;
    let l = match model {
        ChainModel::Xxz => xxz_lindbladian(&spec)?,
        ChainModel::Ladder => ladder_lindbladian(&spec)?,
    };
    let psi = rainbow_state(cfg.n, v)?;
    let d = 1usize << cfg.n;
    let rho = Array2::from_shape_fn((d * d, d * d), |(i, j)| psi[i] * psi[j].conj());
    let residual = frobenius_norm(&l.apply(&rho)?);
    let sp = spectrum_with_tol(&l, cfg.tol)?;
    let midgap = count_midgap(&sp, 0.1)?;
    let q = (1.0 - v * v).powi(2) + v.powi(4);
    let delta = q.powi(cfg.n as i32) - 1.0 / (d as f64);
    Ok(vec![
        Cell::Float(delta),
        Cell::Float(v),
        Cell::Float(sp.gap),
        Cell::Int(midgap as u64),
        Cell::Int(sp.steady_count as u64),
        Cell::Float(residual),
    ])
}

fn chain(cfg: &Config, model: ChainModel) -> Result<(Table, serde_json::Value, usize)> {
    let vs = chain_targets(cfg)?;
    let mut rows = Vec::with_capacity(vs.len());
    let mut failed = 0;
    for &v in &vs {
        match chain_row(cfg, model, v) {
            Ok(row) => rows.push(row),
            Err(_) => {
                failed += 1;
                rows.push(vec![
                    Cell::Float(f64::NAN),
                    Cell::Float(v),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                ]);
            }
        }
    }
    let summary = serde_json::json!({ "rows": rows.len(), "model": model.name() });
    Ok((Table { header: CHAIN_HEADER, rows }, summary, failed))
}

const SPECTRUM_HEADER: &[&str] = &["index", "re_lambda", "im_lambda", "is_midgap", "residual"];

fn model_spectrum(cfg: &Config) -> Result<(Table, serde_json::Value, usize)> {
    let model = cfg.model.expect("validated");
    let v = chain_targets(cfg)?[0];
    let spec = ChainSpec::from_v(cfg.n, cfg.j, cfg.j_z, v)?;
    let l = match model {
        ChainModel::Xxz => xxz_lindbladian(&spec)?,
        ChainModel::Ladder => ladder_lindbladian(&spec)?,
    };
    let sp = spectrum_with_tol(&l, cfg.tol)?;
    let midgap = count_midgap(&sp, 0.1)?;

    // Eigenvalues arrive sorted by descending real part, so the midgap
    // block sits directly after the steady block.
    let mut rows = Vec::with_capacity(sp.eigenvalues.len());
    for (i, z) in sp.eigenvalues.iter().enumerate() {
        let is_midgap = i >= sp.steady_count && i < sp.steady_count + midgap;
        rows.push(vec![
            Cell::Int(i as u64),
            Cell::Float(z.re),
            Cell::Float(z.im),
            Cell::Int(is_midgap as u64),
            Cell::Float(sp.residuals[i]),
        ]);
    }
    let summary = serde_json::json!({
        "model": model.name(),
        "v": v,
        "gap": sp.gap,
        "steady_count": sp.steady_count,
        "midgap_count": midgap,
        "total_dim": sp.total_dim,
    });
    Ok((Table { header: SPECTRUM_HEADER, rows }, summary, 0))
}

fn moments(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn complex_gaussian<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Array2<C64> {
    let comp = sigma / 2f64.sqrt();
    Array2::from_shape_fn((n, n), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(comp * re, comp * im)
    })
}

fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array2<C64> {
    let g = complex_gaussian(d, 1.0, rng);
    let gram = g.dot(&g.t().mapv(|z| z.conj()));
    let tr: C64 = (0..d).map(|i| gram[[i, i]]).sum();
    gram.mapv(|z| z / tr)
}
