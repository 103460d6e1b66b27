//! Configuration loading: TOML with a flat schema, collective error
//! reporting, and explicit defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use forge_core::engineer::EnsembleTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    GapSweep,
    Spectrum,
    BoundAudit,
    HaarRate,
    Xxz,
    Ladder,
    Cqa,
    Uneven,
}

impl Kind {
    fn parse(s: &str) -> Option<Kind> {
        match s {
            "gap-sweep" => Some(Kind::GapSweep),
            "spectrum" => Some(Kind::Spectrum),
            "bound-audit" => Some(Kind::BoundAudit),
            "haar-rate" => Some(Kind::HaarRate),
            "xxz" => Some(Kind::Xxz),
            "ladder" => Some(Kind::Ladder),
            "cqa" => Some(Kind::Cqa),
            "uneven" => Some(Kind::Uneven),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kind::GapSweep => "gap-sweep",
            Kind::Spectrum => "spectrum",
            Kind::BoundAudit => "bound-audit",
            Kind::HaarRate => "haar-rate",
            Kind::Xxz => "xxz",
            Kind::Ladder => "ladder",
            Kind::Cqa => "cqa",
            Kind::Uneven => "uneven",
        }
    }

    fn uses_ensemble(&self) -> bool {
        matches!(
            self,
            Kind::GapSweep | Kind::BoundAudit | Kind::HaarRate | Kind::Cqa | Kind::Uneven
        )
    }

    fn is_chain(&self) -> bool {
        matches!(self, Kind::Spectrum | Kind::Xxz | Kind::Ladder)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainModel {
    Xxz,
    Ladder,
}

impl ChainModel {
    pub fn name(&self) -> &'static str {
        match self {
            ChainModel::Xxz => "xxz",
            ChainModel::Ladder => "ladder",
        }
    }
}

/// Fully resolved experiment description, defaults filled in.
#[derive(Debug, Clone)]
pub struct Config {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub ensemble: EnsembleTag,
    pub sigma: f64,
    pub delta_e2: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub j: f64,
    pub j_z: f64,
    pub v: Option<f64>,
    pub tol: f64,
    pub out: PathBuf,
    pub model: Option<ChainModel>,
    pub n_b: Option<usize>,
    pub sigma_b: f64,
}

/// All problems found in one pass, reported together.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "kind", "n", "m", "ensemble", "sigma", "delta_e2", "samples", "seed", "j", "j_z", "v",
    "tol", "out", "model", "n_b", "sigma_b",
];

/// Rejects duplicate keys before TOML parsing, reporting the line of
/// both occurrences (the parser itself only points at the second).
fn scan_duplicates(text: &str, errors: &mut Vec<String>) {
    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut prefix = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            prefix = line.trim_matches(|c| c == '[' || c == ']').to_string();
            continue;
        }
        if let Some(eq) = line.find('=') {
            let key = line[..eq].trim();
            if key.is_empty() {
                continue;
            }
            let full = if prefix.is_empty() {
                key.to_string()
            } else {
                format!("{prefix}.{key}")
            };
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == full) {
                errors.push(format!(
                    "duplicate key `{full}` at lines {} and {}",
                    first + 1,
                    idx + 1
                ));
            } else {
                seen.push((full, idx));
            }
        }
    }
}

struct Extractor<'a> {
    table: &'a toml::Table,
    errors: Vec<String>,
}

impl<'a> Extractor<'a> {
    fn str_key(&mut self, key: &str) -> Option<String> {
        match self.table.get(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be a string, got {other}"));
                None
            }
        }
    }

    fn int_key(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key) {
            None => None,
            Some(toml::Value::Integer(i)) => Some(*i),
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be an integer, got {other}"));
                None
            }
        }
    }

    fn float_key(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key) {
            None => None,
            Some(toml::Value::Float(x)) => Some(*x),
            Some(toml::Value::Integer(i)) => Some(*i as f64),
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be a number, got {other}"));
                None
            }
        }
    }

    fn float_list_key(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.table.get(key) {
            None => None,
            Some(toml::Value::Array(xs)) => {
                let mut out = Vec::with_capacity(xs.len());
                for x in xs {
                    match x {
                        toml::Value::Float(f) => out.push(*f),
                        toml::Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.errors.push(format!(
                                "`{key}` entries must be numbers, got {other}"
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be an array of numbers, got {other}"));
                None
            }
        }
    }
}

/// Loads, schema-checks, and normalizes a config file. Command-line
/// seed/out overrides are applied before validation.
pub fn load(
    path: &Path,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;

    let mut errors = Vec::new();
    scan_duplicates(&text, &mut errors);
    if !errors.is_empty() {
        return Err(ConfigError(errors));
    }

    let table: toml::Table = text
        .parse()
        .map_err(|e| ConfigError(vec![format!("TOML parse error: {e}")]))?;

    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(format!("unknown key `{key}`"));
        }
    }

    let mut ex = Extractor { table: &table, errors };

    let kind = match ex.str_key("kind") {
        Some(s) => match Kind::parse(&s) {
            Some(k) => Some(k),
            None => {
                ex.errors.push(format!(
                    "unknown kind `{s}`; expected one of gap-sweep, spectrum, bound-audit, \
                     haar-rate, xxz, ladder, cqa, uneven"
                ));
                None
            }
        },
        None => {
            ex.errors.push("missing required key `kind`".into());
            None
        }
    };

    let n = match ex.int_key("n") {
        Some(i) if i >= 1 => Some(i as usize),
        Some(i) => {
            ex.errors.push(format!("`n` must be >= 1, got {i}"));
            None
        }
        None => {
            ex.errors.push("missing required key `n`".into());
            None
        }
    };

    let m = match ex.int_key("m") {
        Some(i) if i >= 1 => i as usize,
        Some(i) => {
            ex.errors.push(format!("`m` must be >= 1, got {i}"));
            2
        }
        None => 2,
    };

    let ensemble = match ex.str_key("ensemble") {
        None => EnsembleTag::Ginibre,
        Some(s) => match s.as_str() {
            "ginibre" => EnsembleTag::Ginibre,
            "hermitian" => EnsembleTag::Hermitian,
            "symmetric" => EnsembleTag::Symmetric,
            "detailed-balance" => EnsembleTag::DetailedBalance,
            other => {
                ex.errors.push(format!(
                    "unknown ensemble `{other}`; expected ginibre, hermitian, symmetric, \
                     or detailed-balance"
                ));
                EnsembleTag::Ginibre
            }
        },
    };

    let sigma = ex.float_key("sigma").unwrap_or(1.0);
    if !(sigma.is_finite() && sigma > 0.0) {
        ex.errors.push(format!("`sigma` must be positive, got {sigma}"));
    }

    let delta_e2 = ex.float_list_key("delta_e2").unwrap_or_default();

    let samples = match ex.int_key("samples") {
        Some(i) if i >= 1 => i as usize,
        Some(i) => {
            ex.errors.push(format!("`samples` must be >= 1, got {i}"));
            100
        }
        None => 100,
    };

    let seed = match seed_override {
        Some(s) => s,
        None => match ex.int_key("seed") {
            Some(i) => i as u64,
            None => 0,
        },
    };

    let j = ex.float_key("j").unwrap_or(1.0);
    let j_z = ex.float_key("j_z").unwrap_or(0.0);
    let v = ex.float_key("v");
    if let Some(v) = v {
        if !(0.0..=1.0).contains(&v) {
            ex.errors.push(format!("`v` must lie in [0, 1], got {v}"));
        }
    }

    let tol = ex.float_key("tol").unwrap_or(1e-8);
    if !(tol.is_finite() && tol > 0.0) {
        ex.errors.push(format!("`tol` must be positive, got {tol}"));
    }

    let out = out_override.unwrap_or_else(|| {
        ex.str_key("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
    });

    let model = match ex.str_key("model") {
        None => None,
        Some(s) => match s.as_str() {
            "xxz" => Some(ChainModel::Xxz),
            "ladder" => Some(ChainModel::Ladder),
            other => {
                ex.errors
                    .push(format!("unknown model `{other}`; expected xxz or ladder"));
                None
            }
        },
    };

    let n_b = match ex.int_key("n_b") {
        Some(i) if i >= 1 => Some(i as usize),
        Some(i) => {
            ex.errors.push(format!("`n_b` must be >= 1, got {i}"));
            None
        }
        None => None,
    };

    let sigma_b = ex.float_key("sigma_b").unwrap_or(0.0);
    if !(sigma_b.is_finite() && sigma_b >= 0.0) {
        ex.errors
            .push(format!("`sigma_b` must be nonnegative, got {sigma_b}"));
    }

    let mut errors = ex.errors;

    if let (Some(kind), Some(n)) = (kind, n) {
        validate_kind(kind, n, &delta_e2, v, model, n_b, &mut errors);
    }

    if !errors.is_empty() {
        return Err(ConfigError(errors));
    }

    Ok(Config {
        kind: kind.unwrap(),
        n: n.unwrap(),
        m,
        ensemble,
        sigma,
        delta_e2,
        samples,
        seed,
        j,
        j_z,
        v,
        tol,
        out,
        model,
        n_b,
        sigma_b,
    })
}

fn validate_kind(
    kind: Kind,
    n: usize,
    delta_e2: &[f64],
    v: Option<f64>,
    model: Option<ChainModel>,
    n_b: Option<usize>,
    errors: &mut Vec<String>,
) {
    if kind.uses_ensemble() {
        if n < 2 {
            errors.push(format!("`{}` needs n >= 2, got {n}", kind.name()));
        }
        if delta_e2.is_empty() {
            errors.push(format!(
                "`{}` needs a nonempty `delta_e2` target list",
                kind.name()
            ));
        }
    }

    if kind.is_chain() {
        if n > 3 {
            errors.push(format!(
                "chain models are limited to n <= 3 rungs (superoperators grow as 16^n), got {n}"
            ));
        }
        match (v, delta_e2.is_empty()) {
            (Some(_), false) => {
                errors.push("give either `v` or `delta_e2` targets, not both".into())
            }
            (None, true) => errors.push(format!(
                "`{}` needs either `v` or `delta_e2` targets",
                kind.name()
            )),
            _ => {}
        }
    }

    if kind == Kind::Spectrum {
        if model.is_none() {
            errors.push("`spectrum` needs `model` (xxz or ladder)".into());
        }
        let targets = if v.is_some() { 0 } else { delta_e2.len() };
        if targets > 1 {
            errors.push("`spectrum` takes a single delta_e2 target".into());
        }
    } else if model.is_some() {
        errors.push("`model` only applies to kind `spectrum`".into());
    }

    if kind == Kind::Uneven {
        match n_b {
            None => errors.push("`uneven` needs `n_b`".into()),
            Some(nb) if nb <= n => errors.push(format!(
                "`uneven` needs n_b > n, got n_b = {nb} with n = {n}"
            )),
            _ => {}
        }
    } else if n_b.is_some() {
        errors.push("`n_b` only applies to kind `uneven`".into());
    }

    // Chain targets are bounded by the rainbow family's reach; the
    // bipartite kinds by the maximally mixed reduced state.
    let ceiling = 1.0 - 1.0 / if kind.is_chain() { (1usize << n) as f64 } else { n as f64 };
    for &d in delta_e2 {
        if !(0.0..=ceiling).contains(&d) {
            errors.push(format!(
                "delta_e2 target {d} outside [0, 1 - 1/N] = [0, {ceiling}]"
            ));
        }
    }
}

/// The effective config as an ordered JSON object, used for both
/// `validate` output and the run sidecar.
pub fn echo_json(cfg: &Config) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("kind".into(), cfg.kind.name().into());
    map.insert("n".into(), cfg.n.into());
    map.insert("m".into(), cfg.m.into());
    let tag = match cfg.ensemble {
        EnsembleTag::Ginibre => "ginibre",
        EnsembleTag::Hermitian => "hermitian",
        EnsembleTag::Symmetric => "symmetric",
        EnsembleTag::DetailedBalance => "detailed-balance",
    };
    map.insert("ensemble".into(), tag.into());
    map.insert("sigma".into(), cfg.sigma.into());
    map.insert("delta_e2".into(), cfg.delta_e2.clone().into());
    map.insert("samples".into(), cfg.samples.into());
    map.insert("seed".into(), cfg.seed.into());
    map.insert("j".into(), cfg.j.into());
    map.insert("j_z".into(), cfg.j_z.into());
    if let Some(v) = cfg.v {
        map.insert("v".into(), v.into());
    }
    map.insert("tol".into(), cfg.tol.into());
    map.insert("out".into(), cfg.out.display().to_string().into());
    if let Some(model) = cfg.model {
        map.insert("model".into(), model.name().into());
    }
    if let Some(n_b) = cfg.n_b {
        map.insert("n_b".into(), n_b.into());
        map.insert("sigma_b".into(), cfg.sigma_b.into());
    }
    serde_json::Value::Object(map)
}
