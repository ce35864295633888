//! Experiment configuration: one JSON document, schema-checked with
//! unknown keys rejected, plus the preset shorthands and the resolution
//! helpers that write defaults back so reports echo what actually ran.

use anyhow::{anyhow, bail, Result};
use homocount_core::enumerate::geometric_grid;
use homocount_core::exponents;
use homocount_core::geometry::{
    default_spectral_params, Cover, GroupSpec, NormMode, PolynomialMap, QuadraticForm, SparsePoly,
    SpectralParams, VarietySpec,
};
use homocount_core::numeric::primes_up_to;
use homocount_core::restrict::SubvarietySpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Lift,
    LiftQuant,
    Restrict,
    Generic,
    Sift,
    Linnik,
    LinnikDensity,
    Exponents,
    PellControl,
    Growth,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Lift => "lift",
            Experiment::LiftQuant => "lift-quant",
            Experiment::Restrict => "restrict",
            Experiment::Generic => "generic",
            Experiment::Sift => "sift",
            Experiment::Linnik => "linnik",
            Experiment::LinnikDensity => "linnik-density",
            Experiment::Exponents => "exponents",
            Experiment::PellControl => "pell-control",
            Experiment::Growth => "growth",
        }
    }
}

/// A variety, either by preset name ("sl2", "sl3", "pell2", ...) or as an
/// inline spec in the core serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarietyRef {
    Preset(String),
    Inline(VarietySpec),
}

/// A polynomial map, by preset name ("trace") or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapRef {
    Preset(String),
    Inline(PolynomialMap),
}

/// A subvariety, by preset name ("sl2-unipotent") or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubvarietyRef {
    Preset(String),
    Inline(SubvarietySpec),
}

/// Geometric height grid from lo to hi.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl TGrid {
    pub fn values(&self) -> Vec<f64> {
        geometric_grid(self.lo, self.hi, self.points)
    }
}

/// The one configuration document shared by all experiments. Every field
/// is optional; each experiment validates the ones it needs and fills
/// documented defaults for the rest, which are echoed back in the report
/// header and folded into the config hash.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variety: Option<VarietyRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<MapRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subvariety: Option<SubvarietyRef>,
    /// Parameter preset for `exponents`: "sl<n>", "sl<n>-symmetric",
    /// "spin-split-<m>" or "quadric-lorentz-<m>".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Explicit spectral parameters; overrides `preset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SpectralParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TGrid>,
    /// Explicit heights; wins over `t_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_list: Option<Vec<u64>>,
    /// Inclusive range; for `linnik` it selects the primes inside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_range: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u64>,
    /// Pell discriminant for `pell-control`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    /// Matrix size for `generic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<u32>,
    /// Largest prime whose density row enters the sieve-axiom table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_cap: Option<u64>,
    /// Ball height for the almost-prime histogram in `sift`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub almost_prime_t: Option<f64>,
    /// Largest prime checked against the near-one density band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_prime_cap: Option<u64>,
    /// Largest primorial level in the prime-log-sum scale check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logsum_z: Option<u64>,
    /// Sieve level for the reported W(z) product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_z: Option<f64>,
    /// Balls expected to hold at most this many points are materialized
    /// and cached; larger ones are streamed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materialize_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Recorded for provenance; all current experiments are exhaustive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Report directory; the --out flag wins over this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Twelve hex characters of the digest of the resolved config (output
/// directory excluded, so the same run hashes identically anywhere).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.out = None;
    let canonical = serde_json::to_string(&serde_json::to_value(&c).expect("config serializes"))
        .expect("config value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn parse_suffixed<T: std::str::FromStr>(s: &str, prefix: &str) -> Option<T> {
    s.strip_prefix(prefix).and_then(|rest| rest.parse().ok())
}

pub fn variety_preset(name: &str) -> Result<VarietySpec> {
    if let Some(n) = parse_suffixed::<u32>(name, "sl") {
        return Ok(VarietySpec::sl(n));
    }
    if let Some(d) = parse_suffixed::<u64>(name, "pell") {
        return Ok(VarietySpec::pell(d)?);
    }
    bail!("unknown variety preset {name:?}; try \"sl2\", \"sl3\" or \"pell2\", or give an inline spec")
}

/// Diagonal form with ceil(m/2) entries +1 and the rest -1.
fn split_form(m: u32) -> Result<QuadraticForm> {
    let diag: Vec<i64> = (0..m).map(|i| if i < m.div_ceil(2) { 1 } else { -1 }).collect();
    Ok(QuadraticForm::diagonal(&diag)?)
}

/// Signature (1, m-1) diagonal form.
fn lorentz_form(m: u32) -> Result<QuadraticForm> {
    let diag: Vec<i64> = (0..m).map(|i| if i == 0 { 1 } else { -1 }).collect();
    Ok(QuadraticForm::diagonal(&diag)?)
}

pub fn params_preset(name: &str) -> Result<SpectralParams> {
    if let Some(n) = name.strip_suffix("-symmetric").and_then(|s| parse_suffixed::<u32>(s, "sl")) {
        return Ok(exponents::sl_symmetric_orbit_params(n)?);
    }
    if let Some(n) = parse_suffixed::<u32>(name, "sl") {
        return Ok(default_spectral_params(&GroupSpec::sl(n))?);
    }
    if let Some(m) = parse_suffixed::<u32>(name, "spin-split-") {
        let spec = GroupSpec::QuadricGroup { b: split_form(m)?, cover: Cover::Spin };
        return Ok(default_spectral_params(&spec)?);
    }
    if let Some(m) = parse_suffixed::<u32>(name, "quadric-lorentz-") {
        let spec = GroupSpec::QuadricGroup { b: lorentz_form(m)?, cover: Cover::SpecialOrthogonal };
        return Ok(default_spectral_params(&spec)?);
    }
    bail!(
        "unknown parameter preset {name:?}; try \"sl2\", \"sl3-symmetric\", \
         \"spin-split-5\" or \"quadric-lorentz-4\""
    )
}

fn subvariety_preset(name: &str) -> Result<SubvarietySpec> {
    match name {
        // lower-left entry zero: the +-unipotent slice of SL_2
        "sl2-unipotent" => {
            Ok(SubvarietySpec::new(GroupSpec::sl(2), vec![SparsePoly::entry(2, 2, 1, 0)], 1, 1)?)
        }
        // both off-diagonal entries zero: the diagonal torus points
        "sl2-diagonal" => Ok(SubvarietySpec::new(
            GroupSpec::sl(2),
            vec![SparsePoly::entry(2, 2, 0, 1), SparsePoly::entry(2, 2, 1, 0)],
            1,
            1,
        )?),
        _ => bail!(
            "unknown subvariety preset {name:?}; try \"sl2-unipotent\", \"sl2-diagonal\" \
             or give an inline spec"
        ),
    }
}

pub fn resolve_variety(cfg: &mut ExperimentConfig, default_preset: &str) -> Result<VarietySpec> {
    let r = cfg
        .variety
        .get_or_insert_with(|| VarietyRef::Preset(default_preset.to_string()));
    match r {
        VarietyRef::Preset(name) => variety_preset(name),
        VarietyRef::Inline(v) => Ok(v.clone()),
    }
}

pub fn resolve_group(cfg: &mut ExperimentConfig, default_preset: &str) -> Result<GroupSpec> {
    match resolve_variety(cfg, default_preset)? {
        VarietySpec::Group { group } => Ok(group),
        other => bail!(
            "this experiment needs a group variety, got {}",
            serde_json::to_value(&other).map(|v| variant_name(&v)).unwrap_or_default()
        ),
    }
}

fn variant_name(v: &Value) -> String {
    match v {
        Value::Object(m) => m.keys().next().cloned().unwrap_or_default(),
        _ => v.to_string(),
    }
}

pub fn resolve_map(cfg: &mut ExperimentConfig, group: &GroupSpec) -> Result<PolynomialMap> {
    let r = cfg.f.get_or_insert_with(|| MapRef::Preset("trace".to_string()));
    match r {
        MapRef::Preset(name) if name == "trace" => match group {
            GroupSpec::SpecialLinear { n } => Ok(PolynomialMap::trace(*n as u16)),
            GroupSpec::QuadricGroup { .. } => {
                bail!("the \"trace\" preset applies to special linear groups; supply f inline")
            }
        },
        MapRef::Preset(name) => bail!("unknown polynomial map preset {name:?}; only \"trace\""),
        MapRef::Inline(f) => Ok(f.clone()),
    }
}

pub fn resolve_subvariety(cfg: &mut ExperimentConfig, default_preset: &str) -> Result<SubvarietySpec> {
    let r = cfg
        .subvariety
        .get_or_insert_with(|| SubvarietyRef::Preset(default_preset.to_string()));
    match r {
        SubvarietyRef::Preset(name) => subvariety_preset(name),
        SubvarietyRef::Inline(s) => Ok(s.clone()),
    }
}

/// Height grid: explicit `t_list` wins, then `t_grid`, then the default
/// geometric grid, which is written back for the echo.
pub fn resolve_grid(cfg: &mut ExperimentConfig, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if let Some(list) = &cfg.t_list {
        return list.clone();
    }
    cfg.t_grid.get_or_insert(TGrid { lo, hi, points }).values()
}

pub fn resolve_t_list(cfg: &mut ExperimentConfig, default: &[f64]) -> Vec<f64> {
    cfg.t_list.get_or_insert_with(|| default.to_vec()).clone()
}

/// Moduli: `q_list`, else all of `q_range` (primes only when asked),
/// else single `q`, else the default range.
pub fn resolve_q_list(
    cfg: &mut ExperimentConfig,
    default_range: [u64; 2],
    primes_only: bool,
) -> Result<Vec<u64>> {
    if let Some(list) = &cfg.q_list {
        if list.is_empty() {
            bail!("q_list must not be empty");
        }
        return Ok(list.clone());
    }
    if let Some(q) = cfg.q {
        return Ok(vec![q]);
    }
    let [lo, hi] = *cfg.q_range.get_or_insert(default_range);
    if lo > hi {
        bail!("q_range [{lo}, {hi}] is empty");
    }
    let list: Vec<u64> = if primes_only {
        primes_up_to(hi).into_iter().filter(|&p| p >= lo).collect()
    } else {
        (lo.max(1)..=hi).collect()
    };
    if list.is_empty() {
        bail!("q_range [{lo}, {hi}] selects no moduli");
    }
    Ok(list)
}

pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow!("config {} is not a valid experiment document: {e}", path.display()))
}
