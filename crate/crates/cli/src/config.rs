//! Run configuration: an optional TOML file, the positional scenario, and
//! `--param KEY=VALUE` overrides, merged in that order of precedence
//! (flags win).

use std::fmt;
use std::path::{Path, PathBuf};

use catsim::model::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    AmplitudeSweep,
    Concurrence,
    MechCat,
    VarianceSweep,
    LossyCat,
    OpticalCat,
    Selfcheck,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::AmplitudeSweep => "amplitude_sweep",
            Scenario::Concurrence => "concurrence",
            Scenario::MechCat => "mech_cat",
            Scenario::VarianceSweep => "variance_sweep",
            Scenario::LossyCat => "lossy_cat",
            Scenario::OpticalCat => "optical_cat",
            Scenario::Selfcheck => "selfcheck",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Bec,
    SolidState,
    Optical,
}

impl Preset {
    pub fn params(self) -> SystemParams {
        match self {
            Preset::Bec => SystemParams::bec(),
            Preset::SolidState => SystemParams::solid_state(),
            Preset::Optical => SystemParams::optical(),
        }
    }
}

/// Physical parameters. Unset fields come from `preset`, then from the
/// scenario's default preset. `omega_sw_ratio` is `ω_sw/ω_b` and may be
/// given instead of `omega_sw`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_sw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_sw_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c_eff: Option<f64>,
}

pub const PARAM_KEYS: &[&str] = &[
    "preset",
    "omega_b",
    "omega_sw",
    "omega_sw_ratio",
    "g",
    "kappa_a",
    "omega_c_eff",
];

/// Scenario knobs. Times are dimensionless `ω_b t`; sweeps are in units of
/// `ω_sw/ω_b`; grid ranges are in units of the quadrature `Re ξ`, `Im ξ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Snapshot time `ω_b t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    /// End of the time axis `ω_b t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    /// `[min, max]` of `ω_sw/ω_b`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mech_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_x: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_y: Option<[f64; 2]>,
    /// `[nx, ny]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<[usize; 2]>,
    /// Cavity measurement outcome, `+` or `-`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    /// Real coherent amplitude of the initial cavity state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    /// Optical cat kinds to run (`two`, `three`, `four`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cats: Option<Vec<String>>,
    /// Number of master-equation samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Local error target of the master-equation integrator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Multiplier on every self-check tolerance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_scale: Option<f64>,
}

pub const OVERRIDE_KEYS: &[&str] = &[
    "time",
    "t_max",
    "t_points",
    "sweep",
    "sweep_points",
    "cavity_dim",
    "mech_dim",
    "grid_x",
    "grid_y",
    "grid_points",
    "branch",
    "alpha0",
    "cats",
    "samples",
    "tolerance",
    "check_scale",
];

/// A complete run description. The metadata file written by a run has the
/// same shape, with every value resolved and a `[run]` table describing the
/// outputs; `[run]` is ignored on input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<toml::Table>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Splits `KEY=VALUE`, parsing `VALUE` as a TOML value and falling back to
/// a bare string.
fn parse_assignment(raw: &str) -> Result<(String, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--param expects KEY=VALUE, got `{raw}`")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

fn section<'a>(table: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table, CliError> {
    table
        .entry(name)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("`{name}` must be a table")))
}

/// Merges the file, the positional scenario, `--param` flags and `--out`.
pub fn load(
    file: Option<&Path>,
    scenario: Option<Scenario>,
    params: &[String],
    out: Option<PathBuf>,
) -> Result<RunConfig, CliError> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for raw in params {
        let (key, value) = parse_assignment(raw)?;
        let (sect, name) = match key.split_once('.') {
            Some((s, n)) => (Some(s.to_string()), n.to_string()),
            None if PARAM_KEYS.contains(&key.as_str()) => (Some("params".into()), key.clone()),
            None if OVERRIDE_KEYS.contains(&key.as_str()) => (Some("overrides".into()), key.clone()),
            None if key == "scenario" || key == "output_dir" => (None, key.clone()),
            None => return Err(CliError::Config(format!("unknown parameter `{key}`"))),
        };
        match sect {
            Some(s) => {
                section(&mut table, &s)?.insert(name, value);
            }
            None => {
                table.insert(name, value);
            }
        }
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    if let Some(s) = scenario {
        cfg.scenario = Some(s);
    }
    if let Some(o) = out {
        cfg.output_dir = Some(o);
    }
    Ok(cfg)
}

/// Resolves physical parameters, with `default` used when no preset is set.
pub fn resolve_params(
    cfg: &ParamsConfig,
    default: Preset,
    default_ratio: f64,
) -> Result<SystemParams, CliError> {
    if cfg.omega_sw.is_some() && cfg.omega_sw_ratio.is_some() {
        return Err(CliError::Config(
            "give either params.omega_sw or params.omega_sw_ratio, not both".into(),
        ));
    }
    let base = cfg.preset.unwrap_or(default).params();
    let mut p = SystemParams {
        omega_b: cfg.omega_b.unwrap_or(base.omega_b),
        g: cfg.g.unwrap_or(base.g),
        kappa_a: cfg.kappa_a.unwrap_or(base.kappa_a),
        omega_c_eff: cfg.omega_c_eff.unwrap_or(base.omega_c_eff),
        ..base
    };
    p.omega_sw = match (cfg.omega_sw, cfg.omega_sw_ratio) {
        (Some(w), _) => w,
        (None, Some(r)) => r * p.omega_b,
        (None, None) => default_ratio * p.omega_b,
    };
    p.validate()?;
    Ok(p)
}

/// The fully explicit form written back to the metadata file.
pub fn explicit_params(p: &SystemParams) -> ParamsConfig {
    ParamsConfig {
        preset: None,
        omega_b: Some(p.omega_b),
        omega_sw: Some(p.omega_sw),
        omega_sw_ratio: None,
        g: Some(p.g),
        kappa_a: Some(p.kappa_a),
        omega_c_eff: Some(p.omega_c_eff),
    }
}
