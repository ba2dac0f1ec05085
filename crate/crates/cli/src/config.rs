//! Experiment description: TOML text in, validated `ExperimentConfig` out.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use memspin_core::coupling::{SpectrumKind, DEFAULT_OHMIC_CUTOFF};
use memspin_core::dynamics::{
    IntegratorConfig, DEFAULT_DT, DEFAULT_NOISE_MARGIN, DEFAULT_SUBSTEPS,
};
use memspin_core::experiments::{Method, DESK_SWEEP_T_MAX, FULL_SWEEP_T_MAX};
use memspin_core::model::{Bath, LorentzianParams, OhmicParams, UnitFrame, GAMMA_ELECTRON};
use memspin_core::{power_spectrum, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("bath required: add a [bath] section or list run.methods")]
    BathRequired,
    #[error("{field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Trajectory,
    Ensemble,
    Sweep,
    Validate,
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "trajectory" => Ok(Mode::Trajectory),
            "ensemble" => Ok(Mode::Ensemble),
            "sweep" => Ok(Mode::Sweep),
            "validate" => Ok(Mode::Validate),
            other => Err(invalid("mode", format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Trajectory => "trajectory",
            Mode::Ensemble => "ensemble",
            Mode::Sweep => "sweep",
            Mode::Validate => "validate",
        })
    }
}

/// Document layout. Every field is optional; `resolve` fills defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<RawFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bath: Option<RawBath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<RawNoise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RawRun>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFrame {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_tesla: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_halves: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBath {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawNoise {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_spin: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renormalize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<bool>,
}

const TOP_KEYS: &[&str] = &["mode", "seed", "output", "frame", "bath", "noise", "run"];
const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("frame", &["field_tesla", "gamma", "spin_halves"]),
    (
        "bath",
        &["kind", "eta", "preset", "omega0", "gamma_width", "alpha"],
    ),
    ("noise", &["kind", "temperature", "temperatures", "cutoff"]),
    (
        "run",
        &[
            "methods",
            "dt",
            "t_max",
            "substeps",
            "n_traj",
            "replicas",
            "window_fraction",
            "initial_spin",
            "renormalize",
            "noise_margin",
            "full_scale",
        ],
    ),
];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut unknown = BTreeSet::new();
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            unknown.insert(key.clone());
            continue;
        }
        if let Some((_, allowed)) = SECTION_KEYS.iter().find(|(s, _)| s == key) {
            if let Some(section) = value.as_table() {
                unknown.extend(
                    section
                        .keys()
                        .filter(|k| !allowed.contains(&k.as_str()))
                        .map(|k| format!("{key}.{k}")),
                );
            }
        }
    }
    unknown.into_iter().collect()
}

/// One simulated series: a named method or a bath given explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub bath: Bath,
    /// `None` runs without noise.
    pub noise: Option<SpectrumKind>,
    pub cutoff: Option<f64>,
}

impl Series {
    pub fn from_method(m: Method) -> Self {
        let cutoff = (m == Method::LlgQuantum).then_some(DEFAULT_OHMIC_CUTOFF);
        Self {
            label: m.tag().to_string(),
            bath: m.bath(),
            noise: Some(m.spectrum_kind()),
            cutoff,
        }
    }
}

/// Fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub output: PathBuf,
    pub field_tesla: f64,
    pub gamma: f64,
    pub spin_halves: u32,
    /// Explicit bath, if one was given.
    pub bath: Option<Bath>,
    pub preset: Option<String>,
    pub methods: Vec<Method>,
    pub noise_kind: Option<SpectrumKind>,
    pub temperature: f64,
    pub temperatures: Vec<f64>,
    pub cutoff: Option<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub substeps: usize,
    pub n_traj: usize,
    pub replicas: usize,
    pub window_fraction: f64,
    pub initial_spin: Vec3,
    pub renormalize: bool,
    pub noise_margin: f64,
    pub full_scale: bool,
}

const DEFAULT_TEMPERATURES: [f64; 8] = [0.0, 1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0];
const ENSEMBLE_T_MAX: f64 = 2.0 * PI * 48.0;

/// Command-line values that replace the corresponding document keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

/// Parse and validate a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

/// Parse with top-level keys replaced by `overrides` before validation.
pub fn parse_config_with(
    text: &str,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    if let Some(mode) = overrides.mode {
        table.insert("mode".into(), toml::Value::String(mode.to_string()));
    }
    if let Some(seed) = overrides.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| invalid("seed", format!("{seed} exceeds the TOML integer range")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    if let Some(out) = &overrides.output {
        table.insert(
            "output".into(),
            toml::Value::String(out.to_string_lossy().into_owned()),
        );
    }
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    resolve(raw)
}

fn positive(field: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn resolve_bath(raw: &RawBath) -> Result<(Bath, Option<String>), ConfigError> {
    let explicit = [raw.omega0, raw.gamma_width, raw.alpha];
    let kind = match raw.kind.as_deref() {
        Some(k) => k.to_string(),
        None if raw.preset.is_some() || explicit.iter().any(Option::is_some) => "lorentzian".into(),
        None if raw.eta.is_some() => "ohmic".into(),
        None => return Err(ConfigError::BathRequired),
    };
    match kind.as_str() {
        "ohmic" => {
            if raw.preset.is_some() || explicit.iter().any(Option::is_some) {
                return Err(invalid("bath", "ohmic bath takes only eta"));
            }
            let eta = raw.eta.unwrap_or_else(|| LorentzianParams::set1().eta());
            let p = OhmicParams::new(positive("bath.eta", eta)?)
                .map_err(|e| invalid("bath.eta", e.to_string()))?;
            Ok((Bath::Ohmic(p), None))
        }
        "lorentzian" => {
            if raw.eta.is_some() {
                return Err(invalid(
                    "bath.eta",
                    "lorentzian damping follows from omega0, gamma_width and alpha",
                ));
            }
            match (&raw.preset, explicit) {
                (Some(name), [None, None, None]) => {
                    let p = match name.as_str() {
                        "set1" => LorentzianParams::set1(),
                        "set2" => LorentzianParams::set2(),
                        other => {
                            return Err(invalid(
                                "bath.preset",
                                format!("unknown preset '{other}' (set1, set2)"),
                            ))
                        }
                    };
                    Ok((Bath::Lorentzian(p), Some(name.clone())))
                }
                (Some(_), _) => Err(invalid(
                    "bath.preset",
                    "give either a preset or explicit parameters, not both",
                )),
                (None, [Some(w0), Some(g), Some(a)]) => {
                    let p = LorentzianParams::new(w0, g, a)
                        .map_err(|e| invalid("bath", e.to_string()))?;
                    Ok((Bath::Lorentzian(p), None))
                }
                (None, [None, None, None]) => Err(invalid(
                    "bath",
                    "lorentzian bath needs a preset or omega0, gamma_width, alpha",
                )),
                (None, _) => Err(invalid(
                    "bath",
                    "explicit lorentzian parameters require all of omega0, gamma_width, alpha",
                )),
            }
        }
        other => Err(invalid(
            "bath.kind",
            format!("unknown bath kind '{other}' (ohmic, lorentzian)"),
        )),
    }
}

fn default_noise(bath: &Bath) -> SpectrumKind {
    match bath {
        Bath::Ohmic(_) => SpectrumKind::QuantumOhmic,
        Bath::Lorentzian(_) => SpectrumKind::QuantumLorentzian,
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mode = raw.mode.unwrap_or_default();
    let frame = raw.frame.unwrap_or_default();
    let noise = raw.noise.unwrap_or_default();
    let run = raw.run.unwrap_or_default();
    let full_scale = run.full_scale.unwrap_or(false);

    let field_tesla = positive("frame.field_tesla", frame.field_tesla.unwrap_or(10.0))?;
    let gamma = frame.gamma.unwrap_or(GAMMA_ELECTRON);
    let spin_halves = frame.spin_halves.unwrap_or(1);
    UnitFrame::new(field_tesla, gamma, spin_halves).map_err(|e| invalid("frame", e.to_string()))?;

    let methods = run
        .methods
        .clone()
        .unwrap_or_default()
        .iter()
        .map(|m| {
            m.parse::<Method>()
                .map_err(|e| invalid("run.methods", e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (bath, preset) = match &raw.bath {
        Some(b) if *b != RawBath::default() => {
            let (bath, preset) = resolve_bath(b)?;
            (Some(bath), preset)
        }
        _ => (None, None),
    };
    if bath.is_some() && !methods.is_empty() {
        return Err(invalid(
            "run.methods",
            "give either a [bath] section or run.methods, not both",
        ));
    }
    if bath.is_none() && methods.is_empty() && mode != Mode::Validate && mode != Mode::Sweep {
        return Err(ConfigError::BathRequired);
    }
    if mode == Mode::Sweep && bath.is_some() {
        return Err(invalid(
            "bath",
            "sweep mode compares named methods; list them in run.methods",
        ));
    }
    let methods = if mode == Mode::Sweep && methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        methods
    };

    let noise_kind = match noise.kind.as_deref() {
        Some("none") => None,
        Some(k) => {
            let kind = match (k, bath.as_ref()) {
                ("quantum", Some(Bath::Ohmic(_))) => SpectrumKind::QuantumOhmic,
                ("quantum", Some(Bath::Lorentzian(_))) => SpectrumKind::QuantumLorentzian,
                ("classical", Some(Bath::Ohmic(_))) => SpectrumKind::ClassicalOhmic,
                ("classical", Some(Bath::Lorentzian(_))) => SpectrumKind::ClassicalLorentzian,
                _ => k
                    .parse::<SpectrumKind>()
                    .map_err(|e| invalid("noise.kind", e.to_string()))?,
            };
            if bath.is_none() {
                return Err(invalid(
                    "noise.kind",
                    "named methods fix their own noise kind",
                ));
            }
            Some(kind)
        }
        None => bath.as_ref().map(default_noise),
    };
    let cutoff = match noise.cutoff {
        Some(c) => Some(positive("noise.cutoff", c)?),
        None if noise_kind == Some(SpectrumKind::QuantumOhmic) => Some(DEFAULT_OHMIC_CUTOFF),
        None => None,
    };

    let temperature = noise.temperature.unwrap_or(0.0);
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(invalid(
            "noise.temperature",
            format!("must be >= 0 K, got {temperature}"),
        ));
    }
    let temperatures = noise
        .temperatures
        .clone()
        .unwrap_or_else(|| DEFAULT_TEMPERATURES.to_vec());
    if temperatures.is_empty() || temperatures.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid(
            "noise.temperatures",
            "need a non-empty list of temperatures >= 0 K",
        ));
    }
    if temperatures.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("noise.temperatures", "must be sorted ascending"));
    }
    if let (Some(kind), Some(b)) = (noise_kind, bath) {
        let frame = UnitFrame::new(field_tesla, gamma, spin_halves)
            .map_err(|e| invalid("frame", e.to_string()))?;
        power_spectrum(kind, b, temperature, &frame, cutoff)
            .map_err(|e| invalid("noise", e.to_string()))?;
    }

    let dt = positive("run.dt", run.dt.unwrap_or(DEFAULT_DT))?;
    let default_t_max = match mode {
        Mode::Sweep if full_scale => FULL_SWEEP_T_MAX,
        Mode::Sweep => DESK_SWEEP_T_MAX,
        _ => ENSEMBLE_T_MAX,
    };
    let t_max = positive("run.t_max", run.t_max.unwrap_or(default_t_max))?;
    if t_max < dt {
        return Err(invalid("run.t_max", format!("must be at least dt = {dt}")));
    }
    let substeps = run.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    if substeps == 0 {
        return Err(invalid("run.substeps", "must be at least 1"));
    }
    let n_traj = run.n_traj.unwrap_or(if full_scale { 500 } else { 100 });
    if n_traj < 2 {
        return Err(invalid(
            "run.n_traj",
            format!("must be at least 2, got {n_traj}"),
        ));
    }
    let replicas = run.replicas.unwrap_or(16);
    if replicas == 0 {
        return Err(invalid("run.replicas", "must be at least 1"));
    }
    let window_fraction = run.window_fraction.unwrap_or(0.25);
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(invalid(
            "run.window_fraction",
            format!("must lie in (0, 1], got {window_fraction}"),
        ));
    }
    let s = run.initial_spin.unwrap_or([-1.0, 0.0, 0.0]);
    let initial_spin = Vec3::new(s[0], s[1], s[2]);
    if (initial_spin.norm() - 1.0).abs() > 1e-9 {
        return Err(invalid(
            "run.initial_spin",
            format!("must be a unit vector, |s| = {}", initial_spin.norm()),
        ));
    }
    let noise_margin = run.noise_margin.unwrap_or(DEFAULT_NOISE_MARGIN);
    if !(noise_margin.is_finite() && noise_margin >= 0.0) {
        return Err(invalid(
            "run.noise_margin",
            format!("must be >= 0, got {noise_margin}"),
        ));
    }

    Ok(ExperimentConfig {
        mode,
        seed: raw.seed.unwrap_or(0),
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        field_tesla,
        gamma,
        spin_halves,
        bath,
        preset,
        methods,
        noise_kind,
        temperature,
        temperatures,
        cutoff,
        dt,
        t_max,
        substeps,
        n_traj,
        replicas,
        window_fraction,
        initial_spin,
        renormalize: run.renormalize.unwrap_or(false),
        noise_margin,
        full_scale,
    })
}

impl ExperimentConfig {
    pub fn frame(&self) -> UnitFrame {
        UnitFrame::new(self.field_tesla, self.gamma, self.spin_halves)
            .expect("frame validated at parse time")
    }

    /// Series to simulate: the explicit bath, or one per named method.
    pub fn series(&self) -> Vec<Series> {
        match self.bath {
            Some(bath) => vec![Series {
                label: self.preset.clone().unwrap_or_else(|| match bath {
                    Bath::Ohmic(_) => "ohmic".into(),
                    Bath::Lorentzian(_) => "lorentzian".into(),
                }),
                bath,
                noise: self.noise_kind,
                cutoff: self.cutoff,
            }],
            None => self
                .methods
                .iter()
                .copied()
                .map(Series::from_method)
                .collect(),
        }
    }

    /// Integrator settings for `series` at temperature `T`.
    pub fn integrator(
        &self,
        series: &Series,
        temperature: f64,
    ) -> memspin_core::Result<IntegratorConfig> {
        let spectrum = series
            .noise
            .map(|kind| {
                power_spectrum(kind, series.bath, temperature, &self.frame(), series.cutoff)
            })
            .transpose()?;
        let mut cfg = IntegratorConfig::new(series.bath, spectrum, self.t_max);
        cfg.dt = self.dt;
        cfg.substeps = self.substeps;
        cfg.renormalize = self.renormalize;
        cfg.noise_margin = self.noise_margin;
        Ok(cfg)
    }

    /// Canonical document that parses back to this configuration.
    pub fn canonical(&self) -> RawConfig {
        let bath = self.bath.map(|b| match b {
            Bath::Ohmic(p) => RawBath {
                kind: Some("ohmic".into()),
                eta: Some(p.eta),
                ..Default::default()
            },
            Bath::Lorentzian(p) => match &self.preset {
                Some(name) => RawBath {
                    kind: Some("lorentzian".into()),
                    preset: Some(name.clone()),
                    ..Default::default()
                },
                None => RawBath {
                    kind: Some("lorentzian".into()),
                    omega0: Some(p.omega0),
                    gamma_width: Some(p.gamma_width),
                    alpha: Some(p.alpha),
                    ..Default::default()
                },
            },
        });
        let noise_kind = if self.bath.is_some() {
            Some(
                self.noise_kind
                    .map_or_else(|| "none".to_string(), |k| k.name().to_string()),
            )
        } else {
            None
        };
        RawConfig {
            mode: Some(self.mode),
            seed: Some(self.seed),
            output: Some(self.output.clone()),
            frame: Some(RawFrame {
                field_tesla: Some(self.field_tesla),
                gamma: Some(self.gamma),
                spin_halves: Some(self.spin_halves),
            }),
            bath,
            noise: Some(RawNoise {
                kind: noise_kind,
                temperature: Some(self.temperature),
                temperatures: Some(self.temperatures.clone()),
                cutoff: self.cutoff,
            }),
            run: Some(RawRun {
                methods: (!self.methods.is_empty())
                    .then(|| self.methods.iter().map(|m| m.tag().to_string()).collect()),
                dt: Some(self.dt),
                t_max: Some(self.t_max),
                substeps: Some(self.substeps),
                n_traj: Some(self.n_traj),
                replicas: Some(self.replicas),
                window_fraction: Some(self.window_fraction),
                initial_spin: Some([
                    self.initial_spin.x,
                    self.initial_spin.y,
                    self.initial_spin.z,
                ]),
                renormalize: Some(self.renormalize),
                noise_margin: Some(self.noise_margin),
                full_scale: Some(self.full_scale),
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.canonical()).expect("config serializes")
    }
}
