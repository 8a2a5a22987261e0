//! JSON scenario schema: parsing, validation with field-path errors,
//! default resolution, and the built-in example scenarios.
//!
//! A scenario file is deserialized into the loosely-typed [`ScenarioFile`]
//! (unknown fields rejected, every error carries the offending field path),
//! then [`resolve`]d into a fully-defaulted [`Scenario`] plus the runnable
//! core objects. The resolved form is what reports and run manifests echo,
//! so a run is reproducible from its own artifacts.

use std::fs;
use std::path::Path;

use ptobs_core::model::{ModelError, StateVec, TriangularSystem};
use ptobs_core::observers::{
    ExtendedPtObserverSpec, HgGainPower, HgObserverSpec, Observer, PtObserverSpec,
};
use ptobs_core::sim::{SimConfig, SimConfigError};
use ptobs_core::timescale::{TimeScale, DEFAULT_MU_CAP};
use serde::{Deserialize, Serialize};

/// Built-in scenarios, shipped inside the binary. `ptobs run <name>` falls
/// back to these when no file of that name exists.
pub const BUILTINS: &[(&str, &str)] = &[
    ("example1", include_str!("../scenarios/example1.json")),
    ("example2", include_str!("../scenarios/example2.json")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    BUILTINS
        .iter()
        .find(|(n, _)| *n == stem)
        .map(|(_, src)| *src)
}

// ---------------------------------------------------------------------------
// raw file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub system: SystemFile,
    pub observers: Vec<ObserverFile>,
    pub initial: InitialFile,
    pub sim: SimFile,
    #[serde(default)]
    pub certify: Option<CertifyFile>,
    #[serde(default)]
    pub output: Option<OutputFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub f: Vec<String>,
    #[serde(default = "zero_expr")]
    pub f0: String,
    #[serde(default = "zero_expr")]
    pub u: String,
    #[serde(default = "zero_expr")]
    pub d: String,
}

fn zero_expr() -> String {
    "0".to_owned()
}

/// One observer entry. Which fields are required depends on `variant`;
/// the split is checked in [`resolve`] so the error can cite the path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverFile {
    pub variant: String,
    pub gains: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_prescribed: Option<f64>,
    pub m: Option<f64>,
    pub mu_cap: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub hg_gain_power: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    /// Initial disturbance estimate for extended observers (augmented state).
    #[serde(default)]
    pub dhat0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub t_end: f64,
    pub dt_base: f64,
    pub dt_min: Option<f64>,
    pub record_stride: Option<usize>,
    pub noise_std: Option<f64>,
    pub seed: Option<u64>,
    pub singularity_shrink: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyFile {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub gamma_bar_f: f64,
    pub sigma_bar: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    /// Stem for per-observer CSV files: `<csv_path>_<label>.csv`.
    pub csv_path: Option<String>,
    pub report_path: Option<String>,
    pub plot_script: Option<String>,
}

// ---------------------------------------------------------------------------
// resolved schema (all defaults applied; echoed in reports and manifests)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: SystemCfg,
    pub observers: Vec<ObserverCfg>,
    pub initial: InitialCfg,
    pub sim: SimCfg,
    pub certify: CertifyCfg,
    pub output: OutputCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemCfg {
    pub n: usize,
    pub f: Vec<String>,
    pub f0: String,
    pub u: String,
    pub d: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ObserverCfg {
    Pt {
        label: String,
        gains: Vec<f64>,
        #[serde(rename = "T")]
        t_prescribed: f64,
        m: f64,
        mu_cap: f64,
    },
    Hg {
        label: String,
        alpha: Vec<f64>,
        epsilon: f64,
        hg_gain_power: String,
    },
    ExtendedPt {
        label: String,
        gains: Vec<f64>,
        #[serde(rename = "T")]
        t_prescribed: f64,
        m: f64,
        mu_cap: f64,
    },
}

impl ObserverCfg {
    pub fn label(&self) -> &str {
        match self {
            ObserverCfg::Pt { label, .. }
            | ObserverCfg::Hg { label, .. }
            | ObserverCfg::ExtendedPt { label, .. } => label,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ObserverCfg::Pt { .. } => "pt",
            ObserverCfg::Hg { .. } => "hg",
            ObserverCfg::ExtendedPt { .. } => "extended_pt",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitialCfg {
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub dhat0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimCfg {
    pub t_end: f64,
    pub dt_base: f64,
    pub dt_min: f64,
    pub record_stride: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub singularity_shrink: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertifyCfg {
    pub enabled: bool,
    pub gamma_bar_f: f64,
    pub sigma_bar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputCfg {
    pub csv_path: String,
    pub report_path: String,
    pub plot_script: String,
}

/// A validated scenario together with the core objects it runs with.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub system: TriangularSystem<f64>,
    /// `(label, observer)` in file order.
    pub observers: Vec<(String, Observer<f64>)>,
    pub x0: StateVec<f64>,
    /// Per-observer initial estimates (extended observers get `dhat0`
    /// appended as the augmented state).
    pub xhat0: Vec<StateVec<f64>>,
    pub sim: SimConfig<f64>,
}

impl LoadedScenario {
    /// Override the noise seed after loading (`--seed`); keeps the echoed
    /// configuration in sync so a rerun from the manifest reproduces bytes.
    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.sim.seed = seed;
        self.sim.seed = seed;
    }
}

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("`{name}` is neither a scenario file nor a built-in scenario (built-ins: {known})")]
    NotFound { name: String, known: String },
    #[error("invalid JSON at {path}: {msg}")]
    Json { path: String, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

/// Parse scenario JSON; schema errors cite the field path.
pub fn parse_scenario(src: &str) -> Result<ScenarioFile, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(src);
    let file: ScenarioFile =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ScenarioError::Json {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
    de.end().map_err(|e| ScenarioError::Json {
        path: ".".to_owned(),
        msg: e.to_string(),
    })?;
    Ok(file)
}

/// Load by file path, falling back to the built-in catalogue by name.
pub fn load(name_or_path: &str) -> Result<LoadedScenario, ScenarioError> {
    let p = Path::new(name_or_path);
    let src = if p.is_file() {
        fs::read_to_string(p).map_err(|source| ScenarioError::Io {
            path: name_or_path.to_owned(),
            source,
        })?
    } else if let Some(builtin) = builtin(name_or_path) {
        builtin.to_owned()
    } else {
        return Err(ScenarioError::NotFound {
            name: name_or_path.to_owned(),
            known: BUILTINS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", "),
        });
    };
    resolve(parse_scenario(&src)?)
}

// ---------------------------------------------------------------------------
// resolution + validation
// ---------------------------------------------------------------------------

/// Apply defaults and validate; every rejection names the offending field.
pub fn resolve(file: ScenarioFile) -> Result<LoadedScenario, ScenarioError> {
    if file.name.trim().is_empty() {
        return Err(invalid("name", "must be non-empty"));
    }
    if file.name.contains(['/', '\\']) {
        return Err(invalid("name", "must not contain path separators"));
    }

    let n = file.system.n;
    if n == 0 {
        return Err(invalid("system.n", "must be at least 1"));
    }
    if file.system.f.len() != n {
        return Err(invalid(
            "system.f",
            format!("has {} entries but system.n = {n}", file.system.f.len()),
        ));
    }

    let system = TriangularSystem::<f64>::parse(
        &file.system.f,
        &file.system.f0,
        &file.system.u,
        &file.system.d,
    )
    .map_err(model_error_path)?;

    if file.observers.is_empty() {
        return Err(invalid("observers", "at least one observer is required"));
    }

    let mut observers = Vec::new();
    let mut cfgs = Vec::new();
    for (i, ob) in file.observers.iter().enumerate() {
        let (cfg, obs) = resolve_observer(i, ob, n)?;
        cfgs.push(cfg);
        observers.push(obs);
    }
    let labels = assign_labels(&cfgs);
    let observers: Vec<(String, Observer<f64>)> =
        labels.iter().cloned().zip(observers).collect();
    let cfgs: Vec<ObserverCfg> = cfgs
        .into_iter()
        .zip(&labels)
        .map(|(c, l)| c.with_label(l.clone()))
        .collect();

    // initial conditions
    let initial = &file.initial;
    if initial.x0.len() != n {
        return Err(invalid(
            "initial.x0",
            format!("expected {n} entries, got {}", initial.x0.len()),
        ));
    }
    if initial.xhat0.len() != n {
        return Err(invalid(
            "initial.xhat0",
            format!("expected {n} entries, got {}", initial.xhat0.len()),
        ));
    }
    if !initial.dhat0.is_finite() {
        return Err(invalid("initial.dhat0", "must be finite"));
    }
    let x0 = StateVec::new(initial.x0.clone())
        .map_err(|e| invalid("initial.x0", e.to_string()))?;
    let xhat0_base = StateVec::new(initial.xhat0.clone())
        .map_err(|e| invalid("initial.xhat0", e.to_string()))?;
    let xhat0: Vec<StateVec<f64>> = observers
        .iter()
        .map(|(_, obs)| {
            if obs.estimates_disturbance() {
                let mut v = initial.xhat0.clone();
                v.push(initial.dhat0);
                StateVec::new(v).expect("entries already checked finite")
            } else {
                xhat0_base.clone()
            }
        })
        .collect();

    // simulation defaults
    let min_t = observers
        .iter()
        .filter_map(|(_, o)| o.timescale())
        .map(|ts| ts.prescribed_time())
        .fold(f64::INFINITY, f64::min);
    let dt_min = file.sim.dt_min.unwrap_or_else(|| {
        1e-9 * if min_t.is_finite() { min_t } else { file.sim.t_end }
    });
    let record_stride = file.sim.record_stride.unwrap_or_else(|| {
        // keep plain fixed-step output near or below ~1e5 rows
        let steps = (file.sim.t_end / file.sim.dt_base).ceil().max(1.0);
        (steps / 1e5).ceil() as usize
    });
    let sim = SimConfig {
        t_end: file.sim.t_end,
        dt_base: file.sim.dt_base,
        dt_min,
        singularity_shrink: file.sim.singularity_shrink.unwrap_or(true),
        record_stride: record_stride.max(1),
        noise_std: file.sim.noise_std.unwrap_or(0.0),
        seed: file.sim.seed.unwrap_or(0),
    };
    sim.validate()
        .map_err(|e| invalid(sim_error_path(&e), e.to_string()))?;

    // certification constants
    let certify = match &file.certify {
        None => CertifyCfg {
            enabled: false,
            gamma_bar_f: 0.0,
            sigma_bar: 0.0,
        },
        Some(c) => {
            if !(c.gamma_bar_f.is_finite() && c.gamma_bar_f >= 0.0) {
                return Err(invalid("certify.gamma_bar_f", "must be finite and >= 0"));
            }
            if !(c.sigma_bar.is_finite() && c.sigma_bar >= 0.0) {
                return Err(invalid("certify.sigma_bar", "must be finite and >= 0"));
            }
            CertifyCfg {
                enabled: c.enabled,
                gamma_bar_f: c.gamma_bar_f,
                sigma_bar: c.sigma_bar,
            }
        }
    };

    let out = file.output.as_ref();
    let pick = |v: Option<&String>, default: &str, path: &str| -> Result<String, ScenarioError> {
        let s = v.map(String::as_str).unwrap_or(default);
        if s.is_empty() {
            return Err(invalid(path, "must be non-empty"));
        }
        if Path::new(s).is_absolute() || s.contains("..") {
            return Err(invalid(path, "must be a relative path inside the run directory"));
        }
        Ok(s.to_owned())
    };
    let output = OutputCfg {
        csv_path: pick(out.and_then(|o| o.csv_path.as_ref()), &file.name, "output.csv_path")?,
        report_path: pick(
            out.and_then(|o| o.report_path.as_ref()),
            "report.txt",
            "output.report_path",
        )?,
        plot_script: pick(
            out.and_then(|o| o.plot_script.as_ref()),
            "plot.gp",
            "output.plot_script",
        )?,
    };

    let scenario = Scenario {
        name: file.name,
        system: SystemCfg {
            n,
            f: file.system.f,
            f0: file.system.f0,
            u: file.system.u,
            d: file.system.d,
        },
        observers: cfgs,
        initial: InitialCfg {
            x0: initial.x0.clone(),
            xhat0: initial.xhat0.clone(),
            dhat0: initial.dhat0,
        },
        sim: SimCfg {
            t_end: sim.t_end,
            dt_base: sim.dt_base,
            dt_min: sim.dt_min,
            record_stride: sim.record_stride,
            noise_std: sim.noise_std,
            seed: sim.seed,
            singularity_shrink: sim.singularity_shrink,
        },
        certify,
        output,
    };

    Ok(LoadedScenario {
        scenario,
        system,
        observers,
        x0,
        xhat0,
        sim,
    })
}

/// Pre-label observer config as produced by `resolve_observer`.
enum RawCfg {
    Pt { gains: Vec<f64>, t: f64, m: f64, mu_cap: f64 },
    Hg { alpha: Vec<f64>, epsilon: f64, hg_gain_power: String },
    ExtendedPt { gains: Vec<f64>, t: f64, m: f64, mu_cap: f64 },
}

impl RawCfg {
    fn variant_name(&self) -> &'static str {
        match self {
            RawCfg::Pt { .. } => "pt",
            RawCfg::Hg { .. } => "hg",
            RawCfg::ExtendedPt { .. } => "extended_pt",
        }
    }

    fn with_label(self, label: String) -> ObserverCfg {
        match self {
            RawCfg::Pt { gains, t, m, mu_cap } => ObserverCfg::Pt {
                label,
                gains,
                t_prescribed: t,
                m,
                mu_cap,
            },
            RawCfg::Hg { alpha, epsilon, hg_gain_power } => ObserverCfg::Hg {
                label,
                alpha,
                epsilon,
                hg_gain_power,
            },
            RawCfg::ExtendedPt { gains, t, m, mu_cap } => ObserverCfg::ExtendedPt {
                label,
                gains,
                t_prescribed: t,
                m,
                mu_cap,
            },
        }
    }
}

/// Labels are the variant name, suffixed with the 1-based position among
/// same-variant observers when a variant appears more than once.
fn assign_labels(cfgs: &[RawCfg]) -> Vec<String> {
    cfgs.iter()
        .enumerate()
        .map(|(i, c)| {
            let name = c.variant_name();
            let total = cfgs.iter().filter(|o| o.variant_name() == name).count();
            if total == 1 {
                name.to_owned()
            } else {
                let ordinal = cfgs[..=i]
                    .iter()
                    .filter(|o| o.variant_name() == name)
                    .count();
                format!("{name}{ordinal}")
            }
        })
        .collect()
}

fn resolve_observer(
    i: usize,
    ob: &ObserverFile,
    n: usize,
) -> Result<(RawCfg, Observer<f64>), ScenarioError> {
    let at = |field: &str| format!("observers[{i}].{field}");
    let require_absent = |present: bool, field: &str| -> Result<(), ScenarioError> {
        if present {
            Err(invalid(
                at(field),
                format!("not a field of variant `{}`", ob.variant),
            ))
        } else {
            Ok(())
        }
    };

    match ob.variant.as_str() {
        "pt" | "extended_pt" => {
            require_absent(ob.alpha.is_some(), "alpha")?;
            require_absent(ob.epsilon.is_some(), "epsilon")?;
            require_absent(ob.hg_gain_power.is_some(), "hg_gain_power")?;
            let extended = ob.variant == "extended_pt";
            let want = if extended { n + 1 } else { n };
            let gains = ob
                .gains
                .clone()
                .ok_or_else(|| invalid(at("gains"), "required for this variant"))?;
            if gains.len() != want {
                return Err(invalid(
                    at("gains"),
                    format!("expected {want} gains for a dimension-{n} plant, got {}", gains.len()),
                ));
            }
            let t = ob
                .t_prescribed
                .ok_or_else(|| invalid(at("T"), "required for this variant"))?;
            let m = ob
                .m
                .ok_or_else(|| invalid(at("m"), "required for this variant"))?;
            let mu_cap = ob.mu_cap.unwrap_or(DEFAULT_MU_CAP);
            let ts = TimeScale::new(t, m, mu_cap)
                .map_err(|e| invalid(at("T/m/mu_cap"), e.to_string()))?;
            let (cfg, obs) = if extended {
                (
                    RawCfg::ExtendedPt { gains: gains.clone(), t, m, mu_cap },
                    Observer::ExtendedPrescribedTime(
                        ExtendedPtObserverSpec::new(gains, ts)
                            .map_err(|e| invalid(at("gains"), e.to_string()))?,
                    ),
                )
            } else {
                (
                    RawCfg::Pt { gains: gains.clone(), t, m, mu_cap },
                    Observer::PrescribedTime(
                        PtObserverSpec::new(gains, ts)
                            .map_err(|e| invalid(at("gains"), e.to_string()))?,
                    ),
                )
            };
            Ok((cfg, obs))
        }
        "hg" => {
            require_absent(ob.gains.is_some(), "gains")?;
            require_absent(ob.t_prescribed.is_some(), "T")?;
            require_absent(ob.m.is_some(), "m")?;
            require_absent(ob.mu_cap.is_some(), "mu_cap")?;
            let alpha = ob
                .alpha
                .clone()
                .ok_or_else(|| invalid(at("alpha"), "required for this variant"))?;
            if alpha.len() != n {
                return Err(invalid(
                    at("alpha"),
                    format!("expected {n} gains for a dimension-{n} plant, got {}", alpha.len()),
                ));
            }
            let epsilon = ob
                .epsilon
                .ok_or_else(|| invalid(at("epsilon"), "required for this variant"))?;
            let power_name = ob.hg_gain_power.as_deref().unwrap_or("standard");
            let power = match power_name {
                "standard" => HgGainPower::Standard,
                "linear" => HgGainPower::Linear,
                other => {
                    return Err(invalid(
                        at("hg_gain_power"),
                        format!("unknown value `{other}` (expected `standard` or `linear`)"),
                    ))
                }
            };
            let spec = HgObserverSpec::with_gain_power(alpha.clone(), epsilon, power)
                .map_err(|e| invalid(at("epsilon"), e.to_string()))?;
            Ok((
                RawCfg::Hg { alpha, epsilon, hg_gain_power: power_name.to_owned() },
                Observer::HighGain(spec),
            ))
        }
        other => Err(invalid(
            at("variant"),
            format!("unknown variant `{other}` (expected `pt`, `hg` or `extended_pt`)"),
        )),
    }
}

fn model_error_path(e: ModelError) -> ScenarioError {
    match &e {
        ModelError::Parse { field, source } => {
            invalid(format!("system.{field}"), source.to_string())
        }
        _ => invalid("system", e.to_string()),
    }
}

fn sim_error_path(e: &SimConfigError) -> &'static str {
    match e {
        SimConfigError::TEnd => "sim.t_end",
        SimConfigError::DtBase => "sim.dt_base",
        SimConfigError::DtMin => "sim.dt_min",
        SimConfigError::RecordStride => "sim.record_stride",
        SimConfigError::NoiseStd => "sim.noise_std",
    }
}
