//! Configuration parsing: flat `key = value` text with section headers.
//!
//! Dimensioned values carry a mandatory unit suffix that is checked and
//! stripped on parse: `/ps` (or `ps^-1`) for rates and angular frequencies,
//! `ps` for times, `K` for temperatures, and `eV`, `meV`, `me`, `kg/m3`,
//! `m/s` for the bulk-phonon block. Dimensionless keys are bare numbers.
//! Validation collects every violation instead of stopping at the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tempoloop::bath::{BulkPhononParams, CutoffForm, SpectralDensity};

#[derive(Debug, Clone, PartialEq)]
pub enum BathKind {
    None,
    Parametric,
    GaasBulk,
}

#[derive(Debug, Clone)]
pub struct BathParams {
    pub kind: BathKind,
    pub alpha: f64,
    pub exponent: f64,
    pub omega_c: f64,
    pub cutoff_form: CutoffForm,
    pub gaas: BulkPhononParams,
    pub temperature: f64,
    pub freq_nodes: usize,
    pub cell_nodes: usize,
    pub omega_max: Option<f64>,
}

impl BathParams {
    pub fn spectral_density(&self) -> SpectralDensity {
        match self.kind {
            BathKind::None => SpectralDensity::none(),
            BathKind::Parametric => SpectralDensity::Parametric {
                alpha: self.alpha,
                exponent: self.exponent,
                omega_c: self.omega_c,
                cutoff: self.cutoff_form,
            },
            BathKind::GaasBulk => SpectralDensity::GaasBulk(self.gaas),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Excited,
    Ground,
    MaximallyMixed,
    /// Populations one half each with rho01 = i * coherence.
    Coherent {
        coherence: f64,
    },
}

/// Fully validated simulation parameters.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub experiment: String,
    pub out_dir: PathBuf,
    pub omega0: f64,
    pub rabi: f64,
    pub bath: BathParams,
    pub dt: f64,
    pub n_c: usize,
    pub d_cut: f64,
    pub max_bond: Option<usize>,
    pub gamma_rate: f64,
    pub tau: f64,
    pub n_d: usize,
    pub phase: f64,
    pub dephasing: f64,
    pub n_ph: usize,
    pub order: usize,
    pub total_time: f64,
    pub initial: InitialState,
    pub jobs: usize,
    /// Sweep entries: (section.key, values), expanded as a cartesian
    /// product in declaration order.
    pub sweeps: Vec<(String, Vec<f64>)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            out_dir: PathBuf::from("results"),
            omega0: 0.0,
            rabi: 0.0,
            bath: BathParams {
                kind: BathKind::Parametric,
                alpha: 0.02,
                exponent: 3.0,
                omega_c: 2.0,
                cutoff_form: CutoffForm::Gaussian,
                gaas: BulkPhononParams::gaas_example(),
                temperature: 4.0,
                freq_nodes: 600,
                cell_nodes: 24,
                omega_max: None,
            },
            dt: 0.1,
            n_c: 4,
            d_cut: 1e-12,
            max_bond: None,
            gamma_rate: 0.9,
            tau: 1.2,
            n_d: 4,
            phase: 1.0,
            dephasing: 0.0,
            n_ph: 1,
            order: 10,
            total_time: 5.0,
            initial: InitialState::Excited,
            jobs: 1,
            sweeps: Vec::new(),
        }
    }
}

/// Unit class expected for a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Dimensionless,
    InversePicoseconds,
    Picoseconds,
    Kelvin,
    ElectronVolt,
    MilliElectronVolt,
    ElectronMass,
    KgPerCubicMeter,
    MetersPerSecond,
    Text,
}

impl Unit {
    fn suffixes(self) -> &'static [&'static str] {
        match self {
            Unit::Dimensionless | Unit::Text => &[],
            Unit::InversePicoseconds => &["/ps", "ps^-1"],
            Unit::Picoseconds => &["ps"],
            Unit::Kelvin => &["K"],
            Unit::ElectronVolt => &["eV"],
            Unit::MilliElectronVolt => &["meV"],
            Unit::ElectronMass => &["me"],
            Unit::KgPerCubicMeter => &["kg/m3"],
            Unit::MetersPerSecond => &["m/s"],
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Unit::Dimensionless => "a bare number",
            Unit::Text => "text",
            Unit::InversePicoseconds => "a rate with suffix /ps",
            Unit::Picoseconds => "a time with suffix ps",
            Unit::Kelvin => "a temperature with suffix K",
            Unit::ElectronVolt => "an energy with suffix eV",
            Unit::MilliElectronVolt => "an energy with suffix meV",
            Unit::ElectronMass => "a mass with suffix me",
            Unit::KgPerCubicMeter => "a density with suffix kg/m3",
            Unit::MetersPerSecond => "a velocity with suffix m/s",
        }
    }
}

/// Known keys: (section, key, unit).
const KEYS: &[(&str, &str, Unit)] = &[
    ("system", "omega0", Unit::InversePicoseconds),
    ("system", "rabi", Unit::InversePicoseconds),
    ("bath", "kind", Unit::Text),
    ("bath", "alpha", Unit::Dimensionless),
    ("bath", "exponent", Unit::Dimensionless),
    ("bath", "omega_c", Unit::InversePicoseconds),
    ("bath", "cutoff_form", Unit::Text),
    ("bath", "temperature", Unit::Kelvin),
    ("bath", "freq_nodes", Unit::Dimensionless),
    ("bath", "cell_nodes", Unit::Dimensionless),
    ("bath", "omega_max", Unit::InversePicoseconds),
    ("bath", "d1", Unit::ElectronVolt),
    ("bath", "d2", Unit::ElectronVolt),
    ("bath", "m1", Unit::ElectronMass),
    ("bath", "m2", Unit::ElectronMass),
    ("bath", "e1", Unit::MilliElectronVolt),
    ("bath", "e2", Unit::MilliElectronVolt),
    ("bath", "density", Unit::KgPerCubicMeter),
    ("bath", "sound_velocity", Unit::MetersPerSecond),
    ("tempo", "dt", Unit::Picoseconds),
    ("tempo", "n_c", Unit::Dimensionless),
    ("tempo", "d_cut", Unit::Dimensionless),
    ("tempo", "max_bond", Unit::Dimensionless),
    ("feedback", "gamma_rate", Unit::InversePicoseconds),
    ("feedback", "tau", Unit::Picoseconds),
    ("feedback", "n_d", Unit::Dimensionless),
    ("feedback", "phase", Unit::Dimensionless),
    ("feedback", "omega0", Unit::InversePicoseconds),
    ("feedback", "dephasing", Unit::InversePicoseconds),
    ("feedback", "n_ph", Unit::Dimensionless),
    ("feedback", "order", Unit::Dimensionless),
    ("initial", "state", Unit::Text),
    ("initial", "coherence", Unit::Dimensionless),
    ("run", "experiment", Unit::Text),
    ("run", "out", Unit::Text),
    ("run", "total_time", Unit::Picoseconds),
    ("run", "jobs", Unit::Dimensionless),
];

fn key_unit(section: &str, key: &str) -> Option<Unit> {
    KEYS.iter()
        .find(|(s, k, _)| *s == section && *k == key)
        .map(|(_, _, u)| *u)
}

/// Parses a numeric value with its mandatory unit suffix.
fn parse_dimensioned(value: &str, unit: Unit, ctx: &str, errors: &mut Vec<String>) -> Option<f64> {
    let value = value.trim();
    if unit == Unit::Dimensionless {
        match value.parse::<f64>() {
            Ok(v) => return Some(v),
            Err(_) => {
                errors.push(format!(
                    "{ctx}: expected {} but found '{value}'",
                    unit.describe()
                ));
                return None;
            }
        }
    }
    for suffix in unit.suffixes() {
        if let Some(stripped) = value.strip_suffix(suffix) {
            let number = stripped.trim();
            match number.parse::<f64>() {
                Ok(v) => return Some(v),
                Err(_) => {
                    errors.push(format!("{ctx}: cannot parse number '{number}'"));
                    return None;
                }
            }
        }
    }
    errors.push(format!(
        "{ctx}: expected {} but found '{value}'",
        unit.describe()
    ));
    None
}

fn parse_usize(v: f64, ctx: &str, errors: &mut Vec<String>) -> usize {
    if v < 0.0 || v.fract() != 0.0 {
        errors.push(format!("{ctx}: expected a nonnegative integer, found {v}"));
        0
    } else {
        v as usize
    }
}

/// Raw section/key/value triples in file order.
fn tokenize(text: &str, errors: &mut Vec<String>) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                if section.is_empty() {
                    errors.push(format!(
                        "line {}: key '{}' appears before any section header",
                        lineno + 1,
                        key.trim()
                    ));
                } else {
                    out.push((
                        section.clone(),
                        key.trim().to_string(),
                        value.trim().to_string(),
                    ));
                }
            }
            None => errors.push(format!("line {}: expected 'key = value'", lineno + 1)),
        }
    }
    out
}

const SECTIONS: &[&str] = &["system", "bath", "tempo", "feedback", "initial", "run", "sweep"];

/// Applies one key to the configuration; unknown keys and malformed values
/// are recorded as violations.
fn apply_key(
    cfg: &mut SimulationConfig,
    section: &str,
    key: &str,
    value: &str,
    errors: &mut Vec<String>,
) {
    let ctx = format!("{section}.{key}");
    if !SECTIONS.contains(&section) {
        errors.push(format!("unknown section [{section}]"));
        return;
    }
    if section == "sweep" {
        let known_sweep = KEYS
            .iter()
            .any(|(_, k, u)| *k == key && *u == Unit::Dimensionless);
        if !known_sweep {
            errors.push(format!(
                "sweep key '{key}' is not a known dimensionless parameter"
            ));
            return;
        }
        let mut values = Vec::new();
        for item in value.split(',') {
            match item.trim().parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) => errors.push(format!("{ctx}: cannot parse sweep value '{}'", item.trim())),
            }
        }
        if values.is_empty() {
            errors.push(format!("{ctx}: empty sweep value list"));
        } else {
            cfg.sweeps.push((key.to_string(), values));
        }
        return;
    }
    let unit = match key_unit(section, key) {
        Some(u) => u,
        None => {
            errors.push(format!("unknown key '{key}' in section [{section}]"));
            return;
        }
    };
    if unit == Unit::Text {
        match (section, key) {
            ("bath", "kind") => match value {
                "parametric" => cfg.bath.kind = BathKind::Parametric,
                "gaas-bulk" => cfg.bath.kind = BathKind::GaasBulk,
                "none" => cfg.bath.kind = BathKind::None,
                other => errors.push(format!(
                    "{ctx}: expected parametric | gaas-bulk | none, found '{other}'"
                )),
            },
            ("bath", "cutoff_form") => match value {
                "exponential" => cfg.bath.cutoff_form = CutoffForm::Exponential,
                "gaussian" => cfg.bath.cutoff_form = CutoffForm::Gaussian,
                other => errors.push(format!(
                    "{ctx}: expected exponential | gaussian, found '{other}'"
                )),
            },
            ("initial", "state") => match value {
                "excited" => cfg.initial = InitialState::Excited,
                "ground" => cfg.initial = InitialState::Ground,
                "mixed" => cfg.initial = InitialState::MaximallyMixed,
                "coherent" => {
                    let coherence = match cfg.initial {
                        InitialState::Coherent { coherence } => coherence,
                        _ => 0.5,
                    };
                    cfg.initial = InitialState::Coherent { coherence };
                }
                other => errors.push(format!(
                    "{ctx}: expected excited | ground | mixed | coherent, found '{other}'"
                )),
            },
            ("run", "experiment") => cfg.experiment = value.to_string(),
            ("run", "out") => cfg.out_dir = PathBuf::from(value),
            _ => unreachable!("text keys are exhaustively matched"),
        }
        return;
    }
    let Some(v) = parse_dimensioned(value, unit, &ctx, errors) else {
        return;
    };
    match (section, key) {
        ("system", "omega0") => cfg.omega0 = v,
        ("system", "rabi") => cfg.rabi = v,
        ("bath", "alpha") => cfg.bath.alpha = v,
        ("bath", "exponent") => cfg.bath.exponent = v,
        ("bath", "omega_c") => cfg.bath.omega_c = v,
        ("bath", "temperature") => cfg.bath.temperature = v,
        ("bath", "freq_nodes") => cfg.bath.freq_nodes = parse_usize(v, &ctx, errors),
        ("bath", "cell_nodes") => cfg.bath.cell_nodes = parse_usize(v, &ctx, errors),
        ("bath", "omega_max") => cfg.bath.omega_max = Some(v),
        ("bath", "d1") => cfg.bath.gaas.d1_ev = v,
        ("bath", "d2") => cfg.bath.gaas.d2_ev = v,
        ("bath", "m1") => cfg.bath.gaas.m1_me = v,
        ("bath", "m2") => cfg.bath.gaas.m2_me = v,
        ("bath", "e1") => cfg.bath.gaas.e1_mev = v,
        ("bath", "e2") => cfg.bath.gaas.e2_mev = v,
        ("bath", "density") => cfg.bath.gaas.density_kg_m3 = v,
        ("bath", "sound_velocity") => cfg.bath.gaas.sound_velocity_m_s = v,
        ("tempo", "dt") => cfg.dt = v,
        ("tempo", "n_c") => cfg.n_c = parse_usize(v, &ctx, errors),
        ("tempo", "d_cut") => cfg.d_cut = v,
        ("tempo", "max_bond") => {
            let b = parse_usize(v, &ctx, errors);
            cfg.max_bond = if b == 0 { None } else { Some(b) };
        }
        ("feedback", "gamma_rate") => cfg.gamma_rate = v,
        ("feedback", "tau") => cfg.tau = v,
        ("feedback", "n_d") => cfg.n_d = parse_usize(v, &ctx, errors),
        ("feedback", "phase") => cfg.phase = v,
        ("feedback", "omega0") => {
            // Equivalent way of stating the feedback phase.
            cfg.phase = v * cfg.tau / (2.0 * std::f64::consts::PI);
        }
        ("feedback", "dephasing") => cfg.dephasing = v,
        ("feedback", "n_ph") => cfg.n_ph = parse_usize(v, &ctx, errors),
        ("feedback", "order") => cfg.order = parse_usize(v, &ctx, errors),
        ("initial", "coherence") => {
            cfg.initial = InitialState::Coherent { coherence: v };
        }
        ("run", "total_time") => cfg.total_time = v,
        ("run", "jobs") => cfg.jobs = parse_usize(v, &ctx, errors).max(1),
        _ => unreachable!("numeric keys are exhaustively matched"),
    }
}

/// Whether the named experiment drives the feedback reservoir.
pub fn experiment_uses_feedback(name: &str) -> bool {
    !matches!(name, "ibm-benchmark" | "spin-boson")
}

/// Cross-field checks, collected rather than short-circuited.
pub fn validate(cfg: &SimulationConfig, errors: &mut Vec<String>) {
    if cfg.experiment.is_empty() {
        errors.push("run.experiment is required".into());
    }
    if cfg.dt <= 0.0 {
        errors.push(format!("tempo.dt must be positive, found {}", cfg.dt));
    }
    if cfg.n_c == 0 {
        errors.push("tempo.n_c must be at least 1".into());
    }
    if !(0.0..1.0).contains(&cfg.d_cut) {
        errors.push(format!("tempo.d_cut must lie in [0, 1), found {}", cfg.d_cut));
    }
    if cfg.n_d == 0 {
        errors.push("feedback.n_d must be at least 1".into());
    }
    if cfg.n_ph == 0 || cfg.order == 0 {
        errors.push("feedback.n_ph and feedback.order must be at least 1".into());
    }
    if cfg.tau <= 0.0 {
        errors.push(format!("feedback.tau must be positive, found {}", cfg.tau));
    }
    if experiment_uses_feedback(&cfg.experiment) && cfg.n_d != 0 && cfg.tau > 0.0 {
        let dt_fb = cfg.tau / cfg.n_d as f64;
        if (cfg.dt - dt_fb).abs() > 1e-9 * dt_fb.max(cfg.dt) {
            errors.push(format!(
                "tempo.dt ({} ps) times feedback.n_d ({}) must equal feedback.tau ({} ps) when feedback is active",
                cfg.dt, cfg.n_d, cfg.tau
            ));
        }
    }
    if cfg.dt > 0.0 && cfg.total_time > 0.0 {
        let steps = cfg.total_time / cfg.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            errors.push(format!(
                "run.total_time ({} ps) must be an integer multiple of tempo.dt ({} ps)",
                cfg.total_time, cfg.dt
            ));
        }
    } else if cfg.total_time <= 0.0 {
        errors.push(format!(
            "run.total_time must be positive, found {}",
            cfg.total_time
        ));
    }
}

/// Parses a configuration file, returning either a validated configuration
/// or the complete list of violations.
pub fn parse_config(path: &Path) -> Result<SimulationConfig, Vec<String>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Err(vec![format!("cannot read {}: {e}", path.display())]),
    };
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SimulationConfig, Vec<String>> {
    let mut errors = Vec::new();
    let entries = tokenize(text, &mut errors);

    // Reject duplicate keys; later silently winning would hide mistakes.
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (section, key, _) in &entries {
        if section == "sweep" {
            continue;
        }
        *seen.entry((section.clone(), key.clone())).or_insert(0) += 1;
    }
    for ((section, key), count) in &seen {
        if *count > 1 {
            errors.push(format!("duplicate key {section}.{key} ({count} occurrences)"));
        }
    }

    let mut cfg = SimulationConfig::default();
    // Apply tau before a feedback.omega0 that may depend on it.
    let mut ordered = entries.clone();
    ordered.sort_by_key(|(s, k, _)| (s == "feedback" && k == "omega0") as u8);
    for (section, key, value) in &ordered {
        apply_key(&mut cfg, section, key, value, &mut errors);
    }
    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Applies `--override section.key=value` arguments on top of a parsed
/// configuration; values use the same suffix syntax as the file.
pub fn apply_overrides(
    cfg: &mut SimulationConfig,
    overrides: &[String],
) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    for item in overrides {
        match item.split_once('=') {
            Some((path, value)) => match path.split_once('.') {
                Some((section, key)) => {
                    apply_key(cfg, section.trim(), key.trim(), value.trim(), &mut errors)
                }
                None => errors.push(format!(
                    "override '{item}': expected section.key=value"
                )),
            },
            None => errors.push(format!("override '{item}': expected section.key=value")),
        }
    }
    validate(cfg, &mut errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Expands sweep blocks into concrete configurations with a label per run.
pub fn expand_sweeps(cfg: &SimulationConfig) -> Result<Vec<(String, SimulationConfig)>, Vec<String>> {
    let mut out: Vec<(String, SimulationConfig)> = vec![(String::new(), cfg.clone())];
    for (key, values) in &cfg.sweeps {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for (label, base) in &out {
            for v in values {
                let mut c = base.clone();
                let section = KEYS
                    .iter()
                    .find(|(_, k, _)| k == key)
                    .map(|(s, _, _)| *s)
                    .unwrap_or("run");
                let mut errors = Vec::new();
                apply_key(&mut c, section, key, &format!("{v}"), &mut errors);
                if !errors.is_empty() {
                    return Err(errors);
                }
                // Sweeping n_d keeps tau fixed and retunes dt.
                if key == "n_d" {
                    c.dt = c.tau / c.n_d as f64;
                }
                let tag = format!("{key}-{v}");
                let label = if label.is_empty() {
                    tag
                } else {
                    format!("{label}_{tag}")
                };
                next.push((label, c));
            }
        }
        out = next;
    }
    for (_, c) in &mut out {
        c.sweeps.clear();
        let mut errors = Vec::new();
        validate(c, &mut errors);
        if !errors.is_empty() {
            return Err(errors);
        }
    }
    Ok(out)
}
