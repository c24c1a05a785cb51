//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::analyze::SweepAxis;
use crate::evolve::SteadyCriteria;
use crate::jumps::Unraveling;
use crate::qops::{HilbertSpec, Level};
use crate::scheme::{Model, SchemeParams};

use super::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub params: SchemeParams,
    pub n_motional: usize,
    pub dt: Option<f64>,
    /// Horizon; each command has its own default when unset.
    pub t_max: Option<f64>,
    pub seed: u64,
    pub ensemble_size: usize,
    pub out: PathBuf,
    pub stride: usize,
    pub initial: (Level, Level),
    pub unraveling: Unraveling,
    pub slope_threshold: f64,
    pub hold_time: f64,
    pub time_cap: f64,
    pub check_interval: f64,
    pub reach_tolerance: f64,
    pub sample_interval: f64,
    pub table: bool,
    pub table_h_r: Vec<f64>,
    pub table_xi: Vec<f64>,
    pub axis1: SweepAxis,
    pub axis1_values: Vec<f64>,
    pub axis2: SweepAxis,
    pub axis2_values: Vec<f64>,
    pub fit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = SteadyCriteria::default();
        Self {
            model: Model::Eliminated,
            params: SchemeParams::default(),
            n_motional: HilbertSpec::DEFAULT_MOTIONAL,
            dt: None,
            t_max: None,
            seed: 0,
            ensemble_size: 1,
            out: PathBuf::from("out"),
            stride: 100,
            initial: (Level::Ground, Level::Ground),
            unraveling: Unraveling::PerIon,
            slope_threshold: c.slope_threshold,
            hold_time: c.hold_time,
            time_cap: c.time_cap,
            check_interval: c.check_interval,
            reach_tolerance: 0.005,
            sample_interval: 1e-5,
            table: true,
            table_h_r: vec![1.0, 10.0, 100.0, 1000.0],
            table_xi: vec![0.0, 0.01, 0.03, 0.1],
            axis1: SweepAxis::Omega,
            axis1_values: Vec::new(),
            axis2: SweepAxis::OmegaR,
            axis2_values: Vec::new(),
            fit: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "omega",
    "omega_r",
    "omega_rp",
    "gamma_s",
    "gamma_sp",
    "h_r",
    "xi",
    "n_motional",
    "dt",
    "t_max",
    "seed",
    "ensemble_size",
    "out",
    "stride",
    "initial",
    "unraveling",
    "slope_threshold",
    "hold_time",
    "time_cap",
    "check_interval",
    "reach_tolerance",
    "sample_interval",
    "table",
    "table_h_r",
    "table_xi",
    "axis1",
    "axis1_values",
    "axis2",
    "axis2_values",
    "fit",
];

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("{key}: expected {what}, got {value:?}"))
}

fn float(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn positive(key: &str, v: &str) -> Result<f64, CliError> {
    float(key, v).and_then(|x| if x > 0.0 { Ok(x) } else { Err(bad(key, v, "a positive number")) })
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| float(key, x.trim())).collect()
}

fn axis(key: &str, v: &str) -> Result<SweepAxis, CliError> {
    SweepAxis::parse(v).ok_or_else(|| bad(key, v, "a parameter name such as omega or h_r"))
}

fn level(c: char) -> Option<Level> {
    match c {
        'g' => Some(Level::Ground),
        'e' => Some(Level::Excited),
        _ => None,
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let p = &mut self.params;
        match key {
            "model" => {
                self.model = match v {
                    "full" => Model::Full,
                    "eliminated" => Model::Eliminated,
                    _ => return Err(bad(key, v, "full or eliminated")),
                }
            }
            "omega" => p.omega = float(key, v)?,
            "omega_r" => p.omega_r = float(key, v)?,
            "omega_rp" => p.omega_rp = float(key, v)?,
            "gamma_s" => p.gamma_s = float(key, v)?,
            "gamma_sp" => p.gamma_sp = float(key, v)?,
            "h_r" => p.h_r = float(key, v)?,
            "xi" => p.xi = float(key, v)?,
            "n_motional" => self.n_motional = count(key, v)?,
            "dt" => self.dt = Some(positive(key, v)?),
            "t_max" => self.t_max = Some(float(key, v)?),
            "seed" => self.seed = v.parse().map_err(|_| bad(key, v, "an unsigned 64-bit integer"))?,
            "ensemble_size" => self.ensemble_size = count(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "stride" => self.stride = count(key, v)?.max(1),
            "initial" => {
                let mut chars = v.chars();
                self.initial = match (chars.next().and_then(level), chars.next().and_then(level), chars.next()) {
                    (Some(a), Some(b), None) => (a, b),
                    _ => return Err(bad(key, v, "one of gg, ge, eg, ee")),
                }
            }
            "unraveling" => {
                self.unraveling = Unraveling::parse(v).ok_or_else(|| bad(key, v, "per-ion or sym-antisym"))?
            }
            "slope_threshold" => self.slope_threshold = positive(key, v)?,
            "hold_time" => self.hold_time = float(key, v)?,
            "time_cap" => self.time_cap = float(key, v)?,
            "check_interval" => self.check_interval = positive(key, v)?,
            "reach_tolerance" => self.reach_tolerance = positive(key, v)?,
            "sample_interval" => self.sample_interval = positive(key, v)?,
            "table" => self.table = flag(key, v)?,
            "table_h_r" => self.table_h_r = list(key, v)?,
            "table_xi" => self.table_xi = list(key, v)?,
            "axis1" => self.axis1 = axis(key, v)?,
            "axis1_values" => self.axis1_values = list(key, v)?,
            "axis2" => self.axis2 = axis(key, v)?,
            "axis2_values" => self.axis2_values = list(key, v)?,
            "fit" => self.fit = flag(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key = value", no + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {}", no + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies one `--set key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn criteria(&self) -> SteadyCriteria {
        SteadyCriteria {
            slope_threshold: self.slope_threshold,
            hold_time: self.hold_time,
            time_cap: self.time_cap,
            check_interval: self.check_interval,
            dt: self.dt,
            stride: self.stride,
        }
    }
}
