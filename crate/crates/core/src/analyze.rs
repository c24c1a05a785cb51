//! Observables, two-axis parameter sweeps and the linear error model.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{integrate, steady_state, DensityState, PropagationOptions, SteadyCriteria};
use crate::qops::{HilbertSpec, Level};
use crate::scheme::{build_generator, Model, SchemeParams};

/// Scalar observables of a (possibly unnormalized) state; everything except
/// `trace` refers to `ρ/Tr ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub trace: f64,
    pub fidelity: f64,
    pub mean_phonon: f64,
    pub top_level_population: f64,
}

pub(crate) fn observe(spec: &HilbertSpec, rho: &[C64]) -> Observation {
    let d = spec.dim();
    let n = spec.n_motional();
    let mut trace = 0.0;
    let mut phonons = 0.0;
    let mut top = 0.0;
    for i in 0..d {
        let p = rho[i * d + i].re;
        trace += p;
        let k = i % n;
        phonons += k as f64 * p;
        if k == n - 1 {
            top += p;
        }
    }
    let bell = bell_population(spec, rho);
    Observation {
        trace,
        fidelity: bell / trace,
        mean_phonon: phonons / trace,
        top_level_population: top / trace,
    }
}

/// `⟨ψ₋|Tr_motion ρ|ψ₋⟩` without normalization.
fn bell_population(spec: &HilbertSpec, rho: &[C64]) -> f64 {
    let d = spec.dim();
    let mut acc = 0.0;
    for k in 0..spec.n_motional() {
        let ge = spec.index(Level::Ground, Level::Excited, k);
        let eg = spec.index(Level::Excited, Level::Ground, k);
        acc += rho[ge * d + ge].re + rho[eg * d + eg].re - 2.0 * rho[ge * d + eg].re;
    }
    0.5 * acc
}

/// Population of the antisymmetric Bell state with the motion traced out.
pub fn fidelity(rho: &DensityState) -> f64 {
    bell_population(rho.spec(), rho.matrix().as_slice()) / rho.trace()
}

/// Parameter that a sweep axis varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Omega,
    OmegaR,
    OmegaRp,
    GammaS,
    GammaSp,
    HR,
    Xi,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Omega => "omega",
            SweepAxis::OmegaR => "omega_r",
            SweepAxis::OmegaRp => "omega_rp",
            SweepAxis::GammaS => "gamma_s",
            SweepAxis::GammaSp => "gamma_sp",
            SweepAxis::HR => "h_r",
            SweepAxis::Xi => "xi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "omega" => SweepAxis::Omega,
            "omega_r" => SweepAxis::OmegaR,
            "omega_rp" => SweepAxis::OmegaRp,
            "gamma_s" => SweepAxis::GammaS,
            "gamma_sp" => SweepAxis::GammaSp,
            "h_r" => SweepAxis::HR,
            "xi" => SweepAxis::Xi,
            _ => return None,
        })
    }

    pub fn set(self, p: &mut SchemeParams, v: f64) {
        match self {
            SweepAxis::Omega => p.omega = v,
            SweepAxis::OmegaR => p.omega_r = v,
            SweepAxis::OmegaRp => p.omega_rp = v,
            SweepAxis::GammaS => p.gamma_s = v,
            SweepAxis::GammaSp => p.gamma_sp = v,
            SweepAxis::HR => p.h_r = v,
            SweepAxis::Xi => p.xi = v,
        }
    }
}

/// One evaluated grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    /// `1 - F`, clamped to `[0, 1]`.
    pub error: f64,
    /// Steady state reached before the time cap.
    pub converged: bool,
    /// Top Fock level stayed below the truncation threshold.
    pub valid: bool,
    pub time: f64,
    pub max_top_population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axis1: SweepAxis,
    pub axis1_values: Vec<f64>,
    pub axis2: SweepAxis,
    pub axis2_values: Vec<f64>,
    /// Row-major over (axis1, axis2).
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.axis2_values.len() + j]
    }
}

/// Everything held fixed across a sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepSetup {
    pub model: Model,
    pub params: SchemeParams,
    pub n_motional: usize,
    pub initial: (Level, Level),
    pub criteria: SteadyCriteria,
}

impl SweepSetup {
    pub fn new(params: SchemeParams) -> Self {
        Self {
            model: Model::Eliminated,
            params,
            n_motional: HilbertSpec::DEFAULT_MOTIONAL,
            initial: (Level::Ground, Level::Ground),
            criteria: SteadyCriteria::default(),
        }
    }
}

/// Runs one steady state per cell. Cells are independent and evaluated in
/// parallel on the current rayon pool; results are order-independent.
pub fn sweep(
    axis1: SweepAxis,
    axis1_values: &[f64],
    axis2: SweepAxis,
    axis2_values: &[f64],
    setup: &SweepSetup,
) -> Result<SweepGrid> {
    let points: Vec<(f64, f64)> = axis1_values
        .iter()
        .flat_map(|&x| axis2_values.iter().map(move |&y| (x, y)))
        .collect();
    let cells = points
        .par_iter()
        .map(|&(x, y)| evaluate_cell(axis1, x, axis2, y, setup))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        axis1,
        axis1_values: axis1_values.to_vec(),
        axis2,
        axis2_values: axis2_values.to_vec(),
        cells,
    })
}

/// Sweep over carrier and sideband couplings.
pub fn sweep_couplings(omega_grid: &[f64], omega_r_grid: &[f64], setup: &SweepSetup) -> Result<SweepGrid> {
    sweep(SweepAxis::Omega, omega_grid, SweepAxis::OmegaR, omega_r_grid, setup)
}

pub fn evaluate_cell(axis1: SweepAxis, x: f64, axis2: SweepAxis, y: f64, setup: &SweepSetup) -> Result<SweepCell> {
    let mut p = setup.params;
    axis1.set(&mut p, x);
    axis2.set(&mut p, y);
    let gen = build_generator(setup.model, &p, setup.n_motional)?;
    let rho0 = DensityState::product(gen.spec(), setup.initial.0, setup.initial.1)?;
    let ss = steady_state(&gen, &rho0, &setup.criteria)?;
    Ok(SweepCell {
        axis1: x,
        axis2: y,
        error: ss.error().clamp(0.0, 1.0),
        converged: ss.converged,
        valid: !ss.truncation_violated,
        time: ss.time,
        max_top_population: ss.max_top_population,
    })
}

/// Full and eliminated fidelity series on a shared time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelComparison {
    pub times: Vec<f64>,
    pub full: Vec<f64>,
    pub eliminated: Vec<f64>,
    pub max_abs_delta: f64,
    /// `γ_s′/Ω_r′`.
    pub ratio: f64,
    pub full_truncation_violated: bool,
    pub eliminated_truncation_violated: bool,
}

/// Integrates both generators from `|ion1 ion2, 0⟩` and samples them every
/// `sample_interval`. Each model keeps its own step size, shrunk so that the
/// samples land on the same instants.
pub fn compare_models(
    p: &SchemeParams,
    n_motional: usize,
    initial: (Level, Level),
    t_max: f64,
    sample_interval: f64,
) -> Result<ModelComparison> {
    if !(sample_interval > 0.0 && t_max >= 0.0) {
        return Err(Error::InvalidParams("comparison needs t_max >= 0 and a positive sample interval".into()));
    }
    let samples = (t_max / sample_interval).round() as usize;
    let horizon = samples as f64 * sample_interval;
    let run = |model: Model| -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let gen = build_generator(model, p, n_motional)?;
        let rho0 = DensityState::product(gen.spec(), initial.0, initial.1)?;
        let per_sample = (sample_interval / gen.default_dt()).ceil().max(1.0) as usize;
        let opts = PropagationOptions::new(horizon)
            .with_dt(sample_interval / per_sample as f64)
            .with_stride(per_sample);
        let prop = integrate(&gen, &rho0, &opts)?;
        Ok((prop.series.times, prop.series.fidelity, prop.truncation_violated))
    };
    let (times, full, full_bad) = run(Model::Full)?;
    let (_, eliminated, elim_bad) = run(Model::Eliminated)?;
    if full.len() != eliminated.len() {
        return Err(Error::GridMismatch);
    }
    let max_abs_delta = full.iter().zip(&eliminated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ModelComparison {
        times,
        full,
        eliminated,
        max_abs_delta,
        ratio: p.gamma_sp / p.omega_rp,
        full_truncation_violated: full_bad,
        eliminated_truncation_violated: elim_bad,
    })
}

/// Least-squares fit `E ≈ a·h_r + b·γ_s` (no intercept).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorFit {
    /// Error per unit heating rate (s/phonon).
    pub a: f64,
    /// Error per unit metastable decay rate (s).
    pub b: f64,
    /// `E - (a h_r + b γ_s)` per sample, in input order.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

pub fn fit_error_model(samples: &[(f64, f64, f64)]) -> Result<ErrorFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "error-model fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let (mut shh, mut shg, mut sgg, mut she, mut sge) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(h, g, e) in samples {
        shh += h * h;
        shg += h * g;
        sgg += g * g;
        she += h * e;
        sge += g * e;
    }
    let det = shh * sgg - shg * shg;
    if !(det.abs() > 1e-12 * (shh * sgg).max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateFit);
    }
    let a = (she * sgg - sge * shg) / det;
    let b = (sge * shh - she * shg) / det;
    let residuals: Vec<f64> = samples.iter().map(|&(h, g, e)| e - (a * h + b * g)).collect();
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(ErrorFit { a, b, residuals, rms_residual })
}
