//! Photodetection-conditioned dynamics.
//!
//! A trajectory evolves the click-free generator between detections. Its
//! trace is the probability of having seen no click since the last one, so a
//! detection is drawn by waiting until the trace falls below a uniform
//! threshold; the state then jumps to `C ρ C† / Tr[C ρ C†]` for a detected
//! channel picked in proportion to its click rate. Undetected emission stays
//! in the smooth Lindblad part, so conditional states are mixed.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analyze::observe;
use crate::error::{Error, Result};
use crate::evolve::{
    check_finite, check_step, raw_trace, run_until_steady, superop, DensityState, Mode, PropagationOptions, Rk4,
    SteadyCriteria, SteadyState, TimeSeries,
};
use crate::qops::Operator;
use crate::scheme::{jump_weight, Channel, Generator};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    /// Index into the generator's channel list.
    pub channel: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// Observables of the normalized conditional state. The `trace` column
    /// holds the unnormalized click-free weight accumulated since the last
    /// detection.
    pub series: TimeSeries,
    pub events: Vec<JumpEvent>,
    pub seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// One detection-conditioned trajectory, reproducible from `seed`.
pub fn run_trajectory(
    gen: &Generator,
    rho0: &DensityState,
    opts: &PropagationOptions,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let detected = gen.detected_indices();
    if detected.is_empty() {
        return Err(Error::NoDetectedChannels);
    }
    if rho0.spec() != gen.spec() || !rho0.is_normalized() {
        return Err(Error::InvalidState("initial state must be normalized and match the generator".into()));
    }
    let monitoring = gen.xi() > 0.0;
    let mode = if monitoring { Mode::NoDetection } else { Mode::Unconditional };
    let sup = superop(gen, mode);
    let (steps, dt) = opts.grid(gen)?;
    let spec = gen.spec();
    let d = spec.dim();
    let stride = opts.stride.max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut threshold = uniform(&mut rng);
    let mut rho = rho0.matrix().as_slice().to_vec();
    let mut rk = Rk4::new(d);
    let mut series = TimeSeries::default();
    let mut events = Vec::new();

    series.push(0.0, &observe(spec, &rho));
    let mut tr = raw_trace(d, &rho);
    for s in 1..=steps {
        rk.step(sup, &mut rho, dt);
        let t = s as f64 * dt;
        let after = raw_trace(d, &rho);
        check_step(mode, t, tr, after)?;
        tr = after;

        if monitoring && tr <= threshold {
            let current = Operator::from_row_major(d, std::mem::take(&mut rho));
            let weights: Vec<f64> = detected
                .iter()
                .map(|&k| {
                    let ch = &gen.channels()[k];
                    ch.rate * jump_weight(&ch.op, &current)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::NumericalAbort {
                    time: t,
                    reason: format!("zero jump norm at sampled detection (total weight {total:e})"),
                });
            }
            let pick = uniform(&mut rng) * total;
            let mut acc = 0.0;
            let mut chosen = *detected.last().expect("nonempty");
            for (&k, &w) in detected.iter().zip(&weights) {
                acc += w;
                if pick < acc {
                    chosen = k;
                    break;
                }
            }
            let ch = &gen.channels()[chosen];
            let jumped = &(&ch.op * &current) * &ch.op.adjoint();
            let norm = jumped.trace().re;
            rho = jumped.scale_real(1.0 / norm).into_vec();
            tr = raw_trace(d, &rho);
            events.push(JumpEvent { time: t, channel: chosen, label: ch.label.clone() });
            threshold = uniform(&mut rng);
        }

        if s % stride == 0 || s == steps {
            check_finite(t, &rho)?;
            series.push(t, &observe(spec, &rho));
        }
    }
    Ok(TrajectoryRecord { series, events, seed })
}

/// `count` trajectories with seeds `seed0, seed0 + 1, ...`, run on the current
/// rayon pool. Output order follows the seed order.
pub fn run_ensemble(
    gen: &Generator,
    rho0: &DensityState,
    opts: &PropagationOptions,
    seed0: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| run_trajectory(gen, rho0, opts, seed0.wrapping_add(i)))
        .collect()
}

/// Pointwise ensemble statistics of the conditional fidelity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleAverage {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean (sample standard deviation / √M).
    pub std_err: Vec<f64>,
    pub count: usize,
}

pub fn ensemble_average(records: &[TrajectoryRecord]) -> Result<EnsembleAverage> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: records.len() });
    }
    let times = &records[0].series.times;
    if records.iter().any(|r| &r.series.times != times) {
        return Err(Error::GridMismatch);
    }
    let m = records.len() as f64;
    let n = times.len();
    let mut mean = vec![0.0; n];
    let mut std_err = vec![0.0; n];
    for i in 0..n {
        let mu = records.iter().map(|r| r.series.fidelity[i]).sum::<f64>() / m;
        let var = records.iter().map(|r| (r.series.fidelity[i] - mu).powi(2)).sum::<f64>() / (m - 1.0);
        mean[i] = mu;
        std_err[i] = (var / m).sqrt();
    }
    Ok(EnsembleAverage { times: times.clone(), mean, std_err, count: records.len() })
}

/// Mean conditional fidelity over stretches with no detection for at least
/// `settle` seconds (counting from the start of the run), with the standard
/// error across trajectories. Trajectories without such a stretch are skipped.
pub fn quiet_plateau(records: &[TrajectoryRecord], settle: f64) -> Result<(f64, f64, usize)> {
    let mut per_traj = Vec::new();
    for r in records {
        let mut last = 0.0;
        let mut ev = r.events.iter().peekable();
        let (mut sum, mut n) = (0.0, 0usize);
        for (&t, &f) in r.series.times.iter().zip(&r.series.fidelity) {
            while let Some(e) = ev.peek() {
                if e.time <= t {
                    last = e.time;
                    ev.next();
                } else {
                    break;
                }
            }
            if t - last >= settle {
                sum += f;
                n += 1;
            }
        }
        if n > 0 {
            per_traj.push(sum / n as f64);
        }
    }
    if per_traj.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: per_traj.len() });
    }
    let m = per_traj.len() as f64;
    let mu = per_traj.iter().sum::<f64>() / m;
    let var = per_traj.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mu, (var / m).sqrt(), per_traj.len()))
}

/// Rate-weighted mixture of post-detection states,
/// `Σ_k r_k C_k ρ C_k† / Tr[·]` over detected channels.
pub fn post_jump_state(gen: &Generator, rho: &DensityState) -> Result<DensityState> {
    let detected = gen.detected_indices();
    if detected.is_empty() {
        return Err(Error::NoDetectedChannels);
    }
    let mut mix = Operator::zeros(gen.spec().dim());
    for k in detected {
        let ch = &gen.channels()[k];
        let j = &(&ch.op * rho.matrix()) * &ch.op.adjoint();
        mix = &mix + &j.scale_real(ch.rate);
    }
    let tr = mix.trace().re;
    if !(tr > 1e-300 && tr.is_finite()) {
        return Err(Error::UndefinedPostJump);
    }
    let m = mix.scale_real(1.0 / tr);
    // force exact Hermiticity before validation
    let herm = (&m + &m.adjoint()).scale_real(0.5);
    DensityState::from_operator(gen.spec(), herm)
}

/// Click-free evolution started right after a detection.
#[derive(Clone, Debug)]
pub struct ConditionalRun {
    pub post_jump: DensityState,
    pub times: Vec<f64>,
    pub conditional_fidelity: Vec<f64>,
    /// Probability of no further detection up to each time.
    pub survival: Vec<f64>,
}

/// Conditional fidelity and survival after a detection from `rho_ss`, over a
/// fixed window.
pub fn conditional_after_detection(
    gen: &Generator,
    rho_ss: &DensityState,
    opts: &PropagationOptions,
) -> Result<ConditionalRun> {
    let post = post_jump_state(gen, rho_ss)?;
    let prop = crate::evolve::propagate_no_detection(gen, &post, opts)?;
    Ok(ConditionalRun {
        post_jump: post,
        times: prop.series.times,
        conditional_fidelity: prop.series.fidelity,
        survival: prop.series.trace,
    })
}

/// Asymptote of the click-free evolution after a detection.
#[derive(Clone, Debug)]
pub struct ConditionalAsymptote {
    pub post_jump: DensityState,
    /// Settled conditional fidelity.
    pub fidelity: f64,
    pub converged: bool,
    /// First time the conditional fidelity comes within `reach_tolerance` of
    /// the settled value and stays there.
    pub reach_time: f64,
    /// Survival probability at `reach_time`.
    pub survival_at_reach: f64,
    pub run: SteadyState,
}

/// Runs the click-free evolution from the post-detection state until the
/// conditional fidelity settles.
pub fn conditional_asymptote(
    gen: &Generator,
    rho_ss: &DensityState,
    criteria: &SteadyCriteria,
    reach_tolerance: f64,
) -> Result<ConditionalAsymptote> {
    let post = post_jump_state(gen, rho_ss)?;
    let run = run_until_steady(gen, &post, criteria, Mode::NoDetection)?;
    let f_inf = run.fidelity;
    let s = &run.series;
    // last index that is outside the band; reach is the sample after it
    let idx = s
        .fidelity
        .iter()
        .rposition(|f| (f - f_inf).abs() > reach_tolerance)
        .map_or(0, |i| (i + 1).min(s.len() - 1));
    Ok(ConditionalAsymptote {
        post_jump: post,
        fidelity: f_inf,
        converged: run.converged,
        reach_time: s.times[idx],
        survival_at_reach: s.trace[idx],
        run,
    })
}

/// How detected emission is split into channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unraveling {
    /// One channel per ion, `|g⟩ᵢ⟨g| a`.
    PerIon,
    /// `a(|g⟩₁⟨g| ± |g⟩₂⟨g|)/√2`.
    SymmetricAntisymmetric,
}

impl Unraveling {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-ion" => Some(Unraveling::PerIon),
            "sym-antisym" | "symmetric-antisymmetric" => Some(Unraveling::SymmetricAntisymmetric),
            _ => None,
        }
    }
}

/// Re-expresses the two per-ion detected channels of an eliminated-model
/// generator in the requested basis. `Σ C†C` and the unconditional
/// Liouvillian are unchanged.
pub fn unraveling_variant(gen: &Generator, variant: Unraveling) -> Result<Generator> {
    if gen.spec().internal_levels() != 2 {
        return Err(Error::LevelMismatch { expected: 2, found: gen.spec().internal_levels() });
    }
    let detected = gen.detected_indices();
    let chans = gen.channels();
    let per_ion = detected.len() == 2
        && chans[detected[0]].label == "ion1"
        && chans[detected[1]].label == "ion2";
    if !per_ion {
        return Err(Error::InvalidParams("expected per-ion detected channels ion1, ion2".into()));
    }
    if variant == Unraveling::PerIon {
        return Ok(gen.clone());
    }
    let (c1, c2) = (&chans[detected[0]], &chans[detected[1]]);
    if c1.rate != c2.rate {
        return Err(Error::InvalidParams("per-ion channel rates differ".into()));
    }
    let sym = (&c1.op + &c2.op).scale_real(FRAC_1_SQRT_2);
    let anti = (&c1.op - &c2.op).scale_real(FRAC_1_SQRT_2);
    let mut channels: Vec<Channel> = vec![
        Channel::new("sym", c1.rate, sym, true),
        Channel::new("antisym", c1.rate, anti, true),
    ];
    channels.extend(chans.iter().filter(|c| !c.detected).cloned());
    gen.with_channels(channels)
}
