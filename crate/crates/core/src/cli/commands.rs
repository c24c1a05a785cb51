use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analyze::{compare_models, fit_error_model, sweep, SweepAxis, SweepSetup};
use crate::evolve::{integrate, steady_state, DensityState, PropagationOptions, SteadyCriteria, TimeSeries};
use crate::jumps::{
    conditional_after_detection, conditional_asymptote, ensemble_average, run_ensemble, unraveling_variant,
};
use crate::scheme::{build_generator, Generator, Model, SchemeParams};

use super::config::RunConfig;
use super::output::{write_json, Cell, Csv};
use super::CliError;

const TRAJECTORY_HORIZON: f64 = 0.02;
const CONDITIONAL_WINDOW: f64 = 0.005;
const COMPARE_HORIZON: f64 = 0.005;

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    model: Model,
    params: SchemeParams,
    n_motional: usize,
    seed: u64,
}

impl<'a> RunInfo<'a> {
    fn new(command: &'a str, cfg: &RunConfig) -> Self {
        Self { command, model: cfg.model, params: cfg.params, n_motional: cfg.n_motional, seed: cfg.seed }
    }
}

fn generator(cfg: &RunConfig, p: &SchemeParams) -> Result<Generator, CliError> {
    Ok(build_generator(cfg.model, p, cfg.n_motional)?)
}

fn initial_state(cfg: &RunConfig, gen: &Generator) -> Result<DensityState, CliError> {
    Ok(DensityState::product(gen.spec(), cfg.initial.0, cfg.initial.1)?)
}

fn options(cfg: &RunConfig, default_horizon: f64) -> PropagationOptions {
    PropagationOptions { t_max: cfg.t_max.unwrap_or(default_horizon), dt: cfg.dt, stride: cfg.stride }
}

fn series_csv(series: &TimeSeries) -> Csv {
    let mut csv = Csv::new(&["t", "fidelity", "error", "trace", "mean_phonon", "top_level_population"]);
    for i in 0..series.len() {
        csv.row(&[
            Cell::F(series.times[i]),
            Cell::F(series.fidelity[i]),
            Cell::F(1.0 - series.fidelity[i]),
            Cell::F(series.trace[i]),
            Cell::F(series.mean_phonon[i]),
            Cell::F(series.top_level_population[i]),
        ]);
    }
    csv
}

pub fn steady(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        run: RunInfo<'a>,
        fidelity: f64,
        error: f64,
        converged: bool,
        time: f64,
        truncation_violated: bool,
        max_top_population: f64,
        criteria: SteadyCriteria,
        wall_time_s: f64,
    }
    let start = Instant::now();
    let gen = generator(cfg, &cfg.params)?;
    let rho0 = initial_state(cfg, &gen)?;
    let mut criteria = cfg.criteria();
    if let Some(t) = cfg.t_max {
        criteria.time_cap = t;
    }
    let ss = steady_state(&gen, &rho0, &criteria)?;
    series_csv(&ss.series).write(&out.join("timeseries.csv"))?;
    write_json(
        &out.join("summary.json"),
        &Summary {
            run: RunInfo::new("steady", cfg),
            fidelity: ss.fidelity,
            error: ss.error(),
            converged: ss.converged,
            time: ss.time,
            truncation_violated: ss.truncation_violated,
            max_top_population: ss.max_top_population,
            criteria,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

pub fn trajectory(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        run: RunInfo<'a>,
        trajectories: usize,
        events: usize,
        wall_time_s: f64,
    }
    if cfg.ensemble_size == 0 {
        return Err(CliError::Config("ensemble_size must be at least 1".into()));
    }
    let start = Instant::now();
    let base = generator(cfg, &cfg.params)?;
    let gen = if cfg.model == Model::Eliminated { unraveling_variant(&base, cfg.unraveling)? } else { base };
    let rho0 = initial_state(cfg, &gen)?;
    let opts = options(cfg, TRAJECTORY_HORIZON);
    let records = run_ensemble(&gen, &rho0, &opts, cfg.seed, cfg.ensemble_size)?;

    let mut traj = Csv::new(&["trajectory", "t", "fidelity", "trace", "mean_phonon", "top_level_population"]);
    let mut events = Csv::new(&["trajectory", "t", "channel"]);
    let mut n_events = 0;
    for (k, r) in records.iter().enumerate() {
        let s = &r.series;
        for i in 0..s.len() {
            traj.row(&[
                Cell::U(k as u64),
                Cell::F(s.times[i]),
                Cell::F(s.fidelity[i]),
                Cell::F(s.trace[i]),
                Cell::F(s.mean_phonon[i]),
                Cell::F(s.top_level_population[i]),
            ]);
        }
        for e in &r.events {
            events.row(&[Cell::U(k as u64), Cell::F(e.time), Cell::S(&e.label)]);
        }
        n_events += r.events.len();
    }
    traj.write(&out.join("trajectory.csv"))?;
    events.write(&out.join("events.csv"))?;

    if records.len() > 1 {
        let avg = ensemble_average(&records)?;
        let me = integrate(&gen, &rho0, &opts)?;
        let mut csv = Csv::new(&["t", "mean_fidelity", "std_err", "master_fidelity"]);
        for i in 0..avg.times.len() {
            csv.row(&[
                Cell::F(avg.times[i]),
                Cell::F(avg.mean[i]),
                Cell::F(avg.std_err[i]),
                Cell::F(me.series.fidelity[i]),
            ]);
        }
        csv.write(&out.join("ensemble.csv"))?;
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            run: RunInfo::new("trajectory", cfg),
            trajectories: records.len(),
            events: n_events,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

#[derive(Serialize)]
struct TableRow {
    h_r: f64,
    /// Fidelity per entry of `table_xi`; ξ = 0 is the unconditional value.
    fidelity: Vec<f64>,
    converged: bool,
}

fn table_row(cfg: &RunConfig, criteria: &SteadyCriteria, h_r: f64) -> Result<TableRow, CliError> {
    let mut p = cfg.params;
    p.h_r = h_r;
    let gen = generator(cfg, &p)?;
    let rho0 = initial_state(cfg, &gen)?;
    let ss = steady_state(&gen, &rho0, criteria)?;
    let mut converged = ss.converged;
    let mut fidelity = Vec::with_capacity(cfg.table_xi.len());
    for &xi in &cfg.table_xi {
        if xi == 0.0 {
            fidelity.push(ss.fidelity);
            continue;
        }
        p.xi = xi;
        let g = generator(cfg, &p)?;
        let a = conditional_asymptote(&g, &ss.state, criteria, cfg.reach_tolerance)?;
        converged &= a.converged;
        fidelity.push(a.fidelity);
    }
    Ok(TableRow { h_r, fidelity, converged })
}

pub fn conditional(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        run: RunInfo<'a>,
        unconditional_fidelity: f64,
        conditional_fidelity: f64,
        reach_time: f64,
        survival_at_reach: f64,
        converged: bool,
        table: Vec<TableRow>,
        wall_time_s: f64,
    }
    let start = Instant::now();
    let criteria = cfg.criteria();
    let gen = generator(cfg, &cfg.params)?;
    let rho0 = initial_state(cfg, &gen)?;
    let ss = steady_state(&gen, &rho0, &criteria)?;
    let run = conditional_after_detection(&gen, &ss.state, &options(cfg, CONDITIONAL_WINDOW))?;
    let mut csv = Csv::new(&["t", "conditional_fidelity", "survival"]);
    for i in 0..run.times.len() {
        csv.row(&[Cell::F(run.times[i]), Cell::F(run.conditional_fidelity[i]), Cell::F(run.survival[i])]);
    }
    csv.write(&out.join("conditional.csv"))?;
    let asym = conditional_asymptote(&gen, &ss.state, &criteria, cfg.reach_tolerance)?;

    let mut table = Vec::new();
    if cfg.table {
        table = cfg
            .table_h_r
            .par_iter()
            .map(|&h| table_row(cfg, &criteria, h))
            .collect::<Result<Vec<_>, _>>()?;
        let names: Vec<String> = cfg.table_xi.iter().map(|x| format!("xi_{x}")).collect();
        let mut header = vec!["h_r"];
        header.extend(names.iter().map(String::as_str));
        let mut csv = Csv::new(&header);
        for row in &table {
            let mut cells = vec![Cell::F(row.h_r)];
            cells.extend(row.fidelity.iter().map(|&f| Cell::F(f)));
            csv.row(&cells);
        }
        csv.write(&out.join("table1.csv"))?;
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            run: RunInfo::new("conditional", cfg),
            unconditional_fidelity: ss.fidelity,
            conditional_fidelity: asym.fidelity,
            reach_time: asym.reach_time,
            survival_at_reach: asym.survival_at_reach,
            converged: ss.converged && asym.converged,
            table,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

pub fn sweep_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        run: RunInfo<'a>,
        axis1: SweepAxis,
        axis2: SweepAxis,
        cells: usize,
        unconverged: usize,
        invalid: usize,
        wall_time_s: f64,
    }
    if cfg.axis1_values.is_empty() || cfg.axis2_values.is_empty() {
        return Err(CliError::Config("sweep needs axis1_values and axis2_values".into()));
    }
    if cfg.axis1 == cfg.axis2 {
        return Err(CliError::Config("axis1 and axis2 must differ".into()));
    }
    let fit_axes = match (cfg.axis1, cfg.axis2) {
        (SweepAxis::HR, SweepAxis::GammaS) => Some(false),
        (SweepAxis::GammaS, SweepAxis::HR) => Some(true),
        _ => None,
    };
    if cfg.fit && fit_axes.is_none() {
        return Err(CliError::Config("fit requires the sweep axes to be h_r and gamma_s".into()));
    }
    let start = Instant::now();
    let setup = SweepSetup {
        model: cfg.model,
        params: cfg.params,
        n_motional: cfg.n_motional,
        initial: cfg.initial,
        criteria: cfg.criteria(),
    };
    let grid = sweep(cfg.axis1, &cfg.axis1_values, cfg.axis2, &cfg.axis2_values, &setup)?;
    let mut csv = Csv::new(&["axis1", "axis2", "error", "log10_error", "converged", "valid"]);
    for c in &grid.cells {
        csv.row(&[
            Cell::F(c.axis1),
            Cell::F(c.axis2),
            Cell::F(c.error),
            Cell::F(c.error.log10()),
            Cell::B(c.converged),
            Cell::B(c.valid),
        ]);
    }
    csv.write(&out.join("sweep.csv"))?;
    if let (true, Some(swapped)) = (cfg.fit, fit_axes) {
        let samples: Vec<(f64, f64, f64)> = grid
            .cells
            .iter()
            .map(|c| if swapped { (c.axis2, c.axis1, c.error) } else { (c.axis1, c.axis2, c.error) })
            .collect();
        write_json(&out.join("fit.json"), &fit_error_model(&samples)?)?;
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            run: RunInfo::new("sweep", cfg),
            axis1: grid.axis1,
            axis2: grid.axis2,
            cells: grid.cells.len(),
            unconverged: grid.cells.iter().filter(|c| !c.converged).count(),
            invalid: grid.cells.iter().filter(|c| !c.valid).count(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

pub fn compare(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        run: RunInfo<'a>,
        max_abs_delta: f64,
        ratio: f64,
        full_truncation_violated: bool,
        eliminated_truncation_violated: bool,
        wall_time_s: f64,
    }
    let start = Instant::now();
    let c = compare_models(
        &cfg.params,
        cfg.n_motional,
        cfg.initial,
        cfg.t_max.unwrap_or(COMPARE_HORIZON),
        cfg.sample_interval,
    )?;
    let mut csv = Csv::new(&["t", "fidelity_full", "fidelity_eliminated", "delta"]);
    for i in 0..c.times.len() {
        csv.row(&[
            Cell::F(c.times[i]),
            Cell::F(c.full[i]),
            Cell::F(c.eliminated[i]),
            Cell::F(c.full[i] - c.eliminated[i]),
        ]);
    }
    csv.write(&out.join("compare.csv"))?;
    write_json(
        &out.join("summary.json"),
        &Summary {
            run: RunInfo::new("compare-models", cfg),
            max_abs_delta: c.max_abs_delta,
            ratio: c.ratio,
            full_truncation_violated: c.full_truncation_violated,
            eliminated_truncation_violated: c.eliminated_truncation_violated,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}
