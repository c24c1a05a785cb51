//! Deterministic propagation: unconditional master equation, click-free
//! (unnormalized) evolution and long-time steady states.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analyze::{observe, Observation};
use crate::error::{Error, Result};
use crate::liouville::{RealKernel, Superoperator};
use crate::qops::{HilbertSpec, Level, Operator};
use crate::scheme::Generator;

/// Population allowed in the highest retained Fock state.
pub const TRUNCATION_THRESHOLD: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-8;
/// Per-step trace change tolerated under trace-preserving propagation.
const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Per-step trace gain tolerated under click-free propagation.
const TRACE_GAIN_TOL: f64 = 1e-10;

/// Density matrix. Unnormalized states carry a trace in `(0, 1]`, the
/// probability of the conditioning record so far.
#[derive(Clone, Debug)]
pub struct DensityState {
    spec: HilbertSpec,
    matrix: Operator,
    normalized: bool,
}

impl DensityState {
    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`
    pub fn pure(spec: &HilbertSpec, ket: &[C64]) -> Result<Self> {
        if ket.len() != spec.dim() {
            return Err(dim_error(spec, ket.len()));
        }
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("ket has zero or non-finite norm".into()));
        }
        let m = Operator::projector(ket).scale_real(1.0 / norm);
        Ok(Self { spec: *spec, matrix: m, normalized: true })
    }

    /// Product state `|ion1 ion2⟩ ⊗ |0⟩`.
    pub fn product(spec: &HilbertSpec, ion1: Level, ion2: Level) -> Result<Self> {
        Self::pure(spec, &spec.ket(ion1, ion2, 0)?)
    }

    /// `|ψ₋⟩⟨ψ₋| ⊗ |0⟩⟨0|`
    pub fn dark(spec: &HilbertSpec) -> Self {
        Self::pure(spec, &spec.antisymmetric_bell(0).expect("ground Fock state exists"))
            .expect("Bell ket matches its space")
    }

    /// Validated normalized state.
    pub fn from_operator(spec: &HilbertSpec, matrix: Operator) -> Result<Self> {
        if matrix.dim() != spec.dim() {
            return Err(dim_error(spec, matrix.dim()));
        }
        check_hermitian(&matrix)?;
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let s = Self { spec: *spec, matrix, normalized: true };
        let min = s.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(s)
    }

    /// Validated unnormalized state with trace in `(0, 1]`.
    pub fn unnormalized(spec: &HilbertSpec, matrix: Operator) -> Result<Self> {
        if matrix.dim() != spec.dim() {
            return Err(dim_error(spec, matrix.dim()));
        }
        check_hermitian(&matrix)?;
        let tr = matrix.trace().re;
        if !(tr > 0.0 && tr <= 1.0 + TRACE_TOL) {
            return Err(Error::InvalidState(format!("unnormalized trace {tr} outside (0, 1]")));
        }
        Ok(Self { spec: *spec, matrix, normalized: false })
    }

    pub(crate) fn from_raw(spec: &HilbertSpec, data: Vec<C64>, normalized: bool) -> Self {
        Self { spec: *spec, matrix: Operator::from_row_major(spec.dim(), data), normalized }
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn into_matrix(self) -> Operator {
        self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `ρ / Tr ρ`
    pub fn normalized(&self) -> Self {
        let tr = self.trace();
        Self { spec: self.spec, matrix: self.matrix.scale_real(1.0 / tr), normalized: true }
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.matrix.dim();
        let herm = DMatrix::from_fn(d, d, |i, j| 0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)].conj()));
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `½‖ρ - σ‖₁`
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let d = self.matrix.dim();
        let diff = DMatrix::from_fn(d, d, |i, j| {
            let x = self.matrix[(i, j)] - other.matrix[(i, j)];
            let y = self.matrix[(j, i)] - other.matrix[(j, i)];
            0.5 * (x + y.conj())
        });
        0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>()
    }

    /// Hermiticity, trace and positivity checks for the state's kind.
    pub fn check(&self) -> Result<()> {
        check_hermitian(&self.matrix)?;
        let tr = self.trace();
        if self.normalized && (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL * tr.max(1e-300) {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(())
    }
}

fn dim_error(spec: &HilbertSpec, found: usize) -> Error {
    Error::InvalidState(format!("dimension {found} does not match space dimension {}", spec.dim()))
}

fn check_hermitian(m: &Operator) -> Result<()> {
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::InvalidState(format!(
            "not Hermitian (defect {:e})",
            m.hermiticity_defect()
        )));
    }
    Ok(())
}

/// Observables recorded along a propagation. For unnormalized runs the
/// `trace` column is the survival probability and the other columns refer to
/// the renormalized state.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub trace: Vec<f64>,
    pub mean_phonon: Vec<f64>,
    pub top_level_population: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, obs: &Observation) {
        self.times.push(t);
        self.fidelity.push(obs.fidelity);
        self.trace.push(obs.trace);
        self.mean_phonon.push(obs.mean_phonon);
        self.top_level_population.push(obs.top_level_population);
    }

    pub fn last_fidelity(&self) -> Option<f64> {
        self.fidelity.last().copied()
    }
}

/// Classical fourth-order Runge-Kutta with preallocated stage buffers.
pub(crate) struct Rk4 {
    k: Vec<C64>,
    acc: Vec<C64>,
    tmp: Vec<C64>,
    scratch: Vec<C64>,
    /// Real and imaginary stage planes for the all-real kernel.
    planes: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim * dim];
        Self { k: z.clone(), acc: z.clone(), tmp: z, scratch: Vec::new(), planes: Vec::new() }
    }

    pub(crate) fn step(&mut self, sup: &Superoperator, rho: &mut [C64], dt: f64) {
        if let Some(kernel) = sup.real_kernel() {
            return self.step_real(kernel, rho, dt);
        }
        let Self { k, acc, tmp, scratch, .. } = self;
        let half = 0.5 * dt;

        sup.apply_hermitian_into(rho, k, scratch);
        for ((a, t), (&r, &kv)) in acc.iter_mut().zip(tmp.iter_mut()).zip(rho.iter().zip(k.iter())) {
            *a = kv;
            *t = r + kv * half;
        }
        sup.apply_hermitian_into(tmp, k, scratch);
        for ((a, t), (&r, &kv)) in acc.iter_mut().zip(tmp.iter_mut()).zip(rho.iter().zip(k.iter())) {
            *a += kv * 2.0;
            *t = r + kv * half;
        }
        sup.apply_hermitian_into(tmp, k, scratch);
        for ((a, t), (&r, &kv)) in acc.iter_mut().zip(tmp.iter_mut()).zip(rho.iter().zip(k.iter())) {
            *a += kv * 2.0;
            *t = r + kv * dt;
        }
        sup.apply_hermitian_into(tmp, k, scratch);
        let sixth = dt / 6.0;
        for ((r, &a), &kv) in rho.iter_mut().zip(acc.iter()).zip(k.iter()) {
            *r += (a + kv) * sixth;
        }
    }

    fn step_real(&mut self, kernel: &RealKernel, rho: &mut [C64], dt: f64) {
        let n = rho.len();
        if self.planes.len() != 10 * n {
            self.planes = vec![0.0; 10 * n];
        }
        let (x, rest) = self.planes.split_at_mut(n);
        let (y, rest) = rest.split_at_mut(n);
        let (kx, rest) = rest.split_at_mut(n);
        let (ky, rest) = rest.split_at_mut(n);
        let (ax, rest) = rest.split_at_mut(n);
        let (ay, rest) = rest.split_at_mut(n);
        let (tx, rest) = rest.split_at_mut(n);
        let (ty, rest) = rest.split_at_mut(n);
        let (m1, m2) = rest.split_at_mut(n);
        for ((xv, yv), z) in x.iter_mut().zip(y.iter_mut()).zip(rho.iter()) {
            *xv = z.re;
            *yv = z.im;
        }
        let half = 0.5 * dt;
        kernel.apply(x, y, kx, ky, m1, m2);
        for i in 0..n {
            ax[i] = kx[i];
            ay[i] = ky[i];
            tx[i] = x[i] + half * kx[i];
            ty[i] = y[i] + half * ky[i];
        }
        kernel.apply(tx, ty, kx, ky, m1, m2);
        for i in 0..n {
            ax[i] += 2.0 * kx[i];
            ay[i] += 2.0 * ky[i];
            tx[i] = x[i] + half * kx[i];
            ty[i] = y[i] + half * ky[i];
        }
        kernel.apply(tx, ty, kx, ky, m1, m2);
        for i in 0..n {
            ax[i] += 2.0 * kx[i];
            ay[i] += 2.0 * ky[i];
            tx[i] = x[i] + dt * kx[i];
            ty[i] = y[i] + dt * ky[i];
        }
        kernel.apply(tx, ty, kx, ky, m1, m2);
        let sixth = dt / 6.0;
        for i in 0..n {
            rho[i] = C64::new(x[i] + sixth * (ax[i] + kx[i]), y[i] + sixth * (ay[i] + ky[i]));
        }
    }
}

pub(crate) fn raw_trace(dim: usize, rho: &[C64]) -> f64 {
    (0..dim).map(|i| rho[i * dim + i].re).sum()
}

/// Step size and recording options for a fixed-step propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    pub t_max: f64,
    /// Requested step; `None` uses [`Generator::default_dt`]. The step actually
    /// taken is shrunk so an integer number of steps lands on `t_max`.
    pub dt: Option<f64>,
    /// Record every `stride` steps; the first and last points are always kept.
    pub stride: usize,
}

impl PropagationOptions {
    pub fn new(t_max: f64) -> Self {
        Self { t_max, dt: None, stride: 100 }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub(crate) fn grid(&self, gen: &Generator) -> Result<(usize, f64)> {
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParams(format!("t_max must be finite and >= 0, got {}", self.t_max)));
        }
        let dt = self.dt.unwrap_or_else(|| gen.default_dt());
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        if self.t_max == 0.0 {
            return Ok((0, dt));
        }
        let steps = (self.t_max / dt - 1e-9).ceil().max(1.0) as usize;
        Ok((steps, self.t_max / steps as f64))
    }
}

/// Result of a fixed-horizon propagation.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub series: TimeSeries,
    /// Final state; unnormalized for click-free runs.
    pub state: DensityState,
    pub dt: f64,
    pub max_top_population: f64,
    /// Top Fock level exceeded [`TRUNCATION_THRESHOLD`] at some recorded point.
    pub truncation_violated: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Unconditional,
    NoDetection,
}

pub(crate) fn superop(gen: &Generator, mode: Mode) -> &Superoperator {
    match mode {
        Mode::Unconditional => gen.unconditional(),
        Mode::NoDetection => gen.no_detection(),
    }
}

/// Per-step trace bookkeeping shared by all drivers.
pub(crate) fn check_step(mode: Mode, t: f64, before: f64, after: f64) -> Result<()> {
    if !after.is_finite() {
        return Err(Error::NumericalAbort { time: t, reason: "non-finite trace".into() });
    }
    match mode {
        Mode::Unconditional => {
            if (after - before).abs() > TRACE_DRIFT_TOL {
                return Err(Error::NumericalAbort {
                    time: t,
                    reason: format!("trace drifted by {:e} in one step", after - before),
                });
            }
        }
        Mode::NoDetection => {
            if after - before > TRACE_GAIN_TOL {
                return Err(Error::TraceIncrease { time: t, increase: after - before });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_finite(t: f64, rho: &[C64]) -> Result<()> {
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalAbort { time: t, reason: "non-finite density matrix entry".into() });
    }
    Ok(())
}

fn check_initial(gen: &Generator, rho0: &DensityState) -> Result<()> {
    if rho0.spec() != gen.spec() {
        return Err(Error::InvalidState(format!(
            "state space {:?} does not match generator space {:?}",
            rho0.spec(),
            gen.spec()
        )));
    }
    if !rho0.is_normalized() {
        return Err(Error::InvalidState("initial state must be normalized".into()));
    }
    Ok(())
}

fn propagate(gen: &Generator, rho0: &DensityState, opts: &PropagationOptions, mode: Mode) -> Result<Propagation> {
    check_initial(gen, rho0)?;
    let (steps, dt) = opts.grid(gen)?;
    let spec = gen.spec();
    let d = spec.dim();
    let sup = superop(gen, mode);
    let mut rho = rho0.matrix().as_slice().to_vec();
    let mut rk = Rk4::new(d);
    let mut series = TimeSeries::default();
    let mut max_top: f64 = 0.0;

    let mut record = |t: f64, rho: &[C64], series: &mut TimeSeries| -> Result<()> {
        check_finite(t, rho)?;
        let obs = observe(spec, rho);
        max_top = max_top.max(obs.top_level_population);
        series.push(t, &obs);
        Ok(())
    };

    record(0.0, &rho, &mut series)?;
    let mut tr = raw_trace(d, &rho);
    let stride = opts.stride.max(1);
    for s in 1..=steps {
        rk.step(sup, &mut rho, dt);
        let t = s as f64 * dt;
        let after = raw_trace(d, &rho);
        check_step(mode, t, tr, after)?;
        tr = after;
        if s % stride == 0 || s == steps {
            record(t, &rho, &mut series)?;
        }
    }
    let state = DensityState::from_raw(spec, rho, mode == Mode::Unconditional);
    Ok(Propagation {
        series,
        state,
        dt,
        max_top_population: max_top,
        truncation_violated: max_top > TRUNCATION_THRESHOLD,
    })
}

/// Integrates `dρ/dt = L(ρ)` with fixed-step RK4.
pub fn integrate(gen: &Generator, rho0: &DensityState, opts: &PropagationOptions) -> Result<Propagation> {
    propagate(gen, rho0, opts, Mode::Unconditional)
}

/// Evolves the linear click-free generator. The recorded `trace` is the
/// probability of no detection so far and `fidelity` is that of `ρ/Tr ρ`.
pub fn propagate_no_detection(
    gen: &Generator,
    rho0: &DensityState,
    opts: &PropagationOptions,
) -> Result<Propagation> {
    propagate(gen, rho0, opts, Mode::NoDetection)
}

/// Convergence rule for long-time runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteadyCriteria {
    /// Converged once `|dF/dt|` stays below this (1/s)...
    pub slope_threshold: f64,
    /// ...for this long (s).
    pub hold_time: f64,
    pub time_cap: f64,
    /// Spacing of the fidelity samples used for the slope (s).
    pub check_interval: f64,
    pub dt: Option<f64>,
    /// Recording stride of the returned series, in steps.
    pub stride: usize,
}

impl Default for SteadyCriteria {
    fn default() -> Self {
        Self {
            slope_threshold: 1e-3,
            hold_time: 1e-3,
            time_cap: 0.1,
            check_interval: 1e-5,
            dt: None,
            stride: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    /// Final state; unnormalized (trace = survival) for click-free runs.
    pub state: DensityState,
    /// Fidelity of the (renormalized) final state.
    pub fidelity: f64,
    /// `false` when the time cap was reached first.
    pub converged: bool,
    /// Time at which the run stopped.
    pub time: f64,
    pub series: TimeSeries,
    pub max_top_population: f64,
    pub truncation_violated: bool,
}

impl SteadyState {
    pub fn error(&self) -> f64 {
        1.0 - self.fidelity
    }
}

pub(crate) fn run_until_steady(
    gen: &Generator,
    rho0: &DensityState,
    criteria: &SteadyCriteria,
    mode: Mode,
) -> Result<SteadyState> {
    if rho0.spec() != gen.spec() {
        return Err(Error::InvalidState("state space does not match generator".into()));
    }
    if !(criteria.slope_threshold > 0.0 && criteria.hold_time >= 0.0 && criteria.time_cap >= 0.0) {
        return Err(Error::InvalidParams("steady-state criteria must be positive".into()));
    }
    let spec = gen.spec();
    let d = spec.dim();
    let sup = superop(gen, mode);
    let dt = criteria.dt.unwrap_or_else(|| gen.default_dt());
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let check_every = ((criteria.check_interval / dt).round() as usize).max(1);
    let max_steps = (criteria.time_cap / dt).ceil() as usize;
    let stride = criteria.stride.max(1);

    let mut rho = rho0.matrix().as_slice().to_vec();
    let mut rk = Rk4::new(d);
    let mut series = TimeSeries::default();
    let mut max_top: f64 = 0.0;
    let obs = observe(spec, &rho);
    series.push(0.0, &obs);
    max_top = max_top.max(obs.top_level_population);

    let mut last_check = (0.0, obs.fidelity);
    let mut quiet_since: Option<f64> = None;
    let mut converged = false;
    let mut tr = raw_trace(d, &rho);
    let mut t = 0.0;
    let mut s = 0;
    while s < max_steps {
        rk.step(sup, &mut rho, dt);
        s += 1;
        t = s as f64 * dt;
        let after = raw_trace(d, &rho);
        check_step(mode, t, tr, after)?;
        tr = after;

        let at_check = s % check_every == 0;
        if s % stride == 0 || at_check {
            check_finite(t, &rho)?;
            let obs = observe(spec, &rho);
            max_top = max_top.max(obs.top_level_population);
            if s % stride == 0 {
                series.push(t, &obs);
            }
            if at_check {
                let slope = (obs.fidelity - last_check.1) / (t - last_check.0);
                last_check = (t, obs.fidelity);
                if slope.abs() < criteria.slope_threshold {
                    let since = *quiet_since.get_or_insert(t);
                    if t - since >= criteria.hold_time {
                        converged = true;
                        break;
                    }
                } else {
                    quiet_since = None;
                }
            }
        }
    }
    if series.times.last() != Some(&t) {
        check_finite(t, &rho)?;
        let obs = observe(spec, &rho);
        max_top = max_top.max(obs.top_level_population);
        series.push(t, &obs);
    }
    let fidelity = *series.fidelity.last().expect("series is never empty");
    Ok(SteadyState {
        state: DensityState::from_raw(spec, rho, mode == Mode::Unconditional),
        fidelity,
        converged,
        time: t,
        series,
        max_top_population: max_top,
        truncation_violated: max_top > TRUNCATION_THRESHOLD,
    })
}

/// Integrates the master equation until the fidelity stops changing or the
/// time cap is hit; a capped run is reported with `converged = false`.
pub fn steady_state(gen: &Generator, rho0: &DensityState, criteria: &SteadyCriteria) -> Result<SteadyState> {
    check_initial(gen, rho0)?;
    run_until_steady(gen, rho0, criteria, Mode::Unconditional)
}

/// Click-free counterpart of [`steady_state`]: runs the unnormalized
/// no-detection evolution until the conditional fidelity settles.
pub fn no_detection_asymptote(
    gen: &Generator,
    rho0: &DensityState,
    criteria: &SteadyCriteria,
) -> Result<SteadyState> {
    check_initial(gen, rho0)?;
    run_until_steady(gen, rho0, criteria, Mode::NoDetection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::fidelity;
    use crate::scheme::{build_eliminated_generator, SchemeParams};

    fn spec() -> HilbertSpec {
        HilbertSpec::two_level(4).unwrap()
    }

    #[test]
    fn zero_generator_leaves_state_alone() {
        let g = Generator::zero(spec());
        let rho0 = DensityState::product(&spec(), Level::Ground, Level::Excited).unwrap();
        let p = integrate(&g, &rho0, &PropagationOptions::new(1e-4).with_dt(1e-6).with_stride(10)).unwrap();
        assert!(p.series.fidelity.iter().all(|&f| (f - 0.5).abs() < 1e-15));
        assert_eq!(p.state.matrix(), rho0.matrix());

        let ss = steady_state(&g, &rho0, &SteadyCriteria::default()).unwrap();
        assert!(ss.converged);
        assert_eq!(ss.state.matrix(), rho0.matrix());
    }

    #[test]
    fn zero_horizon_gives_single_row() {
        let g = Generator::zero(spec());
        let rho0 = DensityState::dark(&spec());
        let p = integrate(&g, &rho0, &PropagationOptions::new(0.0)).unwrap();
        assert_eq!(p.series.len(), 1);
        assert!((p.series.fidelity[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_lands_on_t_max() {
        let g = Generator::zero(spec());
        let (n, dt) = PropagationOptions::new(1e-3).with_dt(3e-7).grid(&g).unwrap();
        assert!((n as f64 * dt - 1e-3).abs() < 1e-15);
        assert!(dt <= 3e-7);
        assert!(PropagationOptions::new(1e-3).with_dt(0.0).grid(&g).is_err());
    }

    #[test]
    fn dark_state_has_unit_survival() {
        let p = SchemeParams { gamma_s: 0.0, h_r: 0.0, xi: 0.3, ..Default::default() };
        let g = build_eliminated_generator(&p, &spec()).unwrap();
        let prop = propagate_no_detection(&g, &DensityState::dark(&spec()), &PropagationOptions::new(2e-4)).unwrap();
        for (&tr, &f) in prop.series.trace.iter().zip(&prop.series.fidelity) {
            assert!((tr - 1.0).abs() < 1e-12);
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_detection_with_zero_efficiency_is_unconditional() {
        let p = SchemeParams { xi: 0.0, h_r: 100.0, ..Default::default() };
        let g = build_eliminated_generator(&p, &spec()).unwrap();
        let rho0 = DensityState::product(&spec(), Level::Ground, Level::Ground).unwrap();
        let opts = PropagationOptions::new(2e-4).with_stride(7);
        let a = integrate(&g, &rho0, &opts).unwrap();
        let b = propagate_no_detection(&g, &rho0, &opts).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn survival_is_monotone() {
        let p = SchemeParams { xi: 0.5, h_r: 1000.0, ..Default::default() };
        let g = build_eliminated_generator(&p, &spec()).unwrap();
        let rho0 = DensityState::product(&spec(), Level::Excited, Level::Excited).unwrap();
        let prop = propagate_no_detection(&g, &rho0, &PropagationOptions::new(1e-3).with_stride(1)).unwrap();
        assert!(prop.series.trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(*prop.series.trace.last().unwrap() < 1.0);
    }

    #[test]
    fn unnormalized_state_validation() {
        let rho = DensityState::dark(&spec());
        assert!(DensityState::unnormalized(&spec(), rho.matrix().scale_real(0.3)).is_ok());
        assert!(DensityState::unnormalized(&spec(), rho.matrix().scale_real(1.5)).is_err());
        assert!(DensityState::from_operator(&spec(), rho.matrix().scale_real(0.3)).is_err());
        let mut bad = rho.matrix().clone();
        bad[(0, 1)] = C64::new(0.5, 0.0);
        assert!(DensityState::from_operator(&spec(), bad).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let s = spec();
        let a = DensityState::product(&s, Level::Ground, Level::Ground).unwrap();
        let b = DensityState::product(&s, Level::Excited, Level::Ground).unwrap();
        assert!((a.trace_distance(&b) - 1.0).abs() < 1e-12);
        assert!(a.trace_distance(&a) < 1e-12);
        assert!((fidelity(&DensityState::dark(&s)) - 1.0).abs() < 1e-15);
    }
}
