use ionpump::analyze::fidelity;
use ionpump::evolve::{integrate, propagate_no_detection, DensityState, PropagationOptions};
use ionpump::jumps::post_jump_state;
use ionpump::qops::{kron, HilbertSpec, Level, Operator};
use ionpump::scheme::{build_generator, Model, SchemeParams};
use num_complex::Complex64 as C64;

const OMEGA: f64 = 1e4;

fn carrier_only() -> SchemeParams {
    SchemeParams {
        omega: OMEGA,
        omega_r: 0.0,
        omega_rp: 0.0,
        gamma_s: 0.0,
        gamma_sp: 1e8,
        h_r: 0.0,
        xi: 0.0,
    }
}

fn sigma_x() -> Operator {
    Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// `exp(-iθσx)` on each ion, identity on the mode.
fn exact_carrier(theta: f64, n: usize) -> Operator {
    let u = &Operator::identity(2).scale_real(theta.cos()) + &sigma_x().scale(C64::new(0.0, -theta.sin()));
    kron(&kron(&u, &u), &Operator::identity(n))
}

fn carrier_error(steps: usize, t: f64) -> f64 {
    let n = 2;
    let gen = build_generator(Model::Eliminated, &carrier_only(), n).unwrap();
    let spec = *gen.spec();
    let rho0 = DensityState::product(&spec, Level::Ground, Level::Ground).unwrap();
    let opts = PropagationOptions::new(t).with_dt(t / steps as f64).with_stride(steps);
    let out = integrate(&gen, &rho0, &opts).unwrap();
    let u = exact_carrier(OMEGA * t, n);
    let exact = &(&u * rho0.matrix()) * &u.adjoint();
    (out.state.matrix() - &exact).max_abs()
}

#[test]
fn carrier_hamiltonian_is_independent_rotation() {
    let n = 3;
    let gen = build_generator(Model::Eliminated, &carrier_only(), n).unwrap();
    let sx = sigma_x();
    let i2 = Operator::identity(2);
    let expected = kron(&(&kron(&sx, &i2) + &kron(&i2, &sx)), &Operator::identity(n)).scale_real(OMEGA);
    assert!((gen.hamiltonian() - &expected).max_abs() < 1e-12);
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let t = 1e-3;
    let coarse = carrier_error(200, t);
    let fine = carrier_error(400, t);
    let ratio = coarse / fine;
    assert!((14.0..18.0).contains(&ratio), "ratio {ratio} ({coarse:e} -> {fine:e})");
}

#[test]
fn rk4_local_error_is_fifth_order() {
    let coarse = carrier_error(1, 5e-6);
    let fine = carrier_error(1, 2.5e-6);
    let ratio = coarse / fine;
    assert!((28.0..36.0).contains(&ratio), "ratio {ratio} ({coarse:e} -> {fine:e})");
}

#[test]
fn full_model_carrier_keeps_trace_and_purity() {
    let gen = build_generator(Model::Full, &carrier_only(), 3).unwrap();
    let spec = *gen.spec();
    let rho0 = DensityState::product(&spec, Level::Ground, Level::Excited).unwrap();
    let out = integrate(&gen, &rho0, &PropagationOptions::new(1e-3).with_dt(1e-7)).unwrap();
    let rho = out.state.matrix();
    let purity = (rho * rho).trace().re;
    assert!((out.state.trace() - 1.0).abs() < 1e-10);
    assert!((purity - 1.0).abs() < 1e-10, "purity {purity}");
    let min = out.state.min_eigenvalue();
    assert!(min > -1e-10, "min eigenvalue {min:e}");
}

#[test]
fn series_grid_is_well_formed() {
    let gen = build_generator(Model::Eliminated, &SchemeParams::default(), 4).unwrap();
    let spec = *gen.spec();
    let rho0 = DensityState::product(&spec, Level::Ground, Level::Ground).unwrap();
    let out = integrate(&gen, &rho0, &PropagationOptions::new(1e-3).with_stride(7)).unwrap();
    let s = &out.series;
    assert_eq!(s.times[0], 0.0);
    assert!((s.times[s.len() - 1] - 1e-3).abs() < 1e-15);
    assert!(s.times.windows(2).all(|w| w[1] > w[0]));
    assert!(s.fidelity.iter().all(|f| (0.0..=1.0 + 1e-10).contains(f)));
    assert!(s.trace.iter().all(|t| (t - 1.0).abs() < 1e-9));

    let zero = integrate(&gen, &rho0, &PropagationOptions::new(0.0)).unwrap();
    assert_eq!(zero.series.len(), 1);
    assert_eq!(zero.series.fidelity[0], 0.0);
    assert_eq!(zero.state.matrix(), rho0.matrix());
}

#[test]
fn click_free_survival_is_monotone() {
    let p = SchemeParams { xi: 0.5, h_r: 100.0, ..SchemeParams::default() };
    let gen = build_generator(Model::Eliminated, &p, 6).unwrap();
    let spec = *gen.spec();
    let rho0 = DensityState::product(&spec, Level::Excited, Level::Ground).unwrap();
    let out = propagate_no_detection(&gen, &rho0, &PropagationOptions::new(2e-3).with_stride(10)).unwrap();
    let surv = &out.series.trace;
    assert_eq!(surv[0], 1.0);
    assert!(surv.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*surv.last().unwrap() > 0.0);
    assert!((out.state.trace() - surv.last().unwrap()).abs() < 1e-12);
}

#[test]
fn detection_leaves_detected_ion_in_ground() {
    let gen = build_generator(Model::Eliminated, &SchemeParams::default(), 3).unwrap();
    let spec = *gen.spec();
    let n = spec.n_motional();
    // uniform mixture over the whole space
    let rho = DensityState::from_operator(&spec, Operator::identity(spec.dim()).scale_real(1.0 / spec.dim() as f64)).unwrap();
    let post = post_jump_state(&gen, &rho).unwrap();
    assert!((post.trace() - 1.0).abs() < 1e-12);
    // each detection lowers the phonon number, so the top level is empty
    for a in [Level::Ground, Level::Excited] {
        for b in [Level::Ground, Level::Excited] {
            let i = spec.index(a, b, n - 1);
            assert!(post.matrix()[(i, i)].re.abs() < 1e-15);
        }
    }
    let ee = spec.index(Level::Excited, Level::Excited, 0);
    assert!(post.matrix()[(ee, ee)].re.abs() < 1e-15);
}

fn long_run_fidelity(h_r: f64) -> f64 {
    let p = SchemeParams { h_r, ..SchemeParams::default() };
    let gen = build_generator(Model::Eliminated, &p, HilbertSpec::DEFAULT_MOTIONAL).unwrap();
    let spec = *gen.spec();
    let rho0 = DensityState::product(&spec, Level::Ground, Level::Ground).unwrap();
    let out = integrate(&gen, &rho0, &PropagationOptions::new(0.1).with_stride(1000)).unwrap();
    assert!(!out.truncation_violated);
    fidelity(&out.state)
}

#[test]
fn long_run_fidelity_low_heating() {
    let f = long_run_fidelity(10.0);
    assert!((f - 0.997).abs() <= 0.002, "F = {f}");
}

#[test]
fn long_run_fidelity_moderate_heating() {
    let f = long_run_fidelity(100.0);
    assert!((f - 0.980).abs() <= 0.002, "F = {f}");
}
