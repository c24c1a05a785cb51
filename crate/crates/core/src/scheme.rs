//! Physical parameters and the Lindblad generators of the pumping scheme.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::DensityState;
use crate::liouville::Superoperator;
use crate::qops::{
    collective_lowering, embed_ion_op, mode_annihilation, HilbertSpec, Ion, IonOp, Operator,
};

/// Rates and couplings of the scheme. Angular frequencies in rad/s, rates in 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Carrier Rabi frequency Ω.
    pub omega: f64,
    /// Red-sideband coupling Ω_r between `|g⟩` and `|e⟩`.
    pub omega_r: f64,
    /// Red-sideband coupling Ω_r′ from `|g⟩` to the temporary level.
    pub omega_rp: f64,
    /// Metastable decay rate γ_s of `|e⟩`.
    pub gamma_s: f64,
    /// Decay rate γ_s′ of the temporary level.
    pub gamma_sp: f64,
    /// Anomalous heating rate in phonons/s.
    pub h_r: f64,
    /// Photodetection efficiency ξ for temporary-level emission.
    pub xi: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            omega: 26e3,
            omega_r: 20e3,
            omega_rp: 1e6,
            gamma_s: 1.0,
            gamma_sp: 1e8,
            h_r: 10.0,
            xi: 0.1,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("omega_r", self.omega_r),
            ("omega_rp", self.omega_rp),
            ("gamma_s", self.gamma_s),
            ("gamma_sp", self.gamma_sp),
            ("h_r", self.h_r),
            ("xi", self.xi),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.xi > 1.0 {
            return Err(Error::InvalidParams(format!("xi must lie in [0, 1], got {}", self.xi)));
        }
        Ok(())
    }

    /// Effective pumping rate Γ = 4Ω_r′²/γ_s′ after eliminating the temporary level.
    pub fn elimination_rate(&self) -> f64 {
        if self.gamma_sp == 0.0 {
            return 0.0;
        }
        4.0 * self.omega_rp * self.omega_rp / self.gamma_sp
    }

    /// Whether the temporary level decays fast enough for elimination to hold.
    pub fn elimination_valid(&self) -> bool {
        self.gamma_sp >= 10.0 * self.omega_rp
    }
}

/// Which model a generator represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Three internal levels per ion, temporary level kept explicitly.
    Full,
    /// Temporary level adiabatically eliminated.
    Eliminated,
}

/// One dissipation channel `rate · D[op]`.
#[derive(Clone, Debug)]
pub struct Channel {
    pub label: String,
    pub rate: f64,
    pub op: Operator,
    /// Detected channels are monitored with efficiency ξ.
    pub detected: bool,
}

impl Channel {
    pub fn new(label: impl Into<String>, rate: f64, op: Operator, detected: bool) -> Self {
        Self { label: label.into(), rate, op, detected }
    }
}

/// Hamiltonian plus dissipation channels, compiled into the unconditional
/// Liouvillian and the no-detection (click-free) generator.
#[derive(Clone, Debug)]
pub struct Generator {
    spec: HilbertSpec,
    hamiltonian: Operator,
    channels: Vec<Channel>,
    xi: f64,
    unconditional: Superoperator,
    no_detection: Superoperator,
}

impl Generator {
    pub fn new(spec: HilbertSpec, hamiltonian: Operator, channels: Vec<Channel>, xi: f64) -> Result<Self> {
        let dim = spec.dim();
        if hamiltonian.dim() != dim {
            return Err(Error::InvalidHilbert(format!(
                "Hamiltonian dimension {} does not match space dimension {dim}",
                hamiltonian.dim()
            )));
        }
        if !hamiltonian.is_hermitian(1e-12) {
            return Err(Error::InvalidParams("Hamiltonian is not Hermitian".into()));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidParams(format!("xi must lie in [0, 1], got {xi}")));
        }
        for ch in &channels {
            if ch.op.dim() != dim {
                return Err(Error::InvalidHilbert(format!("channel {} has wrong dimension", ch.label)));
            }
            if !ch.rate.is_finite() || ch.rate < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "channel {} has invalid rate {}",
                    ch.label, ch.rate
                )));
            }
        }
        let full: Vec<_> = channels.iter().map(|c| (c.rate, c.rate, &c.op)).collect();
        let cond: Vec<_> = channels
            .iter()
            .map(|c| {
                let w = if c.detected { c.rate * (1.0 - xi) } else { c.rate };
                (c.rate, w, &c.op)
            })
            .collect();
        let unconditional = Superoperator::new(&hamiltonian, &full);
        let no_detection = Superoperator::new(&hamiltonian, &cond);
        Ok(Self { spec, hamiltonian, channels, xi, unconditional, no_detection })
    }

    /// Generator with no dynamics at all.
    pub fn zero(spec: HilbertSpec) -> Self {
        Self::new(spec, Operator::zeros(spec.dim()), Vec::new(), 0.0).expect("zero generator is valid")
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn detected_indices(&self) -> Vec<usize> {
        self.channels.iter().enumerate().filter(|(_, c)| c.detected).map(|(i, _)| i).collect()
    }

    pub fn unconditional(&self) -> &Superoperator {
        &self.unconditional
    }

    /// Linear generator of the click-free evolution: the Liouvillian minus the
    /// recycling terms `ξ r C ρ C†` of detected channels.
    pub fn no_detection(&self) -> &Superoperator {
        &self.no_detection
    }

    /// `L(ρ)` for an arbitrary operator.
    pub fn apply(&self, rho: &Operator) -> Operator {
        self.unconditional.apply(rho)
    }

    /// Default RK4 step: the inverse Gershgorin radius of `H_eff`, which keeps
    /// every generator eigenvalue inside the RK4 stability region.
    pub fn default_dt(&self) -> f64 {
        let r = self.unconditional.heff_radius().max(self.no_detection.heff_radius());
        if r == 0.0 {
            1e-6
        } else {
            1.0 / r
        }
    }

    /// Copy with a different set of channels and the same Hamiltonian.
    pub fn with_channels(&self, channels: Vec<Channel>) -> Result<Self> {
        Self::new(self.spec, self.hamiltonian.clone(), channels, self.xi)
    }
}

fn check_levels(spec: &HilbertSpec, expected: usize) -> Result<()> {
    if spec.internal_levels() != expected {
        return Err(Error::LevelMismatch { expected, found: spec.internal_levels() });
    }
    Ok(())
}

fn ion(spec: &HilbertSpec, which: Ion, op: IonOp) -> Operator {
    embed_ion_op(spec, which, op).expect("level count checked by caller")
}

/// `Ω(J₊+J₋) + Ω_r(J₋a† + J₊a)`, shared by both models.
fn ground_manifold_hamiltonian(p: &SchemeParams, spec: &HilbertSpec) -> Operator {
    let jm = collective_lowering(spec);
    let jp = jm.adjoint();
    let a = mode_annihilation(spec);
    let ad = a.adjoint();
    let carrier = (&jp + &jm).scale_real(p.omega);
    let sideband = (&(&jm * &ad) + &(&jp * &a)).scale_real(p.omega_r);
    &carrier + &sideband
}

fn background_channels(p: &SchemeParams, spec: &HilbertSpec) -> Vec<Channel> {
    let a = mode_annihilation(spec);
    vec![
        Channel::new("metastable1", p.gamma_s, ion(spec, Ion::One, IonOp::SigmaMinus), false),
        Channel::new("metastable2", p.gamma_s, ion(spec, Ion::Two, IonOp::SigmaMinus), false),
        Channel::new("cooling", p.h_r, a.clone(), false),
        Channel::new("heating", p.h_r, a.adjoint(), false),
    ]
}

/// Three-level model with the temporary level explicit.
pub fn build_full_generator(p: &SchemeParams, spec: &HilbertSpec) -> Result<Generator> {
    p.validate()?;
    check_levels(spec, 3)?;
    let a = mode_annihilation(spec);
    let ad = a.adjoint();
    let b1 = ion(spec, Ion::One, IonOp::TempDecay);
    let b2 = ion(spec, Ion::Two, IonOp::TempDecay);
    let bsum = &b1 + &b2;
    let temp_drive = (&(&bsum * &ad) + &(&bsum.adjoint() * &a)).scale_real(p.omega_rp);
    let h = &ground_manifold_hamiltonian(p, spec) + &temp_drive;

    let mut channels = vec![
        Channel::new("ion1", p.gamma_sp, b1, true),
        Channel::new("ion2", p.gamma_sp, b2, true),
    ];
    channels.extend(background_channels(p, spec));
    Generator::new(*spec, h, channels, p.xi)
}

/// Pumping jump operator `|g⟩ᵢ⟨g| a` for one ion.
pub fn pump_operator(spec: &HilbertSpec, which: Ion) -> Operator {
    &ion(spec, which, IonOp::ProjGround) * &mode_annihilation(spec)
}

/// Two-level model with the temporary level adiabatically eliminated.
pub fn build_eliminated_generator(p: &SchemeParams, spec: &HilbertSpec) -> Result<Generator> {
    p.validate()?;
    check_levels(spec, 2)?;
    let h = ground_manifold_hamiltonian(p, spec);
    let gamma = p.elimination_rate();
    let mut channels = vec![
        Channel::new("ion1", gamma, pump_operator(spec, Ion::One), true),
        Channel::new("ion2", gamma, pump_operator(spec, Ion::Two), true),
    ];
    channels.extend(background_channels(p, spec));
    Generator::new(*spec, h, channels, p.xi)
}

pub fn build_generator(model: Model, p: &SchemeParams, n_motional: usize) -> Result<Generator> {
    match model {
        Model::Full => build_full_generator(p, &HilbertSpec::three_level(n_motional)?),
        Model::Eliminated => build_eliminated_generator(p, &HilbertSpec::two_level(n_motional)?),
    }
}

/// Expected click rate `ξ r Tr[C†C ρ]` of each detected channel, as
/// `(channel index, rate)` pairs.
pub fn detection_rate(gen: &Generator, rho: &DensityState) -> Vec<(usize, f64)> {
    detection_rate_raw(gen, rho.matrix())
}

pub(crate) fn detection_rate_raw(gen: &Generator, rho: &Operator) -> Vec<(usize, f64)> {
    gen.channels
        .iter()
        .enumerate()
        .filter(|(_, c)| c.detected)
        .map(|(k, c)| (k, gen.xi * c.rate * jump_weight(&c.op, rho)))
        .collect()
}

/// `Tr[C ρ C†]`, real part.
pub(crate) fn jump_weight(op: &Operator, rho: &Operator) -> f64 {
    let d = op.dim();
    // Tr[CρC†] = Σ_i Σ_{k,l} C_ik ρ_kl conj(C_il)
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        let row = op.row(i);
        for (k, &cik) in row.iter().enumerate() {
            if cik.re == 0.0 && cik.im == 0.0 {
                continue;
            }
            let rho_row = rho.row(k);
            for (l, &cil) in row.iter().enumerate() {
                if cil.re == 0.0 && cil.im == 0.0 {
                    continue;
                }
                acc += cik * rho_row[l] * cil.conj();
            }
        }
    }
    acc.re
}
