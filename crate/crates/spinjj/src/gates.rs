//! Gate families built on the junction-mediated coupling: holonomic
//! single-qubit reflections from a dark/bright cyclic evolution, the driven
//! two-qubit phase gate schedule, and the dispersive π phase-swap gate.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::dynamics::{propagate_schrodinger, DynamicsError, TimeGrid};
use crate::metrics::{phase_invariant_fidelity, MetricsError};
use crate::model::{build_h_e, units, ModelError, SystemParams, TimeDependentOperator};
use crate::qcore::{
    c, expm_unitary, identity, max_abs_diff, zeros, CMatrix, CVector, QcoreError,
};

#[derive(Debug, Error)]
pub enum GatesError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no feasible schedule: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Which gate family a request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "holonomic-1q")]
    Holonomic1q,
    #[serde(rename = "phase-2q")]
    Phase2q,
    #[serde(rename = "swap-2q")]
    Swap2q,
}

/// User-level gate request: angles for the holonomic reflection, period and
/// quantization indices plus a minimum detuning ratio for the phase gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSpec {
    pub kind: GateKind,
    /// Polar angle θ of the coupling parametrization (rad), in [0, π].
    pub theta: f64,
    /// Relative coupling phase φ (rad), in [0, 2π).
    pub phi: f64,
    /// Detuning period count for the phase gate (positive).
    pub n: u64,
    /// Phase-quantization index: the conditional phase is (2m+1)π/4.
    pub m: u64,
    /// Smallest admissible δ/G′ for the planned drive.
    pub min_detuning_ratio: f64,
}

impl Default for GateSpec {
    fn default() -> Self {
        Self {
            kind: GateKind::Phase2q,
            theta: 0.0,
            phi: 0.0,
            n: 1,
            m: 0,
            min_detuning_ratio: 10.0,
        }
    }
}

impl GateSpec {
    pub fn validate(&self) -> Result<(), GatesError> {
        check_angles(self.theta, self.phi)?;
        if self.n == 0 {
            return Err(GatesError::InvalidArgument(
                "period count n must be positive".into(),
            ));
        }
        if !self.min_detuning_ratio.is_finite() || self.min_detuning_ratio <= 0.0 {
            return Err(GatesError::InvalidArgument(format!(
                "min_detuning_ratio must be finite and positive, got {}",
                self.min_detuning_ratio
            )));
        }
        Ok(())
    }
}

fn check_angles(theta: f64, phi: f64) -> Result<(), GatesError> {
    if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
        return Err(GatesError::InvalidArgument(format!(
            "theta must lie in [0, π], got {theta}"
        )));
    }
    if !phi.is_finite() || !(0.0..TAU).contains(&phi) {
        return Err(GatesError::InvalidArgument(format!(
            "phi must lie in [0, 2π), got {phi}"
        )));
    }
    Ok(())
}

/// Basis in which a plan's ideal unitary is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateBasis {
    Computational,
    PlusMinus,
}

/// Executable schedule for a gate: duration, required couplings and drive,
/// and the ideal target unitary with its basis tag.
#[derive(Debug, Clone)]
pub struct GatePlan {
    /// Total evolution time (ns).
    pub duration_ns: f64,
    /// Realized coupling of ensemble 1 (MHz).
    pub g1_mhz: f64,
    /// Realized coupling of ensemble 2 (MHz).
    pub g2_mhz: f64,
    /// Required classical drive amplitude (MHz).
    pub epsilon_mhz: f64,
    /// Target unitary the schedule implements.
    pub ideal_unitary: CMatrix,
    /// Basis the target matrix is written in.
    pub basis: GateBasis,
    /// Chosen detuning period count.
    pub n: u64,
    /// Phase-quantization index.
    pub m: u64,
    /// Per-qubit rotation angle θ = (2m+1)π/4 (rad).
    pub theta: f64,
}

impl GatePlan {
    fn validate(&self) -> Result<(), GatesError> {
        if !self.duration_ns.is_finite() || self.duration_ns <= 0.0 {
            return Err(GatesError::InvalidArgument(format!(
                "plan duration must be positive, got {} ns",
                self.duration_ns
            )));
        }
        for (name, v) in [
            ("g1_mhz", self.g1_mhz),
            ("g2_mhz", self.g2_mhz),
            ("epsilon_mhz", self.epsilon_mhz),
            ("theta", self.theta),
        ] {
            if !v.is_finite() {
                return Err(GatesError::InvalidArgument(format!("{name} is not finite")));
            }
        }
        let u = &self.ideal_unitary;
        let dev = max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()));
        if dev > 1e-12 {
            return Err(GatesError::InvalidArgument(format!(
                "ideal unitary deviates from unitarity by {dev:.3e}"
            )));
        }
        Ok(())
    }
}

/// Dark/bright decomposition of the single-excitation manifold
/// {|φ₁⟩ = |100⟩, |φ₂⟩ = |010⟩, |φ₃⟩ = |001⟩} for couplings (G₁, G₂).
///
/// The dark state is the superposition of |φ₁⟩ and |φ₃⟩ annihilated by the
/// exchange interaction, (−G₂*|φ₁⟩ + G₁*|φ₃⟩)/𝒢; the orthogonal bright
/// combination (G₁|φ₁⟩ + G₂|φ₃⟩)/𝒢 Rabi-couples to |φ₂⟩ at rate
/// 𝒢 = √(|G₁|² + |G₂|²), splitting into |ψ±⟩ = (|b⟩ ± |φ₂⟩)/√2.
#[derive(Debug, Clone)]
pub struct Eigenstructure {
    pub dark: CVector,
    pub bright: CVector,
    pub plus: CVector,
    pub minus: CVector,
    /// Energies of (dark, plus, minus): (0, +𝒢, −𝒢).
    pub energies: [f64; 3],
}

pub fn eigenstructure(g1: C64, g2: C64) -> Result<Eigenstructure, GatesError> {
    let gnorm = (g1.norm_sqr() + g2.norm_sqr()).sqrt();
    if !gnorm.is_finite() || gnorm == 0.0 {
        return Err(GatesError::InvalidArgument(
            "eigenstructure requires at least one nonzero coupling".into(),
        ));
    }
    let zero = c(0.0, 0.0);
    let dark = CVector::from_vec(vec![-g2.conj() / gnorm, zero, g1.conj() / gnorm]);
    let bright = CVector::from_vec(vec![g1 / gnorm, zero, g2 / gnorm]);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut phi2 = CVector::zeros(3);
    phi2[1] = c(1.0, 0.0);
    let plus = (&bright + &phi2).scale(inv_sqrt2);
    let minus = (&bright - &phi2).scale(inv_sqrt2);
    Ok(Eigenstructure {
        dark,
        bright,
        plus,
        minus,
        energies: [0.0, gnorm, -gnorm],
    })
}

/// Interaction matrix on {|φ₁⟩, |φ₂⟩, |φ₃⟩}: G_j connects ensemble j to the
/// junction excitation, ⟨φ₁|H|φ₂⟩ = G₁ and ⟨φ₃|H|φ₂⟩ = G₂.
fn single_excitation_block(g1: C64, g2: C64) -> CMatrix {
    let mut h = zeros(3);
    h[(0, 1)] = g1;
    h[(1, 0)] = g1.conj();
    h[(2, 1)] = g2;
    h[(1, 2)] = g2.conj();
    h
}

/// Reflection implemented by one dark/bright cycle, in the basis {|φ₁⟩, |φ₃⟩}:
/// [[−cosθ, sinθ·e^{iφ}], [sinθ·e^{−iφ}, cosθ]]. Unitary, hermitian,
/// determinant −1.
pub fn holonomic_unitary(theta: f64, phi: f64) -> CMatrix {
    let mut u = zeros(2);
    u[(0, 0)] = c(-theta.cos(), 0.0);
    u[(0, 1)] = C64::from_polar(theta.sin(), phi);
    u[(1, 0)] = C64::from_polar(theta.sin(), -phi);
    u[(1, 1)] = c(theta.cos(), 0.0);
    u
}

/// Numerical check of one holonomic cycle.
#[derive(Debug, Clone, Copy)]
pub struct HolonomicCycleCheck {
    /// 1 − |tr(M†·U_target)|/2 for the induced map M on {|φ₁⟩, |φ₃⟩}.
    pub infidelity: f64,
    /// Worst-case |φ₂⟩ population left at the end of the cycle.
    pub leakage: f64,
}

/// Propagates the single-excitation block through one full cycle with
/// constant couplings G₁ = 𝒢cos(θ/2), G₂ = 𝒢sin(θ/2)·e^{i(π−φ)} for
/// duration T = π/𝒢 (here 𝒢 = 1), and compares the induced map on
/// {|φ₁⟩, |φ₃⟩} against [`holonomic_unitary`] up to a global phase.
///
/// The coupling phase is π − φ rather than φ: the dark-state projector built
/// from (−G₂*, G₁*) then reproduces the off-diagonal phase e^{iφ} of the
/// target reflection exactly.
pub fn verify_holonomic_cycle(
    theta: f64,
    phi: f64,
    n_time_steps: usize,
) -> Result<HolonomicCycleCheck, GatesError> {
    check_angles(theta, phi)?;
    if n_time_steps == 0 {
        return Err(GatesError::InvalidArgument(
            "n_time_steps must be positive".into(),
        ));
    }
    let g1 = c((0.5 * theta).cos(), 0.0);
    let g2 = C64::from_polar((0.5 * theta).sin(), PI - phi);
    let op = TimeDependentOperator::constant(single_excitation_block(g1, g2))?;
    let grid = TimeGrid::new(0.0, PI, n_time_steps, n_time_steps)?;

    let mut induced = zeros(2);
    let mut leakage: f64 = 0.0;
    for (col, basis_index) in [(0usize, 0usize), (1, 2)] {
        let mut psi0 = CVector::zeros(3);
        psi0[basis_index] = c(1.0, 0.0);
        let traj = propagate_schrodinger(&op, &psi0, &grid)?;
        let end = traj.final_state();
        induced[(0, col)] = end[0];
        induced[(1, col)] = end[2];
        leakage = leakage.max(end[1].norm_sqr());
    }
    let target = holonomic_unitary(theta, phi);
    let fidelity = phase_invariant_fidelity(&induced, &target)?;
    Ok(HolonomicCycleCheck {
        infidelity: (1.0 - fidelity).max(0.0),
        leakage,
    })
}

fn require_equal_couplings(params: &SystemParams) -> Result<f64, GatesError> {
    let scale = params.g1.abs().max(params.g2.abs()).max(1.0);
    if (params.g1 - params.g2).abs() > 1e-12 * scale || params.g2_phase != 0.0 {
        return Err(GatesError::InvalidArgument(format!(
            "equal real couplings required, got g1 = {} MHz, g2 = {} MHz (phase {})",
            params.g1, params.g2, params.g2_phase
        )));
    }
    if params.g1 <= 0.0 {
        return Err(GatesError::InvalidArgument(
            "coupling must be positive".into(),
        ));
    }
    Ok(params.g1)
}

fn require_positive_detuning(params: &SystemParams) -> Result<f64, GatesError> {
    let delta = params.detuning()?;
    if delta <= 0.0 {
        return Err(GatesError::InvalidArgument(format!(
            "positive detuning required for a finite schedule, got {} MHz",
            params.detuning_mhz()
        )));
    }
    Ok(delta)
}

/// Largest period count the planner will consider.
pub const PHASE_GATE_N_CAP: u64 = 1_000_000;

/// Schedules the driven two-qubit phase gate.
///
/// Picks the smallest period count n ≥ (2m+1)·min_ratio²/4; the coupling that
/// closes the phase condition is then G′ = δ·√((2m+1)/(4n)), automatically
/// keeping δ/G′ ≥ min_ratio. The duration is τ = 2nπ/δ, the per-qubit angle
/// θ = (2m+1)π/4, and the drive satisfies Ωτ = θ with Ω = εG′/δ. The target
/// is diag(e^{−iθ}, e^{−iθ}, e^{−iθ}, e^{3iθ}) on {|++⟩, |+−⟩, |−+⟩, |−−⟩},
/// a controlled-phase gate up to a global phase.
pub fn plan_phase_gate(
    params: &SystemParams,
    m: u64,
    min_ratio: f64,
) -> Result<GatePlan, GatesError> {
    params.validate().map_err(GatesError::from)?;
    require_equal_couplings(params)?;
    if !min_ratio.is_finite() || min_ratio <= 0.0 {
        return Err(GatesError::InvalidArgument(format!(
            "min_ratio must be finite and positive, got {min_ratio}"
        )));
    }
    let delta = require_positive_detuning(params)?;
    let odd = (2 * m + 1) as f64;
    let wanted = odd * min_ratio * min_ratio / 4.0;
    // Smallest integer ≥ wanted, forgiving roundoff on exactly integral values.
    let floor = wanted.floor();
    let n_real = if wanted - floor <= 1e-9 * wanted.max(1.0) {
        floor.max(1.0)
    } else {
        floor + 1.0
    };
    if n_real > PHASE_GATE_N_CAP as f64 {
        return Err(GatesError::Infeasible(format!(
            "period count {n_real:.0} exceeds the cap {PHASE_GATE_N_CAP} \
             (m = {m}, min_ratio = {min_ratio})"
        )));
    }
    let n = n_real as u64;
    let g_prime = delta * (odd / (4.0 * n_real)).sqrt();
    let tau = 2.0 * n_real * PI / delta;
    let theta = odd * PI / 4.0;
    let omega = theta / tau;
    let epsilon = omega * delta / g_prime;
    let plan = GatePlan {
        duration_ns: tau,
        g1_mhz: units::freq_mhz(g_prime),
        g2_mhz: units::freq_mhz(g_prime),
        epsilon_mhz: units::freq_mhz(epsilon),
        ideal_unitary: plus_minus_diagonal(theta),
        basis: GateBasis::PlusMinus,
        n,
        m,
        theta,
    };
    plan.validate()?;
    Ok(plan)
}

fn plus_minus_diagonal(theta: f64) -> CMatrix {
    let mut u = zeros(4);
    let single = C64::from_polar(1.0, -theta);
    u[(0, 0)] = single;
    u[(1, 1)] = single;
    u[(2, 2)] = single;
    u[(3, 3)] = C64::from_polar(1.0, 3.0 * theta);
    u
}

/// 4×4 basis change between the computational and |±⟩ product bases
/// (a pair of Hadamards; hermitian and self-inverse).
pub fn plus_minus_transform() -> CMatrix {
    let mut h = zeros(2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    h[(0, 0)] = c(s, 0.0);
    h[(0, 1)] = c(s, 0.0);
    h[(1, 0)] = c(s, 0.0);
    h[(1, 1)] = c(-s, 0.0);
    crate::qcore::kron(&h, &h)
}

/// exp[−iθ(σx¹ + σx² − σx¹σx²)] in the computational basis, evaluated
/// exactly through its σx product eigenbasis, where it is
/// diag(e^{−iθ}, e^{−iθ}, e^{−iθ}, e^{3iθ}).
pub fn phase_gate_unitary(theta: f64) -> CMatrix {
    let w = plus_minus_transform();
    &w * plus_minus_diagonal(theta) * &w
}

/// Exact dispersive evolution at the swap time.
#[derive(Debug, Clone)]
pub struct SwapGateExact {
    /// Swap time τ_k = πδ/(2G²) (ns).
    pub tau_k_ns: f64,
    /// exp(−i·H_e·τ_k): diag-block [1, −SWAP, −1] on {|00⟩,|01⟩,|10⟩,|11⟩}.
    pub u_exact: CMatrix,
    /// The commonly quoted form (Z⊗Z)·u_exact: a plain swap with a π phase
    /// on |11⟩. The two matrices differ by the local frame Z⊗Z, not by a
    /// global phase.
    pub u_reported: CMatrix,
}

/// Free dispersive evolution for τ_k = πδ/(2G²): the excitation swap picks
/// up a π phase difference between the symmetric and antisymmetric
/// single-excitation states, and |11⟩ acquires e^{−iπ}.
pub fn swap_gate_exact(params: &SystemParams) -> Result<SwapGateExact, GatesError> {
    params.validate().map_err(GatesError::from)?;
    require_equal_couplings(params)?;
    let delta = require_positive_detuning(params)?;
    let g = params.g1_internal().re;
    let tau_k = PI * delta / (2.0 * g * g);
    let u_exact = expm_unitary(&build_h_e(params)?, tau_k)?;
    let mut zz = zeros(4);
    zz[(0, 0)] = c(1.0, 0.0);
    zz[(1, 1)] = c(-1.0, 0.0);
    zz[(2, 2)] = c(-1.0, 0.0);
    zz[(3, 3)] = c(1.0, 0.0);
    let u_reported = &zz * &u_exact;
    Ok(SwapGateExact {
        tau_k_ns: tau_k,
        u_exact,
        u_reported,
    })
}
