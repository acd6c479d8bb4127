//! Physical model of two NV spin ensembles coupled through a long Josephson
//! junction: user-facing parameters, unit conversions, coupling estimates,
//! and the Hamiltonian / Lindblad builders used by the dynamics engines.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{
    self, boson_ops, c, hermiticity_deviation, row_sum_norm, sigma_minus, sigma_plus, sigma_x,
    sigma_z, CMatrix, HilbertLayout, QcoreError,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("detuning is zero; the dispersive quantities are undefined")]
    ZeroDetuning,
    #[error("couplings must be equal for the effective coupling (g1 = {g1} MHz, g2 = {g2} MHz)")]
    UnequalCouplings { g1: f64, g2: f64 },
    #[error("operator sum is not hermitian at t = {t} (deviation {dev:.3e})")]
    NonHermitianSum { t: f64, dev: f64 },
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Unit conventions.
///
/// User-facing numbers are ordinary frequencies in MHz and times in ns.
/// Internally, oscillation frequencies (mode frequencies, couplings, drives,
/// detunings) are angular: `rad/ns = 2π · MHz · 1e-3`. Decay and dephasing
/// rates are inverse lifetimes and convert without the 2π:
/// `1/ns = MHz · 1e-3`, so "Γ = 1 MHz" means a 1 µs lifetime scale.
pub mod units {
    use std::f64::consts::TAU;

    /// Ordinary frequency in MHz → angular frequency in rad/ns.
    pub fn freq_internal(mhz: f64) -> f64 {
        TAU * 1e-3 * mhz
    }

    /// Angular frequency in rad/ns → ordinary frequency in MHz.
    pub fn freq_mhz(internal: f64) -> f64 {
        internal / (TAU * 1e-3)
    }

    /// Decay/dephasing rate in MHz → inverse nanoseconds.
    pub fn rate_internal(mhz: f64) -> f64 {
        1e-3 * mhz
    }

    /// Inverse nanoseconds → rate in MHz.
    pub fn rate_mhz(internal: f64) -> f64 {
        1e3 * internal
    }
}

/// System parameters in user-facing units (MHz ordinary frequencies,
/// radians for phases, dimensionless counts).
///
/// The defaults describe an NV-ensemble / long-Josephson-junction setup with
/// a 6.9 GHz junction plasma resonance, the 2.87 GHz NV zero-field
/// splitting, a 620 MHz collective magnetic coupling, and MHz-scale
/// decoherence.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Junction plasma frequency (MHz).
    pub omega: f64,
    /// Ensemble spin transition frequency (MHz).
    pub omega10: f64,
    /// Collective coupling of ensemble 1 (MHz).
    pub g1: f64,
    /// Collective coupling modulus of ensemble 2 (MHz).
    pub g2: f64,
    /// Phase of the ensemble-2 coupling (rad).
    pub g2_phase: f64,
    /// Classical microwave drive amplitude (MHz).
    pub epsilon: f64,
    /// Drive frequency (MHz).
    pub omega_d: f64,
    /// Junction photon loss rate (MHz).
    pub kappa: f64,
    /// Conditional-evolution ensemble decoherence rate (MHz).
    pub gamma: f64,
    /// Ensemble dephasing rate (MHz).
    pub gamma1: f64,
    /// Ensemble relaxation rate (MHz).
    pub gamma2: f64,
    /// Fock-space occupation cutoff for the junction mode.
    pub n_max: usize,
    /// Junction charging energy (MHz), if supplied.
    pub e_c: Option<f64>,
    /// Junction Josephson energy (MHz), if supplied.
    pub e_j: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega: 6900.0,
            omega10: 2870.0,
            g1: 620.0,
            g2: 620.0,
            g2_phase: 0.0,
            epsilon: 0.0,
            omega_d: 2870.0,
            kappa: 1.0,
            gamma: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            n_max: 5,
            e_c: None,
            e_j: None,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let named = [
            ("omega", self.omega),
            ("omega10", self.omega10),
            ("g1", self.g1),
            ("g2", self.g2),
            ("epsilon", self.epsilon),
            ("omega_d", self.omega_d),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        if !self.g2_phase.is_finite() {
            return Err(ModelError::InvalidParameter(
                "g2_phase must be finite".into(),
            ));
        }
        for (name, value) in [("e_c", self.e_c), ("e_j", self.e_j)] {
            if let Some(v) = value {
                if !v.is_finite() || v <= 0.0 {
                    return Err(ModelError::InvalidParameter(format!(
                        "{name} must be finite and positive, got {v}"
                    )));
                }
            }
        }
        if self.n_max < 1 {
            return Err(ModelError::InvalidParameter(
                "n_max must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Junction–ensemble detuning ω − ω10 in MHz.
    pub fn detuning_mhz(&self) -> f64 {
        self.omega - self.omega10
    }

    /// Detuning in internal angular units, rejecting the resonant case.
    pub fn detuning(&self) -> Result<f64, ModelError> {
        let d = units::freq_internal(self.detuning_mhz());
        if d == 0.0 {
            return Err(ModelError::ZeroDetuning);
        }
        Ok(d)
    }

    /// Ensemble-1 coupling in internal angular units (real by convention).
    pub fn g1_internal(&self) -> C64 {
        c(units::freq_internal(self.g1), 0.0)
    }

    /// Ensemble-2 coupling in internal angular units, carrying its phase.
    pub fn g2_internal(&self) -> C64 {
        C64::from_polar(units::freq_internal(self.g2), self.g2_phase)
    }

    pub fn epsilon_internal(&self) -> f64 {
        units::freq_internal(self.epsilon)
    }

    pub fn kappa_internal(&self) -> f64 {
        units::rate_internal(self.kappa)
    }

    pub fn gamma_internal(&self) -> f64 {
        units::rate_internal(self.gamma)
    }

    pub fn gamma1_internal(&self) -> f64 {
        units::rate_internal(self.gamma1)
    }

    pub fn gamma2_internal(&self) -> f64 {
        units::rate_internal(self.gamma2)
    }

    pub fn layout(&self) -> Result<HilbertLayout, ModelError> {
        Ok(HilbertLayout::tri_partite(self.n_max)?)
    }
}

/// Vacuum permeability (T·m/A).
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Product of the NV electron g-factor and the Bohr magneton, in MHz per mT.
pub const GE_MU_B_MHZ_PER_MT: f64 = 28.0;

/// Magnetostatic estimate of the junction–ensemble coupling.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PhysicalEstimate {
    /// Junction bias current (A).
    pub i0_amperes: f64,
    /// Junction–ensemble standoff distance (m).
    pub distance_meters: f64,
    /// Number of spins in the ensemble.
    pub n_spins: f64,
    /// Magnetic field at the ensemble (T).
    pub b_field_tesla: f64,
    /// Single-spin coupling (MHz).
    pub g_single_mhz: f64,
    /// Collective coupling sqrt(N)·g (MHz).
    pub g_collective_mhz: f64,
}

/// Field of a line current at distance r, B = μ₀ I / (4π r), then the
/// single-spin coupling 2·(gₑμ_B)·B and the sqrt(N) collective enhancement.
pub fn estimate_coupling(
    i0_amperes: f64,
    distance_meters: f64,
    n_spins: f64,
) -> Result<PhysicalEstimate, ModelError> {
    for (name, v) in [
        ("current", i0_amperes),
        ("distance", distance_meters),
        ("spin count", n_spins),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "{name} must be finite and positive, got {v}"
            )));
        }
    }
    let b_field_tesla = MU_0 * i0_amperes / (4.0 * std::f64::consts::PI * distance_meters);
    let b_field_mt = b_field_tesla * 1e3;
    let g_single_mhz = 2.0 * GE_MU_B_MHZ_PER_MT * b_field_mt;
    let g_collective_mhz = n_spins.sqrt() * g_single_mhz;
    Ok(PhysicalEstimate {
        i0_amperes,
        distance_meters,
        n_spins,
        b_field_tesla,
        g_single_mhz,
        g_collective_mhz,
    })
}

/// Junction plasma frequency sqrt(8·E_C·E_J); energies and result share the
/// same frequency unit.
pub fn plasma_frequency(e_c: f64, e_j: f64) -> Result<f64, ModelError> {
    for (name, v) in [("e_c", e_c), ("e_j", e_j)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "{name} must be finite and positive, got {v}"
            )));
        }
    }
    Ok((8.0 * e_c * e_j).sqrt())
}

/// Junction-mediated exchange rate λ = G²/δ in MHz, defined for equal real
/// couplings G and nonzero detuning.
pub fn lambda_eff(params: &SystemParams) -> Result<f64, ModelError> {
    params.validate()?;
    let g1 = params.g1;
    let g2 = params.g2;
    let scale = g1.abs().max(g2.abs()).max(1.0);
    if (g1 - g2).abs() > 1e-12 * scale || params.g2_phase != 0.0 {
        return Err(ModelError::UnequalCouplings { g1, g2 });
    }
    let delta = params.detuning_mhz();
    if delta == 0.0 {
        return Err(ModelError::ZeroDetuning);
    }
    Ok(g1 * g1 / delta)
}

/// λ = G²/δ in internal angular units (rad/ns).
pub fn lambda_eff_internal(params: &SystemParams) -> Result<f64, ModelError> {
    Ok(units::freq_internal(lambda_eff(params)?))
}

// ---------------------------------------------------------------------------
// Time-dependent operators
// ---------------------------------------------------------------------------

/// One term of a time-dependent operator: `scale · e^{i·rate·t} · matrix`.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    pub matrix: CMatrix,
    pub scale: C64,
    pub rate: f64,
}

/// Operator of the form Σ_k c_k e^{iν_k t} M_k with constant matrices M_k.
/// Physical Hamiltonians must evaluate to a hermitian matrix at every time;
/// this is enforced on a deterministic sample of times at construction.
#[derive(Debug, Clone)]
pub struct TimeDependentOperator {
    terms: Vec<OperatorTerm>,
    dim: usize,
}

impl TimeDependentOperator {
    pub fn constant(matrix: CMatrix) -> Result<Self, ModelError> {
        Self::new(vec![OperatorTerm {
            matrix,
            scale: c(1.0, 0.0),
            rate: 0.0,
        }])
    }

    pub fn new(terms: Vec<OperatorTerm>) -> Result<Self, ModelError> {
        if terms.is_empty() {
            return Err(ModelError::InvalidParameter(
                "a time-dependent operator needs at least one term".into(),
            ));
        }
        let dim = terms[0].matrix.nrows();
        for term in &terms {
            if term.matrix.nrows() != dim || term.matrix.ncols() != dim {
                return Err(ModelError::InvalidParameter(format!(
                    "all terms must be square {dim}x{dim} matrices"
                )));
            }
            if !term.rate.is_finite() || !term.scale.re.is_finite() || !term.scale.im.is_finite() {
                return Err(ModelError::InvalidParameter(
                    "term coefficients must be finite".into(),
                ));
            }
        }
        let op = Self { terms, dim };
        // Sample hermiticity over one period of the slowest nonzero rate
        // (or just t = 0 for constant operators), at irrational multiples so
        // no term can hide behind a commensurate phase.
        let max_rate = op
            .terms
            .iter()
            .map(|t| t.rate.abs())
            .fold(0.0_f64, f64::max);
        let span = if max_rate > 0.0 {
            std::f64::consts::TAU / max_rate
        } else {
            1.0
        };
        let golden = 0.618_033_988_749_894_9;
        for k in 0..8 {
            let t = span * ((k as f64) * golden % 1.0);
            let dev = hermiticity_deviation(&op.eval(t));
            if dev > 1e-10 {
                return Err(ModelError::NonHermitianSum { t, dev });
            }
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.rate == 0.0)
    }

    /// Evaluate Σ_k c_k e^{iν_k t} M_k.
    pub fn eval(&self, t: f64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let coeff = term.scale * C64::from_polar(1.0, term.rate * t);
            acc.zip_apply(&term.matrix, |a, m| *a += coeff * m);
        }
        acc
    }

    /// Time-independent upper bound on the spectral norm:
    /// Σ_k |c_k| · (max row sum of M_k).
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.scale.norm() * row_sum_norm(&t.matrix))
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Lindblad models
// ---------------------------------------------------------------------------

/// How a collapse operator enters the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipatorForm {
    /// (rate/2) · (2 L ρ L† − L†L ρ − ρ L†L).
    Standard,
    /// (rate/2) · (L ρ L† − ρ), the dephasing form for involutory L.
    DephasingAsWritten,
}

#[derive(Debug, Clone)]
pub struct CollapseTerm {
    /// Rate in inverse nanoseconds.
    pub rate: f64,
    pub operator: CMatrix,
    pub form: DissipatorForm,
}

/// A master-equation model: Hamiltonian plus a list of collapse terms.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: TimeDependentOperator,
    pub collapse: Vec<CollapseTerm>,
}

impl LindbladModel {
    pub fn new(
        hamiltonian: TimeDependentOperator,
        collapse: Vec<CollapseTerm>,
    ) -> Result<Self, ModelError> {
        let dim = hamiltonian.dim();
        for term in &collapse {
            if term.operator.nrows() != dim || term.operator.ncols() != dim {
                return Err(ModelError::InvalidParameter(format!(
                    "collapse operator is {}x{} but the Hamiltonian dimension is {dim}",
                    term.operator.nrows(),
                    term.operator.ncols()
                )));
            }
            if !term.rate.is_finite() || term.rate < 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "collapse rate must be finite and nonnegative, got {}",
                    term.rate
                )));
            }
        }
        Ok(Self {
            hamiltonian,
            collapse,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian builders. Tensor layout: factor 0 = ensemble 1, factor 1 =
// junction mode, factor 2 = ensemble 2.
// ---------------------------------------------------------------------------

/// Exchange interaction Σ_j (G_j a σ⁺_j + G_j* a† σ⁻_j) on the tri-partite
/// space, in internal angular units.
pub fn build_h_int(
    params: &SystemParams,
    layout: &HilbertLayout,
) -> Result<CMatrix, ModelError> {
    params.validate()?;
    expect_tri_partite(layout, params)?;
    let (a, _) = boson_ops(params.n_max)?;
    let a_full = layout.lift(&a, 1)?;
    let raise_1 = layout.lift(&sigma_plus(), 0)?;
    let raise_2 = layout.lift(&sigma_plus(), 2)?;
    let hop = &raise_1 * &a_full * params.g1_internal() + &raise_2 * &a_full * params.g2_internal();
    Ok(&hop + hop.adjoint())
}

/// Rotated-frame Hamiltonian Σ_j [Ω_j σx_j + G_j(σ⁺_j a e^{−iδt} + σ⁻_j a†
/// e^{iδt})] with Ω_j = ε·|G_j|/δ.
pub fn build_h_full_rotated(
    params: &SystemParams,
    layout: &HilbertLayout,
) -> Result<TimeDependentOperator, ModelError> {
    params.validate()?;
    expect_tri_partite(layout, params)?;
    let delta = params.detuning()?;
    let (a, _) = boson_ops(params.n_max)?;
    let a_full = layout.lift(&a, 1)?;
    let sx1 = layout.lift(&sigma_x(), 0)?;
    let sx2 = layout.lift(&sigma_x(), 2)?;
    let eps = params.epsilon_internal();
    let omega1 = eps * params.g1_internal().norm() / delta;
    let omega2 = eps * params.g2_internal().norm() / delta;
    let drive = sx1.scale(omega1) + sx2.scale(omega2);

    let raise_1 = layout.lift(&sigma_plus(), 0)?;
    let raise_2 = layout.lift(&sigma_plus(), 2)?;
    let hop = &raise_1 * &a_full * params.g1_internal() + &raise_2 * &a_full * params.g2_internal();
    let hop_dag = hop.adjoint();
    TimeDependentOperator::new(vec![
        OperatorTerm {
            matrix: drive,
            scale: c(1.0, 0.0),
            rate: 0.0,
        },
        OperatorTerm {
            matrix: hop,
            scale: c(1.0, 0.0),
            rate: -delta,
        },
        OperatorTerm {
            matrix: hop_dag,
            scale: c(1.0, 0.0),
            rate: delta,
        },
    ])
}

/// Strong-driving effective Hamiltonian Σ_j (G_j/2) σx_j (a e^{−iδt} +
/// a† e^{iδt}): the rotating-wave reduction of [`build_h_full_rotated`]
/// in the dressed σx basis, with the fast 2Ω oscillations dropped.
pub fn build_h_eff_drive(
    params: &SystemParams,
    layout: &HilbertLayout,
) -> Result<TimeDependentOperator, ModelError> {
    params.validate()?;
    expect_tri_partite(layout, params)?;
    let delta = params.detuning()?;
    let (a, _) = boson_ops(params.n_max)?;
    let a_full = layout.lift(&a, 1)?;
    let sx1 = layout.lift(&sigma_x(), 0)?;
    let sx2 = layout.lift(&sigma_x(), 2)?;
    let lower = &sx1 * &a_full * (params.g1_internal() * 0.5)
        + &sx2 * &a_full * (params.g2_internal() * 0.5);
    let lower_dag = lower.adjoint();
    TimeDependentOperator::new(vec![
        OperatorTerm {
            matrix: lower,
            scale: c(1.0, 0.0),
            rate: -delta,
        },
        OperatorTerm {
            matrix: lower_dag,
            scale: c(1.0, 0.0),
            rate: delta,
        },
    ])
}

/// Dispersive two-qubit Hamiltonian Σ_j (|G_j|²/δ)|1⟩_j⟨1| +
/// [(G₁G₂*/δ)σ⁺₁σ⁻₂ + h.c.] on the 4-dimensional ensemble space
/// {|00⟩, |01⟩, |10⟩, |11⟩}.
pub fn build_h_e(params: &SystemParams) -> Result<CMatrix, ModelError> {
    params.validate()?;
    let delta = params.detuning()?;
    let g1 = params.g1_internal();
    let g2 = params.g2_internal();
    let shift1 = g1.norm_sqr() / delta;
    let shift2 = g2.norm_sqr() / delta;
    let exchange = g1 * g2.conj() / delta;
    let mut h = qcore::zeros(4);
    h[(1, 1)] = c(shift2, 0.0); // |01⟩: ensemble 2 excited
    h[(2, 2)] = c(shift1, 0.0); // |10⟩: ensemble 1 excited
    h[(3, 3)] = c(shift1 + shift2, 0.0);
    h[(2, 1)] = exchange; // |10⟩⟨01|
    h[(1, 2)] = exchange.conj();
    Ok(h)
}

/// Conditional (trajectory) Hamiltonian: the dispersive Hamiltonian with the
/// non-hermitian decay term −i(Γ/2) Σ_j |1⟩_j⟨1| attached.
pub fn build_h_c(params: &SystemParams) -> Result<CMatrix, ModelError> {
    let mut h = build_h_e(params)?;
    let gamma = params.gamma_internal();
    let half = c(0.0, -0.5 * gamma);
    h[(1, 1)] += half;
    h[(2, 2)] += half;
    h[(3, 3)] += half * 2.0;
    Ok(h)
}

/// Which dissipative scenario to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipativeSetup {
    /// Driven two-qubit phase gate on the tri-partite space: effective
    /// drive Hamiltonian, junction photon loss, ensemble dephasing and
    /// relaxation.
    DrivenPhaseGate,
    /// Static swap gate on the two-qubit space: dispersive Hamiltonian with
    /// ensemble dephasing and relaxation only.
    StaticSwapGate,
}

/// Assemble the master-equation model for the requested setup. The layout
/// must be the tri-partite layout for the driven phase gate; the static swap
/// gate lives on the two-qubit space and ignores it.
pub fn build_lindblad(
    params: &SystemParams,
    setup: DissipativeSetup,
    layout: &HilbertLayout,
) -> Result<LindbladModel, ModelError> {
    params.validate()?;
    match setup {
        DissipativeSetup::DrivenPhaseGate => {
            let hamiltonian = build_h_eff_drive(params, layout)?;
            let (a, _) = boson_ops(params.n_max)?;
            let mut collapse = vec![CollapseTerm {
                rate: params.kappa_internal(),
                operator: layout.lift(&a, 1)?,
                form: DissipatorForm::Standard,
            }];
            for factor in [0usize, 2] {
                collapse.push(CollapseTerm {
                    rate: params.gamma1_internal(),
                    operator: layout.lift(&sigma_z(), factor)?,
                    form: DissipatorForm::DephasingAsWritten,
                });
                collapse.push(CollapseTerm {
                    rate: params.gamma2_internal(),
                    operator: layout.lift(&sigma_minus(), factor)?,
                    form: DissipatorForm::Standard,
                });
            }
            LindbladModel::new(hamiltonian, collapse)
        }
        DissipativeSetup::StaticSwapGate => {
            let hamiltonian = TimeDependentOperator::constant(build_h_e(params)?)?;
            let pair = HilbertLayout::new(vec![2, 2])?;
            let mut collapse = Vec::new();
            for factor in [0usize, 1] {
                collapse.push(CollapseTerm {
                    rate: params.gamma1_internal(),
                    operator: pair.lift(&sigma_z(), factor)?,
                    form: DissipatorForm::DephasingAsWritten,
                });
                collapse.push(CollapseTerm {
                    rate: params.gamma2_internal(),
                    operator: pair.lift(&sigma_minus(), factor)?,
                    form: DissipatorForm::Standard,
                });
            }
            LindbladModel::new(hamiltonian, collapse)
        }
    }
}

fn expect_tri_partite(layout: &HilbertLayout, params: &SystemParams) -> Result<(), ModelError> {
    let expected = [2, params.n_max + 1, 2];
    if layout.factor_dims() != expected {
        return Err(ModelError::InvalidParameter(format!(
            "layout {:?} does not match the tri-partite layout {:?}",
            layout.factor_dims(),
            expected
        )));
    }
    Ok(())
}
