//! Time-evolution engines: exact constant-Hamiltonian propagation,
//! closed-form and numeric conditional (non-hermitian) evolution, a
//! fixed-step RK4 Lindblad integrator with step-halving verification, and
//! the validation runs comparing effective models against full dynamics.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::{
    build_h_e, build_h_eff_drive, build_h_full_rotated, build_h_int, lambda_eff_internal,
    DissipatorForm, LindbladModel, ModelError, OperatorTerm, SystemParams, TimeDependentOperator,
};
use crate::qcore::{
    boson_ops, c, eigh, evolution_from_eigh, hermiticity_deviation, partial_trace, sigma_x,
    CMatrix, CVector, QcoreError,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("integration instability at t = {t} ns: norm {norm} exceeds {limit}")]
    Instability { t: f64, norm: f64, limit: f64 },
    #[error("trace deviated by {dev:.3e} at t = {t} ns (tolerance 1e-8)")]
    TraceDeviation { t: f64, dev: f64 },
    #[error(
        "step-halving check failed: final states differ by trace distance {distance:.3e} (tolerance {tol:.1e})"
    )]
    ConvergenceFailure { distance: f64, tol: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Maximum step size as a fraction of 1/‖H‖ for the automatic step rule.
pub const STEP_NORM_FRACTION: f64 = 0.05;

/// Fixed-step integration grid with sampled output.
///
/// The integrator takes `n_steps` equal steps from `t_start` to `t_end` and
/// records the state every `sample_stride` steps (the initial and final
/// instants are always recorded). The degenerate grid with
/// `t_end == t_start` is allowed and represents "no evolution".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub sample_stride: usize,
}

impl TimeGrid {
    pub fn new(
        t_start: f64,
        t_end: f64,
        n_steps: usize,
        sample_stride: usize,
    ) -> Result<Self, DynamicsError> {
        if !t_start.is_finite() || !t_end.is_finite() || t_end < t_start {
            return Err(DynamicsError::InvalidArgument(format!(
                "need finite t_end >= t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 || sample_stride == 0 {
            return Err(DynamicsError::InvalidArgument(
                "n_steps and sample_stride must be positive".into(),
            ));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
            sample_stride,
        })
    }

    /// Grid sized by the stability rule h ≤ 0.05/‖H‖ for a generator of the
    /// given norm bound, with at least `min_steps` steps.
    pub fn auto(
        t_start: f64,
        t_end: f64,
        norm_bound: f64,
        min_steps: usize,
        sample_stride: usize,
    ) -> Result<Self, DynamicsError> {
        if !norm_bound.is_finite() || norm_bound < 0.0 {
            return Err(DynamicsError::InvalidArgument(format!(
                "norm bound must be finite and nonnegative, got {norm_bound}"
            )));
        }
        let span = t_end - t_start;
        let needed = if span > 0.0 && norm_bound > 0.0 {
            (span * norm_bound / STEP_NORM_FRACTION).ceil() as usize
        } else {
            1
        };
        Self::new(
            t_start,
            t_end,
            needed.max(min_steps).max(1),
            sample_stride,
        )
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    /// Same span with twice the steps (and stride scaled to keep samples).
    pub fn halved(&self) -> Self {
        Self {
            t_start: self.t_start,
            t_end: self.t_end,
            n_steps: self.n_steps * 2,
            sample_stride: self.sample_stride.saturating_mul(2),
        }
    }

    /// Grid recording only the initial and final instants.
    pub fn final_only(&self) -> Self {
        Self {
            sample_stride: self.n_steps,
            ..*self
        }
    }

    fn is_sample(&self, step: usize) -> bool {
        step % self.sample_stride == 0 || step == self.n_steps
    }

    fn time_at(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t_end
        } else {
            self.t_start + self.step() * step as f64
        }
    }
}

/// Sampled trajectory: instants, states, and a per-sample scalar diagnostic
/// (ket norm, or trace for density matrices).
#[derive(Debug, Clone)]
pub struct EvolutionResult<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub norm_or_trace: Vec<f64>,
}

impl<S> EvolutionResult<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &S {
        self.states.last().expect("non-empty result")
    }
}

fn check_unit_ket(psi: &CVector) -> Result<(), DynamicsError> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(DynamicsError::InvalidState(format!(
            "ket norm is {norm}, expected 1 within 1e-8"
        )));
    }
    Ok(())
}

/// Exact propagation of a unit ket under a constant hermitian Hamiltonian
/// via one eigendecomposition: ψ(t) = V e^{−iΛ(t−t_start)} V† ψ₀.
pub fn propagate_constant(
    h: &CMatrix,
    psi0: &CVector,
    grid: &TimeGrid,
) -> Result<EvolutionResult<CVector>, DynamicsError> {
    if h.nrows() != psi0.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "Hamiltonian is {}x{} but the ket has length {}",
            h.nrows(),
            h.ncols(),
            psi0.len()
        )));
    }
    check_unit_ket(psi0)?;
    let (vals, vecs) = eigh(h, 1e-10)?;
    let weights = vecs.adjoint() * psi0;
    let mut result = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        norm_or_trace: Vec::new(),
    };
    for step in 0..=grid.n_steps {
        if !grid.is_sample(step) {
            continue;
        }
        let t = grid.time_at(step);
        let mut rotated = weights.clone();
        for (k, w) in rotated.iter_mut().enumerate() {
            *w *= C64::from_polar(1.0, -vals[k] * (t - grid.t_start));
        }
        let psi = &vecs * rotated;
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(DynamicsError::Instability {
                t,
                norm,
                limit: 1.0 + 1e-10,
            });
        }
        result.times.push(t);
        result.states.push(psi);
        result.norm_or_trace.push(norm);
    }
    Ok(result)
}

/// Closed-form no-decay amplitudes for the dispersive exchange starting from
/// |0⟩₁|1⟩₂: C1 multiplies the initial state, C2 the swapped one.
///
/// C1(t) = ½ e^{−Γt/2} (1 + e^{−i2λt}),  C2(t) = ½ e^{−Γt/2} (e^{−i2λt} − 1).
pub fn conditional_closed_form(
    params: &SystemParams,
    t: f64,
) -> Result<(C64, C64), DynamicsError> {
    if !(t >= 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    let lambda = lambda_eff_internal(params)?;
    let gamma = params.gamma_internal();
    let envelope = (-0.5 * gamma * t).exp();
    let phase = C64::from_polar(1.0, -2.0 * lambda * t);
    let one = c(1.0, 0.0);
    let c1 = 0.5 * envelope * (one + phase);
    let c2 = 0.5 * envelope * (phase - one);
    Ok((c1, c2))
}

fn rk4_ket_constant(m: &CMatrix, psi: &CVector, h: f64) -> CVector {
    // dψ/dt = −iMψ for a step-constant matrix M.
    let deriv = |v: &CVector| -> CVector { m * v * c(0.0, -1.0) };
    let k1 = deriv(psi);
    let k2 = deriv(&(psi + &k1 * c(0.5 * h, 0.0)));
    let k3 = deriv(&(psi + &k2 * c(0.5 * h, 0.0)));
    let k4 = deriv(&(psi + &k3 * c(h, 0.0)));
    psi + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
}

fn rk4_ket_timedep(op: &TimeDependentOperator, t: f64, h: f64, psi: &CVector) -> CVector {
    let m1 = op.eval(t);
    let m_mid = op.eval(t + 0.5 * h);
    let m4 = op.eval(t + h);
    let deriv = |m: &CMatrix, v: &CVector| -> CVector { m * v * c(0.0, -1.0) };
    let k1 = deriv(&m1, psi);
    let k2 = deriv(&m_mid, &(psi + &k1 * c(0.5 * h, 0.0)));
    let k3 = deriv(&m_mid, &(psi + &k2 * c(0.5 * h, 0.0)));
    let k4 = deriv(&m4, &(psi + &k3 * c(h, 0.0)));
    psi + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
}

/// RK4 propagation of dψ/dt = −iH_c ψ for a constant, possibly
/// non-hermitian H_c. States are deliberately left unnormalized; any sample
/// norm above the initial norm by more than 1e-6 aborts as instability.
pub fn propagate_conditional(
    hc: &CMatrix,
    psi0: &CVector,
    grid: &TimeGrid,
) -> Result<EvolutionResult<CVector>, DynamicsError> {
    if hc.nrows() != hc.ncols() || hc.nrows() != psi0.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "generator is {}x{} but the ket has length {}",
            hc.nrows(),
            hc.ncols(),
            psi0.len()
        )));
    }
    let limit = psi0.norm() * (1.0 + 1e-6);
    let h = grid.step();
    let mut psi = psi0.clone();
    let mut result = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        norm_or_trace: Vec::new(),
    };
    for step in 0..=grid.n_steps {
        if grid.is_sample(step) {
            let norm = psi.norm();
            let t = grid.time_at(step);
            if norm > limit {
                return Err(DynamicsError::Instability { t, norm, limit });
            }
            result.times.push(t);
            result.states.push(psi.clone());
            result.norm_or_trace.push(norm);
        }
        if step < grid.n_steps {
            psi = rk4_ket_constant(hc, &psi, h);
        }
    }
    Ok(result)
}

/// RK4 propagation of a ket under a time-dependent hermitian Hamiltonian,
/// with the sub-stage times evaluated exactly.
pub fn propagate_schrodinger(
    op: &TimeDependentOperator,
    psi0: &CVector,
    grid: &TimeGrid,
) -> Result<EvolutionResult<CVector>, DynamicsError> {
    if op.dim() != psi0.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "operator dimension {} does not match ket length {}",
            op.dim(),
            psi0.len()
        )));
    }
    check_unit_ket(psi0)?;
    let h = grid.step();
    let mut psi = psi0.clone();
    let mut result = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        norm_or_trace: Vec::new(),
    };
    for step in 0..=grid.n_steps {
        if grid.is_sample(step) {
            let norm = psi.norm();
            let t = grid.time_at(step);
            if (norm - 1.0).abs() > 1e-6 {
                return Err(DynamicsError::Instability {
                    t,
                    norm,
                    limit: 1.0 + 1e-6,
                });
            }
            result.times.push(t);
            result.states.push(psi.clone());
            result.norm_or_trace.push(norm);
        }
        if step < grid.n_steps {
            psi = rk4_ket_timedep(op, grid.time_at(step), h, &psi);
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Lindblad master equation
// ---------------------------------------------------------------------------

struct Triplets {
    entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    fn from_matrix(m: &CMatrix, scale: C64) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != c(0.0, 0.0) {
                    entries.push((i, j, v * scale));
                }
            }
        }
        Self { entries }
    }

    /// out += (A ρ A†) using B = Aρ as scratch.
    fn sandwich_add(&self, rho: &CMatrix, scratch: &mut CMatrix, out: &mut CMatrix) {
        let dim = rho.nrows();
        scratch.fill(c(0.0, 0.0));
        for &(i, j, v) in &self.entries {
            for k in 0..dim {
                scratch[(i, k)] += v * rho[(j, k)];
            }
        }
        // out[:, i'] += conj(v') · B[:, j']
        for &(ip, jp, v) in &self.entries {
            let vc = v.conj();
            for k in 0..dim {
                out[(k, ip)] += vc * scratch[(k, jp)];
            }
        }
    }
}

/// Precomputed right-hand side of dρ/dt = K(t)ρ + (K(t)ρ)† + Σ_k A_kρA_k†
/// with K(t) = −iH(t) − ½Σ(standard) rate·L†L − Σ(dephasing) (rate/4)·I.
/// The rewrite assumes hermitian ρ, which the integrator maintains by
/// construction (symmetrization after every step).
struct MasterRhs {
    dim: usize,
    /// Constant (time-independent) part of K, dense.
    k_const: CMatrix,
    /// Hamiltonian terms as triplets with the −i·scale factor folded in.
    h_parts: Vec<(Triplets, f64)>,
    /// Collapse operators scaled by √rate (standard) or √(rate/2) (dephasing).
    sandwiches: Vec<Triplets>,
    k_buf: CMatrix,
    b_buf: CMatrix,
    m_buf: CMatrix,
    h_constant: bool,
}

impl MasterRhs {
    fn new(model: &LindbladModel) -> Self {
        let dim = model.dim();
        let mut k_const = CMatrix::zeros(dim, dim);
        let mut sandwiches = Vec::new();
        for term in &model.collapse {
            match term.form {
                DissipatorForm::Standard => {
                    let l = &term.operator;
                    k_const += (l.adjoint() * l).scale(-0.5 * term.rate);
                    sandwiches.push(Triplets::from_matrix(l, c(term.rate.sqrt(), 0.0)));
                }
                DissipatorForm::DephasingAsWritten => {
                    for i in 0..dim {
                        k_const[(i, i)] += c(-0.25 * term.rate, 0.0);
                    }
                    sandwiches.push(Triplets::from_matrix(
                        &term.operator,
                        c((0.5 * term.rate).sqrt(), 0.0),
                    ));
                }
            }
        }
        let mut h_parts = Vec::new();
        let h_constant = model.hamiltonian.is_constant();
        if h_constant {
            // Fold the full constant Hamiltonian into K directly.
            let h0 = model.hamiltonian.eval(0.0);
            k_const.zip_apply(&h0, |k, h| *k += c(0.0, -1.0) * h);
        } else {
            for term in model.hamiltonian.terms() {
                h_parts.push((
                    Triplets::from_matrix(&term.matrix, term.scale * c(0.0, -1.0)),
                    term.rate,
                ));
            }
        }
        Self {
            dim,
            k_const,
            h_parts,
            sandwiches,
            k_buf: CMatrix::zeros(dim, dim),
            b_buf: CMatrix::zeros(dim, dim),
            m_buf: CMatrix::zeros(dim, dim),
            h_constant,
        }
    }

    /// Writes dρ/dt into `out`.
    fn eval(&mut self, t: f64, rho: &CMatrix, out: &mut CMatrix) {
        let k = if self.h_constant {
            &self.k_const
        } else {
            self.k_buf.copy_from(&self.k_const);
            for (triplets, rate) in &self.h_parts {
                let phase = C64::from_polar(1.0, rate * t);
                for &(i, j, v) in &triplets.entries {
                    self.k_buf[(i, j)] += v * phase;
                }
            }
            &self.k_buf
        };
        self.m_buf.gemm(c(1.0, 0.0), k, rho, c(0.0, 0.0));
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self.m_buf[(i, j)] + self.m_buf[(j, i)].conj();
            }
        }
        for s in &self.sandwiches {
            s.sandwich_add(rho, &mut self.b_buf, out);
        }
    }
}

fn check_density_matrix(rho: &CMatrix) -> Result<(), DynamicsError> {
    if rho.nrows() != rho.ncols() {
        return Err(DynamicsError::InvalidState("state must be square".into()));
    }
    let herm = hermiticity_deviation(rho);
    if herm > 1e-8 {
        return Err(DynamicsError::InvalidState(format!(
            "state is not hermitian (deviation {herm:.3e})"
        )));
    }
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-10 {
        return Err(DynamicsError::InvalidState(format!(
            "state trace is {trace}, expected 1"
        )));
    }
    let (vals, _) = eigh(rho, 1e-8)?;
    if let Some(min) = vals.first() {
        if *min < -1e-10 {
            return Err(DynamicsError::InvalidState(format!(
                "state has negative eigenvalue {min:.3e}"
            )));
        }
    }
    Ok(())
}

/// Single-pass fixed-step RK4 integration of the master equation, without
/// the step-halving verification. Hermiticity is restored by symmetrization
/// after every step and the trace is checked against 1e-8 at every step.
pub fn solve_master_raw(
    model: &LindbladModel,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<EvolutionResult<CMatrix>, DynamicsError> {
    if rho0.nrows() != model.dim() {
        return Err(DynamicsError::InvalidArgument(format!(
            "state dimension {} does not match model dimension {}",
            rho0.nrows(),
            model.dim()
        )));
    }
    check_density_matrix(rho0)?;
    let mut rhs = MasterRhs::new(model);
    let dim = model.dim();
    let h = grid.step();
    let mut rho = rho0.clone();
    let mut k1 = CMatrix::zeros(dim, dim);
    let mut k2 = CMatrix::zeros(dim, dim);
    let mut k3 = CMatrix::zeros(dim, dim);
    let mut k4 = CMatrix::zeros(dim, dim);
    let mut stage = CMatrix::zeros(dim, dim);
    let mut result = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        norm_or_trace: Vec::new(),
    };
    for step in 0..=grid.n_steps {
        let t = grid.time_at(step);
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > 1e-8 {
            return Err(DynamicsError::TraceDeviation {
                t,
                dev: (trace - 1.0).abs(),
            });
        }
        if grid.is_sample(step) {
            result.times.push(t);
            result.states.push(rho.clone());
            result.norm_or_trace.push(trace);
        }
        if step == grid.n_steps {
            break;
        }
        rhs.eval(t, &rho, &mut k1);
        stage.copy_from(&rho);
        stage.zip_apply(&k1, |s, k| *s += c(0.5 * h, 0.0) * k);
        rhs.eval(t + 0.5 * h, &stage, &mut k2);
        stage.copy_from(&rho);
        stage.zip_apply(&k2, |s, k| *s += c(0.5 * h, 0.0) * k);
        rhs.eval(t + 0.5 * h, &stage, &mut k3);
        stage.copy_from(&rho);
        stage.zip_apply(&k3, |s, k| *s += c(h, 0.0) * k);
        rhs.eval(t + h, &stage, &mut k4);
        for i in 0..dim {
            for j in 0..dim {
                rho[(i, j)] += (h / 6.0)
                    * (k1[(i, j)] + 2.0 * k2[(i, j)] + 2.0 * k3[(i, j)] + k4[(i, j)]);
            }
        }
        // Symmetrize to keep ρ exactly hermitian against roundoff drift.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
                rho[(i, j)] = avg;
                rho[(j, i)] = avg.conj();
            }
            rho[(i, i)] = c(rho[(i, i)].re, 0.0);
        }
    }
    Ok(result)
}

/// Trace distance ½‖a − b‖₁ between hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64, DynamicsError> {
    let mut diff = a - b;
    let sym = (&diff + diff.adjoint()).scale(0.5);
    diff = sym;
    let (vals, _) = eigh(&diff, 1e-6)?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Integrates the master equation and verifies the result by re-running at
/// half the step: the final states must agree to 1e-6 in trace distance.
/// Returns the trajectory and the observed step-halving distance.
pub fn solve_master_checked(
    model: &LindbladModel,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<(EvolutionResult<CMatrix>, f64), DynamicsError> {
    let result = solve_master_raw(model, rho0, grid)?;
    let fine = solve_master_raw(model, rho0, &grid.halved().final_only())?;
    let distance = trace_distance(result.final_state(), fine.final_state())?;
    if distance > 1e-6 {
        return Err(DynamicsError::ConvergenceFailure {
            distance,
            tol: 1e-6,
        });
    }
    Ok((result, distance))
}

/// Integrates the master equation with the mandatory step-halving check.
pub fn solve_master(
    model: &LindbladModel,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<EvolutionResult<CMatrix>, DynamicsError> {
    Ok(solve_master_checked(model, rho0, grid)?.0)
}

// ---------------------------------------------------------------------------
// Validation runs
// ---------------------------------------------------------------------------

/// One point of the strong-driving validation sweep.
#[derive(Debug, Clone)]
pub struct DrivingPoint {
    /// Requested ratio Ω / max(δ, G).
    pub ratio: f64,
    /// Drive amplitude realizing the ratio (MHz).
    pub epsilon_mhz: f64,
    /// Realized Rabi frequency Ω (MHz).
    pub omega_mhz: f64,
    /// Integration steps used for this point.
    pub n_steps: usize,
    /// 1 − |⟨ψ_full|ψ_reduced⟩|² at the final instant.
    pub infidelity: f64,
}

#[derive(Debug, Clone)]
pub struct StrongDrivingReport {
    pub duration_ns: f64,
    pub points: Vec<DrivingPoint>,
}

/// Propagates one photon (state |0⟩₁|1⟩_L|0⟩₂) under the full rotated-frame
/// Hamiltonian and under its rotating-wave reduction (the effective σx
/// coupling plus the free drive term), and reports the final-state
/// infidelity for each requested drive ratio Ω/max(δ, G).
pub fn validate_strong_driving(
    params: &SystemParams,
    grid: &TimeGrid,
    ratios: &[f64],
) -> Result<StrongDrivingReport, DynamicsError> {
    params.validate()?;
    params.detuning()?;
    let layout = params.layout()?;
    let psi0 = layout.basis_ket(&[0, 1, 0])?;
    let g_min_mhz = params.g1.min(params.g2);
    let scale_mhz = params
        .detuning_mhz()
        .abs()
        .max(params.g1)
        .max(params.g2);
    let mut points = Vec::new();
    for &ratio in ratios {
        if !(ratio > 0.0) {
            return Err(DynamicsError::InvalidArgument(format!(
                "drive ratio must be positive, got {ratio}"
            )));
        }
        // Ω_j = ε·G_j/δ; size ε so the smaller Ω meets the requested ratio.
        let epsilon_mhz = if g_min_mhz > 0.0 {
            ratio * scale_mhz * params.detuning_mhz().abs() / g_min_mhz
        } else {
            0.0
        };
        let driven = SystemParams {
            epsilon: epsilon_mhz,
            ..params.clone()
        };
        let full = build_h_full_rotated(&driven, &layout)?;
        let reduced = reduced_driving_operator(&driven, &layout)?;
        // Refine the caller's grid to satisfy the stability rule for the
        // stiffer of the two generators.
        let bound = full.norm_bound().max(reduced.norm_bound());
        let run_grid = TimeGrid::auto(
            grid.t_start,
            grid.t_end,
            bound,
            grid.n_steps,
            usize::MAX,
        )?;
        let psi_full = propagate_schrodinger(&full, &psi0, &run_grid)?;
        let psi_red = propagate_schrodinger(&reduced, &psi0, &run_grid)?;
        let overlap = psi_full
            .final_state()
            .dotc(psi_red.final_state())
            .norm_sqr();
        let omega_mhz = if params.detuning_mhz() != 0.0 {
            epsilon_mhz * g_min_mhz / params.detuning_mhz().abs()
        } else {
            0.0
        };
        points.push(DrivingPoint {
            ratio,
            epsilon_mhz,
            omega_mhz,
            n_steps: run_grid.n_steps,
            infidelity: (1.0 - overlap).max(0.0),
        });
    }
    Ok(StrongDrivingReport {
        duration_ns: grid.t_end - grid.t_start,
        points,
    })
}

/// The rotating-wave reduction of the rotated-frame model: the effective
/// σx-coupling Hamiltonian plus the free drive term Σ_j Ω_j σx_j.
fn reduced_driving_operator(
    params: &SystemParams,
    layout: &crate::qcore::HilbertLayout,
) -> Result<TimeDependentOperator, DynamicsError> {
    let delta = params.detuning()?;
    let eps = params.epsilon_internal();
    let omega1 = eps * params.g1_internal().norm() / delta;
    let omega2 = eps * params.g2_internal().norm() / delta;
    let drive = layout.lift(&sigma_x(), 0)?.scale(omega1)
        + layout.lift(&sigma_x(), 2)?.scale(omega2);
    let mut terms = build_h_eff_drive(params, layout)?.terms().to_vec();
    terms.push(OperatorTerm {
        matrix: drive,
        scale: c(1.0, 0.0),
        rate: 0.0,
    });
    Ok(TimeDependentOperator::new(terms)?)
}

/// One point of the dispersive validation sweep.
#[derive(Debug, Clone)]
pub struct DispersivePoint {
    /// Detuning-to-coupling ratio δ/G.
    pub ratio: f64,
    /// Coupling realizing the ratio (MHz).
    pub g_mhz: f64,
    /// Effective exchange rate λ = G²/δ (MHz).
    pub lambda_mhz: f64,
    /// One swap period π/(2λ) (ns).
    pub period_ns: f64,
    /// Minimum reduced-state fidelity over the period.
    pub min_fidelity: f64,
    /// 1 − min_fidelity.
    pub max_infidelity: f64,
    /// Maximum probability of any junction excitation over the period.
    pub max_junction_population: f64,
}

#[derive(Debug, Clone)]
pub struct DispersiveReport {
    pub samples_per_period: usize,
    pub points: Vec<DispersivePoint>,
}

/// Compares full tri-partite evolution under δ a†a + H_int against the
/// effective two-qubit exchange dynamics over one swap period, starting
/// from |0⟩₁|0⟩_L|1⟩₂, for each requested δ/G ratio.
pub fn validate_dispersive(
    params: &SystemParams,
    ratios: &[f64],
    samples_per_period: usize,
) -> Result<DispersiveReport, DynamicsError> {
    params.validate()?;
    let delta = params.detuning()?;
    if samples_per_period < 2 {
        return Err(DynamicsError::InvalidArgument(
            "need at least 2 samples per period".into(),
        ));
    }
    let mut points = Vec::new();
    for &ratio in ratios {
        if !(ratio > 0.0) {
            return Err(DynamicsError::InvalidArgument(format!(
                "detuning ratio must be positive, got {ratio}"
            )));
        }
        let tuned = SystemParams {
            g1: params.detuning_mhz().abs() / ratio,
            g2: params.detuning_mhz().abs() / ratio,
            g2_phase: 0.0,
            ..params.clone()
        };
        let layout = tuned.layout()?;
        let (a, adag) = boson_ops(tuned.n_max)?;
        let number = layout.lift(&(&adag * &a), 1)?;
        let h_full = number.scale(delta) + build_h_int(&tuned, &layout)?;
        let lambda = lambda_eff_internal(&tuned)?;
        let period = std::f64::consts::PI / (2.0 * lambda.abs());
        let grid = TimeGrid::new(0.0, period, samples_per_period - 1, 1)?;
        let psi0 = layout.basis_ket(&[0, 0, 1])?;
        let full = propagate_constant(&h_full, &psi0, &grid)?;

        // Effective evolution generated by the second-order expansion; its
        // sign is opposite to the level-shift form, so exp(+i H_e t).
        let h_e = build_h_e(&tuned)?;
        let (vals, vecs) = eigh(&h_e, 1e-12)?;
        let mut psi_eff0 = CVector::zeros(4);
        psi_eff0[1] = c(1.0, 0.0); // |01⟩: ensemble 2 excited

        let mut min_fidelity = f64::INFINITY;
        let mut max_pop = 0.0_f64;
        for (idx, t) in full.times.iter().enumerate() {
            let u_back = evolution_from_eigh(&vals, &vecs, -*t);
            let psi_eff = &u_back * &psi_eff0;
            let psi_t = &full.states[idx];
            let rho_full = psi_t * psi_t.adjoint();
            let rho_red = partial_trace(&rho_full, &layout, &[0, 2])?;
            let overlap = (psi_eff.adjoint() * &rho_red * &psi_eff)[(0, 0)].re;
            let fidelity = overlap.max(0.0).sqrt();
            min_fidelity = min_fidelity.min(fidelity);
            let rho_junction = partial_trace(&rho_full, &layout, &[1])?;
            max_pop = max_pop.max(1.0 - rho_junction[(0, 0)].re);
        }
        points.push(DispersivePoint {
            ratio,
            g_mhz: tuned.g1,
            lambda_mhz: crate::model::lambda_eff(&tuned)?,
            period_ns: period,
            min_fidelity,
            max_infidelity: 1.0 - min_fidelity,
            max_junction_population: max_pop,
        });
    }
    Ok(DispersiveReport {
        samples_per_period,
        points,
    })
}
