//! Entanglement and gate-quality measures: two-qubit concurrence (pure and
//! mixed), global-phase-invariant unitary fidelity, channel reconstruction
//! from master-equation runs, and Haar-average gate fidelity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dynamics::{solve_master, DynamicsError, TimeGrid};
use crate::model::LindbladModel;
use crate::qcore::{
    c, eigh, hermiticity_deviation, kron, partial_trace, row_sum_norm, sigma_y, unvec_density,
    vec_density, CMatrix, CVector, HilbertLayout, QcoreError,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("channel is not trace preserving (max row deviation {dev:.3e})")]
    NotTracePreserving { dev: f64 },
    #[error("channel does not preserve hermiticity (deviation {dev:.3e})")]
    NotHermiticityPreserving { dev: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

fn spin_flip_matrix() -> CMatrix {
    kron(&sigma_y(), &sigma_y())
}

fn check_density(rho: &CMatrix) -> Result<Vec<f64>, MetricsError> {
    if rho.nrows() != rho.ncols() {
        return Err(MetricsError::InvalidDensityMatrix(
            "matrix is not square".into(),
        ));
    }
    let dev = hermiticity_deviation(rho);
    if dev > 1e-8 {
        return Err(MetricsError::InvalidDensityMatrix(format!(
            "not hermitian (deviation {dev:.3e})"
        )));
    }
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-10 {
        return Err(MetricsError::InvalidDensityMatrix(format!(
            "trace is {trace}, expected 1"
        )));
    }
    let (vals, _) = eigh(rho, 1e-8)?;
    if vals.first().copied().unwrap_or(0.0) < -1e-7 {
        return Err(MetricsError::InvalidDensityMatrix(format!(
            "negative eigenvalue {:.3e}",
            vals[0]
        )));
    }
    Ok(vals)
}

/// Two-qubit pure-state concurrence C = |⟨ψ*|σy⊗σy|ψ⟩|. With
/// `allow_unnormalized` the raw vector is used (no renormalization), which
/// is how decaying conditional trajectories reproduce their envelope.
pub fn concurrence_pure(psi: &CVector, allow_unnormalized: bool) -> Result<f64, MetricsError> {
    if psi.len() != 4 {
        return Err(MetricsError::InvalidArgument(format!(
            "expected a two-qubit ket of length 4, got {}",
            psi.len()
        )));
    }
    if !allow_unnormalized {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(MetricsError::InvalidArgument(format!(
                "ket norm is {norm}; pass allow_unnormalized for raw vectors"
            )));
        }
    }
    let flip = spin_flip_matrix();
    let mut overlap = c(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            overlap += psi[i] * flip[(i, j)] * psi[j];
        }
    }
    Ok(overlap.norm())
}

fn sqrtm_psd(rho: &CMatrix) -> Result<CMatrix, MetricsError> {
    let (vals, vecs) = eigh(rho, 1e-8)?;
    let dim = rho.nrows();
    // Relative clamp: eigenvalues at roundoff level are exact zeros of the
    // physical state; letting them through would inject √ε ≈ 1e-8 noise.
    let cutoff = 1e-13 * vals.last().copied().unwrap_or(0.0).max(0.0);
    let mut scaled = vecs.clone();
    for (k, v) in vals.iter().enumerate() {
        let root = if *v > cutoff { v.sqrt() } else { 0.0 };
        for i in 0..dim {
            scaled[(i, k)] *= c(root, 0.0);
        }
    }
    Ok(&scaled * vecs.adjoint())
}

/// Two-qubit mixed-state concurrence
/// C = max(0, √μ₁ − √μ₂ − √μ₃ − √μ₄), with μᵢ the descending eigenvalues of
/// ρ·ρ̃ and ρ̃ = (σy⊗σy)ρ*(σy⊗σy). The √μᵢ are computed directly as the
/// singular values of B = √ρ̃·√ρ (B†B = √ρ·ρ̃·√ρ shares the μᵢ), which keeps
/// vanishing μᵢ at roundoff level instead of √-amplifying them.
pub fn concurrence_mixed(rho: &CMatrix) -> Result<f64, MetricsError> {
    if rho.nrows() != 4 {
        return Err(MetricsError::InvalidDensityMatrix(format!(
            "expected a 4x4 two-qubit state, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    check_density(rho)?;
    let flip = spin_flip_matrix();
    let rho_tilde = &flip * rho.conjugate() * &flip;
    let b = sqrtm_psd(&rho_tilde)? * sqrtm_psd(rho)?;
    let mut mu_roots: Vec<f64> = b.svd(false, false).singular_values.iter().copied().collect();
    mu_roots.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    Ok((mu_roots[0] - mu_roots[1] - mu_roots[2] - mu_roots[3]).max(0.0))
}

/// Global-phase-invariant unitary overlap |tr(U†V)|/d.
pub fn phase_invariant_fidelity(u: &CMatrix, v: &CMatrix) -> Result<f64, MetricsError> {
    if u.nrows() != u.ncols() || u.shape() != v.shape() {
        return Err(MetricsError::InvalidArgument(format!(
            "dimension mismatch: {:?} vs {:?}",
            u.shape(),
            v.shape()
        )));
    }
    let d = u.nrows() as f64;
    Ok((u.adjoint() * v).trace().norm() / d)
}

/// Superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    dim: usize,
    superoperator: CMatrix,
}

impl ChannelMatrix {
    /// Validates trace preservation (the tr(·) row) and hermiticity
    /// preservation on a seeded random test state before accepting.
    pub fn new(dim: usize, superoperator: CMatrix) -> Result<Self, MetricsError> {
        if superoperator.nrows() != dim * dim || superoperator.ncols() != dim * dim {
            return Err(MetricsError::InvalidArgument(format!(
                "superoperator must be {0}x{0} for dimension {dim}",
                dim * dim
            )));
        }
        // tr(E(ρ)) = Σ_i vec(E(ρ))[i·d+i]; preservation means the summed
        // diagonal rows reproduce the vectorized-trace functional.
        let mut max_dev = 0.0_f64;
        for col in 0..dim * dim {
            let mut sum = c(0.0, 0.0);
            for i in 0..dim {
                sum += superoperator[(i * dim + i, col)];
            }
            let expected = if col % (dim + 1) == 0 { 1.0 } else { 0.0 };
            max_dev = max_dev.max((sum - c(expected, 0.0)).norm());
        }
        if max_dev > 1e-8 {
            return Err(MetricsError::NotTracePreserving { dev: max_dev });
        }
        let channel = Self {
            dim,
            superoperator,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5350494e); // fixed spot-check seed
        let probe = random_density(dim, &mut rng);
        let image = channel.apply(&probe)?;
        let dev = hermiticity_deviation(&image);
        if dev > 1e-8 {
            return Err(MetricsError::NotHermiticityPreserving { dev });
        }
        Ok(channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superoperator
    }

    /// Apply the channel to a density matrix.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix, MetricsError> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(MetricsError::InvalidArgument(format!(
                "state is {}x{} but the channel dimension is {}",
                rho.nrows(),
                rho.ncols(),
                self.dim
            )));
        }
        let out = &self.superoperator * vec_density(rho);
        Ok(unvec_density(&out, self.dim)?)
    }
}

fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let raw = CMatrix::from_fn(dim, dim, |_, _| {
        c(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        )
    });
    let psd = &raw * raw.adjoint();
    let trace = psd.trace().re;
    psd.scale(1.0 / trace)
}

/// Channel of exact conjugation by a unitary: vec(UρU†) = (U* ⊗ U)vec(ρ).
pub fn unitary_channel(u: &CMatrix) -> Result<ChannelMatrix, MetricsError> {
    if u.nrows() != u.ncols() {
        return Err(MetricsError::InvalidArgument(
            "unitary must be square".into(),
        ));
    }
    let unitarity = row_sum_norm(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.nrows())));
    if unitarity > 1e-8 {
        return Err(MetricsError::InvalidArgument(format!(
            "matrix is not unitary (deviation {unitarity:.3e})"
        )));
    }
    ChannelMatrix::new(u.nrows(), kron(&u.conjugate(), u))
}

/// Reconstructs the superoperator of evolution under `model` for `duration`
/// by propagating a hermitian decomposition of every matrix unit E_ij and
/// recombining by linearity (E(E_ji) = E(E_ij)† for these channels).
///
/// With `reduce_to_two_qubit` set, the inputs are two-qubit units embedded
/// alongside the junction vacuum in the given tri-partite layout, and every
/// output is partial-traced back to the two ensembles, yielding the 16×16
/// two-qubit channel.
pub fn channel_from_simulation(
    model: &LindbladModel,
    duration_ns: f64,
    layout: &HilbertLayout,
    reduce_to_two_qubit: bool,
) -> Result<ChannelMatrix, MetricsError> {
    let mut samples = channel_trajectory_from_simulation(model, duration_ns, 1, layout, reduce_to_two_qubit)?;
    Ok(samples.pop().expect("trajectory is never empty").1)
}

/// Integration grid used by the channel reconstruction: the step count is set
/// by the stability bound of the generator (Hamiltonian norm plus dissipator
/// strength), then rounded up to a multiple of `n_segments` so the sampling
/// stride lands exactly on the instants j·duration/n_segments.
pub fn simulation_grid(
    model: &LindbladModel,
    duration_ns: f64,
    n_segments: usize,
) -> Result<TimeGrid, MetricsError> {
    if n_segments == 0 {
        return Err(MetricsError::InvalidArgument(
            "n_segments must be positive".into(),
        ));
    }
    let mut bound = model.hamiltonian.norm_bound();
    for term in &model.collapse {
        let s = row_sum_norm(&term.operator);
        bound += term.rate * s * s;
    }
    let base = TimeGrid::auto(0.0, duration_ns, bound, 50, usize::MAX)?;
    let n_steps = base.n_steps.div_ceil(n_segments) * n_segments;
    Ok(TimeGrid::new(0.0, duration_ns, n_steps, n_steps / n_segments)?)
}

/// Time-resolved variant of [`channel_from_simulation`]: one tomography pass
/// over [0, duration], with the channel assembled at the `n_segments + 1`
/// uniformly spaced instants j·duration/n_segments (j = 0..=n_segments).
pub fn channel_trajectory_from_simulation(
    model: &LindbladModel,
    duration_ns: f64,
    n_segments: usize,
    layout: &HilbertLayout,
    reduce_to_two_qubit: bool,
) -> Result<Vec<(f64, ChannelMatrix)>, MetricsError> {
    if !(duration_ns >= 0.0) {
        return Err(MetricsError::InvalidArgument(format!(
            "duration must be nonnegative, got {duration_ns}"
        )));
    }
    if n_segments == 0 {
        return Err(MetricsError::InvalidArgument(
            "n_segments must be positive".into(),
        ));
    }
    let full_dim = model.dim();
    let dim = if reduce_to_two_qubit { 4 } else { full_dim };
    if reduce_to_two_qubit {
        let dims = layout.factor_dims();
        if dims.len() != 3 || dims[0] != 2 || dims[2] != 2 || layout.total_dim() != full_dim {
            return Err(MetricsError::InvalidArgument(format!(
                "reduction needs a qubit-junction-qubit layout matching the model, got {dims:?}"
            )));
        }
    } else if full_dim != layout.total_dim() {
        return Err(MetricsError::InvalidArgument(format!(
            "layout dimension {} does not match the model dimension {full_dim}",
            layout.total_dim()
        )));
    }

    // Basis kets of the channel input space, embedded in the model space.
    let embed = |index: usize| -> Result<CVector, MetricsError> {
        if reduce_to_two_qubit {
            Ok(layout.basis_ket(&[index / 2, 0, index % 2])?)
        } else {
            let mut v = CVector::zeros(full_dim);
            v[index] = c(1.0, 0.0);
            Ok(v)
        }
    };

    let grid = simulation_grid(model, duration_ns, n_segments)?;
    let n_samples = n_segments + 1;

    let evolve_ket = |ket: &CVector| -> Result<Vec<CMatrix>, MetricsError> {
        let rho0 = ket * ket.adjoint();
        let res = solve_master(model, &rho0, &grid)?;
        if res.len() != n_samples {
            return Err(MetricsError::InvalidArgument(format!(
                "expected {n_samples} trajectory samples, got {}",
                res.len()
            )));
        }
        res.states
            .iter()
            .map(|state| {
                if reduce_to_two_qubit {
                    Ok(partial_trace(state, layout, &[0, 2])?)
                } else {
                    Ok(state.clone())
                }
            })
            .collect()
    };

    // Diagonal units are density matrices already; each off-diagonal pair
    // {i<j} needs the two auxiliary pure states x = (i+j)/√2, y = (i+ij)/√2.
    let mut diag_out: Vec<Vec<CMatrix>> = Vec::with_capacity(dim);
    for i in 0..dim {
        diag_out.push(evolve_ket(&embed(i)?)?);
    }
    let mut superops = vec![CMatrix::zeros(dim * dim, dim * dim); n_samples];
    let set_column = |s: &mut CMatrix, i: usize, j: usize, image: &CMatrix| {
        let col = j * dim + i;
        let v = vec_density(image);
        for (r, value) in v.iter().enumerate() {
            s[(r, col)] = *value;
        }
    };
    for i in 0..dim {
        for (k, s) in superops.iter_mut().enumerate() {
            set_column(s, i, i, &diag_out[i][k]);
        }
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let e_i = embed(i)?;
            let e_j = embed(j)?;
            let x = (&e_i + &e_j) * c(inv_sqrt2, 0.0);
            let y = (&e_i + &e_j * c(0.0, 1.0)) * c(inv_sqrt2, 0.0);
            let out_x = evolve_ket(&x)?;
            let out_y = evolve_ket(&y)?;
            for (k, s) in superops.iter_mut().enumerate() {
                // E(E_ij) = E(xx†) + iE(yy†) − (1+i)/2 (E(E_ii) + E(E_jj))
                let mut image = out_x[k].clone();
                image.zip_apply(&out_y[k], |acc, v| *acc += c(0.0, 1.0) * v);
                let half = c(0.5, 0.5);
                image.zip_apply(&diag_out[i][k], |acc, v| *acc -= half * v);
                image.zip_apply(&diag_out[j][k], |acc, v| *acc -= half * v);
                set_column(s, i, j, &image);
                let image_dag = image.adjoint();
                set_column(s, j, i, &image_dag);
            }
        }
    }
    let sample_times: Vec<f64> = (0..n_samples)
        .map(|k| duration_ns * k as f64 / n_segments as f64)
        .collect();
    sample_times
        .into_iter()
        .zip(superops)
        .map(|(t, s)| Ok((t, ChannelMatrix::new(dim, s)?)))
        .collect()
}

/// Haar-average gate fidelity via the process-fidelity identity
/// F_avg = (d·F_pro + 1)/(d + 1), F_pro = tr(S_ideal† S)/d².
pub fn average_gate_fidelity(
    channel: &ChannelMatrix,
    u_ideal: &CMatrix,
) -> Result<f64, MetricsError> {
    if u_ideal.nrows() != channel.dim() || u_ideal.ncols() != channel.dim() {
        return Err(MetricsError::InvalidArgument(format!(
            "ideal unitary is {}x{} but the channel dimension is {}",
            u_ideal.nrows(),
            u_ideal.ncols(),
            channel.dim()
        )));
    }
    let ideal = unitary_channel(u_ideal)?;
    let d = channel.dim() as f64;
    let overlap = ideal
        .superoperator()
        .dotc(channel.superoperator());
    let f_pro = overlap.re / (d * d);
    Ok((d * f_pro + 1.0) / (d + 1.0))
}

/// Monte-Carlo estimate of the average gate fidelity with its standard
/// error: mean of ⟨ψ|U† E(|ψ⟩⟨ψ|) U|ψ⟩ over Haar-random kets drawn from a
/// seeded generator.
pub fn average_gate_fidelity_monte_carlo(
    channel: &ChannelMatrix,
    u_ideal: &CMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), MetricsError> {
    if n_samples < 2 {
        return Err(MetricsError::InvalidArgument(
            "need at least 2 Monte-Carlo samples".into(),
        ));
    }
    if u_ideal.nrows() != channel.dim() || u_ideal.ncols() != channel.dim() {
        return Err(MetricsError::InvalidArgument(
            "ideal unitary does not match the channel dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = channel.dim();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let psi = haar_ket(dim, &mut rng);
        let rho = &psi * psi.adjoint();
        let out = channel.apply(&rho)?;
        let target = u_ideal * &psi;
        let fidelity = (target.adjoint() * &out * &target)[(0, 0)].re;
        sum += fidelity;
        sum_sq += fidelity * fidelity;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq / n) - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (variance / n).sqrt()))
}

/// Haar-random unit ket: complex standard-normal entries, normalized.
pub fn haar_ket(dim: usize, rng: &mut ChaCha8Rng) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| {
            c(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            )
        });
        let norm = v.norm();
        if norm > 1e-6 {
            return v * c(1.0 / norm, 0.0);
        }
    }
}
