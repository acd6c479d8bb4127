//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single PASS line with the measured numbers; pinned tolerances
//! guard against silent regressions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinjj::cli::{run_experiment, Experiment, RunConfig};
use spinjj::dynamics::{
    propagate_conditional, solve_master_raw, trace_distance, validate_dispersive,
    validate_strong_driving, TimeGrid,
};
use spinjj::gates::{
    holonomic_unitary, phase_gate_unitary, plan_phase_gate, plus_minus_transform, swap_gate_exact,
    verify_holonomic_cycle,
};
use spinjj::metrics::{
    average_gate_fidelity, average_gate_fidelity_monte_carlo, channel_from_simulation,
    concurrence_pure, phase_invariant_fidelity,
};
use spinjj::model::{
    build_h_c, build_lindblad, estimate_coupling, lambda_eff_internal, units, CollapseTerm,
    DissipativeSetup, DissipatorForm, LindbladModel, OperatorTerm, SystemParams,
    TimeDependentOperator,
};
use spinjj::qcore::{
    c, eigh, kron, max_abs_diff, sigma_x, zeros, CMatrix, CVector, HilbertLayout,
};

fn default_params() -> SystemParams {
    SystemParams::default()
}

fn base_config(experiment: Experiment) -> RunConfig {
    RunConfig {
        experiment,
        params: SystemParams::default(),
        gate: Default::default(),
        estimate: Default::default(),
        sweep: None,
        seed: 0,
        output_path: ".".into(),
    }
}

/// Criterion 1: the simulated conditional evolution matches the closed form
/// e^{-Γt}·|sin 2λt| to 1e-8, and the concurrence maxima for
/// Γ/λ ∈ {1, 0.1, 0.01} are ≈ {0.514, 0.924, 0.992}. Runtime < 1 s.
#[test]
fn criterion_01_concurrence_curves() {
    let start = Instant::now();
    let params = default_params();
    let lambda = lambda_eff_internal(&params).unwrap();
    let t_end = TAU / lambda;

    let quoted = [0.514, 0.924, 0.992];
    let frozen = [0.51420, 0.92562, 0.99219];
    let mut max_dev: f64 = 0.0;
    for (k, ratio) in [1.0, 0.1, 0.01].into_iter().enumerate() {
        let gamma_int = ratio * lambda;
        let p = SystemParams {
            gamma: units::rate_mhz(gamma_int),
            ..params.clone()
        };
        let hc = build_h_c(&p).unwrap();
        let mut psi0 = CVector::zeros(4);
        psi0[1] = c(1.0, 0.0);
        let grid = TimeGrid::new(0.0, t_end, 16384, 64).unwrap();
        let run = propagate_conditional(&hc, &psi0, &grid).unwrap();
        for (t, state) in run.times.iter().zip(&run.states) {
            let simulated = concurrence_pure(state, true).unwrap();
            let closed = (-(gamma_int * t)).exp() * (2.0 * lambda * t).sin().abs();
            max_dev = max_dev.max((simulated - closed).abs());
        }

        // Maximum of the closed form over the full window, on a dense scan.
        let scan = 400_000;
        let mut peak: f64 = 0.0;
        for i in 0..=scan {
            let lt = TAU * i as f64 / scan as f64;
            let value = (-(ratio * lt)).exp() * (2.0 * lt).sin().abs();
            peak = peak.max(value);
        }
        assert!(
            (peak - quoted[k]).abs() <= 2e-3,
            "peak for gamma/lambda = {ratio} is {peak}, expected ~{}",
            quoted[k]
        );
        assert!(
            (peak - frozen[k]).abs() <= 1e-4,
            "peak for gamma/lambda = {ratio} is {peak}, frozen value {}",
            frozen[k]
        );
    }
    assert!(max_dev <= 1e-8, "closed-form deviation {max_dev:.3e}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2} s, budget 1 s");
    println!(
        "acceptance criterion 1: PASS — closed-form deviation {max_dev:.2e}, \
         maxima within 2e-3 of (0.514, 0.924, 0.992), {elapsed:.2} s"
    );
}

/// Criterion 2: exp(−i·H_e·τ_k) equals the block matrix
/// diag[1, −SWAP, −1] to 1e-10, and composing with Z⊗Z yields the plain
/// swap-with-π-phase form at phase-invariant fidelity 1 − 1e-10. Runtime < 1 s.
#[test]
fn criterion_02_phase_swap_gate() {
    let start = Instant::now();
    let gate = swap_gate_exact(&default_params()).unwrap();

    let mut expected = zeros(4);
    expected[(0, 0)] = c(1.0, 0.0);
    expected[(1, 2)] = c(-1.0, 0.0);
    expected[(2, 1)] = c(-1.0, 0.0);
    expected[(3, 3)] = c(-1.0, 0.0);
    let dev = max_abs_diff(&gate.u_exact, &expected);
    assert!(dev <= 1e-10, "u_exact deviates by {dev:.3e}");

    // The commonly quoted form: excitation swap plus a π phase on |11⟩.
    let mut swap_with_phase = zeros(4);
    swap_with_phase[(0, 0)] = c(1.0, 0.0);
    swap_with_phase[(1, 2)] = c(1.0, 0.0);
    swap_with_phase[(2, 1)] = c(1.0, 0.0);
    swap_with_phase[(3, 3)] = c(-1.0, 0.0);
    let fid = phase_invariant_fidelity(&gate.u_reported, &swap_with_phase).unwrap();
    assert!(fid >= 1.0 - 1e-10, "frame-composed fidelity {fid}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2} s, budget 1 s");
    println!(
        "acceptance criterion 2: PASS — gate matrix deviation {dev:.2e}, \
         frame-composed fidelity 1 - {:.2e}, {elapsed:.2} s",
        1.0 - fid
    );
}

/// Criterion 3: phase_gate_unitary(π/4) equals the controlled-phase gate
/// diag(1, 1, 1, −1) in the |±⟩ basis up to a global phase, fidelity
/// ≥ 1 − 1e-10.
#[test]
fn criterion_03_phase_gate_ideal_algebra() {
    let u = phase_gate_unitary(FRAC_PI_2 / 2.0);
    let w = plus_minus_transform();
    let in_pm_basis = &w * u * &w;
    let mut cp = zeros(4);
    cp[(0, 0)] = c(1.0, 0.0);
    cp[(1, 1)] = c(1.0, 0.0);
    cp[(2, 2)] = c(1.0, 0.0);
    cp[(3, 3)] = c(-1.0, 0.0);
    let fid = phase_invariant_fidelity(&in_pm_basis, &cp).unwrap();
    assert!(fid >= 1.0 - 1e-10, "fidelity to the controlled-phase {fid}");
    println!(
        "acceptance criterion 3: PASS — controlled-phase fidelity 1 - {:.2e}",
        1.0 - fid
    );
}

/// Criterion 4: with κ = Γ₁ = Γ₂ = 1 MHz and the planned drive at detuning
/// ratio 10, the simulated channel reaches average gate fidelity ≥ 0.985
/// (computed value reported). Runtime < 2 min at n_max = 5.
#[test]
fn criterion_04_phase_gate_under_decoherence() {
    let start = Instant::now();
    let params = default_params();
    assert_eq!(params.kappa, 1.0);
    assert_eq!(params.gamma1, 1.0);
    assert_eq!(params.gamma2, 1.0);
    assert_eq!(params.n_max, 5);

    let plan = plan_phase_gate(&params, 0, 10.0).unwrap();
    let driven = SystemParams {
        g1: plan.g1_mhz,
        g2: plan.g2_mhz,
        g2_phase: 0.0,
        epsilon: plan.epsilon_mhz,
        ..params
    };
    let layout = driven.layout().unwrap();
    let model = build_lindblad(&driven, DissipativeSetup::DrivenPhaseGate, &layout).unwrap();
    let channel = channel_from_simulation(&model, plan.duration_ns, &layout, true).unwrap();

    // In the frame of the noise-free local drive rotations, the planned loop
    // is a pure two-qubit σx⊗σx phase; composing the same local unitary into
    // both channel and target leaves the average fidelity unchanged.
    let xx = kron(&sigma_x(), &sigma_x());
    let ideal = spinjj::qcore::expm_unitary(&xx, -plan.theta).unwrap();
    let fidelity = average_gate_fidelity(&channel, &ideal).unwrap();
    assert!(fidelity >= 0.985, "average gate fidelity {fidelity}");

    let (mc_mean, mc_se) =
        average_gate_fidelity_monte_carlo(&channel, &ideal, 200, 7).unwrap();
    assert!(
        (mc_mean - fidelity).abs() <= 3.0 * mc_se,
        "Monte-Carlo mean {mc_mean} vs deterministic {fidelity} (3σ = {:.2e})",
        3.0 * mc_se
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.1} s, budget 120 s");
    println!(
        "acceptance criterion 4: PASS — average gate fidelity {fidelity:.6} \
         (Monte-Carlo {mc_mean:.6} ± {mc_se:.1e}), {elapsed:.1} s"
    );
}

/// Criterion 5: the swap-gate fidelity is monotone nonincreasing in Γ₁ and
/// Γ₂ on a 6×6 grid over [0, 2] MHz, with F(0,0) ≥ 1 − 1e-6. Runtime < 1 min.
#[test]
fn criterion_05_swap_fidelity_surface() {
    let start = Instant::now();
    let params = default_params();
    let gate = swap_gate_exact(&params).unwrap();
    let pair = HilbertLayout::new(vec![2, 2]).unwrap();

    let rates: Vec<f64> = (0..6).map(|i| 2.0 * i as f64 / 5.0).collect();
    let mut surface = [[0.0_f64; 6]; 6];
    for (i, &g1) in rates.iter().enumerate() {
        for (j, &g2) in rates.iter().enumerate() {
            let p = SystemParams {
                gamma1: g1,
                gamma2: g2,
                ..params.clone()
            };
            let model = build_lindblad(&p, DissipativeSetup::StaticSwapGate, &pair).unwrap();
            let channel = channel_from_simulation(&model, gate.tau_k_ns, &pair, false).unwrap();
            surface[i][j] = average_gate_fidelity(&channel, &gate.u_exact).unwrap();
        }
    }

    assert!(
        surface[0][0] >= 1.0 - 1e-6,
        "noiseless fidelity {}",
        surface[0][0]
    );
    for i in 0..6 {
        for j in 0..5 {
            assert!(
                surface[i][j + 1] <= surface[i][j] + 1e-12,
                "fidelity not monotone in gamma2 at ({i}, {j})"
            );
            assert!(
                surface[j + 1][i] <= surface[j][i] + 1e-12,
                "fidelity not monotone in gamma1 at ({j}, {i})"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "took {elapsed:.1} s, budget 60 s");
    println!(
        "acceptance criterion 5: PASS — F(0,0) = 1 - {:.2e}, monotone on the \
         6x6 rate grid, worst corner {:.6}, {elapsed:.1} s",
        1.0 - surface[0][0],
        surface[5][5]
    );
}

/// Criterion 6: the holonomic cycle reproduces the reflection unitary with
/// infidelity and junction leakage ≤ 1e-8 across a 10×10 (θ, φ) grid, and
/// holonomic_unitary(π/2, 0) is exactly the X gate.
#[test]
fn criterion_06_holonomic_cycle_grid() {
    let mut worst_infidelity: f64 = 0.0;
    let mut worst_leakage: f64 = 0.0;
    for i in 0..10 {
        let theta = PI * i as f64 / 9.0;
        for j in 0..10 {
            let phi = TAU * j as f64 / 10.0;
            let check = verify_holonomic_cycle(theta, phi, 512).unwrap();
            worst_infidelity = worst_infidelity.max(check.infidelity);
            worst_leakage = worst_leakage.max(check.leakage);
        }
    }
    assert!(worst_infidelity <= 1e-8, "infidelity {worst_infidelity:.3e}");
    assert!(worst_leakage <= 1e-8, "leakage {worst_leakage:.3e}");

    let x_gate = holonomic_unitary(FRAC_PI_2, 0.0);
    let dev = max_abs_diff(&x_gate, &sigma_x());
    assert!(dev <= 1e-15, "holonomic X deviates by {dev:.3e}");
    println!(
        "acceptance criterion 6: PASS — grid infidelity ≤ {worst_infidelity:.2e}, \
         leakage ≤ {worst_leakage:.2e}, X-gate deviation {dev:.2e}"
    );
}

/// Criterion 7: the tri-partite evolution agrees with the effective
/// two-qubit exchange at δ/G = 10 with reduced-state fidelity ≥ 0.98 over
/// one swap period, and the agreement improves at δ/G = 20.
#[test]
fn criterion_07_dispersive_validity() {
    let report = validate_dispersive(&default_params(), &[10.0, 20.0], 64).unwrap();
    let at_10 = &report.points[0];
    let at_20 = &report.points[1];
    assert!(
        at_10.min_fidelity >= 0.98,
        "fidelity at ratio 10 is {}",
        at_10.min_fidelity
    );
    assert!(
        at_20.max_infidelity < at_10.max_infidelity,
        "no improvement: {} vs {}",
        at_20.max_infidelity,
        at_10.max_infidelity
    );
    println!(
        "acceptance criterion 7: PASS — min fidelity {:.5} at ratio 10, \
         infidelity {:.2e} → {:.2e} at ratio 20",
        at_10.min_fidelity, at_10.max_infidelity, at_20.max_infidelity
    );
}

/// Criterion 8: the strong-driving reduction improves monotonically: the
/// final-state infidelity strictly decreases across drive ratios {5, 10, 20}
/// on a fixed grid.
#[test]
fn criterion_08_strong_driving_validity() {
    let params = default_params();
    let delta = params.detuning().unwrap();
    let grid = TimeGrid::new(0.0, TAU / delta.abs(), 400, 400).unwrap();
    let report = validate_strong_driving(&params, &grid, &[5.0, 10.0, 20.0]).unwrap();
    let inf: Vec<f64> = report.points.iter().map(|p| p.infidelity).collect();
    assert!(
        inf[0] > inf[1] && inf[1] > inf[2],
        "infidelities not strictly decreasing: {inf:?}"
    );
    println!(
        "acceptance criterion 8: PASS — infidelities {:.2e} > {:.2e} > {:.2e}",
        inf[0], inf[1], inf[2]
    );
}

/// Criterion 9: on randomized Lindblad problems the integrator preserves the
/// trace to 1e-8 and positivity to −1e-7, and step halving shows a
/// convergence factor ≥ 12 (fourth-order behaviour).
#[test]
fn criterion_09_integrator_properties() {
    let dim = 6;
    let mut worst_factor = f64::INFINITY;
    let mut worst_trace: f64 = 0.0;
    let mut worst_eigenvalue: f64 = 0.0;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1ead_bad5 + seed);
        let mut random_matrix = |scale: f64| -> CMatrix {
            CMatrix::from_fn(dim, dim, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * c(scale, 0.0)
            })
        };

        // Hermitian static part plus one rotating term (adjoint pair).
        let a = random_matrix(1.0);
        let h0 = (&a + a.adjoint()) * c(0.5, 0.0);
        let m = random_matrix(0.5);
        let hamiltonian = TimeDependentOperator::new(vec![
            OperatorTerm {
                matrix: h0,
                scale: c(1.0, 0.0),
                rate: 0.0,
            },
            OperatorTerm {
                matrix: m.clone(),
                scale: c(1.0, 0.0),
                rate: 3.0,
            },
            OperatorTerm {
                matrix: m.adjoint(),
                scale: c(1.0, 0.0),
                rate: -3.0,
            },
        ])
        .unwrap();
        let collapse = vec![
            CollapseTerm {
                rate: 0.08,
                operator: random_matrix(1.0),
                form: DissipatorForm::Standard,
            },
            CollapseTerm {
                rate: 0.05,
                operator: random_matrix(1.0),
                form: DissipatorForm::Standard,
            },
        ];
        let model = LindbladModel::new(hamiltonian, collapse).unwrap();

        let b = random_matrix(1.0);
        let gram = &b * b.adjoint();
        let rho0 = &gram / gram.trace();

        let solve = |n_steps: usize| {
            let grid = TimeGrid::new(0.0, 1.0, n_steps, n_steps).unwrap();
            solve_master_raw(&model, &rho0, &grid).unwrap()
        };
        let coarse = solve(64);
        let fine = solve(128);
        let reference = solve(1024);

        let e_coarse = trace_distance(coarse.final_state(), reference.final_state()).unwrap();
        let e_fine = trace_distance(fine.final_state(), reference.final_state()).unwrap();
        let factor = e_coarse / e_fine;
        worst_factor = worst_factor.min(factor);

        let trace_dev = (fine.final_state().trace().re - 1.0).abs();
        worst_trace = worst_trace.max(trace_dev);
        let (eigenvalues, _) = eigh(fine.final_state(), 1e-10).unwrap();
        worst_eigenvalue = worst_eigenvalue.min(eigenvalues[0]);
    }
    assert!(worst_trace <= 1e-8, "trace deviation {worst_trace:.3e}");
    assert!(
        worst_eigenvalue >= -1e-7,
        "negative eigenvalue {worst_eigenvalue:.3e}"
    );
    assert!(
        worst_factor >= 12.0,
        "convergence factor {worst_factor:.2} under step halving"
    );
    println!(
        "acceptance criterion 9: PASS — trace deviation ≤ {worst_trace:.2e}, \
         eigenvalues ≥ {worst_eigenvalue:.2e}, convergence factor ≥ {worst_factor:.1}"
    );
}

/// Criterion 10: the coupling estimate reproduces the magnetostatic chain
/// exactly, and the reference values it disagrees with are surfaced in the
/// summary's "paper_reported" block instead of being reconciled.
#[test]
fn criterion_10_parameter_estimation() {
    let est = estimate_coupling(21e-6, 1.2e-6, 1e6).unwrap();
    let mu0 = 4.0e-7 * PI;
    let b_expected = mu0 * 21e-6 / (4.0 * PI * 1.2e-6);
    assert!((est.b_field_tesla - b_expected).abs() <= 1e-18 * b_expected.abs().max(1.0));
    assert!((est.b_field_tesla - 1.75e-6).abs() <= 1e-16);
    let g_single_expected = 2.0 * 28.0 * (b_expected * 1e3);
    assert!((est.g_single_mhz - g_single_expected).abs() <= 1e-12);
    assert!((est.g_single_mhz - 0.098).abs() <= 1e-12);
    assert!((est.g_collective_mhz - 98.0).abs() <= 1e-9);

    let out = run_experiment(&base_config(Experiment::Estimate)).unwrap();
    let reported = &out.summary["paper_reported"];
    let computed = &out.summary["results"];
    assert_eq!(reported["g_k_mhz"].as_f64().unwrap(), 0.62);
    assert_eq!(reported["g_collective_mhz"].as_f64().unwrap(), 620.0);
    assert_eq!(reported["lambda_mhz"].as_f64().unwrap(), 34.6);
    // The computed chain stays as computed — the gap is surfaced, not hidden.
    assert!((computed["g_single_mhz"].as_f64().unwrap() - 0.098).abs() <= 1e-12);
    assert!((computed["g_collective_mhz"].as_f64().unwrap() - 98.0).abs() <= 1e-9);
    println!(
        "acceptance criterion 10: PASS — computed chain (0.098, 98) MHz exact; \
         quoted reference block (0.62, 620, 34.6) MHz surfaced side by side"
    );
}
