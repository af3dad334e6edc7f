use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spincat::analytic::{overlap_cat_exact, CatParity};
use spincat::ensemble::{sample_detunings, DetuningModel, EnsembleParams, SpinCoherentParams};
use spincat::lindblad::{
    amplitude_expectation, build_collective_generator, build_full_generator, build_full_generator_in_sector,
    integrate_master, integrate_master_with, prepare_state, record_trajectory, steady_amplitude, Basis, DensityMatrix,
    Generator, Sector, SteadyStateOptions, StateKind, Workspace, FULL_SPACE_CAP,
};
use spincat::ode::Tolerance;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn tight() -> Tolerance {
    Tolerance::new(1e-12, 1e-10)
}

fn apply(generator: &Generator, rho: &[Complex64]) -> Vec<Complex64> {
    let d = generator.dim();
    let mut out = vec![ZERO; d * d];
    generator.apply(rho, &mut out, &mut Workspace::new(d));
    out
}

fn random_density(d: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<Complex64> = (0..d * d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    // ρ = G G† / Tr(G G†)
    let mut rho = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            rho[i * d + j] = (0..d).map(|k| g[i * d + k] * g[j * d + k].conj()).sum();
        }
    }
    let tr: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
    rho.iter_mut().for_each(|v| *v /= tr);
    rho
}

fn cat(theta: f64, parity: CatParity) -> StateKind {
    StateKind::Cat {
        theta,
        phi: -std::f64::consts::FRAC_PI_4,
        parity,
    }
}

#[test]
fn two_spin_steady_state_matches_dense_null_space() {
    let params = EnsembleParams::new(2, 0.3).unwrap().with_phase(0.2);
    let generator = build_collective_generator(&params, &[]).unwrap();
    let d = generator.dim();
    let columns = generator.dense_superoperator();
    // restrict to the k ∈ {0, 2} block: entries (0,0), (0,2), (2,0), (2,2)
    let idx = [0, 2, 2 * d, 2 * d + 2];
    let mut m = DMatrix::<Complex64>::zeros(5, 4);
    for (r, &row) in idx.iter().enumerate() {
        for (c, &col) in idx.iter().enumerate() {
            m[(r, c)] = columns[col][row];
        }
    }
    // trace normalization row
    m[(4, 0)] = Complex64::new(1.0, 0.0);
    m[(4, 3)] = Complex64::new(1.0, 0.0);
    let mut rhs = DVector::<Complex64>::zeros(5);
    rhs[4] = Complex64::new(1.0, 0.0);
    let oracle = m.clone().svd(true, true).solve(&rhs, 1e-14).unwrap();
    assert!((&m * &oracle - &rhs).norm() < 1e-12);

    let vacuum = prepare_state(StateKind::Css { theta: 0.0, phi: 0.0 }, generator.basis())
        .unwrap()
        .density();
    let mut last = None;
    integrate_master_with(&generator, &vacuum, &[0.0, 400.0], tight(), |_, rho| {
        last = Some(rho.clone());
        Ok(())
    })
    .unwrap();
    let rho = last.unwrap();
    for (k, &flat) in idx.iter().enumerate() {
        assert!((rho.data()[flat] - oracle[k]).norm() < 1e-8, "{} vs {}", rho.data()[flat], oracle[k]);
    }
}

#[test]
fn vacuum_and_single_excitation_are_dark_without_drive() {
    let params = EnsembleParams::new(6, 0.0).unwrap();
    let generator = build_collective_generator(&params, &[]).unwrap();
    let d = generator.dim();
    for k in [0, 1] {
        let mut rho = vec![ZERO; d * d];
        rho[k * d + k] = Complex64::new(1.0, 0.0);
        assert!(apply(&generator, &rho).iter().all(|v| v.norm() < 1e-15));
    }
}

#[test]
fn doubly_excited_dicke_state_decays_to_vacuum() {
    let n = 4;
    let params = EnsembleParams::new(n, 0.0).unwrap();
    let generator = build_collective_generator(&params, &[]).unwrap();
    let d = generator.dim();
    let mut data = vec![ZERO; d * d];
    data[2 * d + 2] = Complex64::new(1.0, 0.0);
    let rho0 = DensityMatrix::new(generator.basis(), data).unwrap();
    let grid = spincat::ensemble::TimeGrid::new(0.0, 2.0, 3).unwrap();
    let snaps = integrate_master(&generator, &rho0, &grid, tight()).unwrap();
    // rate γ s₂² with s₂² = k(N - k + 1)(k - 1)(N - k + 2) = 2N(N - 1) at k = 2
    let rate = 2.0 * (n as f64 - 1.0) * n as f64 / (n * n) as f64;
    for (snap, t) in snaps.iter().zip(grid.times()) {
        assert!((snap.get(2, 2).re - (-rate * t).exp()).abs() < 1e-9);
        assert!((snap.get(0, 0).re - (1.0 - (-rate * t).exp())).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>(), eta in 0.0f64..2.0, phase in -3.0f64..3.0) {
        let params = EnsembleParams::new(4, eta).unwrap().with_phase(phase).with_gamma2(0.7);
        let detunings = sample_detunings(&DetuningModel::Gaussian { sigma: 0.5 }, 4, seed).unwrap();
        let generator = build_full_generator(&params, &detunings).unwrap();
        let d = generator.dim();
        let out = apply(&generator, &random_density(d, seed));
        let trace: Complex64 = (0..d).map(|i| out[i * d + i]).sum();
        prop_assert!(trace.norm() < 1e-13);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((out[i * d + j] - out[j * d + i].conj()).norm() == 0.0);
            }
        }
    }
}

#[test]
fn full_and_collective_backends_agree() {
    for n in [2usize, 3, 4, 5, 6] {
        let params = EnsembleParams::new(n, 0.2).unwrap();
        let zeros = vec![0.0; n];
        let full = build_full_generator(&params, &zeros).unwrap();
        let collective = build_collective_generator(&params, &zeros).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 2.0).collect();
        for state in [cat(0.9, CatParity::Even), cat(0.9, CatParity::Odd), StateKind::Css { theta: 0.7, phi: 0.3 }] {
            let pf = prepare_state(state, full.basis()).unwrap();
            let pc = prepare_state(state, collective.basis()).unwrap();
            let tf = record_trajectory(&full, &pf.density(), &pf.psi, &times, tight(), 0).unwrap();
            let tc = record_trajectory(&collective, &pc.density(), &pc.psi, &times, tight(), 0).unwrap();
            for (a, b) in tf.rows.iter().zip(&tc.rows) {
                assert!((a.fidelity - b.fidelity).abs() < 1e-7, "n={n} {a:?} {b:?}");
                assert!((a.re_a - b.re_a).abs() < 1e-7 && (a.im_a - b.im_a).abs() < 1e-7);
                assert!((a.parity - b.parity).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn free_evolution_matches_exact_cat_overlap() {
    let n = 8;
    let params = EnsembleParams::new(n, 0.0).unwrap().with_gamma2(0.0);
    let state = SpinCoherentParams::new(0.8, -0.4).unwrap();
    let times: Vec<f64> = (0..=25).map(|i| i as f64 * 0.4).collect();
    for seed in 0..3u64 {
        let detunings = sample_detunings(&DetuningModel::Gaussian { sigma: 0.7 }, n, seed).unwrap();
        for parity in [CatParity::Even, CatParity::Odd] {
            let sector = if parity == CatParity::Even { Sector::Even } else { Sector::Odd };
            let generator = build_full_generator_in_sector(&params, &detunings, sector, FULL_SPACE_CAP).unwrap();
            let kind = StateKind::Cat {
                theta: state.theta,
                phi: state.phi,
                parity,
            };
            let prepared = prepare_state(kind, generator.basis()).unwrap();
            let traj = record_trajectory(&generator, &prepared.density(), &prepared.psi, &times, tight(), 0).unwrap();
            for row in &traj.rows {
                let exact = overlap_cat_exact(&state, parity, &detunings, row.t).unwrap();
                assert!((row.fidelity - exact).abs() < 1e-9, "t={} {} vs {exact}", row.t, row.fidelity);
            }
        }
    }
}

#[test]
fn parity_sectors_stay_closed_under_detuning() {
    let n = 6;
    let params = EnsembleParams::new(n, 0.4).unwrap();
    let detunings = sample_detunings(&DetuningModel::Gaussian { sigma: 0.3 }, n, 9).unwrap();
    let generator = build_full_generator(&params, &detunings).unwrap();
    let basis = generator.basis();
    let excitations = basis.excitations();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 5.0).collect();
    for parity in [CatParity::Even, CatParity::Odd] {
        let prepared = prepare_state(cat(1.0, parity), basis).unwrap();
        let traj = record_trajectory(&generator, &prepared.density(), &prepared.psi, &times, tight(), 5).unwrap();
        assert!(traj.max_parity_drift < 1e-6);
        assert!(traj.max_trace_error < 1e-8);
        assert!(traj.max_hermiticity_error < 1e-10);
        assert!(traj.min_eigenvalue > -1e-8);
        let wrong = if parity == CatParity::Even { 1 } else { 0 };
        integrate_master_with(&generator, &prepared.density(), &times, tight(), |_, rho| {
            let leaked: f64 = excitations
                .iter()
                .enumerate()
                .filter(|(_, k)| *k % 2 == wrong)
                .map(|(i, _)| rho.get(i, i).re.abs())
                .sum();
            assert!(leaked <= 1e-10);
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn steady_amplitude_approaches_bosonic_limit() {
    let opts = SteadyStateOptions::default();
    let target = (2.0f64 * 0.25).sqrt();
    let errors: Vec<f64> = [20usize, 100]
        .iter()
        .map(|&n| (steady_amplitude(&EnsembleParams::new(n, 0.25).unwrap(), &opts).unwrap().amplitude - target).abs())
        .collect();
    assert!(errors[1] < errors[0]);
    assert!(errors[1] / target < 0.05);
}

#[test]
fn collective_projection_of_full_state_matches_collective_run() {
    let n = 4;
    let params = EnsembleParams::new(n, 0.3).unwrap();
    let full = build_full_generator(&params, &vec![0.0; n]).unwrap();
    let collective = build_collective_generator(&params, &[]).unwrap();
    let grid = spincat::ensemble::TimeGrid::new(0.0, 10.0, 3).unwrap();
    let state = cat(0.6, CatParity::Even);
    let rf = integrate_master(&full, &prepare_state(state, full.basis()).unwrap().density(), &grid, tight()).unwrap();
    let rc = integrate_master(
        &collective,
        &prepare_state(state, collective.basis()).unwrap().density(),
        &grid,
        tight(),
    )
    .unwrap();
    for (f, c) in rf.iter().zip(&rc) {
        let projected = f.symmetric_projection();
        assert_eq!(projected.basis(), Basis::Collective { n_spins: n });
        for (a, b) in projected.data().iter().zip(c.data()) {
            assert!((a - b).norm() < 1e-8);
        }
        assert!((amplitude_expectation(f) - amplitude_expectation(c)).norm() < 1e-8);
    }
}
