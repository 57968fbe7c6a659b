use num_complex::Complex64 as C64;

use pnr_core::architecture::{build_architecture, build_single_element, ArchitectureKind, ArchitectureParams, ABSORB};
use pnr_core::hierarchy::{evolve_lindblad, integrate_hierarchy, reduced_matter_state, HierarchyOptions};
use pnr_core::integrate::IntegratorOptions;
use pnr_core::liouvillian::{counting_resolve, Dynamics};
use pnr_core::pulse::{fock_input, gaussian_envelope, FieldInput};
use pnr_core::simulation::{simulate_detection, DetectionOptions, Registration};

fn tight() -> IntegratorOptions {
    IntegratorOptions::with_tolerances(1e-11, 1e-13)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Gaussian amplitude with unit-normalized intensity of width `sigma0`.
fn pulse(t: f64, sigma0: f64) -> f64 {
    (2.0 * std::f64::consts::PI * sigma0 * sigma0).powf(-0.25) * (-t * t / (4.0 * sigma0 * sigma0)).exp()
}

/// One-photon sector amplitude `ė = −(r/2) e − γ E(t)`, fixed-step RK4.
fn amplitude_oracle(gamma: f64, decay: f64, sigma0: f64, times: &[f64]) -> Vec<f64> {
    let f = |t: f64, e: f64| -0.5 * decay * e - gamma * pulse(t, sigma0);
    let h: f64 = 1e-3;
    let mut t = times[0];
    let mut e = 0.0;
    let mut out = Vec::new();
    for &target in times {
        while t < target - 1e-12 {
            let s = h.min(target - t);
            let k1 = f(t, e);
            let k2 = f(t + s / 2.0, e + s / 2.0 * k1);
            let k3 = f(t + s / 2.0, e + s / 2.0 * k2);
            let k4 = f(t + s, e + s * k3);
            e += s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += s;
        }
        out.push(e);
    }
    out
}

#[test]
fn two_level_decay_matches_exponential() {
    let g = 0.8;
    let arch = build_single_element(g, 0.0, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let times = grid(0.0, 5.0, 11);
    let states = evolve_lindblad(&liou, &liou.pure_state(1).unwrap(), &times, &tight()).unwrap();
    let w = liou.population_functional(|s| s == 1).unwrap();
    for (t, x) in times.iter().zip(&states) {
        let p: C64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        assert!((p.re - (-g * g * t).exp()).abs() < 1e-9, "t={t}");
    }
}

#[test]
fn counted_decay_matches_jump_statistics() {
    let g = 1.2;
    let arch = build_single_element(g, 0.0, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let c = counting_resolve(&liou, &[ABSORB], 1).unwrap();
    let times = grid(0.0, 4.0, 9);
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let w = vec![c.at_least_functional(1)];
    let run = integrate_hierarchy(&c, &field, &liou.pure_state(1).unwrap(), &times, &w, &HierarchyOptions::from(tight()))
        .unwrap();
    for (t, p) in times.iter().zip(&run.values[0]) {
        assert!((p - (1.0 - (-g * g * t).exp())).abs() < 1e-9, "t={t}");
    }
}

#[test]
fn single_photon_excitation_matches_amplitude_oracle() {
    let (g, sigma0) = (1.0, 1.5);
    let arch = build_single_element(g, 0.0, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(1, gaussian_envelope(sigma0, 0.0, 0.0).unwrap());
    let times = grid(-8.0, 10.0, 37);
    let w = vec![liou.population_functional(|s| s == 1).unwrap()];
    let run = integrate_hierarchy(&liou, &field, &liou.ground_state(), &times, &w, &HierarchyOptions::from(tight()))
        .unwrap();
    let e = amplitude_oracle(g, g * g, sigma0, &times);
    for i in 0..times.len() {
        assert!((run.values[0][i] - e[i] * e[i]).abs() < 1e-6, "t={} {} {}", times[i], run.values[0][i], e[i] * e[i]);
    }
}

#[test]
fn shelved_population_integrates_excitation() {
    let (g, big, sigma0) = (1.0, 0.7, 2.0);
    let arch = build_single_element(g, big, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(1, gaussian_envelope(sigma0, 0.0, 0.0).unwrap());
    let times = grid(-10.0, 20.0, 3001);
    let w = vec![liou.population_functional(|s| s == 2).unwrap()];
    let run = integrate_hierarchy(&liou, &field, &liou.ground_state(), &times, &w, &HierarchyOptions::from(tight()))
        .unwrap();
    let e = amplitude_oracle(g, g * g + big * big, sigma0, &times);
    let mut acc = 0.0;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        acc += 0.5 * h * big * big * (e[i - 1] * e[i - 1] + e[i] * e[i]);
        assert!((run.values[0][i] - acc).abs() < 1e-5, "t={}", times[i]);
    }
}

#[test]
fn superposition_coherence_matches_joint_state() {
    let (g, sigma0) = (1.0, 1.0);
    let arch = build_single_element(g, 0.0, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let field =
        FieldInput::superposition(&[C64::new(a, 0.0), C64::new(a, 0.0)], gaussian_envelope(sigma0, 0.0, 0.0).unwrap())
            .unwrap();
    let times = grid(-6.0, 8.0, 15);
    let opts = HierarchyOptions { integrator: tight(), keep_states: true, freeze_after_pulse: false };
    let run = integrate_hierarchy(&liou, &field, &liou.ground_state(), &times, &[], &opts).unwrap();
    let e = amplitude_oracle(g, g * g, sigma0, &times);
    for (i, state) in run.states.iter().enumerate() {
        let rho = liou.density_matrix(&reduced_matter_state(state, &field).unwrap()).unwrap();
        let trace: C64 = (0..3).map(|k| rho[k][k]).sum();
        assert!((trace.re - 1.0).abs() < 1e-8 && trace.im.abs() < 1e-8);
        // Joint state a|g,vac⟩ + a(e|1,vac⟩ + |g, photon elsewhere⟩).
        assert!((rho[1][1].re - 0.5 * e[i] * e[i]).abs() < 1e-6, "t={}", times[i]);
        assert!((rho[0][1].norm() - 0.5 * e[i].abs()).abs() < 1e-6, "t={}", times[i]);
        assert!((rho[0][1] - rho[1][0].conj()).norm() < 1e-10);
    }
}

#[test]
fn vacuum_hierarchy_equals_lindblad() {
    let arch = build_single_element(1.0, 0.5, 0.3, 1.0, 0.4).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let rho0 = liou.pure_state(1).unwrap();
    let times = grid(0.0, 6.0, 13);
    let opts = HierarchyOptions { integrator: tight(), keep_states: true, freeze_after_pulse: false };
    let run = integrate_hierarchy(&liou, &field, &rho0, &times, &[], &opts).unwrap();
    let direct = evolve_lindblad(&liou, &rho0, &times, &tight()).unwrap();
    for (h, d) in run.states.iter().zip(&direct) {
        let diff = h.member(0, 0).iter().zip(d).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }
}

fn compare_truncation(params: ArchitectureParams, photons: usize) {
    let full = build_architecture(&params).unwrap();
    let trunc = build_architecture(&ArchitectureParams { max_excitation: Some(photons as u32), ..params }).unwrap();
    let opts = DetectionOptions {
        integrator: IntegratorOptions::with_tolerances(1e-12, 1e-14),
        settle: Some(15.0),
        max_extensions: 0,
        registration: Registration::Counting,
        n_times: 61,
        ..Default::default()
    };
    let field = fock_input(photons, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let a = simulate_detection(&full, &field, &opts).unwrap();
    let b = simulate_detection(&trunc, &field, &opts).unwrap();
    for (x, y) in a.distribution.at_least.iter().zip(&b.distribution.at_least) {
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn four_donor_single_photon_truncation() {
    let params = ArchitectureParams {
        gamma: 0.6,
        big_gamma: 0.9,
        delta: 0.2,
        n_d: 4,
        ..ArchitectureParams::new(ArchitectureKind::Array)
    };
    let trunc = build_architecture(&ArchitectureParams { max_excitation: Some(1), ..params.clone() }).unwrap();
    // Ground state plus one excited level (1 or C) on one of four donors.
    assert_eq!(trunc.liouvillian().unwrap().state_dim(), 1 + 4 * 2);
    compare_truncation(params, 1);
}

#[test]
fn two_donor_two_acceptor_two_photon_truncation() {
    let params = ArchitectureParams {
        gamma: 0.9,
        big_gamma: 1.0,
        delta: 0.3,
        n_d: 2,
        n_a: 2,
        k_a: 0.8,
        ..ArchitectureParams::new(ArchitectureKind::Pnr)
    };
    compare_truncation(params, 2);
}

#[test]
fn hierarchy_preserves_member_traces() {
    let arch = build_architecture(&ArchitectureParams {
        gamma: 0.9,
        big_gamma: 0.8,
        delta: 0.4,
        n_d: 2,
        n_a: 1,
        k_a: 0.9,
        k: 0.3,
        ..ArchitectureParams::new(ArchitectureKind::Pnr)
    })
    .unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(2, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let tr = liou.trace_functional().to_vec();
    let run = integrate_hierarchy(&liou, &field, &liou.ground_state(), &grid(-5.0, 10.0, 16), &[tr], &HierarchyOptions::from(tight()))
        .unwrap();
    assert!(run.max_trace_deviation < 1e-8);
    assert!(run.values[0].iter().all(|v| (v - 1.0).abs() < 1e-8));
}
