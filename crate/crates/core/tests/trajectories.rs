use pnr_core::architecture::build_single_element;
use pnr_core::hierarchy::{integrate_hierarchy, HierarchyOptions};
use pnr_core::integrate::IntegratorOptions;
use pnr_core::pulse::{fock_input, gaussian_envelope};
use pnr_core::trajectory::{
    ensemble_average, extract_clicks, simulate_ensemble, simulate_trajectory, window_statistics, TrajectoryOptions,
};
use statrs::function::erf::erfc;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn noiseless_trajectory_is_deterministic() {
    let arch = build_single_element(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(1, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(-5.0, 8.0, 27);
    let w = vec![liou.population_functional(|s| s == 2).unwrap()];
    let rec = simulate_trajectory(&liou, &field, &liou.ground_state(), &times, &w, &TrajectoryOptions::new(1e-3, 1), 0)
        .unwrap();
    let det = integrate_hierarchy(
        &liou,
        &field,
        &liou.ground_state(),
        &times,
        &w,
        &HierarchyOptions::from(IntegratorOptions::with_tolerances(1e-11, 1e-13)),
    )
    .unwrap();
    for (a, b) in rec.values[0].iter().zip(&det.values[0]) {
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }
}

#[test]
fn occupied_state_gives_signal_to_noise() {
    let (chi, k, t_m) = (1.0, 0.5, 1.0);
    let arch = build_single_element(1.0, 1.0, 0.0, chi, k).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(0.0, 1e4 * t_m, 10_001);
    let rec = simulate_trajectory(&liou, &field, &liou.pure_state(2).unwrap(), &times, &[], &TrajectoryOptions::new(0.05, 5), 0)
        .unwrap();
    let c = &rec.currents[0];
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - chi).abs() < 5e-2 * chi, "mean {mean}");
    let snr = mean / var.sqrt();
    let expected = (8.0 * k * t_m).sqrt() * chi;
    assert!((snr / expected - 1.0).abs() < 0.05, "{snr} vs {expected}");
}

#[test]
fn vacuum_record_variance() {
    let (k, t_m) = (2.0, 0.5);
    let arch = build_single_element(1.0, 1.0, 0.0, 1.0, k).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(0.0, 2e4 * t_m, 20_001);
    let rec = simulate_trajectory(&liou, &field, &liou.ground_state(), &times, &[], &TrajectoryOptions::new(t_m, 9), 0)
        .unwrap();
    let c = &rec.currents[0];
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected = 1.0 / (8.0 * k * t_m);
    assert!(mean.abs() < 5.0 * (expected / n).sqrt());
    assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
}

#[test]
fn ensemble_mean_matches_hierarchy() {
    let arch = build_single_element(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(1, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(-4.0, 8.0, 13);
    let w = vec![liou.population_functional(|s| s == 2).unwrap()];
    let recs =
        simulate_ensemble(&liou, &field, &liou.ground_state(), &times, &w, &TrajectoryOptions::new(0.01, 3), 2000).unwrap();
    let avg = ensemble_average(&recs, 0).unwrap();
    let det = integrate_hierarchy(&liou, &field, &liou.ground_state(), &times, &w, &HierarchyOptions::default()).unwrap();
    for i in 0..times.len() {
        let dev = (avg.mean[i] - det.values[0][i]).abs();
        assert!(dev <= 3.0 * avg.stderr[i] + 1e-9, "t={}: {dev} vs se {}", times[i], avg.stderr[i]);
    }
}

#[test]
fn averaged_variance_scales_inversely_with_count() {
    let arch = build_single_element(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(1, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(-4.0, 4.0, 3);
    let w = vec![liou.population_functional(|s| s == 2).unwrap()];
    let recs =
        simulate_ensemble(&liou, &field, &liou.ground_state(), &times, &w, &TrajectoryOptions::new(0.02, 21), 20_000).unwrap();
    // Spread of batch means at several batch sizes.
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for m in [5usize, 10, 20, 40] {
        let means: Vec<f64> = recs.chunks(m).map(|c| c.iter().map(|r| r.values[0][2]).sum::<f64>() / m as f64).collect();
        let mu = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        xs.push((m as f64).ln());
        ys.push(var.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn vacuum_false_positives_at_half_separation() {
    let (chi, t_m, snr) = (1.0, 1.0, 3.0f64);
    let k = snr * snr / (8.0 * t_m * chi * chi);
    let arch = build_single_element(1.0, 1.0, 0.0, chi, k).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(0.0, 1e4 * t_m, 10_001);
    let recs =
        simulate_ensemble(&liou, &field, &liou.ground_state(), &times, &[], &TrajectoryOptions::new(t_m, 17), 10).unwrap();
    let stats = window_statistics(&recs, 0, chi / 2.0, t_m).unwrap();
    assert!(stats.windows >= 100_000);
    let predicted = 0.5 * erfc(snr / (2.0 * std::f64::consts::SQRT_2));
    let ratio = stats.probability / predicted;
    assert!((0.5..=2.0).contains(&ratio), "{} vs {predicted}", stats.probability);
}

#[test]
fn high_threshold_never_clicks_at_large_snr() {
    let (chi, t_m, snr) = (1.0, 1.0, 8.0f64);
    let k = snr * snr / (8.0 * t_m * chi * chi);
    let arch = build_single_element(1.0, 1.0, 0.0, chi, k).unwrap();
    let liou = arch.liouvillian().unwrap();
    let field = fock_input(0, gaussian_envelope(1.0, 0.0, 0.0).unwrap());
    let times = grid(0.0, 5e3 * t_m, 5_001);
    let rec = simulate_trajectory(&liou, &field, &liou.ground_state(), &times, &[], &TrajectoryOptions::new(t_m, 2), 0)
        .unwrap();
    assert!(extract_clicks(&rec, 0, 1.01 * chi, t_m).unwrap().is_empty());
}
