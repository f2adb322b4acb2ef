use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_harq::analytic::{asymptotic_outage, exact_outage, HarqParams, Scheme};
use ris_harq::channel::*;
use ris_harq::optimizer::*;
use ris_harq::reference;
use ris_harq::specfun::TruncationPolicy;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

#[test]
fn optimum_beats_random_configurations() {
    let net = reference::network(reference::ELEMENTS_PER_PANEL, 2021).unwrap();
    let sol = optimal_phases(&net).unwrap();
    assert!(rel_close(
        sol.psi_glos_achieved,
        net.los_upper_bound(),
        1e-12
    ));
    assert!(sol.gap <= 1e-10 * sol.upper_bound);
    for seed in 0..10_000u64 {
        let random = compute_stats(&net, &PhaseConfig::random(&net, seed)).unwrap();
        assert!(random.psi_glos < sol.psi_glos_achieved, "seed {seed}");
    }
}

#[test]
fn shifting_the_direct_phase_shifts_the_optimum() {
    let net = reference::network(4, 8).unwrap();
    let base = optimal_phases(&net).unwrap();
    let c = 1.1;
    let mut shifted = net.clone();
    shifted.direct =
        DirectLink::new(net.direct.beta, net.direct.kappa, net.direct.los_phase + c).unwrap();
    let moved = optimal_phases(&shifted).unwrap();
    for (a, b) in base
        .phases
        .thetas()
        .iter()
        .flatten()
        .zip(moved.phases.thetas().iter().flatten())
    {
        let d = wrap_phase(b - a - c);
        assert!(d.min(TAU - d) < 1e-12);
    }
    assert!(rel_close(
        moved.psi_glos_achieved,
        base.psi_glos_achieved,
        1e-12
    ));
}

#[test]
fn optimum_minimizes_both_asymptotes_and_exact_outage() {
    let net = reference::network(4, 31).unwrap();
    let opt = compute_stats(&net, &optimal_phases(&net).unwrap().phases).unwrap();
    let policy = TruncationPolicy::default();
    for seed in 0..200u64 {
        let other = compute_stats(&net, &PhaseConfig::random(&net, seed)).unwrap();
        for scheme in Scheme::ALL {
            for &db in &[10.0, 20.0, 35.0] {
                let rho = db_to_linear(db);
                assert!(
                    asymptotic_outage(&opt, scheme, 4, 4.0, rho).unwrap()
                        <= asymptotic_outage(&other, scheme, 4, 4.0, rho).unwrap()
                );
                assert!(
                    exact_outage(&opt, scheme, 4, 4.0, rho, policy).unwrap()
                        <= exact_outage(&other, scheme, 4, 4.0, rho, policy).unwrap() + 1e-15
                );
            }
        }
    }
}

#[test]
fn strategy_ordering_on_reference_network() {
    let net = reference::network(4, 2021).unwrap();
    let grid: Vec<f64> = reference::snr_grid_db()
        .into_iter()
        .map(db_to_linear)
        .collect();
    for scheme in Scheme::ALL {
        let harq = HarqParams::new(scheme, 4, 4.0, grid.clone()).unwrap();
        let cmp = compare_strategies(&net, &harq, TruncationPolicy::default(), 5).unwrap();
        let opt = cmp.curve("optimal").unwrap();
        for label in ["fixed", "random"] {
            let other = cmp.curve(label).unwrap();
            assert!(opt.psi_glos >= other.psi_glos);
            for (a, b) in opt.curve.p_out().zip(other.curve.p_out()) {
                assert!(a <= b, "{scheme} {label}");
            }
        }
    }
}

#[test]
fn random_strategy_depends_on_seed() {
    let net = reference::network(4, 2021).unwrap();
    let grid: Vec<f64> = (0..=30)
        .step_by(5)
        .map(|d| db_to_linear(d as f64))
        .collect();
    let harq = HarqParams::new(Scheme::TypeI, 4, 4.0, grid).unwrap();
    let a = compare_strategies(&net, &harq, TruncationPolicy::default(), 1).unwrap();
    let b = compare_strategies(&net, &harq, TruncationPolicy::default(), 2).unwrap();
    let (ra, rb) = (a.curve("random").unwrap(), b.curve("random").unwrap());
    assert_ne!(ra.curve, rb.curve);
    let opt: Vec<f64> = a.curve("optimal").unwrap().curve.p_out().collect();
    for r in [ra, rb] {
        for (o, p) in opt.iter().zip(r.curve.p_out()) {
            assert!(*o <= p);
        }
    }
}

#[test]
fn phase_independent_network_makes_strategies_coincide() {
    // No LoS on the reflected hop: the phases cannot matter.
    let panel = RisPanel::aligned(1, 0.5, 0.5, 0.0).unwrap();
    let net = NetworkConfig::new(DirectLink::new(1.0, 1.0, 0.0).unwrap(), vec![panel]);
    let harq = HarqParams::new(Scheme::ChaseCombining, 2, 1.0, vec![1.0, 10.0, 100.0]).unwrap();
    let cmp = compare_strategies(&net, &harq, TruncationPolicy::default(), 3).unwrap();
    let curves: Vec<Vec<f64>> = cmp
        .curves
        .iter()
        .map(|c| c.curve.p_out().collect())
        .collect();
    for c in &curves[1..] {
        for (a, b) in curves[0].iter().zip(c) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    // All-zero LoS phases: the optimum is θ = 0, same as a zero fixed shift.
    let aligned = NetworkConfig::new(
        DirectLink::new(1.0, 1.0, 0.0).unwrap(),
        vec![RisPanel::aligned(1, 0.5, 0.5, 2.0).unwrap()],
    );
    assert_eq!(
        optimal_phases(&aligned).unwrap().phases,
        PhaseStrategy::Fixed(0.0).phases(&aligned).unwrap()
    );
}

/// Seeded random networks of varying size and link quality.
fn random_network(seed: u64) -> NetworkConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let los = LosPhaseSeed(seed);
    let direct = DirectLink::new(
        rng.random_range(0.01..1.0),
        rng.random_range(0.0..5.0),
        los.direct(),
    )
    .unwrap();
    let k = rng.random_range(1..5);
    let panels = (0..k)
        .map(|i| {
            let n = rng.random_range(1..9);
            let (sr, rd) = los.panel(i, n);
            RisPanel::new(
                rng.random_range(0.01..1.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.0..5.0),
                sr,
                rd,
            )
            .unwrap()
        })
        .collect();
    NetworkConfig::new(direct, panels)
}

#[test]
fn closed_form_optimum_attains_bound_on_random_networks() {
    for seed in 0..20 {
        let net = random_network(seed);
        let sol = optimal_phases(&net).unwrap();
        assert!(
            rel_close(sol.psi_glos_achieved, net.los_upper_bound(), 1e-12),
            "seed {seed}"
        );
        assert!(sol
            .phases
            .thetas()
            .iter()
            .flatten()
            .all(|t| (0.0..TAU).contains(t)));
        let stats = compute_stats(&net, &sol.phases).unwrap();
        let d = wrap_phase(stats.mu.arg() - net.direct.los_phase);
        assert!(d.min(TAU - d) < 1e-9 || net.direct.los_amplitude() == 0.0);
    }
}
