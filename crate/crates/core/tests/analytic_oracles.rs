use proptest::prelude::*;
use ris_harq::analytic::*;
use ris_harq::channel::{compute_stats, db_to_linear, ChannelStats, PhaseConfig};
use ris_harq::montecarlo::sample_sum_gains;
use ris_harq::reference;
use ris_harq::specfun::TruncationPolicy;

const ADAPTIVE: TruncationPolicy = TruncationPolicy::Adaptive {
    tail_tolerance: 1e-12,
};
const LOS_SEED: u64 = 2021;

fn reference_stats() -> ChannelStats {
    let net = reference::network(reference::ELEMENTS_PER_PANEL, LOS_SEED).unwrap();
    let phases = PhaseConfig::tiled(&net, &reference::THETA_PATTERN).unwrap();
    compute_stats(&net, &phases).unwrap()
}

/// Empirical CDF at `x` with its binomial standard error.
fn empirical_cdf(samples: &[f64], x: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|&&s| s < x).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[test]
fn gain_cdf_matches_simulation() {
    let stats = ChannelStats::from_powers(2.0, 1.0).unwrap();
    let samples = sample_sum_gains(&stats, 1, 10_000_000, 11).unwrap();
    let (p, se) = empirical_cdf(&samples, 1.0);
    let exact = gain_cdf(&stats, 1.0, ADAPTIVE).unwrap();
    assert!(
        (p - exact).abs() <= 3.0 * se,
        "empirical {p} ± {se}, exact {exact}"
    );
}

#[test]
fn sum_gain_cdf_matches_simulation() {
    let stats = ChannelStats::from_powers(1.0, 1.0).unwrap();
    let samples = sample_sum_gains(&stats, 3, 10_000_000, 12).unwrap();
    let (p, se) = empirical_cdf(&samples, 5.0);
    let exact = sum_gain_cdf(&stats, 3, 5.0, ADAPTIVE).unwrap();
    assert!(
        (p - exact).abs() <= 3.0 * se,
        "empirical {p} ± {se}, exact {exact}"
    );
}

#[test]
fn single_round_sum_is_gain_cdf() {
    let stats = reference_stats();
    for k in 0..40 {
        let x = 0.05 * k as f64;
        assert_eq!(
            sum_gain_cdf(&stats, 1, x, ADAPTIVE).unwrap(),
            gain_cdf(&stats, x, ADAPTIVE).unwrap()
        );
        assert_eq!(
            sum_gain_cdf(&stats, 1, x, TruncationPolicy::Fixed(50)).unwrap(),
            gain_cdf(&stats, x, TruncationPolicy::Fixed(50)).unwrap()
        );
    }
}

#[test]
fn outage_decreases_with_los_power() {
    for &gnlos in &[0.1, 0.5, 2.0] {
        for &rho in &[1.0, 10.0, 300.0] {
            for scheme in Scheme::ALL {
                let mut prev = f64::INFINITY;
                for k in 0..30 {
                    let stats = ChannelStats::from_powers(0.2 * k as f64, gnlos).unwrap();
                    let p = exact_outage(&stats, scheme, 3, 2.0, rho, ADAPTIVE).unwrap();
                    assert!(p <= prev + 1e-15, "{scheme} gnlos={gnlos} rho={rho} k={k}");
                    prev = p;
                }
            }
        }
    }
}

#[test]
fn asymptote_becomes_tight() {
    let stats = reference_stats();
    for scheme in Scheme::ALL {
        let mut prev_dev = f64::INFINITY;
        let mut entered = false;
        for db in (10..=50).step_by(2) {
            let rho = db_to_linear(db as f64);
            let exact = exact_outage(&stats, scheme, 4, 4.0, rho, ADAPTIVE).unwrap();
            let asym = asymptotic_outage(&stats, scheme, 4, 4.0, rho).unwrap();
            let ratio = exact / asym;
            if (0.5..=2.0).contains(&ratio) {
                entered = true;
            }
            if entered {
                assert!(
                    (0.5..=2.0).contains(&ratio),
                    "{scheme} {db} dB: ratio {ratio}"
                );
                let dev = (ratio - 1.0).abs();
                assert!(dev <= prev_dev, "{scheme} {db} dB: {dev} after {prev_dev}");
                prev_dev = dev;
            }
        }
        assert!(entered && prev_dev < 1e-3);
    }
}

#[test]
fn fitted_diversity_matches_rounds() {
    let stats = reference_stats();
    let grid: Vec<f64> = (35..=50).map(|db| db_to_linear(db as f64)).collect();
    let window = (grid[0], *grid.last().unwrap());
    for rounds in 1..=4 {
        let mut fits = vec![];
        for scheme in Scheme::ALL {
            let harq = HarqParams::new(scheme, rounds, 4.0, grid.clone()).unwrap();
            let fit =
                fit_diversity(&exact_curve(&stats, &harq, ADAPTIVE).unwrap(), window).unwrap();
            assert!(
                (fit.diversity - rounds as f64).abs() <= 0.2,
                "{scheme} L={rounds}: {}",
                fit.diversity
            );
            fits.push(fit.diversity);
        }
        assert!((fits[0] - fits[1]).abs() <= 0.05);
    }
}

#[test]
fn fixed_fifty_meets_reference_accuracy() {
    let stats = reference_stats();
    for db in reference::snr_grid_db() {
        let rho = db_to_linear(db);
        for scheme in Scheme::ALL {
            let fixed =
                exact_outage(&stats, scheme, 4, 4.0, rho, TruncationPolicy::Fixed(50)).unwrap();
            let adaptive = exact_outage(&stats, scheme, 4, 4.0, rho, ADAPTIVE).unwrap();
            assert!((fixed - adaptive).abs() <= 1e-3);
        }
    }
}

fn stats_strategy() -> impl Strategy<Value = ChannelStats> {
    (0.0f64..20.0, 0.05f64..5.0)
        .prop_map(|(glos, gnlos)| ChannelStats::from_powers(glos, gnlos).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cdf_is_a_probability(stats in stats_strategy(), rounds in 1u32..6, x in 0.0f64..50.0, dx in 0.0f64..3.0) {
        let f = sum_gain_cdf(&stats, rounds, x, ADAPTIVE).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(sum_gain_cdf(&stats, rounds, x + dx, ADAPTIVE).unwrap() >= f - 1e-13);
    }

    #[test]
    fn cc_never_worse_than_type_i(stats in stats_strategy(), rounds in 1u32..6, rate in 0.2f64..6.0, db in -10.0f64..40.0) {
        let rho = db_to_linear(db);
        let t1 = outage_type1(&stats, rounds, rate, rho, ADAPTIVE).unwrap();
        let cc = outage_cc(&stats, rounds, rate, rho, ADAPTIVE).unwrap();
        if rounds == 1 {
            prop_assert!((t1 - cc).abs() <= 1e-12);
        } else {
            prop_assert!(cc <= t1 + 1e-14);
            if t1 > 1e-6 && t1 < 1.0 - 1e-9 {
                prop_assert!(cc < t1);
            }
        }
    }

    #[test]
    fn outage_monotone_in_snr_rate_and_rounds(stats in stats_strategy(), rounds in 1u32..5, rate in 0.2f64..6.0, db in -10.0f64..40.0) {
        let rho = db_to_linear(db);
        for scheme in Scheme::ALL {
            let p = exact_outage(&stats, scheme, rounds, rate, rho, ADAPTIVE).unwrap();
            prop_assert!(exact_outage(&stats, scheme, rounds, rate, rho * 1.3, ADAPTIVE).unwrap() <= p + 1e-13);
            prop_assert!(exact_outage(&stats, scheme, rounds, rate * 1.1, rho, ADAPTIVE).unwrap() >= p - 1e-13);
            prop_assert!(exact_outage(&stats, scheme, rounds + 1, rate, rho, ADAPTIVE).unwrap() <= p + 1e-13);
        }
    }

    #[test]
    fn rayleigh_closed_forms(gnlos in 0.05f64..5.0, rounds in 1u32..8, x in 0.0f64..40.0) {
        let stats = ChannelStats::from_powers(0.0, gnlos).unwrap();
        let y = x / gnlos;
        prop_assert!((gain_cdf(&stats, x, ADAPTIVE).unwrap() - (-(-y).exp_m1())).abs() <= 1e-10);
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..rounds {
            term *= y / j as f64;
            sum += term;
        }
        let erlang = 1.0 - (-y).exp() * sum;
        prop_assert!((sum_gain_cdf(&stats, rounds, x, ADAPTIVE).unwrap() - erlang).abs() <= 1e-10);
    }
}
