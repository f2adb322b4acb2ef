use num_complex::Complex64;
use ris_harq::analytic::{exact_outage, Scheme};
use ris_harq::channel::{compute_stats, db_to_linear, DirectLink, NetworkConfig, PhaseConfig};
use ris_harq::montecarlo::*;
use ris_harq::reference;
use ris_harq::specfun::TruncationPolicy;

const LOS_SEED: u64 = 2021;

fn reference_setup() -> (NetworkConfig, PhaseConfig) {
    let net = reference::network(reference::ELEMENTS_PER_PANEL, LOS_SEED).unwrap();
    let phases = PhaseConfig::tiled(&net, &reference::THETA_PATTERN).unwrap();
    (net, phases)
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn channel_moments_match_stats() {
    let (net, phases) = reference_setup();
    let stats = compute_stats(&net, &phases).unwrap();
    let sampler = ChannelSampler::new(&net, &phases).unwrap();
    let n = 1_000_000u64;
    let draws: Vec<Complex64> = (0..n)
        .map(|t| sampler.sample(&mut round_rng(5, t, 0)))
        .collect();
    let mean = draws.iter().sum::<Complex64>() / n as f64;
    let tol = 4.0 * (stats.psi_gnlos / n as f64).sqrt();
    assert!(
        (mean.re - stats.mu.re).abs() <= tol,
        "{mean} vs {}",
        stats.mu
    );
    assert!(
        (mean.im - stats.mu.im).abs() <= tol,
        "{mean} vs {}",
        stats.mu
    );
    let var = draws.iter().map(|h| (h - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    assert!(
        (var / stats.psi_gnlos - 1.0).abs() <= 0.02,
        "{var} vs {}",
        stats.psi_gnlos
    );
}

#[test]
fn free_function_sampler_draws_the_same_channel() {
    let (net, phases) = reference_setup();
    let sampler = ChannelSampler::new(&net, &phases).unwrap();
    let a = sampler.sample(&mut round_rng(1, 2, 3));
    let b = sample_equivalent_channel(&net, &phases, &mut round_rng(1, 2, 3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rayleigh_type_i_matches_closed_form() {
    let net = NetworkConfig::new(DirectLink::new(1.0, 0.0, 0.0).unwrap(), vec![]);
    let plan = SimulationPlan::new(Scheme::TypeI, 2, 1.0, 1.0, 1_000_000, 99).unwrap();
    let est = estimate_outage(&net, &PhaseConfig::zeros(&net), &plan).unwrap();
    let exact = (1.0 - (-1.0f64).exp()).powi(2);
    assert!(
        (est.p_hat - exact).abs() <= 3.0 * est.stderr,
        "{} ± {} vs {exact}",
        est.p_hat,
        est.stderr
    );
    assert!((exact - 0.399576).abs() < 1e-6);
}

#[test]
fn reference_network_matches_exact_outage() {
    let (net, phases) = reference_setup();
    let stats = compute_stats(&net, &phases).unwrap();
    for &db in &[12.0, 16.0] {
        let rho = db_to_linear(db);
        for scheme in Scheme::ALL {
            let plan = SimulationPlan::new(scheme, 4, 4.0, rho, 400_000, 17).unwrap();
            let est = estimate_outage(&net, &phases, &plan).unwrap();
            let exact =
                exact_outage(&stats, scheme, 4, 4.0, rho, TruncationPolicy::default()).unwrap();
            assert!(
                (est.p_hat - exact).abs() <= 3.0 * est.stderr,
                "{scheme} {db} dB: {} ± {} vs {exact}",
                est.p_hat,
                est.stderr
            );
        }
    }
}

#[test]
fn estimates_do_not_depend_on_workers_or_chunking() {
    let (net, phases) = reference_setup();
    let plan = SimulationPlan::new(
        Scheme::ChaseCombining,
        4,
        4.0,
        db_to_linear(14.0),
        200_003,
        7,
    )
    .unwrap();
    let one = with_threads(1, || estimate_outage(&net, &phases, &plan).unwrap());
    let four = with_threads(4, || estimate_outage(&net, &phases, &plan).unwrap());
    let rechunked = estimate_outage(&net, &phases, &plan.with_chunk_size(1000).unwrap()).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.p_hat.to_bits(), rechunked.p_hat.to_bits());
    assert_eq!(one, estimate_outage(&net, &phases, &plan).unwrap());
}

#[test]
fn shared_draws_respect_scheme_and_round_ordering() {
    let (net, phases) = reference_setup();
    let rho = db_to_linear(14.0);
    let plan = SimulationPlan::new(Scheme::TypeI, 4, 4.0, rho, 100_000, 23).unwrap();
    let counts = shared_outage_counts(&net, &phases, &plan).unwrap();
    for l in 0..4 {
        assert!(counts.cc[l] <= counts.type_i[l]);
        if l > 0 {
            assert!(counts.type_i[l] <= counts.type_i[l - 1]);
            assert!(counts.cc[l] <= counts.cc[l - 1]);
        }
    }
    assert_eq!(counts.type_i[0], counts.cc[0]);

    // Early termination sees exactly the same draws.
    for scheme in Scheme::ALL {
        let p = SimulationPlan { scheme, ..plan };
        let est = estimate_outage(&net, &phases, &p).unwrap();
        let shared = match scheme {
            Scheme::TypeI => counts.type_i[3],
            Scheme::ChaseCombining => counts.cc[3],
        };
        assert_eq!(est.outages, shared);
    }

    // Per trial: a CC outage implies a Type-I outage.
    let sampler = ChannelSampler::new(&net, &phases).unwrap();
    let threshold = 15.0 / rho;
    for trial in 0..20_000 {
        let g = sampler.trial_gains(23, trial, 4);
        let t1 = g.iter().all(|&x| x < threshold);
        let cc = g.iter().sum::<f64>() < threshold;
        assert!(!cc || t1);
        let snr: Vec<f64> = g.iter().map(|x| x * rho).collect();
        assert_eq!(
            accumulated_information(&snr, Scheme::TypeI).unwrap() < 4.0,
            t1
        );
    }
}

#[test]
fn sum_gain_samples_are_reproducible() {
    let stats = compute_stats(&reference_setup().0, &reference_setup().1).unwrap();
    let a = with_threads(1, || sample_sum_gains(&stats, 3, 50_001, 4).unwrap());
    let b = with_threads(3, || sample_sum_gains(&stats, 3, 50_001, 4).unwrap());
    assert_eq!(a.len(), 50_001);
    assert_eq!(a, b);
}
