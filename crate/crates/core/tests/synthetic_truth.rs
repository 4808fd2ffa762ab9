use mobility_core::ingest::sanitize;
use mobility_core::metrics::{build_panels, prepare_device_days, CountryDailyMetric};
use mobility_core::synthgen::{generate, DailyProfile, JitterMode, SyntheticBundle, SyntheticWorldConfig};

fn estimate(cfg: &SyntheticWorldConfig, bundle: SyntheticBundle) -> (Vec<CountryDailyMetric>, SyntheticBundle) {
    let (records, _) = sanitize(bundle.records.clone());
    let days = prepare_device_days(&records, &bundle.regions);
    let panel = build_panels(&days, &bundle.regions, &cfg.truth_params, &[cfg.country_code.clone()], &cfg.dates())
        .unwrap()
        .remove(0);
    (panel.daily_metrics(), bundle)
}

#[test]
fn noise_free_full_penetration_recovers_truth() {
    let cfg = SyntheticWorldConfig {
        n_agents: 50,
        days: 30,
        uncertainty_choices_m: vec![0.001],
        jitter: JitterMode::None,
        seed: 11,
        ..Default::default()
    };
    let (metrics, bundle) = estimate(&cfg, generate(&cfg).unwrap());
    let mut moving_days = 0;
    for (m, t) in metrics.iter().zip(&bundle.truth) {
        assert_eq!(m.date, t.date);
        let (e1, t1) = (m.m1_km.unwrap(), t.m1_true.unwrap());
        assert!((e1 - t1).abs() <= 1e-9, "day {}: {e1} vs {t1}", m.day);
        assert!((m.m2_fraction.unwrap() - t.m2_true.unwrap()).abs() <= 1e-12, "day {}", m.day);
        moving_days += usize::from(t.agents_moving > 0);
    }
    assert!(moving_days > 20);
}

fn short_trip_world(r: f64) -> SyntheticWorldConfig {
    let mut cfg = SyntheticWorldConfig {
        n_agents: 60,
        days: 120,
        travel_median_km: DailyProfile::Constant(0.03),
        travel_sigma: 1.0,
        seed: 12,
        ..Default::default()
    };
    cfg.truth_params.uncertainty_multiplier = r;
    cfg
}

fn mean_bias(cfg: &SyntheticWorldConfig) -> (f64, f64) {
    let (metrics, bundle) = estimate(cfg, generate(cfg).unwrap());
    let est: Vec<f64> = metrics.iter().filter_map(|m| m.m1_km).collect();
    let truth: Vec<f64> = bundle.truth.iter().filter_map(|t| t.m1_true).collect();
    assert_eq!(est.len(), cfg.days);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&est), mean(&truth))
}

#[test]
fn wide_gate_biases_distance_low() {
    let (est, truth) = mean_bias(&short_trip_world(3.0));
    assert!(est < truth, "estimate {est} truth {truth}");
}

#[test]
fn one_sigma_gate_leaks_noise_on_short_trips() {
    // Two independent one-sigma errors exceed the sum of the radii in about
    // a third of the hops, so short trips come out longer than they were.
    let (est, truth) = mean_bias(&short_trip_world(1.0));
    assert!(est > truth, "estimate {est} truth {truth}");
}

#[test]
fn kilometre_trips_are_nearly_unbiased() {
    let cfg = SyntheticWorldConfig { n_agents: 60, days: 100, seed: 13, ..Default::default() };
    let (metrics, bundle) = estimate(&cfg, generate(&cfg).unwrap());
    for (m, t) in metrics.iter().zip(&bundle.truth) {
        let (e, t) = (m.m1_km.unwrap(), t.m1_true.unwrap());
        assert!((e - t).abs() <= 1e-2 * t.max(1.0), "day {}: {e} vs {t}", m.day);
    }
}

#[test]
fn written_bundle_is_byte_identical_for_a_seed() {
    let cfg = SyntheticWorldConfig { n_agents: 30, days: 4, ..Default::default() };
    let dirs = [std::env::temp_dir().join("synth_bundle_a"), std::env::temp_dir().join("synth_bundle_b")];
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d);
        generate(&cfg).unwrap().write_dir(d).unwrap();
    }
    for f in ["observations.csv", "regions.geojson", "truth.csv", "reference.csv"] {
        let a = std::fs::read(dirs[0].join(f)).unwrap();
        let b = std::fs::read(dirs[1].join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
    let parsed =
        mobility_core::ingest::parse_observations(std::fs::File::open(dirs[0].join("observations.csv")).unwrap())
            .unwrap();
    assert!(parsed.errors.is_empty());
    assert_eq!(parsed.records, generate(&cfg).unwrap().records);
}
