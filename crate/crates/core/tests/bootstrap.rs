use mobility_core::exec;
use mobility_core::ingest::sanitize;
use mobility_core::metrics::{build_panels, prepare_device_days, CountryPanel};
use mobility_core::smoothing::smooth;
use mobility_core::synthgen::{generate, SyntheticWorldConfig};
use mobility_core::uncertainty::{annotate, bootstrap_replicates, BootstrapConfig};

fn panel() -> CountryPanel {
    let cfg = SyntheticWorldConfig { n_agents: 80, days: 10, seed: 4, ..Default::default() };
    let bundle = generate(&cfg).unwrap();
    let days = prepare_device_days(&sanitize(bundle.records).0, &bundle.regions);
    build_panels(&days, &bundle.regions, &cfg.truth_params, &[cfg.country_code.clone()], &cfg.dates())
        .unwrap()
        .remove(0)
}

#[test]
fn intervals_do_not_depend_on_scheduling() {
    let p = panel();
    let cfg = BootstrapConfig { iterations: 200, seed: 9, ..Default::default() };
    let mut par = p.daily_metrics();
    annotate(&mut par, &p, 1, &cfg).unwrap();
    let mut seq = p.daily_metrics();
    exec::sequential(|| annotate(&mut seq, &p, 1, &cfg)).unwrap();
    assert_eq!(par, seq);
    assert!(par.iter().all(|m| m.m1_ci.is_some()));
}

#[test]
fn intervals_bracket_estimates_and_narrow_with_pooling() {
    let p = panel();
    let cfg = BootstrapConfig { iterations: 400, seed: 1, ..Default::default() };
    let mut daily = p.daily_metrics();
    annotate(&mut daily, &p, 1, &cfg).unwrap();
    let mut weekly = smooth(&p, 7).unwrap().metrics;
    annotate(&mut weekly, &p, 7, &cfg).unwrap();
    for m in daily.iter().chain(&weekly).filter(|m| m.m1_km.is_some()) {
        let (ci1, ci2) = (m.m1_ci.unwrap(), m.m2_ci.unwrap());
        assert!(ci1.low <= ci1.high && ci2.low <= ci2.high);
        assert!(ci1.contains(m.m1_km.unwrap()), "day {} {:?} {:?}", m.day, m.m1_km, ci1);
    }
    let width = |ms: &[mobility_core::CountryDailyMetric]| {
        let w: Vec<f64> = ms.iter().filter_map(|m| m.m1_ci.map(|c| c.width())).collect();
        w.iter().sum::<f64>() / w.len() as f64
    };
    assert!(width(&weekly) < width(&daily));
}

#[test]
fn replicate_streams_depend_on_seed_only() {
    let p = panel();
    let a = bootstrap_replicates(&p, 3, 1, &BootstrapConfig { iterations: 50, seed: 1, ..Default::default() }).unwrap();
    let b = bootstrap_replicates(&p, 3, 1, &BootstrapConfig { iterations: 80, seed: 1, ..Default::default() }).unwrap();
    let c = bootstrap_replicates(&p, 3, 1, &BootstrapConfig { iterations: 50, seed: 2, ..Default::default() }).unwrap();
    assert_eq!(a[..], b[..50]);
    assert_ne!(a, c);
}
