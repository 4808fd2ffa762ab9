use mobility_core::analysis::{beta_log_likelihood, beta_log_likelihood_gradient, fit_beta_regression, logistic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

fn simulate(rng: &mut ChaCha8Rng, n: usize, b0: f64, b1: f64, phi: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-5.0..-2.0);
            let mu = logistic(b0 + b1 * x);
            let y = Beta::new(mu * phi, (1.0 - mu) * phi).unwrap().sample(rng);
            (10f64.powf(x), y)
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = simulate(&mut rng, 17, 2.0, 0.5, 15.0);
    let x: Vec<f64> = data.iter().map(|p| p.0.log10()).collect();
    let y: Vec<f64> = data.iter().map(|p| p.1).collect();
    for _ in 0..50 {
        let p = [rng.random_range(-3.0..5.0), rng.random_range(-1.0..2.0), rng.random_range(1.0..60.0)];
        let g = beta_log_likelihood_gradient(p, &x, &y);
        for k in 0..3 {
            let h = 1e-5 * p[k].abs().max(1.0);
            let (mut up, mut dn) = (p, p);
            up[k] += h;
            dn[k] -= h;
            let fd = (beta_log_likelihood(up, &x, &y) - beta_log_likelihood(dn, &x, &y)) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{p:?} k={k}: {} vs {fd}", g[k]);
        }
    }
}

#[test]
fn recovers_simulated_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut e0, mut e1) = (Vec::new(), Vec::new());
    for _ in 0..30 {
        let fit = fit_beta_regression(&simulate(&mut rng, 120, 3.0, 0.8, 40.0)).unwrap();
        e0.push((fit.beta0 - 3.0).abs());
        e1.push((fit.beta1 - 0.8).abs());
        assert!(fit.log_likelihood >= fit.constant.log_likelihood);
        assert!(fit.lr_p_value < 0.05);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut e0) <= 0.15, "beta0 median error {}", median(&mut e0));
    assert!(median(&mut e1) <= 0.15, "beta1 median error {}", median(&mut e1));
}
