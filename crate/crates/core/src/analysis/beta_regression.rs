//! Beta regression of absolute correlations on log10 penetration.
//!
//! `y_i ~ Beta(mu_i * phi, (1 - mu_i) * phi)` with `logit(mu_i) = b0 + b1 *
//! log10(pi_i)` and a common precision `phi`. The fit maximizes the
//! log-likelihood over `(b0, b1, ln phi)` with BFGS and compares against the
//! intercept-only model by a likelihood-ratio test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};
use statrs::function::gamma::{digamma, ln_gamma};

use super::optimize::{bfgs, Settings};
use super::{pearson, AnalysisError};

/// Responses are clamped into `[RESPONSE_CLAMP, 1 - RESPONSE_CLAMP]`.
pub const RESPONSE_CLAMP: f64 = 1e-6;

const MAX_ITERATIONS: usize = 500;
const LOG_LIKELIHOOD_TOLERANCE: f64 = 1e-8;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Clamps `mu` away from {0, 1} so the shape parameters remain positive.
fn safe_mean(eta: f64) -> f64 {
    logistic(eta).clamp(1e-15, 1.0 - 1e-15)
}

/// Log-likelihood at `(b0, b1, phi)` for regressor `x` and response `y`.
pub fn beta_log_likelihood(params: [f64; 3], x: &[f64], y: &[f64]) -> f64 {
    let [b0, b1, phi] = params;
    let mut ll = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let mu = safe_mean(b0 + b1 * xi);
        let (a, b) = (mu * phi, (1.0 - mu) * phi);
        ll += ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * yi.ln() + (b - 1.0) * (1.0 - yi).ln();
    }
    ll
}

/// Analytic gradient of [`beta_log_likelihood`] with respect to
/// `(b0, b1, phi)`.
pub fn beta_log_likelihood_gradient(params: [f64; 3], x: &[f64], y: &[f64]) -> [f64; 3] {
    let [b0, b1, phi] = params;
    let mut g = [0.0; 3];
    let psi_phi = digamma(phi);
    for (&xi, &yi) in x.iter().zip(y) {
        let mu = safe_mean(b0 + b1 * xi);
        let (psi_a, psi_b) = (digamma(mu * phi), digamma((1.0 - mu) * phi));
        let (ly, l1y) = (yi.ln(), (1.0 - yi).ln());
        let d_mu = phi * ((ly - l1y) - (psi_a - psi_b));
        let d_eta = d_mu * mu * (1.0 - mu);
        g[0] += d_eta;
        g[1] += d_eta * xi;
        g[2] += psi_phi - mu * psi_a - (1.0 - mu) * psi_b + mu * ly + (1.0 - mu) * l1y;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub beta0: f64,
    pub phi: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    pub phi: f64,
    pub log_likelihood: f64,
    /// Fitted means, in input order.
    pub fitted: Vec<f64>,
    /// Squared correlation between observed and fitted responses (0 when the
    /// fitted values are constant).
    pub pseudo_r2: f64,
    pub constant: ConstantFit,
    /// `2 (ll_full - ll_const)`, referred to chi-square with 1 df.
    pub lr_statistic: f64,
    pub lr_p_value: f64,
    /// The LR statistic referred to F(1, n - 3); `None` with 3 points.
    pub f_p_value: Option<f64>,
    pub residual_df: usize,
    pub iterations: usize,
    /// Inverse observed information over `(b0, b1, phi)`, when invertible.
    pub covariance: Option<[[f64; 3]; 3]>,
}

impl BetaRegressionFit {
    pub fn mean_at(&self, log10_penetration: f64) -> f64 {
        logistic(self.beta0 + self.beta1 * log10_penetration)
    }

    /// Delta-method interval for the fitted mean at `log10_penetration`,
    /// built on the linear predictor and mapped through the logistic.
    pub fn mean_interval_at(&self, log10_penetration: f64, level: f64) -> Option<(f64, f64)> {
        let cov = self.covariance?;
        let x = log10_penetration;
        let var = cov[0][0] + 2.0 * x * cov[0][1] + x * x * cov[1][1];
        if !(var >= 0.0) {
            return None;
        }
        let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
        let eta = self.beta0 + self.beta1 * x;
        let half = z * var.sqrt();
        Some((logistic(eta - half), logistic(eta + half)))
    }
}

fn settings() -> Settings {
    Settings { max_iterations: MAX_ITERATIONS, value_tolerance: LOG_LIKELIHOOD_TOLERANCE, gradient_tolerance: 1e-5 }
}

struct Optimum {
    params: [f64; 3],
    log_likelihood: f64,
    iterations: usize,
}

/// Maximizes over `(b0, b1, ln phi)`; with `slope = false` b1 stays at 0.
/// The search runs on the intercept at the mean of `x`, which decorrelates
/// the two coefficients.
fn maximize(start: [f64; 3], x: &[f64], y: &[f64], slope: bool) -> Result<Optimum, AnalysisError> {
    let xbar = x.iter().sum::<f64>() / x.len() as f64;
    let unpack = |t: &[f64]| if slope { [t[0] - t[1] * xbar, t[1], t[2].exp()] } else { [t[0], 0.0, t[1].exp()] };
    let objective = |t: &[f64]| {
        let p = unpack(t);
        let ll = beta_log_likelihood(p, x, y);
        let g = beta_log_likelihood_gradient(p, x, y);
        let grad = if slope { vec![-g[0], xbar * g[0] - g[1], -g[2] * p[2]] } else { vec![-g[0], -g[2] * p[2]] };
        (if ll.is_finite() { -ll } else { f64::INFINITY }, grad)
    };
    let t0: Vec<f64> =
        if slope { vec![start[0] + start[1] * xbar, start[1], start[2].ln()] } else { vec![start[0], start[2].ln()] };
    let m = bfgs(objective, &t0, &settings());
    if !m.converged {
        return Err(AnalysisError::FitFailed {
            iterations: m.iterations,
            log_likelihood: -m.value,
            gradient_norm: m.gradient.iter().fold(0.0, |a: f64, b| a.max(b.abs())),
        });
    }
    Ok(Optimum { params: unpack(&m.x), log_likelihood: -m.value, iterations: m.iterations })
}

fn observed_information(params: [f64; 3], x: &[f64], y: &[f64]) -> [[f64; 3]; 3] {
    let mut info = [[0.0; 3]; 3];
    for j in 0..3 {
        let h = 1e-5 * params[j].abs().max(1.0);
        let (mut up, mut down) = (params, params);
        up[j] += h;
        down[j] -= h;
        let (gu, gd) = (beta_log_likelihood_gradient(up, x, y), beta_log_likelihood_gradient(down, x, y));
        for i in 0..3 {
            info[i][j] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let avg = 0.5 * (info[i][j] + info[j][i]);
            info[i][j] = avg;
            info[j][i] = avg;
        }
    }
    info
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !det.is_finite() || det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r1, r2) = ((j + 1) % 3, (j + 2) % 3);
            let (c1, c2) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

/// Fits the model on `(penetration, |rho|)` points.
pub fn fit_beta_regression(points: &[(f64, f64)]) -> Result<BetaRegressionFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    if let Some(&(p, _)) = points.iter().find(|(p, _)| !(*p > 0.0 && p.is_finite())) {
        return Err(AnalysisError::InvalidInput(format!("penetration {p} is not positive")));
    }
    if let Some(&(_, r)) = points.iter().find(|(_, r)| !(0.0..=1.0).contains(r)) {
        return Err(AnalysisError::InvalidInput(format!("response {r} is outside [0, 1]")));
    }
    let x: Vec<f64> = points.iter().map(|(p, _)| p.log10()).collect();
    let raw: Vec<f64> = points.iter().map(|(_, r)| *r).collect();
    let y: Vec<f64> = raw.iter().map(|r| r.clamp(RESPONSE_CLAMP, 1.0 - RESPONSE_CLAMP)).collect();

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let phi0 = if var > 0.0 { mean * (1.0 - mean) / var - 1.0 } else { f64::NAN };
    let phi0 = if phi0.is_finite() && phi0 > 0.0 { phi0 } else { 1.0 };
    let start = [logit(mean), 0.0, phi0];

    let constant = maximize(start, &x, &y, false)?;
    let mut full = maximize(start, &x, &y, true)?;
    if full.log_likelihood < constant.log_likelihood {
        if let Ok(refit) = maximize(constant.params, &x, &y, true) {
            if refit.log_likelihood > full.log_likelihood {
                full = refit;
            }
        }
        if full.log_likelihood < constant.log_likelihood {
            full = Optimum {
                params: constant.params,
                log_likelihood: constant.log_likelihood,
                iterations: full.iterations,
            };
        }
    }

    let [beta0, beta1, phi] = full.params;
    let fitted: Vec<f64> = x.iter().map(|xi| logistic(beta0 + beta1 * xi)).collect();
    let pseudo_r2 = pearson(&raw, &fitted).map_or(0.0, |r| r * r);
    let lr_statistic = (2.0 * (full.log_likelihood - constant.log_likelihood)).max(0.0);
    let lr_p_value = ChiSquared::new(1.0).expect("chi-square df").sf(lr_statistic);
    let residual_df = points.len() - 3;
    let f_p_value =
        (residual_df > 0).then(|| FisherSnedecor::new(1.0, residual_df as f64).expect("F df").sf(lr_statistic));
    let covariance = invert3(observed_information(full.params, &x, &y));

    Ok(BetaRegressionFit {
        beta0,
        beta1,
        phi,
        log_likelihood: full.log_likelihood,
        fitted,
        pseudo_r2,
        constant: ConstantFit {
            beta0: constant.params[0],
            phi: constant.params[2],
            log_likelihood: constant.log_likelihood,
        },
        lr_statistic,
        lr_p_value,
        f_p_value,
        residual_df,
        iterations: full.iterations,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution};

    fn simulate(b0: f64, b1: f64, phi: f64, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..17)
            .map(|i| {
                let p = 10f64.powf(-5.0 + 3.0 * i as f64 / 16.0);
                let mu = logistic(b0 + b1 * p.log10());
                let y = Beta::new(mu * phi, (1.0 - mu) * phi).unwrap().sample(&mut rng);
                (p, y)
            })
            .collect()
    }

    #[test]
    fn link_identity() {
        assert_eq!(logit(0.5), 0.0);
        assert_eq!(logistic(0.0), 0.5);
        for eta in [-12.0, -2.5, 0.1, 4.0, 12.0] {
            assert!((logit(logistic(eta)) - eta).abs() < 1e-6);
        }
    }

    #[test]
    fn likelihood_matches_beta_density() {
        use statrs::distribution::{Beta as SBeta, Continuous};
        let (x, y) = (vec![-4.0, -3.0, -2.5], vec![0.3, 0.55, 0.9]);
        let params = [1.0, 0.4, 12.0];
        let direct: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| {
                let mu = logistic(params[0] + params[1] * xi);
                SBeta::new(mu * params[2], (1.0 - mu) * params[2]).unwrap().ln_pdf(*yi)
            })
            .sum();
        assert!((beta_log_likelihood(params, &x, &y) - direct).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_parameters_roughly() {
        let fit = fit_beta_regression(&simulate(5.0, 0.8, 30.0, 3)).unwrap();
        assert!(fit.beta1 > 0.0);
        assert!(fit.log_likelihood >= fit.constant.log_likelihood);
        assert!(fit.fitted.iter().all(|m| *m > 0.0 && *m < 1.0));
        assert!(fit.phi > 0.0);
        assert!((0.0..=1.0).contains(&fit.pseudo_r2));
        let (lo, hi) = fit.mean_interval_at(-3.0, 0.95).unwrap();
        let mid = fit.mean_at(-3.0);
        assert!(lo < mid && mid < hi);
    }

    #[test]
    fn boundary_responses_are_clamped() {
        let mut pts = simulate(2.0, 0.5, 20.0, 9);
        pts[0].1 = 1.0;
        pts[1].1 = 0.0;
        let fit = fit_beta_regression(&pts).unwrap();
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn input_errors() {
        assert_eq!(fit_beta_regression(&[(1e-3, 0.5), (1e-2, 0.6)]).unwrap_err(), AnalysisError::TooFewPoints(2));
        assert!(fit_beta_regression(&[(0.0, 0.5), (1e-2, 0.6), (1e-3, 0.7)]).is_err());
        assert!(fit_beta_regression(&[(1e-4, 1.5), (1e-2, 0.6), (1e-3, 0.7)]).is_err());
    }

    #[test]
    fn three_points_have_no_f_test() {
        let fit = fit_beta_regression(&[(1e-5, 0.4), (1e-4, 0.6), (1e-3, 0.75)]).unwrap();
        assert_eq!(fit.residual_df, 0);
        assert!(fit.f_p_value.is_none());
    }

    #[test]
    fn invert_identity_scaled() {
        let m = [[2.0, 0.0, 0.0], [0.0, 4.0, 1.0], [0.0, 1.0, 3.0]];
        let inv = invert3(m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
