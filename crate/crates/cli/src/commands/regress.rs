//! Beta regression of |rho| on log10 penetration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mobility_core::analysis::{fit_beta_regression, BetaRegressionFit};
use mobility_core::synthgen::{log_spaced_fractions, penetration_experiment};

use super::{input_dir, prepare_output, simulate, PAIRS};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{
    cell, read_correlations, read_penetration, VersionedWriter, REGRESSION, REGRESSION_CURVE, REGRESSION_POINTS,
};

/// Points of one fit: `(label, penetration, |rho|)`.
struct Dataset {
    metric: String,
    reference: String,
    q: usize,
    points: Vec<(String, f64, f64)>,
}

fn from_files(dir: &Path, cfg: &RunConfig) -> Result<Vec<Dataset>> {
    let correlations = read_correlations(&dir.join("correlation.csv"))?;
    let penetration: BTreeMap<String, f64> =
        read_penetration(&dir.join("penetration.csv"))?.into_iter().map(|p| (p.country_code, p.penetration)).collect();
    let mut out = Vec::new();
    for &q in &cfg.regression.q {
        for (metric, index) in PAIRS {
            let (metric, reference) = (metric.to_string(), index.to_string());
            let points = correlations
                .iter()
                .filter(|c| c.q == q && c.metric == metric && c.index == reference)
                .filter_map(|c| {
                    let pi = *penetration.get(&c.country)?;
                    Some((c.country.clone(), pi, c.abs_rho?))
                })
                .collect();
            out.push(Dataset { metric, reference, q, points });
        }
    }
    Ok(out)
}

fn synthetic(cfg: &RunConfig, out: &Path) -> Result<Vec<Dataset>> {
    let world = simulate::world(cfg);
    let fractions = log_spaced_fractions(cfg.regression.synthetic_countries, cfg.regression.min_fraction);
    let mut sets = Vec::new();
    let header = ["country", "q", "fraction", "devices", "average_N", "penetration", "abs_rho_M1", "abs_rho_M2"];
    let mut w = VersionedWriter::create(
        &out.join("synthetic_penetration.csv"),
        "mobility-synthetic-penetration/1",
        &[],
        &header,
    )?;
    for &q in &cfg.regression.q {
        let exp =
            penetration_experiment(&world, &fractions, &cfg.estimation, q, cfg.seed).map_err(CliError::runtime)?;
        let mut m1 = Vec::new();
        let mut m2 = Vec::new();
        for (i, p) in exp.points.iter().enumerate() {
            let label = format!("S{:02}", i + 1);
            w.row([
                label.clone(),
                q.to_string(),
                p.fraction.to_string(),
                p.devices.to_string(),
                p.average_sample_size.to_string(),
                p.penetration.to_string(),
                cell(p.abs_rho_m1),
                cell(p.abs_rho_m2),
            ])?;
            if p.penetration > 0.0 {
                m1.extend(p.abs_rho_m1.map(|r| (label.clone(), p.penetration, r)));
                m2.extend(p.abs_rho_m2.map(|r| (label.clone(), p.penetration, r)));
            }
        }
        sets.push(Dataset { metric: "M1".into(), reference: "full_sample".into(), q, points: m1 });
        sets.push(Dataset { metric: "M2".into(), reference: "full_sample".into(), q, points: m2 });
    }
    w.finish()?;
    Ok(sets)
}

fn std_error(fit: &BetaRegressionFit, k: usize) -> Option<f64> {
    fit.covariance.map(|c| c[k][k]).filter(|v| *v >= 0.0).map(f64::sqrt)
}

pub fn run(cfg: &RunConfig, from: &Option<PathBuf>, synthetic_mode: bool) -> Result<()> {
    let out = prepare_output(cfg, "regress")?;
    let sets = if synthetic_mode { synthetic(cfg, &out)? } else { from_files(&input_dir(cfg, from), cfg)? };

    let report_header = [
        "metric",
        "index",
        "q",
        "n_points",
        "beta0",
        "beta1",
        "phi",
        "se_beta0",
        "se_beta1",
        "se_phi",
        "log_likelihood",
        "log_likelihood_constant",
        "pseudo_r2",
        "lr_statistic",
        "lr_p_value",
        "f_p_value",
        "iterations",
    ];
    let mut report = VersionedWriter::create(&out.join("regression.csv"), REGRESSION, &[], &report_header)?;
    let mut points = VersionedWriter::create(
        &out.join("regression_points.csv"),
        REGRESSION_POINTS,
        &[],
        &["metric", "index", "q", "country", "penetration", "abs_rho", "fitted"],
    )?;
    let mut curve = VersionedWriter::create(
        &out.join("regression_curve.csv"),
        REGRESSION_CURVE,
        &[("level", cfg.regression.level.to_string())],
        &["metric", "index", "q", "log10_penetration", "penetration", "fitted", "lo", "hi"],
    )?;
    let mut summary = String::new();
    let mut fitted_any = false;
    for set in &sets {
        let key = [set.metric.clone(), set.reference.clone(), set.q.to_string()];
        let xy: Vec<(f64, f64)> = set.points.iter().map(|p| (p.1, p.2)).collect();
        let fit = match fit_beta_regression(&xy) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{} vs {} q={}: {e}", set.metric, set.reference, set.q);
                writeln!(summary, "{} vs {} (q = {}): not fitted: {e}\n", set.metric, set.reference, set.q).ok();
                continue;
            }
        };
        fitted_any = true;
        let mut row = key.to_vec();
        row.extend([
            xy.len().to_string(),
            fit.beta0.to_string(),
            fit.beta1.to_string(),
            fit.phi.to_string(),
            cell(std_error(&fit, 0)),
            cell(std_error(&fit, 1)),
            cell(std_error(&fit, 2)),
            fit.log_likelihood.to_string(),
            fit.constant.log_likelihood.to_string(),
            fit.pseudo_r2.to_string(),
            fit.lr_statistic.to_string(),
            fit.lr_p_value.to_string(),
            cell(fit.f_p_value),
            fit.iterations.to_string(),
        ]);
        report.row(row)?;
        for ((label, pi, rho), f) in set.points.iter().zip(&fit.fitted) {
            let mut row = key.to_vec();
            row.extend([label.clone(), pi.to_string(), rho.to_string(), f.to_string()]);
            points.row(row)?;
        }
        let xs: Vec<f64> = xy.iter().map(|p| p.0.log10()).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 0.25;
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.25;
        let steps = cfg.regression.curve_points.max(2) - 1;
        for k in 0..=steps {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            let band = fit.mean_interval_at(x, cfg.regression.level);
            let mut row = key.to_vec();
            row.extend([
                x.to_string(),
                10f64.powf(x).to_string(),
                fit.mean_at(x).to_string(),
                cell(band.map(|b| b.0)),
                cell(band.map(|b| b.1)),
            ]);
            curve.row(row)?;
        }
        write_summary(&mut summary, set, &fit, xy.len());
    }
    report.finish()?;
    points.finish()?;
    curve.finish()?;
    std::fs::write(out.join("regression_summary.txt"), &summary)?;
    print!("{summary}");
    if !fitted_any {
        return Err(CliError::runtime("no regression could be fitted"));
    }
    Ok(())
}

fn write_summary(s: &mut String, set: &Dataset, fit: &BetaRegressionFit, n: usize) {
    let se = |k| std_error(fit, k).map_or("n/a".to_owned(), |v| format!("{v:.4}"));
    writeln!(s, "{} vs {} (q = {}), {n} points", set.metric, set.reference, set.q).ok();
    writeln!(s, "  logit(mu) = {:.4} + {:.4} * log10(penetration)", fit.beta0, fit.beta1).ok();
    writeln!(s, "  se(beta0) = {}, se(beta1) = {}, phi = {:.3} (se {})", se(0), se(1), fit.phi, se(2)).ok();
    writeln!(s, "  log-likelihood {:.4}, constant model {:.4}", fit.log_likelihood, fit.constant.log_likelihood).ok();
    writeln!(s, "  pseudo-R2 {:.4}", fit.pseudo_r2).ok();
    let f = fit.f_p_value.map_or("n/a".to_owned(), |p| format!("{p:.4}"));
    writeln!(s, "  LR {:.4}, p = {:.4} (chi2), p = {f} (F)\n", fit.lr_statistic, fit.lr_p_value).ok();
}
