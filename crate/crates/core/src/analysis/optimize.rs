//! Small dense BFGS minimizer with Armijo backtracking.

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Settings {
    pub max_iterations: usize,
    /// Convergence on the absolute change of the objective.
    pub value_tolerance: f64,
    /// Gradient infinity norm that must also hold at convergence. Once the
    /// line search stalls at rounding level it is taken relative to the
    /// objective value.
    pub gradient_tolerance: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the objective and its gradient. Non-finite
/// objective values are treated as +inf by the line search.
pub(crate) fn bfgs<F>(f: F, start: &[f64], settings: &Settings) -> Minimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = start.len();
    let identity = |h: &mut Vec<Vec<f64>>| {
        for (i, row) in h.iter_mut().enumerate() {
            row.iter_mut().enumerate().for_each(|(j, v)| *v = if i == j { 1.0 } else { 0.0 });
        }
    };
    let mut h = vec![vec![0.0; n]; n];
    identity(&mut h);
    let mut x = start.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut iterations = 0;
    // Whether `h` was reset since the last step that lowered the objective.
    let mut fresh = true;

    while iterations < settings.max_iterations {
        iterations += 1;
        if inf_norm(&g) < settings.gradient_tolerance * 1e-3 {
            return Minimum { x, value: fx, gradient: g, iterations, converged: true };
        }
        let mut dir: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            identity(&mut h);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let stalled = accepted.as_ref().is_none_or(|(_, ft, _)| *ft >= fx);
        if stalled {
            if fresh {
                // Not even steepest descent lowers the objective: stationary
                // to working precision.
                let converged = inf_norm(&g) < settings.gradient_tolerance * fx.abs().max(1.0);
                return Minimum { x, value: fx, gradient: g, iterations, converged };
            }
            identity(&mut h);
            fresh = true;
            continue;
        }
        let (x_new, f_new, g_new) = accepted.expect("step accepted");
        fresh = false;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let change = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if change < settings.value_tolerance && inf_norm(&g) < settings.gradient_tolerance {
            return Minimum { x, value: fx, gradient: g, iterations, converged: true };
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Minimum { x, value: fx, gradient: g, iterations, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let m =
            bfgs(f, &[-1.2, 1.0], &Settings { max_iterations: 500, value_tolerance: 1e-14, gradient_tolerance: 1e-6 });
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }
}
