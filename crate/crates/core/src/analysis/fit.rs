//! Weighted least-squares fit of `A·exp(-(x-μ)²/(2s²)) + b` to a binned
//! profile (Levenberg–Marquardt, Poisson weights).

use nalgebra::{Matrix4, Vector4};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub background: f64,
    /// Standard error of `center` from the inverse normal matrix.
    pub center_err: f64,
    pub total: f64,
}

const MAX_ITER: usize = 200;

fn model(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (a, mu, s, b) = (p[0], p[1], p[2], p[3]);
    let u = (x - mu) / s;
    let e = (-0.5 * u * u).exp();
    let grad = Vector4::new(e, a * e * u / s, a * e * u * u / s, 1.0);
    (a * e + b, grad)
}

fn chi2(p: &Vector4<f64>, xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let r = y - model(p, x).0;
            w * r * r
        })
        .sum()
}

fn normal_equations(
    p: &Vector4<f64>,
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let (f, g) = model(p, x);
        jtj += w * g * g.transpose();
        jtr += w * (y - f) * g;
    }
    (jtj, jtr)
}

/// Fits a Gaussian plus constant to `(xs, ys)`. Returns a reason string on
/// failure.
pub fn fit_gaussian(xs: &[f64], ys: &[f64]) -> Result<GaussianFit, String> {
    let total: f64 = ys.iter().sum();
    let occupied = ys.iter().filter(|&&y| y > 0.0).count();
    if total < 3.0 || occupied < 3 {
        return Err(format!("too few counts to fit ({total} counts in {occupied} bins)"));
    }
    let mean = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / total;
    let var = xs.iter().zip(ys).map(|(x, y)| y * (x - mean).powi(2)).sum::<f64>() / total;
    let floor = ys.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let peak = ys.iter().cloned().fold(0.0, f64::max);
    let mut p = Vector4::new(peak - floor, mean, var.sqrt().max(0.5), floor);
    let ws: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();

    let mut lambda = 1e-3;
    let mut current = chi2(&p, xs, ys, &ws);
    for _ in 0..MAX_ITER {
        let (jtj, jtr) = normal_equations(&p, xs, ys, &ws);
        let mut damped = jtj;
        for i in 0..4 {
            damped[(i, i)] *= 1.0 + lambda;
        }
        let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        let next = chi2(&trial, xs, ys, &ws);
        if next.is_finite() && next <= current && trial[2] > 0.0 {
            let converged = (current - next) <= 1e-12 * current.max(1.0);
            p = trial;
            current = next;
            lambda = (lambda / 10.0).max(1e-12);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    let (jtj, _) = normal_equations(&p, xs, ys, &ws);
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| "singular normal matrix at solution".to_string())?;
    let fit = GaussianFit {
        amplitude: p[0],
        center: p[1],
        sigma: p[2].abs(),
        background: p[3],
        center_err: cov[(1, 1)].max(0.0).sqrt(),
        total,
    };
    if !(fit.center.is_finite() && fit.sigma.is_finite() && fit.amplitude.is_finite()) {
        return Err("fit did not converge to finite parameters".into());
    }
    if fit.sigma <= 0.0 || p[2] <= 0.0 {
        return Err(format!("non-positive width {}", p[2]));
    }
    if fit.amplitude <= 0.0 {
        return Err("no peak above background".into());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_noiseless_profile() {
        let xs: Vec<f64> = (0..32).map(f64::from).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 400.0 * (-0.5 * ((x - 13.3) / 4.2_f64).powi(2)).exp() + 2.0)
            .collect();
        let f = fit_gaussian(&xs, &ys).unwrap();
        assert!((f.center - 13.3).abs() < 1e-6);
        assert!((f.sigma - 4.2).abs() < 1e-6);
        assert!((f.background - 2.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_profile_still_centered() {
        // peak near the array edge: moments would be biased, the fit is not
        let xs: Vec<f64> = (0..32).map(f64::from).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1000.0 * (-0.5 * ((x - 28.0) / 4.17_f64).powi(2)).exp())
            .collect();
        let f = fit_gaussian(&xs, &ys).unwrap();
        assert!((f.center - 28.0).abs() < 1e-6);
    }

    #[test]
    fn empty_profile_fails() {
        let xs: Vec<f64> = (0..32).map(f64::from).collect();
        assert!(fit_gaussian(&xs, &vec![0.0; 32]).is_err());
        let mut one = vec![0.0; 32];
        one[4] = 10.0;
        assert!(fit_gaussian(&xs, &one).is_err());
    }
}
