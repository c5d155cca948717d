//! Least-squares rate extraction from recorded series.

use super::{AnalysisError, Quantity, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    /// Decay rate, i.e. minus the slope of `log y` against `t`.
    pub rate: f64,
    pub r2: f64,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a flat series is fitted perfectly by the flat line
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * (1.0 + my * my) * n {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    LineFit { slope, intercept, r2 }
}

fn window_points(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let (a, b) = window;
    let (ts, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= a && ti <= b)
        .map(|(&ti, &yi)| (ti, yi))
        .unzip();
    if ts.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints {
            got: ts.len(),
            window,
        });
    }
    if let Some(&bad) = ys.iter().find(|&&v| !(v > 0.0)) {
        return Err(AnalysisError::NonPositive(bad));
    }
    Ok((ts, ys))
}

/// Fit of `log y` against `log t` for samples with `t` in the window.
pub fn fit_power_law(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<LineFit, AnalysisError> {
    let (ts, ys) = window_points(t, y, window)?;
    if let Some(&bad) = ts.iter().find(|&&v| !(v > 0.0)) {
        return Err(AnalysisError::NonPositive(bad));
    }
    let lx: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    Ok(least_squares(&lx, &ly))
}

/// Fit of `log y` against `t`.
pub fn fit_exponential(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<ExpFit, AnalysisError> {
    let (ts, ys) = window_points(t, y, window)?;
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let fit = least_squares(&ts, &ly);
    Ok(ExpFit {
        rate: -fit.slope,
        r2: fit.r2,
    })
}

pub fn fit_power_rate(series: &TimeSeries, q: Quantity, window: (f64, f64)) -> Result<LineFit, AnalysisError> {
    fit_power_law(&series.times(), &series.column(q), window)
}

/// Exponential rate of `‖u − ū‖∞` over the window.
pub fn fit_exp_rate(series: &TimeSeries, window: (f64, f64)) -> Result<ExpFit, AnalysisError> {
    fit_exponential(&series.times(), &series.column(Quantity::DeviationFromMean), window)
}

/// Time window spanned by the records whose `q` value lies in `[lo, hi]`.
pub fn window_where(series: &TimeSeries, q: Quantity, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let hits: Vec<f64> = series
        .records()
        .iter()
        .filter(|r| {
            let v = r.get(q);
            v >= lo && v <= hi
        })
        .map(|r| r.t)
        .collect();
    Some((*hits.first()?, *hits.last()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let t = log_grid(1e-3, 10.0, 40);
        let y: Vec<f64> = t.iter().map(|v| v.powf(-0.5)).collect();
        let f = fit_power_law(&t, &y, (0.0, f64::INFINITY)).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let t = log_grid(1.0, 100.0, 10);
        let y = vec![2.5; 10];
        let f = fit_power_law(&t, &y, (0.0, 1e9)).unwrap();
        assert!(f.slope.abs() < 1e-12);
        let e = fit_exponential(&t, &y, (0.0, 1e9)).unwrap();
        assert!(e.rate.abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let t = log_grid(1e-4, 1e2, 60);
        let y: Vec<f64> = t
            .iter()
            .map(|v| 3.0 * v.powf(-1.0 / 3.0) * (1.0 + 0.01 * v.ln().sin()))
            .collect();
        let f = fit_power_law(&t, &y, (1e-4, 1e2)).unwrap();
        assert!((f.slope + 1.0 / 3.0).abs() < 0.02, "slope {}", f.slope);
    }

    #[test]
    fn exponential_rates() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|v| (-5.0 * v).exp()).collect();
        let e = fit_exponential(&t, &y, (0.0, 10.0)).unwrap();
        assert!((e.rate - 5.0).abs() < 1e-10);

        let y: Vec<f64> = t
            .iter()
            .map(|v| 2.0 * (-5.0 * v).exp() * (1.0 + 1e-3 * v.cos()))
            .collect();
        let e = fit_exponential(&t, &y, (0.0, 10.0)).unwrap();
        assert!((e.rate - 5.0).abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 0.5, 0.3, 0.2];
        assert!(matches!(
            fit_power_law(&t, &y, (0.0, 10.0)),
            Err(AnalysisError::TooFewPoints { got: 4, .. })
        ));
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 0.5, 0.0, 0.2, 0.1];
        assert!(matches!(fit_power_law(&t, &y, (0.0, 10.0)), Err(AnalysisError::NonPositive(_))));
        assert!(fit_exponential(&t, &y, (0.0, 10.0)).is_err());
        // a window that excludes the bad sample is fine
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [0.0, 1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.01];
        assert!(fit_power_law(&t, &y, (2.0, 8.0)).is_ok());
    }
}
