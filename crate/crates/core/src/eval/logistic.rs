//! Four-parameter monotone logistic mapping from predicted scores to MOS,
//! fitted by Nelder-Mead simplex descent on the sum of squared residuals.

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::scalar::Scalar;

use super::correlation::pearson;

pub const MAX_ITERATIONS: usize = 10_000;
pub const REL_TOLERANCE: f64 = 1e-10;

/// `f(x) = beta1 + (beta2 - beta1) / (1 + exp(-(x - beta3) / |beta4|))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl LogisticParams {
    fn from_array(b: [f64; 4]) -> Self {
        Self {
            beta1: b[0],
            beta2: b[1],
            beta3: b[2],
            beta4: b[3],
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.beta1, self.beta2, self.beta3, self.beta4]
    }

    pub fn eval(&self, x: f64) -> f64 {
        logistic(&self.to_array(), x)
    }

    /// `+1` for an increasing curve, `-1` for a decreasing one.
    pub fn direction(&self) -> f64 {
        if self.beta2 >= self.beta1 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn map<S: Scalar>(&self, xs: &[S]) -> Vec<S> {
        xs.iter()
            .map(|&x| S::from_f64_lossy(self.eval(x.to_f64_lossy())))
            .collect()
    }
}

#[inline]
fn logistic(b: &[f64; 4], x: f64) -> f64 {
    b[0] + (b[1] - b[0]) / (1.0 + (-(x - b[2]) / b[3].abs()).exp())
}

fn sse(b: &[f64; 4], xs: &[f64], ys: &[f64]) -> f64 {
    if b[3] == 0.0 {
        return f64::INFINITY;
    }
    let s: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = logistic(b, x) - y;
            r * r
        })
        .sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Result of a logistic regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    /// Sum of squared residuals at `params`.
    pub objective: f64,
    /// Objective at the initialization.
    pub initial_objective: f64,
    pub iterations: usize,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Initial parameters: `beta1 = max(mos)`, `beta2 = min(mos)`,
/// `beta3 = median(pred)`, `beta4 = std(pred)`.
pub fn initial_params(pred: &[f64], mos: &[f64]) -> LogisticParams {
    let max = mos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = mos.iter().copied().fold(f64::INFINITY, f64::min);
    LogisticParams {
        beta1: max,
        beta2: min,
        beta3: median(pred),
        beta4: population_std(pred),
    }
}

struct Simplex {
    points: Vec<[f64; 4]>,
    values: Vec<f64>,
}

/// Plain Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// Returns the best vertex, its value and the iterations spent.
fn nelder_mead(
    start: [f64; 4],
    f: &dyn Fn(&[f64; 4]) -> f64,
    budget: usize,
) -> ([f64; 4], f64, usize) {
    let mut points = vec![start];
    for k in 0..4 {
        let mut p = start;
        p[k] = if p[k] != 0.0 { p[k] * 1.05 } else { 0.00025 };
        points.push(p);
    }
    let values = points.iter().map(f).collect();
    let mut s = Simplex { points, values };

    let mut it = 0;
    while it < budget {
        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
        s.points = idx.iter().map(|&i| s.points[i]).collect();
        s.values = idx.iter().map(|&i| s.values[i]).collect();

        let (best, worst) = (s.values[0], s.values[4]);
        if worst - best <= REL_TOLERANCE * best.abs() {
            break;
        }
        let spread = (1..5)
            .flat_map(|i| (0..4).map(move |k| (i, k)))
            .map(|(i, k)| (s.points[i][k] - s.points[0][k]).abs() / (1.0 + s.points[0][k].abs()))
            .fold(0.0, f64::max);
        if spread < 1e-15 {
            break;
        }
        it += 1;

        let mut centroid = [0.0; 4];
        for p in &s.points[..4] {
            for k in 0..4 {
                centroid[k] += p[k] / 4.0;
            }
        }
        let toward = |t: f64| -> [f64; 4] {
            let mut p = [0.0; 4];
            for k in 0..4 {
                p[k] = centroid[k] + t * (s.points[4][k] - centroid[k]);
            }
            p
        };

        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < s.values[0] {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                s.points[4] = expanded;
                s.values[4] = fe;
            } else {
                s.points[4] = reflected;
                s.values[4] = fr;
            }
            continue;
        }
        if fr < s.values[3] {
            s.points[4] = reflected;
            s.values[4] = fr;
            continue;
        }
        let (contracted, fc) = if fr < s.values[4] {
            let c = toward(-0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = toward(0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < s.values[4].min(fr) {
            s.points[4] = contracted;
            s.values[4] = fc;
            continue;
        }
        let anchor = s.points[0];
        for i in 1..5 {
            for k in 0..4 {
                s.points[i][k] = anchor[k] + 0.5 * (s.points[i][k] - anchor[k]);
            }
            s.values[i] = f(&s.points[i]);
        }
    }
    let best = (0..5)
        .min_by(|&a, &b| s.values[a].total_cmp(&s.values[b]))
        .unwrap_or(0);
    (s.points[best], s.values[best], it)
}

/// Restarted simplex descent from `start`, sharing one iteration budget.
fn descend(start: [f64; 4], f: &dyn Fn(&[f64; 4]) -> f64, budget: usize) -> ([f64; 4], f64, usize) {
    let mut best = (start, f(&start));
    let mut used = 0;
    while used < budget {
        let (p, v, it) = nelder_mead(best.0, f, budget - used);
        used += it.max(1);
        let improved = v < best.1 && (best.1 - v) > REL_TOLERANCE * v.abs();
        if v < best.1 {
            best = (p, v);
        }
        if !improved {
            break;
        }
    }
    (best.0, best.1, used)
}

/// Least-squares logistic fit of `mos` against `pred`.
///
/// Descent starts from [`initial_params`] and, independently, from the same
/// point with `beta1`/`beta2` exchanged so increasing and decreasing
/// relationships both start on the right side; the better result is kept.
/// The returned objective never exceeds the objective at initialization.
pub fn logistic_fit<S: Scalar>(pred: &[S], mos: &[S]) -> Result<LogisticFit> {
    if pred.len() != mos.len() {
        return Err(PcdError::param(format!(
            "logistic fit inputs differ in length: {} vs {}",
            pred.len(),
            mos.len()
        )));
    }
    let xs: Vec<f64> = pred.iter().map(|v| v.to_f64_lossy()).collect();
    let ys: Vec<f64> = mos.iter().map(|v| v.to_f64_lossy()).collect();
    let init = if xs.is_empty() {
        LogisticParams::from_array([0.0, 0.0, 0.0, 0.0])
    } else {
        initial_params(&xs, &ys)
    };
    let fail = |reason: &str| PcdError::Fit {
        reason: reason.to_string(),
        fallback: init,
    };
    if xs.len() < 4 {
        return Err(fail("at least 4 samples are required"));
    }
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(fail("inputs must be finite"));
    }
    if !(init.beta4 > 0.0) {
        return Err(fail("predictions are constant"));
    }

    let objective = |b: &[f64; 4]| sse(b, &xs, &ys);
    let start = init.to_array();
    let initial_objective = objective(&start);
    if !initial_objective.is_finite() {
        return Err(fail("objective is not finite at initialization"));
    }
    let mirrored = [start[1], start[0], start[2], start[3]];

    let budget = MAX_ITERATIONS / 2;
    let (p1, v1, i1) = descend(start, &objective, budget);
    let (p2, v2, i2) = descend(mirrored, &objective, budget);
    let (mut params, mut value) = if v2 < v1 { (p2, v2) } else { (p1, v1) };
    if !(value <= initial_objective) {
        params = start;
        value = initial_objective;
    }
    if params[3] == 0.0 {
        return Err(fail("slope collapsed to zero"));
    }
    Ok(LogisticFit {
        params: LogisticParams::from_array(params),
        objective: value,
        initial_objective,
        iterations: i1 + i2,
    })
}

/// PLCC after logistic mapping: Pearson correlation of the fitted predictions
/// with MOS, signed by the fitted curve's direction so a decreasing
/// relationship reports a negative value, as SRCC does.
pub fn plcc<S: Scalar>(pred: &[S], mos: &[S]) -> Result<(S, LogisticFit)> {
    let fit = logistic_fit(pred, mos)?;
    let r = plcc_with(&fit.params, pred, mos)?;
    Ok((r, fit))
}

pub fn plcc_with<S: Scalar>(params: &LogisticParams, pred: &[S], mos: &[S]) -> Result<S> {
    let mapped = params.map(pred);
    let r = pearson(&mapped, mos)?;
    Ok(r * S::from_f64_lossy(params.direction()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> LogisticParams {
        LogisticParams {
            beta1: 1.0,
            beta2: 5.0,
            beta3: 0.6,
            beta4: 0.08,
        }
    }

    fn xs() -> Vec<f64> {
        (0..25).map(|i| 0.3 + 0.6 * i as f64 / 24.0).collect()
    }

    #[test]
    fn recovers_synthetic_logistic() {
        let x = xs();
        let y: Vec<f64> = x.iter().map(|&v| truth().eval(v)).collect();
        let fit = logistic_fit(&x, &y).unwrap();
        let rms = (fit.objective / x.len() as f64).sqrt();
        assert!(rms <= 1e-6, "rms {rms}");
        assert!(fit.objective <= fit.initial_objective);
        let (r, _) = plcc(&x, &y).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_relationship_reports_negative_plcc() {
        let x = xs();
        let y: Vec<f64> = x.iter().map(|&v| 6.0 - truth().eval(v)).collect();
        let (r, fit) = plcc(&x, &y).unwrap();
        assert!((r + 1.0).abs() < 1e-9, "{r}");
        assert!(fit.params.direction() < 0.0);
    }

    #[test]
    fn affine_mos_keeps_pearson() {
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 + 0.25 * v).collect();
        let (r, _) = plcc(&x, &y).unwrap();
        let direct = pearson(&x, &y).unwrap();
        assert!((r - direct).abs() < 1e-6, "{r} vs {direct}");
    }

    #[test]
    fn degenerate_inputs() {
        let err = logistic_fit(&[0.5; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 1.0]).unwrap_err();
        match err {
            PcdError::Fit { fallback, .. } => {
                assert_eq!(fallback.beta1, 5.0);
                assert_eq!(fallback.beta2, 1.0);
                assert_eq!(fallback.beta3, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            logistic_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(PcdError::Fit { .. })
        ));
        assert!(logistic_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn never_worse_than_initialization_on_noise() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 3.0).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 11) % 7) as f64 * 0.5 + 1.0).collect();
        let fit = logistic_fit(&x, &y).unwrap();
        assert!(fit.objective <= fit.initial_objective);
    }
}
