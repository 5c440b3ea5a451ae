//! Last zero of Brownian motion before a horizon.
//!
//! Gaussian increments on a grid of mesh `step`, with zeros inside a step
//! detected exactly through the Brownian bridge: between two values of equal
//! sign `x, y` the bridge hits 0 with probability `exp(-2xy/step)`. The last
//! zero is therefore located at grid resolution without discretization bias
//! and is placed at the midpoint of its step.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{merge_all, run_chunks, Curve, Moments, SimReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianParams {
    pub horizon: f64,
    pub step: f64,
    /// Point estimate is `P(τ > threshold)`; defaults to half the horizon.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Time whose step is used for the fixed-time atom estimate.
    #[serde(default)]
    pub atom_time: Option<f64>,
    #[serde(default)]
    pub report_times: Vec<f64>,
}

/// `P(g_h > s) = 1 - (2/π) arcsin(√(s/h))`.
pub fn arcsine_survival(s: f64, horizon: f64) -> f64 {
    if horizon <= 0.0 {
        return 0.0;
    }
    1.0 - 2.0 / PI * (s / horizon).clamp(0.0, 1.0).sqrt().asin()
}

/// Grid index of `t`, rounded to the nearest step.
fn index_of(t: f64, step: f64, n_steps: usize) -> usize {
    ((t / step).round().max(0.0) as usize).min(n_steps)
}

pub fn simulate_brownian_last_zero(p: &BrownianParams, n: u64, seed: u64) -> Result<SimReport> {
    if !(p.step > 0.0 && p.step.is_finite()) || !(p.horizon >= 0.0 && p.horizon.is_finite()) {
        return Err(Error::InvalidParams("step must be positive and horizon non-negative".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let step = p.step;
    let n_steps = (p.horizon / step + 1e-9).floor() as usize;
    let threshold = p.threshold.unwrap_or(p.horizon / 2.0);
    let thr_idx = index_of(threshold, step, n_steps);
    let atom_time = p.atom_time.unwrap_or(p.horizon / 4.0);
    let atom_idx = index_of(atom_time, step, n_steps);
    let report: Vec<(f64, usize)> = p
        .report_times
        .iter()
        .map(|&t| (t, index_of(t, step, n_steps)))
        .collect();
    let sd = step.sqrt();

    let parts = run_chunks(n, seed, |rng, k| {
        let mut above = Moments::default();
        let mut atom = Moments::default();
        let mut surv = vec![Moments::default(); report.len()];
        let mut azema = vec![Moments::default(); report.len()];
        let mut tau_m = Moments::default();
        for _ in 0..k {
            // zero_step = Some(i): the last zero lies in (t_i, t_{i+1})
            let mut zero_step: Option<usize> = None;
            let mut b = 0.0f64;
            let mut next_report = 0;
            let mut record = |i: usize, b: f64, zero_step: Option<usize>, next_report: &mut usize| {
                while *next_report < report.len() && report[*next_report].1 == i {
                    let t = i as f64 * step;
                    let g = zero_step.map_or(0.0, |j| (j as f64 + 0.5) * step);
                    azema[*next_report].push(b.signum() * (t - g).max(0.0).sqrt());
                    *next_report += 1;
                }
            };
            record(0, b, zero_step, &mut next_report);
            for i in 0..n_steps {
                let z: f64 = StandardNormal.sample(rng);
                let u: f64 = rng.random();
                let nb = b + sd * z;
                let crosses = b * nb <= 0.0 || u < (-2.0 * b * nb / step).exp();
                if crosses {
                    zero_step = Some(i);
                }
                b = nb;
                record(i + 1, b, zero_step, &mut next_report);
            }
            let tau = zero_step.map_or(0.0, |j| (j as f64 + 0.5) * step);
            tau_m.push(tau);
            above.flag(zero_step.is_some_and(|j| j >= thr_idx));
            atom.flag(atom_idx > 0 && zero_step == Some(atom_idx - 1));
            for (m, (_, idx)) in surv.iter_mut().zip(&report) {
                m.flag(zero_step.is_some_and(|j| j >= *idx));
            }
        }
        (above, atom, surv, azema, tau_m)
    });

    let mut above = Moments::default();
    let mut atom = Moments::default();
    let mut tau_m = Moments::default();
    let mut surv = vec![Moments::default(); report.len()];
    let mut azema = vec![Moments::default(); report.len()];
    for (a, b, s, z, t) in &parts {
        above.merge(a);
        atom.merge(b);
        tau_m.merge(t);
        merge_all(&mut surv, s);
        merge_all(&mut azema, z);
    }
    let grid_t = |idx: usize| idx as f64 * step;
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("threshold".into(), serde_json::json!(grid_t(thr_idx)));
    diagnostics.insert(
        "arcsine_benchmark".into(),
        serde_json::json!(arcsine_survival(grid_t(thr_idx), p.horizon)),
    );
    diagnostics.insert("atom_time".into(), serde_json::json!(grid_t(atom_idx)));
    diagnostics.insert("atom_mass_estimate".into(), serde_json::json!(atom.mean()));
    diagnostics.insert("atom_mass_se".into(), serde_json::json!(atom.se()));
    diagnostics.insert("mean_tau".into(), serde_json::json!(tau_m.mean()));
    Ok(SimReport {
        estimator: "P(tau > threshold) for the last zero before the horizon".into(),
        estimate: above.mean(),
        se: above.se(),
        n,
        seed,
        curves: vec![
            Curve {
                name: "P(tau>t)".into(),
                points: surv
                    .iter()
                    .zip(&report)
                    .map(|(m, (_, idx))| {
                        m.point(grid_t(*idx), None, Some(arcsine_survival(grid_t(*idx), p.horizon)))
                    })
                    .collect(),
            },
            Curve {
                name: "mean sgn(B_t)sqrt(t-g_t)".into(),
                points: azema
                    .iter()
                    .zip(&report)
                    .map(|(m, (_, idx))| m.point(grid_t(*idx), None, Some(0.0)))
                    .collect(),
            },
        ],
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(step: f64) -> BrownianParams {
        BrownianParams {
            horizon: 1.0,
            step,
            threshold: None,
            atom_time: Some(0.25),
            report_times: vec![0.25, 0.5, 0.75],
        }
    }

    #[test]
    fn arcsine_law_at_moderate_size() {
        let r = simulate_brownian_last_zero(&params(1.0 / 256.0), 20_000, 4).unwrap();
        assert!(r.within(0.5, 3.0), "{} ± {:?}", r.estimate, r.se);
        assert!(r.curves[0].max_z_score() < 4.0);
    }

    #[test]
    fn horizon_shorter_than_a_step() {
        let p = BrownianParams {
            horizon: 0.001,
            ..params(0.01)
        };
        let r = simulate_brownian_last_zero(&p, 50, 1).unwrap();
        assert_eq!(r.diagnostics["mean_tau"], serde_json::json!(0.0));
    }

    #[test]
    fn fixed_time_atom_shrinks_with_the_step() {
        let coarse = simulate_brownian_last_zero(&params(1.0 / 16.0), 20_000, 5).unwrap();
        let fine = simulate_brownian_last_zero(&params(1.0 / 256.0), 20_000, 5).unwrap();
        let get = |r: &SimReport| r.diagnostics["atom_mass_estimate"].as_f64().unwrap();
        assert!(get(&fine) < get(&coarse));
        assert!(get(&coarse) <= (1.0f64 / 16.0).sqrt());
    }

    #[test]
    fn doubling_samples_shrinks_the_error() {
        let a = simulate_brownian_last_zero(&params(1.0 / 64.0), 8000, 8).unwrap();
        let b = simulate_brownian_last_zero(&params(1.0 / 64.0), 16000, 8).unwrap();
        let ratio = a.se.unwrap() / b.se.unwrap();
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
    }
}
