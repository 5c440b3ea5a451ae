//! Time of the last supremum of a spectrally negative stable process with
//! drift, on a grid.
//!
//! Increments are `scale·step^{1/α}·S + drift·step` with `S` totally skewed
//! to the left, drawn by the Chambers–Mallows–Stuck transform.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::brownian::arcsine_survival;
use super::{merge_all, run_chunks, Curve, Moments, SimReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyParams {
    /// Stability index in `(1, 2]`; 2 is the Gaussian case.
    pub alpha: f64,
    #[serde(default = "unit")]
    pub scale: f64,
    pub drift: f64,
    pub horizon: f64,
    pub step: f64,
    /// Increments below `-jump_threshold` count as jumps.
    pub jump_threshold: f64,
    /// Number of jumps (in time order) with their own atom estimate.
    #[serde(default = "ten")]
    pub tracked_jumps: usize,
    #[serde(default)]
    pub fixed_time: Option<f64>,
    #[serde(default)]
    pub report_times: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

/// Standard stable variable with skewness `-1`.
fn stable_left<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let t = -(PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha)
}

pub fn simulate_levy_supremum(p: &LevyParams, n: u64, seed: u64) -> Result<SimReport> {
    if !(p.alpha > 1.0 && p.alpha <= 2.0)
        || !(p.scale > 0.0)
        || !p.drift.is_finite()
        || !(p.horizon >= 0.0 && p.horizon.is_finite())
        || !(p.step > 0.0)
        || !(p.jump_threshold > 0.0)
    {
        return Err(Error::InvalidParams("stable process parameters".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let n_steps = (p.horizon / p.step + 1e-9).floor() as usize;
    let amp = p.scale * p.step.powf(1.0 / p.alpha);
    let fixed_idx = p
        .fixed_time
        .map(|t| ((t / p.step).round() as usize).min(n_steps));
    let report: Vec<(f64, usize)> = p
        .report_times
        .iter()
        .map(|&t| (t, ((t / p.step).round().max(0.0) as usize).min(n_steps)))
        .collect();
    let tracked = p.tracked_jumps.max(1);

    let parts = run_chunks(n, seed, |rng, k| {
        let mut per_jump = vec![Moments::default(); tracked];
        let mut any_jump = Moments::default();
        let mut fixed = Moments::default();
        let mut surv = vec![Moments::default(); report.len()];
        for _ in 0..k {
            let mut x = 0.0f64;
            let mut best = 0.0f64;
            let mut argmax = 0usize;
            // steps at which jump j (in order) starts
            let mut jump_steps: Vec<usize> = Vec::new();
            for i in 0..n_steps {
                let inc = amp * stable_left(p.alpha, rng) + p.drift * p.step;
                if inc < -p.jump_threshold {
                    jump_steps.push(i);
                }
                x += inc;
                if x >= best {
                    best = x;
                    argmax = i + 1;
                }
            }
            // ρ on the graph of jump j: the supremum is attained right before it
            let hit = jump_steps.iter().position(|&s| s == argmax);
            for (j, m) in per_jump.iter_mut().enumerate() {
                m.flag(hit == Some(j));
            }
            any_jump.flag(hit.is_some());
            fixed.flag(fixed_idx == Some(argmax));
            for (m, (_, idx)) in surv.iter_mut().zip(&report) {
                m.flag(argmax > *idx);
            }
        }
        (per_jump, any_jump, fixed, surv)
    });

    let mut per_jump = vec![Moments::default(); tracked];
    let mut any_jump = Moments::default();
    let mut fixed = Moments::default();
    let mut surv = vec![Moments::default(); report.len()];
    for (a, b, c, d) in &parts {
        merge_all(&mut per_jump, a);
        any_jump.merge(b);
        fixed.merge(c);
        merge_all(&mut surv, d);
    }
    let worst = per_jump
        .iter()
        .max_by(|a, b| a.mean().total_cmp(&b.mean()))
        .copied()
        .unwrap_or_default();
    // the Gaussian case without drift follows the arcsine law
    let gaussian = p.alpha == 2.0 && p.drift == 0.0;
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("any_jump_atom".into(), serde_json::json!(any_jump.mean()));
    diagnostics.insert("any_jump_atom_se".into(), serde_json::json!(any_jump.se()));
    diagnostics.insert("fixed_time_atom".into(), serde_json::json!(fixed.mean()));
    diagnostics.insert("fixed_time_atom_se".into(), serde_json::json!(fixed.se()));
    diagnostics.insert("gaussian_surrogate".into(), serde_json::json!(gaussian));
    Ok(SimReport {
        estimator: "largest per-jump atom mass of the last supremum time".into(),
        estimate: worst.mean(),
        se: worst.se(),
        n,
        seed,
        curves: vec![
            Curve {
                name: "P(rho on jump j)".into(),
                points: per_jump
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m.point(0.0, Some(format!("jump {}", j + 1)), Some(0.0)))
                    .collect(),
            },
            Curve {
                name: "P(rho>t)".into(),
                points: surv
                    .iter()
                    .zip(&report)
                    .map(|(m, (_, idx))| {
                        let t = *idx as f64 * p.step;
                        m.point(t, None, gaussian.then(|| arcsine_survival(t, p.horizon)))
                    })
                    .collect(),
            },
        ],
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64) -> LevyParams {
        LevyParams {
            alpha,
            scale: 1.0,
            drift: -0.5,
            horizon: 1.0,
            step: 1.0 / 256.0,
            jump_threshold: 0.5,
            tracked_jumps: 5,
            fixed_time: Some(0.5),
            report_times: vec![0.25, 0.5, 0.75],
        }
    }

    #[test]
    fn gaussian_transform_has_variance_two() {
        let mut rng = super::super::chunk_rng(1, 0);
        let mut m = Moments::default();
        for _ in 0..20000 {
            m.push(stable_left(2.0, &mut rng).powi(2));
        }
        assert!((m.mean() - 2.0).abs() < 0.1, "{}", m.mean());
    }

    #[test]
    fn skewed_increments_have_a_heavy_left_tail() {
        let mut rng = super::super::chunk_rng(2, 0);
        let draws: Vec<f64> = (0..20000).map(|_| stable_left(1.5, &mut rng)).collect();
        let far_left = draws.iter().filter(|&&x| x < -10.0).count();
        let far_right = draws.iter().filter(|&&x| x > 10.0).count();
        assert!(far_left > 10 * far_right.max(1), "{far_left} vs {far_right}");
    }

    #[test]
    fn jump_time_atoms_vanish_under_refinement() {
        // on a grid the walk sits at its maximum just before a jump with
        // probability of order step^{1/3}; the continuous-time mass is 0
        let coarse = simulate_levy_supremum(&LevyParams { step: 1.0 / 64.0, ..params(1.5) }, 4000, 3).unwrap();
        let fine = simulate_levy_supremum(&LevyParams { step: 1.0 / 1024.0, ..params(1.5) }, 4000, 3).unwrap();
        assert!(fine.estimate < coarse.estimate / 2.0, "{} vs {}", fine.estimate, coarse.estimate);
        assert!(fine.diagnostics["fixed_time_atom"].as_f64().unwrap() < 0.01);
    }

    #[test]
    fn gaussian_surrogate_matches_the_arcsine_law() {
        let p = LevyParams {
            alpha: 2.0,
            drift: 0.0,
            ..params(2.0)
        };
        let r = simulate_levy_supremum(&p, 20000, 4).unwrap();
        assert!(r.curves[1].max_z_score() < 4.0);
    }

    #[test]
    fn zero_horizon_puts_the_supremum_at_zero() {
        let p = LevyParams {
            horizon: 0.0,
            report_times: vec![0.0],
            ..params(1.5)
        };
        let r = simulate_levy_supremum(&p, 100, 1).unwrap();
        assert_eq!(r.curves[1].points[0].estimate, 0.0);
        assert_eq!(r.estimate, 0.0);
    }
}
