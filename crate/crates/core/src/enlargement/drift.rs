//! Semimartingale decompositions of `F`-martingales in enlarged filtrations.
//!
//! Brackets are discrete: `Δ⟨U,V⟩_s = E[ΔU_s ΔV_s | F_{s-}]` at grid points,
//! since `F`-martingales are constant between them.

use num_traits::{Signed, Zero};
use serde_json::json;

use super::{
    enlarge_initial, enlarge_progressive, is_martingale, piece_of, EnlargedSpace, MartingaleCheck,
};
use crate::bundle::associated_processes;
use crate::error::{Error, Result};
use crate::exhaust::{exhausting_system, ExhaustingSystem};
use crate::path::{PathFlags, PiecewisePath};
use crate::projections::{project_path, Projection};
use crate::random_time::RandomTime;
use crate::rational::{format_rational, one, zero, Rational, TimePoint};
use crate::space::FilteredSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    /// The enlarged space the paths live on.
    pub enlarged: EnlargedSpace,
    pub drift: PiecewisePath,
    pub compensated: PiecewisePath,
    pub is_martingale: bool,
    pub max_residual: Rational,
}

impl DriftReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        let ids: Vec<String> = self.enlarged.space.atoms().iter().map(|a| a.id.clone()).collect();
        json!({
            "drift": self.drift.to_json_value(&ids),
            "residual": format_rational(&self.max_residual),
            "verdict": if self.is_martingale { "martingale" } else { "not a martingale" },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HonestDrift {
    pub report: DriftReport,
    /// Pathwise equality with the thin-time drift for `G ≡ 1`.
    pub matches_thin: bool,
}

fn require_martingale(x: &PiecewisePath, space: &FilteredSpace, what: &str) -> Result<()> {
    let check = is_martingale(x, space);
    if check.is_martingale {
        Ok(())
    } else {
        Err(Error::NotMartingale {
            what: what.to_string(),
            residual: check.max_residual,
        })
    }
}

/// `Δ⟨U,V⟩` at every base grid point (index 0 carries no jump).
fn bracket(u: &PiecewisePath, v: &PiecewisePath, space: &FilteredSpace) -> Vec<Vec<Rational>> {
    space
        .grid()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            if k == 0 {
                return vec![zero(); space.n_atoms()];
            }
            let prod: Vec<Rational> = (0..space.n_atoms())
                .map(|a| (u.value(a, g) - u.left(a, g)) * (v.value(a, g) - v.left(a, g)))
                .collect();
            space.condition_atoms(k - 1, &prod)
        })
        .collect()
}

/// `x / d` when `d > 0`, else 0.
fn guarded(x: &Rational, d: &Rational) -> Rational {
    if d.is_positive() {
        x / d
    } else {
        zero()
    }
}

/// Sums per-atom increments at base grid points into a step path on the
/// enlarged grid.
fn accumulate(
    e: &EnlargedSpace,
    base: &FilteredSpace,
    incs: &[Vec<Rational>],
    flags: PathFlags,
) -> PiecewisePath {
    let grid = e.space.grid().to_vec();
    let values: Vec<Vec<Rational>> = grid
        .iter()
        .map(|g| {
            (0..e.n_atoms())
                .map(|ea| {
                    base.grid()
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| *s <= g)
                        .map(|(k, _)| incs[ea][k].clone())
                        .sum()
                })
                .collect()
        })
        .collect();
    PiecewisePath::step(grid, &values, flags)
}

const PREDICTABLE_FV: PathFlags = PathFlags {
    adapted: true,
    predictable: true,
    increasing: false,
};

const ADAPTED: PathFlags = PathFlags {
    adapted: true,
    predictable: false,
    increasing: false,
};

fn report(e: EnlargedSpace, drift: PiecewisePath, compensated: PiecewisePath) -> DriftReport {
    let MartingaleCheck {
        is_martingale,
        max_residual,
    } = is_martingale(&compensated, &e.space);
    DriftReport {
        enlarged: e,
        drift,
        compensated,
        is_martingale,
        max_residual,
    }
}

/// Exhausting event of every enlarged atom.
fn events_of(e: &EnlargedSpace, system: &ExhaustingSystem, space: &FilteredSpace) -> Vec<usize> {
    (0..e.n_atoms())
        .map(|ea| {
            let leaf = space.leaf_of(e.back_map[ea]);
            system.event_of(leaf, piece_of(system.tau(), leaf, &e.u_sets[ea][0].0))
        })
        .collect()
}

/// `∫G dY`, per enlarged atom and base grid point.
fn integral_increments(
    e: &EnlargedSpace,
    g: &PiecewisePath,
    y: &PiecewisePath,
    space: &FilteredSpace,
) -> Vec<Vec<Rational>> {
    (0..e.n_atoms())
        .map(|ea| {
            let a = e.back_map[ea];
            space
                .grid()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if k == 0 {
                        zero()
                    } else {
                        g.value(ea, s) * (y.value(a, s) - y.left(a, s))
                    }
                })
                .collect()
        })
        .collect()
}

/// Decomposition of `G·Y` in the progressive enlargement by a thin atomic
/// time: the drift before `τ` is `G Δ⟨Y,m⟩ / Z_-`, after it
/// `G Δ⟨Y,z^n⟩ / z^n_-` on `C_n`.
pub fn drift_thin(
    y: &PiecewisePath,
    g: Option<&PiecewisePath>,
    tau: &RandomTime,
    space: &FilteredSpace,
) -> Result<DriftReport> {
    if !tau.is_atomic() {
        return Err(Error::HasContinuousPart);
    }
    require_martingale(y, space, "Y")?;
    let e = enlarge_progressive(space, tau)?;
    let unit = PiecewisePath::constant(e.n_atoms(), one());
    let g = g.unwrap_or(&unit);
    if g.n_rows() != e.n_atoms() || !g.is_predictable(&e.space) {
        return Err(Error::NotPredictable("G".into()));
    }
    let b = associated_processes(tau, space);
    let system = exhausting_system(tau, space, None)?;
    let ym = bracket(y, &b.m, space);
    let yz: Vec<_> = system.martingales.iter().map(|z| bracket(y, z, space)).collect();
    let events = events_of(&e, &system, space);

    let incs: Vec<Vec<Rational>> = (0..e.n_atoms())
        .map(|ea| {
            let a = e.back_map[ea];
            let tv = &e.values[ea][0];
            let n = events[ea];
            space
                .grid()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if k == 0 {
                        return zero();
                    }
                    let gs = g.value(ea, s);
                    if !tv.lt(s) {
                        gs * guarded(&ym[k][a], &b.z.left(a, s))
                    } else if n >= 1 {
                        gs * guarded(&yz[n][k][a], &system.martingales[n].left(a, s))
                    } else {
                        zero()
                    }
                })
                .collect()
        })
        .collect();
    let drift = accumulate(&e, space, &incs, PREDICTABLE_FV);
    let gy = accumulate(&e, space, &integral_increments(&e, g, y, space), ADAPTED);
    let compensated = gy.sub(&drift);
    Ok(report(e, drift, compensated))
}

/// Jacod's decomposition of `X` in the initial enlargement by the events of
/// an exhausting system: `Σ_n 1_{C_n} Δ⟨X,z^n⟩ / z^n_-`.
pub fn drift_jacod(
    x: &PiecewisePath,
    system: &ExhaustingSystem,
    space: &FilteredSpace,
) -> Result<DriftReport> {
    require_martingale(x, space, "X")?;
    let e = enlarge_initial(space, system)?;
    let brackets: Vec<_> = system.martingales.iter().map(|z| bracket(x, z, space)).collect();
    let events = events_of(&e, system, space);
    let incs: Vec<Vec<Rational>> = (0..e.n_atoms())
        .map(|ea| {
            let a = e.back_map[ea];
            let n = events[ea];
            space
                .grid()
                .iter()
                .enumerate()
                .map(|(k, s)| guarded(&brackets[n][k][a], &system.martingales[n].left(a, s)))
                .collect()
        })
        .collect();
    let drift = accumulate(&e, space, &incs, PREDICTABLE_FV);
    let compensated = e.lift_path(x).sub(&drift);
    Ok(report(e, drift, compensated))
}

/// Decomposition after an honest time: `Δ⟨M,m⟩ / Z_-` up to `τ`, minus
/// `Δ⟨M,m⟩ / (1 - Z_-)` after it.
pub fn drift_honest(m_: &PiecewisePath, tau: &RandomTime, space: &FilteredSpace) -> Result<HonestDrift> {
    let cert = crate::honest::is_honest(tau, space);
    if !cert.honest {
        return Err(Error::NotHonest {
            violation_mass: cert.violation_mass,
        });
    }
    if !tau.is_atomic() {
        return Err(Error::HasContinuousPart);
    }
    require_martingale(m_, space, "M")?;
    let e = enlarge_progressive(space, tau)?;
    let b = associated_processes(tau, space);
    let mm = bracket(m_, &b.m, space);
    let incs: Vec<Vec<Rational>> = (0..e.n_atoms())
        .map(|ea| {
            let a = e.back_map[ea];
            let tv = &e.values[ea][0];
            space
                .grid()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if k == 0 {
                        return zero();
                    }
                    let zl = b.z.left(a, s);
                    if !tv.lt(s) {
                        guarded(&mm[k][a], &zl)
                    } else {
                        -guarded(&mm[k][a], &(one() - zl))
                    }
                })
                .collect()
        })
        .collect();
    let drift = accumulate(&e, space, &incs, PREDICTABLE_FV);
    let integral = accumulate(
        &e,
        space,
        &integral_increments(&e, &PiecewisePath::constant(e.n_atoms(), one()), m_, space),
        ADAPTED,
    );
    let compensated = integral.sub(&drift);
    let thin = drift_thin(m_, None, tau, space)?;
    let matches_thin = drift.max_abs_diff(&thin.drift).is_zero();
    Ok(HonestDrift {
        report: report(e, drift, compensated),
        matches_thin,
    })
}

/// `Y_t - Y_{t∧τ}` on the progressive enlargement by `τ` (first enlarging time).
pub fn after_tau(y: &PiecewisePath, e: &EnlargedSpace) -> PiecewisePath {
    let y = y.refine(e.space.grid());
    let times = y.times().to_vec();
    let values: Vec<Vec<Rational>> = times
        .iter()
        .map(|t| {
            (0..e.n_atoms())
                .map(|ea| match &e.values[ea][0] {
                    TimePoint::Finite(s) if s < t => y.value(ea, t) - y.value(ea, s),
                    _ => zero(),
                })
                .collect()
        })
        .collect();
    PiecewisePath::step(times, &values, ADAPTED)
}

/// Projects the Jacod-compensated `X` onto `F^τ` and checks that it differs
/// from the thin-time compensated `X` by an `F^τ`-martingale.
pub fn restriction_consistency(
    x: &PiecewisePath,
    tau: &RandomTime,
    space: &FilteredSpace,
) -> Result<MartingaleCheck> {
    let system = exhausting_system(tau, space, None)?;
    let jacod = drift_jacod(x, &system, space)?;
    let thin = drift_thin(x, None, tau, space)?;
    let projected = project_path(&jacod.compensated, Projection::Optional, &thin.enlarged.space);
    let diff = projected.sub(&thin.compensated);
    Ok(is_martingale(&diff, &thin.enlarged.space))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaust::conditional_martingale;
    use crate::models;
    use crate::rational::int;

    /// The martingale `E[ξ | F_t]` of a per-atom terminal value.
    fn closed(space: &FilteredSpace, xi: &[i64]) -> PiecewisePath {
        let v: Vec<Rational> = xi.iter().map(|&x| int(x)).collect();
        conditional_martingale(space, &v)
    }

    #[test]
    fn stopping_time_has_no_drift() {
        let s = models::coin_space();
        let y = closed(&s, &[1, -1]);
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let r = drift_thin(&y, None, &tau, &s).unwrap();
        assert!(r.drift.rows().iter().flatten().all(|k| k.value.is_zero()));
        assert!(r.is_martingale);
    }

    #[test]
    fn external_coin_gives_immersion() {
        let s = models::coin_space();
        let y = closed(&s, &[1, -1]);
        let tau = models::external_coin_time(&s);
        let r = drift_thin(&y, None, &tau, &s).unwrap();
        assert!(r.drift.rows().iter().flatten().all(|k| k.value.is_zero()));
        assert!(r.is_martingale);
        let j = drift_jacod(&y, &exhausting_system(&tau, &s, None).unwrap(), &s).unwrap();
        assert!(j.is_martingale);
    }

    #[test]
    fn revealing_time_has_drift_and_compensates() {
        // τ = 1 when the second step goes up, 2 otherwise: known only at time 2
        let s = models::walk_space(2);
        let y = closed(&s, &[2, 0, 0, -2]);
        let tau = RandomTime::from_atom_values(
            &s,
            &[1, 2, 1, 2].map(|v| TimePoint::Finite(int(v))),
        )
        .unwrap();
        let r = drift_thin(&y, None, &tau, &s).unwrap();
        assert!(r.is_martingale, "{}", format_rational(&r.max_residual));
        assert!(r.drift.rows().iter().flatten().any(|k| !k.value.is_zero()));
        let j = drift_jacod(&y, &exhausting_system(&tau, &s, None).unwrap(), &s).unwrap();
        assert!(j.is_martingale);
        assert!(restriction_consistency(&y, &tau, &s).unwrap().is_martingale);
        // without the drift G·Y is not an F^τ-martingale
        assert!(!is_martingale(&r.compensated.add(&r.drift), &r.enlarged.space).is_martingale);
    }

    #[test]
    fn honest_drift_matches_thin_drift_on_walk_maximum() {
        let s = models::walk_space(3);
        let tau = models::walk_last_max_time(&s, 3);
        let m = closed(&s, &[3, 1, 1, -1, 1, -1, -1, -3]);
        let h = drift_honest(&m, &tau, &s).unwrap();
        assert!(h.report.is_martingale);
        assert!(h.matches_thin);
        assert!(restriction_consistency(&m, &tau, &s).unwrap().is_martingale);
    }

    #[test]
    fn never_occurring_time_has_zero_honest_drift() {
        let s = models::coin_space();
        let h = drift_honest(&closed(&s, &[1, -1]), &RandomTime::infinite(&s), &s).unwrap();
        assert!(h.report.drift.rows().iter().flatten().all(|k| k.value.is_zero()));
        assert!(h.matches_thin);
    }

    #[test]
    fn non_martingales_and_non_honest_times_are_rejected() {
        let s = models::coin_space();
        let b = associated_processes(&models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity), &s);
        let tau = models::external_coin_time(&s);
        assert!(matches!(
            drift_thin(&b.a_o, None, &tau, &s),
            Err(Error::NotMartingale { .. })
        ));
        assert!(matches!(
            drift_honest(&closed(&s, &[1, -1]), &models::external_two_point_time(&s), &s),
            Err(Error::NotHonest { .. })
        ));
    }

    #[test]
    fn report_serializes_verdict() {
        let s = models::coin_space();
        let r = drift_thin(&closed(&s, &[1, -1]), None, &models::external_coin_time(&s), &s).unwrap();
        let v = r.to_json_value();
        assert_eq!(v["verdict"], "martingale");
        assert_eq!(v["residual"], "0/1");
    }
}
