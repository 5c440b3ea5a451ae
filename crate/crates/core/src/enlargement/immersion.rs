//! Immersion of `F` in `F^τ`, and the agreement of `F^τ` with `F^C` after `τ`.

use num_traits::Zero;
use serde::Serialize;

use super::{enlarge_initial, enlarge_progressive, is_martingale};
use crate::bundle::associated_processes;
use crate::decompose::thin_thick_decompose;
use crate::error::{Error, Result};
use crate::exhaust::exhausting_system;
use crate::path::PiecewisePath;
use crate::random_time::RandomTime;
use crate::rational::{Rational, TimePoint};
use crate::space::{is_stopping_time, FilteredSpace, StoppingTime};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThinConditions {
    /// `z^n_∞ = z^n_{T_n}`.
    pub terminal_equals_stopped: bool,
    /// `z^n_t = z^n_{T_n ∧ t}` for all t.
    pub stopped_at_tn: bool,
    /// `C_n` independent of `F_∞` given `F_{T_n}`, by exact factorization.
    pub conditional_independence: bool,
}

impl ThinConditions {
    pub fn consistent(&self) -> bool {
        self.terminal_equals_stopped == self.stopped_at_tn
            && self.stopped_at_tn == self.conditional_independence
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ImmersionReport {
    /// `Z_t = P(τ > t | F_∞)` at every knot.
    pub immersed: bool,
    /// Present for purely atomic times.
    pub thin_conditions: Option<ThinConditions>,
    pub thin_part_immersed: bool,
    pub thick_part_immersed: bool,
    /// Immersion for `τ` iff immersion for both parts.
    pub decomposition_consistent: bool,
}

fn z_criterion(tau: &RandomTime, space: &FilteredSpace) -> bool {
    let b = associated_processes(tau, space);
    b.z.times().iter().all(|t| {
        (0..space.n_atoms()).all(|a| {
            let law = tau.leaf(space.leaf_of(a));
            b.z.value(a, t) == law.survival(t) && b.z.left(a, t) == law.at_or_after(t)
        })
    }) && (0..space.n_atoms()).all(|a| b.z.terminal(a) == tau.leaf(space.leaf_of(a)).infinite_mass())
}

fn thin_conditions(tau: &RandomTime, space: &FilteredSpace) -> Result<ThinConditions> {
    let system = exhausting_system(tau, space, None)?;
    let mut times: Vec<Rational> = space.grid().iter().cloned().chain(tau.atom_support()).collect();
    times.sort();
    times.dedup();
    let mut a_ok = true;
    let mut b_ok = true;
    let mut c_ok = true;
    for n in 1..system.len() {
        let z = &system.martingales[n];
        let tn = &system.times[n];
        for a in 0..space.n_atoms() {
            if z.terminal(a) != z.value_at(a, tn.at(a)) {
                a_ok = false;
            }
            for t in &times {
                let stopped = TimePoint::min(tn.at(a), &TimePoint::Finite(t.clone()));
                if z.value(a, t) != z.value_at(a, &stopped) {
                    b_ok = false;
                }
            }
        }
        let cells = tn.stopped_partition(space);
        for d in cells.cells() {
            let pd: Rational = d.iter().map(|&a| space.weight(a).clone()).sum();
            let mass = |filter: &dyn Fn(usize) -> bool, with_event: bool| -> Rational {
                d.iter()
                    .filter(|&&a| filter(a))
                    .map(|&a| {
                        let w = space.weight(a).clone();
                        if with_event {
                            w * system.leaf_mass(n, space.leaf_of(a))
                        } else {
                            w
                        }
                    })
                    .sum()
            };
            let pcd = mass(&|_| true, true);
            for leaf in 0..space.n_leaves() {
                let in_leaf = |a: usize| space.leaf_of(a) == leaf;
                if mass(&in_leaf, true) * &pd != &pcd * mass(&in_leaf, false) {
                    c_ok = false;
                }
            }
        }
    }
    Ok(ThinConditions {
        terminal_equals_stopped: a_ok,
        stopped_at_tn: b_ok,
        conditional_independence: c_ok,
    })
}

pub fn immersion_test(tau: &RandomTime, space: &FilteredSpace) -> Result<ImmersionReport> {
    let immersed = z_criterion(tau, space);
    let thin_conditions = if tau.is_atomic() {
        Some(thin_conditions(tau, space)?)
    } else {
        None
    };
    let d = thin_thick_decompose(tau, space);
    let thin_part_immersed = z_criterion(&d.thin, space);
    let thick_part_immersed = z_criterion(&d.thick, space);
    Ok(ImmersionReport {
        immersed,
        thin_conditions,
        thin_part_immersed,
        thick_part_immersed,
        decomposition_consistent: immersed == (thin_part_immersed && thick_part_immersed),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProjectLemmaReport {
    pub martingale_initial: bool,
    pub martingale_progressive: bool,
    /// `ϑ ∨ τ` is an `F^τ`-stopping time for every given `F^C`-stopping time `ϑ`.
    pub max_with_tau_stopping: bool,
    pub checked_stopping_times: usize,
}

impl ProjectLemmaReport {
    pub fn holds(&self) -> bool {
        self.martingale_initial == self.martingale_progressive && self.max_with_tau_stopping
    }
}

/// `y` lives on the enlarged atoms shared by `F^τ` and `F^C` and must vanish
/// up to `τ`. Candidates in `thetas` that are not `F^C`-stopping times are
/// skipped.
pub fn project_lemma_check(
    y: &PiecewisePath,
    tau: &RandomTime,
    space: &FilteredSpace,
    thetas: &[StoppingTime],
) -> Result<ProjectLemmaReport> {
    let system = exhausting_system(tau, space, None)?;
    let ep = enlarge_progressive(space, tau)?;
    let ec = enlarge_initial(space, &system)?;
    if y.n_rows() != ep.n_atoms() {
        return Err(Error::InvalidParams("Y must have one row per enlarged atom".into()));
    }
    let y = y.refine(ep.space.grid());
    for (i, t) in y.times().iter().enumerate() {
        for ea in 0..ep.n_atoms() {
            if !ep.values[ea][0].lt(t) && !y.row(ea)[i].value.is_zero() {
                return Err(Error::InvalidParams("Y does not vanish up to tau".into()));
            }
        }
    }
    let tau_st = ep.time_as_stopping(0);
    let mut checked = 0;
    let mut ok = true;
    for theta in thetas {
        if theta.values.len() != ec.n_atoms() || !is_stopping_time(theta, &ec.space).stopping {
            continue;
        }
        checked += 1;
        let joined = StoppingTime {
            values: theta
                .values
                .iter()
                .zip(&tau_st.values)
                .map(|(a, b)| TimePoint::max(a, b))
                .collect(),
        };
        ok &= is_stopping_time(&joined, &ep.space).stopping;
    }
    Ok(ProjectLemmaReport {
        martingale_initial: is_martingale(&y, &ec.space).is_martingale,
        martingale_progressive: is_martingale(&y, &ep.space).is_martingale,
        max_with_tau_stopping: ok,
        checked_stopping_times: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enlargement::drift::after_tau;
    use crate::enlargement::drift_thin;
    use crate::exhaust::conditional_martingale;
    use crate::models;
    use crate::rational::{int, one, zero};

    #[test]
    fn independent_time_is_immersed() {
        let s = models::walk_space(2);
        let r = immersion_test(&models::external_coin_time(&s), &s).unwrap();
        assert!(r.immersed);
        let c = r.thin_conditions.unwrap();
        assert!(c.terminal_equals_stopped && c.stopped_at_tn && c.conditional_independence);
        assert!(r.decomposition_consistent);
    }

    #[test]
    fn walk_maximum_is_not_immersed() {
        let s = models::walk_space(3);
        let r = immersion_test(&models::walk_last_max_time(&s, 3), &s).unwrap();
        assert!(!r.immersed);
        let c = r.thin_conditions.unwrap();
        assert!(c.consistent() && !c.stopped_at_tn);
        assert!(r.decomposition_consistent);
    }

    #[test]
    fn stopping_time_and_mixture_are_immersed() {
        let s = models::coin_space();
        let st = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        assert!(immersion_test(&st, &s).unwrap().immersed);
        let mix = models::atom_uniform_mixture(&s);
        let r = immersion_test(&mix, &s).unwrap();
        assert!(r.immersed && r.thin_part_immersed && r.thick_part_immersed);
        assert!(r.thin_conditions.is_none());
    }

    #[test]
    fn project_lemma_on_walk_maximum() {
        let s = models::walk_space(2);
        let tau = models::walk_last_max_time(&s, 2);
        let ep = enlarge_progressive(&s, &tau).unwrap();
        let zero_path = PiecewisePath::constant(ep.n_atoms(), zero());
        let thetas = vec![
            StoppingTime::constant(&ep.space, TimePoint::Finite(one())),
            ep.time_as_stopping(0),
        ];
        let r = project_lemma_check(&zero_path, &tau, &s, &thetas).unwrap();
        assert!(r.martingale_initial && r.martingale_progressive && r.holds());
        assert_eq!(r.checked_stopping_times, 2);

        let y = conditional_martingale(&s, &[int(2), zero(), zero(), int(-2)]);
        let thin = drift_thin(&y, None, &tau, &s).unwrap();
        let post = after_tau(&thin.compensated, &thin.enlarged);
        let r = project_lemma_check(&post, &tau, &s, &[]).unwrap();
        assert!(r.martingale_initial && r.martingale_progressive);

        let raw = after_tau(&ep.lift_path(&y), &ep);
        let r = project_lemma_check(&raw, &tau, &s, &[]).unwrap();
        assert!(r.holds() && !r.martingale_progressive);
    }
}
