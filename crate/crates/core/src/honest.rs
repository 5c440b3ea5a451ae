//! Honest times: detection through `Z̃_τ = 1`, the running envelope `α` of
//! past `τ`-values, identities for thin honest times and the exhausting
//! sequence read off a jumping filtration.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::bundle::{associated_processes, TimeProcessBundle};
use crate::decompose::thin_thick_decompose;
use crate::error::{Error, Result};
use crate::exhaust::{exhausting_system, merge_exhausting, ExhaustingSystem};
use crate::path::{PathFlags, PiecewisePath};
use crate::random_time::{Piece, RandomTime};
use crate::rational::{format_rational, one, zero, Rational, TimePoint};
use crate::space::{is_measurable_on, FilteredSpace, StoppingTime};

#[derive(Clone, Debug, PartialEq)]
pub struct HonestCertificate {
    pub honest: bool,
    /// `P(Z̃_τ < 1, τ < ∞)`.
    pub violation_mass: Rational,
    /// Built when the time is honest and purely atomic.
    pub alpha: Option<PiecewisePath>,
    /// `α_t = τ` on `{τ <= t}` and `τ = sup{t : α_t = t}` on `{τ < ∞}`.
    pub alpha_consistent: bool,
    /// `α_{t-}` is measurable for the partition preceding each grid point.
    pub alpha_left_predictable: bool,
}

impl HonestCertificate {
    pub fn to_json_value(&self, space: &FilteredSpace) -> serde_json::Value {
        let ids: Vec<String> = space.atoms().iter().map(|a| a.id.clone()).collect();
        serde_json::json!({
            "honest": self.honest,
            "violation_mass": format_rational(&self.violation_mass),
            "alpha": self.alpha.as_ref().map(|a| a.to_json_value(&ids)),
        })
    }
}

/// Lebesgue measure of `{s in (lo, hi) : f(s) != 1}` for `f` given on knot
/// intervals of `path` row `a`.
fn measure_not_one(path: &PiecewisePath, a: usize, lo: &Rational, hi: &Rational) -> Rational {
    let times = path.times();
    let row = path.row(a);
    let mut total = zero();
    for i in 0..times.len() {
        let start = if &times[i] > lo { times[i].clone() } else { lo.clone() };
        let end = match times.get(i + 1) {
            Some(next) if next < hi => next.clone(),
            _ => hi.clone(),
        };
        if start >= end {
            continue;
        }
        let k = &row[i];
        // affine and below 1: equal to 1 on at most one point unless flat at 1
        if !(k.right.is_one() && k.slope.is_zero()) {
            total += end - start;
        }
    }
    total
}

fn honest_violation(tau: &RandomTime, space: &FilteredSpace, b: &TimeProcessBundle) -> Rational {
    let mut mass = zero();
    for a in 0..space.n_atoms() {
        let w = space.weight(a);
        for p in tau.leaf(space.leaf_of(a)).pieces() {
            match p {
                Piece::Atom {
                    at: TimePoint::Finite(s),
                    mass: pm,
                } => {
                    if b.z_tilde.value(a, s) < one() {
                        mass += w * pm;
                    }
                }
                Piece::Atom { .. } => {}
                Piece::Density { start, end, level } => {
                    mass += w * level * measure_not_one(&b.z_tilde, a, start, end);
                }
            }
        }
    }
    mass
}

fn alpha_times(tau: &RandomTime, space: &FilteredSpace) -> Vec<Rational> {
    let mut t: Vec<Rational> = space.grid().iter().cloned().chain(tau.atom_support()).collect();
    t.sort();
    t.dedup();
    t
}

/// Running maximum over knots `s <= t` of the largest `τ`-value `<= s` carried
/// by the `F_s`-cell; 0 before anything is seen.
fn alpha_path(tau: &RandomTime, space: &FilteredSpace) -> PiecewisePath {
    let times = alpha_times(tau, space);
    let mut running = vec![zero(); space.n_atoms()];
    let mut values = Vec::with_capacity(times.len());
    for s in &times {
        let part = space.partition(space.index_at(s));
        for cell in part.cells() {
            let seen = cell
                .iter()
                .flat_map(|&a| tau.leaf(space.leaf_of(a)).pieces().iter())
                .filter_map(|p| match p {
                    Piece::Atom {
                        at: TimePoint::Finite(v),
                        mass,
                    } if v <= s && mass.is_positive() => Some(v.clone()),
                    _ => None,
                })
                .max();
            if let Some(v) = seen {
                for &a in cell {
                    if v > running[a] {
                        running[a] = v.clone();
                    }
                }
            }
        }
        values.push(running.clone());
    }
    PiecewisePath::step(
        times,
        &values,
        PathFlags {
            adapted: true,
            predictable: false,
            increasing: true,
        },
    )
}

fn alpha_consistent(alpha: &PiecewisePath, tau: &RandomTime, space: &FilteredSpace) -> bool {
    let times = alpha.times();
    (0..space.n_atoms()).all(|a| {
        tau.leaf(space.leaf_of(a)).pieces().iter().all(|p| match p {
            Piece::Atom {
                at: TimePoint::Finite(s),
                ..
            } => {
                let after = times.iter().filter(|t| *t >= s).all(|t| &alpha.value(a, t) == s);
                let sup = times.iter().filter(|t| &alpha.value(a, t) == *t).max();
                after && sup == Some(s)
            }
            _ => true,
        })
    })
}

fn alpha_left_predictable(alpha: &PiecewisePath, space: &FilteredSpace) -> bool {
    space.grid().iter().all(|g| {
        let lefts = alpha.lefts(g);
        is_measurable_on(space.partition(space.pre_index_at(g)), &lefts)
    })
}

pub fn is_honest(tau: &RandomTime, space: &FilteredSpace) -> HonestCertificate {
    let b = associated_processes(tau, space);
    let violation_mass = honest_violation(tau, space, &b);
    let honest = violation_mass.is_zero();
    let alpha = (honest && tau.is_atomic()).then(|| alpha_path(tau, space));
    let (consistent, left_ok) = match &alpha {
        Some(al) => (alpha_consistent(al, tau, space), alpha_left_predictable(al, space)),
        None => (false, false),
    };
    HonestCertificate {
        honest,
        violation_mass,
        alpha,
        alpha_consistent: consistent,
        alpha_left_predictable: left_ok,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HonestThickReport {
    /// Mass of the thin part where `Z_τ >= 1`.
    #[serde(with = "crate::rational::serde_q")]
    pub thin_violation: Rational,
    /// Mass of the thick part where `Z_τ != 1`.
    #[serde(with = "crate::rational::serde_q")]
    pub thick_violation: Rational,
    pub thin_part_honest: bool,
    pub thick_part_honest: bool,
}

impl HonestThickReport {
    pub fn holds(&self) -> bool {
        self.thin_violation.is_zero()
            && self.thick_violation.is_zero()
            && self.thin_part_honest
            && self.thick_part_honest
    }
}

/// `Z_τ < 1` on the thin part, `Z_τ = 1` on the thick part, and both parts
/// honest.
pub fn honest_thick_criterion(tau: &RandomTime, space: &FilteredSpace) -> Result<HonestThickReport> {
    let cert = is_honest(tau, space);
    if !cert.honest {
        return Err(Error::NotHonest {
            violation_mass: cert.violation_mass,
        });
    }
    let b = associated_processes(tau, space);
    let mut thin_violation = zero();
    let mut thick_violation = zero();
    for a in 0..space.n_atoms() {
        let w = space.weight(a);
        for p in tau.leaf(space.leaf_of(a)).pieces() {
            match p {
                Piece::Atom {
                    at: TimePoint::Finite(s),
                    mass,
                } => {
                    if b.z.value(a, s) >= one() {
                        thin_violation += w * mass;
                    }
                }
                Piece::Atom { .. } => {}
                Piece::Density { start, end, level } => {
                    thick_violation += w * level * measure_not_one(&b.z, a, start, end);
                }
            }
        }
    }
    let d = thin_thick_decompose(tau, space);
    Ok(HonestThickReport {
        thin_violation,
        thick_violation,
        thin_part_honest: is_honest(&d.thin, space).honest,
        thick_part_honest: is_honest(&d.thick, space).honest,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThinHonestReport {
    /// Largest deviation over all identities, with the compensator identity in
    /// the form `A°_t = A°_{T_n-} + z^n_{T_n}`.
    #[serde(with = "crate::rational::serde_q")]
    pub residual: Rational,
    /// Largest deviation of the form `A°_t = z^n_{T_n}` and
    /// `1 - m_t = z^n_t - z^n_{T_n}`, which drops `A°_{T_n-}`.
    #[serde(with = "crate::rational::serde_q")]
    pub unshifted_residual: Rational,
    pub checked: usize,
}

/// Identities tying `z^n`, `Z`, `Z̃`, `A°` and `m` of a thin honest time
/// together through `τ_t = α_t`.
pub fn thin_honest_identities(tau: &RandomTime, space: &FilteredSpace) -> Result<ThinHonestReport> {
    let cert = is_honest(tau, space);
    if !cert.honest {
        return Err(Error::NotHonest {
            violation_mass: cert.violation_mass,
        });
    }
    let system = exhausting_system(tau, space, None)?;
    let alpha = cert.alpha.expect("thin honest times carry alpha");
    let b = associated_processes(tau, space);
    let mut times = b.knot_times();
    times.extend(alpha.times().iter().cloned());
    times.sort();
    times.dedup();

    // identities shared by both readings, the shifted compensator form and
    // the unshifted one
    let mut common = zero();
    let mut shifted = zero();
    let mut unshifted = zero();
    let mut checked = 0;
    let bump = |r: &mut Rational, d: Rational| {
        let d = d.abs();
        if d > *r {
            *r = d;
        }
    };
    for t in &times {
        for a in 0..space.n_atoms() {
            let al = alpha.value(a, t);
            let al_left = alpha.left(a, t);
            let mut hits = 0;
            for n in 1..system.len() {
                let z = &system.martingales[n];
                let tn = system.times[n].at(a).as_finite().expect("canonical times are finite").clone();
                let zn_tn = z.value(a, &tn);
                if tn == al {
                    checked += 1;
                    let ao_before = b.a_o.left(a, &tn);
                    bump(&mut common, z.value(a, t) - (one() - b.z.value(a, t)));
                    bump(&mut shifted, b.a_o.value(a, t) - (&ao_before + &zn_tn));
                    bump(
                        &mut shifted,
                        (one() - b.m.value(a, t)) - (z.value(a, t) - &zn_tn - &ao_before),
                    );
                    bump(&mut unshifted, b.a_o.value(a, t) - &zn_tn);
                    bump(&mut unshifted, (one() - b.m.value(a, t)) - (z.value(a, t) - &zn_tn));
                }
                if &tn < t {
                    checked += 1;
                    let ind = |x: &Rational| if *x == tn { one() } else { zero() };
                    bump(&mut common, z.value(a, t) - ind(&al) * (one() - b.z_tilde.value(a, t)));
                    bump(&mut common, z.left(a, t) - ind(&al_left) * (one() - b.z.left(a, t)));
                    if tn == al {
                        hits += 1;
                    }
                }
            }
            // 1 - Z̃_t is carried by exactly one event {τ_t = T_n < t}
            let covered = if hits == 1 { one() } else { zero() };
            bump(&mut common, (one() - b.z_tilde.value(a, t)) * (one() - covered));
        }
    }
    Ok(ThinHonestReport {
        residual: common.clone().max(shifted),
        unshifted_residual: common.max(unshifted),
        checked,
    })
}

/// Exhausting sequence of an honest time from the grid viewed as a jumping
/// sequence: on `{θ_{n-1} <= τ < θ_n}`, `τ = α_{θ_n-}`, which is known at
/// `θ_{n-1}`. The result is cross-checked by merging with the canonical
/// system.
pub fn jumping_exhaust(tau: &RandomTime, space: &FilteredSpace) -> Result<ExhaustingSystem> {
    let cert = is_honest(tau, space);
    if !cert.honest {
        return Err(Error::NotHonest {
            violation_mass: cert.violation_mass,
        });
    }
    if !tau.is_atomic() {
        return Err(Error::ThickHonestOnJumpingFiltration);
    }
    let alpha = cert.alpha.expect("atomic honest times carry alpha");
    let grid = space.grid();
    let mut times = Vec::with_capacity(grid.len());
    for n in 1..=grid.len() {
        let lower = &grid[n - 1];
        let values = (0..space.n_atoms())
            .map(|a| {
                let v = match grid.get(n) {
                    Some(theta) => alpha.left(a, theta),
                    None => alpha.terminal(a),
                };
                if &v >= lower {
                    TimePoint::Finite(v)
                } else {
                    TimePoint::Infinity
                }
            })
            .collect();
        times.push(StoppingTime { values });
    }
    let system = exhausting_system(tau, space, Some(times))?;
    let canonical = exhausting_system(tau, space, None)?;
    merge_exhausting(&system, &canonical, space)?;
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{int, q};

    #[test]
    fn stopping_times_are_honest() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let c = is_honest(&tau, &s);
        assert!(c.honest && c.alpha_consistent && c.alpha_left_predictable);
        let al = c.alpha.unwrap();
        assert_eq!(al.values(&int(2)), vec![one(), int(2)]);
        let sys = jumping_exhaust(&tau, &s).unwrap();
        assert!(sys.times[1..].iter().any(|t| t.values[0] == TimePoint::Finite(one())));
    }

    #[test]
    fn walk_maximum_is_honest_and_thin() {
        let s = models::walk_space(3);
        let tau = models::walk_last_max_time(&s, 3);
        let c = is_honest(&tau, &s);
        assert!(c.honest && c.alpha_consistent && c.alpha_left_predictable);
        let r = honest_thick_criterion(&tau, &s).unwrap();
        assert!(r.holds(), "{r:?}");
        let id = thin_honest_identities(&tau, &s).unwrap();
        assert!(id.residual.is_zero() && id.checked > 0, "{id:?}");
        jumping_exhaust(&tau, &s).unwrap();
    }

    #[test]
    fn hidden_coin_is_not_honest() {
        let s = models::coin_space();
        // a single finite value is always honest
        assert!(is_honest(&models::external_coin_time(&s), &s).honest);
        let c = is_honest(&models::external_two_point_time(&s), &s);
        assert!(!c.honest);
        assert_eq!(c.violation_mass, q(1, 2));
        assert!(matches!(
            thin_honest_identities(&models::external_two_point_time(&s), &s),
            Err(Error::NotHonest { .. })
        ));
    }

    #[test]
    fn densities_are_never_honest_here() {
        let s = models::trivial_space();
        let c = is_honest(&models::uniform_time(&s, zero(), one()), &s);
        assert_eq!(c.violation_mass, one());
        let never = is_honest(&RandomTime::infinite(&s), &s);
        assert!(never.honest);
        assert!(honest_thick_criterion(&RandomTime::infinite(&s), &s).unwrap().holds());
    }

    #[test]
    fn late_split_needs_the_shifted_compensator_identity() {
        // τ = 1 on a, 2 on b; a and b are told apart only at time 2.
        let s = models::split_space(&[zero(), one(), int(2)], 2);
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let r = thin_honest_identities(&tau, &s).unwrap();
        assert!(r.residual.is_zero());
        assert_eq!(r.unshifted_residual, q(1, 2));
    }
}
