//! Exhausting systems of thin times: stopping times `T_n` with disjoint
//! graphs, events `C_n = {τ = T_n < ∞}` (with `T_0 = ∞`, `C_0 = {τ = ∞}`)
//! and martingales `z^n_t = P(C_n | F_t)`.

use num_traits::Zero;

use crate::bundle::{classify, TimeProcessBundle};
use crate::error::{Error, Result};
use crate::path::{PathFlags, PiecewisePath};
use crate::random_time::{Piece, RandomTime};
use crate::rational::{zero, Rational, TimePoint};
use crate::space::{is_stopping_time, FilteredSpace, StoppingTime};

/// Membership of every `(leaf, piece)` of a time's layout.
pub type PieceSet = Vec<Vec<bool>>;

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustingSystem {
    tau: RandomTime,
    /// `times[0] ≡ ∞`.
    pub times: Vec<StoppingTime>,
    pub events: Vec<PieceSet>,
    pub martingales: Vec<PiecewisePath>,
}

impl ExhaustingSystem {
    pub fn tau(&self) -> &RandomTime {
        &self.tau
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `P(C_n | leaf)`.
    pub fn leaf_mass(&self, n: usize, leaf: usize) -> Rational {
        self.tau
            .leaf(leaf)
            .pieces()
            .iter()
            .zip(&self.events[n][leaf])
            .filter(|(_, &inside)| inside)
            .map(|(p, _)| p.mass())
            .sum()
    }

    pub fn event_mass(&self, n: usize, space: &FilteredSpace) -> Rational {
        (0..space.n_leaves())
            .map(|l| space.leaf_weight(l) * self.leaf_mass(n, l))
            .sum()
    }

    /// Index `n` of the event holding piece `j` of `leaf`.
    pub fn event_of(&self, leaf: usize, j: usize) -> usize {
        self.events
            .iter()
            .position(|e| e[leaf][j])
            .expect("events partition the layout")
    }

    /// Largest defect in `Z̃ = Σ 1_{t≤T_n} z^n`, `Z = Σ 1_{t<T_n} z^n`,
    /// `A° = Σ_{n≥1} 1_{t≥T_n} z^n_{T_n}` and `m = Σ z^n_{t∧T_n}` over the
    /// knots of the bundle.
    pub fn reconstruction_residuals(
        &self,
        bundle: &TimeProcessBundle,
        space: &FilteredSpace,
    ) -> [(&'static str, Rational); 4] {
        let mut worst = [zero(), zero(), zero(), zero()];
        let mut times = bundle.knot_times();
        for z in &self.martingales {
            times.extend(z.times().iter().cloned());
        }
        times.sort();
        times.dedup();
        for t in &times {
            let tp = TimePoint::Finite(t.clone());
            for a in 0..space.n_atoms() {
                let mut zt = zero();
                let mut z_ = zero();
                let mut ao = zero();
                let mut m = zero();
                for (n, (tn, zn)) in self.times.iter().zip(&self.martingales).enumerate() {
                    let tn = tn.at(a);
                    let v = zn.value(a, t);
                    if tp <= *tn {
                        zt += &v;
                    }
                    if tp < *tn {
                        z_ += &v;
                    }
                    if n >= 1 && *tn <= tp {
                        ao += zn.value_at(a, tn);
                    }
                    m += zn.value_at(a, &TimePoint::min(&tp, tn));
                }
                let defects = [
                    &bundle.z_tilde.value(a, t) - zt,
                    &bundle.z.value(a, t) - z_,
                    &bundle.a_o.value(a, t) - ao,
                    &bundle.m.value(a, t) - m,
                ];
                for (w, d) in worst.iter_mut().zip(defects) {
                    let d = num_traits::Signed::abs(&d);
                    if d > *w {
                        *w = d;
                    }
                }
            }
        }
        let [a, b, c, d] = worst;
        [
            ("reconstruct:Ztilde", a),
            ("reconstruct:Z", b),
            ("reconstruct:Ao", c),
            ("reconstruct:m", d),
        ]
    }

    /// `Σ_n z^n = 1`, `z^n > 0` and `z^n_- > 0` on `C_n`.
    pub fn martingale_family_holds(&self, space: &FilteredSpace) -> bool {
        let times = space.grid();
        for t in times {
            for a in 0..space.n_atoms() {
                let total: Rational = self.martingales.iter().map(|z| z.value(a, t)).sum();
                if total != crate::rational::one() {
                    return false;
                }
            }
        }
        for (n, z) in self.martingales.iter().enumerate() {
            for a in 0..space.n_atoms() {
                if !self.events[n][space.leaf_of(a)].iter().any(|&x| x) {
                    continue;
                }
                if times.iter().any(|t| !(z.value(a, t) > zero() && z.left(a, t) > zero())) {
                    return false;
                }
            }
        }
        true
    }
}

/// `z_t = P(C | F_t)` for per-atom masses `P(C | atom)`.
pub fn conditional_martingale(space: &FilteredSpace, per_atom: &[Rational]) -> PiecewisePath {
    let values: Vec<Vec<Rational>> = (0..space.grid().len())
        .map(|k| space.condition_atoms(k, per_atom))
        .collect();
    PiecewisePath::step(
        space.grid().to_vec(),
        &values,
        PathFlags {
            adapted: true,
            predictable: false,
            increasing: false,
        },
    )
}

/// Builds the exhausting system of a thin (or never occurring) time, either
/// from the sorted atom support or from user-supplied stopping times.
pub fn exhausting_system(
    tau: &RandomTime,
    space: &FilteredSpace,
    user_times: Option<Vec<StoppingTime>>,
) -> Result<ExhaustingSystem> {
    let class = classify(tau, space);
    if !class.thick_mass.is_zero() {
        return Err(Error::NotThin {
            thick_mass: class.thick_mass,
        });
    }
    let given = match user_times {
        Some(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if !is_stopping_time(t, space).stopping {
                    return Err(Error::NotStoppingTime(format!("T_{}", i + 1)));
                }
            }
            for i in 0..ts.len() {
                for j in (i + 1)..ts.len() {
                    let mass: Rational = (0..space.n_atoms())
                        .filter(|&a| ts[i].at(a).is_finite() && ts[i].at(a) == ts[j].at(a))
                        .map(|a| space.weight(a).clone())
                        .sum();
                    if !mass.is_zero() {
                        return Err(Error::GraphsNotDisjoint {
                            first: i + 1,
                            second: j + 1,
                            mass,
                        });
                    }
                }
            }
            ts
        }
        None => tau
            .atom_support()
            .into_iter()
            .map(|s| StoppingTime::constant(space, TimePoint::Finite(s)))
            .collect(),
    };
    let mut times = vec![StoppingTime::infinite(space)];
    times.extend(given);

    let leaf_atom = |l: usize| space.terminal().cells()[l][0];
    let mut events: Vec<PieceSet> = Vec::with_capacity(times.len());
    for (n, tn) in times.iter().enumerate() {
        let set = tau
            .leaves()
            .iter()
            .enumerate()
            .map(|(l, law)| {
                law.pieces()
                    .iter()
                    .map(|p| match p {
                        Piece::Atom { at, .. } if n == 0 => !at.is_finite(),
                        Piece::Atom { at, .. } => at.is_finite() && at == tn.at(leaf_atom(l)),
                        Piece::Density { .. } => false,
                    })
                    .collect()
            })
            .collect();
        events.push(set);
    }
    let mut uncovered = zero();
    for (l, law) in tau.leaves().iter().enumerate() {
        for (j, p) in law.pieces().iter().enumerate() {
            if !events.iter().any(|e| e[l][j]) {
                uncovered += space.leaf_weight(l) * p.mass();
            }
        }
    }
    if !uncovered.is_zero() {
        return Err(Error::NotCovering { uncovered });
    }
    let mut system = ExhaustingSystem {
        tau: tau.clone(),
        times,
        events,
        martingales: Vec::new(),
    };
    system.martingales = (0..system.times.len())
        .map(|n| {
            let per_leaf: Vec<Rational> = (0..space.n_leaves()).map(|l| system.leaf_mass(n, l)).collect();
            conditional_martingale(space, &space.leaf_to_atoms(&per_leaf))
        })
        .collect();
    Ok(system)
}

/// Merges two exhausting systems of the same time into the system indexed by
/// pairs `(n, m)`: `U_{n,m} = T_n` on `{T_n = S_m}`, `∞` elsewhere, and
/// `D_{n,m} = C_n ∩ B_m`.
pub fn merge_exhausting(
    a: &ExhaustingSystem,
    b: &ExhaustingSystem,
    space: &FilteredSpace,
) -> Result<ExhaustingSystem> {
    if !a.tau.same_pointwise(&b.tau) {
        return Err(Error::MismatchedTime);
    }
    let (tau, _) = a.tau.align(&b.tau);
    // Re-derive both systems on the aligned layout so events can be intersected.
    let a = exhausting_system(&tau, space, Some(a.times[1..].to_vec()))?;
    let b = exhausting_system(&tau, space, Some(b.times[1..].to_vec()))?;
    let mut merged_times = Vec::new();
    let mut expected = Vec::new();
    for n in 1..a.times.len() {
        for m in 1..b.times.len() {
            let values = (0..space.n_atoms())
                .map(|x| {
                    let t = a.times[n].at(x);
                    if t == b.times[m].at(x) {
                        t.clone()
                    } else {
                        TimePoint::Infinity
                    }
                })
                .collect();
            merged_times.push(StoppingTime { values });
            expected.push((n, m));
        }
    }
    let merged = exhausting_system(&tau, space, Some(merged_times))?;
    for (i, (n, m)) in expected.into_iter().enumerate() {
        let d = &merged.events[i + 1];
        for l in 0..space.n_leaves() {
            for j in 0..d[l].len() {
                if d[l][j] != (a.events[n][l][j] && b.events[m][l][j]) {
                    return Err(Error::MismatchedTime);
                }
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::associated_processes;
    use crate::models;
    use crate::rational::{int, one, q};

    #[test]
    fn never_occurring_time_has_only_the_zeroth_event() {
        let s = models::coin_space();
        let sys = exhausting_system(&RandomTime::infinite(&s), &s, None).unwrap();
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.martingales[0].values(&one()), vec![one(), one()]);
    }

    #[test]
    fn coin_indexed_time_reconstructs_exactly() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let sys = exhausting_system(&tau, &s, None).unwrap();
        assert_eq!(sys.len(), 3);
        assert_eq!(sys.martingales[1].values(&zero()), vec![q(1, 2), q(1, 2)]);
        assert_eq!(sys.martingales[1].values(&one()), vec![one(), zero()]);
        let b = associated_processes(&tau, &s);
        for (tag, r) in sys.reconstruction_residuals(&b, &s) {
            assert!(r.is_zero(), "{tag}");
        }
        assert!(sys.martingale_family_holds(&s));
    }

    #[test]
    fn thick_times_are_rejected() {
        let s = models::trivial_space();
        let err = exhausting_system(&models::uniform_time(&s, zero(), one()), &s, None);
        assert!(matches!(err, Err(Error::NotThin { .. })));
    }

    #[test]
    fn bad_user_sequences_are_reported() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let one_t = StoppingTime::constant(&s, TimePoint::Finite(one()));
        let err = exhausting_system(&tau, &s, Some(vec![one_t.clone(), one_t.clone()]));
        assert!(matches!(err, Err(Error::GraphsNotDisjoint { first: 1, second: 2, .. })));
        let err = exhausting_system(&tau, &s, Some(vec![one_t]));
        assert_eq!(err.unwrap_err(), Error::NotCovering { uncovered: q(1, 2) });
    }

    #[test]
    fn merging_with_itself_keeps_the_diagonal() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let sys = exhausting_system(&tau, &s, None).unwrap();
        let merged = merge_exhausting(&sys, &sys, &s).unwrap();
        assert_eq!(merged.len(), 5);
        assert_eq!(merged.event_mass(1, &s), q(1, 2));
        assert_eq!(merged.event_mass(2, &s), zero());
        assert_eq!(merged.event_mass(4, &s), q(1, 2));
        let other = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let sys2 = exhausting_system(&other, &s, None).unwrap();
        assert_eq!(merge_exhausting(&sys, &sys2, &s).unwrap_err(), Error::MismatchedTime);
    }

    #[test]
    fn user_sequence_merges_with_canonical() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let user = StoppingTime {
            values: vec![TimePoint::Finite(one()), TimePoint::Finite(int(2))],
        };
        let sys_user = exhausting_system(&tau, &s, Some(vec![user])).unwrap();
        let sys = exhausting_system(&tau, &s, None).unwrap();
        let merged = merge_exhausting(&sys, &sys_user, &s).unwrap();
        let total: Rational = (0..merged.len()).map(|n| merged.event_mass(n, &s)).sum();
        assert_eq!(total, one());
    }
}
