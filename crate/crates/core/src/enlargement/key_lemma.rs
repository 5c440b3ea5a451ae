//! Conditional expectations given `F^τ_t` after a thin time, expressed
//! through `F_t`.

use num_traits::Signed;
use serde::Serialize;

use super::{enlarge_progressive, is_finite_atom, piece_of};
use crate::error::Result;
use crate::exhaust::exhausting_system;
use crate::random_time::RandomTime;
use crate::rational::{zero, Rational};
use crate::space::{FilteredSpace, RandomVariable};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeyLemmaReport {
    #[serde(with = "crate::rational::serde_q")]
    pub time: Rational,
    /// Largest `|E[X | F^τ_t] - E[X 1_{C_n} | F_t] / z^n_t|` on
    /// `{t >= T_n} ∩ C_n`, `n >= 1`.
    #[serde(with = "crate::rational::serde_q")]
    pub residual: Rational,
    /// Same comparison on `{s >= T_n} ∩ C_n` for the last grid point `s <= t`.
    #[serde(with = "crate::rational::serde_q")]
    pub earlier_residual: Rational,
    /// Enlarged atoms on which the identity was evaluated.
    pub checked_atoms: usize,
}

pub fn key_lemma_evaluate(
    x: &RandomVariable,
    tau: &RandomTime,
    space: &FilteredSpace,
    t: &Rational,
) -> Result<KeyLemmaReport> {
    let e = enlarge_progressive(space, tau)?;
    let system = exhausting_system(tau, space, None)?;
    let lhs = e
        .space
        .condition_atoms(e.space.index_at(t), &e.atom_means(x));

    let k = space.index_at(t);
    // E[X 1_{C_n} | F_t] and z^n_t, per base atom and event
    let mut num = Vec::with_capacity(system.len());
    let mut den = Vec::with_capacity(system.len());
    for n in 0..system.len() {
        let raw: Vec<Rational> = (0..space.n_atoms())
            .map(|a| {
                let leaf = space.leaf_of(a);
                tau.leaf(leaf)
                    .u_intervals()
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| system.events[n][leaf][*j])
                    .map(|(_, (lo, hi))| x.integral(a, lo, hi))
                    .sum()
            })
            .collect();
        num.push(space.condition_atoms(k, &raw));
        den.push(
            (0..space.n_atoms())
                .map(|a| system.martingales[n].value(a, t))
                .collect::<Vec<_>>(),
        );
    }

    // last grid point s <= t: the earlier events {s >= T_n} ∩ C_n
    let s_last = &space.grid()[k];
    let mut residual = zero();
    let mut earlier = zero();
    let mut checked = 0;
    for ea in 0..e.n_atoms() {
        let a = e.back_map[ea];
        let leaf = space.leaf_of(a);
        let j = piece_of(tau, leaf, &e.u_sets[ea][0].0);
        if !is_finite_atom(&tau.leaf(leaf).pieces()[j]) {
            continue;
        }
        let n = system.event_of(leaf, j);
        let tn = system.times[n].at(a);
        if !tn.le(t) {
            continue;
        }
        checked += 1;
        let rhs = &num[n][a] / &den[n][a];
        let d = (&lhs[ea] - rhs).abs();
        if d > residual {
            residual = d.clone();
        }
        if tn.le(s_last) && d > earlier {
            earlier = d;
        }
    }
    Ok(KeyLemmaReport {
        time: t.clone(),
        residual,
        earlier_residual: earlier,
        checked_atoms: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use num_traits::Zero;
    use crate::rational::{int, one, q, TimePoint};
    use crate::space::{PiecewisePoly, Poly};

    #[test]
    fn key_lemma_on_a_walk_with_a_two_point_time() {
        let s = models::walk_space(3);
        // τ = 1 or 2 with probabilities depending on the first move, plus a hidden ∞
        let mut leaves = Vec::new();
        for l in 0..s.n_leaves() {
            let a = s.terminal().cells()[l][0];
            let up = s.atoms()[a].id.starts_with('u');
            let p1 = if up { q(1, 3) } else { q(1, 5) };
            leaves.push(vec![
                crate::random_time::Piece::Atom {
                    at: TimePoint::Finite(one()),
                    mass: p1.clone(),
                },
                crate::random_time::Piece::Atom {
                    at: TimePoint::Finite(int(2)),
                    mass: q(1, 4),
                },
                crate::random_time::Piece::infinite(one() - p1 - q(1, 4)),
            ]);
        }
        let tau = RandomTime::from_leaf_pieces(&s, leaves).unwrap();
        let x = RandomVariable::new(
            (0..s.n_atoms())
                .map(|a| {
                    PiecewisePoly::new(vec![(
                        zero(),
                        one(),
                        Poly(vec![int(a as i64), q(1, 2), int(3)]),
                    )])
                    .unwrap()
                })
                .collect(),
        );
        for t in [zero(), one(), int(2), int(3)] {
            let r = key_lemma_evaluate(&x, &tau, &s, &t).unwrap();
            assert!(r.residual.is_zero() && r.earlier_residual.is_zero(), "{r:?}");
        }
        let r = key_lemma_evaluate(&x, &tau, &s, &int(2)).unwrap();
        assert!(r.checked_atoms > 0);
    }
}
