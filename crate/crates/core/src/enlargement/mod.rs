//! Progressive and initial enlargements of a finite filtration by purely
//! atomic random times.
//!
//! Enlarged atoms are pairs `(ω, values)` where `values` collects the outcomes
//! of the enlarging times on a set of auxiliary coordinates. Each enlarged
//! atom remembers the `u`-intervals it was built from, so `G`-measurable
//! variables can be averaged onto it exactly.

mod drift;
mod immersion;
mod key_lemma;

use num_traits::{Signed, Zero};
use serde::Serialize;

pub use drift::{
    after_tau, drift_honest, drift_jacod, drift_thin, restriction_consistency, DriftReport,
    HonestDrift,
};
pub use immersion::{immersion_test, project_lemma_check, ImmersionReport, ProjectLemmaReport};
pub use key_lemma::{key_lemma_evaluate, KeyLemmaReport};

use crate::error::{Error, Result};
use crate::exhaust::ExhaustingSystem;
use crate::path::PiecewisePath;
use crate::random_time::{Piece, RandomTime};
use crate::rational::{zero, Rational, TimePoint};
use crate::space::{Atom, FilteredSpace, Partition, RandomVariable, StoppingTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnlargementKind {
    Progressive,
    Initial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnlargedSpace {
    pub space: FilteredSpace,
    /// Enlarged atom to base atom.
    pub back_map: Vec<usize>,
    /// Outcome of every enlarging time on the atom.
    pub values: Vec<Vec<TimePoint>>,
    /// Auxiliary intervals making up the atom.
    pub u_sets: Vec<Vec<(Rational, Rational)>>,
    pub kind: EnlargementKind,
}

struct AtomTable {
    atoms: Vec<Atom>,
    back_map: Vec<usize>,
    values: Vec<Vec<TimePoint>>,
    u_sets: Vec<Vec<(Rational, Rational)>>,
}

fn atom_table(space: &FilteredSpace, times: &[&RandomTime]) -> Result<AtomTable> {
    for t in times {
        if !t.is_atomic() {
            return Err(Error::HasContinuousPart);
        }
    }
    let mut table = AtomTable {
        atoms: Vec::new(),
        back_map: Vec::new(),
        values: Vec::new(),
        u_sets: Vec::new(),
    };
    for a in 0..space.n_atoms() {
        let leaf = space.leaf_of(a);
        let mut cuts: Vec<Rational> = times
            .iter()
            .flat_map(|t| t.leaf(leaf).u_intervals().into_iter().map(|(_, hi)| hi))
            .collect();
        cuts.push(zero());
        cuts.sort();
        cuts.dedup();
        let mut groups: Vec<(Vec<TimePoint>, Vec<(Rational, Rational)>)> = Vec::new();
        for w in cuts.windows(2) {
            let tuple: Vec<TimePoint> = times.iter().map(|t| t.leaf(leaf).value_at_u(&w[0])).collect();
            match groups.iter_mut().find(|(v, _)| *v == tuple) {
                Some((_, set)) => set.push((w[0].clone(), w[1].clone())),
                None => groups.push((tuple, vec![(w[0].clone(), w[1].clone())])),
            }
        }
        for (tuple, set) in groups {
            let len: Rational = set.iter().map(|(lo, hi)| hi - lo).sum();
            let label: Vec<String> = tuple.iter().map(ToString::to_string).collect();
            table.atoms.push(Atom {
                id: format!("{}|{}", space.atoms()[a].id, label.join(",")),
                weight: space.weight(a) * len,
            });
            table.back_map.push(a);
            table.values.push(tuple);
            table.u_sets.push(set);
        }
    }
    Ok(table)
}

fn extended_grid(space: &FilteredSpace, times: &[&RandomTime]) -> Vec<Rational> {
    let mut grid: Vec<Rational> = space
        .grid()
        .iter()
        .cloned()
        .chain(times.iter().flat_map(|t| t.atom_support()))
        .collect();
    grid.sort();
    grid.dedup();
    grid
}

fn base_cell(space: &FilteredSpace, atom: usize, t: &Rational) -> usize {
    space.partition(space.index_at(t)).cell_of(atom)
}

/// `F_t ∨ σ(τ_i ∧ t)` for all given atomic times.
pub fn enlarge_with_times(space: &FilteredSpace, times: &[&RandomTime]) -> Result<EnlargedSpace> {
    let table = atom_table(space, times)?;
    let grid = extended_grid(space, times);
    let partitions = grid
        .iter()
        .map(|g| {
            let labels: Vec<(usize, Vec<Option<TimePoint>>)> = (0..table.atoms.len())
                .map(|e| {
                    let revealed = table.values[e]
                        .iter()
                        .map(|v| v.le(g).then(|| v.clone()))
                        .collect();
                    (base_cell(space, table.back_map[e], g), revealed)
                })
                .collect();
            Partition::from_labels(&labels).cells().to_vec()
        })
        .collect();
    Ok(EnlargedSpace {
        space: FilteredSpace::new(table.atoms, grid, partitions)?,
        back_map: table.back_map,
        values: table.values,
        u_sets: table.u_sets,
        kind: EnlargementKind::Progressive,
    })
}

pub fn enlarge_progressive(space: &FilteredSpace, tau: &RandomTime) -> Result<EnlargedSpace> {
    enlarge_with_times(space, &[tau])
}

/// `F_t ∨ σ(C_n, n ≥ 0)`, on the same atoms and grid as the progressive
/// enlargement by the system's time.
pub fn enlarge_initial(space: &FilteredSpace, system: &ExhaustingSystem) -> Result<EnlargedSpace> {
    let tau = system.tau();
    let table = atom_table(space, &[tau])?;
    let grid = extended_grid(space, &[tau]);
    let events: Vec<usize> = (0..table.atoms.len())
        .map(|e| {
            let leaf = space.leaf_of(table.back_map[e]);
            let lo = &table.u_sets[e][0].0;
            let j = tau
                .leaf(leaf)
                .u_intervals()
                .iter()
                .position(|(a, b)| a <= lo && lo < b)
                .expect("u-set lies in the layout");
            system.event_of(leaf, j)
        })
        .collect();
    let partitions = grid
        .iter()
        .map(|g| {
            let labels: Vec<(usize, usize)> = (0..table.atoms.len())
                .map(|e| (base_cell(space, table.back_map[e], g), events[e]))
                .collect();
            Partition::from_labels(&labels).cells().to_vec()
        })
        .collect();
    Ok(EnlargedSpace {
        space: FilteredSpace::new(table.atoms, grid, partitions)?,
        back_map: table.back_map,
        values: table.values,
        u_sets: table.u_sets,
        kind: EnlargementKind::Initial,
    })
}

impl EnlargedSpace {
    pub fn n_atoms(&self) -> usize {
        self.space.n_atoms()
    }

    /// Base partition in force at enlarged grid index `k`, lifted.
    pub fn lifted_base_partition(&self, base: &FilteredSpace, k: usize) -> Partition {
        let g = &self.space.grid()[k];
        let labels: Vec<usize> = self.back_map.iter().map(|&a| base_cell(base, a, g)).collect();
        Partition::from_labels(&labels)
    }

    /// Base per-atom values copied onto enlarged atoms.
    pub fn lift_values<T: Clone>(&self, base: &[T]) -> Vec<T> {
        self.back_map.iter().map(|&a| base[a].clone()).collect()
    }

    pub fn lift_path(&self, path: &PiecewisePath) -> PiecewisePath {
        path.lift(&self.back_map).refine(self.space.grid())
    }

    /// `E[X | enlarged atom]`.
    pub fn atom_means(&self, x: &RandomVariable) -> Vec<Rational> {
        (0..self.n_atoms())
            .map(|e| {
                let a = self.back_map[e];
                let (num, len) = self.u_sets[e].iter().fold((zero(), zero()), |(n, l), (lo, hi)| {
                    (n + x.integral(a, lo, hi), l + (hi - lo))
                });
                num / len
            })
            .collect()
    }

    /// Value of enlarging time `i` as a stopping-time candidate.
    pub fn time_as_stopping(&self, i: usize) -> StoppingTime {
        StoppingTime {
            values: self.values.iter().map(|v| v[i].clone()).collect(),
        }
    }

    /// The base filtration sits inside this one at every index.
    pub fn contains_base(&self, base: &FilteredSpace) -> bool {
        (0..self.space.grid().len())
            .all(|k| self.space.partition(k).refines(&self.lifted_base_partition(base, k)))
    }

    /// Partition-identical to the base space (one enlarged atom per base atom
    /// and the same cells).
    pub fn equals_base(&self, base: &FilteredSpace) -> bool {
        self.n_atoms() == base.n_atoms()
            && (0..self.space.grid().len()).all(|k| {
                self.space
                    .partition(k)
                    .same_as(&self.lifted_base_partition(base, k))
            })
    }
}

/// Compares two enlargements of the same base space as filtrations on the
/// common refinement of their `(ω, u)` cells, at every grid point of either.
pub fn same_filtration(a: &EnlargedSpace, b: &EnlargedSpace, base: &FilteredSpace) -> bool {
    // elementary units (ω, u-interval) with the enlarged atom of each side
    let locate = |s: &EnlargedSpace, atom: usize, u: &Rational| -> usize {
        (0..s.n_atoms())
            .find(|&e| s.back_map[e] == atom && s.u_sets[e].iter().any(|(lo, hi)| lo <= u && u < hi))
            .expect("units are covered")
    };
    let mut units: Vec<(usize, usize)> = Vec::new();
    for atom in 0..base.n_atoms() {
        let mut cuts: Vec<Rational> = [a, b]
            .iter()
            .flat_map(|s| {
                (0..s.n_atoms())
                    .filter(|&e| s.back_map[e] == atom)
                    .flat_map(|e| s.u_sets[e].iter().flat_map(|(lo, hi)| [lo.clone(), hi.clone()]))
                    .collect::<Vec<_>>()
            })
            .collect();
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            units.push((locate(a, atom, &w[0]), locate(b, atom, &w[0])));
        }
    }
    let mut grid: Vec<Rational> = a.space.grid().iter().chain(b.space.grid()).cloned().collect();
    grid.sort();
    grid.dedup();
    grid.iter().all(|g| {
        let pa = a.space.partition(a.space.index_at(g));
        let pb = b.space.partition(b.space.index_at(g));
        let la: Vec<usize> = units.iter().map(|(x, _)| pa.cell_of(*x)).collect();
        let lb: Vec<usize> = units.iter().map(|(_, y)| pb.cell_of(*y)).collect();
        Partition::from_labels(&la).same_as(&Partition::from_labels(&lb))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub is_martingale: bool,
    #[serde(with = "crate::rational::serde_q")]
    pub max_residual: Rational,
}

/// Exact martingale test on `space`: adapted, càdlàg, flat between knots and
/// `E[X_next | F_t] = X_t` across consecutive knots.
pub fn is_martingale(x: &PiecewisePath, space: &FilteredSpace) -> MartingaleCheck {
    let x = x.refine(space.grid());
    let times = x.times();
    let n = x.n_rows();
    let mut worst = zero();
    let mut bump = |d: Rational| {
        let d = d.abs();
        if d > worst {
            worst = d;
        }
    };
    for (i, t) in times.iter().enumerate() {
        let k = space.index_at(t);
        let value: Vec<Rational> = (0..n).map(|r| x.row(r)[i].value.clone()).collect();
        let cond = space.condition_atoms(k, &value);
        for r in 0..n {
            let kn = &x.row(r)[i];
            bump(&value[r] - &cond[r]);
            bump(&kn.right - &kn.value);
            bump(kn.slope.clone());
        }
        if i + 1 < times.len() {
            let next_left: Vec<Rational> = (0..n).map(|r| x.row(r)[i + 1].left.clone()).collect();
            let next_value: Vec<Rational> = (0..n).map(|r| x.row(r)[i + 1].value.clone()).collect();
            let cl = space.condition_atoms(k, &next_left);
            let cv = space.condition_atoms(k, &next_value);
            for r in 0..n {
                bump(&cl[r] - &value[r]);
                bump(&cv[r] - &value[r]);
            }
        }
    }
    MartingaleCheck {
        is_martingale: worst.is_zero(),
        max_residual: worst,
    }
}

/// Piece index of `τ`'s layout holding the start of an enlarged atom.
pub(crate) fn piece_of(tau: &RandomTime, leaf: usize, u: &Rational) -> usize {
    tau.leaf(leaf)
        .u_intervals()
        .iter()
        .position(|(a, b)| a <= u && u < b)
        .expect("u lies in the layout")
}

pub(crate) fn is_finite_atom(p: &Piece) -> bool {
    matches!(
        p,
        Piece::Atom {
            at: TimePoint::Finite(_),
            ..
        }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaust::exhausting_system;
    use crate::models;
    use crate::rational::{int, one};
    use crate::space::is_stopping_time;

    #[test]
    fn never_occurring_and_stopping_times_do_not_enlarge() {
        let s = models::coin_space();
        let e = enlarge_progressive(&s, &RandomTime::infinite(&s)).unwrap();
        assert!(e.equals_base(&s));
        let st = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let e = enlarge_progressive(&s, &st).unwrap();
        assert!(e.equals_base(&s));
    }

    #[test]
    fn external_coin_doubles_atoms_and_is_revealed_at_one() {
        let s = models::coin_space();
        let tau = models::external_coin_time(&s);
        let e = enlarge_progressive(&s, &tau).unwrap();
        assert_eq!(e.n_atoms(), 4);
        assert_eq!(e.space.partition(0).len(), 1);
        assert_eq!(e.space.partition(1).len(), 4);
        assert!(e.contains_base(&s));
        assert!(is_stopping_time(&e.time_as_stopping(0), &e.space).stopping);
        let sys = exhausting_system(&tau, &s, None).unwrap();
        let c = enlarge_initial(&s, &sys).unwrap();
        assert_eq!(c.space.partition(0).len(), 2);
        for k in 0..c.space.grid().len() {
            assert!(c.space.partition(k).refines(e.space.partition(k)));
        }
    }

    #[test]
    fn densities_are_rejected() {
        let s = models::trivial_space();
        let err = enlarge_progressive(&s, &models::uniform_time(&s, zero(), one()));
        assert_eq!(err.unwrap_err(), Error::HasContinuousPart);
    }

    #[test]
    fn a_constant_is_a_martingale_and_a_compensator_is_not() {
        let s = models::coin_space();
        assert!(is_martingale(&PiecewisePath::constant(2, int(3)), &s).is_martingale);
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let b = crate::bundle::associated_processes(&tau, &s);
        assert!(!is_martingale(&b.a_o, &s).is_martingale);
        assert!(is_martingale(&b.m, &s).is_martingale);
    }

    #[test]
    fn splitting_a_thin_time_does_not_change_its_enlargement() {
        let s = models::walk_space(2);
        let tau = models::external_coin_time(&s);
        let d = crate::decompose::thin_thick_decompose(&tau, &s);
        let one_time = enlarge_progressive(&s, &tau).unwrap();
        let two_times = enlarge_with_times(&s, &[&d.thin, &d.thick]).unwrap();
        assert!(same_filtration(&one_time, &two_times, &s));
        let other = enlarge_progressive(&s, &RandomTime::infinite(&s)).unwrap();
        assert!(!same_filtration(&one_time, &other, &s));
    }
}
