//! Finite filtered probability spaces.
//!
//! A space is a finite set of weighted atoms, a time grid `0 = t_0 < ... < t_K`
//! and a refining chain of partitions. The filtration is piecewise constant and
//! right-continuous: `F_t` is the partition at index `k` for `t` in `[t_k, t_{k+1})`,
//! and the last partition is `F_∞`. Random times may additionally depend on an
//! auxiliary uniform coordinate `u ∈ [0, 1]` which the filtration never sees.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, one, zero, Rational, TimePoint};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub id: String,
    pub weight: Rational,
}

/// A partition of atom indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

impl Partition {
    fn from_cells(cells: Vec<Vec<usize>>, n_atoms: usize, index: usize) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; n_atoms];
        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::MalformedPartition {
                    index,
                    reason: format!("cell {c} is empty"),
                });
            }
            for &a in cell {
                if a >= n_atoms {
                    return Err(Error::MalformedPartition {
                        index,
                        reason: format!("unknown atom index {a}"),
                    });
                }
                if cell_of[a] != usize::MAX {
                    return Err(Error::MalformedPartition {
                        index,
                        reason: format!("atom {a} appears twice"),
                    });
                }
                cell_of[a] = c;
            }
        }
        if let Some(missing) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::MalformedPartition {
                index,
                reason: format!("atom {missing} is not covered"),
            });
        }
        Ok(Partition { cells, cell_of })
    }

    /// Builds a partition from per-atom labels (equal label, same cell).
    pub fn from_labels<K: Ord + Clone>(labels: &[K]) -> Self {
        let mut ids: BTreeMap<K, usize> = BTreeMap::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_of = Vec::with_capacity(labels.len());
        for (a, label) in labels.iter().enumerate() {
            let next = ids.len();
            let c = *ids.entry(label.clone()).or_insert(next);
            if c == cells.len() {
                cells.push(Vec::new());
            }
            cells[c].push(a);
            cell_of.push(c);
        }
        Partition { cells, cell_of }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, atom: usize) -> usize {
        self.cell_of[atom]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Every cell of `self` lies inside a cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.cells.iter().all(|cell| {
            let c = coarser.cell_of[cell[0]];
            cell.iter().all(|&a| coarser.cell_of[a] == c)
        })
    }

    pub fn same_as(&self, other: &Partition) -> bool {
        self.refines(other) && other.refines(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredSpace {
    atoms: Vec<Atom>,
    grid: Vec<Rational>,
    partitions: Vec<Partition>,
}

/// On-disk form of a space: rationals as `"p/q"` strings, partitions by atom id.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescription {
    #[serde(with = "rational::serde_q_vec")]
    pub grid: Vec<Rational>,
    pub atoms: Vec<AtomDescription>,
    pub partitions: Vec<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomDescription {
    pub id: String,
    #[serde(with = "rational::serde_q")]
    pub p: Rational,
}

impl FilteredSpace {
    pub fn new(
        atoms: Vec<Atom>,
        grid: Vec<Rational>,
        partitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpace("no atoms".into()));
        }
        if grid.is_empty() || !grid[0].is_zero() {
            return Err(Error::UnsortedGrid { index: 0 });
        }
        for k in 1..grid.len() {
            if grid[k] <= grid[k - 1] {
                return Err(Error::UnsortedGrid { index: k });
            }
        }
        if partitions.len() != grid.len() {
            return Err(Error::InvalidSpace(format!(
                "{} partitions for {} grid points",
                partitions.len(),
                grid.len()
            )));
        }
        for (i, atom) in atoms.iter().enumerate() {
            if !atom.weight.is_positive() {
                return Err(Error::InvalidSpace(format!(
                    "atom {} (index {i}) has non-positive weight",
                    atom.id
                )));
            }
        }
        let sum: Rational = atoms.iter().map(|a| a.weight.clone()).sum();
        if sum != one() {
            return Err(Error::WeightsNotNormalized { sum });
        }
        let n = atoms.len();
        let mut parts = Vec::with_capacity(partitions.len());
        for (k, cells) in partitions.into_iter().enumerate() {
            let p = Partition::from_cells(cells, n, k)?;
            if k > 0 && !p.refines(&parts[k - 1]) {
                return Err(Error::NonRefiningPartition { index: k });
            }
            parts.push(p);
        }
        Ok(FilteredSpace {
            atoms,
            grid,
            partitions: parts,
        })
    }

    pub fn from_description(desc: &SpaceDescription) -> Result<Self> {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, a) in desc.atoms.iter().enumerate() {
            if index.insert(a.id.as_str(), i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate atom id `{}`", a.id)));
            }
        }
        let atoms = desc
            .atoms
            .iter()
            .map(|a| Atom {
                id: a.id.clone(),
                weight: a.p.clone(),
            })
            .collect();
        let mut partitions = Vec::with_capacity(desc.partitions.len());
        for (k, cells) in desc.partitions.iter().enumerate() {
            let mut out = Vec::with_capacity(cells.len());
            for cell in cells {
                let mut ids = Vec::with_capacity(cell.len());
                for id in cell {
                    let i = index.get(id.as_str()).ok_or_else(|| Error::MalformedPartition {
                        index: k,
                        reason: format!("unknown atom id `{id}`"),
                    })?;
                    ids.push(*i);
                }
                out.push(ids);
            }
            partitions.push(out);
        }
        FilteredSpace::new(atoms, desc.grid.clone(), partitions)
    }

    pub fn to_description(&self) -> SpaceDescription {
        SpaceDescription {
            grid: self.grid.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomDescription {
                    id: a.id.clone(),
                    p: a.weight.clone(),
                })
                .collect(),
            partitions: self
                .partitions
                .iter()
                .map(|p| {
                    p.cells
                        .iter()
                        .map(|cell| cell.iter().map(|&a| self.atoms[a].id.clone()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let desc: SpaceDescription = serde_json::from_str(text)
            .map_err(|e| crate::error::ParseError::Json(e.to_string()))?;
        Self::from_description(&desc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_description()).expect("space serializes")
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weight(&self, atom: usize) -> &Rational {
        &self.atoms[atom].weight
    }

    pub fn atom_index(&self, id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    pub fn grid(&self) -> &[Rational] {
        &self.grid
    }

    pub fn partition(&self, k: usize) -> &Partition {
        &self.partitions[k]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn last_index(&self) -> usize {
        self.grid.len() - 1
    }

    /// Partition of `F_∞`.
    pub fn terminal(&self) -> &Partition {
        &self.partitions[self.last_index()]
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.grid.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.grid.len(),
            })
        }
    }

    /// Index of the partition in force at `t`: the largest `k` with `t_k <= t`.
    pub fn index_at(&self, t: &Rational) -> usize {
        match self.grid.binary_search(t) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) => k - 1,
        }
    }

    /// Index of the partition describing `F_{t-}`. At a grid point `t_k` with
    /// `k >= 1` this is `k - 1`; inside an interval it equals `index_at`. At
    /// time 0 the pre-filtration is `F_0`, so dual predictable projections keep
    /// `V^p_0 = E[V_0 | F_0]`.
    pub fn pre_index_at(&self, t: &Rational) -> usize {
        match self.grid.binary_search(t) {
            Ok(0) => 0,
            Ok(k) => k - 1,
            Err(0) => 0,
            Err(k) => k - 1,
        }
    }

    pub fn index_in_force(&self, t: &TimePoint) -> usize {
        match t {
            TimePoint::Finite(r) => self.index_at(r),
            TimePoint::Infinity => self.last_index(),
        }
    }

    pub fn is_grid_point(&self, t: &Rational) -> bool {
        self.grid.binary_search(t).is_ok()
    }

    pub fn cell_weight(&self, k: usize, cell: usize) -> Rational {
        self.partitions[k].cells[cell]
            .iter()
            .map(|&a| self.atoms[a].weight.clone())
            .sum()
    }

    /// Weighted cell averages of a per-atom quantity at partition `k`.
    pub fn condition_atoms(&self, k: usize, values: &[Rational]) -> Vec<Rational> {
        self.condition_on(&self.partitions[k], values)
    }

    pub fn condition_on(&self, partition: &Partition, values: &[Rational]) -> Vec<Rational> {
        debug_assert_eq!(values.len(), self.atoms.len());
        let mut out = vec![zero(); values.len()];
        for cell in &partition.cells {
            let mut mass = zero();
            let mut total = zero();
            for &a in cell {
                mass += &self.atoms[a].weight;
                total += &self.atoms[a].weight * &values[a];
            }
            let avg = total / mass;
            for &a in cell {
                out[a] = avg.clone();
            }
        }
        out
    }

    /// Per-atom quantity constant on the cells of partition `k`.
    pub fn is_measurable(&self, k: usize, values: &[Rational]) -> bool {
        is_measurable_on(&self.partitions[k], values)
    }

    pub fn expectation(&self, values: &[Rational]) -> Rational {
        self.atoms
            .iter()
            .zip(values)
            .map(|(a, v)| &a.weight * v)
            .sum()
    }

    /// Number of `F_∞` leaves.
    pub fn n_leaves(&self) -> usize {
        self.terminal().len()
    }

    pub fn leaf_of(&self, atom: usize) -> usize {
        self.terminal().cell_of(atom)
    }

    pub fn leaf_weight(&self, leaf: usize) -> Rational {
        self.cell_weight(self.last_index(), leaf)
    }

    /// Expand per-leaf values to per-atom values.
    pub fn leaf_to_atoms(&self, per_leaf: &[Rational]) -> Vec<Rational> {
        (0..self.n_atoms())
            .map(|a| per_leaf[self.leaf_of(a)].clone())
            .collect()
    }
}

pub fn is_measurable_on<T: PartialEq>(partition: &Partition, values: &[T]) -> bool {
    partition
        .cells()
        .iter()
        .all(|cell| cell.iter().all(|&a| values[a] == values[cell[0]]))
}

/// A polynomial in the auxiliary coordinate, coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<Rational>);

impl Poly {
    pub fn constant(c: Rational) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, u: &Rational) -> Rational {
        let mut acc = zero();
        for c in self.0.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    /// `∫_a^b p(u) du`.
    pub fn integrate(&self, a: &Rational, b: &Rational) -> Rational {
        let mut total = zero();
        let mut pa = a.clone();
        let mut pb = b.clone();
        for (i, c) in self.0.iter().enumerate() {
            let deg = rational::int(i as i64 + 1);
            total += c * (&pb - &pa) / deg;
            pa *= a;
            pb *= b;
        }
        total
    }
}

/// A piecewise polynomial function of `u` whose pieces partition `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly {
    pieces: Vec<(Rational, Rational, Poly)>,
}

impl PiecewisePoly {
    pub fn constant(c: Rational) -> Self {
        PiecewisePoly {
            pieces: vec![(zero(), one(), Poly::constant(c))],
        }
    }

    pub fn new(pieces: Vec<(Rational, Rational, Poly)>) -> Result<Self> {
        let mut cursor = zero();
        for (a, b, _) in &pieces {
            if *a != cursor || b <= a {
                return Err(Error::InvalidSpace(
                    "polynomial pieces must tile [0, 1] in order".into(),
                ));
            }
            cursor = b.clone();
        }
        if cursor != one() {
            return Err(Error::InvalidSpace(
                "polynomial pieces must end at 1".into(),
            ));
        }
        Ok(PiecewisePoly { pieces })
    }

    pub fn integrate(&self, a: &Rational, b: &Rational) -> Rational {
        let mut total = zero();
        for (pa, pb, poly) in &self.pieces {
            let lo = if pa > a { pa } else { a };
            let hi = if pb < b { pb } else { b };
            if lo < hi {
                total += poly.integrate(lo, hi);
            }
        }
        total
    }

    pub fn eval(&self, u: &Rational) -> Rational {
        for (a, b, p) in &self.pieces {
            if u >= a && (u < b || *b == one()) {
                return p.eval(u);
            }
        }
        zero()
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        match self.pieces.as_slice() {
            [(_, _, Poly(c))] if c.len() == 1 => Some(&c[0]),
            _ => None,
        }
    }
}

/// A `G`-measurable variable: per atom, a piecewise polynomial in `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVariable {
    values: Vec<PiecewisePoly>,
}

impl RandomVariable {
    pub fn new(values: Vec<PiecewisePoly>) -> Self {
        RandomVariable { values }
    }

    pub fn constant(space: &FilteredSpace, c: Rational) -> Self {
        RandomVariable {
            values: vec![PiecewisePoly::constant(c); space.n_atoms()],
        }
    }

    /// A variable that depends on the tree only.
    pub fn from_atoms(values: Vec<Rational>) -> Self {
        RandomVariable {
            values: values.into_iter().map(PiecewisePoly::constant).collect(),
        }
    }

    pub fn on_atom(&self, atom: usize) -> &PiecewisePoly {
        &self.values[atom]
    }

    /// `∫_a^b X(ω, u) du` for atom `ω`.
    pub fn integral(&self, atom: usize, a: &Rational, b: &Rational) -> Rational {
        self.values[atom].integrate(a, b)
    }

    /// Per-atom `E[X | atom]`.
    pub fn atom_means(&self) -> Vec<Rational> {
        self.values
            .iter()
            .map(|p| p.integrate(&zero(), &one()))
            .collect()
    }

    /// Tree-only values, if the variable ignores `u`.
    pub fn tree_values(&self) -> Option<Vec<Rational>> {
        self.values
            .iter()
            .map(|p| p.as_constant().cloned())
            .collect()
    }
}

/// `E[X | F_{t_k}]`, returned as a tree-only variable.
pub fn condition(x: &RandomVariable, space: &FilteredSpace, k: usize) -> Result<RandomVariable> {
    space.check_index(k)?;
    Ok(RandomVariable::from_atoms(
        space.condition_atoms(k, &x.atom_means()),
    ))
}

/// A stopping-time candidate: one time point per atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingTime {
    pub values: Vec<TimePoint>,
}

impl StoppingTime {
    pub fn constant(space: &FilteredSpace, t: TimePoint) -> Self {
        StoppingTime {
            values: vec![t; space.n_atoms()],
        }
    }

    pub fn infinite(space: &FilteredSpace) -> Self {
        Self::constant(space, TimePoint::Infinity)
    }

    pub fn at(&self, atom: usize) -> &TimePoint {
        &self.values[atom]
    }

    /// Partition of `F_T`: same value and same cell of the partition in force at it.
    pub fn stopped_partition(&self, space: &FilteredSpace) -> Partition {
        let labels: Vec<(TimePoint, usize)> = self
            .values
            .iter()
            .enumerate()
            .map(|(a, t)| {
                let k = space.index_in_force(t);
                (t.clone(), space.partition(k).cell_of(a))
            })
            .collect();
        Partition::from_labels(&labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StoppingCheck {
    pub stopping: bool,
    pub predictable: bool,
}

/// Classifies `T` as a stopping time and as a predictable stopping time.
pub fn is_stopping_time(t: &StoppingTime, space: &FilteredSpace) -> StoppingCheck {
    let mut levels: Vec<&Rational> = t.values.iter().filter_map(|v| v.as_finite()).collect();
    levels.sort();
    levels.dedup();
    let mut stopping = true;
    let mut predictable = true;
    for level in levels {
        let below: Vec<bool> = t.values.iter().map(|v| v.le(level)).collect();
        if !is_measurable_on(space.partition(space.index_at(level)), &below) {
            stopping = false;
        }
        let at: Vec<bool> = t
            .values
            .iter()
            .map(|v| v.as_finite() == Some(level))
            .collect();
        if !is_measurable_on(space.partition(space.pre_index_at(level)), &at) {
            predictable = false;
        }
    }
    StoppingCheck {
        stopping,
        predictable: stopping && predictable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{int, q};

    fn coin() -> FilteredSpace {
        models::coin_space()
    }

    #[test]
    fn one_point_space_is_trivial() {
        let s = FilteredSpace::new(
            vec![Atom {
                id: "a".into(),
                weight: one(),
            }],
            vec![zero()],
            vec![vec![vec![0]]],
        )
        .unwrap();
        assert_eq!(s.n_leaves(), 1);
        assert_eq!(s.index_at(&int(7)), 0);
    }

    #[test]
    fn coarsening_partition_is_rejected_with_index() {
        let atoms = vec![
            Atom {
                id: "a".into(),
                weight: q(1, 2),
            },
            Atom {
                id: "b".into(),
                weight: q(1, 2),
            },
        ];
        let err = FilteredSpace::new(
            atoms,
            vec![zero(), one()],
            vec![vec![vec![0], vec![1]], vec![vec![0, 1]]],
        )
        .unwrap_err();
        assert_eq!(err, Error::NonRefiningPartition { index: 1 });
    }

    #[test]
    fn weights_and_grid_are_validated() {
        let atoms = vec![
            Atom {
                id: "a".into(),
                weight: q(1, 2),
            },
            Atom {
                id: "b".into(),
                weight: q(1, 3),
            },
        ];
        let err = FilteredSpace::new(atoms.clone(), vec![zero()], vec![vec![vec![0, 1]]]);
        assert!(matches!(err, Err(Error::WeightsNotNormalized { .. })));
        let atoms = vec![
            Atom {
                id: "a".into(),
                weight: q(1, 2),
            },
            Atom {
                id: "b".into(),
                weight: q(1, 2),
            },
        ];
        let err = FilteredSpace::new(
            atoms,
            vec![zero(), int(2), int(1)],
            vec![vec![vec![0, 1]]; 3],
        );
        assert_eq!(err.unwrap_err(), Error::UnsortedGrid { index: 2 });
    }

    #[test]
    fn conditioning_an_indicator_on_the_trivial_field_gives_its_mass() {
        let s = coin();
        let x = RandomVariable::from_atoms(vec![one(), zero()]);
        let c = condition(&x, &s, 0).unwrap();
        assert_eq!(c.tree_values().unwrap(), vec![q(1, 2), q(1, 2)]);
        let c1 = condition(&x, &s, 1).unwrap();
        assert_eq!(c1.tree_values().unwrap(), vec![one(), zero()]);
    }

    #[test]
    fn conditioning_integrates_polynomials_in_u() {
        let s = coin();
        let u2 = PiecewisePoly::new(vec![(zero(), one(), Poly(vec![zero(), zero(), one()]))]).unwrap();
        let x = RandomVariable::new(vec![u2, PiecewisePoly::constant(zero())]);
        let c = condition(&x, &s, 1).unwrap();
        assert_eq!(c.tree_values().unwrap()[0], q(1, 3));
    }

    #[test]
    fn stopping_time_classification_matches_cell_unions() {
        let s = coin();
        let constant = StoppingTime::constant(&s, TimePoint::Finite(one()));
        assert_eq!(
            is_stopping_time(&constant, &s),
            StoppingCheck {
                stopping: true,
                predictable: true
            }
        );
        let revealed = StoppingTime {
            values: vec![TimePoint::Finite(one()), TimePoint::Infinity],
        };
        let check = is_stopping_time(&revealed, &s);
        assert!(check.stopping);
        assert!(!check.predictable);
        let early = StoppingTime {
            values: vec![TimePoint::Finite(zero()), TimePoint::Infinity],
        };
        assert!(!is_stopping_time(&early, &s).stopping);
    }

    #[test]
    fn description_round_trips_through_json() {
        let s = coin();
        let back = FilteredSpace::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
