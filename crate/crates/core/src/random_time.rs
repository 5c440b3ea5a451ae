//! Random times on a finite filtered space.
//!
//! Conditionally on each `F_∞` leaf, a random time has a law made of atoms
//! (possibly at `∞`) and step-density segments. The law is realized on the
//! auxiliary coordinate `u ∈ [0, 1]` by laying pieces out in order: piece `j`
//! occupies `[c_j, c_j + mass_j)` where `c_j` is the cumulative mass before it.
//! An atom maps its interval to a constant; a density segment maps it affinely
//! onto `[start, end)`. Two times built on the same layout are therefore
//! jointly defined, which is what `τ = τ1 ∧ τ2` needs.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::rational::{self, one, zero, Rational, TimePoint};
use crate::space::FilteredSpace;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Piece {
    Atom { at: TimePoint, mass: Rational },
    Density {
        start: Rational,
        end: Rational,
        level: Rational,
    },
}

impl Piece {
    pub fn mass(&self) -> Rational {
        match self {
            Piece::Atom { mass, .. } => mass.clone(),
            Piece::Density { start, end, level } => level * (end - start),
        }
    }

    pub fn is_density(&self) -> bool {
        matches!(self, Piece::Density { .. })
    }

    pub fn infinite(mass: Rational) -> Self {
        Piece::Atom {
            at: TimePoint::Infinity,
            mass,
        }
    }

    /// Time reached at auxiliary offset `du` into the piece.
    fn time_at_offset(&self, du: &Rational) -> TimePoint {
        match self {
            Piece::Atom { at, .. } => at.clone(),
            Piece::Density { start, level, .. } => TimePoint::Finite(start + du / level),
        }
    }

    /// Splits the piece at auxiliary offset `du` (0 < du < mass).
    fn split(&self, du: &Rational) -> (Piece, Piece) {
        match self {
            Piece::Atom { at, mass } => (
                Piece::Atom {
                    at: at.clone(),
                    mass: du.clone(),
                },
                Piece::Atom {
                    at: at.clone(),
                    mass: mass - du,
                },
            ),
            Piece::Density { start, end, level } => {
                let mid = start + du / level;
                (
                    Piece::Density {
                        start: start.clone(),
                        end: mid.clone(),
                        level: level.clone(),
                    },
                    Piece::Density {
                        start: mid,
                        end: end.clone(),
                        level: level.clone(),
                    },
                )
            }
        }
    }
}

/// Conditional law of a random time given one `F_∞` leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafLaw {
    pieces: Vec<Piece>,
}

impl LeafLaw {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let pieces: Vec<Piece> = pieces.into_iter().filter(|p| !p.mass().is_zero()).collect();
        let mut total = zero();
        let mut segments: Vec<(&Rational, &Rational)> = Vec::new();
        for p in &pieces {
            match p {
                Piece::Atom { at, mass } => {
                    if mass.is_negative() {
                        return Err(Error::InvalidRandomTime("negative atom mass".into()));
                    }
                    if let TimePoint::Finite(t) = at {
                        if t.is_negative() {
                            return Err(Error::InvalidRandomTime("atom at negative time".into()));
                        }
                    }
                }
                Piece::Density { start, end, level } => {
                    if start.is_negative() || end <= start {
                        return Err(Error::InvalidRandomTime(format!(
                            "density segment [{}, {}) is empty or negative",
                            rational::format_rational(start),
                            rational::format_rational(end)
                        )));
                    }
                    if level.is_negative() {
                        return Err(Error::InvalidRandomTime("negative density level".into()));
                    }
                    segments.push((start, end));
                }
            }
            total += p.mass();
        }
        if total != one() {
            return Err(Error::InvalidRandomTime(format!(
                "leaf mass is {} instead of 1",
                rational::format_rational(&total)
            )));
        }
        segments.sort();
        if segments.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidRandomTime("density segments overlap".into()));
        }
        Ok(LeafLaw { pieces })
    }

    fn new_unchecked(pieces: Vec<Piece>) -> Self {
        LeafLaw {
            pieces: pieces.into_iter().filter(|p| !p.mass().is_zero()).collect(),
        }
    }

    pub fn point(t: TimePoint) -> Self {
        LeafLaw {
            pieces: vec![Piece::Atom { at: t, mass: one() }],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `[c_j, c_j + mass_j)` for every piece.
    pub fn u_intervals(&self) -> Vec<(Rational, Rational)> {
        let mut c = zero();
        self.pieces
            .iter()
            .map(|p| {
                let lo = c.clone();
                c += p.mass();
                (lo, c.clone())
            })
            .collect()
    }

    /// `P(τ > t)`.
    pub fn survival(&self, t: &Rational) -> Rational {
        self.pieces
            .iter()
            .map(|p| match p {
                Piece::Atom { at, mass } => {
                    if at.le(t) {
                        zero()
                    } else {
                        mass.clone()
                    }
                }
                Piece::Density { start, end, level } => {
                    if t >= end {
                        zero()
                    } else if t <= start {
                        level * (end - start)
                    } else {
                        level * (end - t)
                    }
                }
            })
            .sum()
    }

    /// `P(τ = t)`.
    pub fn atom_at(&self, t: &TimePoint) -> Rational {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Atom { at, mass } if at == t => Some(mass.clone()),
                _ => None,
            })
            .sum()
    }

    /// `P(τ >= t)`.
    pub fn at_or_after(&self, t: &Rational) -> Rational {
        self.survival(t) + self.atom_at(&TimePoint::Finite(t.clone()))
    }

    /// Density level at an interior point `s` (not an endpoint).
    pub fn density_at(&self, s: &Rational) -> Rational {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Density { start, end, level } if start <= s && s < end => {
                    Some(level.clone())
                }
                _ => None,
            })
            .sum()
    }

    pub fn finite_atom_mass(&self) -> Rational {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Atom {
                    at: TimePoint::Finite(_),
                    mass,
                } => Some(mass.clone()),
                _ => None,
            })
            .sum()
    }

    pub fn density_mass(&self) -> Rational {
        self.pieces
            .iter()
            .filter(|p| p.is_density())
            .map(Piece::mass)
            .sum()
    }

    pub fn infinite_mass(&self) -> Rational {
        self.atom_at(&TimePoint::Infinity)
    }

    /// Finite times where the law has atoms or density endpoints.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match p {
                Piece::Atom {
                    at: TimePoint::Finite(t),
                    ..
                } => out.push(t.clone()),
                Piece::Atom { .. } => {}
                Piece::Density { start, end, .. } => {
                    out.push(start.clone());
                    out.push(end.clone());
                }
            }
        }
        out
    }

    /// `τ(u)` under the layout.
    pub fn value_at_u(&self, u: &Rational) -> TimePoint {
        for (p, (lo, hi)) in self.pieces.iter().zip(self.u_intervals()) {
            if *u >= lo && *u < hi {
                return p.time_at_offset(&(u - &lo));
            }
        }
        TimePoint::Infinity
    }

    /// Splits pieces so that `cuts` (u-positions) fall on piece boundaries.
    pub fn split_at(&self, cuts: &[Rational]) -> LeafLaw {
        let mut out = Vec::with_capacity(self.pieces.len() + cuts.len());
        for (p, (lo, hi)) in self.pieces.iter().zip(self.u_intervals()) {
            let mut inner: Vec<&Rational> = cuts.iter().filter(|c| **c > lo && **c < hi).collect();
            inner.sort();
            inner.dedup();
            let mut rest = p.clone();
            let mut offset = lo.clone();
            for c in inner {
                let (a, b) = rest.split(&(c - &offset));
                out.push(a);
                rest = b;
                offset = c.clone();
            }
            out.push(rest);
        }
        LeafLaw { pieces: out }
    }
}

/// A random time: one conditional law per `F_∞` leaf, indexed like the
/// terminal partition's cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomTime {
    leaves: Vec<LeafLaw>,
}

impl RandomTime {
    pub fn new(space: &FilteredSpace, leaves: Vec<LeafLaw>) -> Result<Self> {
        if leaves.len() != space.n_leaves() {
            return Err(Error::InvalidRandomTime(format!(
                "{} leaf laws for {} leaves",
                leaves.len(),
                space.n_leaves()
            )));
        }
        Ok(RandomTime { leaves })
    }

    pub fn from_leaf_pieces(space: &FilteredSpace, pieces: Vec<Vec<Piece>>) -> Result<Self> {
        let leaves = pieces.into_iter().map(LeafLaw::new).collect::<Result<_>>()?;
        Self::new(space, leaves)
    }

    pub fn deterministic(space: &FilteredSpace, t: TimePoint) -> Self {
        RandomTime {
            leaves: vec![LeafLaw::point(t); space.n_leaves()],
        }
    }

    pub fn infinite(space: &FilteredSpace) -> Self {
        Self::deterministic(space, TimePoint::Infinity)
    }

    /// The same law on every leaf: a time independent of `F_∞`.
    pub fn independent(space: &FilteredSpace, law: LeafLaw) -> Self {
        RandomTime {
            leaves: vec![law; space.n_leaves()],
        }
    }

    /// An `F_∞`-measurable time from per-atom values (constant on leaves).
    pub fn from_atom_values(space: &FilteredSpace, values: &[TimePoint]) -> Result<Self> {
        let mut leaves = Vec::with_capacity(space.n_leaves());
        for cell in space.terminal().cells() {
            let v = &values[cell[0]];
            if cell.iter().any(|&a| &values[a] != v) {
                return Err(Error::InvalidRandomTime(
                    "per-atom values are not constant on an F_inf leaf".into(),
                ));
            }
            leaves.push(LeafLaw::point(v.clone()));
        }
        Ok(RandomTime { leaves })
    }

    pub fn leaves(&self) -> &[LeafLaw] {
        &self.leaves
    }

    pub fn leaf(&self, l: usize) -> &LeafLaw {
        &self.leaves[l]
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// No density segment carries mass.
    pub fn is_atomic(&self) -> bool {
        self.leaves.iter().all(|l| l.density_mass().is_zero())
    }

    pub fn is_infinite(&self) -> bool {
        self.leaves.iter().all(|l| l.infinite_mass() == one())
    }

    /// Sorted finite breakpoints across all leaves.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self.leaves.iter().flat_map(|l| l.breakpoints()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Sorted finite atom times carrying mass on some leaf.
    pub fn atom_support(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self
            .leaves
            .iter()
            .flat_map(|l| {
                l.pieces().iter().filter_map(|p| match p {
                    Piece::Atom {
                        at: TimePoint::Finite(t),
                        ..
                    } => Some(t.clone()),
                    _ => None,
                })
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// `τ_C`: pieces outside `keep` are sent to `∞` in place.
    pub fn restrict(&self, keep: &[Vec<bool>]) -> RandomTime {
        let leaves = self
            .leaves
            .iter()
            .zip(keep)
            .map(|(law, mask)| {
                LeafLaw::new_unchecked(
                    law.pieces
                        .iter()
                        .zip(mask)
                        .map(|(p, &k)| if k { p.clone() } else { Piece::infinite(p.mass()) })
                        .collect(),
                )
            })
            .collect();
        RandomTime { leaves }
    }

    /// Pieces of both times aligned on common u-boundaries.
    pub fn align(&self, other: &RandomTime) -> (RandomTime, RandomTime) {
        let mut a = Vec::with_capacity(self.leaves.len());
        let mut b = Vec::with_capacity(self.leaves.len());
        for (x, y) in self.leaves.iter().zip(&other.leaves) {
            let cuts: Vec<Rational> = x
                .u_intervals()
                .into_iter()
                .chain(y.u_intervals())
                .map(|(_, hi)| hi)
                .collect();
            a.push(x.split_at(&cuts));
            b.push(y.split_at(&cuts));
        }
        (RandomTime { leaves: a }, RandomTime { leaves: b })
    }

    /// Pointwise `min` and `max` on the auxiliary layout.
    pub fn min_max(&self, other: &RandomTime) -> (RandomTime, RandomTime) {
        let (a, b) = self.align(other);
        let mut mins = Vec::with_capacity(a.leaves.len());
        let mut maxs = Vec::with_capacity(a.leaves.len());
        for (x, y) in a.leaves.iter().zip(&b.leaves) {
            let mut lo_pieces = Vec::new();
            let mut hi_pieces = Vec::new();
            for (p, r) in x.pieces.iter().zip(&y.pieces) {
                let (lo, hi) = piece_min_max(p, r);
                lo_pieces.extend(lo);
                hi_pieces.extend(hi);
            }
            mins.push(LeafLaw::new_unchecked(lo_pieces));
            maxs.push(LeafLaw::new_unchecked(hi_pieces));
        }
        (RandomTime { leaves: mins }, RandomTime { leaves: maxs })
    }

    /// Same value at every auxiliary point (after alignment).
    pub fn same_pointwise(&self, other: &RandomTime) -> bool {
        let (a, b) = self.align(other);
        a.leaves.iter().zip(&b.leaves).all(|(x, y)| {
            x.pieces.len() == y.pieces.len()
                && x.pieces.iter().zip(&y.pieces).all(|(p, r)| same_piece(p, r))
        })
    }

    /// Same value at every point of `{self < ∞}` (after alignment).
    pub fn same_on_finite_set(&self, other: &RandomTime) -> bool {
        let (a, b) = self.align(other);
        a.leaves.iter().zip(&b.leaves).all(|(x, y)| {
            x.pieces.iter().zip(&y.pieces).all(|(p, r)| {
                matches!(p, Piece::Atom { at: TimePoint::Infinity, .. }) || same_piece(p, r)
            })
        })
    }

    pub fn from_description(space: &FilteredSpace, desc: &RandomTimeDescription) -> Result<Self> {
        let mut leaves: Vec<Option<LeafLaw>> = vec![None; space.n_leaves()];
        for entry in &desc.per_leaf {
            let mut ids = Vec::with_capacity(entry.leaf.len());
            for id in &entry.leaf {
                ids.push(space.atom_index(id).ok_or_else(|| {
                    Error::InvalidRandomTime(format!("unknown atom id `{id}` in leaf"))
                })?);
            }
            ids.sort_unstable();
            let leaf = space.leaf_of(ids[0]);
            let mut cell = space.terminal().cells()[leaf].clone();
            cell.sort_unstable();
            if cell != ids {
                return Err(Error::InvalidRandomTime(format!(
                    "leaf {:?} is not a cell of the terminal partition",
                    entry.leaf
                )));
            }
            let mut pieces = Vec::new();
            for (t, p) in &entry.atoms {
                pieces.push(Piece::Atom {
                    at: t.parse()?,
                    mass: rational::parse_rational(p)?,
                });
            }
            for (a, b, level) in &entry.density {
                pieces.push(Piece::Density {
                    start: rational::parse_rational(a)?,
                    end: rational::parse_rational(b)?,
                    level: rational::parse_rational(level)?,
                });
            }
            if leaves[leaf].is_some() {
                return Err(Error::InvalidRandomTime(format!(
                    "leaf {:?} listed twice",
                    entry.leaf
                )));
            }
            leaves[leaf] = Some(LeafLaw::new(pieces)?);
        }
        let leaves = leaves
            .into_iter()
            .enumerate()
            .map(|(l, law)| {
                law.ok_or_else(|| Error::InvalidRandomTime(format!("leaf {l} has no law")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, leaves)
    }

    /// Serializes atoms before densities, with all mass at infinity merged
    /// into one trailing atom. Both steps preserve the law but not the layout.
    pub fn to_description(&self, space: &FilteredSpace) -> RandomTimeDescription {
        let per_leaf = self
            .leaves
            .iter()
            .enumerate()
            .map(|(l, law)| {
                let mut atoms = Vec::new();
                let mut density = Vec::new();
                let mut at_infinity = zero();
                for p in &law.pieces {
                    match p {
                        Piece::Atom {
                            at: TimePoint::Infinity,
                            mass,
                        } => at_infinity += mass,
                        Piece::Atom { at, mass } => {
                            atoms.push((at.to_string(), rational::format_rational(mass)))
                        }
                        Piece::Density { start, end, level } => density.push((
                            rational::format_rational(start),
                            rational::format_rational(end),
                            rational::format_rational(level),
                        )),
                    }
                }
                if !at_infinity.is_zero() {
                    atoms.push(("inf".into(), rational::format_rational(&at_infinity)));
                }
                LeafEntry {
                    leaf: space.terminal().cells()[l]
                        .iter()
                        .map(|&a| space.atoms()[a].id.clone())
                        .collect(),
                    atoms,
                    density,
                }
            })
            .collect();
        RandomTimeDescription { per_leaf }
    }

    pub fn from_json(space: &FilteredSpace, text: &str) -> Result<Self> {
        let desc: RandomTimeDescription =
            serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
        Self::from_description(space, &desc)
    }

    pub fn to_json(&self, space: &FilteredSpace) -> String {
        serde_json::to_string_pretty(&self.to_description(space)).expect("time serializes")
    }
}

fn same_piece(p: &Piece, r: &Piece) -> bool {
    match (p, r) {
        (Piece::Atom { at: a, .. }, Piece::Atom { at: b, .. }) => a == b,
        (
            Piece::Density {
                start: s1, end: e1, ..
            },
            Piece::Density {
                start: s2, end: e2, ..
            },
        ) => s1 == s2 && e1 == e2,
        _ => false,
    }
}

/// `min`/`max` of two pieces sharing one u-interval of length `len`.
fn piece_min_max(p: &Piece, r: &Piece) -> (Vec<Piece>, Vec<Piece>) {
    let len = p.mass();
    match (p, r) {
        (Piece::Atom { at: a, .. }, Piece::Atom { at: b, .. }) => (
            vec![Piece::Atom {
                at: TimePoint::min(a, b),
                mass: len.clone(),
            }],
            vec![Piece::Atom {
                at: TimePoint::max(a, b),
                mass: len,
            }],
        ),
        (Piece::Atom { at, .. }, d @ Piece::Density { .. })
        | (d @ Piece::Density { .. }, Piece::Atom { at, .. }) => atom_vs_density(at, d),
        (Piece::Density { .. }, Piece::Density { .. }) => density_vs_density(p, r),
    }
}

fn atom_vs_density(at: &TimePoint, d: &Piece) -> (Vec<Piece>, Vec<Piece>) {
    let Piece::Density { start, end, level } = d else {
        unreachable!()
    };
    let len = d.mass();
    let atom = |mass: Rational| Piece::Atom {
        at: at.clone(),
        mass,
    };
    match at {
        TimePoint::Finite(s) if s > start && s < end => {
            let below = Piece::Density {
                start: start.clone(),
                end: s.clone(),
                level: level.clone(),
            };
            let above = Piece::Density {
                start: s.clone(),
                end: end.clone(),
                level: level.clone(),
            };
            let du = below.mass();
            (
                vec![below, atom(&len - &du)],
                vec![atom(du), above],
            )
        }
        t if *t <= TimePoint::Finite(start.clone()) => (vec![atom(len)], vec![d.clone()]),
        _ => (vec![d.clone()], vec![atom(len)]),
    }
}

fn density_vs_density(p: &Piece, r: &Piece) -> (Vec<Piece>, Vec<Piece>) {
    let (
        Piece::Density {
            start: s1,
            level: l1,
            ..
        },
        Piece::Density {
            start: s2,
            level: l2,
            ..
        },
    ) = (p, r)
    else {
        unreachable!()
    };
    let len = p.mass();
    // t1(x) = s1 + x/l1, t2(x) = s2 + x/l2 for x in [0, len).
    let slope_diff = one() / l1 - one() / l2;
    let cross = if slope_diff.is_zero() {
        None
    } else {
        let x = (s2 - s1) / &slope_diff;
        (x.is_positive() && x < len).then_some(x)
    };
    let lower_first = |x: &Rational| {
        // which one is lower just after offset x
        let probe = x + (&len - x) / rational::int(2);
        s1 + &probe / l1 <= s2 + &probe / l2
    };
    match cross {
        None => {
            if lower_first(&zero()) {
                (vec![p.clone()], vec![r.clone()])
            } else {
                (vec![r.clone()], vec![p.clone()])
            }
        }
        Some(x) => {
            let (p0, p1) = p.split(&x);
            let (r0, r1) = r.split(&x);
            let first_p_low = s1 + &(&x / rational::int(2)) / l1 <= s2 + &(&x / rational::int(2)) / l2;
            if first_p_low {
                (vec![p0, r1], vec![r0, p1])
            } else {
                (vec![r0, p1], vec![p0, r1])
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RandomTimeDescription {
    pub per_leaf: Vec<LeafEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LeafEntry {
    pub leaf: Vec<String>,
    #[serde(default)]
    pub atoms: Vec<(String, String)>,
    #[serde(default)]
    pub density: Vec<(String, String, String)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{int, q};

    fn mixture() -> LeafLaw {
        LeafLaw::new(vec![
            Piece::Atom {
                at: TimePoint::Finite(one()),
                mass: q(1, 2),
            },
            Piece::Density {
                start: zero(),
                end: int(2),
                level: q(1, 4),
            },
        ])
        .unwrap()
    }

    #[test]
    fn survival_and_atoms_of_a_mixture() {
        let law = mixture();
        assert_eq!(law.survival(&zero()), one());
        assert_eq!(law.survival(&one()), q(1, 4));
        assert_eq!(law.at_or_after(&one()), q(3, 4));
        assert_eq!(law.survival(&int(2)), zero());
        assert_eq!(law.density_at(&q(1, 2)), q(1, 4));
        assert_eq!(law.finite_atom_mass(), q(1, 2));
        assert_eq!(law.density_mass(), q(1, 2));
    }

    #[test]
    fn layout_maps_u_to_times() {
        let law = mixture();
        assert_eq!(law.value_at_u(&q(1, 4)), TimePoint::Finite(one()));
        assert_eq!(law.value_at_u(&q(3, 4)), TimePoint::Finite(one()));
        assert_eq!(law.value_at_u(&q(5, 8)), TimePoint::Finite(q(1, 2)));
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(LeafLaw::new(vec![Piece::Atom {
            at: TimePoint::Finite(one()),
            mass: q(1, 2)
        }])
        .is_err());
        assert!(LeafLaw::new(vec![
            Piece::Density {
                start: zero(),
                end: one(),
                level: q(1, 2)
            },
            Piece::Density {
                start: q(1, 2),
                end: q(3, 2),
                level: q(1, 2)
            },
        ])
        .is_err());
    }

    #[test]
    fn min_of_density_and_atom_splits_at_the_atom() {
        let s = models::trivial_space();
        let unif = RandomTime::independent(
            &s,
            LeafLaw::new(vec![Piece::Density {
                start: zero(),
                end: int(2),
                level: q(1, 2),
            }])
            .unwrap(),
        );
        let one_t = RandomTime::deterministic(&s, TimePoint::Finite(one()));
        let (lo, hi) = unif.min_max(&one_t);
        assert_eq!(lo.leaf(0).survival(&q(1, 2)), q(3, 4));
        assert_eq!(lo.leaf(0).atom_at(&TimePoint::Finite(one())), q(1, 2));
        assert_eq!(hi.leaf(0).atom_at(&TimePoint::Finite(one())), q(1, 2));
        assert_eq!(hi.leaf(0).survival(&q(3, 2)), q(1, 4));
    }

    #[test]
    fn min_of_crossing_densities() {
        let s = models::trivial_space();
        // t1(u) = u on [0,1), t2(u) = 1/2 + u/2 on [1/2, 1): cross at u = 1.
        // Use a steeper second one: t2 = 1/4 + u/4 ... slope 1/l2 with l2 = 4.
        let a = RandomTime::independent(
            &s,
            LeafLaw::new(vec![Piece::Density {
                start: zero(),
                end: one(),
                level: one(),
            }])
            .unwrap(),
        );
        let b = RandomTime::independent(
            &s,
            LeafLaw::new(vec![Piece::Density {
                start: q(1, 4),
                end: q(1, 2),
                level: int(4),
            }])
            .unwrap(),
        );
        let (lo, hi) = a.min_max(&b);
        // crossing where u = 1/4 + u/4, i.e. u = 1/3
        for u in [q(1, 10), q(1, 2), q(9, 10)] {
            let ta = a.leaf(0).value_at_u(&u);
            let tb = b.leaf(0).value_at_u(&u);
            assert_eq!(lo.leaf(0).value_at_u(&u), TimePoint::min(&ta, &tb));
            assert_eq!(hi.leaf(0).value_at_u(&u), TimePoint::max(&ta, &tb));
        }
    }

    #[test]
    fn json_round_trip() {
        let s = models::coin_space();
        let t = RandomTime::from_leaf_pieces(
            &s,
            vec![
                vec![
                    Piece::Atom {
                        at: TimePoint::Finite(one()),
                        mass: q(1, 2),
                    },
                    Piece::infinite(q(1, 2)),
                ],
                mixture().pieces().to_vec(),
            ],
        )
        .unwrap();
        let back = RandomTime::from_json(&s, &t.to_json(&s)).unwrap();
        assert_eq!(back, t);
    }
}
