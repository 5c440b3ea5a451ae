//! Seeded random instances for the verification suites: small trees, mixed
//! random times, an honest time and test integrands.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exhaust::conditional_martingale;
use crate::path::PiecewisePath;
use crate::random_time::{LeafLaw, Piece, RandomTime};
use crate::rational::{int, q, zero, Rational, TimePoint};
use crate::space::{Atom, FilteredSpace, PiecewisePoly, Poly, RandomVariable};

pub const MAX_ATOMS: usize = 16;
pub const MAX_GRID: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeShape {
    /// Atoms only, possibly depending on the auxiliary coordinate.
    Atomic,
    /// One value per leaf.
    Measurable,
    Mixed,
    /// Densities only, possibly with mass at infinity.
    Thick,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: Option<u64>,
    pub space: FilteredSpace,
    pub tau: RandomTime,
    /// A second purely atomic time.
    pub sigma: RandomTime,
    /// End of a random optional set, possibly killed independently.
    pub honest: RandomTime,
    /// An `F`-martingale closed by a leaf-measurable variable.
    pub martingale: PiecewisePath,
    pub x: RandomVariable,
}

/// Per-instance seeds drawn from one master stream.
pub fn instance_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

pub fn random_space<R: Rng>(rng: &mut R) -> FilteredSpace {
    let n_grid = rng.random_range(1..=MAX_GRID);
    let steps = [q(1, 2), int(1), int(2)];
    let mut grid = vec![zero()];
    for _ in 1..n_grid {
        let last = grid.last().expect("grid starts at 0").clone();
        grid.push(last + steps.choose(rng).expect("non-empty").clone());
    }
    // parent of each cell, level by level
    let roots = rng.random_range(1..=2usize);
    let mut parents: Vec<Vec<usize>> = vec![vec![0; roots]];
    for _ in 1..n_grid {
        let prev = parents.last().expect("root level").len();
        let mut next = Vec::new();
        for c in 0..prev {
            let room = 12usize.saturating_sub(next.len() + (prev - c - 1));
            let r: f64 = rng.random();
            let kids = if r < 0.5 { 1 } else if r < 0.85 { 2 } else { 3 };
            for _ in 0..kids.min(room.max(1)) {
                next.push(c);
            }
        }
        parents.push(next);
    }
    let leaves = parents.last().expect("levels").len();
    let mut leaf_of_atom = Vec::new();
    for leaf in 0..leaves {
        let twins = leaf_of_atom.len() + 2 <= MAX_ATOMS && rng.random_bool(0.2);
        leaf_of_atom.push(leaf);
        if twins && leaf_of_atom.len() < MAX_ATOMS {
            leaf_of_atom.push(leaf);
        }
    }
    let raw: Vec<i64> = leaf_of_atom.iter().map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    let atoms = raw
        .iter()
        .enumerate()
        .map(|(i, w)| Atom {
            id: format!("w{i}"),
            weight: q(*w, total),
        })
        .collect();
    let last = parents.len() - 1;
    let ancestor = |leaf: usize, level: usize| -> usize {
        let mut c = leaf;
        for l in (level + 1..=last).rev() {
            c = parents[l][c];
        }
        c
    };
    let partitions = (0..=last)
        .map(|level| {
            let mut cells = vec![Vec::new(); parents[level].len()];
            for (a, &leaf) in leaf_of_atom.iter().enumerate() {
                cells[ancestor(leaf, level)].push(a);
            }
            cells
        })
        .collect();
    FilteredSpace::new(atoms, grid, partitions).expect("generated space is valid")
}

/// Grid points, midpoints and one point past the horizon.
fn candidate_times(space: &FilteredSpace) -> Vec<Rational> {
    let g = space.grid();
    let mut out: Vec<Rational> = g.to_vec();
    for w in g.windows(2) {
        out.push((&w[0] + &w[1]) / int(2));
    }
    out.push(g.last().expect("non-empty grid") + q(1, 2));
    out.sort();
    out
}

fn normalized(weights: &[i64]) -> Vec<Rational> {
    let total: i64 = weights.iter().sum();
    weights.iter().map(|w| q(*w, total)).collect()
}

fn random_law<R: Rng>(rng: &mut R, shape: TimeShape, times: &[Rational]) -> LeafLaw {
    let mut atoms: Vec<TimePoint> = Vec::new();
    let mut densities: Vec<(Rational, Rational)> = Vec::new();
    let pick = |rng: &mut R, k: usize| -> Vec<Rational> {
        let mut v: Vec<Rational> = times.choose_multiple(rng, k).cloned().collect();
        v.sort();
        v
    };
    match shape {
        TimeShape::Measurable => {
            let at = if rng.random_bool(0.1) {
                TimePoint::Infinity
            } else {
                TimePoint::Finite(times.choose(rng).expect("candidates").clone())
            };
            return LeafLaw::point(at);
        }
        TimeShape::Atomic | TimeShape::Mixed => {
            let k = rng.random_range(1..=3usize.min(times.len()));
            atoms.extend(pick(rng, k).into_iter().map(TimePoint::Finite));
        }
        TimeShape::Thick => {}
    }
    if matches!(shape, TimeShape::Mixed | TimeShape::Thick) {
        let mut ends: Vec<Rational> = times.to_vec();
        ends.push(times.last().expect("candidates") + int(1));
        let k = if ends.len() >= 4 && rng.random_bool(0.3) { 4 } else { 2 };
        let mut e: Vec<Rational> = ends.choose_multiple(rng, k).cloned().collect();
        e.sort();
        for pair in e.chunks(2) {
            densities.push((pair[0].clone(), pair[1].clone()));
        }
    }
    if rng.random_bool(0.3) {
        atoms.push(TimePoint::Infinity);
    }
    let n = atoms.len() + densities.len();
    let weights: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let masses = normalized(&weights);
    let mut pieces: Vec<Piece> = atoms
        .into_iter()
        .zip(&masses)
        .map(|(at, mass)| Piece::Atom {
            at,
            mass: mass.clone(),
        })
        .collect();
    let offset = pieces.len();
    for (i, (start, end)) in densities.into_iter().enumerate() {
        let level = &masses[offset + i] / (&end - &start);
        pieces.push(Piece::Density { start, end, level });
    }
    pieces.shuffle(rng);
    LeafLaw::new(pieces).expect("generated law is valid")
}

pub fn random_time<R: Rng>(rng: &mut R, space: &FilteredSpace, shape: TimeShape) -> RandomTime {
    let times = candidate_times(space);
    let leaves = (0..space.n_leaves()).map(|_| random_law(rng, shape, &times)).collect();
    RandomTime::new(space, leaves).expect("generated time is valid")
}

/// `sup{t : (ω, t) ∈ Γ}` for a random optional set `Γ` on the candidate
/// times, sent to `∞` on part of the auxiliary coordinate for some leaves.
pub fn random_honest_time<R: Rng>(rng: &mut R, space: &FilteredSpace) -> RandomTime {
    let mut end: Vec<TimePoint> = vec![TimePoint::Infinity; space.n_leaves()];
    let leaf_atom = |l: usize| space.terminal().cells()[l][0];
    for s in candidate_times(space) {
        let part = space.partition(space.index_at(&s));
        let hit: Vec<bool> = (0..part.len()).map(|_| rng.random_bool(0.35)).collect();
        for (l, e) in end.iter_mut().enumerate() {
            if hit[part.cell_of(leaf_atom(l))] {
                *e = TimePoint::Finite(s.clone());
            }
        }
    }
    let leaves = end
        .into_iter()
        .map(|at| {
            if at.is_finite() && rng.random_bool(0.25) {
                let p = if rng.random_bool(0.5) { q(1, 2) } else { q(1, 3) };
                LeafLaw::new(vec![
                    Piece::Atom {
                        at,
                        mass: p.clone(),
                    },
                    Piece::infinite(int(1) - p),
                ])
                .expect("valid law")
            } else {
                LeafLaw::point(at)
            }
        })
        .collect();
    RandomTime::new(space, leaves).expect("generated time is valid")
}

fn random_poly<R: Rng>(rng: &mut R) -> Poly {
    let deg = rng.random_range(0..=2usize);
    Poly((0..=deg).map(|_| int(rng.random_range(-2..=2))).collect())
}

fn random_variable<R: Rng>(rng: &mut R, space: &FilteredSpace) -> RandomVariable {
    RandomVariable::new(
        (0..space.n_atoms())
            .map(|_| {
                let cut = [q(1, 4), q(1, 2), q(3, 4)].choose(rng).expect("cuts").clone();
                PiecewisePoly::new(vec![
                    (zero(), cut.clone(), random_poly(rng)),
                    (cut, int(1), random_poly(rng)),
                ])
                .expect("pieces tile [0, 1]")
            })
            .collect(),
    )
}

fn random_martingale<R: Rng>(rng: &mut R, space: &FilteredSpace) -> PiecewisePath {
    let per_leaf: Vec<Rational> = (0..space.n_leaves()).map(|_| int(rng.random_range(-3..=3))).collect();
    conditional_martingale(space, &space.leaf_to_atoms(&per_leaf))
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = random_space(&mut rng);
    let r: f64 = rng.random();
    let shape = if r < 0.35 {
        TimeShape::Atomic
    } else if r < 0.5 {
        TimeShape::Measurable
    } else if r < 0.85 {
        TimeShape::Mixed
    } else {
        TimeShape::Thick
    };
    let tau = random_time(&mut rng, &space, shape);
    let sigma = random_time(&mut rng, &space, TimeShape::Atomic);
    let honest = random_honest_time(&mut rng, &space);
    let martingale = random_martingale(&mut rng, &space);
    let x = random_variable(&mut rng, &space);
    Instance {
        seed: Some(seed),
        space,
        tau,
        sigma,
        honest,
        martingale,
        x,
    }
}

/// Instance around a user-supplied model, with fixed companions.
pub fn model_instance(space: FilteredSpace, tau: RandomTime) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sigma = random_time(&mut rng, &space, TimeShape::Atomic);
    let honest = random_honest_time(&mut rng, &space);
    let martingale = random_martingale(&mut rng, &space);
    let x = random_variable(&mut rng, &space);
    Instance {
        seed: None,
        space,
        tau,
        sigma,
        honest,
        martingale,
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_size_limits_and_are_reproducible() {
        for seed in instance_seeds(11, 40) {
            let inst = random_instance(seed);
            assert!(inst.space.n_atoms() <= MAX_ATOMS);
            assert!(inst.space.grid().len() <= MAX_GRID);
            let again = random_instance(seed);
            assert_eq!(inst.tau, again.tau);
            assert_eq!(inst.space, again.space);
            assert!(inst.sigma.is_atomic() && inst.honest.is_atomic());
        }
    }

    #[test]
    fn corpus_mixes_shapes() {
        let kinds: Vec<bool> = instance_seeds(3, 60)
            .into_iter()
            .map(|s| random_instance(s).tau.is_atomic())
            .collect();
        assert!(kinds.iter().any(|&a| a) && kinds.iter().any(|&a| !a));
    }
}
