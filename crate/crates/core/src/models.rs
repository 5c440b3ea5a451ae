//! Small reference models used by tests, the CLI and the demo.

use crate::rational::{int, one, q, zero, Rational, TimePoint};
use crate::random_time::{LeafLaw, Piece, RandomTime};
use crate::space::{Atom, FilteredSpace};

/// One atom, grid `[0]`.
pub fn trivial_space() -> FilteredSpace {
    FilteredSpace::new(
        vec![Atom {
            id: "o".into(),
            weight: one(),
        }],
        vec![zero()],
        vec![vec![vec![0]]],
    )
    .expect("trivial space is valid")
}

/// Two atoms `a`, `b` of weight 1/2 revealed at time 1.
pub fn coin_space() -> FilteredSpace {
    split_space(&[zero(), one()], 1)
}

/// Two atoms `a`, `b` of weight 1/2 on `grid`, revealed at index `split`.
pub fn split_space(grid: &[Rational], split: usize) -> FilteredSpace {
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
    let partitions = (0..grid.len())
        .map(|k| {
            if k < split {
                vec![vec![0, 1]]
            } else {
                vec![vec![0], vec![1]]
            }
        })
        .collect();
    FilteredSpace::new(atoms, grid.to_vec(), partitions).expect("split space is valid")
}

/// Symmetric ±1 walk with `steps` steps on grid `0, 1, ..., steps`.
/// Atom ids spell the moves (`u`/`d`); `F_k` reveals the first `k` moves.
pub fn walk_space(steps: usize) -> FilteredSpace {
    let n = 1usize << steps;
    let atoms = (0..n)
        .map(|i| Atom {
            id: walk_id(i, steps),
            weight: q(1, n as i64),
        })
        .collect();
    let grid = (0..=steps).map(|k| int(k as i64)).collect();
    let partitions = (0..=steps)
        .map(|k| {
            let width = 1usize << (steps - k);
            (0..(1usize << k))
                .map(|c| (c * width..(c + 1) * width).collect())
                .collect()
        })
        .collect();
    FilteredSpace::new(atoms, grid, partitions).expect("walk space is valid")
}

fn walk_id(i: usize, steps: usize) -> String {
    (0..steps)
        .map(|j| if (i >> (steps - 1 - j)) & 1 == 0 { 'u' } else { 'd' })
        .collect()
}

/// Walk positions `S_0..S_steps` of atom `i`.
pub fn walk_positions(i: usize, steps: usize) -> Vec<i64> {
    let mut s = vec![0i64];
    for j in 0..steps {
        let up = (i >> (steps - 1 - j)) & 1 == 0;
        s.push(s[j] + if up { 1 } else { -1 });
    }
    s
}

/// Last time the walk sits at its running maximum over the whole horizon.
pub fn walk_last_max_time(space: &FilteredSpace, steps: usize) -> RandomTime {
    let values: Vec<TimePoint> = (0..space.n_atoms())
        .map(|i| {
            let s = walk_positions(i, steps);
            let max = *s.iter().max().expect("non-empty walk");
            let last = s.iter().rposition(|&x| x == max).expect("max is attained");
            TimePoint::Finite(int(last as i64))
        })
        .collect();
    RandomTime::from_atom_values(space, &values).expect("walk times are leaf-measurable")
}

/// Time 1 or never, decided by a coin independent of the whole tree.
pub fn external_coin_time(space: &FilteredSpace) -> RandomTime {
    RandomTime::independent(
        space,
        LeafLaw::new(vec![
            Piece::Atom {
                at: TimePoint::Finite(one()),
                mass: q(1, 2),
            },
            Piece::infinite(q(1, 2)),
        ])
        .expect("valid law"),
    )
}

/// Time 1 or 2 with equal odds, independent of the tree.
pub fn external_two_point_time(space: &FilteredSpace) -> RandomTime {
    RandomTime::independent(
        space,
        LeafLaw::new(vec![
            Piece::Atom {
                at: TimePoint::Finite(one()),
                mass: q(1, 2),
            },
            Piece::Atom {
                at: TimePoint::Finite(int(2)),
                mass: q(1, 2),
            },
        ])
        .expect("valid law"),
    )
}

/// Uniform on `[a, b)` independent of the tree.
pub fn uniform_time(space: &FilteredSpace, a: Rational, b: Rational) -> RandomTime {
    let level = one() / (&b - &a);
    RandomTime::independent(
        space,
        LeafLaw::new(vec![Piece::Density {
            start: a,
            end: b,
            level,
        }])
        .expect("valid law"),
    )
}

/// Half an atom at 1, half uniform on `[0, 2)`, independent of the tree.
pub fn atom_uniform_mixture(space: &FilteredSpace) -> RandomTime {
    RandomTime::independent(
        space,
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
        .expect("valid law"),
    )
}

/// Per-atom `TimePoint`s, one per leaf of the coin space.
pub fn coin_time(space: &FilteredSpace, on_a: TimePoint, on_b: TimePoint) -> RandomTime {
    RandomTime::from_atom_values(space, &[on_a, on_b]).expect("coin leaves are atoms")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_space_has_dyadic_partitions() {
        let s = walk_space(3);
        assert_eq!(s.n_atoms(), 8);
        assert_eq!(s.partition(0).len(), 1);
        assert_eq!(s.partition(2).len(), 4);
        assert_eq!(s.atoms()[5].id, "dud");
        assert_eq!(walk_positions(5, 3), vec![0, -1, 0, -1]);
    }

    #[test]
    fn walk_last_max_of_down_up_down() {
        let s = walk_space(3);
        let t = walk_last_max_time(&s, 3);
        // dud: positions 0,-1,0,-1, max 0 last reached at 2
        let leaf = s.leaf_of(5);
        assert_eq!(t.leaf(leaf).atom_at(&TimePoint::Finite(int(2))), one());
    }
}
