//! Optional and predictable projections, and their dual versions.
//!
//! Raw processes may depend on the auxiliary coordinate. Since that coordinate
//! is independent of the tree, conditioning on `F_t` only needs the per-atom
//! average over `u`, which is what [`RawIncreasingProcess::mean_path`] gives.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::path::{Knot, PathFlags, PiecewisePath};
use crate::random_time::{Piece, RandomTime};
use crate::rational::{int, zero, Rational, TimePoint};
use crate::space::FilteredSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Optional,
    Predictable,
}

impl Projection {
    /// Partition index used for values at a knot.
    fn value_index(self, space: &FilteredSpace, t: &Rational) -> usize {
        match self {
            Projection::Optional => space.index_at(t),
            Projection::Predictable => space.pre_index_at(t),
        }
    }

    fn flags(self, increasing: bool) -> PathFlags {
        PathFlags {
            adapted: true,
            predictable: self == Projection::Predictable,
            increasing,
        }
    }
}

/// A finite increasing measure on `[0, ∞)` with atoms and step densities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepMeasure {
    pub atoms: Vec<(Rational, Rational)>,
    pub densities: Vec<(Rational, Rational, Rational)>,
}

impl StepMeasure {
    pub fn point(t: Rational, size: Rational) -> Self {
        StepMeasure {
            atoms: vec![(t, size)],
            densities: Vec::new(),
        }
    }

    fn scaled(&self, c: &Rational) -> StepMeasure {
        StepMeasure {
            atoms: self.atoms.iter().map(|(t, m)| (t.clone(), m * c)).collect(),
            densities: self
                .densities
                .iter()
                .map(|(a, b, l)| (a.clone(), b.clone(), l * c))
                .collect(),
        }
    }

    fn extend(&mut self, other: StepMeasure) {
        self.atoms.extend(other.atoms);
        self.densities.extend(other.densities);
    }

    pub fn atom_at(&self, t: &Rational) -> Rational {
        self.atoms
            .iter()
            .filter(|(s, _)| s == t)
            .map(|(_, m)| m.clone())
            .sum()
    }

    pub fn density_at(&self, s: &Rational) -> Rational {
        self.densities
            .iter()
            .filter(|(a, b, _)| a <= s && s < b)
            .map(|(_, _, l)| l.clone())
            .sum()
    }

    /// Mass of the open interval `(a, b)`.
    pub fn open_mass(&self, a: &Rational, b: &Rational) -> Rational {
        let atoms: Rational = self
            .atoms
            .iter()
            .filter(|(s, _)| a < s && s < b)
            .map(|(_, m)| m.clone())
            .sum();
        let dens: Rational = self
            .densities
            .iter()
            .map(|(lo, hi, l)| overlap(lo, hi, a, b) * l)
            .sum();
        atoms + dens
    }

    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self.atoms.iter().map(|(t, _)| t.clone()).collect();
        for (a, b, _) in &self.densities {
            out.push(a.clone());
            out.push(b.clone());
        }
        out
    }

    pub fn total(&self) -> Rational {
        let a: Rational = self.atoms.iter().map(|(_, m)| m.clone()).sum();
        let d: Rational = self.densities.iter().map(|(x, y, l)| (y - x) * l).sum();
        a + d
    }
}

fn overlap(lo: &Rational, hi: &Rational, a: &Rational, b: &Rational) -> Rational {
    let l = if lo > a { lo } else { a };
    let h = if hi < b { hi } else { b };
    if l < h {
        h - l
    } else {
        zero()
    }
}

/// Paths of a raw increasing process on one auxiliary segment of a leaf.
#[derive(Clone, Debug, PartialEq)]
pub enum RawSegment {
    /// The same increasing path for every `u` in the segment.
    Fixed(StepMeasure),
    /// A jump of `height` whose time runs affinely over `[start, end)` as `u`
    /// crosses the segment.
    UniformJump {
        start: Rational,
        end: Rational,
        height: Rational,
    },
}

impl RawSegment {
    fn averaged(&self) -> StepMeasure {
        match self {
            RawSegment::Fixed(m) => m.clone(),
            RawSegment::UniformJump { start, end, height } => StepMeasure {
                atoms: Vec::new(),
                densities: vec![(start.clone(), end.clone(), height / (end - start))],
            },
        }
    }

    /// Mass at `t` and on `(a, b)`, computed from the segment definition.
    fn point_mass(&self, t: &Rational) -> Rational {
        match self {
            RawSegment::Fixed(m) => m.atom_at(t),
            RawSegment::UniformJump { .. } => zero(),
        }
    }

    fn open_mass(&self, a: &Rational, b: &Rational) -> Rational {
        match self {
            RawSegment::Fixed(m) => m.open_mass(a, b),
            RawSegment::UniformJump { start, end, height } => {
                height * overlap(start, end, a, b) / (end - start)
            }
        }
    }
}

/// A finite-variation increasing process, not necessarily adapted, with
/// `V_{0-} = 0`. Each leaf carries weighted auxiliary segments whose weights
/// sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RawIncreasingProcess {
    leaves: Vec<Vec<(Rational, RawSegment)>>,
}

impl RawIncreasingProcess {
    pub fn new(space: &FilteredSpace, leaves: Vec<Vec<(Rational, RawSegment)>>) -> Result<Self> {
        if leaves.len() != space.n_leaves() {
            return Err(Error::InvalidRandomTime(format!(
                "{} leaves given for {} leaves",
                leaves.len(),
                space.n_leaves()
            )));
        }
        for segs in &leaves {
            let total: Rational = segs.iter().map(|(w, _)| w.clone()).sum();
            if total != crate::rational::one() || segs.iter().any(|(w, _)| w.is_negative()) {
                return Err(Error::InvalidRandomTime(
                    "auxiliary segment weights must be non-negative and sum to 1".into(),
                ));
            }
            for (_, s) in segs {
                let bad = match s {
                    RawSegment::Fixed(m) => {
                        m.atoms.iter().any(|(t, v)| t.is_negative() || v.is_negative())
                            || m.densities.iter().any(|(a, b, l)| {
                                a.is_negative() || b <= a || l.is_negative()
                            })
                    }
                    RawSegment::UniformJump { start, end, height } => {
                        start.is_negative() || end <= start || height.is_negative()
                    }
                };
                if bad {
                    return Err(Error::InvalidRandomTime(
                        "raw process is not increasing on [0, inf)".into(),
                    ));
                }
            }
        }
        Ok(RawIncreasingProcess { leaves })
    }

    /// `1_{[τ, ∞)}`: one segment per piece of the law.
    pub fn indicator(tau: &RandomTime) -> Self {
        let leaves = tau
            .leaves()
            .iter()
            .map(|law| {
                law.pieces()
                    .iter()
                    .map(|p| {
                        let seg = match p {
                            Piece::Atom {
                                at: TimePoint::Finite(t),
                                ..
                            } => RawSegment::Fixed(StepMeasure::point(t.clone(), crate::rational::one())),
                            Piece::Atom { .. } => RawSegment::Fixed(StepMeasure::default()),
                            Piece::Density { start, end, .. } => RawSegment::UniformJump {
                                start: start.clone(),
                                end: end.clone(),
                                height: crate::rational::one(),
                            },
                        };
                        (p.mass(), seg)
                    })
                    .collect()
            })
            .collect();
        RawIncreasingProcess { leaves }
    }

    /// An adapted (or at least `F_∞`-measurable) increasing càdlàg path as a
    /// raw process with one segment per leaf.
    pub fn from_path(space: &FilteredSpace, path: &PiecewisePath) -> Result<Self> {
        if !path.is_increasing() || !path.is_cadlag() {
            return Err(Error::InvalidRandomTime(
                "path is not increasing and cadlag".into(),
            ));
        }
        let times = path.times();
        let mut leaves = Vec::with_capacity(space.n_leaves());
        for cell in space.terminal().cells() {
            let row = path.row(cell[0]);
            if cell.iter().any(|&a| path.row(a) != row) {
                return Err(Error::InvalidRandomTime(
                    "path is not constant on an F_inf leaf".into(),
                ));
            }
            if !row.last().map_or(true, |k| k.slope.is_zero()) {
                return Err(Error::InvalidRandomTime("path grows without bound".into()));
            }
            let mut m = StepMeasure::default();
            for (i, k) in row.iter().enumerate() {
                let jump = if i == 0 { k.value.clone() } else { k.jump() };
                if !jump.is_zero() {
                    m.atoms.push((times[i].clone(), jump));
                }
                if i + 1 < row.len() && !k.slope.is_zero() {
                    m.densities
                        .push((times[i].clone(), times[i + 1].clone(), k.slope.clone()));
                }
            }
            leaves.push(vec![(crate::rational::one(), RawSegment::Fixed(m))]);
        }
        Ok(RawIncreasingProcess { leaves })
    }

    pub fn leaves(&self) -> &[Vec<(Rational, RawSegment)>] {
        &self.leaves
    }

    /// `E[dV | leaf]` as a measure.
    pub fn leaf_measure(&self, leaf: usize) -> StepMeasure {
        let mut out = StepMeasure::default();
        for (w, seg) in &self.leaves[leaf] {
            out.extend(seg.averaged().scaled(w));
        }
        out
    }

    fn breakpoints(&self) -> Vec<Rational> {
        (0..self.leaves.len())
            .flat_map(|l| self.leaf_measure(l).breakpoints())
            .collect()
    }

    /// Per-atom `E[V_t | ω]`, the only part of `V` that projections see.
    pub fn mean_path(&self, space: &FilteredSpace) -> PiecewisePath {
        let measures: Vec<StepMeasure> = (0..self.leaves.len()).map(|l| self.leaf_measure(l)).collect();
        let times = knot_times(space, self.breakpoints());
        let rows = (0..space.n_atoms())
            .map(|a| cumulative_row(&times, &measures[space.leaf_of(a)]))
            .collect();
        PiecewisePath::new(
            times,
            rows,
            PathFlags {
                adapted: false,
                predictable: false,
                increasing: true,
            },
        )
    }

    /// `E[1_D ΔV_t]` and `E[1_D V((a, b))]` for a set of atoms `D`, summed
    /// directly over segments.
    fn cell_point_mass(&self, space: &FilteredSpace, cell: &[usize], t: &Rational) -> Rational {
        cell.iter()
            .map(|&a| {
                let segs = &self.leaves[space.leaf_of(a)];
                let inner: Rational = segs.iter().map(|(w, s)| w * s.point_mass(t)).sum();
                space.weight(a) * inner
            })
            .sum()
    }

    fn cell_open_mass(
        &self,
        space: &FilteredSpace,
        cell: &[usize],
        a: &Rational,
        b: &Rational,
    ) -> Rational {
        cell.iter()
            .map(|&x| {
                let segs = &self.leaves[space.leaf_of(x)];
                let inner: Rational = segs.iter().map(|(w, s)| w * s.open_mass(a, b)).sum();
                space.weight(x) * inner
            })
            .sum()
    }
}

fn knot_times(space: &FilteredSpace, extra: Vec<Rational>) -> Vec<Rational> {
    let mut times: Vec<Rational> = space.grid().iter().cloned().chain(extra).collect();
    times.sort();
    times.dedup();
    times
}

fn cumulative_row(times: &[Rational], m: &StepMeasure) -> Vec<Knot> {
    let mut row = Vec::with_capacity(times.len());
    let mut left = zero();
    for (i, t) in times.iter().enumerate() {
        let value = &left + m.atom_at(t);
        let slope = match times.get(i + 1) {
            Some(next) => m.density_at(&midpoint(t, next)),
            None => zero(),
        };
        let next_left = match times.get(i + 1) {
            Some(next) => &value + &slope * (next - t),
            None => value.clone(),
        };
        row.push(Knot {
            left,
            value: value.clone(),
            right: value,
            slope,
        });
        left = next_left;
    }
    row
}

fn midpoint(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

/// Optional or predictable projection of a per-atom path (the path may
/// ignore adaptedness; its rows are `E[X_t | ω]`).
pub fn project_path(x: &PiecewisePath, kind: Projection, space: &FilteredSpace) -> PiecewisePath {
    let x = x.refine(space.grid());
    let times = x.times().to_vec();
    let n = space.n_atoms();
    let field = |i: usize, f: fn(&Knot) -> &Rational| -> Vec<Rational> {
        (0..n).map(|r| f(&x.row(r)[i]).clone()).collect()
    };
    let mut columns: Vec<Vec<Knot>> = Vec::with_capacity(times.len());
    for (i, t) in times.iter().enumerate() {
        let k = space.index_at(t);
        let value = space.condition_atoms(kind.value_index(space, t), &field(i, |kn| &kn.value));
        let right = space.condition_atoms(k, &field(i, |kn| &kn.right));
        let slope = space.condition_atoms(k, &field(i, |kn| &kn.slope));
        let left = if i == 0 {
            space.condition_atoms(space.pre_index_at(t), &field(0, |kn| &kn.left))
        } else {
            let prev = &columns[i - 1];
            let dt = t - &times[i - 1];
            prev.iter().map(|kn| &kn.right + &kn.slope * &dt).collect()
        };
        columns.push(
            (0..n)
                .map(|r| Knot {
                    left: left[r].clone(),
                    value: value[r].clone(),
                    right: right[r].clone(),
                    slope: slope[r].clone(),
                })
                .collect(),
        );
    }
    let rows = (0..n)
        .map(|r| columns.iter().map(|c| c[r].clone()).collect())
        .collect();
    PiecewisePath::new(times, rows, kind.flags(x.flags.increasing))
}

/// Projection of a raw increasing process.
pub fn project(v: &RawIncreasingProcess, kind: Projection, space: &FilteredSpace) -> PiecewisePath {
    project_path(&v.mean_path(space), kind, space)
}

/// Dual optional (`V°`) or dual predictable (`V^p`) projection.
pub fn dual_project(
    v: &RawIncreasingProcess,
    kind: Projection,
    space: &FilteredSpace,
) -> PiecewisePath {
    let measures: Vec<StepMeasure> = (0..v.leaves.len()).map(|l| v.leaf_measure(l)).collect();
    let times = knot_times(space, v.breakpoints());
    let n = space.n_atoms();
    let mut rows: Vec<Vec<Knot>> = vec![Vec::with_capacity(times.len()); n];
    let mut left = vec![zero(); n];
    for (i, t) in times.iter().enumerate() {
        let k = space.index_at(t);
        let jumps: Vec<Rational> = (0..n).map(|a| measures[space.leaf_of(a)].atom_at(t)).collect();
        let jumps = space.condition_atoms(kind.value_index(space, t), &jumps);
        let slopes = match times.get(i + 1) {
            Some(next) => {
                let mid = midpoint(t, next);
                let raw: Vec<Rational> =
                    (0..n).map(|a| measures[space.leaf_of(a)].density_at(&mid)).collect();
                space.condition_atoms(k, &raw)
            }
            None => vec![zero(); n],
        };
        for a in 0..n {
            let value = &left[a] + &jumps[a];
            let next_left = match times.get(i + 1) {
                Some(next) => &value + &slopes[a] * (next - t),
                None => value.clone(),
            };
            rows[a].push(Knot {
                left: left[a].clone(),
                value: value.clone(),
                right: value,
                slope: slopes[a].clone(),
            });
            left[a] = next_left;
        }
    }
    PiecewisePath::new(times, rows, kind.flags(true))
}

/// Largest duality defect `|E[∫H dV] - E[∫H dD]|` over the generating family:
/// cell indicators times point masses at knots and times open knot intervals.
/// Point masses use `F_t` cells (optional) or `F_{t-}` cells (predictable).
pub fn duality_residual(
    v: &RawIncreasingProcess,
    dual: &PiecewisePath,
    kind: Projection,
    space: &FilteredSpace,
) -> Rational {
    let times = knot_times(
        space,
        v.breakpoints().into_iter().chain(dual.times().iter().cloned()).collect(),
    );
    let dual = dual.refine(&times);
    let mut worst = zero();
    for (i, t) in times.iter().enumerate() {
        let point_cells = space.partition(kind.value_index(space, t)).cells();
        for cell in point_cells {
            let lhs = v.cell_point_mass(space, cell, t);
            let rhs: Rational = cell
                .iter()
                .map(|&a| space.weight(a) * dual.row(a)[i].jump())
                .sum();
            worst = worst.max((lhs - rhs).abs());
        }
        if let Some(next) = times.get(i + 1) {
            for cell in space.partition(space.index_at(t)).cells() {
                let lhs = v.cell_open_mass(space, cell, t, next);
                let rhs: Rational = cell
                    .iter()
                    .map(|&a| {
                        let k = &dual.row(a)[i];
                        space.weight(a) * (&dual.row(a)[i + 1].left - &k.right)
                    })
                    .sum();
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{one, q};

    #[test]
    fn optional_projection_of_uniform_indicator_is_the_cdf() {
        let s = models::trivial_space();
        let tau = models::uniform_time(&s, zero(), one());
        let p = project(&RawIncreasingProcess::indicator(&tau), Projection::Optional, &s);
        for t in [q(1, 4), q(1, 2), one(), int(3)] {
            let expect = if t < one() { t.clone() } else { one() };
            assert_eq!(p.value(0, &t), expect);
        }
    }

    #[test]
    fn predictable_projection_uses_the_previous_partition() {
        let s = models::coin_space();
        let raw = PiecewisePath::step(
            vec![zero(), one()],
            &[vec![zero(), zero()], vec![one(), zero()]],
            PathFlags::default(),
        );
        let p = project_path(&raw, Projection::Predictable, &s);
        assert_eq!(p.values(&one()), vec![q(1, 2), q(1, 2)]);
        let o = project_path(&raw, Projection::Optional, &s);
        assert_eq!(o.values(&one()), vec![one(), zero()]);
    }

    #[test]
    fn adapted_paths_are_fixed_points() {
        let s = models::coin_space();
        let x = PiecewisePath::step(
            vec![zero(), one()],
            &[vec![zero(), zero()], vec![one(), zero()]],
            PathFlags::default(),
        );
        assert_eq!(project_path(&x, Projection::Optional, &s).max_abs_diff(&x), zero());
        let v = RawIncreasingProcess::from_path(&s, &x).unwrap();
        let d = dual_project(&v, Projection::Optional, &s);
        assert_eq!(d.max_abs_diff(&x), zero());
    }

    #[test]
    fn coin_revealed_time_has_diverging_duals() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let v = RawIncreasingProcess::indicator(&tau);
        let o = dual_project(&v, Projection::Optional, &s);
        let p = dual_project(&v, Projection::Predictable, &s);
        assert_eq!(o.jumps(&one()), vec![one(), zero()]);
        assert_eq!(p.jumps(&one()), vec![q(1, 2), q(1, 2)]);
        assert_eq!(duality_residual(&v, &o, Projection::Optional, &s), zero());
        assert_eq!(duality_residual(&v, &p, Projection::Predictable, &s), zero());
        assert!(!o.is_predictable(&s));
        assert!(p.is_predictable(&s));
    }

    #[test]
    fn uniform_dual_is_continuous() {
        let s = models::trivial_space();
        let tau = models::uniform_time(&s, zero(), one());
        let d = dual_project(&RawIncreasingProcess::indicator(&tau), Projection::Optional, &s);
        assert_eq!(d.value(0, &q(1, 3)), q(1, 3));
        assert_eq!(d.terminal(0), one());
        assert!(d.times().iter().all(|t| d.jumps(t)[0].is_zero()));
    }
}
