//! Thin–thick splitting of random times and the conditional laws linking the
//! two parts.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::bundle::{associated_processes, leaf_jump, TimeProcessBundle};
use crate::error::{Error, Result};
use crate::exhaust::{exhausting_system, ExhaustingSystem};
use crate::random_time::{Piece, RandomTime};
use crate::rational::{one, zero, Rational, TimePoint};
use crate::space::FilteredSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// `τ` on `{ΔA°_τ > 0}`, `∞` elsewhere.
    pub thin: RandomTime,
    /// `τ` on `{ΔA°_τ = 0}`, `∞` elsewhere.
    pub thick: RandomTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripleDecomposition {
    /// Thin part where also `ΔA^p_τ > 0`.
    pub accessible: RandomTime,
    /// Thin part where `ΔA^p_τ = 0`.
    pub inaccessible: RandomTime,
    pub thick: RandomTime,
}

fn jump_masks(
    tau: &RandomTime,
    space: &FilteredSpace,
    bundle: &TimeProcessBundle,
) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let mut thin = Vec::with_capacity(tau.n_leaves());
    let mut predictable = Vec::with_capacity(tau.n_leaves());
    for (l, law) in tau.leaves().iter().enumerate() {
        let mut t_row = Vec::with_capacity(law.pieces().len());
        let mut p_row = Vec::with_capacity(law.pieces().len());
        for p in law.pieces() {
            match p {
                Piece::Atom {
                    at: TimePoint::Finite(s),
                    ..
                } => {
                    t_row.push(leaf_jump(&bundle.a_o, space, l, s).is_positive());
                    p_row.push(leaf_jump(&bundle.a_p, space, l, s).is_positive());
                }
                _ => {
                    t_row.push(false);
                    p_row.push(false);
                }
            }
        }
        thin.push(t_row);
        predictable.push(p_row);
    }
    (thin, predictable)
}

fn complement(mask: &[Vec<bool>]) -> Vec<Vec<bool>> {
    mask.iter().map(|r| r.iter().map(|b| !b).collect()).collect()
}

pub fn thin_thick_decompose(tau: &RandomTime, space: &FilteredSpace) -> Decomposition {
    let bundle = associated_processes(tau, space);
    let (thin, _) = jump_masks(tau, space, &bundle);
    Decomposition {
        thin: tau.restrict(&thin),
        thick: tau.restrict(&complement(&thin)),
    }
}

pub fn triple_decompose(tau: &RandomTime, space: &FilteredSpace) -> TripleDecomposition {
    let bundle = associated_processes(tau, space);
    let (thin, pred) = jump_masks(tau, space, &bundle);
    let acc: Vec<Vec<bool>> = thin
        .iter()
        .zip(&pred)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x && *y).collect())
        .collect();
    let inacc: Vec<Vec<bool>> = thin
        .iter()
        .zip(&pred)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x && !*y).collect())
        .collect();
    TripleDecomposition {
        accessible: tau.restrict(&acc),
        inaccessible: tau.restrict(&inacc),
        thick: tau.restrict(&complement(&thin)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossConditionalReport {
    #[serde(with = "crate::rational::serde_q")]
    pub time: Rational,
    /// `P(C_n | F^{τ2}_t)` for every `n`.
    #[serde(with = "crate::rational::serde_q")]
    pub events_residual: Rational,
    /// `P(τ1 > t | F^{τ2}_t)`.
    #[serde(with = "crate::rational::serde_q")]
    pub thin_survival_residual: Rational,
    /// `P(τ2 > t | F^{τ1}_t)`.
    #[serde(with = "crate::rational::serde_q")]
    pub thick_survival_residual: Rational,
}

impl CrossConditionalReport {
    pub fn max_residual(&self) -> Rational {
        [
            &self.events_residual,
            &self.thin_survival_residual,
            &self.thick_survival_residual,
        ]
        .into_iter()
        .max()
        .cloned()
        .unwrap_or_else(zero)
    }
}

/// One `(leaf, piece)` of the common layout with the values of both parts.
struct JointPiece {
    leaf: usize,
    mass: Rational,
    piece: Piece,
    thin_at: TimePoint,
    /// Index of the exhausting event holding this piece.
    event: usize,
    thick_density: bool,
}

/// Measure of `{τ2 ∈ B}` on one joint piece, with `B` an open interval or a
/// point; a thin piece has `τ2 = ∞`.
enum Window<'a> {
    Point(&'a Rational),
    Open(&'a Rational, &'a Rational),
    After(&'a Rational),
}

fn window_mass(p: &Piece, w: &Window<'_>) -> Rational {
    match p {
        Piece::Atom { at, mass } => {
            let hit = match (at, w) {
                (TimePoint::Finite(s), Window::Point(x)) => s == *x,
                (TimePoint::Finite(s), Window::Open(a, b)) => *a < s && s < *b,
                (TimePoint::Finite(s), Window::After(t)) => s > *t,
                (TimePoint::Infinity, Window::After(_)) => true,
                (TimePoint::Infinity, _) => false,
            };
            if hit {
                mass.clone()
            } else {
                zero()
            }
        }
        Piece::Density { start, end, level } => {
            let (lo, hi) = match w {
                Window::Point(_) => return zero(),
                Window::Open(a, b) => ((*a).clone(), (*b).clone()),
                Window::After(t) => ((*t).clone(), end.clone()),
            };
            let lo = if &lo > start { lo } else { start.clone() };
            let hi = if &hi < end { hi } else { end.clone() };
            if lo < hi {
                level * (hi - lo)
            } else {
                zero()
            }
        }
    }
}

/// Checks the conditional laws of each part given the filtration enlarged by
/// the other, at time `t`, by integrating both sides over
/// `{cell of F_t} × {window of the conditioning time}`.
///
/// For `n ≥ 1`, `P(C_n | F^{τ2}_t) = 1_{t<τ2} z^n_t / Z²_t`. For `C_0 = {τ1 = ∞}`
/// the same reasoning gives `1_{τ2≤t} + 1_{t<τ2} (z^0_t - 1 + Z²_t) / Z²_t`,
/// since `C_0` also contains `{τ2 < ∞}`.
pub fn cross_conditional_check(
    tau: &RandomTime,
    space: &FilteredSpace,
    t: &Rational,
) -> Result<CrossConditionalReport> {
    let dec = thin_thick_decompose(tau, space);
    let (thin, thick) = dec.thin.align(&dec.thick);
    let system = exhausting_system(&thin, space, None)?;
    let b1 = associated_processes(&thin, space);
    let b2 = associated_processes(&thick, space);
    cross_conditional_with(&thin, &thick, &system, &b1, &b2, space, t)
}

pub(crate) fn cross_conditional_with(
    thin: &RandomTime,
    thick: &RandomTime,
    system: &ExhaustingSystem,
    b1: &TimeProcessBundle,
    b2: &TimeProcessBundle,
    space: &FilteredSpace,
    t: &Rational,
) -> Result<CrossConditionalReport> {
    let mut joint = Vec::new();
    for l in 0..space.n_leaves() {
        for (j, (p1, p2)) in thin.leaf(l).pieces().iter().zip(thick.leaf(l).pieces()).enumerate() {
            let thin_at = match p1 {
                Piece::Atom { at, .. } => at.clone(),
                Piece::Density { .. } => unreachable!("thin part is atomic"),
            };
            joint.push(JointPiece {
                leaf: l,
                mass: p1.mass(),
                piece: p2.clone(),
                thin_at,
                event: system.event_of(l, j),
                thick_density: p2.is_density(),
            });
        }
    }
    let tp = TimePoint::Finite(t.clone());
    let k = space.index_at(t);
    let cells = space.partition(k).cells();

    // windows of τ2 ∧ t: breakpoints of τ2 up to t
    let mut cuts: Vec<Rational> = thick
        .breakpoints()
        .into_iter()
        .filter(|s| s <= t)
        .chain([zero(), t.clone()])
        .collect();
    cuts.sort();
    cuts.dedup();
    let mut windows: Vec<Window<'_>> = cuts.iter().map(Window::Point).collect();
    windows.extend(cuts.windows(2).map(|w| Window::Open(&w[0], &w[1])));
    windows.push(Window::After(t));

    let mut events_res = zero();
    let mut thin_res = zero();
    for cell in cells {
        let a0 = cell[0];
        let z2 = b2.z.value(a0, t);
        let z1 = b1.z.value(a0, t);
        let cell_mass_after: Rational = joint_cell_mass(&joint, space, cell, |jp| {
            window_mass(&jp.piece, &Window::After(t))
        });
        if z2.is_zero() && cell_mass_after.is_positive() {
            return Err(Error::DegenerateDenominator { time: t.clone() });
        }
        for w in &windows {
            let after = matches!(w, Window::After(_));
            // integral of 1_{cell} 1_{τ2 ∈ w} and of the events against it
            let base = joint_cell_mass(&joint, space, cell, |jp| window_mass(&jp.piece, w));
            for n in 0..system.len() {
                let lhs = joint_cell_mass(&joint, space, cell, |jp| {
                    if jp.event == n {
                        window_mass(&jp.piece, w)
                    } else {
                        zero()
                    }
                });
                let y = if !after {
                    if n == 0 {
                        one()
                    } else {
                        zero()
                    }
                } else if base.is_zero() {
                    zero()
                } else {
                    let zn = system.martingales[n].value(a0, t);
                    if n == 0 {
                        (zn - one() + &z2) / &z2
                    } else {
                        zn / &z2
                    }
                };
                events_res = events_res.max((lhs - &y * &base).abs());
            }
            let lhs = joint_cell_mass(&joint, space, cell, |jp| {
                if tp < jp.thin_at {
                    window_mass(&jp.piece, w)
                } else {
                    zero()
                }
            });
            let y = if !after || base.is_zero() {
                one()
            } else {
                one() - (one() - &z1) / &z2
            };
            thin_res = thin_res.max((lhs - y * &base).abs());
        }
    }

    // conditioning on τ1 ∧ t: atoms of τ1 up to t and {τ1 > t}
    let mut thick_res = zero();
    let mut thin_points: Vec<Rational> = thin.atom_support().into_iter().filter(|s| s <= t).collect();
    thin_points.sort();
    for cell in cells {
        let a0 = cell[0];
        let z1 = b1.z.value(a0, t);
        let z2 = b2.z.value(a0, t);
        let in_window = |jp: &JointPiece, s: Option<&Rational>| match s {
            Some(s) => jp.thin_at == TimePoint::Finite(s.clone()),
            None => tp < jp.thin_at,
        };
        let windows: Vec<Option<&Rational>> =
            thin_points.iter().map(Some).chain(std::iter::once(None)).collect();
        for s in windows {
            let base = joint_cell_mass(&joint, space, cell, |jp| {
                if in_window(jp, s) {
                    jp.mass.clone()
                } else {
                    zero()
                }
            });
            if s.is_none() && z1.is_zero() && base.is_positive() {
                return Err(Error::DegenerateDenominator { time: t.clone() });
            }
            let lhs = joint_cell_mass(&joint, space, cell, |jp| {
                if in_window(jp, s) {
                    window_mass(&jp.piece, &Window::After(t))
                } else {
                    zero()
                }
            });
            let y = if s.is_some() || base.is_zero() {
                one()
            } else {
                one() - (one() - &z2) / &z1
            };
            thick_res = thick_res.max((lhs - y * &base).abs());
        }
    }
    debug_assert!(joint.iter().all(|jp| !jp.thick_density || jp.thin_at == TimePoint::Infinity));
    Ok(CrossConditionalReport {
        time: t.clone(),
        events_residual: events_res,
        thin_survival_residual: thin_res,
        thick_survival_residual: thick_res,
    })
}

fn joint_cell_mass(
    joint: &[JointPiece],
    space: &FilteredSpace,
    cell: &[usize],
    f: impl Fn(&JointPiece) -> Rational,
) -> Rational {
    let mut total = zero();
    for &a in cell {
        let leaf = space.leaf_of(a);
        let inner: Rational = joint.iter().filter(|jp| jp.leaf == leaf).map(&f).sum();
        total += space.weight(a) * inner;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{classify, TimeKind};
    use crate::models;
    use crate::rational::{int, q};

    #[test]
    fn mixture_splits_at_the_atom() {
        let s = models::trivial_space();
        let tau = models::atom_uniform_mixture(&s);
        let d = thin_thick_decompose(&tau, &s);
        assert_eq!(d.thin.leaf(0).atom_at(&TimePoint::Finite(one())), q(1, 2));
        assert_eq!(d.thin.leaf(0).infinite_mass(), q(1, 2));
        assert_eq!(d.thick.leaf(0).density_mass(), q(1, 2));
        assert_eq!(classify(&d.thin, &s).kind, TimeKind::Thin);
        assert_eq!(classify(&d.thick, &s).kind, TimeKind::Thick);
        let (lo, hi) = d.thin.min_max(&d.thick);
        assert!(lo.same_pointwise(&tau));
        assert!(hi.same_pointwise(&RandomTime::infinite(&s)));
    }

    #[test]
    fn revealed_coin_time_is_accessible() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let d = triple_decompose(&tau, &s);
        assert!(d.accessible.same_pointwise(&tau));
        assert!(d.inaccessible.is_infinite());
        assert!(d.thick.is_infinite());
    }

    #[test]
    fn cross_conditional_laws_hold_for_the_mixture() {
        let s = models::coin_space();
        let tau = models::atom_uniform_mixture(&s);
        for t in [zero(), q(1, 2), one(), q(3, 2), int(2), int(3)] {
            let r = cross_conditional_check(&tau, &s, &t).unwrap();
            assert!(r.max_residual().is_zero(), "t = {t}: {r:?}");
        }
    }
}
