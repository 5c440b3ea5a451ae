//! Associated processes of a random time: `Z`, `Z̃`, `A°`, `A^p` and `m`.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::path::{Knot, PiecewisePath};
use crate::projections::{dual_project, project_path, Projection, RawIncreasingProcess};
use crate::random_time::{Piece, RandomTime};
use crate::rational::{format_rational, int, zero, Rational, TimePoint};
use crate::space::FilteredSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct TimeProcessBundle {
    /// `P(τ > t | F_t)`; the terminal value is `P(τ = ∞ | F_∞)`.
    pub z: PiecewisePath,
    /// `P(τ >= t | F_t)`; shares left and right limits with `Z`.
    pub z_tilde: PiecewisePath,
    pub a_o: PiecewisePath,
    pub a_p: PiecewisePath,
    /// `Z + A°`.
    pub m: PiecewisePath,
}

impl TimeProcessBundle {
    pub fn named(&self) -> [(&'static str, &PiecewisePath); 5] {
        [
            ("Z", &self.z),
            ("Ztilde", &self.z_tilde),
            ("Ao", &self.a_o),
            ("Ap", &self.a_p),
            ("m", &self.m),
        ]
    }

    pub fn to_csv(&self, space: &FilteredSpace) -> String {
        let ids: Vec<String> = space.atoms().iter().map(|a| a.id.clone()).collect();
        let mut out = String::from(crate::path::CSV_HEADER);
        out.push('\n');
        for (name, p) in self.named() {
            p.write_csv(name, &ids, &mut out);
        }
        out
    }

    pub fn to_json_value(&self, space: &FilteredSpace) -> serde_json::Value {
        let ids: Vec<String> = space.atoms().iter().map(|a| a.id.clone()).collect();
        let mut map = serde_json::Map::new();
        for (name, p) in self.named() {
            map.insert(name.to_string(), p.to_json_value(&ids));
        }
        serde_json::Value::Object(map)
    }

    /// Replaces every path present in `value` (keyed as in
    /// [`TimeProcessBundle::to_json_value`]).
    pub fn with_overrides(&self, value: &serde_json::Value, space: &FilteredSpace) -> crate::Result<Self> {
        let ids: Vec<String> = space.atoms().iter().map(|a| a.id.clone()).collect();
        let mut out = self.clone();
        let slots: [(&str, &mut PiecewisePath); 5] = [
            ("Z", &mut out.z),
            ("Ztilde", &mut out.z_tilde),
            ("Ao", &mut out.a_o),
            ("Ap", &mut out.a_p),
            ("m", &mut out.m),
        ];
        for (name, slot) in slots {
            if let Some(v) = value.get(name) {
                *slot = PiecewisePath::from_json_value(v, &ids)?;
            }
        }
        Ok(out)
    }

    /// Union of knot times of the five paths.
    pub fn knot_times(&self) -> Vec<Rational> {
        let mut t: Vec<Rational> = self
            .named()
            .iter()
            .flat_map(|(_, p)| p.times().iter().cloned())
            .collect();
        t.sort();
        t.dedup();
        t
    }
}

fn midpoint(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

/// Knot times of the bundle: grid and every breakpoint of `τ`.
fn bundle_times(tau: &RandomTime, space: &FilteredSpace) -> Vec<Rational> {
    let mut times: Vec<Rational> = space.grid().iter().cloned().chain(tau.breakpoints()).collect();
    times.sort();
    times.dedup();
    times
}

pub fn associated_processes(tau: &RandomTime, space: &FilteredSpace) -> TimeProcessBundle {
    let times = bundle_times(tau, space);
    let survival_rows: Vec<Vec<Knot>> = (0..space.n_atoms())
        .map(|a| {
            let law = tau.leaf(space.leaf_of(a));
            times
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let value = law.survival(t);
                    Knot {
                        left: law.at_or_after(t),
                        value: value.clone(),
                        right: value,
                        slope: times
                            .get(i + 1)
                            .map_or_else(zero, |next| -law.density_at(&midpoint(t, next))),
                    }
                })
                .collect()
        })
        .collect();
    let raw = PiecewisePath::new(times.clone(), survival_rows, Default::default());
    let z = project_path(&raw, Projection::Optional, space);

    let mut rows: Vec<Vec<Knot>> = z.rows().to_vec();
    for (i, t) in times.iter().enumerate() {
        let raw_vals: Vec<Rational> = (0..space.n_atoms())
            .map(|a| tau.leaf(space.leaf_of(a)).at_or_after(t))
            .collect();
        let cond = space.condition_atoms(space.index_at(t), &raw_vals);
        for (a, v) in cond.into_iter().enumerate() {
            rows[a][i].value = v;
        }
    }
    let z_tilde = PiecewisePath::new(times, rows, z.flags);

    let indicator = RawIncreasingProcess::indicator(tau);
    let a_o = dual_project(&indicator, Projection::Optional, space);
    let a_p = dual_project(&indicator, Projection::Predictable, space);
    let mut m = z.add(&a_o);
    m.flags.adapted = true;
    TimeProcessBundle {
        z,
        z_tilde,
        a_o,
        a_p,
        m,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Thin,
    Thick,
    Mixed,
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    #[serde(with = "crate::rational::serde_q")]
    pub thin_mass: Rational,
    #[serde(with = "crate::rational::serde_q")]
    pub thick_mass: Rational,
    pub kind: TimeKind,
}

/// `ΔA°_s` on the leaf's atoms (constant on the leaf).
pub(crate) fn leaf_jump(a_o: &PiecewisePath, space: &FilteredSpace, leaf: usize, s: &Rational) -> Rational {
    let atom = space.terminal().cells()[leaf][0];
    a_o.value(atom, s) - a_o.left(atom, s)
}

/// Masses of `{ΔA°_τ > 0}` and `{ΔA°_τ = 0, τ < ∞}`.
pub fn classify(tau: &RandomTime, space: &FilteredSpace) -> Classification {
    classify_with(tau, space, &associated_processes(tau, space))
}

pub fn classify_with(
    tau: &RandomTime,
    space: &FilteredSpace,
    bundle: &TimeProcessBundle,
) -> Classification {
    let mut thin = zero();
    let mut thick = zero();
    let mut atom_mass = zero();
    let mut density_mass = zero();
    for (l, law) in tau.leaves().iter().enumerate() {
        let w = space.leaf_weight(l);
        for p in law.pieces() {
            match p {
                Piece::Atom {
                    at: TimePoint::Finite(s),
                    mass,
                } => {
                    atom_mass += &w * mass;
                    if leaf_jump(&bundle.a_o, space, l, s).is_positive() {
                        thin += &w * mass;
                    } else {
                        thick += &w * mass;
                    }
                }
                Piece::Atom { .. } => {}
                Piece::Density { .. } => {
                    // ΔA° is positive only at finitely many knots, a null set
                    // for the density.
                    density_mass += &w * p.mass();
                    thick += &w * p.mass();
                }
            }
        }
    }
    assert_eq!(thin, atom_mass, "thin mass must equal the atomic mass");
    assert_eq!(thick, density_mass, "thick mass must equal the density mass");
    let kind = if tau.is_infinite() {
        TimeKind::Infinite
    } else if thick.is_zero() {
        TimeKind::Thin
    } else if thin.is_zero() {
        TimeKind::Thick
    } else {
        TimeKind::Mixed
    };
    Classification {
        thin_mass: thin,
        thick_mass: thick,
        kind,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualWitness {
    pub time: String,
    pub atom: String,
    pub optional_jump: String,
    pub predictable_jump: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualEquality {
    pub equal: bool,
    /// Knots and atoms where `P(τ = t | F_t) ≠ P(τ = t | F_{t-})`.
    pub witnesses: Vec<DualWitness>,
    /// Every stopping time here is accessible, so the totally inaccessible
    /// alternative never applies.
    pub inaccessible_condition: &'static str,
}

/// Compares `A°` and `A^p` pathwise.
pub fn dual_equality_test(tau: &RandomTime, space: &FilteredSpace) -> DualEquality {
    let b = associated_processes(tau, space);
    dual_equality_with(&b, space)
}

pub fn dual_equality_with(b: &TimeProcessBundle, space: &FilteredSpace) -> DualEquality {
    let o = b.a_o.refine(b.a_p.times());
    let p = b.a_p.refine(b.a_o.times());
    let mut witnesses = Vec::new();
    for (i, t) in o.times().iter().enumerate() {
        for a in 0..space.n_atoms() {
            let (ko, kp) = (&o.row(a)[i], &p.row(a)[i]);
            if ko.jump() != kp.jump() {
                witnesses.push(DualWitness {
                    time: format_rational(t),
                    atom: space.atoms()[a].id.clone(),
                    optional_jump: format_rational(&ko.jump()),
                    predictable_jump: format_rational(&kp.jump()),
                });
            }
        }
    }
    let equal = o.max_abs_diff(&p).is_zero();
    debug_assert!(equal || !witnesses.is_empty());
    DualEquality {
        equal,
        witnesses,
        inaccessible_condition: "vacuous",
    }
}

/// `m ≡ 1`.
pub fn pseudo_stopping_test(tau: &RandomTime, space: &FilteredSpace) -> bool {
    is_identically_one(&associated_processes(tau, space).m)
}

pub fn is_identically_one(m: &PiecewisePath) -> bool {
    m.rows().iter().all(|row| {
        row.iter().all(|k| {
            k.left.is_one() && k.value.is_one() && k.right.is_one() && k.slope.is_zero()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{one, q};

    #[test]
    fn never_occurring_time() {
        let s = models::coin_space();
        let b = associated_processes(&RandomTime::infinite(&s), &s);
        assert!(is_identically_one(&b.z));
        assert!(is_identically_one(&b.m));
        assert_eq!(classify(&RandomTime::infinite(&s), &s).kind, TimeKind::Infinite);
    }

    #[test]
    fn deterministic_time() {
        let s = models::coin_space();
        let tau = RandomTime::deterministic(&s, TimePoint::Finite(one()));
        let b = associated_processes(&tau, &s);
        assert_eq!(b.z.value(0, &q(1, 2)), one());
        assert_eq!(b.z.value(0, &one()), zero());
        assert_eq!(b.a_o.jumps(&one()), vec![one(), one()]);
        assert!(is_identically_one(&b.m));
        assert!(dual_equality_with(&b, &s).equal);
    }

    #[test]
    fn uniform_time_is_thick_and_pseudo_stopping() {
        let s = models::trivial_space();
        let tau = models::uniform_time(&s, zero(), one());
        let b = associated_processes(&tau, &s);
        assert_eq!(b.z.value(0, &q(1, 4)), q(3, 4));
        assert_eq!(b.a_o.value(0, &q(1, 4)), q(1, 4));
        assert!(is_identically_one(&b.m));
        let c = classify(&tau, &s);
        assert_eq!(c.kind, TimeKind::Thick);
        assert_eq!(c.thick_mass, one());
    }

    #[test]
    fn mixture_is_half_thin() {
        let s = models::trivial_space();
        let c = classify(&models::atom_uniform_mixture(&s), &s);
        assert_eq!(c.thin_mass, q(1, 2));
        assert_eq!(c.thick_mass, q(1, 2));
        assert_eq!(c.kind, TimeKind::Mixed);
    }

    #[test]
    fn revealed_coin_time_has_unequal_duals() {
        let s = models::coin_space();
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Infinity);
        let d = dual_equality_test(&tau, &s);
        assert!(!d.equal);
        assert!(d.witnesses.iter().all(|w| w.time == "1/1"));
        assert!(pseudo_stopping_test(&tau, &s));
    }

    #[test]
    fn late_split_makes_m_move() {
        // τ = 1 on a, 2 on b, with a and b told apart only at time 2.
        let s = models::split_space(&[zero(), one(), int(2)], 2);
        let tau = models::coin_time(&s, TimePoint::Finite(one()), TimePoint::Finite(int(2)));
        let b = associated_processes(&tau, &s);
        assert_eq!(b.m.values(&int(2)), vec![q(1, 2), q(3, 2)]);
        assert!(!pseudo_stopping_test(&tau, &s));
    }
}
