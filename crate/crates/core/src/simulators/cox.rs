//! `τ = ϑ ∧ ξ` with `ϑ` a stopping time and `ξ = inf{t : Λ_t >= Θ}` for an
//! adapted step intensity and an independent threshold `Θ`.
//!
//! `Θ` has a step density with rational breakpoints (any missing mass sits at
//! `∞`), so the law of `ξ` on each leaf is again a step density and the
//! finite twin model is exact.

use num_traits::{Signed, Zero};
use rand::Rng;

use super::{run_chunks, Curve, Moments, SimReport};
use crate::bundle::{associated_processes, classify};
use crate::decompose::thin_thick_decompose;
use crate::enlargement::immersion_test;
use crate::error::{Error, Result};
use crate::random_time::{LeafLaw, Piece, RandomTime};
use crate::rational::{format_rational, one, to_f64, zero, Rational, TimePoint};
use crate::space::{is_stopping_time, FilteredSpace, StoppingTime};

#[derive(Clone, Debug, PartialEq)]
pub struct CoxScenario {
    pub space: FilteredSpace,
    /// `intensity[k][c]`: rate on `[t_k, t_{k+1})` on cell `c` of partition `k`;
    /// the last level runs forever.
    pub intensity: Vec<Vec<Rational>>,
    pub vartheta: StoppingTime,
    /// `(start, end, density)` pieces of the law of `Θ`.
    pub theta_law: Vec<(Rational, Rational, Rational)>,
    pub report_times: Vec<Rational>,
}

/// `(start, end, rate)` on one leaf; the last segment has `end = None`.
type Segments = Vec<(Rational, Option<Rational>, Rational)>;

impl CoxScenario {
    fn validate(&self) -> Result<()> {
        let sp = &self.space;
        if self.intensity.len() != sp.grid().len()
            || self
                .intensity
                .iter()
                .enumerate()
                .any(|(k, lv)| lv.len() != sp.partition(k).len() || lv.iter().any(|r| r.is_negative()))
        {
            return Err(Error::InvalidParams(
                "intensity needs one non-negative level per cell and grid point".into(),
            ));
        }
        if self.vartheta.values.len() != sp.n_atoms() || !is_stopping_time(&self.vartheta, sp).stopping {
            return Err(Error::NotStoppingTime("vartheta".into()));
        }
        let mut total = zero();
        let mut segs: Vec<_> = self.theta_law.iter().collect();
        segs.sort();
        for (s, e, d) in &segs {
            if s.is_negative() || e <= s || d.is_negative() {
                return Err(Error::InvalidParams("threshold law pieces must be ordered and non-negative".into()));
            }
            total += d * (e - s);
        }
        if segs.windows(2).any(|w| w[1].0 < w[0].1) || total > one() {
            return Err(Error::InvalidParams("threshold law pieces overlap or exceed mass 1".into()));
        }
        Ok(())
    }

    fn segments(&self, atom: usize) -> Segments {
        let g = self.space.grid();
        (0..g.len())
            .map(|k| {
                let c = self.space.partition(k).cell_of(atom);
                (g[k].clone(), g.get(k + 1).cloned(), self.intensity[k][c].clone())
            })
            .collect()
    }

    fn theta_sorted(&self) -> Vec<(Rational, Rational, Rational)> {
        let mut v = self.theta_law.clone();
        v.sort();
        v
    }
}

/// Law of `ξ` on one leaf: density pieces plus the mass at `∞`.
fn xi_law(segs: &Segments, theta: &[(Rational, Rational, Rational)]) -> (Vec<Piece>, Rational) {
    let mut pieces = Vec::new();
    let mut level = zero();
    let mut finite = zero();
    for (u, v, r) in segs {
        if r.is_zero() {
            continue;
        }
        let top = v.as_ref().map(|v| &level + r * (v - u));
        for (s, e, d) in theta {
            let lo = if s > &level { s.clone() } else { level.clone() };
            let hi = match &top {
                Some(t) if t < e => t.clone(),
                _ => e.clone(),
            };
            if lo >= hi || d.is_zero() {
                continue;
            }
            pieces.push(Piece::Density {
                start: u + (&lo - &level) / r,
                end: u + (&hi - &level) / r,
                level: d * r,
            });
            finite += d * (hi - lo);
        }
        if let Some(t) = top {
            level = t;
        }
    }
    (pieces, one() - finite)
}

/// The exact twin: the law of `τ = ϑ ∧ ξ` on every leaf.
pub fn cox_twin(sc: &CoxScenario) -> Result<RandomTime> {
    sc.validate()?;
    let theta = sc.theta_sorted();
    let leaves = (0..sc.space.n_leaves())
        .map(|l| {
            let a = sc.space.terminal().cells()[l][0];
            let (xi, at_inf) = xi_law(&sc.segments(a), &theta);
            let cut = &sc.vartheta.values[a];
            let mut pieces: Vec<Piece> = Vec::new();
            let mut before = zero();
            for p in xi {
                if let Piece::Density { start, end, level } = p {
                    if !cut.lt(&start) && cut != &TimePoint::Finite(start.clone()) {
                        let end = match cut {
                            TimePoint::Finite(c) if c < &end => c.clone(),
                            _ => end,
                        };
                        before += &level * (&end - &start);
                        pieces.push(Piece::Density { start, end, level });
                    }
                }
            }
            match cut {
                TimePoint::Finite(_) => pieces.push(Piece::Atom {
                    at: cut.clone(),
                    mass: one() - before,
                }),
                TimePoint::Infinity => pieces.push(Piece::infinite(at_inf)),
            }
            LeafLaw::new(pieces)
        })
        .collect::<Result<Vec<_>>>()?;
    RandomTime::new(&sc.space, leaves)
}

/// `ξ` for a threshold `θ` along float segments.
fn first_passage(segs: &[(f64, f64, f64)], theta: f64) -> f64 {
    let mut level = 0.0;
    for &(u, v, r) in segs {
        if r > 0.0 {
            let top = level + r * (v - u);
            if theta <= top {
                return u + (theta - level) / r;
            }
            level = top;
        }
    }
    f64::INFINITY
}

pub fn simulate_cox_accessible(sc: &CoxScenario, n: u64, seed: u64) -> Result<SimReport> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let twin = cox_twin(sc)?;
    let sp = &sc.space;
    let bundle = associated_processes(&twin, sp);
    let n_atoms = sp.n_atoms();

    let weights: Vec<f64> = sp.atoms().iter().map(|a| to_f64(&a.weight)).collect();
    let segs: Vec<Vec<(f64, f64, f64)>> = (0..n_atoms)
        .map(|a| {
            sc.segments(a)
                .into_iter()
                .map(|(u, v, r)| (to_f64(&u), v.map_or(f64::INFINITY, |v| to_f64(&v)), to_f64(&r)))
                .collect()
        })
        .collect();
    let theta: Vec<(f64, f64, f64)> = sc
        .theta_sorted()
        .iter()
        .map(|(s, e, d)| (to_f64(s), to_f64(e), to_f64(d)))
        .collect();
    let vartheta: Vec<f64> = sc
        .vartheta
        .values
        .iter()
        .map(|t| t.as_finite().map_or(f64::INFINITY, to_f64))
        .collect();
    // (report time, partition in force) for each report time
    let reports: Vec<(f64, usize)> = sc
        .report_times
        .iter()
        .map(|t| (to_f64(t), sp.index_at(t)))
        .collect();

    let sample_theta = |u: f64| -> f64 {
        let mut acc = 0.0;
        for &(s, e, d) in &theta {
            let m = d * (e - s);
            if u < acc + m {
                return s + (u - acc) / d;
            }
            acc += m;
        }
        f64::INFINITY
    };

    let cells: Vec<usize> = reports.iter().map(|(_, k)| sp.partition(*k).len()).collect();
    let parts = run_chunks(n, seed, |rng, k| {
        let mut z: Vec<Vec<Moments>> = cells.iter().map(|&c| vec![Moments::default(); c]).collect();
        let mut survive_last = Moments::default();
        for _ in 0..k {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut atom = n_atoms - 1;
            for (a, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    atom = a;
                    break;
                }
            }
            let xi = first_passage(&segs[atom], sample_theta(rng.random()));
            let tau = xi.min(vartheta[atom]);
            for (r, (t, kk)) in reports.iter().enumerate() {
                z[r][sp.partition(*kk).cell_of(atom)].flag(tau > *t);
            }
            if let Some((t, _)) = reports.last() {
                survive_last.flag(tau > *t);
            }
        }
        (z, survive_last)
    });

    let mut z: Vec<Vec<Moments>> = cells.iter().map(|&c| vec![Moments::default(); c]).collect();
    let mut survive_last = Moments::default();
    for (pz, s) in &parts {
        for (a, b) in z.iter_mut().zip(pz) {
            super::merge_all(a, b);
        }
        survive_last.merge(s);
    }
    let mut points = Vec::new();
    for (r, (t, k)) in reports.iter().enumerate() {
        let part = sp.partition(*k);
        for (c, cell) in part.cells().iter().enumerate() {
            let exact = to_f64(&bundle.z.value(cell[0], &sc.report_times[r]));
            let label = cell.iter().map(|&a| sp.atoms()[a].id.as_str()).collect::<Vec<_>>().join("+");
            points.push(z[r][c].point(*t, Some(label), Some(exact)));
        }
    }

    let class = classify(&twin, sp);
    let dec = thin_thick_decompose(&twin, sp);
    let immersion = immersion_test(&twin, sp)?;
    let exact_last = sc.report_times.last().map(|t| {
        let v: Vec<Rational> = (0..n_atoms).map(|a| bundle.z.value(a, t)).collect();
        to_f64(&sp.expectation(&v))
    });
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("twin_thin_mass".into(), serde_json::json!(format_rational(&class.thin_mass)));
    diagnostics.insert("twin_thick_mass".into(), serde_json::json!(format_rational(&class.thick_mass)));
    diagnostics.insert("twin_kind".into(), serde_json::json!(class.kind));
    diagnostics.insert(
        "thin_part".into(),
        serde_json::to_value(dec.thin.to_description(sp)).expect("serializable"),
    );
    diagnostics.insert("twin_immersed".into(), serde_json::json!(immersion.immersed));
    diagnostics.insert("exact_survival_at_last_report".into(), serde_json::json!(exact_last));
    Ok(SimReport {
        estimator: "P(tau > last report time)".into(),
        estimate: survive_last.mean(),
        se: survive_last.se(),
        n,
        seed,
        curves: vec![Curve {
            name: "Z_t by cell".into(),
            points,
        }],
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rational::{int, q};

    fn scenario(vartheta: TimePoint, rate: Rational) -> CoxScenario {
        let space = models::walk_space(2);
        let intensity = (0..space.grid().len())
            .map(|k| {
                (0..space.partition(k).len())
                    .map(|c| &rate * int(1 + c as i64))
                    .collect()
            })
            .collect();
        CoxScenario {
            vartheta: StoppingTime::constant(&space, vartheta),
            intensity,
            theta_law: vec![(zero(), one(), q(1, 2)), (one(), int(2), q(1, 4)), (int(2), int(4), q(1, 8))],
            report_times: vec![q(1, 2), one(), q(3, 2), int(2), q(5, 2)],
            space,
        }
    }

    #[test]
    fn threshold_only_is_thick_and_immersed() {
        let sc = scenario(TimePoint::Infinity, one());
        let twin = cox_twin(&sc).unwrap();
        assert!(classify(&twin, &sc.space).thin_mass.is_zero());
        assert!(immersion_test(&twin, &sc.space).unwrap().immersed);
    }

    #[test]
    fn deterministic_vartheta_is_the_thin_part() {
        let sc = scenario(TimePoint::Finite(int(2)), one());
        let twin = cox_twin(&sc).unwrap();
        let d = thin_thick_decompose(&twin, &sc.space);
        for law in d.thin.leaves() {
            for p in law.pieces() {
                if let Piece::Atom { at: TimePoint::Finite(t), .. } = p {
                    assert_eq!(t, &int(2));
                }
            }
        }
        assert!(!classify(&twin, &sc.space).thick_mass.is_zero());
    }

    #[test]
    fn zero_intensity_gives_vartheta() {
        let sc = scenario(TimePoint::Finite(one()), zero());
        let twin = cox_twin(&sc).unwrap();
        assert!(twin.same_pointwise(&RandomTime::deterministic(&sc.space, TimePoint::Finite(one()))));
    }

    #[test]
    fn monte_carlo_tracks_the_twin() {
        let sc = scenario(TimePoint::Finite(int(2)), one());
        let r = simulate_cox_accessible(&sc, 20_000, 11).unwrap();
        assert!(r.curves[0].max_z_score() <= 3.5, "{:?}", r.curves[0]);
        assert_eq!(r.diagnostics["twin_immersed"], serde_json::json!(true));
    }

    #[test]
    fn rejects_a_non_stopping_vartheta() {
        let mut sc = scenario(TimePoint::Infinity, one());
        // known only at the end of the walk, but claimed at time 0
        let n = sc.space.n_atoms();
        sc.vartheta = StoppingTime {
            values: (0..n)
                .map(|a| if a == 0 { TimePoint::Finite(zero()) } else { TimePoint::Infinity })
                .collect(),
        };
        assert!(matches!(cox_twin(&sc), Err(Error::NotStoppingTime(_))));
    }
}
