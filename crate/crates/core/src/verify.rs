//! Exact verification suites over random or user-supplied instances.
//!
//! Every check carries a descriptive tag; a suite passes when no check
//! reports a violation.

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundle::{associated_processes, classify, pseudo_stopping_test, TimeKind, TimeProcessBundle};
use crate::corpus::{instance_seeds, model_instance, random_instance, Instance};
use crate::decompose::{cross_conditional_check, thin_thick_decompose, triple_decompose};
use crate::enlargement::{
    after_tau, drift_honest, drift_jacod, drift_thin, enlarge_initial, enlarge_progressive,
    immersion_test, key_lemma_evaluate, project_lemma_check, restriction_consistency, EnlargedSpace,
};
use crate::error::{Error, Result};
use crate::exhaust::exhausting_system;
use crate::honest::{honest_thick_criterion, is_honest, jumping_exhaust, thin_honest_identities};
use crate::path::{Knot, PathFlags, PiecewisePath};
use crate::projections::{duality_residual, Projection, RawIncreasingProcess};
use crate::random_time::RandomTime;
use crate::rational::{format_rational, int, one, q, zero, Rational, TimePoint};
use crate::space::{FilteredSpace, StoppingTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bundle,
    Decomposition,
    Drift,
    Honest,
    Immersion,
    All,
}

impl Suite {
    pub const SINGLE: [Suite; 5] = [
        Suite::Bundle,
        Suite::Decomposition,
        Suite::Drift,
        Suite::Honest,
        Suite::Immersion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bundle => "bundle",
            Suite::Decomposition => "decomposition",
            Suite::Drift => "drift",
            Suite::Honest => "honest",
            Suite::Immersion => "immersion",
            Suite::All => "all",
        }
    }

    /// The single suites this selector runs.
    pub fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::SINGLE.to_vec(),
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::SINGLE
            .iter()
            .chain(&[Suite::All])
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Instance seed; absent for user models.
    pub seed: Option<u64>,
    pub tag: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Checker {
    seed: Option<u64>,
    checks: usize,
    violations: Vec<Violation>,
}

impl Checker {
    fn new(seed: Option<u64>) -> Self {
        Checker {
            seed,
            checks: 0,
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, tag: &str, detail: String) {
        self.violations.push(Violation {
            seed: self.seed,
            tag: tag.to_string(),
            detail,
        });
    }

    fn check(&mut self, tag: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(tag, detail());
        }
    }

    fn zero(&mut self, tag: &str, residual: &Rational) {
        self.check(tag, residual.is_zero(), || {
            format!("residual {}", format_rational(residual))
        });
    }

    /// Unwraps `r`, recording an error as a violation of `tag`.
    fn ok<T>(&mut self, tag: &str, r: Result<T>) -> Option<T> {
        self.checks += 1;
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(tag, e.to_string());
                None
            }
        }
    }
}

/// Knots of `paths` together with the midpoints between them and a point
/// past the last one.
fn probe_times(space: &FilteredSpace, paths: &[&PiecewisePath]) -> Vec<Rational> {
    let mut t: Vec<Rational> = space.grid().to_vec();
    for p in paths {
        t.extend(p.times().iter().cloned());
    }
    t.sort();
    t.dedup();
    let mut out = t.clone();
    for w in t.windows(2) {
        out.push((&w[0] + &w[1]) / int(2));
    }
    out.push(t.last().expect("grid is non-empty") + one());
    out.sort();
    out
}

fn max_abs<I: IntoIterator<Item = Rational>>(it: I) -> Rational {
    it.into_iter().map(|d| d.abs()).max().unwrap_or_else(zero)
}

/// The thin part when `τ` has densities, `τ` itself otherwise.
fn thin_of(inst: &Instance) -> RandomTime {
    if inst.tau.is_atomic() {
        inst.tau.clone()
    } else {
        thin_thick_decompose(&inst.tau, &inst.space).thin
    }
}

fn bundle_suite(inst: &Instance, bundle: Option<&TimeProcessBundle>, c: &mut Checker) {
    let space = &inst.space;
    let tau = &inst.tau;
    let fresh;
    let b = match bundle {
        Some(b) => b,
        None => {
            fresh = associated_processes(tau, space);
            &fresh
        }
    };
    c.zero("compensator:Ao=m-Z", &b.a_o.max_abs_diff(&b.m.sub(&b.z)));
    let times = probe_times(space, &[&b.z, &b.z_tilde, &b.a_o, &b.m]);
    c.zero(
        "compensator:dAo=Ztilde-Z",
        &max_abs(times.iter().flat_map(|t| {
            (0..space.n_atoms()).map(move |a| {
                (b.a_o.value(a, t) - b.a_o.left(a, t)) - (b.z_tilde.value(a, t) - b.z.value(a, t))
            })
        })),
    );
    c.zero(
        "Ztilde=Z-+dm",
        &max_abs(times.iter().flat_map(|t| {
            (0..space.n_atoms())
                .map(move |a| b.z_tilde.value(a, t) - b.z.left(a, t) - (b.m.value(a, t) - b.m.left(a, t)))
        })),
    );
    let flat = b.m.times().iter().enumerate().all(|(i, t)| {
        b.m.rows().iter().all(|row| {
            let k = &row[i];
            k.slope.is_zero() && (space.is_grid_point(t) || (k.left == k.value && k.value == k.right))
        })
    });
    c.check("m:flat-between-grid", flat, || "m moves off the grid".into());
    let mc = crate::enlargement::is_martingale(&b.m, space);
    c.zero("martingale:m", &mc.max_residual);

    let raw = RawIncreasingProcess::indicator(tau);
    c.zero("duality:Ao", &duality_residual(&raw, &b.a_o, Projection::Optional, space));
    c.zero("duality:Ap", &duality_residual(&raw, &b.a_p, Projection::Predictable, space));

    let class = classify(tau, space);
    let finite_mass: Rational = (0..space.n_leaves())
        .map(|l| space.leaf_weight(l) * (one() - tau.leaf(l).infinite_mass()))
        .sum();
    c.check(
        "classify:masses",
        &class.thin_mass + &class.thick_mass == finite_mass,
        || "thin and thick masses do not add up to P(tau < inf)".into(),
    );
    let kind_ok = match class.kind {
        TimeKind::Thin => tau.is_atomic() && !tau.is_infinite(),
        TimeKind::Infinite => tau.is_infinite(),
        TimeKind::Thick => class.thin_mass.is_zero() && !class.thick_mass.is_zero(),
        TimeKind::Mixed => !class.thin_mass.is_zero() && !class.thick_mass.is_zero(),
    };
    c.check("classify:kind", kind_ok, || format!("kind {:?}", class.kind));

    // {t <= τ} sits inside {Z_{t-} > 0}
    let mut positive = true;
    for a in 0..space.n_atoms() {
        for p in tau.leaf(space.leaf_of(a)).pieces() {
            if let crate::random_time::Piece::Atom {
                at: TimePoint::Finite(s),
                ..
            } = p
            {
                positive &= b.z.left(a, s).is_positive() && b.z_tilde.value(a, s).is_positive();
            }
        }
    }
    c.check("positivity:Z-_tau>0", positive, || "Z_{tau-} or Ztilde_tau vanishes".into());

    let dec = thin_thick_decompose(tau, space);
    let thin = thin_of(inst);
    let b1 = associated_processes(&dec.thin, space);
    let b2 = associated_processes(&dec.thick, space);
    if let Some(system) = c.ok("exhaust:build", exhausting_system(&thin, space, None)) {
        let bt = if tau.is_atomic() { b.clone() } else { b1.clone() };
        for (tag, r) in system.reconstruction_residuals(&bt, space) {
            c.zero(tag, &r);
        }
        c.check("exhaust:martingale-family", system.martingale_family_holds(space), || {
            "z^n do not form a positive partition of unity".into()
        });
    }
    let unit = PiecewisePath::constant(space.n_atoms(), one());
    c.zero("additivity:Z", &b.z.max_abs_diff(&b1.z.add(&b2.z).sub(&unit)));
    c.zero(
        "additivity:Ztilde",
        &b.z_tilde.max_abs_diff(&b1.z_tilde.add(&b2.z_tilde).sub(&unit)),
    );
    c.zero("additivity:Ao", &b.a_o.max_abs_diff(&b1.a_o.add(&b2.a_o)));
    c.zero("additivity:Ap", &b.a_p.max_abs_diff(&b1.a_p.add(&b2.a_p)));

    for t in probe_times(space, &[]) {
        match cross_conditional_check(tau, space, &t) {
            Ok(r) => c.zero("cross-conditional", &r.max_residual()),
            // the conditioning cell has no mass left: nothing to compare
            Err(Error::DegenerateDenominator { .. }) => {}
            Err(e) => {
                c.checks += 1;
                c.fail("cross-conditional", e.to_string());
            }
        }
        if let Some(r) = c.ok("key-lemma", key_lemma_evaluate(&inst.x, &thin, space, &t)) {
            c.zero("key-lemma", &r.residual.clone().max(r.earlier_residual));
        }
    }
}

fn decomposition_suite(inst: &Instance, c: &mut Checker) {
    let space = &inst.space;
    let tau = &inst.tau;
    let dec = thin_thick_decompose(tau, space);
    let (lo, hi) = dec.thin.min_max(&dec.thick);
    c.check("decompose:min", lo.same_pointwise(tau), || "tau1 ^ tau2 differs from tau".into());
    c.check("decompose:max-infinite", hi.is_infinite(), || "tau1 v tau2 is finite somewhere".into());
    let k1 = classify(&dec.thin, space).kind;
    let k2 = classify(&dec.thick, space).kind;
    c.check(
        "decompose:thin-part-kind",
        matches!(k1, TimeKind::Thin | TimeKind::Infinite),
        || format!("thin part classified {k1:?}"),
    );
    c.check(
        "decompose:thick-part-kind",
        matches!(k2, TimeKind::Thick | TimeKind::Infinite),
        || format!("thick part classified {k2:?}"),
    );

    let tri = triple_decompose(tau, space);
    let (acc_inacc, acc_inacc_max) = tri.accessible.min_max(&tri.inaccessible);
    c.check(
        "triple:refines",
        acc_inacc.same_pointwise(&dec.thin)
            && acc_inacc_max.is_infinite()
            && tri.thick.same_pointwise(&dec.thick),
        || "accessible and inaccessible parts do not recombine to the thin part".into(),
    );

    let (mn, mx) = inst.sigma.min_max(&dec.thin);
    for (name, t) in [("min", &mn), ("max", &mx)] {
        let k = classify(t, space).kind;
        c.check(
            "remark:min-max-thin",
            matches!(k, TimeKind::Thin | TimeKind::Infinite),
            || format!("{name} of two thin times classified {k:?}"),
        );
    }

    let rejected = matches!(exhausting_system(tau, space, None), Err(Error::NotThin { .. }));
    c.check("exhaust:rejects-thick", rejected == !tau.is_atomic(), || {
        "exhausting system accepted a thick part or rejected a thin time".into()
    });
}

/// A left-continuous step integrand on the enlarged grid whose value at each
/// knot is fixed by the preceding partition.
fn random_predictable(e: &EnlargedSpace, seed: u64) -> PiecewisePath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sp = &e.space;
    let levels: Vec<Vec<Rational>> = (0..sp.grid().len())
        .map(|k| (0..sp.partition(k).len()).map(|_| int(rng.random_range(-2..=2))).collect())
        .collect();
    let h = |k: usize, a: usize| levels[k][sp.partition(k).cell_of(a)].clone();
    let first = q(1, 1);
    let times = sp.grid().to_vec();
    let rows = (0..e.n_atoms())
        .map(|a| {
            (0..times.len())
                .map(|j| {
                    let here = if j == 0 { first.clone() } else { h(j - 1, a) };
                    Knot {
                        left: here.clone(),
                        value: here,
                        right: h(j, a),
                        slope: zero(),
                    }
                })
                .collect()
        })
        .collect();
    PiecewisePath::new(
        times,
        rows,
        PathFlags {
            adapted: true,
            predictable: true,
            increasing: false,
        },
    )
}

fn drift_suite(inst: &Instance, c: &mut Checker) {
    let space = &inst.space;
    let y = &inst.martingale;
    for (label, t) in [("tau", thin_of(inst)), ("sigma", inst.sigma.clone())] {
        if let Some(r) = c.ok("drift:thin", drift_thin(y, None, &t, space)) {
            c.zero("drift:thin", &r.max_residual);
            let g = random_predictable(&r.enlarged, inst.seed.unwrap_or(0) ^ 0x5eed);
            if let Some(rg) = c.ok("drift:thin-integrand", drift_thin(y, Some(&g), &t, space)) {
                c.zero("drift:thin-integrand", &rg.max_residual);
            }
        }
        if let Some(system) = c.ok("drift:jacod", exhausting_system(&t, space, None)) {
            if let Some(r) = c.ok("drift:jacod", drift_jacod(y, &system, space)) {
                c.zero("drift:jacod", &r.max_residual);
            }
        }
        if let Some(r) = c.ok("drift:restriction", restriction_consistency(y, &t, space)) {
            c.check("drift:restriction", r.is_martingale, || {
                format!("{label}: residual {}", format_rational(&r.max_residual))
            });
        }
    }
    let mut honest_times = vec![inst.honest.clone()];
    if inst.tau.is_atomic() && is_honest(&inst.tau, space).honest {
        honest_times.push(inst.tau.clone());
    }
    for h in &honest_times {
        if let Some(r) = c.ok("drift:honest", drift_honest(y, h, space)) {
            c.zero("drift:honest", &r.report.max_residual);
            c.check("drift:honest=thin", r.matches_thin, || {
                "honest drift differs from the thin-time drift".into()
            });
        }
    }
}

fn honest_suite(inst: &Instance, c: &mut Checker) {
    let space = &inst.space;
    let cert = is_honest(&inst.honest, space);
    c.check("honest:construction", cert.honest, || {
        format!("end of optional set fails Ztilde_tau = 1 on mass {}", format_rational(&cert.violation_mass))
    });
    let tau_cert = is_honest(&inst.tau, space);
    let mut times = vec![inst.honest.clone()];
    if tau_cert.honest {
        times.push(inst.tau.clone());
    } else {
        c.check(
            "honest:rejects-dishonest",
            matches!(honest_thick_criterion(&inst.tau, space), Err(Error::NotHonest { .. }))
                && matches!(jumping_exhaust(&inst.tau, space), Err(Error::NotHonest { .. })),
            || "a time failing Ztilde_tau = 1 was accepted".into(),
        );
    }
    for h in &times {
        let cert = is_honest(h, space);
        if !cert.honest {
            continue;
        }
        let k = classify(h, space).kind;
        c.check("honest:thin", matches!(k, TimeKind::Thin | TimeKind::Infinite), || {
            format!("honest time classified {k:?}")
        });
        if h.is_atomic() {
            c.check("honest:alpha", cert.alpha_consistent && cert.alpha_left_predictable, || {
                format!(
                    "consistent {}, left predictable {}",
                    cert.alpha_consistent, cert.alpha_left_predictable
                )
            });
        }
        if let Some(r) = c.ok("honest:parts", honest_thick_criterion(h, space)) {
            c.zero("honest:thin-part-Z<1", &r.thin_violation);
            c.zero("honest:thick-part-Z=1", &r.thick_violation);
            c.check("honest:parts-honest", r.thin_part_honest && r.thick_part_honest, || {
                "a decomposition part is not honest".into()
            });
        }
        if let Some(r) = c.ok("honest:thin-identities", thin_honest_identities(h, space)) {
            c.zero("honest:thin-identities", &r.residual);
        }
        match jumping_exhaust(h, space) {
            Ok(system) => {
                c.checks += 1;
                let finite = system
                    .martingales
                    .iter()
                    .chain(std::iter::once(&associated_processes(h, space).m))
                    .all(|p| (0..p.n_rows()).all(|r| !p.total_variation(r).is_negative()));
                c.check("jumping:finite-variation", finite, || "negative total variation".into());
            }
            Err(Error::ThickHonestOnJumpingFiltration) => {
                c.checks += 1;
                c.fail("honest:thick-on-jumping", "honest time with a thick part".into());
            }
            Err(e) => {
                c.checks += 1;
                c.fail("honest:jumping-exhaust", e.to_string());
            }
        }
    }
}

fn immersion_suite(inst: &Instance, c: &mut Checker) {
    let space = &inst.space;
    for t in [&inst.tau, &inst.sigma] {
        let Some(r) = c.ok("immersion:test", immersion_test(t, space)) else {
            continue;
        };
        if let Some(cond) = &r.thin_conditions {
            c.check("immersion:thin-conditions-agree", cond.consistent(), || format!("{cond:?}"));
            c.check(
                "immersion:thin-conditions-match-criterion",
                cond.stopped_at_tn == r.immersed,
                || format!("conditions {cond:?}, immersed {}", r.immersed),
            );
        }
        c.check("immersion:decomposition", r.decomposition_consistent, || {
            format!(
                "immersed {}, thin part {}, thick part {}",
                r.immersed, r.thin_part_immersed, r.thick_part_immersed
            )
        });
        if r.immersed {
            c.check("immersion:pseudo-stopping", pseudo_stopping_test(t, space), || {
                "immersed time is not pseudo-stopping".into()
            });
        }
    }
    project_lemma_suite(inst, c);
}

fn project_lemma_suite(inst: &Instance, c: &mut Checker) {
    let space = &inst.space;
    let tau = thin_of(inst);
    let Some(system) = c.ok("project-lemma", exhausting_system(&tau, space, None)) else {
        return;
    };
    let (Some(ep), Some(ec)) = (
        c.ok("project-lemma", enlarge_progressive(space, &tau)),
        c.ok("project-lemma", enlarge_initial(space, &system)),
    ) else {
        return;
    };
    let mut thetas: Vec<StoppingTime> = ec
        .space
        .grid()
        .iter()
        .map(|g| StoppingTime::constant(&ec.space, TimePoint::Finite(g.clone())))
        .collect();
    thetas.push(ec.time_as_stopping(0));
    let zero_path = PiecewisePath::constant(ep.n_atoms(), zero());
    let y = &inst.martingale;
    let mut candidates = vec![("zero", zero_path), ("raw", after_tau(&ep.lift_path(y), &ep))];
    if let Ok(r) = drift_thin(y, None, &tau, space) {
        candidates.push(("compensated", after_tau(&r.compensated, &r.enlarged)));
    }
    for (label, cand) in candidates {
        if let Some(r) = c.ok("project-lemma", project_lemma_check(&cand, &tau, space, &thetas)) {
            let expect_mart = label == "raw" || r.martingale_progressive;
            c.check("project-lemma", r.holds() && expect_mart, || format!("{label}: {r:?}"));
        }
    }
}

fn run_suite(suite: Suite, inst: &Instance, bundle: Option<&TimeProcessBundle>) -> Checker {
    let mut c = Checker::new(inst.seed);
    match suite {
        Suite::Bundle => bundle_suite(inst, bundle, &mut c),
        Suite::Decomposition => decomposition_suite(inst, &mut c),
        Suite::Drift => drift_suite(inst, &mut c),
        Suite::Honest => honest_suite(inst, &mut c),
        Suite::Immersion => immersion_suite(inst, &mut c),
        Suite::All => unreachable!("selectors are expanded before running"),
    }
    c
}

fn collect(suite: Suite, checkers: Vec<Checker>) -> SuiteReport {
    let instances = checkers.len();
    let mut checks = 0;
    let mut violations = Vec::new();
    for c in checkers {
        checks += c.checks;
        violations.extend(c.violations);
    }
    SuiteReport {
        suite,
        instances,
        checks,
        violations,
    }
}

#[cfg(feature = "parallel")]
fn map_instances<F>(seeds: &[u64], f: F) -> Vec<Vec<Checker>>
where
    F: Fn(&Instance) -> Vec<Checker> + Sync,
{
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(&random_instance(s))).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_instances<F>(seeds: &[u64], f: F) -> Vec<Vec<Checker>>
where
    F: Fn(&Instance) -> Vec<Checker>,
{
    seeds.iter().map(|&s| f(&random_instance(s))).collect()
}

/// Runs `suite` on `count` random instances derived from `seed`. Results do
/// not depend on the number of worker threads.
pub fn verify_random(seed: u64, count: usize, suite: Suite) -> Vec<SuiteReport> {
    let members = suite.members();
    let seeds = instance_seeds(seed, count);
    let per_instance = map_instances(&seeds, |inst| {
        members.iter().map(|&s| run_suite(s, inst, None)).collect()
    });
    let mut by_suite: Vec<Vec<Checker>> = members.iter().map(|_| Vec::new()).collect();
    for row in per_instance {
        for (i, c) in row.into_iter().enumerate() {
            by_suite[i].push(c);
        }
    }
    members
        .into_iter()
        .zip(by_suite)
        .map(|(s, cs)| collect(s, cs))
        .collect()
}

/// Runs `suite` on one user model. `bundle_overrides` replaces processes of
/// the computed bundle before the bundle checks.
pub fn verify_model(
    space: &FilteredSpace,
    tau: &RandomTime,
    bundle_overrides: Option<&serde_json::Value>,
    suite: Suite,
) -> Result<Vec<SuiteReport>> {
    let inst = model_instance(space.clone(), tau.clone());
    let bundle = match bundle_overrides {
        Some(v) => Some(associated_processes(tau, space).with_overrides(v, space)?),
        None => None,
    };
    Ok(suite
        .members()
        .into_iter()
        .map(|s| collect(s, vec![run_suite(s, &inst, bundle.as_ref())]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::SINGLE.iter().chain(&[Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), *s);
        }
        assert!(matches!("nope".parse::<Suite>(), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn small_random_run_is_clean() {
        for r in verify_random(5, 12, Suite::All) {
            assert!(r.passed(), "{}: {:#?}", r.suite, r.violations);
            assert_eq!(r.instances, 12);
        }
    }

    #[test]
    fn corrupted_compensator_is_caught() {
        let s = models::walk_space(2);
        let tau = models::walk_last_max_time(&s, 2);
        let ids: Vec<String> = s.atoms().iter().map(|a| a.id.clone()).collect();
        let b = associated_processes(&tau, &s);
        let bad = b.a_o.add(&PiecewisePath::constant(s.n_atoms(), q(1, 7)));
        let overrides = serde_json::json!({ "Ao": bad.to_json_value(&ids) });
        let reports = verify_model(&s, &tau, Some(&overrides), Suite::Bundle).unwrap();
        assert!(reports[0].violations.iter().any(|v| v.tag == "compensator:Ao=m-Z"));
        let clean = verify_model(&s, &tau, None, Suite::All).unwrap();
        assert!(clean.iter().all(SuiteReport::passed), "{clean:#?}");
    }
}
