use num_traits::Zero;
use proptest::prelude::*;

use enlargement_core::bundle::{associated_processes, classify, TimeKind};
use enlargement_core::corpus::{random_instance, random_time, TimeShape};
use enlargement_core::decompose::{thin_thick_decompose, triple_decompose};
use enlargement_core::enlargement::{enlarge_progressive, enlarge_with_times, same_filtration};
use enlargement_core::projections::{dual_project, Projection, RawIncreasingProcess};
use enlargement_core::rational::{int, one, zero, Rational};
use enlargement_core::FilteredSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn probe(space: &FilteredSpace, extra: &[Rational]) -> Vec<Rational> {
    let mut t: Vec<Rational> = space.grid().iter().chain(extra).cloned().collect();
    t.sort();
    t.dedup();
    let mut out = t.clone();
    for w in t.windows(2) {
        out.push((&w[0] + &w[1]) / int(2));
    }
    out.push(t.last().unwrap() + one());
    out
}

/// `Z_t` and `Z̃_t` by summing leaf survival over the `F_t` cell.
fn brute_z(space: &FilteredSpace, tau: &enlargement_core::RandomTime, a: usize, t: &Rational, tilde: bool) -> Rational {
    let cell = &space.partition(space.index_at(t)).cells()[space.partition(space.index_at(t)).cell_of(a)];
    let mut num = zero();
    let mut den = zero();
    for &b in cell {
        let law = tau.leaf(space.leaf_of(b));
        let s = if tilde { law.at_or_after(t) } else { law.survival(t) };
        num += space.weight(b) * s;
        den += space.weight(b);
    }
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conditioning_has_the_tower_property(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let x = inst.x.atom_means();
        for k in 0..s.grid().len() {
            for j in 0..=k {
                let inner = s.condition_atoms(k, &x);
                prop_assert_eq!(s.condition_atoms(j, &inner), s.condition_atoms(j, &x));
            }
        }
        prop_assert_eq!(s.expectation(&s.condition_atoms(0, &x)), s.expectation(&x));
    }

    #[test]
    fn azema_processes_match_brute_force(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let b = associated_processes(&inst.tau, s);
        for t in probe(s, &inst.tau.breakpoints()) {
            for a in 0..s.n_atoms() {
                prop_assert_eq!(b.z.value(a, &t), brute_z(s, &inst.tau, a, &t, false));
                prop_assert_eq!(b.z_tilde.value(a, &t), brute_z(s, &inst.tau, a, &t, true));
            }
        }
    }

    #[test]
    fn dual_projections_compose(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let v = RawIncreasingProcess::indicator(&inst.tau);
        let vo = dual_project(&v, Projection::Optional, s);
        let vp = dual_project(&v, Projection::Predictable, s);
        let vo_raw = RawIncreasingProcess::from_path(s, &vo).unwrap();
        prop_assert!(dual_project(&vo_raw, Projection::Predictable, s).max_abs_diff(&vp).is_zero());
        let terminal: Vec<Rational> = (0..s.n_atoms()).map(|a| vo.terminal(a)).collect();
        let finite: Vec<Rational> = (0..s.n_atoms())
            .map(|a| one() - inst.tau.leaf(s.leaf_of(a)).infinite_mass())
            .collect();
        prop_assert_eq!(s.expectation(&terminal), s.expectation(&finite));
    }

    #[test]
    fn decomposition_recombines(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let d = thin_thick_decompose(&inst.tau, s);
        let (lo, hi) = d.thin.min_max(&d.thick);
        prop_assert!(lo.same_pointwise(&inst.tau));
        prop_assert!(hi.is_infinite());
        let t = triple_decompose(&inst.tau, s);
        let (lo, _) = t.accessible.min_max(&t.inaccessible);
        prop_assert!(lo.same_pointwise(&d.thin));
    }

    #[test]
    fn min_and_max_of_thin_times_are_thin(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = random_time(&mut rng, s, TimeShape::Atomic);
        let (lo, hi) = inst.sigma.min_max(&other);
        for t in [lo, hi] {
            prop_assert!(matches!(classify(&t, s).kind, TimeKind::Thin | TimeKind::Infinite));
        }
    }

    #[test]
    fn progressive_enlargement_splits_along_the_parts(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let s = &inst.space;
        let tau = &inst.sigma;
        let t = triple_decompose(tau, s);
        let whole = enlarge_progressive(s, tau).unwrap();
        let split = enlarge_with_times(s, &[&t.accessible, &t.inaccessible]).unwrap();
        prop_assert!(same_filtration(&whole, &split, s));
    }
}
