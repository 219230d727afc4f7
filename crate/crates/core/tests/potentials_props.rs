mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use reluplan_core::potentials::{
    compute_potentials, default_lambda, oracle_enumerate, sample_upper_bound, CgParams, Cut, MasterProblem,
    DEFAULT_EPSILON,
};

fn cg(
    trial: u64,
    n: usize,
) -> (common::Case, reluplan_core::potentials::RewardPotentials, reluplan_core::potentials::CgTrace) {
    let case = common::case(trial);
    let params = CgParams { n_intervals: n, lambda: Some(default_lambda(&case.bounds)), ..Default::default() };
    let (pot, trace) = compute_potentials(&case.gen.net, &case.gen.instance, &case.bounds, &params).unwrap();
    (case, pot, trace)
}

#[test]
fn cg_matches_oracle() {
    for trial in 0..21u64 {
        let n = 1 + (trial % 3) as usize;
        let (case, pot, trace) = cg(trial, n);
        let o = oracle_enumerate(&case.gen.net, &case.gen.instance, &case.bounds, n, pot.lambda).unwrap();
        let cg_obj = trace.iterations.last().unwrap().master_objective;
        assert!((cg_obj - o.master_objective).abs() <= 1e-5, "trial {trial}: {cg_obj} vs {}", o.master_objective);
        assert!(pot.certified_violation <= DEFAULT_EPSILON);
        assert!(o.potentials.certified_violation <= DEFAULT_EPSILON);
        // λ > 0 makes the master strictly convex, so the potentials coincide.
        for (a, b) in pot.units.iter().zip(&o.potentials.units) {
            assert!((a.v_off - b.v_off).abs() <= 1e-4, "trial {trial}");
            for (x, y) in a.v_on.iter().zip(&b.v_on) {
                assert!((x - y).abs() <= 1e-4, "trial {trial}");
            }
        }
    }
}

#[test]
fn cg_trace_properties() {
    for trial in 0..21u64 {
        let n = 1 + (trial % 3) as usize;
        let (case, pot, trace) = cg(trial, n);
        let its = &trace.iterations;
        let space = ((n + 1) as f64).powi(case.bounds.len() as i32);
        assert!(its.len() as f64 <= space, "trial {trial}");
        let generated: Vec<_> =
            its.iter().filter(|i| i.violation > DEFAULT_EPSILON).map(|i| i.pattern.clone()).collect();
        let unique: BTreeSet<_> = generated.iter().cloned().collect();
        assert_eq!(unique.len(), generated.len(), "trial {trial}: repeated pattern");
        for w in its.windows(2) {
            assert!(w[1].master_objective >= w[0].master_objective - 1e-8, "trial {trial}");
            assert_eq!(w[1].k, w[0].k + 1);
        }
        let last = its.last().unwrap();
        assert!(last.violation <= DEFAULT_EPSILON);
        assert_eq!(last.violation, pot.certified_violation);
        // Every earlier cut holds for the final potentials.
        for it in &its[..its.len() - 1] {
            assert!(pot.total(&it.pattern) - it.r_star >= -1e-8, "trial {trial}");
        }
    }
}

#[test]
fn master_solutions_respect_previous_cuts() {
    let (case, _, trace) = cg(5, 3);
    let mut master = MasterProblem::new(
        &case.bounds,
        3,
        default_lambda(&case.bounds),
        reluplan_core::potentials::master_bound(&case.gen.instance, &case.bounds),
    );
    let mut prev = f64::NEG_INFINITY;
    for it in trace.iterations.iter().filter(|i| i.violation > DEFAULT_EPSILON) {
        master.add_cut(Cut { pattern: it.pattern.clone(), r_star: it.r_star });
        let (pot, obj) = master.solve().unwrap();
        assert!(obj >= prev - 1e-8);
        prev = obj;
        for c in &master.cuts {
            assert!(pot.total(&c.pattern) - c.r_star >= -1e-8);
        }
    }
}

#[test]
fn sampled_transitions_are_bounded() {
    for trial in 0..21u64 {
        let n = 1 + (trial % 3) as usize;
        let (case, pot, _) = cg(trial, n);
        let check =
            sample_upper_bound(&case.gen.net, &case.gen.instance, &case.bounds, &pot, 1000, trial, 1e-6).unwrap();
        assert_eq!(check.samples, 1000);
        assert_eq!(check.violations, 0, "trial {trial}: worst {}", check.worst);
    }
}

#[test]
fn lambda_zero_uses_lp_master() {
    let case = common::case(3);
    let params = CgParams { n_intervals: 1, lambda: Some(0.0), ..Default::default() };
    let (pot, trace) = compute_potentials(&case.gen.net, &case.gen.instance, &case.bounds, &params).unwrap();
    assert!(pot.certified_violation <= DEFAULT_EPSILON);
    let o = oracle_enumerate(&case.gen.net, &case.gen.instance, &case.bounds, 1, 0.0).unwrap();
    assert!((trace.iterations.last().unwrap().master_objective - o.master_objective).abs() <= 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn potentials_upper_bound_reward(trial in 0u64..1000, n in 1usize..3) {
        let (case, pot, _) = cg(trial, n);
        let check = sample_upper_bound(&case.gen.net, &case.gen.instance, &case.bounds, &pot, 200, trial + 1, 1e-6).unwrap();
        prop_assert_eq!(check.violations, 0);
    }
}
