use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reluplan_core::milp::lp_format::{export_lp, parse_lp};
use reluplan_core::milp::{
    solve_lp, solve_milp, LinExpr, LpStatus, MilpParams, Model, ObjSense, Sense, SolveStatus, VarId, VarKind,
};

/// Bounded random MILP; feasible by construction around a random integral point.
fn random_model(seed: u64, n_bin: usize, n_cont: usize, n_rows: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sense = if rng.random_bool(0.5) { ObjSense::Maximize } else { ObjSense::Minimize };
    let mut m = Model::new(sense);
    let mut point = Vec::new();
    for i in 0..n_bin {
        m.add_binary(format!("b{i}"));
        point.push(rng.random_range(0..=1) as f64);
    }
    for i in 0..n_cont {
        let lo = rng.random_range(-3.0..0.0);
        let hi = rng.random_range(0.0..3.0);
        m.add_continuous(format!("c{i}"), lo, hi);
        point.push(rng.random_range(lo..=hi));
    }
    let n = n_bin + n_cont;
    for r in 0..n_rows {
        let mut e = LinExpr::new();
        for v in 0..n {
            if rng.random_bool(0.7) {
                e.add_term(VarId(v), rng.random_range(-3.0..3.0));
            }
        }
        let act = e.eval(&point);
        let (s, rhs) = match rng.random_range(0..3) {
            0 => (Sense::Le, act + rng.random_range(0.0..1.0)),
            1 => (Sense::Ge, act - rng.random_range(0.0..1.0)),
            // Sometimes cuts the seed point off; the model may become infeasible.
            _ => (Sense::Le, act - rng.random_range(0.0..0.5)),
        };
        m.add_expr_constraint(format!("r{r}"), &e, s, rhs);
    }
    let mut obj = LinExpr::new();
    for v in 0..n {
        obj.add_term(VarId(v), rng.random_range(-2.0..2.0));
    }
    m.set_objective(sense, &obj);
    m
}

/// Best objective over all binary assignments, one LP each.
fn brute_force(m: &Model) -> Option<f64> {
    let bins: Vec<usize> = (0..m.n_vars()).filter(|&v| m.vars[v].kind == VarKind::Binary).collect();
    let max = m.objective.sense == ObjSense::Maximize;
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << bins.len()) {
        let mut fixed = m.clone();
        for (k, &v) in bins.iter().enumerate() {
            let b = ((mask >> k) & 1) as f64;
            fixed.vars[v].lo = b;
            fixed.vars[v].hi = b;
        }
        let sol = solve_lp(&fixed).unwrap();
        if sol.status == LpStatus::Optimal {
            assert!(fixed.max_violation(&sol.x) <= 1e-7);
            best = Some(match best {
                None => sol.objective,
                Some(b) if max => b.max(sol.objective),
                Some(b) => b.min(sol.objective),
            });
        }
    }
    best
}

#[test]
fn bnb_matches_enumeration_on_100_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..100u64 {
        let n_bin = rng.random_range(1..=6);
        let n_cont = rng.random_range(0..=4);
        let n_rows = rng.random_range(1..=6);
        let m = random_model(seed, n_bin, n_cont, n_rows);
        let r = solve_milp(&m, &MilpParams::default()).unwrap();
        r.stats.check_invariants().unwrap();
        match brute_force(&m) {
            None => assert_eq!(r.stats.status, SolveStatus::Infeasible, "seed {seed}"),
            Some(best) => {
                assert_eq!(r.stats.status, SolveStatus::Optimal, "seed {seed}");
                let x = r.x.as_ref().unwrap();
                assert!(m.max_violation(x) <= 1e-7, "seed {seed}");
                assert!(m.integrality_violation(x) <= 1e-6, "seed {seed}");
                assert!((r.objective().unwrap() - best).abs() <= 1e-6, "seed {seed}: {:?} vs {best}", r.objective());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_optimum_dominates_feasible_samples(seed in any::<u64>(), n in 1usize..6, rows in 1usize..6) {
        let m = random_model(seed, 0, n, rows);
        let sol = solve_lp(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        match sol.status {
            LpStatus::Optimal => {
                prop_assert!(m.max_violation(&sol.x) <= 1e-7);
                for _ in 0..200 {
                    let x: Vec<f64> = m.vars.iter().map(|v| rng.random_range(v.lo..=v.hi)).collect();
                    if m.max_violation(&x) == 0.0 {
                        let f = m.objective_value(&x);
                        match m.objective.sense {
                            ObjSense::Maximize => prop_assert!(f <= sol.objective + 1e-9),
                            ObjSense::Minimize => prop_assert!(f >= sol.objective - 1e-9),
                        }
                    }
                }
            }
            LpStatus::Infeasible => {
                for _ in 0..200 {
                    let x: Vec<f64> = m.vars.iter().map(|v| rng.random_range(v.lo..=v.hi)).collect();
                    prop_assert!(m.max_violation(&x) > 0.0);
                }
            }
            LpStatus::Unbounded => prop_assert!(false, "bounded model reported unbounded"),
        }
    }

    #[test]
    fn bnb_is_deterministic(seed in any::<u64>(), b in 1usize..6) {
        let m = random_model(seed, b, 2, 4);
        let p = MilpParams::default();
        let r1 = solve_milp(&m, &p).unwrap();
        let r2 = solve_milp(&m, &p).unwrap();
        prop_assert_eq!(r1.x, r2.x);
        prop_assert_eq!(r1.stats.nodes_closed, r2.stats.nodes_closed);
        prop_assert_eq!(r1.stats.primal, r2.stats.primal);
    }

    #[test]
    fn root_bound_dominates_optimum(seed in any::<u64>(), b in 1usize..6) {
        let m = random_model(seed, b, 2, 4);
        let r = solve_milp(&m, &MilpParams::default()).unwrap();
        if let (Some(root), Some(obj)) = (r.stats.root_bound, r.objective()) {
            match m.objective.sense {
                ObjSense::Maximize => prop_assert!(root >= obj - 1e-7),
                ObjSense::Minimize => prop_assert!(root <= obj + 1e-7),
            }
        }
    }

    #[test]
    fn lp_format_round_trip(seed in any::<u64>(), b in 0usize..4, c in 0usize..4, rows in 0usize..5) {
        prop_assume!(b + c > 0);
        let m = random_model(seed, b, c, rows);
        let back = parse_lp(&export_lp(&m)).unwrap();
        prop_assert_eq!(back.n_vars(), m.n_vars());
        prop_assert_eq!(back.n_binaries(), m.n_binaries());
        let r1 = solve_milp(&m, &MilpParams::default()).unwrap();
        let r2 = solve_milp(&back, &MilpParams::default()).unwrap();
        prop_assert_eq!(r1.stats.status, r2.stats.status);
        if let (Some(a), Some(b)) = (r1.objective(), r2.objective()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
