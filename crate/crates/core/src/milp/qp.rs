//! Strictly convex diagonal QP by the Goldfarb–Idnani dual active-set method.
//!
//! Starts from the unconstrained minimizer and adds violated constraints one at a time,
//! keeping `J = L^{-T} Q` and the upper-triangular `R` of the active normals up to date
//! with Givens rotations. Equalities enter first and never leave the active set.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{Model, ObjSense, Sense};
use super::simplex::{solve_lp, LpStatus};
use super::SolveError;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Objective in the model's own sense.
    pub objective: f64,
    /// Multipliers `y` with `∇f = Σ y_i a_i + Σ z_j e_j` for the minimized objective `f`
    /// (the negated objective when maximizing). `y_i ≥ 0` on `≥` rows, `≤ 0` on `≤` rows.
    /// Empty when the objective has no quadratic part and the LP path was taken.
    pub row_duals: Vec<f64>,
    pub bound_duals: Vec<f64>,
}

struct Cons {
    normal: Vec<f64>,
    rhs: f64,
    equality: bool,
    origin: Origin,
}

#[derive(Clone, Copy)]
enum Origin {
    Row(usize, f64),
    Bound(usize, f64),
}

pub fn solve_qp(model: &Model) -> Result<QpSolution, SolveError> {
    model.validate()?;
    let n = model.vars.len();
    let sign = match model.objective.sense {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    let mut g = vec![0.0; n];
    for &(v, q) in &model.objective.quadratic {
        g[v.0] += 2.0 * sign * q;
    }
    if g.iter().all(|&x| x == 0.0) {
        let lp = solve_lp(model)?;
        return match lp.status {
            LpStatus::Optimal => {
                Ok(QpSolution { x: lp.x, objective: lp.objective, row_duals: Vec::new(), bound_duals: Vec::new() })
            }
            LpStatus::Infeasible => Err(SolveError::QpInfeasible),
            LpStatus::Unbounded => Err(SolveError::Unsupported("linear objective is unbounded".into())),
        };
    }
    if g.iter().any(|&x| x <= 0.0) {
        return Err(SolveError::Unsupported("quadratic terms must cover every variable or none".into()));
    }
    let mut a = vec![0.0; n];
    for &(v, c) in &model.objective.linear {
        a[v.0] += sign * c;
    }

    let mut cons = Vec::new();
    for (i, c) in model.constraints.iter().enumerate() {
        let mut normal = vec![0.0; n];
        for &(v, coef) in &c.terms {
            normal[v.0] += coef;
        }
        let (s, equality) = match c.sense {
            Sense::Ge => (1.0, false),
            Sense::Le => (-1.0, false),
            Sense::Eq => (1.0, true),
        };
        for x in &mut normal {
            *x *= s;
        }
        cons.push(Cons { normal, rhs: s * c.rhs, equality, origin: Origin::Row(i, s) });
    }
    for (j, v) in model.vars.iter().enumerate() {
        let unit = |s: f64| {
            let mut e = vec![0.0; n];
            e[j] = s;
            e
        };
        if v.lo == v.hi {
            cons.push(Cons { normal: unit(1.0), rhs: v.lo, equality: true, origin: Origin::Bound(j, 1.0) });
            continue;
        }
        if v.lo.is_finite() {
            cons.push(Cons { normal: unit(1.0), rhs: v.lo, equality: false, origin: Origin::Bound(j, 1.0) });
        }
        if v.hi.is_finite() {
            cons.push(Cons { normal: unit(-1.0), rhs: -v.hi, equality: false, origin: Origin::Bound(j, -1.0) });
        }
    }

    let (x, active, u) = goldfarb_idnani(&g, &a, &mut cons)?;
    let mut row_duals = vec![0.0; model.constraints.len()];
    let mut bound_duals = vec![0.0; n];
    for (&k, &uk) in active.iter().zip(&u) {
        match cons[k].origin {
            Origin::Row(i, s) => row_duals[i] += s * uk,
            Origin::Bound(j, s) => bound_duals[j] += s * uk,
        }
    }
    let objective = model.objective_value(&x);
    Ok(QpSolution { x, objective, row_duals, bound_duals })
}

/// Returns `(x, active constraint indices, their multipliers)`.
fn goldfarb_idnani(g: &[f64], a: &[f64], cons: &mut [Cons]) -> Result<(Vec<f64>, Vec<usize>, Vec<f64>), SolveError> {
    let n = g.len();
    let mut x: Vec<f64> = (0..n).map(|j| -a[j] / g[j]).collect();
    // Column-major: j[k] is column k.
    let mut jm: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut col = vec![0.0; n];
            col[k] = 1.0 / libm::sqrt(g[k]);
            col
        })
        .collect();
    // Column-major upper triangle, r[k] has length n.
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; cons.len()];
    let max_iter = 50 * (cons.len() + n) + 1000;

    let slack = |c: &Cons, x: &[f64]| dot(&c.normal, x) - c.rhs;
    let threshold = |c: &Cons| 1e-11 * (1.0 + c.rhs.abs());

    let mut pending_eq: Vec<usize> = (0..cons.len()).filter(|&k| cons[k].equality).collect();
    pending_eq.reverse();
    let mut iter = 0usize;
    loop {
        let p = if let Some(p) = pending_eq.pop() {
            if slack(&cons[p], &x) > 0.0 {
                let c = &mut cons[p];
                for v in &mut c.normal {
                    *v = -*v;
                }
                c.rhs = -c.rhs;
                c.origin = match c.origin {
                    Origin::Row(i, s) => Origin::Row(i, -s),
                    Origin::Bound(j, s) => Origin::Bound(j, -s),
                };
            }
            p
        } else {
            let mut best = None;
            let mut worst = 0.0;
            for (k, c) in cons.iter().enumerate() {
                if is_active[k] {
                    continue;
                }
                let s = slack(c, &x);
                if s < -threshold(c) && s < worst {
                    worst = s;
                    best = Some(k);
                }
            }
            match best {
                Some(p) => p,
                None => return Ok((x, active, u)),
            }
        };
        let mut up = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(SolveError::NumericBreakdown("active-set iteration limit reached".into()));
            }
            let q = active.len();
            let np = &cons[p].normal;
            let d: Vec<f64> = jm.iter().map(|col| dot(col, np)).collect();
            let mut z = vec![0.0; n];
            for k in q..n {
                if d[k] != 0.0 {
                    for (zi, ji) in z.iter_mut().zip(&jm[k]) {
                        *zi += d[k] * ji;
                    }
                }
            }
            let mut rv = vec![0.0; q];
            for i in (0..q).rev() {
                let mut s = d[i];
                for k in i + 1..q {
                    s -= r[k][i] * rv[k];
                }
                rv[i] = s / r[i][i];
            }
            let zn = dot(&z, np);
            let sp = slack(&cons[p], &x);
            let t2 = if zn > 1e-14 * dot(np, np).max(1e-300) && zn > 0.0 { -sp / zn } else { f64::INFINITY };
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for i in 0..q {
                if cons[active[i]].equality || rv[i] <= 0.0 {
                    continue;
                }
                let ratio = u[i] / rv[i];
                if ratio < t1 {
                    t1 = ratio;
                    drop_at = Some(i);
                }
            }
            let t = t1.min(t2);
            if !t.is_finite() {
                if cons[p].equality && sp.abs() <= 1e-9 * (1.0 + cons[p].rhs.abs()) {
                    // Dependent equality already satisfied.
                    break;
                }
                return Err(SolveError::QpInfeasible);
            }
            let t = t.max(0.0);
            if t2.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }
            for i in 0..q {
                u[i] -= t * rv[i];
            }
            up += t;
            if t2 <= t1 {
                add_constraint(&mut jm, &mut r, d, q);
                active.push(p);
                u.push(up);
                is_active[p] = true;
                break;
            }
            let l = drop_at.expect("partial step has a blocking constraint");
            is_active[active[l]] = false;
            drop_constraint(&mut jm, &mut r, l);
            active.remove(l);
            u.remove(l);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (p, q) = (*x, *y);
        *x = c * p + s * q;
        *y = -s * p + c * q;
    }
}

fn pair(cols: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (lo, hi) = cols.split_at_mut(i + 1);
    (&mut lo[i], &mut hi[0])
}

fn add_constraint(jm: &mut [Vec<f64>], r: &mut Vec<Vec<f64>>, mut d: Vec<f64>, q: usize) {
    let n = d.len();
    for k in (q + 1..n).rev() {
        if d[k] == 0.0 {
            continue;
        }
        let h = libm::hypot(d[k - 1], d[k]);
        let (c, s) = (d[k - 1] / h, d[k] / h);
        d[k - 1] = h;
        d[k] = 0.0;
        let (a, b) = pair(jm, k - 1);
        rotate(a, b, c, s);
    }
    d.truncate(q + 1);
    d.resize(n, 0.0);
    r.push(d);
}

fn drop_constraint(jm: &mut [Vec<f64>], r: &mut Vec<Vec<f64>>, l: usize) {
    r.remove(l);
    let q = r.len();
    for k in l..q {
        let (a, b) = (r[k][k], r[k][k + 1]);
        if b == 0.0 {
            continue;
        }
        let h = libm::hypot(a, b);
        let (c, s) = (a / h, b / h);
        for col in r.iter_mut().skip(k) {
            let (p, w) = (col[k], col[k + 1]);
            col[k] = c * p + s * w;
            col[k + 1] = -s * p + c * w;
        }
        r[k][k + 1] = 0.0;
        let (ja, jb) = pair(jm, k);
        rotate(ja, jb, c, s);
    }
}

/// Largest KKT residual (stationarity, primal feasibility, multiplier sign, complementarity)
/// of `sol` for `model`; `None` without multipliers.
pub fn kkt_residual(model: &Model, sol: &QpSolution) -> Option<f64> {
    if sol.row_duals.len() != model.constraints.len() || sol.bound_duals.len() != model.vars.len() {
        return None;
    }
    let n = model.vars.len();
    let x = &sol.x;
    let sign = match model.objective.sense {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    let mut grad = vec![0.0; n];
    for &(v, c) in &model.objective.linear {
        grad[v.0] += sign * c;
    }
    for &(v, q) in &model.objective.quadratic {
        grad[v.0] += 2.0 * sign * q * x[v.0];
    }
    let mut worst: f64 = model.max_violation(x);
    for (c, &y) in model.constraints.iter().zip(&sol.row_duals) {
        for &(v, a) in &c.terms {
            grad[v.0] -= y * a;
        }
        let wrong_sign = match c.sense {
            Sense::Ge => (-y).max(0.0),
            Sense::Le => y.max(0.0),
            Sense::Eq => 0.0,
        };
        let comp = if c.sense == Sense::Eq { 0.0 } else { (y * (c.activity(x) - c.rhs)).abs() };
        worst = worst.max(wrong_sign).max(comp);
    }
    for (j, v) in model.vars.iter().enumerate() {
        let z = sol.bound_duals[j];
        grad[j] -= z;
        if v.lo == v.hi {
            continue;
        }
        let comp = if z > 0.0 {
            z * (x[j] - v.lo)
        } else if z < 0.0 {
            -z * (v.hi - x[j])
        } else {
            0.0
        };
        worst = worst.max(if comp.is_nan() { f64::INFINITY } else { comp.abs() });
    }
    Some(grad.iter().fold(worst, |w, gj| w.max(gj.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, VarId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_dim(lam: f64, lo: f64, row: Option<f64>) -> QpSolution {
        let mut m = Model::new(ObjSense::Minimize);
        let v = m.add_continuous("v", lo, f64::INFINITY);
        if let Some(b) = row {
            m.add_constraint("c", [(v, 1.0)], Sense::Ge, b);
        }
        m.set_objective(ObjSense::Minimize, &LinExpr::var(v));
        m.add_quadratic(v, lam);
        let sol = solve_qp(&m).unwrap();
        assert!(kkt_residual(&m, &sol).unwrap() <= 1e-8);
        sol
    }

    #[test]
    fn active_lower_row() {
        let s = one_dim(0.1, f64::NEG_INFINITY, Some(1.0));
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.row_duals[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn interior_stationary_point() {
        let s = one_dim(0.5, -10.0, None);
        assert!((s.x[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_square() {
        let mut m = Model::new(ObjSense::Minimize);
        let v = m.add_continuous("v", -3.0, f64::INFINITY);
        m.add_quadratic(v, 1.0);
        assert_eq!(solve_qp(&m).unwrap().x[0], 0.0);
    }

    #[test]
    fn infeasible_detected() {
        let mut m = Model::new(ObjSense::Minimize);
        let v = m.add_continuous("v", 0.0, 1.0);
        m.add_constraint("c", [(v, 1.0)], Sense::Ge, 2.0);
        m.add_quadratic(v, 1.0);
        assert_eq!(solve_qp(&m), Err(SolveError::QpInfeasible));
    }

    #[test]
    fn nonconvex_and_mixed_rejected() {
        let mut m = Model::new(ObjSense::Minimize);
        let v = m.add_continuous("v", 0.0, 1.0);
        let w = m.add_continuous("w", 0.0, 1.0);
        m.add_quadratic(v, 1.0);
        assert!(matches!(solve_qp(&m), Err(SolveError::Unsupported(_))));
        m.add_quadratic(w, -2.0);
        assert_eq!(solve_qp(&m), Err(SolveError::NonConvex));
    }

    #[test]
    fn zero_quadratic_uses_lp() {
        let mut m = Model::new(ObjSense::Minimize);
        let v = m.add_continuous("v", -2.0, 5.0);
        m.add_constraint("c", [(v, 1.0)], Sense::Ge, -2.0);
        m.set_objective(ObjSense::Minimize, &LinExpr::var(v));
        let s = solve_qp(&m).unwrap();
        assert_eq!(s.x[0], -2.0);
        assert!(kkt_residual(&m, &s).is_none());
    }

    #[test]
    fn equality_rows() {
        // min x^2 + y^2 s.t. x + y = 2, x - y = 1 (unique point 1.5, 0.5).
        let mut m = Model::new(ObjSense::Minimize);
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("a", [(x, 1.0), (y, 1.0)], Sense::Eq, 2.0);
        m.add_constraint("b", [(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        m.add_quadratic(x, 1.0);
        m.add_quadratic(y, 1.0);
        let s = solve_qp(&m).unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-12 && (s.x[1] - 0.5).abs() < 1e-12);
        assert!(kkt_residual(&m, &s).unwrap() <= 1e-10);
    }

    /// Random master-shaped problems: KKT holds and random feasible perturbations never
    /// improve the objective.
    #[test]
    fn random_problems_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..60 {
            let n = rng.random_range(1..7);
            let rows = rng.random_range(0..10);
            let mut m = Model::new(ObjSense::Minimize);
            let vars: Vec<VarId> = (0..n).map(|j| m.add_continuous(alloc::format!("v{j}"), -20.0, 20.0)).collect();
            for i in 0..rows {
                let terms: Vec<(VarId, f64)> =
                    vars.iter().map(|&v| (v, if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 })).collect();
                let sense = if i % 4 == 3 { Sense::Le } else { Sense::Ge };
                let b: f64 = rng.random_range(-3.0..3.0);
                let b = if sense == Sense::Le { b.abs() + 4.0 } else { b };
                m.add_constraint(alloc::format!("r{i}"), terms, sense, b);
            }
            let mut obj = LinExpr::new();
            for &v in &vars {
                obj.add_term(v, 1.0);
                m.add_quadratic(v, rng.random_range(0.05..1.0));
            }
            m.set_objective(ObjSense::Minimize, &obj);
            let sol = match solve_qp(&m) {
                Ok(s) => s,
                Err(SolveError::QpInfeasible) => continue,
                Err(e) => panic!("trial {trial}: {e}"),
            };
            assert!(kkt_residual(&m, &sol).unwrap() <= 1e-8, "trial {trial}");
            let f0 = m.objective_value(&sol.x);
            for _ in 0..1000 {
                let y: Vec<f64> = sol.x.iter().map(|xi| xi + rng.random_range(-0.5..0.5)).collect();
                if m.max_violation(&y) <= 0.0 {
                    assert!(m.objective_value(&y) >= f0 - 1e-9, "trial {trial}");
                }
            }
        }
    }
}
