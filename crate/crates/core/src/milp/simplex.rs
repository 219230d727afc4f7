//! Dense tableau simplex with bounded variables.
//!
//! Every row `a·x` gets a logical column `r = a·x` whose bounds carry the row sense,
//! so the tableau starts as `[-A | I]` with the logicals basic. Phase 1 minimizes the
//! sum of bound infeasibilities of the basic variables (stopping at the first breakpoint);
//! phase 2 minimizes the objective. Pricing is Dantzig's rule, replaced by Bland's rule
//! for the rest of the solve after 1,000 degenerate pivots.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{Model, ObjSense, Sense};
use super::{SolveError, FEAS_TOL};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_LIMIT: usize = 1000;
const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful when optimal.
    pub x: Vec<f64>,
    /// Objective in the model's own sense; meaningful when optimal.
    pub objective: f64,
}

/// Solves the linear relaxation of `model`: binaries are treated as continuous over
/// their bounds.
pub fn solve_lp(model: &Model) -> Result<LpSolution, SolveError> {
    model.validate()?;
    if model.is_quadratic() {
        return Err(SolveError::NotLinear);
    }
    let data = LpData::new(model);
    let mut state = LpState::cold(&data, &data.var_lo, &data.var_hi);
    let status = state.solve(&data)?;
    let x = state.structural(&data);
    let objective = data.objective(&x);
    Ok(LpSolution { status, x, objective })
}

/// Immutable standard-form data shared by every solve of one model.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub(crate) n: usize,
    pub(crate) m: usize,
    rows: Vec<Vec<(usize, f64)>>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    /// Minimization costs.
    cost: Vec<f64>,
    obj_linear: Vec<f64>,
    obj_constant: f64,
    pub(crate) var_lo: Vec<f64>,
    pub(crate) var_hi: Vec<f64>,
}

impl LpData {
    pub(crate) fn new(model: &Model) -> Self {
        let n = model.vars.len();
        let m = model.constraints.len();
        let mut obj_linear = vec![0.0; n];
        for &(v, c) in &model.objective.linear {
            obj_linear[v.0] += c;
        }
        let sign = match model.objective.sense {
            ObjSense::Minimize => 1.0,
            ObjSense::Maximize => -1.0,
        };
        let cost = obj_linear.iter().map(|c| sign * c).collect();
        let mut row_lo = Vec::with_capacity(m);
        let mut row_hi = Vec::with_capacity(m);
        let mut rows = Vec::with_capacity(m);
        for c in &model.constraints {
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            row_lo.push(lo);
            row_hi.push(hi);
            rows.push(c.terms.iter().map(|&(v, a)| (v.0, a)).collect());
        }
        LpData {
            n,
            m,
            rows,
            row_lo,
            row_hi,
            cost,
            obj_linear,
            obj_constant: model.objective.constant,
            var_lo: model.vars.iter().map(|v| v.lo).collect(),
            var_hi: model.vars.iter().map(|v| v.hi).collect(),
        }
    }

    pub(crate) fn objective(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.obj_linear.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    fn cost_of(&self, col: usize) -> f64 {
        if col < self.n {
            self.cost[col]
        } else {
            0.0
        }
    }

    /// Largest row or bound violation of `x` against the given variable bounds.
    pub(crate) fn violation(&self, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(self.row_lo[i] - act).max(act - self.row_hi[i]);
        }
        for j in 0..self.n {
            worst = worst.max(lo[j] - x[j]).max(x[j] - hi[j]);
        }
        worst
    }
}

/// Basis, tableau and values; cloned to warm-start branch-and-bound children.
#[derive(Debug, Clone)]
pub(crate) struct LpState {
    ncols: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: Vec<f64>,
}

impl LpState {
    pub(crate) fn cold(data: &LpData, var_lo: &[f64], var_hi: &[f64]) -> Self {
        let (n, m) = (data.n, data.m);
        let ncols = n + m;
        let mut tab = vec![0.0; m * ncols];
        for (i, row) in data.rows.iter().enumerate() {
            for &(j, a) in row {
                tab[i * ncols + j] -= a;
            }
            tab[i * ncols + n + i] = 1.0;
        }
        let mut lo = var_lo.to_vec();
        let mut hi = var_hi.to_vec();
        lo.extend_from_slice(&data.row_lo);
        hi.extend_from_slice(&data.row_hi);
        let mut val = vec![0.0; ncols];
        for j in 0..n {
            val[j] = initial_nonbasic_value(lo[j], hi[j]);
        }
        let mut row_of = vec![NONBASIC; ncols];
        let basis = (0..m).map(|i| n + i).collect();
        for i in 0..m {
            row_of[n + i] = i;
        }
        let mut state = LpState { ncols, tab, basis, row_of, lo, hi, val };
        state.refresh_basics();
        state
    }

    pub(crate) fn bytes(&self) -> usize {
        self.tab.len() * core::mem::size_of::<f64>()
    }

    /// Structural variable values.
    pub(crate) fn structural(&self, data: &LpData) -> Vec<f64> {
        self.val[..data.n].to_vec()
    }

    pub(crate) fn set_bounds(&mut self, col: usize, lo: f64, hi: f64) {
        self.lo[col] = lo;
        self.hi[col] = hi;
        if self.row_of[col] == NONBASIC {
            let old = self.val[col];
            let new = if old == lo || old == hi {
                old
            } else if lo.is_finite() && (old < lo || !hi.is_finite() || old - lo <= hi - old) {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                old
            };
            if new != old {
                self.val[col] = new;
                let delta = new - old;
                for i in 0..self.basis.len() {
                    let t = self.tab[i * self.ncols + col];
                    if t != 0.0 {
                        self.val[self.basis[i]] -= t * delta;
                    }
                }
            }
        }
    }

    fn refresh_basics(&mut self) {
        let nc = self.ncols;
        for i in 0..self.basis.len() {
            let row = &self.tab[i * nc..(i + 1) * nc];
            let mut v = 0.0;
            for (k, &t) in row.iter().enumerate() {
                if t != 0.0 && self.row_of[k] == NONBASIC {
                    v -= t * self.val[k];
                }
            }
            self.val[self.basis[i]] = v;
        }
    }

    pub(crate) fn solve(&mut self, data: &LpData) -> Result<LpStatus, SolveError> {
        let status = self.iterate(data)?;
        if status != LpStatus::Optimal {
            return Ok(status);
        }
        let lo = &self.lo[..data.n];
        let hi = &self.hi[..data.n];
        if data.violation(&self.val[..data.n], lo, hi) <= FEAS_TOL {
            return Ok(status);
        }
        self.refresh_basics();
        let status = self.iterate(data)?;
        if status == LpStatus::Optimal
            && data.violation(&self.val[..data.n], &self.lo[..data.n], &self.hi[..data.n]) > FEAS_TOL
        {
            return Err(SolveError::NumericBreakdown("optimal basis fails the feasibility check".into()));
        }
        Ok(status)
    }

    fn iterate(&mut self, data: &LpData) -> Result<LpStatus, SolveError> {
        let m = self.basis.len();
        let nc = self.ncols;
        let max_iter = 20_000 + 50 * (m + nc);
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut cb = vec![0.0; m];
        let mut d = vec![0.0; nc];
        let mut alpha = vec![0.0; m];
        for iter in 0..max_iter {
            if iter % 128 == 127 {
                self.refresh_basics();
            }
            let mut phase1 = false;
            for i in 0..m {
                let b = self.basis[i];
                let x = self.val[b];
                cb[i] = if x < self.lo[b] - PRIMAL_TOL {
                    phase1 = true;
                    -1.0
                } else if x > self.hi[b] + PRIMAL_TOL {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for i in 0..m {
                    cb[i] = data.cost_of(self.basis[i]);
                }
            }
            for (j, dj) in d.iter_mut().enumerate() {
                *dj = if phase1 { 0.0 } else { data.cost_of(j) };
            }
            for i in 0..m {
                if cb[i] != 0.0 {
                    let row = &self.tab[i * nc..(i + 1) * nc];
                    for (dj, &t) in d.iter_mut().zip(row) {
                        if t != 0.0 {
                            *dj -= cb[i] * t;
                        }
                    }
                }
            }

            let mut entering = None;
            let mut best = 0.0;
            for j in 0..nc {
                if self.row_of[j] != NONBASIC {
                    continue;
                }
                let dj = d[j];
                let can = (dj < -DUAL_TOL && self.val[j] < self.hi[j]) || (dj > DUAL_TOL && self.val[j] > self.lo[j]);
                if !can {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            };
            let dir = if d[j] < 0.0 { 1.0 } else { -1.0 };

            let mut ratio = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_alpha = 0.0f64;
            for i in 0..m {
                let a = -self.tab[i * nc + j] * dir;
                alpha[i] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let x = self.val[b];
                let (lo, hi) = (self.lo[b], self.hi[b]);
                let target = if a > 0.0 {
                    if phase1 && x < lo - PRIMAL_TOL {
                        Some(lo)
                    } else if x > hi + PRIMAL_TOL {
                        None
                    } else if hi.is_finite() {
                        Some(hi)
                    } else {
                        None
                    }
                } else if phase1 && x > hi + PRIMAL_TOL {
                    Some(hi)
                } else if x < lo - PRIMAL_TOL {
                    None
                } else if lo.is_finite() {
                    Some(lo)
                } else {
                    None
                };
                let Some(target) = target else { continue };
                let limit = ((target - x) / a).max(0.0);
                let better = match leave {
                    None => true,
                    Some((r, _)) => {
                        if limit < ratio - 1e-12 {
                            true
                        } else if limit <= ratio + 1e-12 {
                            if bland {
                                b < self.basis[r]
                            } else {
                                a.abs() > leave_alpha.abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    ratio = ratio.min(limit);
                    leave = Some((i, target));
                    leave_alpha = a;
                }
            }
            let flip = self.hi[j] - self.lo[j];
            if leave.is_none() && !flip.is_finite() {
                return if phase1 {
                    Err(SolveError::NumericBreakdown("phase 1 ray without a blocking bound".into()))
                } else {
                    Ok(LpStatus::Unbounded)
                };
            }
            let step = if flip <= ratio { flip } else { ratio };
            if step < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    bland = true;
                }
            }
            if step != 0.0 {
                self.val[j] += dir * step;
                for i in 0..m {
                    if alpha[i] != 0.0 {
                        self.val[self.basis[i]] += alpha[i] * step;
                    }
                }
            }
            if flip <= ratio {
                self.val[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                continue;
            }
            let (r, target) = leave.expect("blocking row");
            let out = self.basis[r];
            self.val[out] = target;
            self.pivot(r, j);
        }
        Err(SolveError::NumericBreakdown("simplex iteration limit reached".into()))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let m = self.basis.len();
        let p = self.tab[r * nc + j];
        let inv = 1.0 / p;
        let mut nz = Vec::new();
        for k in 0..nc {
            let t = &mut self.tab[r * nc + k];
            if *t != 0.0 {
                *t *= inv;
                if t.abs() < DROP_TOL {
                    *t = 0.0;
                } else {
                    nz.push(k);
                }
            }
        }
        self.tab[r * nc + j] = 1.0;
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&k| (k, self.tab[r * nc + k])).collect();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &(k, v) in &pivot_row {
                let t = row[k] - f * v;
                row[k] = if t.abs() < DROP_TOL { 0.0 } else { t };
            }
            row[j] = 0.0;
        }
        let out = self.basis[r];
        self.row_of[out] = NONBASIC;
        self.basis[r] = j;
        self.row_of[j] = r;
    }
}

fn initial_nonbasic_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Model, ObjSense, Sense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// max P s.t. P <= M*pb, P <= M*(1-pb) + In, P >= In, P >= 0, In = 0, M = 1.
    fn relu_triangle() -> LpSolution {
        let mut m = Model::new(ObjSense::Maximize);
        let p = m.add_continuous("P", 0.0, f64::INFINITY);
        let pb = m.add_continuous("pb", 0.0, 1.0);
        m.add_constraint("on", [(p, 1.0), (pb, -1.0)], Sense::Le, 0.0);
        m.add_constraint("off", [(p, 1.0), (pb, 1.0)], Sense::Le, 1.0);
        m.add_constraint("ge", [(p, 1.0)], Sense::Ge, 0.0);
        m.set_objective(ObjSense::Maximize, &crate::milp::LinExpr::var(p));
        solve_lp(&m).unwrap()
    }

    #[test]
    fn triangle_gap() {
        let sol = relu_triangle();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn box_optimum() {
        let mut m = Model::new(ObjSense::Maximize);
        let x = m.add_continuous("x", 0.0, 3.0);
        m.set_objective(ObjSense::Maximize, &crate::milp::LinExpr::var(x));
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 3.0);
    }

    #[test]
    fn infeasible_rows() {
        let mut m = Model::new(ObjSense::Maximize);
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("a", [(x, 1.0)], Sense::Ge, 1.0);
        m.add_constraint("b", [(x, 1.0)], Sense::Le, 0.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = Model::new(ObjSense::Maximize);
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_constraint("a", [(x, 1.0), (y, -1.0)], Sense::Ge, 0.0);
        m.set_objective(ObjSense::Maximize, &crate::milp::LinExpr::var(x));
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y s.t. x - y = 1, x + 2y >= -4, x, y free -> x = -2/3, y = -5/3.
        let mut m = Model::new(ObjSense::Minimize);
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("e", [(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        m.add_constraint("g", [(x, 1.0), (y, 2.0)], Sense::Ge, -4.0);
        let mut obj = crate::milp::LinExpr::var(x);
        obj.add_term(y, 1.0);
        m.set_objective(ObjSense::Minimize, &obj);
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] + 2.0 / 3.0).abs() < 1e-9 && (sol.x[1] + 5.0 / 3.0).abs() < 1e-9);
    }

    /// Brute-force vertex enumeration for `max c x` over `{A x <= b, 0 <= x <= u}` in 2-3D.
    fn vertex_optimum(a: &[Vec<f64>], b: &[f64], u: &[f64], c: &[f64]) -> Option<f64> {
        let n = c.len();
        let mut planes: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            planes.push((e.clone(), 0.0));
            e[j] = 1.0;
            planes.push((e, u[j]));
        }
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut idx = vec![0usize; n];
        fn rec(start: usize, depth: usize, idx: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
            if depth == idx.len() {
                f(idx);
                return;
            }
            for p in start..k {
                idx[depth] = p;
                rec(p + 1, depth + 1, idx, k, f);
            }
        }
        rec(0, 0, &mut idx, k, &mut |sel: &[usize]| {
            // Solve the n x n system by Gaussian elimination.
            let mut mat: Vec<Vec<f64>> = sel
                .iter()
                .map(|&p| {
                    let mut r = planes[p].0.clone();
                    r.push(planes[p].1);
                    r
                })
                .collect();
            for col in 0..n {
                let piv = (col..n).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs())).unwrap();
                if mat[piv][col].abs() < 1e-10 {
                    return;
                }
                mat.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = mat[r][col] / mat[col][col];
                        for cc in col..=n {
                            mat[r][cc] -= f * mat[col][cc];
                        }
                    }
                }
            }
            let x: Vec<f64> = (0..n).map(|i| mat[i][n] / mat[i][i]).collect();
            let feasible =
                planes.iter().all(|(row, rhs)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        });
        best
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = if trial % 2 == 0 { 2 } else { 3 };
            let rows = rng.random_range(1..5);
            let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..3.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut m = Model::new(ObjSense::Maximize);
            let vars: Vec<_> = (0..n).map(|j| m.add_continuous(alloc::format!("x{j}"), 0.0, u[j])).collect();
            for (i, row) in a.iter().enumerate() {
                m.add_constraint(
                    alloc::format!("r{i}"),
                    vars.iter().copied().zip(row.iter().copied()),
                    Sense::Le,
                    b[i],
                );
            }
            let mut obj = crate::milp::LinExpr::new();
            for (v, &cj) in vars.iter().zip(&c) {
                obj.add_term(*v, cj);
            }
            m.set_objective(ObjSense::Maximize, &obj);
            let sol = solve_lp(&m).unwrap();
            match vertex_optimum(&a, &b, &u, &c) {
                None => assert_eq!(sol.status, LpStatus::Infeasible, "trial {trial}"),
                Some(v) => {
                    assert_eq!(sol.status, LpStatus::Optimal, "trial {trial}");
                    assert!((sol.objective - v).abs() < 1e-7, "trial {trial}: {} vs {v}", sol.objective);
                    assert!(m.max_violation(&sol.x) <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = relu_triangle();
        let b = relu_triangle();
        assert_eq!(a, b);
    }
}
