use alloc::string::String;
use alloc::vec::Vec;

use super::SolveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable, no duplicates.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub linear: Vec<(VarId, f64)>,
    /// Diagonal terms `q * x^2`.
    pub quadratic: Vec<(VarId, f64)>,
    pub constant: f64,
}

/// Affine expression used while building constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: alloc::vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, scale * c);
        }
        self.constant += scale * other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }
}

/// LP / MILP / diagonal-QP model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl Model {
    pub fn new(sense: ObjSense) -> Self {
        Model {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { sense, linear: Vec::new(), quadratic: Vec::new(), constant: 0.0 },
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: f64, hi: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), kind, lo, hi });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lo, hi)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), terms: merge_terms(terms), sense, rhs });
        self.constraints.len() - 1
    }

    /// Adds `expr sense rhs`, folding the expression constant into the right-hand side.
    pub fn add_expr_constraint(&mut self, name: impl Into<String>, expr: &LinExpr, sense: Sense, rhs: f64) -> usize {
        self.add_constraint(name, expr.terms.iter().copied(), sense, rhs - expr.constant)
    }

    pub fn set_objective(&mut self, sense: ObjSense, expr: &LinExpr) {
        self.objective.sense = sense;
        self.objective.linear = merge_terms(expr.terms.iter().copied());
        self.objective.constant = expr.constant;
    }

    pub fn add_quadratic(&mut self, v: VarId, q: f64) {
        self.objective.quadratic.push((v, q));
        self.objective.quadratic = merge_terms(core::mem::take(&mut self.objective.quadratic));
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn is_quadratic(&self) -> bool {
        self.objective.quadratic.iter().any(|&(_, q)| q != 0.0)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.linear.iter().map(|&(v, c)| c * x[v.0]).sum();
        let quad: f64 = self.objective.quadratic.iter().map(|&(v, q)| q * x[v.0] * x[v.0]).sum();
        self.objective.constant + lin + quad
    }

    /// Largest constraint or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        self.vars.iter().zip(x).map(|(v, &xi)| (v.lo - xi).max(xi - v.hi).max(0.0)).fold(rows, f64::max)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn integrality_violation(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(x)
            .filter(|(v, _)| v.kind == VarKind::Binary)
            .map(|(_, &xi)| (xi - libm::round(xi)).abs())
            .fold(0.0, f64::max)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Copy with every binary turned continuous over its bounds.
    pub fn relaxed(&self) -> Model {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.vars.len();
        for v in &self.vars {
            if v.lo.is_nan() || v.hi.is_nan() || v.lo == f64::INFINITY || v.hi == f64::NEG_INFINITY {
                return Err(SolveError::InvalidModel(alloc::format!("variable {} has invalid bounds", v.name)));
            }
            if v.kind == VarKind::Binary && (v.lo < 0.0 || v.hi > 1.0) {
                return Err(SolveError::InvalidModel(alloc::format!(
                    "binary {} must have bounds within [0, 1]",
                    v.name
                )));
            }
        }
        let refs_ok = |terms: &[(VarId, f64)]| terms.iter().all(|&(v, c)| v.0 < n && c.is_finite());
        for c in &self.constraints {
            if !refs_ok(&c.terms) || !c.rhs.is_finite() {
                return Err(SolveError::InvalidModel(alloc::format!(
                    "constraint {} has non-finite data or unknown variables",
                    c.name
                )));
            }
        }
        if !refs_ok(&self.objective.linear)
            || !refs_ok(&self.objective.quadratic)
            || !self.objective.constant.is_finite()
        {
            return Err(SolveError::InvalidModel("objective has non-finite data or unknown variables".into()));
        }
        let convex = self.objective.quadratic.iter().all(|&(_, q)| match self.objective.sense {
            ObjSense::Minimize => q >= 0.0,
            ObjSense::Maximize => q <= 0.0,
        });
        if !convex {
            return Err(SolveError::NonConvex);
        }
        Ok(())
    }
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut t: Vec<(VarId, f64)> = terms.into_iter().collect();
    t.sort_by_key(|&(v, _)| v);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(t.len());
    for (v, c) in t {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_terms_merge() {
        let mut m = Model::new(ObjSense::Maximize);
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_constraint("c", [(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)], Sense::Le, 1.0);
        assert_eq!(m.constraints[0].terms, alloc::vec![(x, 2.5)]);
    }

    #[test]
    fn binary_bounds_checked() {
        let mut m = Model::new(ObjSense::Maximize);
        m.add_var("b", VarKind::Binary, 0.0, 2.0);
        assert!(matches!(m.validate(), Err(SolveError::InvalidModel(_))));
    }

    #[test]
    fn nonconvex_rejected() {
        let mut m = Model::new(ObjSense::Minimize);
        let x = m.add_continuous("x", -1.0, 1.0);
        m.add_quadratic(x, -1.0);
        assert_eq!(m.validate(), Err(SolveError::NonConvex));
    }
}
