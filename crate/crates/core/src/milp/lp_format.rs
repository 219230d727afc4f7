//! LP-file text: `Maximize`/`Minimize`, `Subject To`, `Bounds`, `Binary`, `End`.
//!
//! Every variable gets an explicit line in `Bounds`, in id order, so parsing the output
//! returns the same variable ids. Diagonal quadratic terms use `[ 2q x ^2 ] / 2`.
//! Names are written as given and must already be valid LP identifiers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use super::model::{Model, ObjSense, Sense, VarId, VarKind};

const WRAP: usize = 96;

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

struct Line {
    out: String,
    width: usize,
}

impl Line {
    fn push(&mut self, piece: &str) {
        if self.width + piece.len() + 1 > WRAP && self.width > 4 {
            self.out.push_str("\n    ");
            self.width = 4;
        } else {
            self.out.push(' ');
            self.width += 1;
        }
        self.out.push_str(piece);
        self.width += piece.len();
    }

    fn terms(&mut self, model: &Model, terms: &[(VarId, f64)]) {
        for (k, &(v, c)) in terms.iter().enumerate() {
            let name = &model.vars[v.0].name;
            let piece = if k == 0 {
                format!("{} {}", num(c), name)
            } else if c < 0.0 {
                format!("- {} {}", num(-c), name)
            } else {
                format!("+ {} {}", num(c), name)
            };
            self.push(&piece);
        }
    }
}

pub fn export_lp(model: &Model) -> String {
    let mut out = String::new();
    out.push_str(match model.objective.sense {
        ObjSense::Maximize => "Maximize\n",
        ObjSense::Minimize => "Minimize\n",
    });
    let mut line = Line { out: String::from(" obj:"), width: 5 };
    line.terms(model, &model.objective.linear);
    if model.objective.linear.is_empty() && !model.vars.is_empty() {
        line.push(&format!("0 {}", model.vars[0].name));
    }
    let quad: Vec<_> = model.objective.quadratic.iter().filter(|&&(_, q)| q != 0.0).collect();
    if !quad.is_empty() {
        line.push("+ [");
        for (k, &&(v, q)) in quad.iter().enumerate() {
            let c = 2.0 * q;
            let name = &model.vars[v.0].name;
            let piece = if k == 0 {
                format!("{} {} ^2", num(c), name)
            } else if c < 0.0 {
                format!("- {} {} ^2", num(-c), name)
            } else {
                format!("+ {} {} ^2", num(c), name)
            };
            line.push(&piece);
        }
        line.push("] / 2");
    }
    let k = model.objective.constant;
    if k != 0.0 {
        line.push(&if k < 0.0 { format!("- {}", num(-k)) } else { format!("+ {}", num(k)) });
    }
    out.push_str(&line.out);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let mut line = Line { out: format!(" {}:", c.name), width: c.name.len() + 2 };
        line.terms(model, &c.terms);
        if c.terms.is_empty() {
            line.push(&format!("0 {}", model.vars.first().map_or("x0", |v| v.name.as_str())));
        }
        line.push(&format!("{} {}", c.sense.symbol(), num(c.rhs)));
        out.push_str(&line.out);
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        let _ = if v.lo == f64::NEG_INFINITY && v.hi == f64::INFINITY {
            writeln!(out, " {} free", v.name)
        } else if v.lo == v.hi {
            writeln!(out, " {} = {}", v.name, num(v.lo))
        } else {
            writeln!(out, " {} <= {} <= {}", num(v.lo), v.name, num(v.hi))
        };
    }
    let bins: Vec<&str> = model.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        let mut line = Line { out: String::new(), width: 0 };
        for b in bins {
            line.push(b);
        }
        out.push_str(&line.out);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("LP parse error on line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let err = |m: String| LpParseError { line, message: m };
    let b = text.as_bytes();
    let mut i = 0;
    let mut toks = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\\' {
            break;
        }
        let two = if i + 1 < b.len() { &text[i..i + 2] } else { "" };
        let op: Option<&'static str> = match two {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "=<" => Some("<="),
            "=>" => Some(">="),
            _ => None,
        };
        if let Some(op) = op {
            toks.push(Tok::Op(op));
            i += 2;
            continue;
        }
        let single: Option<&'static str> = match c {
            '+' => Some("+"),
            '-' => Some("-"),
            ':' => Some(":"),
            '<' => Some("<="),
            '>' => Some(">="),
            '=' => Some("="),
            '[' => Some("["),
            ']' => Some("]"),
            '^' => Some("^"),
            '/' => Some("/"),
            '*' => Some("*"),
            _ => None,
        };
        if let Some(op) = single {
            toks.push(Tok::Op(op));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && (b[j] as char).is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            toks.push(Tok::Num(s.parse().map_err(|_| err(format!("bad number {s:?}")))?));
            continue;
        }
        if c.is_alphanumeric() || "_!\"#$%&(),.;?@'`{}|~".contains(c) {
            let start = i;
            while i < b.len() {
                let ch = b[i] as char;
                if ch.is_whitespace() || "+-:<>=[]^/*\\".contains(ch) {
                    break;
                }
                i += 1;
            }
            let word = &text[start..i];
            let lw = word.to_ascii_lowercase();
            if lw == "inf" || lw == "infinity" {
                toks.push(Tok::Num(f64::INFINITY));
            } else {
                toks.push(Tok::Ident(word.to_string()));
            }
            continue;
        }
        return Err(err(format!("unexpected character {c:?}")));
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<(Section, Option<ObjSense>)> {
    let l = line.trim().to_ascii_lowercase();
    match l.as_str() {
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, Some(ObjSense::Maximize))),
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, Some(ObjSense::Minimize))),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, None)),
        "bounds" | "bound" => Some((Section::Bounds, None)),
        "binary" | "binaries" | "bin" => Some((Section::Binary, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

struct Builder {
    names: Vec<String>,
}

impl Builder {
    fn id(&mut self, name: &str) -> usize {
        match self.names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.names.push(name.to_string());
                self.names.len() - 1
            }
        }
    }
}

type Terms = Vec<(usize, f64)>;

/// Parses `[sign] [coef] name` terms and bare constants until a token that is not part
/// of an affine sum. Returns `(linear, quadratic coefficient as written, constant, next)`.
fn parse_sum(
    toks: &[Tok],
    mut i: usize,
    b: &mut Builder,
    line: usize,
) -> Result<(Terms, Terms, f64, usize), LpParseError> {
    let err = |m: &str| LpParseError { line, message: m.into() };
    let mut lin = Vec::new();
    let mut quad = Vec::new();
    let mut constant = 0.0;
    loop {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(Tok::Op(op @ ("+" | "-"))) = toks.get(i) {
            if *op == "-" {
                sign = -sign;
            }
            saw_sign = true;
            i += 1;
        }
        match toks.get(i) {
            Some(Tok::Op("[")) => {
                i += 1;
                let mut inner = Vec::new();
                loop {
                    let mut s = 1.0;
                    while let Some(Tok::Op(op @ ("+" | "-"))) = toks.get(i) {
                        if *op == "-" {
                            s = -s;
                        }
                        i += 1;
                    }
                    if let Some(Tok::Op("]")) = toks.get(i) {
                        i += 1;
                        break;
                    }
                    let mut c = 1.0;
                    if let Some(Tok::Num(v)) = toks.get(i) {
                        c = *v;
                        i += 1;
                    }
                    let Some(Tok::Ident(name)) = toks.get(i) else {
                        return Err(err("expected variable in quadratic term"));
                    };
                    let v = b.id(name);
                    i += 1;
                    match (toks.get(i), toks.get(i + 1)) {
                        (Some(Tok::Op("^")), Some(Tok::Num(p))) if *p == 2.0 => i += 2,
                        (Some(Tok::Op("*")), Some(Tok::Ident(other))) if other == name => i += 2,
                        _ => return Err(err("only diagonal square terms are supported")),
                    }
                    inner.push((v, s * c));
                }
                let mut div = 1.0;
                if let (Some(Tok::Op("/")), Some(Tok::Num(d))) = (toks.get(i), toks.get(i + 1)) {
                    div = *d;
                    i += 2;
                }
                quad.extend(inner.into_iter().map(|(v, c)| (v, sign * c / div)));
            }
            Some(Tok::Num(v)) => {
                let v = *v;
                i += 1;
                if let Some(Tok::Ident(name)) = toks.get(i) {
                    lin.push((b.id(name), sign * v));
                    i += 1;
                } else {
                    constant += sign * v;
                }
            }
            Some(Tok::Ident(name)) => {
                lin.push((b.id(name), sign));
                i += 1;
            }
            _ => {
                if saw_sign {
                    return Err(err("dangling sign"));
                }
                return Ok((lin, quad, constant, i));
            }
        }
    }
}

/// Parses LP text in the subset written by [`export_lp`] (plus default bounds and
/// `x >= l` / `x <= u` bound forms).
pub fn parse_lp(text: &str) -> Result<Model, LpParseError> {
    let mut section = Section::Preamble;
    let mut sense = ObjSense::Minimize;
    let mut b = Builder { names: Vec::new() };
    let mut obj_text: Vec<(usize, String)> = Vec::new();
    let mut cons_text: Vec<(usize, String)> = Vec::new();
    let mut bounds: Vec<(usize, String)> = Vec::new();
    let mut binaries: Vec<(usize, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let l = raw.split('\\').next().unwrap_or("");
        if l.trim().is_empty() {
            continue;
        }
        if let Some((s, os)) = section_of(l) {
            section = s;
            if let Some(os) = os {
                sense = os;
            }
            continue;
        }
        let entry = (ln, l.to_string());
        match section {
            Section::Preamble => return Err(LpParseError { line: ln, message: "text before objective".into() }),
            Section::Objective => obj_text.push(entry),
            Section::Constraints => cons_text.push(entry),
            Section::Bounds => bounds.push(entry),
            Section::Binary => binaries.push(entry),
            Section::End => return Err(LpParseError { line: ln, message: "text after End".into() }),
        }
    }

    // Bounds first so that the variable order follows the Bounds section.
    let mut bound_vals: Vec<(usize, f64, f64)> = Vec::new();
    for (ln, l) in &bounds {
        let toks = join_signs(tokenize(l, *ln)?);
        let err = |m: &str| LpParseError { line: *ln, message: m.into() };
        let (name, lo, hi) = match toks.as_slice() {
            [Tok::Ident(n), Tok::Ident(f)] if f.eq_ignore_ascii_case("free") => {
                (n.clone(), f64::NEG_INFINITY, f64::INFINITY)
            }
            [Tok::Num(lo), Tok::Op("<="), Tok::Ident(n), Tok::Op("<="), Tok::Num(hi)] => (n.clone(), *lo, *hi),
            [Tok::Ident(n), Tok::Op("="), Tok::Num(v)] => (n.clone(), *v, *v),
            [Tok::Ident(n), Tok::Op(">="), Tok::Num(v)] => (n.clone(), *v, f64::NAN),
            [Tok::Ident(n), Tok::Op("<="), Tok::Num(v)] => (n.clone(), f64::NAN, *v),
            [Tok::Num(v), Tok::Op("<="), Tok::Ident(n)] => (n.clone(), *v, f64::NAN),
            _ => return Err(err("unsupported bound form")),
        };
        bound_vals.push((b.id(&name), lo, hi));
    }
    let mut objective = (Vec::new(), Vec::new(), 0.0);
    let joined: String = obj_text.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>().join(" ");
    let first_obj_line = obj_text.first().map_or(0, |(l, _)| *l);
    let mut toks = join_signs(tokenize(&joined, first_obj_line)?);
    if let [Tok::Ident(_), Tok::Op(":"), ..] = toks.as_slice() {
        toks.drain(..2);
    }
    if !toks.is_empty() {
        let (lin, quad, c, next) = parse_sum(&toks, 0, &mut b, first_obj_line)?;
        if next != toks.len() {
            return Err(LpParseError { line: first_obj_line, message: "trailing tokens in objective".into() });
        }
        objective = (lin, quad, c);
    }

    let mut rows = Vec::new();
    let joined: String = cons_text.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>().join(" ");
    let first_line = cons_text.first().map_or(0, |(l, _)| *l);
    let toks = join_signs(tokenize(&joined, first_line)?);
    let mut i = 0;
    while i < toks.len() {
        let err = |m: &str| LpParseError { line: first_line, message: format!("constraint {}: {m}", rows.len() + 1) };
        let mut name = format!("R{}", rows.len() + 1);
        if let (Some(Tok::Ident(n)), Some(Tok::Op(":"))) = (toks.get(i), toks.get(i + 1)) {
            name = n.clone();
            i += 2;
        }
        let (lin, quad, c, next) = parse_sum(&toks, i, &mut b, first_line)?;
        if !quad.is_empty() {
            return Err(err("quadratic constraints are not supported"));
        }
        i = next;
        let sense = match toks.get(i) {
            Some(Tok::Op("<=")) => Sense::Le,
            Some(Tok::Op(">=")) => Sense::Ge,
            Some(Tok::Op("=")) => Sense::Eq,
            _ => return Err(err("expected a comparison")),
        };
        i += 1;
        let Some(Tok::Num(rhs)) = toks.get(i) else {
            return Err(err("expected a numeric right-hand side"));
        };
        i += 1;
        rows.push((name, lin, sense, rhs - c));
    }

    let mut bin_ids = Vec::new();
    for (ln, l) in &binaries {
        for t in tokenize(l, *ln)? {
            match t {
                Tok::Ident(n) => bin_ids.push(b.id(&n)),
                _ => return Err(LpParseError { line: *ln, message: "expected variable names".into() }),
            }
        }
    }

    let mut model = Model::new(sense);
    for name in &b.names {
        model.add_continuous(name.clone(), 0.0, f64::INFINITY);
    }
    for &j in &bin_ids {
        let v = &mut model.vars[j];
        v.kind = VarKind::Binary;
        v.hi = 1.0;
    }
    for (j, lo, hi) in bound_vals {
        let v = &mut model.vars[j];
        if !lo.is_nan() {
            v.lo = lo;
        }
        if !hi.is_nan() {
            v.hi = hi;
        }
    }
    for (name, lin, sense, rhs) in rows {
        model.add_constraint(name, lin.into_iter().map(|(j, c)| (VarId(j), c)), sense, rhs);
    }
    let (lin, quad, c) = objective;
    model.objective.linear = Vec::new();
    let mut expr = super::model::LinExpr::constant(c);
    for (j, coef) in lin {
        expr.add_term(VarId(j), coef);
    }
    model.set_objective(sense, &expr);
    for (j, q) in quad {
        model.add_quadratic(VarId(j), q);
    }
    Ok(model)
}

/// Folds a unary minus directly before a number in bound and rhs positions.
fn join_signs(toks: Vec<Tok>) -> Vec<Tok> {
    let mut out: Vec<Tok> = Vec::with_capacity(toks.len());
    let mut it = toks.into_iter().peekable();
    while let Some(t) = it.next() {
        let after_cmp = matches!(out.last(), None | Some(Tok::Op("<=" | ">=" | "=")));
        if t == Tok::Op("-") && after_cmp {
            if let Some(Tok::Num(v)) = it.peek() {
                let v = -*v;
                it.next();
                out.push(Tok::Num(v));
                continue;
            }
        }
        out.push(t);
    }
    out
}
