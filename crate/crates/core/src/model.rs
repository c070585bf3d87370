//! Reaction network models and their text format.
//!
//! ```text
//! # comments start with '#'
//! species x = 1.0          # declaration order is state order
//! param   k = 0.5
//! input   u = 0            # value is the steady-state input
//! ode     x = u - k*x
//! output  1                # one row of C per line; omitted -> C = I
//! ```
//!
//! Instead of `ode` lines the right-hand side can be given as a stoichiometry
//! matrix and a flux vector:
//!
//! ```text
//! stoich 2 { 1 -1 }
//! flux 1 = u
//! flux 2 = k*x
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{parse_expression, BinOp, CompiledExpr, EvalError, Expr, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("expression: {0}")]
    Expression(#[from] ParseError),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("undeclared symbol `{0}`")]
    Undeclared(String),
    #[error("`{0}` is not a declared species")]
    UnknownSpecies(String),
    #[error("species `{0}` has no ode")]
    MissingOde(String),
    #[error("output row has {found} entries, expected {expected}")]
    OutputRowLength { expected: usize, found: usize },
    #[error("stoichiometry mismatch: {0}")]
    Stoichiometry(String),
    #[error("`ode` and `stoich` forms cannot be mixed")]
    MixedForms,
    #[error("model declares no species")]
    Empty,
}

/// A model-file failure. `line` is 1-based; 0 means the whole file.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ModelError {
    pub line: usize,
    pub kind: ModelErrorKind,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "line {}: {}", self.line, self.kind)
        }
    }
}

fn err(line: usize, kind: ModelErrorKind) -> ModelError {
    ModelError { line, kind }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub initial: f64,
}

/// `dx/dt = S f(x, u)` with integer stoichiometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Stoichiometry {
    /// n rows of m coefficients.
    pub matrix: Vec<Vec<i64>>,
    pub fluxes: Vec<Expr>,
}

impl Stoichiometry {
    /// Per-species right-hand sides `sum_j S_ij f_j`.
    pub fn expand(&self) -> Vec<Expr> {
        self.matrix
            .iter()
            .map(|row| {
                let mut acc: Option<Expr> = None;
                for (coef, flux) in row.iter().zip(&self.fluxes) {
                    if *coef == 0 {
                        continue;
                    }
                    let mag = coef.unsigned_abs() as f64;
                    let term = if mag == 1.0 {
                        flux.clone()
                    } else {
                        Expr::Binary(BinOp::Mul, Box::new(Expr::Const(mag)), Box::new(flux.clone()))
                    };
                    acc = Some(match (acc, *coef > 0) {
                        (None, true) => term,
                        (None, false) => Expr::Neg(Box::new(term)),
                        (Some(a), true) => Expr::Binary(BinOp::Add, Box::new(a), Box::new(term)),
                        (Some(a), false) => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(term)),
                    });
                }
                acc.unwrap_or(Expr::Const(0.0))
            })
            .collect()
    }
}

/// Nonlinear ODE model `dx/dt = f(x, u)`, `y = C x`.
///
/// Immutable after construction. The right-hand side and both Jacobians are
/// compiled once against a slot layout `[x | u | params]`.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    species: Vec<Species>,
    params: Vec<(String, f64)>,
    inputs: Vec<(String, f64)>,
    rhs: Vec<Expr>,
    stoichiometry: Option<Stoichiometry>,
    output: DMatrix<f64>,
    rhs_compiled: Vec<CompiledExpr>,
    // sparse (row, col, expr) lists of structurally nonzero derivatives
    jac_x: Vec<(usize, usize, CompiledExpr)>,
    jac_u: Vec<(usize, usize, CompiledExpr)>,
}

impl NetworkModel {
    pub fn new(
        species: Vec<Species>,
        params: Vec<(String, f64)>,
        inputs: Vec<(String, f64)>,
        rhs: Vec<Expr>,
        output: Option<DMatrix<f64>>,
    ) -> Result<Self, ModelError> {
        Self::build(species, params, inputs, rhs, None, output, &[])
    }

    pub fn from_stoichiometry(
        species: Vec<Species>,
        params: Vec<(String, f64)>,
        inputs: Vec<(String, f64)>,
        stoichiometry: Stoichiometry,
        output: Option<DMatrix<f64>>,
    ) -> Result<Self, ModelError> {
        let n = species.len();
        if stoichiometry.matrix.len() != n {
            return Err(err(
                0,
                ModelErrorKind::Stoichiometry(format!(
                    "{} rows for {n} species",
                    stoichiometry.matrix.len()
                )),
            ));
        }
        let m = stoichiometry.fluxes.len();
        if let Some(row) = stoichiometry.matrix.iter().find(|r| r.len() != m) {
            return Err(err(
                0,
                ModelErrorKind::Stoichiometry(format!("row of {} entries for {m} fluxes", row.len())),
            ));
        }
        let rhs = stoichiometry.expand();
        Self::build(species, params, inputs, rhs, Some(stoichiometry), output, &[])
    }

    /// `rhs_lines` gives, per species, the source line used in symbol errors.
    fn build(
        species: Vec<Species>,
        params: Vec<(String, f64)>,
        inputs: Vec<(String, f64)>,
        rhs: Vec<Expr>,
        stoichiometry: Option<Stoichiometry>,
        output: Option<DMatrix<f64>>,
        rhs_lines: &[usize],
    ) -> Result<Self, ModelError> {
        let n = species.len();
        if n == 0 {
            return Err(err(0, ModelErrorKind::Empty));
        }
        let mut slots: HashMap<&str, usize> = HashMap::new();
        let names = species
            .iter()
            .map(|s| s.name.as_str())
            .chain(inputs.iter().map(|(k, _)| k.as_str()))
            .chain(params.iter().map(|(k, _)| k.as_str()));
        for (i, name) in names.enumerate() {
            if slots.insert(name, i).is_some() {
                return Err(err(0, ModelErrorKind::Duplicate(name.to_string())));
            }
        }
        if rhs.len() != n {
            return Err(err(
                0,
                ModelErrorKind::Stoichiometry(format!("{} right-hand sides for {n} species", rhs.len())),
            ));
        }
        let resolve = |s: &str| slots.get(s).copied();
        let compile = |e: &Expr, line: usize| {
            e.compile(&resolve).map_err(|e| match e {
                EvalError::Unbound(s) => err(line, ModelErrorKind::Undeclared(s)),
                other => err(line, ModelErrorKind::Syntax(other.to_string())),
            })
        };
        let line_of = |i: usize| rhs_lines.get(i).copied().unwrap_or(0);

        let mut rhs_compiled = Vec::with_capacity(n);
        let mut jac_x = Vec::new();
        let mut jac_u = Vec::new();
        for (i, f) in rhs.iter().enumerate() {
            rhs_compiled.push(compile(f, line_of(i))?);
            for (j, sp) in species.iter().enumerate() {
                let d = f.differentiate(&sp.name);
                if !d.is_zero() {
                    jac_x.push((i, j, compile(&d, line_of(i))?));
                }
            }
            for (j, (u, _)) in inputs.iter().enumerate() {
                let d = f.differentiate(u);
                if !d.is_zero() {
                    jac_u.push((i, j, compile(&d, line_of(i))?));
                }
            }
        }

        let output = match output {
            Some(c) => {
                if c.ncols() != n {
                    return Err(err(
                        0,
                        ModelErrorKind::OutputRowLength { expected: n, found: c.ncols() },
                    ));
                }
                c
            }
            None => DMatrix::identity(n, n),
        };

        Ok(NetworkModel {
            species,
            params,
            inputs,
            rhs,
            stoichiometry,
            output,
            rhs_compiled,
            jac_x,
            jac_u,
        })
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output.nrows()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn inputs(&self) -> &[(String, f64)] {
        &self.inputs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|(k, _)| k.as_str()).collect()
    }

    pub fn rhs_exprs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn stoichiometry(&self) -> Option<&Stoichiometry> {
        self.stoichiometry.as_ref()
    }

    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.output
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_iterator(self.species.len(), self.species.iter().map(|s| s.initial))
    }

    pub fn steady_input(&self) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|(_, v)| *v))
    }

    /// Same model with a different output map.
    pub fn with_output(&self, output: DMatrix<f64>) -> Result<Self, ModelError> {
        if output.ncols() != self.n_species() {
            return Err(err(
                0,
                ModelErrorKind::OutputRowLength { expected: self.n_species(), found: output.ncols() },
            ));
        }
        let mut m = self.clone();
        m.output = output;
        Ok(m)
    }

    fn slots(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.species.len());
        debug_assert_eq!(u.len(), self.inputs.len());
        let mut s = Vec::with_capacity(x.len() + u.len() + self.params.len());
        s.extend_from_slice(x);
        s.extend_from_slice(u);
        s.extend(self.params.iter().map(|(_, v)| *v));
        s
    }

    /// Writes `f(x, u)` into `out`.
    pub fn eval_rhs_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let s = self.slots(x, u);
        for (o, f) in out.iter_mut().zip(&self.rhs_compiled) {
            *o = f.eval(&s)?;
        }
        Ok(())
    }

    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        let mut out = DVector::zeros(self.n_species());
        self.eval_rhs_into(x.as_slice(), u.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// Symbolic state Jacobian evaluated at `(x, u)`.
    pub fn jacobian_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>, EvalError> {
        let n = self.n_species();
        let s = self.slots(x.as_slice(), u.as_slice());
        let mut j = DMatrix::zeros(n, n);
        for (r, c, e) in &self.jac_x {
            j[(*r, *c)] = e.eval(&s)?;
        }
        Ok(j)
    }

    /// Symbolic input Jacobian evaluated at `(x, u)`.
    pub fn jacobian_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>, EvalError> {
        let s = self.slots(x.as_slice(), u.as_slice());
        let mut j = DMatrix::zeros(self.n_species(), self.n_inputs());
        for (r, c, e) in &self.jac_u {
            j[(*r, *c)] = e.eval(&s)?;
        }
        Ok(j)
    }
}

// ---------------------------------------------------------------------------
// Text format

fn parse_real(tok: &str, line: usize) -> Result<f64, ModelError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, ModelErrorKind::Syntax(format!("invalid number `{tok}`"))))?;
    if !v.is_finite() {
        return Err(err(line, ModelErrorKind::Syntax(format!("non-finite number `{tok}`"))));
    }
    Ok(v)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits `name = value`, checking the name.
fn split_assignment(rest: &str, line: usize) -> Result<(String, &str), ModelError> {
    let (name, value) = rest
        .split_once('=')
        .ok_or_else(|| err(line, ModelErrorKind::Syntax("expected `<name> = <value>`".into())))?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(err(line, ModelErrorKind::Syntax(format!("invalid identifier `{name}`"))));
    }
    Ok((name.to_string(), value.trim()))
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

struct PendingStoich {
    line: usize,
    m: usize,
    coeffs: Vec<i64>,
    closed: bool,
}

/// Parses the model text format into a validated [`NetworkModel`].
pub fn parse_model(text: &str) -> Result<NetworkModel, ModelError> {
    let mut species: Vec<Species> = Vec::new();
    let mut species_lines: Vec<usize> = Vec::new();
    let mut params: Vec<(String, f64)> = Vec::new();
    let mut inputs: Vec<(String, f64)> = Vec::new();
    let mut odes: Vec<(String, Expr, usize)> = Vec::new();
    let mut fluxes: Vec<(usize, Expr, usize)> = Vec::new();
    let mut stoich: Option<PendingStoich> = None;
    let mut outputs: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    let mut declare = |name: &str, line: usize| -> Result<(), ModelError> {
        if !seen.insert(name.to_string()) {
            return Err(err(line, ModelErrorKind::Duplicate(name.to_string())));
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }

        // continuation of an open stoichiometry block
        if let Some(st) = stoich.as_mut().filter(|s| !s.closed) {
            let (inner, closes) = match body.find('}') {
                Some(i) => {
                    if !body[i + 1..].trim().is_empty() {
                        return Err(err(line, ModelErrorKind::Syntax("text after `}`".into())));
                    }
                    (&body[..i], true)
                }
                None => (body, false),
            };
            for tok in inner.split_whitespace() {
                st.coeffs.push(tok.parse().map_err(|_| {
                    err(line, ModelErrorKind::Syntax(format!("invalid stoichiometric coefficient `{tok}`")))
                })?);
            }
            st.closed = closes;
            continue;
        }

        let (keyword, rest) = match body.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (body, ""),
        };
        match keyword {
            "species" => {
                let (name, value) = split_assignment(rest, line)?;
                let initial = parse_real(value, line)?;
                if initial < 0.0 {
                    return Err(err(line, ModelErrorKind::Syntax(format!("negative initial value for `{name}`"))));
                }
                declare(&name, line)?;
                species.push(Species { name, initial });
                species_lines.push(line);
            }
            "param" => {
                let (name, value) = split_assignment(rest, line)?;
                let v = parse_real(value, line)?;
                declare(&name, line)?;
                params.push((name, v));
            }
            "input" => {
                let (name, value) = split_assignment(rest, line)?;
                let v = parse_real(value, line)?;
                declare(&name, line)?;
                inputs.push((name, v));
            }
            "ode" => {
                let (name, value) = split_assignment(rest, line)?;
                let e = parse_expression(value).map_err(|e| err(line, e.into()))?;
                if odes.iter().any(|(n, _, _)| *n == name) {
                    return Err(err(line, ModelErrorKind::Duplicate(format!("ode {name}"))));
                }
                odes.push((name, e, line));
            }
            "flux" => {
                let (idx, value) = rest
                    .split_once('=')
                    .ok_or_else(|| err(line, ModelErrorKind::Syntax("expected `flux <j> = <expr>`".into())))?;
                let j: usize = idx.trim().parse().map_err(|_| {
                    err(line, ModelErrorKind::Syntax(format!("invalid flux index `{}`", idx.trim())))
                })?;
                let e = parse_expression(value.trim()).map_err(|e| err(line, e.into()))?;
                if fluxes.iter().any(|(k, _, _)| *k == j) {
                    return Err(err(line, ModelErrorKind::Duplicate(format!("flux {j}"))));
                }
                fluxes.push((j, e, line));
            }
            "stoich" => {
                if stoich.is_some() {
                    return Err(err(line, ModelErrorKind::Duplicate("stoich".into())));
                }
                let (m_text, block) = rest
                    .split_once('{')
                    .ok_or_else(|| err(line, ModelErrorKind::Syntax("expected `stoich <m> {`".into())))?;
                let m: usize = m_text.trim().parse().map_err(|_| {
                    err(line, ModelErrorKind::Syntax(format!("invalid reaction count `{}`", m_text.trim())))
                })?;
                let mut st = PendingStoich { line, m, coeffs: Vec::new(), closed: false };
                let (inner, closes) = match block.find('}') {
                    Some(i) => (&block[..i], true),
                    None => (block, false),
                };
                for tok in inner.split_whitespace() {
                    st.coeffs.push(tok.parse().map_err(|_| {
                        err(line, ModelErrorKind::Syntax(format!("invalid stoichiometric coefficient `{tok}`")))
                    })?);
                }
                st.closed = closes;
                stoich = Some(st);
            }
            "output" => {
                let row = rest
                    .split_whitespace()
                    .map(|t| parse_real(t, line))
                    .collect::<Result<Vec<_>, _>>()?;
                outputs.push((row, line));
            }
            other => {
                return Err(err(line, ModelErrorKind::Syntax(format!("unknown keyword `{other}`"))));
            }
        }
    }

    let n = species.len();
    if n == 0 {
        return Err(err(0, ModelErrorKind::Empty));
    }
    if let Some(st) = stoich.as_ref().filter(|s| !s.closed) {
        return Err(err(st.line, ModelErrorKind::Syntax("unterminated `stoich` block".into())));
    }

    let output = if outputs.is_empty() {
        None
    } else {
        let mut c = DMatrix::zeros(outputs.len(), n);
        for (r, (row, line)) in outputs.iter().enumerate() {
            if row.len() != n {
                return Err(err(
                    *line,
                    ModelErrorKind::OutputRowLength { expected: n, found: row.len() },
                ));
            }
            for (j, v) in row.iter().enumerate() {
                c[(r, j)] = *v;
            }
        }
        Some(c)
    };

    let check_symbols = |e: &Expr, line: usize| -> Result<(), ModelError> {
        for s in e.symbols() {
            let known = species.iter().any(|sp| sp.name == s)
                || params.iter().any(|(k, _)| *k == s)
                || inputs.iter().any(|(k, _)| *k == s);
            if !known {
                return Err(err(line, ModelErrorKind::Undeclared(s)));
            }
        }
        Ok(())
    };

    match stoich {
        Some(st) => {
            if let Some((_, _, line)) = odes.first() {
                return Err(err(*line, ModelErrorKind::MixedForms));
            }
            if st.coeffs.len() != n * st.m {
                return Err(err(
                    st.line,
                    ModelErrorKind::Stoichiometry(format!(
                        "{} coefficients given, expected {n} rows of {} ({})",
                        st.coeffs.len(),
                        st.m,
                        n * st.m
                    )),
                ));
            }
            let mut ordered: Vec<Option<Expr>> = vec![None; st.m];
            for (j, e, line) in &fluxes {
                if *j == 0 || *j > st.m {
                    return Err(err(
                        *line,
                        ModelErrorKind::Stoichiometry(format!("flux index {j} outside 1..={}", st.m)),
                    ));
                }
                check_symbols(e, *line)?;
                ordered[j - 1] = Some(e.clone());
            }
            if let Some(j) = ordered.iter().position(Option::is_none) {
                return Err(err(
                    st.line,
                    ModelErrorKind::Stoichiometry(format!("flux {} is not defined", j + 1)),
                ));
            }
            let matrix = st.coeffs.chunks(st.m).map(|r| r.to_vec()).collect();
            let stoichiometry = Stoichiometry { matrix, fluxes: ordered.into_iter().flatten().collect() };
            let rhs = stoichiometry.expand();
            NetworkModel::build(species, params, inputs, rhs, Some(stoichiometry), output, &[])
        }
        None => {
            if let Some((_, _, line)) = fluxes.first() {
                return Err(err(*line, ModelErrorKind::Syntax("`flux` without `stoich`".into())));
            }
            let mut rhs: Vec<Option<Expr>> = vec![None; n];
            let mut lines = vec![0; n];
            for (name, e, line) in odes {
                let i = species
                    .iter()
                    .position(|s| s.name == name)
                    .ok_or_else(|| err(line, ModelErrorKind::UnknownSpecies(name.clone())))?;
                check_symbols(&e, line)?;
                rhs[i] = Some(e);
                lines[i] = line;
            }
            if let Some(i) = rhs.iter().position(Option::is_none) {
                return Err(err(species_lines[i], ModelErrorKind::MissingOde(species[i].name.clone())));
            }
            let rhs = rhs.into_iter().flatten().collect();
            NetworkModel::build(species, params, inputs, rhs, None, output, &lines)
        }
    }
}

impl std::str::FromStr for NetworkModel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_model(s)
    }
}

/// The two-gene mutual-repression network with the standard example parameters.
/// State order is `(p1, p2, m1, m2)`; the output is the two protein levels.
pub const TOY_MODEL: &str = include_str!("../data/toggle.model");

pub fn toy_model() -> NetworkModel {
    parse_model(TOY_MODEL).expect("bundled toy model parses")
}
