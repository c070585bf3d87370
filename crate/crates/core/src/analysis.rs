//! Steady states, linearization, Metzler tests and orthant detection.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::linalg;
use crate::model::NetworkModel;

pub const DEFAULT_STEADY_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
const ARMIJO_C: f64 = 1e-4;
const MIN_DAMPING: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("singular Jacobian at iterate {iterate:?}")]
    SingularJacobian { iterate: Vec<f64> },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("steady-state residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no sample points given")]
    EmptySamples,
    #[error("invalid partition: {0}")]
    Partition(String),
}

// ---------------------------------------------------------------------------
// Partition

/// A group of candidate species to be lumped together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub indices: Vec<usize>,
    /// Number of balanced coordinates removed from this region.
    pub removed: usize,
}

impl Region {
    pub fn keep(&self) -> usize {
        self.indices.len() - self.removed
    }
}

/// Split of the state into a kept block and disjoint candidate regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    kept: Vec<usize>,
    regions: Vec<Region>,
}

impl Partition {
    /// Builds a partition; states not in any region form the kept block.
    pub fn new(n: usize, regions: Vec<Region>) -> Result<Self, AnalysisError> {
        let mut owner = vec![false; n];
        for r in &regions {
            if r.indices.is_empty() {
                return Err(AnalysisError::Partition(format!("region `{}` is empty", r.name)));
            }
            if r.removed > r.indices.len() {
                return Err(AnalysisError::Partition(format!(
                    "region `{}` removes {} of {} states",
                    r.name,
                    r.removed,
                    r.indices.len()
                )));
            }
            for &i in &r.indices {
                if i >= n {
                    return Err(AnalysisError::Partition(format!("index {i} out of range")));
                }
                if owner[i] {
                    return Err(AnalysisError::Partition(format!("state {i} appears twice")));
                }
                owner[i] = true;
            }
        }
        let kept = (0..n).filter(|&i| !owner[i]).collect();
        Ok(Partition { n, kept, regions })
    }

    /// One candidate block with `r` states removed, `1 <= r <= |candidate|`.
    pub fn single(n: usize, candidate: Vec<usize>, r: usize) -> Result<Self, AnalysisError> {
        if r == 0 || r > candidate.len() {
            return Err(AnalysisError::Partition(format!(
                "r = {r} outside 1..={}",
                candidate.len()
            )));
        }
        Self::new(n, vec![Region { name: "candidate".into(), indices: candidate, removed: r }])
    }

    /// Nothing is reduced.
    pub fn trivial(n: usize) -> Self {
        Partition { n, kept: (0..n).collect(), regions: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// All candidate indices, region by region.
    pub fn candidates(&self) -> Vec<usize> {
        self.regions.iter().flat_map(|r| r.indices.iter().copied()).collect()
    }

    pub fn removed(&self) -> usize {
        self.regions.iter().map(|r| r.removed).sum()
    }

    pub fn reduced_dim(&self) -> usize {
        self.n - self.removed()
    }

    /// The kept block (if non-empty) followed by every region.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if !self.kept.is_empty() {
            out.push(self.kept.clone());
        }
        out.extend(self.regions.iter().map(|r| r.indices.clone()));
        out
    }
}

// ---------------------------------------------------------------------------
// Steady state

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

/// Damped Newton iteration on `f(x, u) = 0` with Armijo backtracking on ‖f‖₂.
pub fn find_steady_state(
    model: &NetworkModel,
    u: &DVector<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyState, AnalysisError> {
    let n = model.n_species();
    if x0.len() != n || u.len() != model.n_inputs() {
        return Err(AnalysisError::Dimension(format!(
            "x0 has {} entries, u has {}; model has {n} species and {} inputs",
            x0.len(),
            u.len(),
            model.n_inputs()
        )));
    }
    let mut x = x0.clone();
    let mut f = model.rhs(&x, u)?;
    let mut iterations = 0;
    while inf_norm(&f) > tol {
        if iterations == max_iter {
            return Err(AnalysisError::NoConvergence { iterations, residual: inf_norm(&f) });
        }
        iterations += 1;
        let j = model.jacobian_x(&x, u)?;
        let step = j
            .lu()
            .solve(&(-&f))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| AnalysisError::SingularJacobian { iterate: x.iter().copied().collect() })?;
        let phi0 = f.norm_squared();
        let mut lambda = 1.0;
        loop {
            let trial = &x + &step * lambda;
            let ok = model.rhs(&trial, u).ok().filter(|ft| ft.iter().all(|v| v.is_finite()));
            if let Some(ft) = ok {
                // sufficient decrease of 0.5‖f‖², directional derivative -‖f‖²
                if ft.norm_squared() <= (1.0 - 2.0 * ARMIJO_C * lambda) * phi0 {
                    x = trial;
                    f = ft;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < MIN_DAMPING {
                return Err(AnalysisError::NoConvergence { iterations, residual: inf_norm(&f) });
            }
        }
    }
    let mut warnings = Vec::new();
    for (i, v) in x.iter().enumerate() {
        if *v < -tol {
            warnings.push(format!("steady state has negative component {} = {v:e}", model.species()[i].name));
        }
    }
    Ok(SteadyState { residual: inf_norm(&f), x, iterations, warnings })
}

// ---------------------------------------------------------------------------
// Linearization

/// Jacobian linearization `(A, B, C)` at a steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub x_ss: DVector<f64>,
    pub u_ss: DVector<f64>,
    pub partition: Partition,
    pub spectral_abscissa: f64,
    pub warnings: Vec<String>,
}

/// Partitioned views of a linearization: index 1 is the kept block, index 2
/// all candidate states.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
}

impl LinearizedSystem {
    pub fn blocks(&self) -> Blocks {
        let k1 = self.partition.kept().to_vec();
        let k2 = self.partition.candidates();
        let all_u: Vec<usize> = (0..self.b.ncols()).collect();
        let all_y: Vec<usize> = (0..self.c.nrows()).collect();
        Blocks {
            a11: linalg::submatrix(&self.a, &k1, &k1),
            a12: linalg::submatrix(&self.a, &k1, &k2),
            a21: linalg::submatrix(&self.a, &k2, &k1),
            a22: linalg::submatrix(&self.a, &k2, &k2),
            b1: linalg::submatrix(&self.b, &k1, &all_u),
            b2: linalg::submatrix(&self.b, &k2, &all_u),
            c1: linalg::submatrix(&self.c, &all_y, &k1),
            c2: linalg::submatrix(&self.c, &all_y, &k2),
        }
    }

    pub fn is_hurwitz(&self) -> bool {
        self.spectral_abscissa < 0.0
    }
}

/// Residual tolerance used by [`linearize`].
pub const LINEARIZE_TOL: f64 = 1e-8;

pub fn linearize(
    model: &NetworkModel,
    x_ss: &DVector<f64>,
    u_ss: &DVector<f64>,
    partition: Partition,
) -> Result<LinearizedSystem, AnalysisError> {
    linearize_with_tol(model, x_ss, u_ss, partition, LINEARIZE_TOL)
}

pub fn linearize_with_tol(
    model: &NetworkModel,
    x_ss: &DVector<f64>,
    u_ss: &DVector<f64>,
    partition: Partition,
    tol: f64,
) -> Result<LinearizedSystem, AnalysisError> {
    let n = model.n_species();
    if x_ss.len() != n || u_ss.len() != model.n_inputs() || partition.n() != n {
        return Err(AnalysisError::Dimension("linearization point or partition".into()));
    }
    let residual = inf_norm(&model.rhs(x_ss, u_ss)?);
    if residual > tol {
        return Err(AnalysisError::Residual { residual, tol });
    }
    let a = model.jacobian_x(x_ss, u_ss)?;
    let b = model.jacobian_u(x_ss, u_ss)?;
    let spectral_abscissa = linalg::spectral_abscissa(&a);
    let mut warnings = Vec::new();
    if spectral_abscissa >= 0.0 {
        warnings.push(format!("A is not Hurwitz (spectral abscissa {spectral_abscissa:e})"));
    }
    Ok(LinearizedSystem {
        a,
        b,
        c: model.output_matrix().clone(),
        x_ss: x_ss.clone(),
        u_ss: u_ss.clone(),
        partition,
        spectral_abscissa,
        warnings,
    })
}

pub fn is_metzler(a: &DMatrix<f64>, tol: f64) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] >= -tol))
}

// ---------------------------------------------------------------------------
// Orthant signatures

/// Diagonal ±1 conjugation mapping an invariant orthant onto ℝⁿ₊.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthantSignature {
    pub signs: Vec<i8>,
}

impl OrthantSignature {
    pub fn identity(n: usize) -> Self {
        OrthantSignature { signs: vec![1; n] }
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        OrthantSignature { signs: signs.iter().map(|&s| if s < 0 { -1 } else { 1 }).collect() }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.signs.iter().all(|&s| s > 0)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| if i == j { self.signs[i] as f64 } else { 0.0 })
    }

    /// `E M E` for square `M`.
    pub fn conjugate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] * (self.signs[i] * self.signs[j]) as f64
        })
    }

    /// `E M` (row scaling).
    pub fn left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * self.signs[i] as f64)
    }

    /// `M E` (column scaling).
    pub fn right(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * self.signs[j] as f64)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i] * self.signs[i] as f64)
    }

    pub fn flipped(&self) -> Self {
        OrthantSignature { signs: self.signs.iter().map(|s| -s).collect() }
    }

    /// Equality up to a global sign flip.
    pub fn equivalent(&self, other: &Self) -> bool {
        self == other || *self == other.flipped()
    }

    /// Reorders the signature: entry `i` of the result is entry `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        OrthantSignature { signs: order.iter().map(|&i| self.signs[i]).collect() }
    }
}

impl fmt::Display for OrthantSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.signs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", if *s > 0 { '+' } else { '-' })?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// Off-diagonal entry `(row, col)` takes both signs over the samples.
    SignChange { row: usize, col: usize, positive_at: Vec<f64>, negative_at: Vec<f64> },
    /// Cycle of the interaction graph with an odd number of negative edges.
    OddCycle { cycle: Vec<usize> },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::SignChange { row, col, positive_at, negative_at } => write!(
                f,
                "J[{row},{col}] changes sign: positive at {positive_at:?}, negative at {negative_at:?}"
            ),
            Infeasibility::OddCycle { cycle } => write!(f, "odd negative cycle through states {cycle:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrthantResult {
    Monotone(OrthantSignature),
    Infeasible(Infeasibility),
}

/// Entries below this magnitude count as structurally zero.
const SIGN_THRESHOLD: f64 = 1e-12;

/// Sign-pattern analysis of the state Jacobian over `samples` at input `u`.
///
/// The returned signature makes every sampled Jacobian Metzler after
/// conjugation. Each connected component of the interaction graph is
/// normalized so that its lowest index has sign `+`.
pub fn detect_orthant(
    model: &NetworkModel,
    u: &DVector<f64>,
    samples: &[DVector<f64>],
) -> Result<OrthantResult, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let n = model.n_species();
    let mut pos: Vec<Option<usize>> = vec![None; n * n];
    let mut neg: Vec<Option<usize>> = vec![None; n * n];
    for (s, x) in samples.iter().enumerate() {
        let j = model.jacobian_x(x, u)?;
        for r in 0..n {
            for c in 0..n {
                if r == c {
                    continue;
                }
                let v = j[(r, c)];
                if v > SIGN_THRESHOLD {
                    pos[r * n + c].get_or_insert(s);
                } else if v < -SIGN_THRESHOLD {
                    neg[r * n + c].get_or_insert(s);
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            if let (Some(p), Some(q)) = (pos[r * n + c], neg[r * n + c]) {
                return Ok(OrthantResult::Infeasible(Infeasibility::SignChange {
                    row: r,
                    col: c,
                    positive_at: samples[p].iter().copied().collect(),
                    negative_at: samples[q].iter().copied().collect(),
                }));
            }
        }
    }
    // undirected signed edges; opposite signs on (i,j) and (j,i) is a 2-cycle
    let edge_sign = |i: usize, j: usize| -> Option<i8> {
        let s = |r: usize, c: usize| {
            if pos[r * n + c].is_some() {
                Some(1i8)
            } else if neg[r * n + c].is_some() {
                Some(-1i8)
            } else {
                None
            }
        };
        match (s(i, j), s(j, i)) {
            (Some(a), Some(b)) if a != b => Some(0),
            (Some(a), _) | (_, Some(a)) => Some(a),
            (None, None) => None,
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            if edge_sign(i, j) == Some(0) {
                return Ok(OrthantResult::Infeasible(Infeasibility::OddCycle { cycle: vec![i, j] }));
            }
        }
    }
    let mut color = vec![0i8; n];
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        color[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let Some(s) = edge_sign(i, j) else { continue };
                let want = color[i] * s;
                if color[j] == 0 {
                    color[j] = want;
                    parent[j] = i;
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                } else if color[j] != want {
                    return Ok(OrthantResult::Infeasible(Infeasibility::OddCycle {
                        cycle: tree_cycle(i, j, &parent, &depth),
                    }));
                }
            }
        }
    }
    Ok(OrthantResult::Monotone(OrthantSignature { signs: color }))
}

/// Cycle closed by the non-tree edge `(a, b)` in a BFS forest.
fn tree_cycle(a: usize, b: usize, parent: &[usize], depth: &[usize]) -> Vec<usize> {
    let (mut x, mut y) = (a, b);
    let mut left = vec![x];
    let mut right = vec![y];
    while depth[x] > depth[y] {
        x = parent[x];
        left.push(x);
    }
    while depth[y] > depth[x] {
        y = parent[y];
        right.push(y);
    }
    while x != y {
        x = parent[x];
        y = parent[y];
        left.push(x);
        right.push(y);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, toy_model};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn decay_steady_state_is_zero() {
        let m = parse_model("species x = 3\node x = -x\n").unwrap();
        let ss = find_steady_state(&m, &dv(&[]), &dv(&[3.0]), 1e-10, 200).unwrap();
        assert!(ss.x[0].abs() < 1e-12);
        assert!(ss.iterations <= 1);
    }

    #[test]
    fn toy_steady_states() {
        let m = toy_model();
        let u = m.steady_input();
        let ss = find_steady_state(&m, &u, &dv(&[1.0, 10.0, 1.0, 1.0]), 1e-10, 200).unwrap();
        let want = [0.155730, 9.763188, 0.031146, 4.881594];
        for (x, w) in ss.x.iter().zip(want) {
            assert!((x - w).abs() < 1e-5 * w.max(1.0), "{:?}", ss.x);
        }
        let again = find_steady_state(&m, &u, &ss.x, 1e-10, 200).unwrap();
        assert!(again.iterations <= 1);
    }

    #[test]
    fn singular_jacobian_reports_iterate() {
        let m = parse_model("species x = 1\nspecies y = 1\node x = x + y - 1\node y = 2*x + 2*y\n").unwrap();
        let err = find_steady_state(&m, &dv(&[]), &dv(&[1.0, 1.0]), 1e-10, 50).unwrap_err();
        assert!(matches!(err, AnalysisError::SingularJacobian { ref iterate } if iterate == &vec![1.0, 1.0]));
    }

    #[test]
    fn linearize_examples() {
        let m = parse_model("species x = 0\ninput u = 0\node x = -x + u\n").unwrap();
        let sys = linearize(&m, &dv(&[0.0]), &dv(&[0.0]), Partition::trivial(1)).unwrap();
        assert_eq!(sys.a[(0, 0)], -1.0);
        assert_eq!(sys.b[(0, 0)], 1.0);

        let m = parse_model("species a = 0\nspecies b = 0\node a = -a + b^2\node b = -b\n").unwrap();
        let sys = linearize(&m, &dv(&[0.0, 0.0]), &dv(&[]), Partition::trivial(2)).unwrap();
        assert_eq!(sys.a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]));
        assert!(sys.is_hurwitz());

        assert!(matches!(
            linearize(&m, &dv(&[1.0, 0.0]), &dv(&[]), Partition::trivial(2)),
            Err(AnalysisError::Residual { .. })
        ));
    }

    #[test]
    fn partition_blocks() {
        let p = Partition::single(4, vec![1, 3], 1).unwrap();
        assert_eq!(p.kept(), &[0, 2]);
        assert_eq!(p.reduced_dim(), 3);
        assert!(Partition::single(4, vec![1, 3], 3).is_err());
        assert!(Partition::single(4, vec![1, 3], 0).is_err());
        let dup = vec![
            Region { name: "a".into(), indices: vec![0, 1], removed: 1 },
            Region { name: "b".into(), indices: vec![1, 2], removed: 1 },
        ];
        assert!(Partition::new(4, dup).is_err());
    }

    #[test]
    fn metzler_examples() {
        assert!(is_metzler(&DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]), 0.0));
        assert!(!is_metzler(&DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, 0.0, -3.0]), 0.0));
    }

    #[test]
    fn toy_orthant() {
        let m = toy_model();
        let samples = vec![dv(&[1.0, 2.0, 3.0, 4.0]), dv(&[0.0, 0.0, 0.0, 0.0])];
        let OrthantResult::Monotone(sig) = detect_orthant(&m, &m.steady_input(), &samples).unwrap() else {
            panic!("toy model should be monotone");
        };
        // (p1, p2, m1, m2) order
        assert_eq!(sig.signs, vec![1, -1, 1, -1]);
        assert_eq!(sig.permuted(&[0, 2, 1, 3]).signs, vec![1, 1, -1, -1]);
        let ss = dv(&[0.155730, 9.763188, 0.031146, 4.881594]);
        let a = m.jacobian_x(&ss, &m.steady_input()).unwrap();
        assert!(!is_metzler(&a, 1e-10));
        assert!(is_metzler(&sig.conjugate(&a), 1e-10));
    }

    #[test]
    fn cooperative_pair_and_odd_cycle() {
        let m = parse_model("species a = 1\nspecies b = 1\node a = -a + b\node b = a - b\n").unwrap();
        let r = detect_orthant(&m, &dv(&[]), &[dv(&[1.0, 1.0])]).unwrap();
        assert_eq!(r, OrthantResult::Monotone(OrthantSignature::identity(2)));

        let text = "species a = 1\nspecies b = 1\nspecies c = 1\n\
                    ode a = -a + 1/(1 + c)\node b = -b + a\node c = -c + b\n";
        let m = parse_model(text).unwrap();
        match detect_orthant(&m, &dv(&[]), &[dv(&[1.0, 1.0, 1.0])]).unwrap() {
            OrthantResult::Infeasible(Infeasibility::OddCycle { mut cycle }) => {
                cycle.sort();
                assert_eq!(cycle, vec![0, 1, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(detect_orthant(&m, &dv(&[]), &[]), Err(AnalysisError::EmptySamples)));
    }

    #[test]
    fn sign_change_has_witnesses() {
        let m = parse_model("species a = 1\nspecies b = 1\node a = -a + b*(b - 2)\node b = -b\n").unwrap();
        let r = detect_orthant(&m, &dv(&[]), &[dv(&[1.0, 0.0]), dv(&[1.0, 3.0])]).unwrap();
        match r {
            OrthantResult::Infeasible(Infeasibility::SignChange { row, col, positive_at, negative_at }) => {
                assert_eq!((row, col), (0, 1));
                assert_eq!(positive_at, vec![1.0, 3.0]);
                assert_eq!(negative_at, vec![1.0, 0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
