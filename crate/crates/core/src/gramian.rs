//! Block-diagonal generalized Gramians.
//!
//! A pair `(P, Q)` is admissible when
//!
//! ```text
//! A P + P Aᵀ + B Bᵀ ⪯ 0,    Q A + Aᵀ Q + Cᵀ C ⪯ 0,    P, Q ⪰ 0
//! ```
//!
//! and both matrices vanish outside a [`BlockPattern`]. Metzler drifts admit
//! a closed-form diagonal pair ([`solve_diagonal_metzler`]); the general case
//! goes through a projected subgradient search ([`solve_structured`]) with an
//! optional trace-minimizing barrier refinement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{is_metzler, OrthantSignature, Partition};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Controllability,
    Observability,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GramianError {
    #[error("A is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),
    #[error("A is not Metzler")]
    NotMetzler,
    #[error("numerical failure: {0}; try the structured backend")]
    NumericalFailure(String),
    #[error("{side:?} inequality not certified after {iterations} iterations (best normalized lambda_max {best_lambda:e})")]
    Infeasible { side: Side, iterations: usize, best_lambda: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

// ---------------------------------------------------------------------------
// Pattern

/// Symmetric sparsity pattern given by disjoint index groups covering `0..n`.
/// Entry `(i, j)` is free iff `i` and `j` share a group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPattern {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl BlockPattern {
    pub fn from_blocks(n: usize, groups: Vec<Vec<usize>>) -> Result<Self, GramianError> {
        let mut seen = vec![false; n];
        for &i in groups.iter().flatten() {
            if i >= n || seen[i] {
                return Err(GramianError::Dimension(format!("bad or repeated index {i} in pattern")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(GramianError::Dimension("pattern groups do not cover all states".into()));
        }
        let groups = groups.into_iter().filter(|g| !g.is_empty()).collect();
        Ok(BlockPattern { n, groups })
    }

    pub fn diagonal(n: usize) -> Self {
        BlockPattern { n, groups: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn full(n: usize) -> Self {
        BlockPattern { n, groups: if n == 0 { vec![] } else { vec![(0..n).collect()] } }
    }

    /// Kept block as one group plus one group per region.
    pub fn from_partition(partition: &Partition) -> Self {
        BlockPattern { n: partition.n(), groups: partition.blocks() }
    }

    /// Splits every group into its `+` and `-` members.
    pub fn split_by_signature(&self, sig: &OrthantSignature) -> Self {
        let mut groups = Vec::new();
        for g in &self.groups {
            let (p, m): (Vec<usize>, Vec<usize>) = g.iter().partition(|&&i| sig.signs[i] > 0);
            groups.extend([p, m].into_iter().filter(|h| !h.is_empty()));
        }
        BlockPattern { n: self.n, groups }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn is_diagonal(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    fn group_ids(&self) -> Vec<usize> {
        let mut id = vec![0; self.n];
        for (k, g) in self.groups.iter().enumerate() {
            for &i in g {
                id[i] = k;
            }
        }
        id
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        i == j || self.groups.iter().any(|g| g.contains(&i) && g.contains(&j))
    }

    /// Zeroes every entry outside the pattern and symmetrizes.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let id = self.group_ids();
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if id[i] == id[j] {
                0.5 * (m[(i, j)] + m[(j, i)])
            } else {
                0.0
            }
        })
    }

    /// Largest magnitude of an entry outside the pattern.
    pub fn violation(&self, m: &DMatrix<f64>) -> f64 {
        let id = self.group_ids();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if id[i] != id[j] {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// λ_max(A P + P Aᵀ + B Bᵀ)
    pub p_residual: f64,
    /// λ_max(Q A + Aᵀ Q + Cᵀ C)
    pub q_residual: f64,
    pub p_min_eig: f64,
    pub q_min_eig: f64,
    pub entrywise_nonneg: bool,
    pub pattern_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGramianPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub pattern: BlockPattern,
    pub certificate: Certificate,
}

/// Relative tolerance on the Lyapunov residuals used by the solvers.
pub const RESIDUAL_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-10;

fn residual_scale(a: &DMatrix<f64>, x: &DMatrix<f64>, bb: &DMatrix<f64>) -> f64 {
    linalg::spectral_norm(bb) + 2.0 * linalg::spectral_norm(a) * linalg::spectral_norm(x)
}

/// Recomputes every certificate quantity from scratch. `tol` is relative to
/// the size of the terms in each inequality.
pub fn verify_gramians(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    pattern: &BlockPattern,
    tol: f64,
) -> Certificate {
    let bb = b * b.transpose();
    let cc = c.transpose() * c;
    let at = a.transpose();
    let p_residual = linalg::lambda_max(&(a * p + p * &at + &bb));
    let q_residual = linalg::lambda_max(&(q * a + &at * q + &cc));
    let p_min_eig = linalg::lambda_min(p);
    let q_min_eig = linalg::lambda_min(q);
    let nonneg = |m: &DMatrix<f64>| {
        let floor = -PSD_TOL * linalg::max_abs(m);
        m.iter().all(|&v| v >= floor)
    };
    let entrywise_nonneg = nonneg(p) && nonneg(q);
    let pattern_ok = pattern.violation(p) == 0.0 && pattern.violation(q) == 0.0;
    let passed = p_residual <= tol * residual_scale(a, p, &bb)
        && q_residual <= tol * residual_scale(a, q, &cc)
        && p_min_eig >= -PSD_TOL * linalg::spectral_norm(p)
        && q_min_eig >= -PSD_TOL * linalg::spectral_norm(q)
        && pattern_ok;
    Certificate { p_residual, q_residual, p_min_eig, q_min_eig, entrywise_nonneg, pattern_ok, passed }
}

// ---------------------------------------------------------------------------
// Closed form for Metzler drifts

/// For Metzler Hurwitz `A` with `M = -A`, returns `u = M⁻¹·1` and
/// `v = M⁻ᵀ·1`, both strictly positive.
pub fn diagonal_stability_scaling(a: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>), GramianError> {
    let n = a.nrows();
    if !is_metzler(a, 1e-10) {
        return Err(GramianError::NotMetzler);
    }
    let m = -a;
    let ones = DVector::from_element(n, 1.0);
    let lu = m.clone().lu();
    let u = lu.solve(&ones);
    let v = m.transpose().lu().solve(&ones);
    match (u, v) {
        (Some(u), Some(v)) if u.iter().chain(v.iter()).all(|x| *x > 0.0 && x.is_finite()) => Ok((u, v)),
        _ => Err(GramianError::NotHurwitz(linalg::spectral_abscissa(a))),
    }
}

/// `γ D` with `D = diag(u/v)` solving `A D + D Aᵀ ≺ 0` and `γ = ‖BBᵀ‖₂/δ`.
fn metzler_side(a: &DMatrix<f64>, bb: &DMatrix<f64>) -> Result<DMatrix<f64>, GramianError> {
    let (u, v) = diagonal_stability_scaling(a)?;
    let d = DMatrix::from_diagonal(&u.component_div(&v));
    let x = a * &d + &d * a.transpose();
    let delta = linalg::lambda_min(&(-x));
    if !(delta > 0.0) {
        return Err(GramianError::NumericalFailure(format!("delta = {delta:e} after diagonal scaling")));
    }
    Ok(d * (linalg::spectral_norm(bb) / delta))
}

/// Diagonal Gramians for a Metzler Hurwitz drift.
pub fn solve_diagonal_metzler(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<StructuredGramianPair, GramianError> {
    check_dims(a, b, c)?;
    if !is_metzler(a, 1e-10) {
        return Err(GramianError::NotMetzler);
    }
    let p = metzler_side(a, &(b * b.transpose()))?;
    let q = metzler_side(&a.transpose(), &(c.transpose() * c))?;
    let pattern = BlockPattern::diagonal(a.nrows());
    let certificate = verify_gramians(a, b, c, &p, &q, &pattern, RESIDUAL_TOL);
    Ok(StructuredGramianPair { p, q, pattern, certificate })
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<(), GramianError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n {
        return Err(GramianError::Dimension(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Structured search

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub require_entrywise_nonneg: bool,
    /// Lower bound on the eigenvalues of the result; `None` means
    /// `1e-8·‖BBᵀ‖₂` (or `1e-8` when that vanishes).
    pub eps_pd: Option<f64>,
    pub max_iter: usize,
    /// Follow the feasibility phase with a trace-minimizing barrier method.
    pub min_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { require_entrywise_nonneg: true, eps_pd: None, max_iter: 5000, min_trace: false }
    }
}

/// Pattern projection followed by eigenvalue clipping per group and
/// (optionally) clipping of negative entries.
fn project_feasible(m: &DMatrix<f64>, pattern: &BlockPattern, floor: f64, nonneg: bool) -> DMatrix<f64> {
    let mut p = pattern.project(m);
    for round in 0..4 {
        for g in pattern.groups() {
            let blk = linalg::submatrix(&p, g, g);
            let e = blk.symmetric_eigen();
            if e.eigenvalues.iter().all(|&l| l >= floor) {
                continue;
            }
            let clipped = e.eigenvalues.map(|l| l.max(floor));
            let fixed = &e.eigenvectors * DMatrix::from_diagonal(&clipped) * e.eigenvectors.transpose();
            for (a, &i) in g.iter().enumerate() {
                for (b, &j) in g.iter().enumerate() {
                    p[(i, j)] = 0.5 * (fixed[(a, b)] + fixed[(b, a)]);
                }
            }
        }
        if !nonneg || p.iter().all(|&v| v >= 0.0) {
            break;
        }
        p.apply(|v| *v = v.max(0.0));
        if round == 3 {
            break;
        }
    }
    if nonneg {
        p.apply(|v| *v = v.max(0.0));
        // restore the eigenvalue floor by a diagonal shift, which keeps signs
        for g in pattern.groups() {
            let lmin = linalg::lambda_min(&linalg::submatrix(&p, g, g));
            if lmin < floor {
                for &i in g {
                    p[(i, i)] += floor - lmin;
                }
            }
        }
    }
    p
}

/// `λ_max(A P + P Aᵀ) / tr P` and its top eigenvector.
fn normalized_lambda(a: &DMatrix<f64>, p: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let x = a * p + p * a.transpose();
    let (l, v) = linalg::top_eigenpair(&x);
    (l / p.trace(), v)
}

/// Searches a pattern-respecting `P̂` with `A P̂ + P̂ Aᵀ ≺ 0`, `tr P̂ = 1`.
fn feasible_direction(
    a: &DMatrix<f64>,
    pattern: &BlockPattern,
    nonneg: bool,
    max_iter: usize,
) -> Result<DMatrix<f64>, (usize, f64)> {
    let n = a.nrows();
    let floor = 1e-3 / n as f64;
    let mut starts = vec![DMatrix::identity(n, n)];
    if let Ok((u, v)) = diagonal_stability_scaling(a) {
        starts.push(DMatrix::from_diagonal(&u.component_div(&v)));
    }
    if let Some(x) = linalg::solve_lyapunov(a, &DMatrix::identity(n, n)) {
        starts.push(x);
    }
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for s in starts {
        let tr = s.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            continue;
        }
        let p = project_feasible(&(s / tr), pattern, floor, nonneg);
        let p = &p / p.trace();
        let (l, _) = normalized_lambda(a, &p);
        if best.as_ref().is_none_or(|(bl, _)| l < *bl) {
            best = Some((l, p));
        }
    }
    let (mut best_l, mut best_p) = best.expect("identity start is always valid");
    if best_l < 0.0 {
        return Ok(best_p);
    }
    let mut p = best_p.clone();
    for k in 0..max_iter {
        let (l, q) = normalized_lambda(a, &p);
        if l < best_l {
            best_l = l;
            best_p = p.clone();
            if l < 0.0 {
                return Ok(best_p);
            }
        }
        let aq = a.transpose() * &q;
        let g = pattern.project(&(&aq * q.transpose() + &q * aq.transpose()));
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let step = 0.2 * p.norm() / ((k + 1) as f64).sqrt();
        let next = project_feasible(&(&p - g * (step / gn)), pattern, floor, nonneg);
        p = &next / next.trace();
    }
    Err((max_iter, best_l))
}

fn solve_side(
    a: &DMatrix<f64>,
    bb: &DMatrix<f64>,
    pattern: &BlockPattern,
    opts: &SolveOptions,
    side: Side,
) -> Result<DMatrix<f64>, GramianError> {
    let n = a.nrows();
    let bb_norm = linalg::spectral_norm(bb);
    let eps = opts.eps_pd.unwrap_or(if bb_norm > 0.0 { 1e-8 * bb_norm } else { 1e-8 });
    let dir = feasible_direction(a, pattern, opts.require_entrywise_nonneg, opts.max_iter)
        .map_err(|(iterations, best_lambda)| GramianError::Infeasible { side, iterations, best_lambda })?;
    let lam = linalg::lambda_max(&(a * &dir + &dir * a.transpose()));
    let lmin = linalg::lambda_min(&dir);
    // γ X̂ + BBᵀ ⪯ (γ λ + ‖BBᵀ‖) I with a 1% safety margin
    let gamma = (1.01 * bb_norm / -lam).max(eps / lmin);
    let p = dir * gamma;
    if opts.min_trace && n > 0 {
        if let Some(refined) = min_trace(a, bb, pattern, opts.require_entrywise_nonneg, eps, &p) {
            return Ok(refined);
        }
    }
    Ok(p)
}

/// Block-diagonal Gramians on an arbitrary pattern.
pub fn solve_structured(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    pattern: &BlockPattern,
    opts: &SolveOptions,
) -> Result<StructuredGramianPair, GramianError> {
    check_dims(a, b, c)?;
    if pattern.n() != a.nrows() {
        return Err(GramianError::Dimension("pattern size".into()));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(GramianError::NotHurwitz(abscissa));
    }
    let p = solve_side(a, &(b * b.transpose()), pattern, opts, Side::Controllability)?;
    let q = solve_side(&a.transpose(), &(c.transpose() * c), pattern, opts, Side::Observability)?;
    let certificate = verify_gramians(a, b, c, &p, &q, pattern, RESIDUAL_TOL);
    if !certificate.passed {
        return Err(GramianError::NumericalFailure(format!(
            "recertification failed: residuals {:e}, {:e}",
            certificate.p_residual, certificate.q_residual
        )));
    }
    Ok(StructuredGramianPair { p, q, pattern: pattern.clone(), certificate })
}

// ---------------------------------------------------------------------------
// Trace minimization

/// Free entries `(i, j)`, `i <= j`, of a pattern.
fn pattern_vars(pattern: &BlockPattern) -> Vec<(usize, usize)> {
    let mut vars = Vec::new();
    for g in pattern.groups() {
        let mut g = g.clone();
        g.sort_unstable();
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a..] {
                vars.push((i, j));
            }
        }
    }
    vars
}

struct Barrier<'a> {
    a: &'a DMatrix<f64>,
    bb: &'a DMatrix<f64>,
    vars: Vec<(usize, usize)>,
    /// `A E + E Aᵀ` per variable
    lifts: Vec<DMatrix<f64>>,
    nonneg: bool,
    eps: f64,
    n: usize,
}

impl Barrier<'_> {
    fn assemble(&self, x: &[f64]) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in self.vars.iter().zip(x) {
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
        p
    }

    /// Cholesky factors of `-(A P + P Aᵀ + BBᵀ)` and `P - εI`, if strictly feasible.
    fn factors(&self, x: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>, f64)> {
        if self.nonneg && self.vars.iter().zip(x).any(|(&(i, j), &v)| i != j && v <= 0.0) {
            return None;
        }
        let p = self.assemble(x);
        let f = -(self.a * &p + &p * self.a.transpose() + self.bb);
        let g = &p - DMatrix::identity(self.n, self.n) * self.eps;
        let cf = linalg::sym(&f).cholesky()?;
        let cg = linalg::sym(&g).cholesky()?;
        let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mut phi = -logdet(&cf.l()) - logdet(&cg.l());
        if self.nonneg {
            phi -= self
                .vars
                .iter()
                .zip(x)
                .filter(|((i, j), _)| i != j)
                .map(|(_, v)| v.ln())
                .sum::<f64>();
        }
        Some((cf.inverse(), cg.inverse(), phi))
    }

    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let tr: f64 = self.vars.iter().zip(x).filter(|((i, j), _)| i == j).map(|(_, v)| v).sum();
        self.factors(x).map(|(_, _, phi)| t * tr + phi)
    }

    fn count(&self) -> f64 {
        let off = if self.nonneg { self.vars.iter().filter(|(i, j)| i != j).count() } else { 0 };
        (2 * self.n + off) as f64
    }
}

/// Primal log-barrier path following for
/// `min tr P` s.t. `A P + P Aᵀ + BBᵀ ⪯ 0`, `P ⪰ εI`, pattern, optional `P ≥ 0`.
///
/// Starts from the strictly feasible `p0`; returns `None` if that start
/// cannot be made strictly interior.
fn min_trace(
    a: &DMatrix<f64>,
    bb: &DMatrix<f64>,
    pattern: &BlockPattern,
    nonneg: bool,
    eps: f64,
    p0: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let vars = pattern_vars(pattern);
    let m = vars.len();
    let lifts = vars
        .iter()
        .map(|&(i, j)| {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            a * &e + &e * a.transpose()
        })
        .collect();
    let eps_b = eps.min(0.5 * linalg::lambda_min(p0));
    let bar = Barrier { a, bb, vars, lifts, nonneg, eps: eps_b, n };

    let mut x: Vec<f64> = bar.vars.iter().map(|&(i, j)| p0[(i, j)]).collect();
    if nonneg {
        // nudge zero off-diagonal entries into the interior
        let dmin = (0..n).map(|i| p0[(i, i)]).fold(f64::INFINITY, f64::min);
        let mut tau = 1e-3 * dmin;
        let base = x.clone();
        loop {
            for (k, &(i, j)) in bar.vars.iter().enumerate() {
                if i != j && base[k] <= 0.0 {
                    x[k] = tau;
                }
            }
            if bar.factors(&x).is_some() {
                break;
            }
            tau *= 0.5;
            if tau < 1e-300 {
                return None;
            }
        }
    }
    bar.factors(&x)?;

    let nu = bar.count();
    let mut t = nu / p0.trace().max(f64::MIN_POSITIVE);
    for _outer in 0..60 {
        // centering by damped Newton
        for _inner in 0..200 {
            let (s, gi, _) = bar.factors(&x)?;
            let mut grad = DVector::zeros(m);
            let mut hess = DMatrix::zeros(m, m);
            let sl: Vec<DMatrix<f64>> = bar.lifts.iter().map(|l| &s * l).collect();
            for (ka, &(i, j)) in bar.vars.iter().enumerate() {
                let mut g = sl[ka].trace();
                if i == j {
                    g += t - gi[(i, i)];
                } else {
                    g -= 2.0 * gi[(i, j)];
                    if nonneg {
                        g -= 1.0 / x[ka];
                        hess[(ka, ka)] += 1.0 / (x[ka] * x[ka]);
                    }
                }
                grad[ka] = g;
                for (kb, &(k, l)) in bar.vars.iter().enumerate().skip(ka) {
                    // tr(S L_a S L_b)
                    let h1 = sl[ka].component_mul(&sl[kb].transpose()).sum();
                    // tr(G⁻¹ E_a G⁻¹ E_b) with E = e_i e_jᵀ + e_j e_iᵀ (halved on the diagonal)
                    let ta: &[(usize, usize)] = if i == j { &[(i, i)] } else { &[(i, j), (j, i)] };
                    let tb: &[(usize, usize)] = if k == l { &[(k, k)] } else { &[(k, l), (l, k)] };
                    let mut h2 = 0.0;
                    for &(p, q) in ta {
                        for &(r, w) in tb {
                            h2 += gi[(w, p)] * gi[(q, r)];
                        }
                    }
                    hess[(ka, kb)] += h1 + h2;
                    if ka != kb {
                        hess[(kb, ka)] += h1 + h2;
                    }
                }
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => hess.lu().solve(&(-&grad))?,
            };
            let dec = -grad.dot(&step);
            if !(dec > 1e-14) {
                break;
            }
            let f0 = bar.value(&x, t)?;
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
                if let Some(f1) = bar.value(&trial, t) {
                    if f1 <= f0 - 0.25 * alpha * dec {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || dec < 1e-10 {
                break;
            }
        }
        let tr: f64 = bar.vars.iter().zip(&x).filter(|((i, j), _)| i == j).map(|(_, v)| v).sum();
        if nu / t <= 1e-10 * tr.max(eps) {
            break;
        }
        t *= 10.0;
    }
    let p = bar.assemble(&x);
    // the barrier floor may sit below the requested eps
    if linalg::lambda_min(&p) < eps * (1.0 - 1e-12) && eps_b < eps {
        return None;
    }
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn closed_form_two_state_example() {
        let a = m(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        let b = m(2, 1, &[1.0, 0.0]);
        let (u, v) = diagonal_stability_scaling(&a).unwrap();
        assert_relative_eq!(u, DVector::from_element(2, 1.0), epsilon = 1e-14);
        assert_relative_eq!(v, DVector::from_element(2, 1.0), epsilon = 1e-14);
        let pair = solve_diagonal_metzler(&a, &b, &m(1, 2, &[1.0, 1.0])).unwrap();
        assert_relative_eq!(pair.p, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
        let r = &a * &pair.p + &pair.p * a.transpose() + &b * b.transpose();
        assert_relative_eq!(r, m(2, 2, &[-1.0, 1.0, 1.0, -2.0]), epsilon = 1e-14);
        let ev = linalg::sym_eigenvalues(&r);
        assert_relative_eq!(ev[0], (-3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], (-3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert!(pair.certificate.passed);
        assert!(pair.certificate.entrywise_nonneg);
    }

    #[test]
    fn zero_input_gives_zero_gramian() {
        let pair = solve_diagonal_metzler(&m(1, 1, &[-1.0]), &m(1, 1, &[0.0]), &m(1, 1, &[1.0])).unwrap();
        assert_eq!(pair.p[(0, 0)], 0.0);
        assert!(pair.certificate.passed);
    }

    #[test]
    fn rejects_non_metzler_and_unstable() {
        let b = DMatrix::identity(2, 2);
        let r = solve_diagonal_metzler(&m(2, 2, &[-1.0, -1.0, 0.0, -1.0]), &b, &b);
        assert_eq!(r.unwrap_err(), GramianError::NotMetzler);
        let r = solve_diagonal_metzler(&m(2, 2, &[1.0, 0.0, 0.0, -1.0]), &b, &b);
        assert!(matches!(r, Err(GramianError::NotHurwitz(_))));
    }

    #[test]
    fn verify_examples() {
        let z = DMatrix::zeros(2, 2);
        let pat = BlockPattern::diagonal(2);
        let a = m(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(verify_gramians(&a, &z, &z, &z, &z, &pat, RESIDUAL_TOL).passed);
        let skew = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let eye = DMatrix::identity(2, 2);
        let cert = verify_gramians(&skew, &eye, &eye, &eye, &eye, &pat, RESIDUAL_TOL);
        assert!(!cert.passed);
        assert!(cert.p_residual > 0.0);
    }

    #[test]
    fn structured_full_block_matches_lyapunov() {
        let a = m(2, 2, &[-1.0, 0.0, 2.0, -1.0]);
        let b = DMatrix::identity(2, 2);
        let pat = BlockPattern::full(2);
        let pair = solve_structured(&a, &b, &b, &pat, &SolveOptions::default()).unwrap();
        assert!(pair.certificate.passed);
        let exact = linalg::solve_lyapunov(&a, &(&b * b.transpose())).unwrap();
        let r = &a * &exact + &exact * a.transpose() + &b * b.transpose();
        assert!(linalg::max_abs(&r) < 1e-12);

        // trace minimization recovers the exact solution
        let opts = SolveOptions { min_trace: true, ..SolveOptions::default() };
        let pair = solve_structured(&a, &b, &b, &pat, &opts).unwrap();
        assert!(pair.certificate.passed);
        assert!((pair.p.trace() - exact.trace()).abs() < 1e-6 * exact.trace());
    }

    #[test]
    fn structured_respects_pattern_and_signs() {
        let a = m(3, 3, &[-2.0, 1.0, 0.5, 0.3, -1.0, 0.2, 0.1, 0.4, -3.0]);
        let b = m(3, 1, &[1.0, 0.0, 1.0]);
        let c = m(1, 3, &[0.0, 1.0, 1.0]);
        let pat = BlockPattern::from_blocks(3, vec![vec![0], vec![1, 2]]).unwrap();
        for min_trace in [false, true] {
            let opts = SolveOptions { min_trace, ..SolveOptions::default() };
            let pair = solve_structured(&a, &b, &c, &pat, &opts).unwrap();
            assert!(pair.certificate.passed);
            assert!(pair.certificate.entrywise_nonneg);
            assert_eq!(pair.p[(0, 1)], 0.0);
            assert_eq!(pair.q[(2, 0)], 0.0);
        }
    }

    #[test]
    fn min_trace_is_tighter_than_closed_form() {
        let a = m(3, 3, &[-2.0, 1.0, 0.5, 0.3, -1.0, 0.2, 0.1, 0.4, -3.0]);
        let b = m(3, 1, &[1.0, 0.0, 1.0]);
        let closed = solve_diagonal_metzler(&a, &b, &b.transpose()).unwrap();
        let opts = SolveOptions { min_trace: true, ..SolveOptions::default() };
        let tight = solve_structured(&a, &b, &b.transpose(), &BlockPattern::diagonal(3), &opts).unwrap();
        assert!(tight.certificate.passed);
        assert!(tight.p.trace() < closed.p.trace());
    }

    #[test]
    fn pattern_splitting() {
        let pat = BlockPattern::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let sig = OrthantSignature::from_signs(&[1, -1, -1, -1]);
        let split = pat.split_by_signature(&sig);
        assert_eq!(split.groups(), &[vec![0], vec![1], vec![2, 3]]);
        assert!(split.allows(2, 3));
        assert!(!split.allows(0, 1));
        assert!(BlockPattern::from_blocks(3, vec![vec![0, 1]]).is_err());
    }
}
