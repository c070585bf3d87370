//! Balancing of candidate blocks, structured projectors and the reduced
//! linear model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{is_metzler, LinearizedSystem, OrthantSignature, Partition};
use crate::expr::EvalError;
use crate::linalg;
use crate::model::NetworkModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("{0} block is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("removed count {removed} outside 0..={k}")]
    Range { removed: usize, k: usize },
    #[error("A is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),
    #[error("projector bi-orthogonality violated (residual {0:e})")]
    BiOrthogonality(f64),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

// ---------------------------------------------------------------------------
// Block balancing

#[derive(Debug, Clone, PartialEq)]
pub struct BlockBalance {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// Nonincreasing.
    pub sigma: Vec<f64>,
    /// `P₂₂Q₂₂` is entrywise nonnegative with a strongly connected pattern.
    pub irreducible_nonneg: bool,
    pub warnings: Vec<String>,
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Square-root balancing of a positive definite pair.
///
/// Returns `T` with `T⁻¹ P T⁻ᵀ = Tᵀ Q T = diag(σ)`.
pub fn balance_block(p22: &DMatrix<f64>, q22: &DMatrix<f64>) -> Result<BlockBalance, BalanceError> {
    let k = p22.nrows();
    if p22.ncols() != k || q22.shape() != (k, k) {
        return Err(BalanceError::Dimension("P22 and Q22 must be square and equal size".into()));
    }
    let mut warnings = Vec::new();
    let (mut t, mut t_inv, sigma) = if is_diagonal(p22) && is_diagonal(q22) {
        // exact: permutation plus diagonal scaling, ties keep index order
        let p: Vec<f64> = (0..k).map(|i| p22[(i, i)]).collect();
        let q: Vec<f64> = (0..k).map(|i| q22[(i, i)]).collect();
        if p.iter().any(|v| !(*v > 0.0)) {
            return Err(BalanceError::NotPositiveDefinite("P22"));
        }
        if q.iter().any(|v| !(*v > 0.0)) {
            return Err(BalanceError::NotPositiveDefinite("Q22"));
        }
        let s: Vec<f64> = (0..k).map(|i| (p[i] * q[i]).sqrt()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let mut t = DMatrix::zeros(k, k);
        let mut ti = DMatrix::zeros(k, k);
        for (c, &i) in order.iter().enumerate() {
            let scale = (p[i] / q[i]).powf(0.25);
            t[(i, c)] = scale;
            ti[(c, i)] = 1.0 / scale;
        }
        (t, ti, order.iter().map(|&i| s[i]).collect::<Vec<_>>())
    } else {
        let lp = linalg::sym(p22).cholesky().ok_or(BalanceError::NotPositiveDefinite("P22"))?.l();
        let lq = linalg::sym(q22).cholesky().ok_or(BalanceError::NotPositiveDefinite("Q22"))?.l();
        let (u, sv, vt) = linalg::svd(&(lq.transpose() * &lp));
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let sigma: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(BalanceError::NotPositiveDefinite("P22 Q22"));
        }
        let mut t = DMatrix::zeros(k, k);
        let mut ti = DMatrix::zeros(k, k);
        for (c, &i) in order.iter().enumerate() {
            let s = sv[i].powf(-0.5);
            t.set_column(c, &(&lp * vt.row(i).transpose() * s));
            ti.set_row(c, &(u.column(i).transpose() * lq.transpose() * s));
        }
        (t, ti, sigma)
    };

    // deterministic signs: largest-magnitude entry of each column of T positive
    for c in 0..k {
        let col = t.column(c);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            t.column_mut(c).neg_mut();
            t_inv.row_mut(c).neg_mut();
        }
    }

    let pq = p22 * q22;
    let scale = linalg::max_abs(&pq);
    let nonneg = pq.iter().all(|&v| v >= -1e-12 * scale);
    let irreducible_nonneg = k > 0 && nonneg && linalg::strongly_connected(&pq, 1e-12 * scale);
    if k >= 2 && sigma[0] - sigma[1] <= 1e-12 * sigma[0] {
        warnings.push(format!(
            "leading singular values coincide ({:e}); dominant direction is not unique",
            sigma[0]
        ));
    }
    if irreducible_nonneg {
        let w = t.column(0);
        let v = t_inv.row(0);
        let tol_w = -1e-10 * w.amax();
        let tol_v = -1e-10 * v.amax();
        if w.iter().any(|&x| x < tol_w) || v.iter().any(|&x| x < tol_v) {
            warnings.push(
                "dominant balancing vectors have mixed signs although P22 Q22 is nonnegative irreducible \
                 (Perron-Frobenius preconditions numerically violated)"
                    .into(),
            );
        }
    }
    Ok(BlockBalance { t, t_inv, sigma, irreducible_nonneg, warnings })
}

// ---------------------------------------------------------------------------
// Projectors

/// Balancing data of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBalance {
    pub name: String,
    pub indices: Vec<usize>,
    pub removed: usize,
    pub balance: BlockBalance,
}

impl RegionBalance {
    pub fn keep(&self) -> usize {
        self.indices.len() - self.removed
    }

    /// Sum of the removed singular values.
    pub fn tail(&self) -> f64 {
        self.balance.sigma[self.keep()..].iter().sum()
    }
}

/// Structured projection `x ≈ x_ss + W z + W_r z_r`, `z = Vᵀ(x - x_ss)`.
///
/// The kept block maps through the identity; each region through its
/// balancing transform. `W`, `V`, `W_r`, `V_r` are in the original
/// coordinates; the reduced coordinates carry `reduced_signature`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedProjection {
    pub partition: Partition,
    pub signature: OrthantSignature,
    pub reduced_signature: OrthantSignature,
    pub removed_signature: OrthantSignature,
    pub regions: Vec<RegionBalance>,
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w_r: DMatrix<f64>,
    pub v_r: DMatrix<f64>,
}

impl BalancedProjection {
    /// `2 · Σ` of all removed singular values.
    pub fn error_bound(&self) -> f64 {
        2.0 * self.regions.iter().map(RegionBalance::tail).sum::<f64>()
    }

    /// Kept columns of `T` and `T⁻ᵀ` of a region (conjugated coordinates).
    pub fn lumping_vectors(&self, region: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = &self.regions[region];
        let keep = r.keep();
        let w = r.balance.t.columns(0, keep).into_owned();
        let v = r.balance.t_inv.rows(0, keep).transpose();
        (w, v)
    }

    /// `‖[V V_r]ᵀ[W W_r] - I‖_max`.
    pub fn biorthogonality_residual(&self) -> f64 {
        let n = self.w.nrows();
        let mut wf = DMatrix::zeros(n, n);
        let mut vf = DMatrix::zeros(n, n);
        let m = self.w.ncols();
        wf.columns_mut(0, m).copy_from(&self.w);
        vf.columns_mut(0, m).copy_from(&self.v);
        wf.columns_mut(m, n - m).copy_from(&self.w_r);
        vf.columns_mut(m, n - m).copy_from(&self.v_r);
        linalg::max_abs(&(vf.transpose() * wf - DMatrix::identity(n, n)))
    }

    pub fn reduced_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.regions
            .iter()
            .flat_map(|r| r.balance.warnings.iter().map(move |w| format!("region {}: {w}", r.name)))
            .collect()
    }
}

/// Tolerance of the bi-orthogonality check in [`build_projectors`].
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;

/// Assembles the projectors from per-region balancings, which must be given
/// in the partition's region order and computed in conjugated coordinates.
pub fn build_projectors(
    partition: &Partition,
    signature: &OrthantSignature,
    balances: Vec<BlockBalance>,
) -> Result<BalancedProjection, BalanceError> {
    let n = partition.n();
    if balances.len() != partition.regions().len() || signature.len() != n {
        return Err(BalanceError::Dimension("one balancing per region expected".into()));
    }
    let m = partition.reduced_dim();
    let mut wc = DMatrix::zeros(n, m);
    let mut vc = DMatrix::zeros(n, m);
    let mut wrc = DMatrix::zeros(n, n - m);
    let mut vrc = DMatrix::zeros(n, n - m);
    let mut red = Vec::with_capacity(m);
    let mut rem = Vec::with_capacity(n - m);
    let mut col = 0;
    for &i in partition.kept() {
        wc[(i, col)] = 1.0;
        vc[(i, col)] = 1.0;
        red.push(signature.signs[i]);
        col += 1;
    }
    let mut rcol = 0;
    let mut regions = Vec::new();
    for (region, bal) in partition.regions().iter().zip(balances) {
        let k = region.indices.len();
        if bal.t.shape() != (k, k) {
            return Err(BalanceError::Dimension(format!("region `{}` balancing size", region.name)));
        }
        if region.removed > k {
            return Err(BalanceError::Range { removed: region.removed, k });
        }
        for c in 0..k {
            let tc = bal.t.column(c);
            let lead = region.indices[tc.iamax()];
            let (wm, vm, cc) = if c < k - region.removed {
                red.push(signature.signs[lead]);
                col += 1;
                (&mut wc, &mut vc, col - 1)
            } else {
                rem.push(signature.signs[lead]);
                rcol += 1;
                (&mut wrc, &mut vrc, rcol - 1)
            };
            for (a, &i) in region.indices.iter().enumerate() {
                wm[(i, cc)] = bal.t[(a, c)];
                vm[(i, cc)] = bal.t_inv[(c, a)];
            }
        }
        regions.push(RegionBalance {
            name: region.name.clone(),
            indices: region.indices.clone(),
            removed: region.removed,
            balance: bal,
        });
    }
    let reduced_signature = OrthantSignature::from_signs(&red);
    let removed_signature = OrthantSignature::from_signs(&rem);
    let back = |m: &DMatrix<f64>, s: &OrthantSignature| s_right(&signature.left(m), s);
    let proj = BalancedProjection {
        partition: partition.clone(),
        signature: signature.clone(),
        w: back(&wc, &reduced_signature),
        v: back(&vc, &reduced_signature),
        w_r: back(&wrc, &removed_signature),
        v_r: back(&vrc, &removed_signature),
        reduced_signature,
        removed_signature,
        regions,
    };
    let res = proj.biorthogonality_residual();
    if !(res <= BIORTHOGONALITY_TOL) {
        return Err(BalanceError::BiOrthogonality(res));
    }
    Ok(proj)
}

fn s_right(m: &DMatrix<f64>, s: &OrthantSignature) -> DMatrix<f64> {
    if s.is_empty() {
        m.clone()
    } else {
        s.right(m)
    }
}

// ---------------------------------------------------------------------------
// Reduced linear model

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLinearModel {
    pub a_t: DMatrix<f64>,
    pub b_t: DMatrix<f64>,
    pub c_t: DMatrix<f64>,
    pub error_bound: f64,
    pub hinf_error: Option<f64>,
    /// Metzler in the reduced orthant coordinates.
    pub metzler: bool,
    pub hurwitz: bool,
    pub spectral_abscissa: f64,
    pub warnings: Vec<String>,
}

pub fn reduce_linear(sys: &LinearizedSystem, proj: &BalancedProjection) -> ReducedLinearModel {
    let a_t = proj.v.transpose() * &sys.a * &proj.w;
    let b_t = proj.v.transpose() * &sys.b;
    let c_t = &sys.c * &proj.w;
    let metzler = is_metzler(&proj.reduced_signature.conjugate(&a_t), 1e-10);
    let spectral_abscissa = linalg::spectral_abscissa(&a_t);
    let hurwitz = spectral_abscissa < 0.0;
    let mut warnings = Vec::new();
    let full_metzler = is_metzler(&proj.signature.conjugate(&sys.a), 1e-10);
    let single = proj.regions.iter().all(|r| r.removed + 1 >= r.indices.len());
    if full_metzler && single {
        if !metzler {
            warnings.push("reduced drift is not Metzler although the full drift is".into());
        }
        if !hurwitz && sys.is_hurwitz() {
            warnings.push(format!("reduced drift is not Hurwitz (abscissa {spectral_abscissa:e})"));
        }
    }
    ReducedLinearModel {
        a_t,
        b_t,
        c_t,
        error_bound: proj.error_bound(),
        hinf_error: None,
        metzler,
        hurwitz,
        spectral_abscissa,
        warnings,
    }
}

// ---------------------------------------------------------------------------
// H-infinity norm

/// Largest singular value of `C (iωI - A)⁻¹ B`.
pub fn gain_at(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(-a[(i, j)], if i == j { omega } else { 0.0 })
    });
    let bc = b.map(|v| Complex64::new(v, 0.0));
    let cc = c.map(|v| Complex64::new(v, 0.0));
    match m.lu().solve(&bc) {
        Some(x) => {
            let g = cc * x;
            let gram = if g.nrows() < g.ncols() { &g * g.adjoint() } else { g.adjoint() * &g };
            gram.symmetric_eigenvalues().iter().fold(0.0, |a: f64, &s| a.max(s)).sqrt()
        }
        None => f64::INFINITY,
    }
}

/// `‖C (sI - A)⁻¹ B‖∞` by level-set iteration on the Hamiltonian
/// imaginary-axis eigenvalues, to relative accuracy `tol`.
pub fn hinf_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> Result<f64, BalanceError> {
    let n = a.nrows();
    if n == 0 || linalg::max_abs(b) == 0.0 || linalg::max_abs(c) == 0.0 {
        return Ok(0.0);
    }
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(BalanceError::NotHurwitz(abscissa));
    }
    let tol = tol.max(1e-14);
    let bb = b * b.transpose();
    let cc = c.transpose() * c;
    let at = a.transpose();
    let mut lb = gain_at(a, b, c, 0.0);
    for z in linalg::eigenvalues(a) {
        lb = lb.max(gain_at(a, b, c, z.im.abs())).max(gain_at(a, b, c, z.norm()));
    }
    // a zero lower bound would put 1/γ = ∞ into the Hamiltonian
    let floor = 1e-14 * linalg::spectral_norm(b) * linalg::spectral_norm(c) / linalg::spectral_norm(a);
    lb = lb.max(floor);
    for _ in 0..200 {
        let gamma = lb * (1.0 + 2.0 * tol);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(a);
        h.view_mut((0, n), (n, n)).copy_from(&(&bb / gamma));
        h.view_mut((n, 0), (n, n)).copy_from(&(-&cc / gamma));
        h.view_mut((n, n), (n, n)).copy_from(&(-&at));
        let hn = h.norm();
        let mut omegas: Vec<f64> = linalg::eigenvalues(&h)
            .into_iter()
            .filter(|z| z.re.abs() <= 1e-8 * (hn + z.norm()) && z.im >= 0.0)
            .map(|z| z.im)
            .collect();
        if omegas.is_empty() {
            return Ok(lb * (1.0 + tol));
        }
        omegas.sort_by(f64::total_cmp);
        let mut next = lb;
        for w in &omegas {
            next = next.max(gain_at(a, b, c, *w));
        }
        for pair in omegas.windows(2) {
            next = next.max(gain_at(a, b, c, 0.5 * (pair[0] + pair[1])));
        }
        if next <= lb * (1.0 + 0.1 * tol) {
            // no progress: numerically at the peak
            return Ok(next.max(lb));
        }
        lb = next;
    }
    Ok(lb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundCheck {
    pub hinf_error: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Absolute slack allowed on top of the bound.
pub const BOUND_SLACK: f64 = 1e-6;

/// `‖G - G_r‖∞` against `2·Σ tail`.
pub fn check_error_bound(
    sys: &LinearizedSystem,
    rom: &ReducedLinearModel,
    proj: &BalancedProjection,
) -> Result<ErrorBoundCheck, BalanceError> {
    let n = sys.a.nrows();
    let m = rom.a_t.nrows();
    let mut ae = DMatrix::zeros(n + m, n + m);
    ae.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    ae.view_mut((n, n), (m, m)).copy_from(&rom.a_t);
    let mut be = DMatrix::zeros(n + m, sys.b.ncols());
    be.view_mut((0, 0), (n, sys.b.ncols())).copy_from(&sys.b);
    be.view_mut((n, 0), (m, sys.b.ncols())).copy_from(&rom.b_t);
    let mut ce = DMatrix::zeros(sys.c.nrows(), n + m);
    ce.view_mut((0, 0), (sys.c.nrows(), n)).copy_from(&sys.c);
    ce.view_mut((0, n), (sys.c.nrows(), m)).copy_from(&(-&rom.c_t));
    let hinf_error = if m == n && linalg::max_abs(&(&proj.w * proj.v.transpose() - DMatrix::identity(n, n))) < 1e-12 {
        0.0
    } else {
        hinf_norm(&ae, &be, &ce, 1e-8)?
    };
    let bound = proj.error_bound();
    Ok(ErrorBoundCheck { hinf_error, bound, satisfied: hinf_error <= bound + BOUND_SLACK })
}

// ---------------------------------------------------------------------------
// Sampled monotonicity of the nonlinear reduced model

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Minimum off-diagonal entry of the reduced Jacobian per sample, in the
    /// reduced orthant coordinates.
    pub per_sample: Vec<f64>,
    pub min_offdiag: f64,
}

/// Evaluates `Vᵀ J_f(x_ss + W z) W` at each reduced state sample.
pub fn sample_reduced_monotonicity(
    model: &NetworkModel,
    proj: &BalancedProjection,
    x_ss: &DVector<f64>,
    u_ss: &DVector<f64>,
    samples: &[DVector<f64>],
) -> Result<MonotonicityReport, BalanceError> {
    let mut per_sample = Vec::with_capacity(samples.len());
    for z in samples {
        let x = x_ss + &proj.w * z;
        let j = model.jacobian_x(&x, u_ss)?;
        let jr = proj.reduced_signature.conjugate(&(proj.v.transpose() * j * &proj.w));
        let mut lo = f64::INFINITY;
        for r in 0..jr.nrows() {
            for c in 0..jr.ncols() {
                if r != c {
                    lo = lo.min(jr[(r, c)]);
                }
            }
        }
        per_sample.push(lo);
    }
    let min_offdiag = per_sample.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MonotonicityReport { per_sample, min_offdiag })
}

/// Reduced coordinates of states drawn uniformly from the box
/// `x_ss ± rel·|x_ss|`. A zero radius gives the single sample `z = 0`.
pub fn box_samples(
    proj: &BalancedProjection,
    x_ss: &DVector<f64>,
    rel: f64,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let m = proj.reduced_dim();
    if rel == 0.0 || count == 0 {
        return vec![DVector::zeros(m)];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dx = DVector::from_fn(x_ss.len(), |i, _| rel * x_ss[i].abs() * rng.random_range(-1.0..=1.0));
            proj.v.transpose() * dx
        })
        .collect()
}
