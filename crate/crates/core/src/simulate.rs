//! Simulation of the full model, the two projected models and the QSSA
//! baseline, plus output error norms.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::BalancedProjection;
use crate::model::NetworkModel;
use crate::ode::{integrate, OdeError, OdeOptions, OdeStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Full,
    Reduction,
    Truncation,
    Qssa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Full, Method::Reduction, Method::Truncation, Method::Qssa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Reduction => "reduction",
            Method::Truncation => "truncation",
            Method::Qssa => "qssa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected full, reduction, truncation or qssa)"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{method}: {source}")]
    Integrator { method: Method, source: OdeError },
    #[error("{method}: inner Newton failed at t = {t}: {message}")]
    InnerNewton { method: Method, t: f64, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input signal: {0}")]
    Input(String),
    #[error("horizon mismatch: reference ends at {reference}, test at {test}")]
    Horizon { reference: f64, test: f64 },
}

// ---------------------------------------------------------------------------
// Inputs

/// Time-dependent input `u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Constant(DVector<f64>),
    /// `values[0]` before `breaks[0]`, `values[k]` on `[breaks[k-1], breaks[k])`.
    Piecewise { breaks: Vec<f64>, values: Vec<DVector<f64>> },
}

impl InputSignal {
    pub fn constant(u: DVector<f64>) -> Self {
        InputSignal::Constant(u)
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self, SimError> {
        if values.len() != breaks.len() + 1 {
            return Err(SimError::Input(format!("{} values for {} breaks", values.len(), breaks.len())));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SimError::Input("breaks must be strictly increasing".into()));
        }
        if values.iter().any(|v| v.len() != values[0].len()) {
            return Err(SimError::Input("inconsistent input dimensions".into()));
        }
        Ok(InputSignal::Piecewise { breaks, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Constant(u) => u.len(),
            InputSignal::Piecewise { values, .. } => values[0].len(),
        }
    }

    pub fn at(&self, t: f64) -> &DVector<f64> {
        match self {
            InputSignal::Constant(u) => u,
            InputSignal::Piecewise { breaks, values } => &values[breaks.partition_point(|&b| b <= t)],
        }
    }

    /// Constant-input pieces of `[0, t_end]`.
    fn segments(&self, t_end: f64) -> Vec<(f64, f64, &DVector<f64>)> {
        match self {
            InputSignal::Constant(u) => vec![(0.0, t_end, u)],
            InputSignal::Piecewise { breaks, values } => {
                let mut out = Vec::new();
                let mut a = 0.0;
                for (k, v) in values.iter().enumerate() {
                    let b = breaks.get(k).copied().unwrap_or(f64::INFINITY).min(t_end);
                    if b > a {
                        out.push((a, b, v));
                        a = b;
                    }
                }
                out
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Relative and absolute integrator tolerance.
    pub tol: f64,
    /// Number of uniform report points on `[0, T_f]`.
    pub points: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { tol: 1e-8, points: 2001 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub times: Vec<f64>,
    /// Full-dimensional state per report time.
    pub states: Vec<Vec<f64>>,
    /// `C x` per report time.
    pub outputs: Vec<Vec<f64>>,
    pub wall_seconds: f64,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// CSV with header `t,<species...>,y1,...,yk` and 17 significant digits.
    pub fn to_csv(&self, species: &[&str]) -> String {
        let mut s = String::from("t");
        for name in species {
            s.push(',');
            s.push_str(name);
        }
        let k = self.outputs.first().map_or(0, Vec::len);
        for j in 1..=k {
            s.push_str(&format!(",y{j}"));
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            s.push_str(&format!("{t:.16e}"));
            for v in self.states[i].iter().chain(&self.outputs[i]) {
                s.push_str(&format!(",{v:.16e}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|i| t_end * i as f64 / (points - 1) as f64).collect()
}

/// Integrates `rhs(u, t, y, dy)` across the constant-input pieces of `input`.
fn integrate_segments<F>(
    mut rhs: F,
    y0: &[f64],
    input: &InputSignal,
    grid: &[f64],
    tol: f64,
) -> Result<(Vec<Vec<f64>>, OdeStats), OdeError>
where
    F: FnMut(&DVector<f64>, f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let t_end = *grid.last().expect("grid is non-empty");
    let opts = OdeOptions::with_tol(tol);
    let mut y = y0.to_vec();
    let mut states = Vec::with_capacity(grid.len());
    let mut stats = OdeStats::default();
    let mut next = 0;
    for (a, b, u) in input.segments(t_end) {
        let mut pts: Vec<f64> = Vec::new();
        while next < grid.len() && (grid[next] <= b || b >= t_end) {
            pts.push(grid[next]);
            next += 1;
        }
        let extra = pts.last() != Some(&b);
        if extra {
            pts.push(b);
        }
        let sol = integrate(|t, x, dx| rhs(u, t, x, dx), a, &y, b, &pts, &opts)?;
        stats.accepted += sol.stats.accepted;
        stats.rejected += sol.stats.rejected;
        stats.evaluations += sol.stats.evaluations;
        let mut got = sol.states;
        y = got.last().cloned().unwrap_or(y);
        if extra {
            got.pop();
        }
        states.extend(got);
    }
    Ok((states, stats))
}

fn check_state(model: &NetworkModel, x0: &DVector<f64>, input: &InputSignal) -> Result<(), SimError> {
    if x0.len() != model.n_species() || input.dim() != model.n_inputs() {
        return Err(SimError::Dimension(format!(
            "x0 has {} entries and u has {}; model has {} species and {} inputs",
            x0.len(),
            input.dim(),
            model.n_species(),
            model.n_inputs()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Dimension("x0 is not finite".into()));
    }
    Ok(())
}

/// `base + M·v` without intermediate allocations.
fn affine(base: &DVector<f64>, m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| base[i] + v.iter().enumerate().map(|(k, vk)| m[(i, k)] * vk).sum::<f64>())
        .collect()
}

fn outputs(model: &NetworkModel, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = model.output_matrix();
    let zero = DVector::zeros(c.nrows());
    states.iter().map(|x| affine(&zero, c, x)).collect()
}

pub fn simulate_full(
    model: &NetworkModel,
    x0: &DVector<f64>,
    input: &InputSignal,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    check_state(model, x0, input)?;
    let start = Instant::now();
    let grid = uniform_grid(t_end, opts.points);
    let (states, stats) = integrate_segments(
        |u, _, x, dx| model.eval_rhs_into(x, u.as_slice(), dx).map_err(|e| e.to_string()),
        x0.as_slice(),
        input,
        &grid,
        opts.tol,
    )
    .map_err(|source| SimError::Integrator { method: Method::Full, source })?;
    let outputs = outputs(model, &states);
    Ok(Trajectory {
        method: Method::Full,
        times: grid,
        states,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
        stats,
    })
}

// ---------------------------------------------------------------------------
// Inner Newton solves

const INNER_MAX_ITER: usize = 50;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

/// Damped Newton on `g(s) = Lᵀ f(base + R s)` where `L`, `R` select the
/// algebraic coordinates. Returns `f` at the solution.
struct AlgebraicSolve<'a> {
    model: &'a NetworkModel,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    tol: f64,
}

impl AlgebraicSolve<'_> {
    fn solve_from(&self, base: &DVector<f64>, u: &DVector<f64>, s: &mut DVector<f64>) -> Result<DVector<f64>, String> {
        let eval = |s: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>), String> {
            let x = base + &self.right * s;
            let f = self.model.rhs(&x, u).map_err(|e| e.to_string())?;
            let g = self.left.transpose() * &f;
            if g.iter().any(|v| !v.is_finite()) {
                return Err("non-finite residual".into());
            }
            Ok((f, g))
        };
        let (mut f, mut g) = eval(s)?;
        for _ in 0..INNER_MAX_ITER {
            if inf_norm(&g) <= self.tol {
                return Ok(f);
            }
            let x = base + &self.right * &*s;
            let j = self.model.jacobian_x(&x, u).map_err(|e| e.to_string())?;
            let jr = self.left.transpose() * j * &self.right;
            let step = jr
                .lu()
                .solve(&(-&g))
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .ok_or("singular algebraic Jacobian")?;
            let phi0 = g.norm_squared();
            let mut lambda = 1.0;
            loop {
                let trial = &*s + &step * lambda;
                if let Ok((ft, gt)) = eval(&trial) {
                    if gt.norm_squared() <= (1.0 - 2e-4 * lambda) * phi0 {
                        *s = trial;
                        f = ft;
                        g = gt;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-10 {
                    return Err(format!("line search stalled at residual {:e}", inf_norm(&g)));
                }
            }
        }
        if inf_norm(&g) <= self.tol {
            Ok(f)
        } else {
            Err(format!("no convergence in {INNER_MAX_ITER} iterations (residual {:e})", inf_norm(&g)))
        }
    }

    /// Warm start from `s`, then one retry from `reset`.
    fn solve(
        &self,
        base: &DVector<f64>,
        u: &DVector<f64>,
        s: &mut DVector<f64>,
        reset: &DVector<f64>,
    ) -> Result<DVector<f64>, String> {
        match self.solve_from(base, u, s) {
            Ok(f) => Ok(f),
            Err(first) => {
                s.copy_from(reset);
                self.solve_from(base, u, s).map_err(|second| format!("{first}; retry: {second}"))
            }
        }
    }
}

fn check_projection(model: &NetworkModel, proj: &BalancedProjection, x_ss: &DVector<f64>) -> Result<(), SimError> {
    let n = model.n_species();
    if proj.w.nrows() != n || x_ss.len() != n {
        return Err(SimError::Dimension(format!("projection built for {} states, model has {n}", proj.w.nrows())));
    }
    Ok(())
}

/// Reduction method: the removed coordinates solve `V_rᵀ f = 0` at every
/// evaluation. Coordinates are deviations from `x_ss`.
pub fn simulate_reduction(
    model: &NetworkModel,
    proj: &BalancedProjection,
    x_ss: &DVector<f64>,
    x0: &DVector<f64>,
    input: &InputSignal,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    check_state(model, x0, input)?;
    check_projection(model, proj, x_ss)?;
    let start = Instant::now();
    let grid = uniform_grid(t_end, opts.points);
    let r = proj.w_r.ncols();
    let solver = AlgebraicSolve { model, left: proj.v_r.clone(), right: proj.w_r.clone(), tol: 0.01 * opts.tol };
    let zero = DVector::zeros(r);
    let mut zr = zero.clone();
    let vt = proj.v.transpose();
    let z0 = &vt * (x0 - x_ss);
    let result = integrate_segments(
        |u, _, z, dz| {
            let base = x_ss + &proj.w * DVector::from_column_slice(z);
            let f = solver.solve(&base, u, &mut zr, &zero)?;
            dz.copy_from_slice((&vt * f).as_slice());
            Ok(())
        },
        z0.as_slice(),
        input,
        &grid,
        opts.tol,
    );
    let (zs, stats) = result.map_err(|source| match source {
        OdeError::Rhs { t, message } => SimError::InnerNewton { method: Method::Reduction, t, message },
        source => SimError::Integrator { method: Method::Reduction, source },
    })?;
    let mut zr = zero.clone();
    let mut states = Vec::with_capacity(zs.len());
    for (t, z) in grid.iter().zip(&zs) {
        let base = x_ss + &proj.w * DVector::from_column_slice(z);
        solver
            .solve(&base, input.at(*t), &mut zr, &zero)
            .map_err(|message| SimError::InnerNewton { method: Method::Reduction, t: *t, message })?;
        states.push((base + &proj.w_r * &zr).iter().copied().collect());
    }
    let outputs = outputs(model, &states);
    Ok(Trajectory {
        method: Method::Reduction,
        times: grid,
        states,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
        stats,
    })
}

/// Truncation method: removed coordinates frozen at the steady state.
pub fn simulate_truncation(
    model: &NetworkModel,
    proj: &BalancedProjection,
    x_ss: &DVector<f64>,
    x0: &DVector<f64>,
    input: &InputSignal,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    check_state(model, x0, input)?;
    check_projection(model, proj, x_ss)?;
    let start = Instant::now();
    let grid = uniform_grid(t_end, opts.points);
    let vt = proj.v.transpose();
    let z0 = &vt * (x0 - x_ss);
    let n = model.n_species();
    let mut x = vec![0.0; n];
    let mut f = DVector::zeros(n);
    let (zs, stats) = integrate_segments(
        |u, _, z, dz| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = x_ss[i] + z.iter().enumerate().map(|(k, zk)| proj.w[(i, k)] * zk).sum::<f64>();
            }
            model.eval_rhs_into(&x, u.as_slice(), f.as_mut_slice()).map_err(|e| e.to_string())?;
            for (k, d) in dz.iter_mut().enumerate() {
                *d = (0..n).map(|i| vt[(k, i)] * f[i]).sum();
            }
            Ok(())
        },
        z0.as_slice(),
        input,
        &grid,
        opts.tol,
    )
    .map_err(|source| SimError::Integrator { method: Method::Truncation, source })?;
    let states: Vec<Vec<f64>> = zs.iter().map(|z| affine(x_ss, &proj.w, z)).collect();
    let outputs = outputs(model, &states);
    Ok(Trajectory {
        method: Method::Truncation,
        times: grid,
        states,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
        stats,
    })
}

/// Quasi-steady-state approximation: the `fast` species solve
/// `f_fast = 0` at every evaluation.
pub fn simulate_qssa(
    model: &NetworkModel,
    fast: &[usize],
    x0: &DVector<f64>,
    input: &InputSignal,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    check_state(model, x0, input)?;
    let n = model.n_species();
    let mut is_fast = vec![false; n];
    for &i in fast {
        if i >= n || is_fast[i] {
            return Err(SimError::Dimension(format!("bad fast index {i}")));
        }
        is_fast[i] = true;
    }
    let start = Instant::now();
    let grid = uniform_grid(t_end, opts.points);
    let slow: Vec<usize> = (0..n).filter(|&i| !is_fast[i]).collect();
    let select = |idx: &[usize]| {
        let mut m = DMatrix::zeros(n, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            m[(i, k)] = 1.0;
        }
        m
    };
    let sf = select(fast);
    let ss = select(&slow);
    let solver = AlgebraicSolve { model, left: sf.clone(), right: sf.clone(), tol: 0.01 * opts.tol };
    let guess = sf.transpose() * x0;
    let mut xf = guess.clone();
    let y0 = ss.transpose() * x0;
    let (ys, stats) = integrate_segments(
        |u, _, y, dy| {
            let base = &ss * DVector::from_column_slice(y);
            let f = solver.solve(&base, u, &mut xf, &guess)?;
            for (k, &i) in slow.iter().enumerate() {
                dy[k] = f[i];
            }
            Ok(())
        },
        y0.as_slice(),
        input,
        &grid,
        opts.tol,
    )
    .map_err(|source| match source {
        OdeError::Rhs { t, message } => SimError::InnerNewton { method: Method::Qssa, t, message },
        source => SimError::Integrator { method: Method::Qssa, source },
    })?;
    let mut xf = guess.clone();
    let mut states = Vec::with_capacity(ys.len());
    for (t, y) in grid.iter().zip(&ys) {
        let base = &ss * DVector::from_column_slice(y);
        solver
            .solve(&base, input.at(*t), &mut xf, &guess)
            .map_err(|message| SimError::InnerNewton { method: Method::Qssa, t: *t, message })?;
        states.push((base + &sf * &xf).iter().copied().collect());
    }
    let outputs = outputs(model, &states);
    Ok(Trajectory {
        method: Method::Qssa,
        times: grid,
        states,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
        stats,
    })
}

// ---------------------------------------------------------------------------
// Error norms

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub reference: Method,
    pub test: Method,
    pub horizon: f64,
    pub channels: Vec<Norms>,
    /// Channel norms summed.
    pub total: Norms,
}

/// Natural cubic spline through `(xs, ys)` evaluated at `at`.
pub fn natural_spline(xs: &[f64], ys: &[f64], at: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 3 {
        return at
            .iter()
            .map(|&t| {
                if n == 2 {
                    let s = (t - xs[0]) / (xs[1] - xs[0]);
                    ys[0] + s * (ys[1] - ys[0])
                } else {
                    ys[0]
                }
            })
            .collect();
    }
    // second derivatives via the tridiagonal system (Thomas algorithm)
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let a = h[i - 1];
        let b = 2.0 * (h[i - 1] + h[i]);
        let cc = h[i];
        let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    at.iter()
        .map(|&t| {
            let k = xs.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
            let (x0, x1) = (xs[k], xs[k + 1]);
            let hk = x1 - x0;
            let a = (x1 - t) / hk;
            let b = (t - x0) / hk;
            a * ys[k] + b * ys[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * hk * hk / 6.0
        })
        .collect()
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Output error of `test` against `reference` on the reference grid.
pub fn trajectory_error(reference: &Trajectory, test: &Trajectory) -> Result<ErrorReport, SimError> {
    let (tr, tt) = (reference.horizon(), test.horizon());
    if (tr - tt).abs() > 1e-9 * tr.abs().max(1.0) {
        return Err(SimError::Horizon { reference: tr, test: tt });
    }
    let k = reference.outputs.first().map_or(0, Vec::len);
    if test.outputs.first().map_or(0, Vec::len) != k {
        return Err(SimError::Dimension("output channel counts differ".into()));
    }
    let same_grid = reference.times == test.times;
    let mut channels = Vec::with_capacity(k);
    for j in 0..k {
        let yr: Vec<f64> = reference.outputs.iter().map(|y| y[j]).collect();
        let yt: Vec<f64> = test.outputs.iter().map(|y| y[j]).collect();
        let yt = if same_grid { yt } else { natural_spline(&test.times, &yt, &reference.times) };
        let e: Vec<f64> = yr.iter().zip(&yt).map(|(a, b)| (a - b).abs()).collect();
        let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
        channels.push(Norms {
            l1: trapezoid(&reference.times, &e),
            l2: trapezoid(&reference.times, &e2).sqrt(),
            linf: e.iter().copied().fold(0.0, f64::max),
        });
    }
    let total = channels.iter().fold(Norms::default(), |acc, c| Norms {
        l1: acc.l1 + c.l1,
        l2: acc.l2 + c.l2,
        linf: acc.linf + c.linf,
    });
    Ok(ErrorReport { reference: reference.method, test: test.method, horizon: tr, channels, total })
}
