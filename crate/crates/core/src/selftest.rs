//! Seeded randomized checks run by `netred selftest`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{is_metzler, OrthantSignature, Partition, Region};
use crate::balance::{balance_block, build_projectors, hinf_norm};
use crate::expr::{parse_expression, Expr};
use crate::gramian::{solve_diagonal_metzler, RESIDUAL_TOL};
use crate::linalg;
use crate::ode::{integrate, OdeOptions};
use crate::random;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    /// Cases skipped because the random instance was unusable.
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<24} {} cases", self.name, self.cases)?;
        if self.skipped > 0 {
            write!(f, ", {} skipped", self.skipped)?;
        }
        if !self.passed() {
            write!(f, ", {} failed", self.failures.len())?;
            for msg in self.failures.iter().take(5) {
                write!(f, "\n    {msg}")?;
            }
        }
        Ok(())
    }
}

type Suite = fn(&mut ChaCha8Rng, usize) -> SuiteResult;

const SUITES: [(&str, Suite); 6] = [
    ("parser-round-trip", parser_round_trip),
    ("derivatives", derivatives),
    ("diagonal-gramians", diagonal_gramians),
    ("balancing", balancing),
    ("structure-preservation", structure_preservation),
    ("integrator", integrator),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs every suite with `cases` random instances; each suite has its own
/// generator derived from `seed`.
pub fn run_all(seed: u64, cases: usize) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .enumerate()
        .map(|(k, (_, suite))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            suite(&mut rng, cases)
        })
        .collect()
}

/// Runs a single suite by name.
pub fn run_one(name: &str, seed: u64, cases: usize) -> Option<SuiteResult> {
    let k = SUITES.iter().position(|(n, _)| *n == name)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
    Some((SUITES[k].1)(&mut rng, cases))
}

fn result(name: &'static str, cases: usize, skipped: usize, failures: Vec<String>) -> SuiteResult {
    SuiteResult { name, cases, skipped, failures }
}

fn parser_round_trip(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut failures = Vec::new();
    for case in 0..cases {
        let e = random::expression(rng, 8, &["x", "y", "k_1"]);
        let text = e.to_string();
        match parse_expression(&text) {
            Ok(back) if back == e => {}
            Ok(back) => failures.push(format!("case {case}: `{text}` parsed back as `{back}`")),
            Err(err) => failures.push(format!("case {case}: `{text}` does not parse: {err}")),
        }
    }
    result("parser-round-trip", cases, 0, failures)
}

/// Five-point central difference of `e` in `sym` at `point`.
fn five_point(e: &Expr, sym: &str, point: &[(&str, f64)], h: f64) -> Option<f64> {
    let at = |shift: f64| {
        let lookup = |s: &str| point.iter().find(|(n, _)| *n == s).map(|(_, v)| if s == sym { v + shift } else { *v });
        random::domain_margin(e, &lookup).filter(|m| *m >= 1e-3)?;
        e.eval_with(&lookup).ok()
    };
    let (f1, f2, b1, b2) = (at(h)?, at(2.0 * h)?, at(-h)?, at(-2.0 * h)?);
    Some((8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * h))
}

/// Richardson extrapolation of [`five_point`] from steps `h` and `h/2`.
fn extrapolated(e: &Expr, sym: &str, point: &[(&str, f64)], h: f64) -> Option<f64> {
    let (coarse, fine) = (five_point(e, sym, point, h)?, five_point(e, sym, point, h / 2.0)?);
    Some((16.0 * fine - coarse) / 15.0)
}

fn derivatives(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let symbols = ["x", "y"];
    let mut failures = Vec::new();
    let mut skipped = 0;
    for case in 0..cases {
        let e = random::smooth_expression(rng, 5, &symbols);
        let point = [("x", rng.random_range(-2.0..2.0)), ("y", rng.random_range(-2.0..2.0))];
        let lookup = |s: &str| point.iter().find(|(n, _)| *n == s).map(|(_, v)| *v);
        let mut checked = false;
        for sym in symbols {
            let Some(fd) = extrapolated(&e, sym, &point, 2e-3) else { continue };
            let Ok(exact) = e.differentiate(sym).eval_with(&lookup) else { continue };
            checked = true;
            if (exact - fd).abs() > 1e-6 * exact.abs().max(1.0) {
                failures.push(format!("case {case}: d/d{sym} of `{e}` at {point:?}: {exact} vs {fd}"));
            }
        }
        if !checked {
            skipped += 1;
        }
    }
    result("derivatives", cases, skipped, failures)
}

fn diagonal_gramians(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = rng.random_range(2..=20);
        let a = random::metzler_hurwitz(rng, n);
        let m = rng.random_range(1..=3);
        let b = random::sparse_matrix(rng, n, m, 0.0, 1.0);
        let c = random::sparse_matrix(rng, m, n, 0.0, 1.0);
        match solve_diagonal_metzler(&a, &b, &c) {
            Ok(g) => {
                let bb = &b * b.transpose();
                let res = linalg::lambda_max(&(&a * &g.p + &g.p * a.transpose() + &bb));
                let diag = |x: &DMatrix<f64>| x.iter().enumerate().all(|(k, v)| k % (n + 1) == 0 || *v == 0.0);
                if res > RESIDUAL_TOL * linalg::spectral_norm(&bb) || !diag(&g.p) || !diag(&g.q) {
                    failures.push(format!("case {case}: n = {n}, residual {res:e}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: n = {n}: {e}")),
        }
    }
    result("diagonal-gramians", cases, 0, failures)
}

fn balancing(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut failures = Vec::new();
    for case in 0..cases {
        let k = rng.random_range(1..=20);
        let p = random::spd(rng, k, 3.0);
        let q = random::spd(rng, k, 3.0);
        match balance_block(&p, &q) {
            Ok(bal) => {
                let s = DMatrix::from_diagonal(&DVector::from_vec(bal.sigma.clone()));
                let snorm = bal.sigma[0];
                let rp = (&bal.t_inv * &p * bal.t_inv.transpose() - &s).norm();
                let rq = (bal.t.transpose() * &q * &bal.t - &s).norm();
                let sorted = bal.sigma.windows(2).all(|w| w[0] >= w[1]);
                if rp > 1e-8 * snorm || rq > 1e-8 * snorm || !sorted {
                    failures.push(format!("case {case}: k = {k}, residuals {rp:e} {rq:e}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: k = {k}: {e}")),
        }
    }
    result("balancing", cases, 0, failures)
}

fn structure_preservation(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = rng.random_range(2..=8);
        let a = random::metzler_hurwitz(rng, n);
        let b = random::sparse_matrix(rng, n, 1, 0.1, 1.0);
        let c = random::sparse_matrix(rng, 1, n, 0.1, 1.0);
        let k = rng.random_range(2..=n);
        let idx = random::subset(rng, n, k);
        let check = || -> Result<(), String> {
            let part = Partition::new(n, vec![Region { name: "r".into(), indices: idx.clone(), removed: k - 1 }])
                .map_err(|e| e.to_string())?;
            let g = solve_diagonal_metzler(&a, &b, &c).map_err(|e| e.to_string())?;
            let bal = balance_block(
                &linalg::submatrix(&g.p, &idx, &idx),
                &linalg::submatrix(&g.q, &idx, &idx),
            )
            .map_err(|e| e.to_string())?;
            let proj = build_projectors(&part, &OrthantSignature::identity(n), vec![bal]).map_err(|e| e.to_string())?;
            let (w, v) = proj.lumping_vectors(0);
            if w.iter().chain(v.iter()).any(|&x| x < -1e-10) {
                return Err("lumping vectors have negative entries".into());
            }
            let vt = proj.v.transpose();
            let (at, bt, ct) = (&vt * &a * &proj.w, &vt * &b, &c * &proj.w);
            if !is_metzler(&at, 1e-10) || linalg::spectral_abscissa(&at) >= 0.0 {
                return Err("reduced drift is not Metzler Hurwitz".into());
            }
            let err = error_system_norm(&a, &b, &c, &at, &bt, &ct)?;
            if err > proj.error_bound() + 1e-6 {
                return Err(format!("error {err:e} exceeds bound {:e}", proj.error_bound()));
            }
            Ok(())
        };
        if let Err(msg) = check() {
            failures.push(format!("case {case}: n = {n}, region {idx:?}: {msg}"));
        }
    }
    result("structure-preservation", cases, 0, failures)
}

fn error_system_norm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    at: &DMatrix<f64>,
    bt: &DMatrix<f64>,
    ct: &DMatrix<f64>,
) -> Result<f64, String> {
    let (n, r) = (a.nrows(), at.nrows());
    let mut ae = DMatrix::zeros(n + r, n + r);
    ae.view_mut((0, 0), (n, n)).copy_from(a);
    ae.view_mut((n, n), (r, r)).copy_from(at);
    let mut be = DMatrix::zeros(n + r, b.ncols());
    be.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    be.view_mut((n, 0), (r, b.ncols())).copy_from(bt);
    let mut ce = DMatrix::zeros(c.nrows(), n + r);
    ce.view_mut((0, 0), (c.nrows(), n)).copy_from(c);
    ce.view_mut((0, n), (c.nrows(), r)).copy_from(&(-ct));
    hinf_norm(&ae, &be, &ce, 1e-9).map_err(|e| e.to_string())
}

fn integrator(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut failures = Vec::new();
    for case in 0..cases {
        let lambda = rng.random_range(0.1..5.0);
        let omega = rng.random_range(0.0..5.0);
        let t_end = rng.random_range(1.0..10.0);
        let opts = OdeOptions::with_tol(1e-10);
        let sol = integrate(
            |_, y, dy| {
                dy[0] = -lambda * y[0] - omega * y[1];
                dy[1] = omega * y[0] - lambda * y[1];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            t_end,
            &[t_end],
            &opts,
        );
        match sol {
            Ok(s) => {
                let decay = (-lambda * t_end).exp();
                let exact = [decay * (omega * t_end).cos(), decay * (omega * t_end).sin()];
                let y = &s.states[0];
                let err = (y[0] - exact[0]).abs().max((y[1] - exact[1]).abs());
                if err > 1e-8 {
                    failures.push(format!("case {case}: error {err:e} at t = {t_end}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    result("integrator", cases, 0, failures)
}
