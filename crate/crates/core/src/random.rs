//! Seeded random instances shared by the self-test suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::expr::{BinOp, Expr, Func};
use crate::linalg;

/// Random expression tree of depth at most `depth` over `symbols`.
pub fn expression<R: Rng>(rng: &mut R, depth: usize, symbols: &[&str]) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng, symbols);
    }
    match rng.random_range(0..10) {
        0 => Expr::Neg(Box::new(expression(rng, depth - 1, symbols))),
        1 => {
            let f = [Func::Exp, Func::Log, Func::Sqrt][rng.random_range(0..3)];
            Expr::Call(f, Box::new(expression(rng, depth - 1, symbols)))
        }
        k => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][(k - 2) % 5];
            Expr::Binary(
                op,
                Box::new(expression(rng, depth - 1, symbols)),
                Box::new(expression(rng, depth - 1, symbols)),
            )
        }
    }
}

fn leaf<R: Rng>(rng: &mut R, symbols: &[&str]) -> Expr {
    if !symbols.is_empty() && rng.random_bool(0.6) {
        return Expr::Sym(symbols[rng.random_range(0..symbols.len())].to_string());
    }
    let v = match rng.random_range(0..4) {
        0 => rng.random_range(-5i32..=5) as f64,
        1 => rng.random_range(-10.0..10.0),
        2 => rng.random_range(0.0..1.0) * 10f64.powi(rng.random_range(-8..=8)),
        _ => rng.random_range(0.0..3.0),
    };
    Expr::Const(v)
}

/// Expression built from smooth, moderate pieces for derivative checks:
/// rational terms, small integer powers, `exp` of bounded arguments and
/// `log`/`sqrt` of positive shifts.
pub fn smooth_expression<R: Rng>(rng: &mut R, depth: usize, symbols: &[&str]) -> Expr {
    let sym = |rng: &mut R| Expr::Sym(symbols[rng.random_range(0..symbols.len())].to_string());
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.7) { sym(rng) } else { Expr::Const(rng.random_range(0.5..3.0)) };
    }
    let sub = |rng: &mut R| Box::new(smooth_expression(rng, depth - 1, symbols));
    let c = |rng: &mut R| Box::new(Expr::Const(rng.random_range(0.5..2.0)));
    match rng.random_range(0..8) {
        0 => Expr::Binary(BinOp::Add, sub(rng), sub(rng)),
        1 => Expr::Binary(BinOp::Sub, sub(rng), sub(rng)),
        2 => Expr::Binary(BinOp::Mul, sub(rng), sub(rng)),
        3 => {
            // a / (c + b^2)
            let den = Expr::Binary(
                BinOp::Add,
                c(rng),
                Box::new(Expr::Binary(BinOp::Pow, sub(rng), Box::new(Expr::Const(2.0)))),
            );
            Expr::Binary(BinOp::Div, sub(rng), Box::new(den))
        }
        4 => Expr::Binary(BinOp::Pow, sub(rng), Box::new(Expr::Const(rng.random_range(1..=3) as f64))),
        5 => {
            // exp(-b^2 / c)
            let arg = Expr::Neg(Box::new(Expr::Binary(
                BinOp::Div,
                Box::new(Expr::Binary(BinOp::Pow, sub(rng), Box::new(Expr::Const(2.0)))),
                c(rng),
            )));
            Expr::Call(Func::Exp, Box::new(arg))
        }
        6 => {
            let arg = Expr::Binary(
                BinOp::Add,
                c(rng),
                Box::new(Expr::Binary(BinOp::Pow, sub(rng), Box::new(Expr::Const(2.0)))),
            );
            Expr::Call(if rng.random_bool(0.5) { Func::Log } else { Func::Sqrt }, Box::new(arg))
        }
        _ => Expr::Neg(sub(rng)),
    }
}

/// Smallest distance to a domain boundary met while evaluating `e`:
/// `|denominator|`, `log`/`sqrt` arguments and bases of non-integer powers.
/// `None` if evaluation fails.
pub fn domain_margin<F>(e: &Expr, lookup: &F) -> Option<f64>
where
    F: Fn(&str) -> Option<f64>,
{
    fn walk<F: Fn(&str) -> Option<f64>>(e: &Expr, lookup: &F, margin: &mut f64) -> Option<f64> {
        match e {
            Expr::Const(c) => Some(*c),
            Expr::Sym(s) => lookup(s),
            Expr::Neg(a) => walk(a, lookup, margin).map(|v| -v),
            Expr::Call(f, a) => {
                let v = walk(a, lookup, margin)?;
                match f {
                    Func::Exp => Some(v.exp()),
                    Func::Log => {
                        *margin = margin.min(v);
                        (v > 0.0).then(|| v.ln())
                    }
                    Func::Sqrt => {
                        *margin = margin.min(v);
                        (v >= 0.0).then(|| v.sqrt())
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = walk(a, lookup, margin)?;
                let y = walk(b, lookup, margin)?;
                match op {
                    BinOp::Add => Some(x + y),
                    BinOp::Sub => Some(x - y),
                    BinOp::Mul => Some(x * y),
                    BinOp::Div => {
                        *margin = margin.min(y.abs());
                        (y != 0.0).then(|| x / y)
                    }
                    BinOp::Pow => {
                        if y.fract() != 0.0 {
                            *margin = margin.min(x);
                        } else if y < 0.0 {
                            *margin = margin.min(x.abs());
                        }
                        let v = x.powf(y);
                        v.is_finite().then_some(v)
                    }
                }
            }
        }
    }
    let mut margin = f64::INFINITY;
    let v = walk(e, lookup, &mut margin)?;
    v.is_finite().then_some(margin)
}

/// Random Metzler Hurwitz matrix of size `n`: random sparsity, nonnegative
/// off-diagonals, shifted so the spectral abscissa is at most `-0.1`.
pub fn metzler_hurwitz<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let density = rng.random_range(0.2..1.0);
    let mut a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -rng.random_range(0.0..2.0)
        } else if rng.random_bool(density) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    let margin = rng.random_range(0.1..1.0);
    let alpha = linalg::spectral_abscissa(&a);
    if alpha > -margin {
        a -= DMatrix::identity(n, n) * (alpha + margin);
    }
    a
}

/// Random `rows × cols` matrix with entries in `[lo, hi)` and about a third
/// of them zero, never entirely zero.
pub fn sparse_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(0.33) {
            0.0
        } else {
            rng.random_range(lo..hi)
        }
    });
    if rows > 0 && cols > 0 && m.iter().all(|&v| v == 0.0) {
        m[(rng.random_range(0..rows), rng.random_range(0..cols))] = hi;
    }
    m
}

/// Random symmetric positive definite matrix with condition number at most
/// about `10^spread`.
pub fn spd<R: Rng>(rng: &mut R, k: usize, spread: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let d = DVector::from_fn(k, |_, _| 10f64.powf(rng.random_range(0.0..spread)));
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    linalg::sym(&m)
}

/// Random symmetric positive definite matrix with positive entries.
pub fn positive_spd<R: Rng>(rng: &mut R, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.05..1.0));
    let m = &g * g.transpose() + DMatrix::identity(k, k) * rng.random_range(0.01..1.0);
    linalg::sym(&m)
}

/// Random index subset of `0..n` of size `k`, sorted.
pub fn subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}
