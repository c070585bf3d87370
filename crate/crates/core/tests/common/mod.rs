//! Model builders and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netred::expr::{BinOp, Expr};
use netred::model::{NetworkModel, Species};
use rand::Rng;

pub fn sym(name: &str) -> Expr {
    Expr::Sym(name.to_string())
}

pub fn num(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms.into_iter().reduce(|a, b| bin(BinOp::Add, a, b)).unwrap_or(num(0.0))
}

pub fn species(n: usize, initial: &[f64]) -> Vec<Species> {
    (0..n).map(|i| Species { name: format!("x{}", i + 1), initial: initial[i] }).collect()
}

/// `dx/dt = A x + B u` written out as expressions.
pub fn linear_model(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, x0: &[f64], u: &[f64]) -> NetworkModel {
    let n = a.nrows();
    let rhs = (0..n)
        .map(|i| {
            let mut terms: Vec<Expr> = (0..n)
                .filter(|&j| a[(i, j)] != 0.0)
                .map(|j| bin(BinOp::Mul, num(a[(i, j)]), sym(&format!("x{}", j + 1))))
                .collect();
            terms.extend(
                (0..b.ncols())
                    .filter(|&k| b[(i, k)] != 0.0)
                    .map(|k| bin(BinOp::Mul, num(b[(i, k)]), sym(&format!("u{}", k + 1)))),
            );
            sum(terms)
        })
        .collect();
    let inputs = u.iter().enumerate().map(|(k, v)| (format!("u{}", k + 1), *v)).collect();
    NetworkModel::new(species(n, x0), vec![], inputs, rhs, Some(c.clone())).expect("valid linear model")
}

/// Saturating interaction network
/// `dx_i/dt = k_i + b_i u + Σ_j w_ij h_ij(x_j) - d_i x_i` where `h_ij` is
/// `x/(1+x)` when `signs[i]·signs[j] = 1` and `1/(1+x)` otherwise. All
/// `w_ij > 0`, so the model is monotone with respect to `signs` and its
/// interaction graph is complete. `d_i > Σ_j w_ij` makes it contractive.
pub fn signed_model<R: Rng>(rng: &mut R, signs: &[i8]) -> NetworkModel {
    let n = signs.len();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut terms = vec![num(rng.random_range(0.1..1.0)), bin(BinOp::Mul, num(rng.random_range(0.0..1.0)), sym("u"))];
        let mut total = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = rng.random_range(0.1..1.0);
            total += w;
            let xj = sym(&format!("x{}", j + 1));
            let den = bin(BinOp::Add, num(1.0), xj.clone());
            let h = if signs[i] * signs[j] > 0 { bin(BinOp::Div, xj, den) } else { bin(BinOp::Div, num(1.0), den) };
            terms.push(bin(BinOp::Mul, num(w), h));
        }
        let d = total + rng.random_range(0.5..2.0);
        rhs.push(bin(BinOp::Sub, sum(terms), bin(BinOp::Mul, num(d), sym(&format!("x{}", i + 1)))));
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let inputs = vec![("u".to_string(), rng.random_range(0.0..1.0))];
    NetworkModel::new(species(n, &x0), vec![], inputs, rhs, None).expect("valid model")
}

/// Cooperative instance of [`signed_model`].
pub fn cooperative_model<R: Rng>(rng: &mut R, n: usize) -> NetworkModel {
    signed_model(rng, &vec![1; n])
}

/// Central five-point Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, rows: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut j = DMatrix::zeros(rows, x.len());
    for k in 0..x.len() {
        let h = 1e-3 * x[k].abs().max(1.0);
        let at = |s: f64| {
            let mut y = x.clone();
            y[k] += s;
            f(&y)
        };
        let d = (at(h) - at(-h)) * 8.0 - (at(2.0 * h) - at(-2.0 * h));
        j.set_column(k, &(d / (12.0 * h)));
    }
    j
}

/// Largest eigenvalue modulus of an entrywise positive matrix by power
/// iteration.
pub fn perron_root(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let next = w.norm();
        v = w / next;
        if (next - lambda).abs() <= 1e-15 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Stacked realization of `G - G_r`.
pub fn error_system(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    ar: &DMatrix<f64>,
    br: &DMatrix<f64>,
    cr: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, r, m, p) = (a.nrows(), ar.nrows(), b.ncols(), c.nrows());
    let mut ae = DMatrix::zeros(n + r, n + r);
    ae.view_mut((0, 0), (n, n)).copy_from(a);
    ae.view_mut((n, n), (r, r)).copy_from(ar);
    let mut be = DMatrix::zeros(n + r, m);
    be.view_mut((0, 0), (n, m)).copy_from(b);
    be.view_mut((n, 0), (r, m)).copy_from(br);
    let mut ce = DMatrix::zeros(p, n + r);
    ce.view_mut((0, 0), (p, n)).copy_from(c);
    ce.view_mut((0, n), (p, r)).copy_from(&(-cr));
    (ae, be, ce)
}

/// `σ_max(C (iω - A)⁻¹ B)` with a real 2n×2n solve, independent of the
/// complex arithmetic in the library.
pub fn gain(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let m = b.ncols();
    // (iω - A)(X + iY) = B  <=>  [-A  -ωI; ωI  -A] [X; Y] = [B; 0]
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a));
    big.view_mut((n, n), (n, n)).copy_from(&(-a));
    for i in 0..n {
        big[(i, n + i)] = -omega;
        big[(n + i, i)] = omega;
    }
    let mut rhs = DMatrix::zeros(2 * n, m);
    rhs.view_mut((0, 0), (n, m)).copy_from(b);
    let sol = big.lu().solve(&rhs).expect("iω - A is invertible");
    let (x, y) = (sol.rows(0, n).into_owned(), sol.rows(n, n).into_owned());
    let (gr, gi) = (c * x, c * y);
    // singular values of G = Gr + i Gi from the real embedding [Gr -Gi; Gi Gr]
    let (p, q) = (gr.nrows(), gr.ncols());
    let mut emb = DMatrix::zeros(2 * p, 2 * q);
    emb.view_mut((0, 0), (p, q)).copy_from(&gr);
    emb.view_mut((0, q), (p, q)).copy_from(&(-&gi));
    emb.view_mut((p, 0), (p, q)).copy_from(&gi);
    emb.view_mut((p, q), (p, q)).copy_from(&gr);
    emb.singular_values().max()
}

/// Maximum of [`gain`] over `points` frequencies, log-spaced on
/// `[1e-4, 1e4]·scale` plus `ω = 0`.
pub fn sweep_peak(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, points: usize) -> f64 {
    let scale = a.norm().max(1e-3);
    let mut best = gain(a, b, c, 0.0);
    for k in 0..points {
        let s = -4.0 + 8.0 * k as f64 / (points - 1) as f64;
        best = best.max(gain(a, b, c, scale * 10f64.powf(s)));
    }
    best
}

/// Solution of `z' = M z + q` from `z0` at time `t`, via the exponential of
/// the augmented matrix `[[M, q], [0, 0]]`.
pub fn affine_flow(m: &DMatrix<f64>, q: &DVector<f64>, z0: &DVector<f64>, t: f64) -> DVector<f64> {
    let k = m.nrows();
    let mut aug = DMatrix::zeros(k + 1, k + 1);
    aug.view_mut((0, 0), (k, k)).copy_from(&(m * t));
    aug.view_mut((0, k), (k, 1)).copy_from(&(q * t));
    let e = aug.exp();
    let mut z = DVector::zeros(k + 1);
    z.rows_mut(0, k).copy_from(z0);
    z[k] = 1.0;
    (e * z).rows(0, k).into_owned()
}

/// Samples [`affine_flow`] on `times` for a right-continuous input switch
/// from `q0` to `q1` at `t_switch`.
pub fn switched_flow(
    m: &DMatrix<f64>,
    q0: &DVector<f64>,
    q1: &DVector<f64>,
    t_switch: f64,
    z0: &DVector<f64>,
    times: &[f64],
) -> Vec<DVector<f64>> {
    let z_switch = affine_flow(m, q0, z0, t_switch);
    times
        .iter()
        .map(|&t| if t < t_switch { affine_flow(m, q0, z0, t) } else { affine_flow(m, q1, &z_switch, t - t_switch) })
        .collect()
}

/// Richardson-extrapolated five-point derivative of `e` in `sym` at `point`.
/// `None` when a stencil point lies within `margin` of a domain boundary.
pub fn fd_derivative(e: &Expr, sym: &str, point: &[(&str, f64)], margin: f64) -> Option<f64> {
    let eval = |shift: f64| -> Option<f64> {
        let look = |s: &str| point.iter().find(|(n, _)| *n == s).map(|(_, v)| if s == sym { v + shift } else { *v });
        if netred::random::domain_margin(e, &look)? < margin {
            return None;
        }
        e.eval_with(&look).ok().filter(|v| v.is_finite())
    };
    let stencil = |h: f64| -> Option<f64> {
        Some((8.0 * (eval(h)? - eval(-h)?) - (eval(2.0 * h)? - eval(-2.0 * h)?)) / (12.0 * h))
    };
    let (coarse, fine) = (stencil(2e-3)?, stencil(1e-3)?);
    Some((16.0 * fine - coarse) / 15.0)
}

/// Largest deviation, in units of `tol·max(|y|, 1)`, of the reduction and
/// truncation outputs from their linear oracles on a random monotone linear
/// system with a step in the input.
pub fn linear_method_errors<R: Rng>(r: &mut R, tol: f64) -> Result<(f64, f64), String> {
    use netred::analysis::Region;
    use netred::pipeline::{reduce, ReductionSettings};
    use netred::simulate::{simulate_reduction, simulate_truncation, InputSignal, SimOptions};

    let n = r.random_range(3..=6);
    let a = netred::random::metzler_hurwitz(r, n);
    let b = netred::random::sparse_matrix(r, n, 1, 0.1, 1.0);
    let c = netred::random::sparse_matrix(r, 2, n, 0.1, 1.0);
    let u_ss = DVector::from_element(1, r.random_range(0.5..2.0));
    let x_eq = -a.clone().lu().solve(&(&b * &u_ss)).ok_or("singular A")?;
    let x0: Vec<f64> = x_eq.iter().map(|v| v + r.random_range(0.0..1.0)).collect();
    let model = linear_model(&a, &b, &c, &x0, u_ss.as_slice());

    let k = r.random_range(2..=n);
    let idx = netred::random::subset(r, n, k);
    let regions = vec![Region { name: "r".into(), indices: idx, removed: r.random_range(1..k) }];
    let red = reduce(&model, &u_ss, &model.initial_state(), regions, &ReductionSettings::default())
        .map_err(|e| e.to_string())?;
    let p = &red.projection;
    let (w, v, wr, vr) = (&p.w, &p.v, &p.w_r, &p.v_r);
    let x_ss = &red.steady.x;
    let x0 = model.initial_state();
    let du = DVector::from_element(1, r.random_range(-0.5..0.5));
    let t_switch = 2.0;
    let input = InputSignal::piecewise(vec![t_switch], vec![u_ss.clone(), &u_ss + &du]).map_err(|e| e.to_string())?;
    let opts = SimOptions { tol, points: 51 };
    let t_end = 6.0;
    let z0 = v.transpose() * (&x0 - x_ss);
    let scaled = |y: &[f64], yo: &DVector<f64>| {
        y.iter().zip(yo.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs() / (tol * q.abs().max(1.0))))
    };

    // truncation: z' = VᵀAW z + VᵀB δu
    let at = v.transpose() * &a * w;
    let bt = v.transpose() * &b;
    let traj = simulate_truncation(&model, p, x_ss, &x0, &input, t_end, &opts).map_err(|e| e.to_string())?;
    let zs = switched_flow(&at, &DVector::zeros(at.nrows()), &(&bt * &du), t_switch, &z0, &traj.times);
    let mut trunc = 0.0f64;
    for (y, z) in traj.outputs.iter().zip(&zs) {
        trunc = trunc.max(scaled(y, &(&c * (x_ss + w * z))));
    }

    // reduction: z_r eliminated from V_rᵀ(A(W z + W_r z_r) + B δu) = 0
    let kinv = (vr.transpose() * &a * wr).try_inverse().ok_or("singular V_rᵀAW_r")?;
    let elim_z = -&kinv * vr.transpose() * &a * w;
    let elim_u = -&kinv * vr.transpose() * &b;
    let m = v.transpose() * &a * (w + wr * &elim_z);
    let nu = v.transpose() * (&a * wr * &elim_u + &b);
    let traj = simulate_reduction(&model, p, x_ss, &x0, &input, t_end, &opts).map_err(|e| e.to_string())?;
    let zs = switched_flow(&m, &DVector::zeros(m.nrows()), &(&nu * &du), t_switch, &z0, &traj.times);
    let mut reduc = 0.0f64;
    for ((t, y), z) in traj.times.iter().zip(&traj.outputs).zip(&zs) {
        let d = if *t < t_switch { DVector::zeros(1) } else { du.clone() };
        let zr = &elim_z * z + &elim_u * d;
        reduc = reduc.max(scaled(y, &(&c * (x_ss + w * z + wr * zr))));
    }
    Ok((reduc, trunc))
}

/// Frequency response of a single-input single-output system evaluated
/// through a Hessenberg form, `O(n²)` per frequency.
pub struct SisoResponse {
    n: usize,
    /// Row-major upper Hessenberg matrix.
    h: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl SisoResponse {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Self {
        assert!(b.ncols() == 1 && c.nrows() == 1, "single input and output");
        let n = a.nrows();
        let (q, h) = a.clone().hessenberg().unpack();
        SisoResponse {
            n,
            h: (0..n * n).map(|k| h[(k / n, k % n)]).collect(),
            b: (q.transpose() * b.column(0)).iter().copied().collect(),
            c: (c * &q).iter().copied().collect(),
        }
    }

    /// `c (iω - H)⁻¹ b` by Gaussian elimination with adjacent-row pivoting.
    pub fn response(&self, omega: f64) -> num_complex::Complex64 {
        use num_complex::Complex64 as C;
        let n = self.n;
        let mut m: Vec<C> = self.h.iter().map(|&v| C::new(-v, 0.0)).collect();
        for i in 0..n {
            m[i * n + i].im = omega;
        }
        let mut x: Vec<C> = self.b.iter().map(|&v| C::new(v, 0.0)).collect();
        for k in 0..n.saturating_sub(1) {
            let (top, bot) = (k * n, (k + 1) * n);
            if m[bot + k].norm_sqr() > m[top + k].norm_sqr() {
                for j in k..n {
                    m.swap(top + j, bot + j);
                }
                x.swap(k, k + 1);
            }
            let f = m[bot + k] / m[top + k];
            for j in k..n {
                let v = m[top + j];
                m[bot + j] -= f * v;
            }
            let v = x[k];
            x[k + 1] -= f * v;
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= m[k * n + j] * x[j];
            }
            x[k] = s / m[k * n + k];
        }
        x.iter().zip(&self.c).map(|(xi, ci)| xi * *ci).sum()
    }
}

/// `|G(iω) - G_r(iω)|` for single-input single-output `G`, `G_r`.
pub struct ErrorResponse {
    full: SisoResponse,
    reduced: SisoResponse,
    scale: f64,
}

impl ErrorResponse {
    pub fn new(
        (a, b, c): (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>),
        (ar, br, cr): (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>),
    ) -> Self {
        ErrorResponse { full: SisoResponse::new(a, b, c), reduced: SisoResponse::new(ar, br, cr), scale: a.norm().max(1e-3) }
    }

    pub fn gain(&self, omega: f64) -> f64 {
        (self.full.response(omega) - self.reduced.response(omega)).norm()
    }

    /// Peak over `points` log-spaced frequencies on `[1e-4, 1e4]·‖A‖_F`
    /// plus `ω = 0`.
    pub fn sweep_peak(&self, points: usize) -> f64 {
        (0..points)
            .map(|k| self.scale * 10f64.powf(-4.0 + 8.0 * k as f64 / (points - 1) as f64))
            .fold(self.gain(0.0), |best, w| best.max(self.gain(w)))
    }
}
