mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use netred::analysis::{
    detect_orthant, find_steady_state, is_metzler, OrthantResult, OrthantSignature, Partition, Region,
};
use netred::artifact::{ArtifactFile, ReductionArtifact};
use netred::balance::{balance_block, build_projectors, hinf_norm};
use netred::expr::{parse_expression, BinOp, Expr, Func};
use netred::gramian::{
    diagonal_stability_scaling, solve_diagonal_metzler, solve_structured, verify_gramians, BlockPattern,
    SolveOptions, RESIDUAL_TOL,
};
use netred::linalg;
use netred::model::{NetworkModel, Species, Stoichiometry};
use netred::ode::{integrate, OdeOptions};
use netred::pipeline::{orthant_samples, reduce, ReductionSettings};
use netred::random;
use netred::simulate::{
    simulate_full, simulate_qssa, simulate_reduction, simulate_truncation, InputSignal, SimOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Expressions

fn symbol_name() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_]{0,5}".prop_filter("reserved", |s| !matches!(s.as_str(), "exp" | "log" | "sqrt" | "pow"))
}

fn constant() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-20i32..20).prop_map(f64::from),
        -1e3..1e3f64,
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
    ]
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![constant().prop_map(Expr::Const), symbol_name().prop_map(Expr::Sym)];
    leaf.prop_recursive(8, 256, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        let func = prop_oneof![Just(Func::Exp), Just(Func::Log), Just(Func::Sqrt)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (func, inner.clone()).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            (op, inner.clone(), inner).prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn depth(e: &Expr) -> usize {
    match e {
        Expr::Const(_) | Expr::Sym(_) => 0,
        Expr::Neg(a) | Expr::Call(_, a) => 1 + depth(a),
        Expr::Binary(_, a, b) => 1 + depth(a).max(depth(b)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printing_round_trips(e in expr_tree()) {
        prop_assert!(depth(&e) <= 8);
        let text = e.to_string();
        let back = parse_expression(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "printed as {}", text);
    }
}

/// `|a - b| <= rel·max(|a|, 1)`
fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivatives_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let symbols = ["x", "y", "z"];
        let e = random::smooth_expression(&mut r, 5, &symbols);
        for _ in 0..100 {
            let point: Vec<(&str, f64)> = symbols.iter().map(|s| (*s, r.random_range(-3.0..3.0))).collect();
            let look = |name: &str| point.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
            for s in symbols {
                let Some(fd) = fd_derivative(&e, s, &point, 1e-3) else { continue };
                let exact = e.differentiate(s).eval_with(&look).unwrap();
                prop_assert!(close(exact, fd, 1e-6), "d/d{s} of {e} at {point:?}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn stoichiometric_expansion_matches_direct_sum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..6);
        let m = r.random_range(1..8);
        let names: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let fluxes: Vec<Expr> = (0..m).map(|_| random::smooth_expression(&mut r, 3, &refs)).collect();
        let matrix: Vec<Vec<i64>> = (0..n).map(|_| (0..m).map(|_| r.random_range(-3..=3)).collect()).collect();
        let model = NetworkModel::from_stoichiometry(
            species(n, &vec![1.0; n]),
            vec![],
            vec![],
            Stoichiometry { matrix: matrix.clone(), fluxes: fluxes.clone() },
            None,
        ).unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(n, |_, _| r.random_range(0.0..3.0));
            let look = |name: &str| names.iter().position(|q| q == name).map(|i| x[i]);
            let f: Vec<f64> = fluxes.iter().map(|e| e.eval_with(&look).unwrap()).collect();
            let rhs = model.rhs(&x, &DVector::zeros(0)).unwrap();
            for i in 0..n {
                let direct: f64 = (0..m).map(|j| matrix[i][j] as f64 * f[j]).sum();
                let scale: f64 = (0..m).map(|j| (matrix[i][j] as f64 * f[j]).abs()).sum::<f64>().max(1.0);
                prop_assert!((rhs[i] - direct).abs() <= 1e-12 * scale, "{} vs {direct}", rhs[i]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Network analysis

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn steady_state_is_a_fixed_point_of_newton(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..8);
        let model = cooperative_model(&mut r, n);
        let u = model.steady_input();
        let tol = 1e-10;
        let ss = find_steady_state(&model, &u, &model.initial_state(), tol, 100).unwrap();
        let f = model.rhs(&ss.x, &u).unwrap();
        prop_assert!(f.amax() <= tol);
        let again = find_steady_state(&model, &u, &ss.x, tol, 100).unwrap();
        prop_assert!(again.iterations <= 1);
    }

    #[test]
    fn symbolic_jacobians_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..5);
        let mut symbols: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
        symbols.push("u".into());
        let refs: Vec<&str> = symbols.iter().map(String::as_str).collect();
        let rhs: Vec<Expr> = (0..n).map(|_| random::smooth_expression(&mut r, 4, &refs)).collect();
        let model = NetworkModel::new(species(n, &vec![1.0; n]), vec![], vec![("u".into(), 0.5)], rhs, None).unwrap();
        let x = DVector::from_fn(n, |_, _| r.random_range(-2.0..2.0));
        let u = DVector::from_element(1, r.random_range(-2.0..2.0));
        let ja = model.jacobian_x(&x, &u).unwrap();
        let jf = fd_jacobian(|y| model.rhs(y, &u).unwrap(), &x, n);
        for (a, b) in ja.iter().zip(jf.iter()) {
            prop_assert!(close(*a, *b, 1e-6), "{ja} vs {jf}");
        }
        let ba = model.jacobian_u(&x, &u).unwrap();
        let bf = fd_jacobian(|v| model.rhs(&x, v).unwrap(), &u, n);
        for (a, b) in ba.iter().zip(bf.iter()) {
            prop_assert!(close(*a, *b, 1e-6), "{ba} vs {bf}");
        }
    }

    #[test]
    fn detected_signature_conjugates_to_metzler(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..7);
        let signs: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        let model = signed_model(&mut r, &signs);
        let u = model.steady_input();
        let samples = orthant_samples(&[model.initial_state()], 30, seed);
        let OrthantResult::Monotone(sig) = detect_orthant(&model, &u, &samples).unwrap() else {
            return Err(TestCaseError::fail("monotone model reported infeasible"));
        };
        prop_assert!(sig.equivalent(&OrthantSignature::from_signs(&signs)), "{sig} vs {signs:?}");
        for x in &samples {
            let j = sig.conjugate(&model.jacobian_x(x, &u).unwrap());
            prop_assert!(is_metzler(&j, 1e-10));
        }
    }

    #[test]
    fn detection_ignores_sample_order(seed in any::<u64>(), monotone in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..6);
        let model = if monotone {
            let signs: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
            signed_model(&mut r, &signs)
        } else {
            // random smooth right-hand sides, usually not monotone
            let names: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let rhs = (0..n).map(|_| random::smooth_expression(&mut r, 3, &refs)).collect();
            NetworkModel::new(species(n, &vec![1.0; n]), vec![], vec![], rhs, None).unwrap()
        };
        let u = model.steady_input();
        let samples = orthant_samples(&[model.initial_state()], 20, seed);
        let mut shuffled = samples.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let a = detect_orthant(&model, &u, &samples).unwrap();
        let b = detect_orthant(&model, &u, &shuffled).unwrap();
        match (a, b) {
            (OrthantResult::Monotone(s), OrthantResult::Monotone(t)) => prop_assert!(s.equivalent(&t)),
            (OrthantResult::Infeasible(_), OrthantResult::Infeasible(_)) => {}
            (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Gramians

fn metzler_system(r: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a = random::metzler_hurwitz(r, n);
    let m = r.random_range(1..=3);
    let p = r.random_range(1..=3);
    (a, random::sparse_matrix(r, n, m, 0.0, 1.0), random::sparse_matrix(r, p, n, 0.0, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn diagonal_gramians_scale_quadratically(seed in any::<u64>(), alpha in 0.01..100.0f64) {
        let mut r = rng(seed);
        let n = r.random_range(2..=12);
        let (a, b, c) = metzler_system(&mut r, n);
        let g1 = solve_diagonal_metzler(&a, &b, &c).unwrap();
        let g2 = solve_diagonal_metzler(&a, &(&b * alpha), &c).unwrap();
        let expected = &g1.p * (alpha * alpha);
        prop_assert!((&g2.p - &expected).amax() <= 1e-10 * expected.amax());
        prop_assert!((&g2.q - &g1.q).amax() <= 1e-12 * g1.q.amax());
    }

    #[test]
    fn scaling_vectors_give_an_m_matrix_certificate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=20);
        let a = random::metzler_hurwitz(&mut r, n);
        let (u, v) = diagonal_stability_scaling(&a).unwrap();
        prop_assert!(u.iter().chain(v.iter()).all(|&x| x > 0.0));
        let m = -&a;
        let d = DMatrix::from_diagonal(&v.component_div(&u));
        let qsym = &d * &m + m.transpose() * &d;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert!(qsym[(i, j)] <= 0.0);
                }
            }
        }
        prop_assert!((qsym * &u).iter().all(|&x| x > 0.0));
    }

    #[test]
    fn structured_certificates_survive_recomputation(seed in any::<u64>(), min_trace in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let (a, b, c) = metzler_system(&mut r, n);
        let k = r.random_range(1..=n);
        let block = random::subset(&mut r, n, k);
        let mut groups = vec![block.clone()];
        groups.extend((0..n).filter(|i| !block.contains(i)).map(|i| vec![i]));
        let pattern = BlockPattern::from_blocks(n, groups).unwrap();
        let opts = SolveOptions { min_trace, ..SolveOptions::default() };
        let Ok(g) = solve_structured(&a, &b, &c, &pattern, &opts) else { return Ok(()) };
        prop_assume!(g.certificate.passed);
        let again = verify_gramians(&a, &b, &c, &g.p, &g.q, &pattern, RESIDUAL_TOL);
        prop_assert!(again.passed);
        // independent eigenvalue check of both inequalities
        let lp = (&a * &g.p + &g.p * a.transpose() + &b * b.transpose()).symmetric_eigen().eigenvalues.max();
        let lq = (&g.q * &a + a.transpose() * &g.q + c.transpose() * &c).symmetric_eigen().eigenvalues.max();
        let scale = a.norm() * g.p.norm().max(g.q.norm()) + (&b * b.transpose()).norm() + (c.transpose() * &c).norm();
        prop_assert!(lp <= 1e-8 * scale && lq <= 1e-8 * scale, "{lp} {lq}");
        prop_assert!(g.p.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        prop_assert!(pattern.violation(&g.p) == 0.0 && pattern.violation(&g.q) == 0.0);
    }
}

// ---------------------------------------------------------------------------
// Balancing and projection

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn balancing_diagonalizes_both_gramians(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.random_range(1..=20);
        let p = random::spd(&mut r, k, 4.0);
        let q = random::spd(&mut r, k, 4.0);
        let bal = balance_block(&p, &q).unwrap();
        let s = DMatrix::from_diagonal(&DVector::from_vec(bal.sigma.clone()));
        let smax = bal.sigma[0];
        let rp = (&bal.t_inv * &p * bal.t_inv.transpose() - &s).norm();
        prop_assert!(rp <= 1e-8 * smax, "k = {k}, residual {rp:e}, sigma {:?}", bal.sigma);
        prop_assert!((bal.t.transpose() * &q * &bal.t - &s).norm() <= 1e-8 * smax);
        prop_assert!(bal.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((&bal.t * &bal.t_inv - DMatrix::identity(k, k)).amax() < 1e-8);
    }

    #[test]
    fn perron_vectors_are_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.random_range(1..=20);
        let p = random::positive_spd(&mut r, k);
        let q = random::positive_spd(&mut r, k);
        let bal = balance_block(&p, &q).unwrap();
        prop_assert!(bal.irreducible_nonneg);
        let rho = perron_root(&(&p * &q));
        prop_assert!((bal.sigma[0].powi(2) - rho).abs() <= 1e-8 * rho);
        prop_assert!(bal.t.column(0).iter().all(|&x| x >= -1e-10));
        prop_assert!(bal.t_inv.row(0).iter().all(|&x| x >= -1e-10));
    }

    #[test]
    fn projectors_are_biorthogonal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=12);
        let mut free: Vec<usize> = (0..n).collect();
        let mut regions = Vec::new();
        while !free.is_empty() && r.random_bool(0.7) {
            let k = r.random_range(1..=free.len().min(5));
            let pick = random::subset(&mut r, free.len(), k);
            let idx: Vec<usize> = pick.iter().map(|&i| free[i]).collect();
            free.retain(|i| !idx.contains(i));
            let removed = r.random_range(0..k);
            regions.push(Region { name: format!("r{}", regions.len()), indices: idx, removed });
        }
        let part = Partition::new(n, regions.clone()).unwrap();
        let signs: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        let balances = regions
            .iter()
            .map(|reg| {
                let k = reg.indices.len();
                balance_block(&random::spd(&mut r, k, 2.0), &random::spd(&mut r, k, 2.0)).unwrap()
            })
            .collect();
        let proj = build_projectors(&part, &OrthantSignature::from_signs(&signs), balances).unwrap();
        let m = proj.w.ncols();
        prop_assert!((proj.v.transpose() * &proj.w - DMatrix::identity(m, m)).amax() <= 1e-10);
        prop_assert!((proj.v.transpose() * &proj.w_r).amax() <= 1e-10);
        prop_assert!((proj.v_r.transpose() * &proj.w).amax() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn one_state_lumping_preserves_structure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let a = random::metzler_hurwitz(&mut r, n);
        let b = random::sparse_matrix(&mut r, n, 1, 0.0, 1.0);
        let c = random::sparse_matrix(&mut r, 1, n, 0.0, 1.0);
        let k = r.random_range(2..=n);
        let idx = random::subset(&mut r, n, k);
        let part = Partition::single(n, idx.clone(), k - 1).unwrap();
        let g = solve_diagonal_metzler(&a, &b, &c).unwrap();
        let bal = balance_block(&linalg::submatrix(&g.p, &idx, &idx), &linalg::submatrix(&g.q, &idx, &idx)).unwrap();
        let proj = build_projectors(&part, &OrthantSignature::identity(n), vec![bal]).unwrap();
        let (w, v) = proj.lumping_vectors(0);
        prop_assert!(w.iter().chain(v.iter()).all(|&x| x >= -1e-10));
        let vt = proj.v.transpose();
        let (at, bt, ct) = (&vt * &a * &proj.w, &vt * &b, &c * &proj.w);
        prop_assert!(is_metzler(&at, 1e-10));
        prop_assert!(linalg::spectral_abscissa(&at) < 0.0);
        let (ae, be, ce) = error_system(&a, &b, &c, &at, &bt, &ct);
        let err = hinf_norm(&ae, &be, &ce, 1e-9).unwrap();
        prop_assert!(err <= proj.error_bound() + 1e-6, "{err} > {}", proj.error_bound());
        prop_assert!(err >= sweep_peak(&ae, &be, &ce, 200) * (1.0 - 1e-6));
    }
}

// ---------------------------------------------------------------------------
// Simulation

#[test]
fn integrator_converges_at_fifth_order() {
    // y'' + 0.4 y' + 4 y = 0 as a first-order system
    let (zeta, w0) = (0.1f64, 2.0f64);
    let wd = w0 * (1.0 - zeta * zeta).sqrt();
    let t_end = 10.0;
    let exact = {
        let e = (-zeta * w0 * t_end).exp();
        let y = e * ((wd * t_end).cos() + zeta * w0 / wd * (wd * t_end).sin());
        let dy = -e * w0 * w0 / wd * (wd * t_end).sin();
        [y, dy]
    };
    let mut pts = Vec::new();
    for k in 0..8 {
        let tol = 1e-6 * 0.5f64.powi(2 * k);
        let opts = OdeOptions { rtol: tol, atol: tol, h0: None, ..OdeOptions::default() };
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -w0 * w0 * y[0] - 2.0 * zeta * w0 * y[1];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            t_end,
            &[t_end],
            &opts,
        )
        .unwrap();
        let y = &sol.states[0];
        let err = (y[0] - exact[0]).abs().max((y[1] - exact[1]).abs());
        pts.push(((sol.stats.accepted as f64).ln(), err.ln()));
    }
    // least-squares slope of log(error) against log(steps)
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let cov: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = cov / var;
    assert!((-6.0..=-4.0).contains(&slope), "observed order {}", -slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn projected_methods_match_linear_oracles(seed in any::<u64>()) {
        let (reduction, truncation) = linear_method_errors(&mut rng(seed), 1e-8).map_err(TestCaseError::fail)?;
        prop_assert!(reduction <= 10.0, "reduction off by {reduction} tolerances");
        prop_assert!(truncation <= 10.0, "truncation off by {truncation} tolerances");
    }

    #[test]
    fn all_methods_rest_at_equilibrium(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let model = cooperative_model(&mut r, n);
        let u = model.steady_input();
        let k = r.random_range(1..=n);
        let idx = random::subset(&mut r, n, k);
        let regions = vec![Region { name: "r".into(), indices: idx.clone(), removed: r.random_range(0..k) }];
        let red = reduce(&model, &u, &model.initial_state(), regions, &ReductionSettings::default()).unwrap();
        let x_ss = red.steady.x.clone();
        let input = InputSignal::constant(u);
        let opts = SimOptions { tol: 1e-9, points: 21 };
        let runs = [
            simulate_full(&model, &x_ss, &input, 10.0, &opts).unwrap(),
            simulate_reduction(&model, &red.projection, &x_ss, &x_ss, &input, 10.0, &opts).unwrap(),
            simulate_truncation(&model, &red.projection, &x_ss, &x_ss, &input, 10.0, &opts).unwrap(),
            simulate_qssa(&model, &idx, &x_ss, &input, 10.0, &opts).unwrap(),
        ];
        for traj in &runs {
            for x in &traj.states {
                for (a, b) in x.iter().zip(x_ss.iter()) {
                    prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{}: {a} vs {b}", traj.method);
                }
            }
        }
    }

    #[test]
    fn cooperative_trajectories_stay_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let model = cooperative_model(&mut r, n);
        let x0 = DVector::from_fn(n, |_, _| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..5.0) });
        let u = DVector::from_element(1, r.random_range(0.0..2.0));
        let tol = 1e-8;
        let traj = simulate_full(&model, &x0, &InputSignal::constant(u), 20.0, &SimOptions { tol, points: 401 }).unwrap();
        let low = traj.states.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        prop_assert!(low >= -100.0 * tol, "{low}");
    }

    #[test]
    fn artifacts_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let signs: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        let model = signed_model(&mut r, &signs);
        let k = r.random_range(1..=n);
        let idx = random::subset(&mut r, n, k);
        let regions = vec![Region { name: "r".into(), indices: idx, removed: r.random_range(0..k) }];
        let settings = ReductionSettings {
            solve: SolveOptions { min_trace: r.random_bool(0.5), ..SolveOptions::default() },
            ..ReductionSettings::default()
        };
        let red = reduce(&model, &model.steady_input(), &model.initial_state(), regions, &settings).unwrap();
        let file = ArtifactFile { model: "random".into(), variants: vec![ReductionArtifact::new("v", &model, &red)] };
        let back: ArtifactFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        prop_assert_eq!(&back, &file);
        let check = back.variants[0].verify().unwrap();
        prop_assert!(check.passed(), "{check:?}");
    }
}

#[test]
fn species_helper_names_states() {
    let s: Vec<Species> = species(2, &[1.0, 2.0]);
    assert_eq!(s[1].name, "x2");
}
