//! Dormand-Prince 5(4) integrator with the standard 4th-order dense output.

use thiserror::Error;

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}); the problem is probably stiff")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step limit {max_steps} reached at t = {t}; the problem is probably stiff")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite value in right-hand side at t = {t}")]
    NonFinite { t: f64 },
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: f64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, ..Default::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-8, atol: 1e-8, max_steps: 1_000_000, h0: None, h_max: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// States at the requested report times.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: OdeStats,
    /// Last accepted step size, useful to warm-start a following segment.
    pub last_step: f64,
}

fn rms_norm(v: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, sampling the dense
/// output at `report` (sorted, within `[t0, t_end]`).
///
/// The right-hand side receives `(t, y, dy)` and may keep internal state
/// between calls; it is always invoked in chronological step order.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    report: &[f64],
    opts: &OdeOptions,
) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut times = Vec::with_capacity(report.len());
    let mut states = Vec::with_capacity(report.len());
    let mut next_report = 0;

    // leading report points at t0
    while next_report < report.len() && report[next_report] <= t0 {
        times.push(report[next_report]);
        states.push(y0.to_vec());
        next_report += 1;
    }
    if n == 0 || t_end <= t0 {
        while next_report < report.len() {
            times.push(report[next_report]);
            states.push(y0.to_vec());
            next_report += 1;
        }
        return Ok(DenseSolution { times, states, stats, last_step: 0.0 });
    }

    let mut eval = |t: f64, y: &[f64], dy: &mut [f64], stats: &mut OdeStats| -> Result<(), OdeError> {
        stats.evaluations += 1;
        f(t, y, dy).map_err(|message| OdeError::Rhs { t, message })?;
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        Ok(())
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut errv = vec![0.0; n];
    eval(t, &y, &mut k1, &mut stats)?;

    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            // Hairer's starting step heuristic
            let d0 = rms_norm(&y, &y, &y, opts);
            let d1 = rms_norm(&k1, &y, &y, opts);
            let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0 = h0.min(h_max);
            for i in 0..n {
                ytmp[i] = y[i] + h0 * k1[i];
            }
            eval(t + h0, &ytmp, &mut k2, &mut stats)?;
            for i in 0..n {
                errv[i] = (k2[i] - k1[i]) / h0;
            }
            let d2 = rms_norm(&errv, &y, &y, opts);
            let h1 = if d1.max(d2) <= 1e-15 {
                (1e-6f64).max(h0 * 1e-3)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1)
        }
    }
    .min(h_max);

    let mut last_rejected = false;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, max_steps: opts.max_steps });
        }
        steps += 1;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t_end - 1e-14 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        eval(t + C2 * h, &ytmp, &mut k2, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(t + C3 * h, &ytmp, &mut k3, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(t + C4 * h, &ytmp, &mut k4, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(t + C5 * h, &ytmp, &mut k5, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        eval(t + h, &ytmp, &mut k6, &mut stats)?;
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        eval(t + h, &ynew, &mut k7, &mut stats)?;
        for i in 0..n {
            errv[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = rms_norm(&errv, &y, &ynew, opts);

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if last { t_end } else { t + h };
            // dense output on [t, t_new]
            while next_report < report.len() && report[next_report] <= t_new {
                let theta = ((report[next_report] - t) / h).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let r1 = y[i];
                    let r2 = ynew[i] - y[i];
                    let r3 = h * k1[i] - r2;
                    let r4 = r2 - h * k7[i] - r3;
                    let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    out[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                }
                times.push(report[next_report]);
                states.push(out);
                next_report += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                while next_report < report.len() {
                    times.push(report[next_report]);
                    states.push(y.clone());
                    next_report += 1;
                }
                return Ok(DenseSolution { times, states, stats, last_step: h });
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(h_max);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
        }
    }
}
