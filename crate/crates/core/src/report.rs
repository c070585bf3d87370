//! Command implementations shared by the CLI: model checks, reductions,
//! single-method runs and method comparisons.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{find_steady_state, is_metzler, OrthantResult};
use crate::artifact::{ArtifactFile, ReductionArtifact};
use crate::config::ReductionConfig;
use crate::linalg;
use crate::model::{parse_model, NetworkModel};
use crate::pipeline::{orthant_samples, reduce, Reduction};
use crate::simulate::{
    natural_spline, simulate_full, simulate_qssa, simulate_reduction, simulate_truncation, trajectory_error,
    ErrorReport, Method, SimOptions, Trajectory,
};

/// Failure of a command, grouped by exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Analysis(String),
    #[error("{0}")]
    Reduction(String),
    #[error("{0}")]
    Simulation(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Parse(_) => 1,
            CommandError::Analysis(_) => 2,
            CommandError::Reduction(_) => 3,
            CommandError::Simulation(_) => 4,
        }
    }
}

pub fn load_model(path: &Path) -> Result<NetworkModel, CommandError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CommandError::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| CommandError::Parse(format!("{}: {e}", path.display())))
}

/// Loads a configuration and the model it references.
pub fn load_config(path: &Path) -> Result<(ReductionConfig, NetworkModel), CommandError> {
    let cfg = crate::config::load_config(path)
        .map_err(|e| CommandError::Parse(format!("{}: {e}", path.display())))?;
    let model = load_model(&cfg.model_path)?;
    Ok((cfg, model))
}

// ---------------------------------------------------------------------------
// check

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: DVector<f64>,
    pub residual: f64,
    pub spectral_abscissa: f64,
    /// Number of starting points that converged here.
    pub hits: usize,
}

impl Equilibrium {
    pub fn stable(&self) -> bool {
        self.spectral_abscissa < 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub species: Vec<String>,
    pub equilibria: Vec<Equilibrium>,
    pub starts: usize,
    pub failed_starts: usize,
    /// Raw Jacobian Metzler at every equilibrium, before any conjugation.
    pub metzler: bool,
    pub orthant: OrthantResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Random Newton starts besides the model's initial state.
    pub starts: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { starts: 20, samples: 50, seed: 1, tol: 1e-10 }
    }
}

/// Newton from the initial state and from seeded log-uniform perturbations
/// of it, followed by orthant detection over the equilibria and random states.
pub fn check_model(model: &NetworkModel, opts: &CheckOptions) -> Result<CheckReport, CommandError> {
    let n = model.n_species();
    let u = model.steady_input();
    let x0 = model.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0.clone()];
    for _ in 0..opts.starts {
        starts.push(DVector::from_fn(n, |i, _| x0[i].abs().max(1.0) * 10f64.powf(rng.random_range(-2.0..2.0))));
    }
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    let mut failed = 0;
    for s in &starts {
        let Ok(ss) = find_steady_state(model, &u, s, opts.tol, 200) else {
            failed += 1;
            continue;
        };
        let scale = ss.x.amax().max(1.0);
        if let Some(e) = equilibria.iter_mut().find(|e| (&e.x - &ss.x).amax() <= 1e-6 * scale) {
            e.hits += 1;
            continue;
        }
        let j = model.jacobian_x(&ss.x, &u).map_err(|e| CommandError::Analysis(e.to_string()))?;
        equilibria.push(Equilibrium {
            x: ss.x,
            residual: ss.residual,
            spectral_abscissa: linalg::spectral_abscissa(&j),
            hits: 1,
        });
    }
    if equilibria.is_empty() {
        return Err(CommandError::Analysis(format!("no steady state found from {} starting points", starts.len())));
    }
    let mut metzler = true;
    for e in &equilibria {
        let j = model.jacobian_x(&e.x, &u).map_err(|e| CommandError::Analysis(e.to_string()))?;
        metzler &= is_metzler(&j, 0.0);
    }
    let mut anchors: Vec<DVector<f64>> = equilibria.iter().map(|e| e.x.clone()).collect();
    anchors.push(x0);
    let samples = orthant_samples(&anchors, opts.samples, opts.seed);
    let orthant = crate::analysis::detect_orthant(model, &u, &samples)
        .map_err(|e| CommandError::Analysis(e.to_string()))?;
    Ok(CheckReport {
        species: model.species_names().iter().map(|s| s.to_string()).collect(),
        equilibria,
        starts: starts.len(),
        failed_starts: failed,
        metzler,
        orthant,
    })
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "steady states ({} found from {} starts, {} failed):",
            self.equilibria.len(),
            self.starts,
            self.failed_starts
        )?;
        for (k, e) in self.equilibria.iter().enumerate() {
            let xs: Vec<String> =
                self.species.iter().zip(e.x.iter()).map(|(s, v)| format!("{s}={v:.6e}")).collect();
            writeln!(f, "  [{}] {}", k + 1, xs.join(" "))?;
            writeln!(
                f,
                "      residual {:.2e}, spectral abscissa {:.6e} ({}), reached from {} start(s)",
                e.residual,
                e.spectral_abscissa,
                if e.stable() { "stable" } else { "unstable" },
                e.hits
            )?;
        }
        writeln!(f, "Jacobian Metzler at steady states: {}", if self.metzler { "yes" } else { "no" })?;
        match &self.orthant {
            OrthantResult::Monotone(sig) => {
                writeln!(f, "monotone: yes")?;
                let named: Vec<String> = self
                    .species
                    .iter()
                    .zip(&sig.signs)
                    .map(|(s, &v)| format!("{s}:{}", if v > 0 { '+' } else { '-' }))
                    .collect();
                write!(f, "orthant signature {sig}  [{}]", named.join(" "))
            }
            OrthantResult::Infeasible(why) => {
                writeln!(f, "monotone: no")?;
                write!(f, "witness: {why}")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// reduce / simulate

pub fn reduce_variant(
    model: &NetworkModel,
    cfg: &ReductionConfig,
    variant: &str,
) -> Result<Reduction, CommandError> {
    let v = cfg.variant(Some(variant)).map_err(|e| CommandError::Parse(e.to_string()))?;
    let regions = cfg.regions(model, v).map_err(|e| CommandError::Parse(e.to_string()))?;
    let u = cfg.steady_input(model).map_err(|e| CommandError::Parse(e.to_string()))?;
    let guess = cfg.steady_guess(model).map_err(|e| CommandError::Parse(e.to_string()))?;
    reduce(model, &u, &guess, regions, &cfg.settings())
        .map_err(|e| CommandError::Reduction(format!("variant {variant}: {} failed: {e}", e.stage())))
}

/// Reduces every variant of the configuration.
pub fn reduce_all(model: &NetworkModel, cfg: &ReductionConfig) -> Result<ArtifactFile, CommandError> {
    let mut variants = Vec::new();
    for v in &cfg.variants {
        let red = reduce_variant(model, cfg, &v.name)?;
        variants.push(ReductionArtifact::new(&v.name, model, &red));
    }
    Ok(ArtifactFile { model: cfg.model_path.display().to_string(), variants })
}

/// Simulates one method; projection methods use `variant` (default: the
/// first one).
pub fn run_method(
    model: &NetworkModel,
    cfg: &ReductionConfig,
    method: Method,
    variant: Option<&str>,
) -> Result<Trajectory, CommandError> {
    let parse = |e: crate::config::ConfigError| CommandError::Parse(e.to_string());
    let x0 = cfg.initial_state(model).map_err(parse)?;
    let input = cfg.input_signal(model).map_err(parse)?;
    let opts = cfg.sim_options();
    let sim = |e: crate::simulate::SimError| CommandError::Simulation(e.to_string());
    match method {
        Method::Full => simulate_full(model, &x0, &input, cfg.horizon, &opts).map_err(sim),
        Method::Qssa => {
            let fast = cfg.qssa_indices(model).map_err(parse)?;
            if fast.is_empty() {
                return Err(CommandError::Parse("qssa needs a `qssa` line in the configuration".into()));
            }
            simulate_qssa(model, &fast, &x0, &input, cfg.horizon, &opts).map_err(sim)
        }
        Method::Reduction | Method::Truncation => {
            let name = cfg.variant(variant).map_err(parse)?.name.clone();
            let red = reduce_variant(model, cfg, &name)?;
            let x_ss = &red.steady.x;
            if method == Method::Reduction {
                simulate_reduction(model, &red.projection, x_ss, &x0, &input, cfg.horizon, &opts).map_err(sim)
            } else {
                simulate_truncation(model, &red.projection, x_ss, &x0, &input, cfg.horizon, &opts).map_err(sim)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// compare

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// `method` or `method:variant`.
    pub label: String,
    pub method: Method,
    pub errors: Option<ErrorReport>,
    pub seconds: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub reference: Trajectory,
    /// Per-row output error `y_test - y_ref` on the reference grid.
    pub traces: Vec<(String, Vec<Vec<f64>>)>,
}

/// Tolerance of the reference trajectory relative to the configured one.
pub const REFERENCE_TOL_FACTOR: f64 = 1e-2;

fn format_num(v: f64) -> String {
    format!("{v:e}")
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,L1,L2,Linf,seconds\n");
        for r in &self.rows {
            match (&r.failure, &r.errors) {
                (Some(_), _) => writeln!(s, "{},ERROR,ERROR,ERROR,", r.label),
                (None, Some(e)) => writeln!(
                    s,
                    "{},{},{},{},{:.6}",
                    r.label,
                    format_num(e.total.l1),
                    format_num(e.total.l2),
                    format_num(e.total.linf),
                    r.seconds
                ),
                (None, None) => writeln!(s, "{},,,,{:.6}", r.label, r.seconds),
            }
            .expect("writing to a String cannot fail");
        }
        s
    }

    pub fn failures(&self) -> Vec<String> {
        self.rows.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("{}: {f}", r.label))).collect()
    }

    pub fn row(&self, label: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Output error `test - reference` per channel, on the reference grid.
pub fn error_trace(reference: &Trajectory, test: &Trajectory) -> Vec<Vec<f64>> {
    let k = reference.outputs.first().map_or(0, Vec::len);
    let same_grid = reference.times == test.times;
    let channels: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let ys: Vec<f64> = test.outputs.iter().map(|y| y[c]).collect();
            if same_grid {
                ys
            } else {
                natural_spline(&test.times, &ys, &reference.times)
            }
        })
        .collect();
    reference
        .outputs
        .iter()
        .enumerate()
        .map(|(i, y)| (0..k).map(|c| channels[c][i] - y[c]).collect())
        .collect()
}

pub fn trace_csv(times: &[f64], trace: &[Vec<f64>]) -> String {
    let k = trace.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for c in 1..=k {
        write!(s, ",e{c}").expect("writing to a String cannot fail");
    }
    s.push('\n');
    for (t, row) in times.iter().zip(trace) {
        write!(s, "{t:.16e}").expect("writing to a String cannot fail");
        for v in row {
            write!(s, ",{v:.16e}").expect("writing to a String cannot fail");
        }
        s.push('\n');
    }
    s
}

struct Job {
    label: String,
    method: Method,
    variant: Option<String>,
}

fn jobs(cfg: &ReductionConfig, methods: &[Method]) -> Vec<Job> {
    let mut out = Vec::new();
    for &m in methods {
        match m {
            Method::Full | Method::Qssa => out.push(Job { label: m.name().into(), method: m, variant: None }),
            Method::Reduction | Method::Truncation => {
                for v in &cfg.variants {
                    out.push(Job { label: format!("{m}:{}", v.name), method: m, variant: Some(v.name.clone()) });
                }
            }
        }
    }
    out
}

/// Simulates every requested method concurrently and compares outputs
/// against a full-model reference computed at a tighter tolerance.
/// Failing methods produce rows with `failure` set; only a failing
/// reference aborts the comparison.
pub fn compare(
    model: &NetworkModel,
    cfg: &ReductionConfig,
    methods: Option<&[Method]>,
) -> Result<CompareReport, CommandError> {
    let methods = methods.unwrap_or(&cfg.methods);
    let parse = |e: crate::config::ConfigError| CommandError::Parse(e.to_string());
    let x0 = cfg.initial_state(model).map_err(parse)?;
    let input = cfg.input_signal(model).map_err(parse)?;
    let ref_opts = SimOptions { tol: (cfg.sim_tol * REFERENCE_TOL_FACTOR).max(1e-13), points: cfg.points };
    let reference = simulate_full(model, &x0, &input, cfg.horizon, &ref_opts)
        .map_err(|e| CommandError::Simulation(format!("reference: {e}")))?;
    let jobs = jobs(cfg, methods);
    // one worker per core so that wall-clock times are not inflated by
    // jobs sharing a core
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    type Slot = Mutex<Option<(Result<Trajectory, CommandError>, f64)>>;
    let slots: Vec<Slot> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let start = Instant::now();
                let r = run_method(model, cfg, job.method, job.variant.as_deref());
                *slots[k].lock().expect("result slot poisoned") = Some((r, start.elapsed().as_secs_f64()));
            });
        }
    });
    let results = slots.into_iter().map(|m| m.into_inner().expect("result slot poisoned").expect("job ran"));
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (job, (res, elapsed)) in jobs.iter().zip(results) {
        let row = match res {
            Err(e) => CompareRow { label: job.label.clone(), method: job.method, errors: None, seconds: elapsed, failure: Some(e.to_string()) },
            Ok(traj) if job.method == Method::Full => {
                CompareRow { label: job.label.clone(), method: job.method, errors: None, seconds: traj.wall_seconds, failure: None }
            }
            Ok(traj) => match trajectory_error(&reference, &traj) {
                Ok(err) => {
                    traces.push((job.label.clone(), error_trace(&reference, &traj)));
                    CompareRow {
                        label: job.label.clone(),
                        method: job.method,
                        errors: Some(err),
                        seconds: traj.wall_seconds,
                        failure: None,
                    }
                }
                Err(e) => CompareRow {
                    label: job.label.clone(),
                    method: job.method,
                    errors: None,
                    seconds: traj.wall_seconds,
                    failure: Some(e.to_string()),
                },
            },
        };
        rows.push(row);
    }
    Ok(CompareReport { rows, reference, traces })
}
