//! Reduction configuration files.
//!
//! ```text
//! model   toggle.model        # relative to the config file
//! backend structured          # or metzler-diagonal
//! min_trace on
//! horizon 50
//! points  2001
//! x0      1 10 1 1            # default: the model's initial values
//! input   u1 = 0              # steady and simulation value
//! step    u1 10 = 0.5         # from t = 10 on, u1 = 0.5
//! qssa    m1 m2
//! methods reduction truncation qssa
//!
//! variant c
//! region  second = p2 m2 : 1  # species : number of states kept
//! ```
//!
//! Region lines before the first `variant` line form a variant named
//! `default`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use thiserror::Error;

use crate::analysis::Region;
use crate::gramian::SolveOptions;
use crate::model::NetworkModel;
use crate::pipeline::{Backend, ReductionSettings};
use crate::simulate::{InputSignal, Method, SimError, SimOptions};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 for errors about the configuration as a whole.
    pub line: usize,
    pub message: String,
}

fn cerr(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub name: String,
    pub species: Vec<String>,
    /// Number of balanced states kept, `1 <= keep <= species.len()`.
    pub keep: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub regions: Vec<RegionSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionConfig {
    pub model_path: PathBuf,
    pub variants: Vec<Variant>,
    pub backend: Backend,
    pub min_trace: bool,
    pub split_by_signature: bool,
    pub steady_tol: f64,
    pub max_iter: usize,
    pub sim_tol: f64,
    pub horizon: f64,
    pub points: usize,
    pub x0: Option<Vec<f64>>,
    /// Steady-state Newton start; defaults to `x0`.
    pub guess: Option<Vec<f64>>,
    pub inputs: Vec<(String, f64)>,
    /// `(input, time, value)` switches.
    pub steps: Vec<(String, f64, f64)>,
    pub qssa: Vec<String>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub samples: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            model_path: PathBuf::new(),
            variants: Vec::new(),
            backend: Backend::Structured,
            min_trace: false,
            split_by_signature: true,
            steady_tol: 1e-10,
            max_iter: 200,
            sim_tol: 1e-8,
            horizon: 50.0,
            points: 2001,
            x0: None,
            guess: None,
            inputs: Vec::new(),
            steps: Vec::new(),
            qssa: Vec::new(),
            methods: vec![Method::Full, Method::Reduction, Method::Truncation, Method::Qssa],
            seed: 1,
            samples: 50,
        }
    }
}

fn real(tok: &str, line: usize) -> Result<f64, ConfigError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| cerr(line, format!("invalid number `{tok}`")))
}

fn positive(tok: &str, line: usize) -> Result<f64, ConfigError> {
    let v = real(tok, line)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(cerr(line, format!("expected a positive number, found `{tok}`")))
    }
}

fn single<'a>(rest: &'a [&'a str], line: usize, key: &str) -> Result<&'a str, ConfigError> {
    match rest {
        [v] => Ok(v),
        _ => Err(cerr(line, format!("`{key}` takes exactly one value"))),
    }
}

fn switch(tok: &str, line: usize) -> Result<bool, ConfigError> {
    match tok {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(cerr(line, format!("expected on/off, found `{tok}`"))),
    }
}

/// Parses a configuration; relative model paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ReductionConfig, ConfigError> {
    let mut cfg = ReductionConfig::default();
    let mut model = None;
    let mut current: Option<Variant> = None;
    let mut methods_set = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest_str) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest_str = rest_str.trim();
        let rest: Vec<&str> = rest_str.split_whitespace().collect();
        match key {
            "model" => {
                let p = single(&rest, line, key)?;
                model = Some(base.join(p));
            }
            "backend" => cfg.backend = single(&rest, line, key)?.parse().map_err(|e: String| cerr(line, e))?,
            "min_trace" => cfg.min_trace = switch(single(&rest, line, key)?, line)?,
            "split_signs" => cfg.split_by_signature = switch(single(&rest, line, key)?, line)?,
            "steady_tol" => cfg.steady_tol = positive(single(&rest, line, key)?, line)?,
            "max_iter" => {
                cfg.max_iter = single(&rest, line, key)?
                    .parse()
                    .map_err(|_| cerr(line, "invalid iteration count"))?
            }
            "sim_tol" => cfg.sim_tol = positive(single(&rest, line, key)?, line)?,
            "horizon" => cfg.horizon = positive(single(&rest, line, key)?, line)?,
            "points" => {
                let p: usize = single(&rest, line, key)?.parse().map_err(|_| cerr(line, "invalid point count"))?;
                if p < 2 {
                    return Err(cerr(line, "at least 2 report points are needed"));
                }
                cfg.points = p;
            }
            "seed" => cfg.seed = single(&rest, line, key)?.parse().map_err(|_| cerr(line, "invalid seed"))?,
            "samples" => {
                cfg.samples = single(&rest, line, key)?.parse().map_err(|_| cerr(line, "invalid sample count"))?
            }
            "x0" | "guess" => {
                if rest.is_empty() {
                    return Err(cerr(line, format!("`{key}` needs values")));
                }
                let v = rest.iter().map(|t| real(t, line)).collect::<Result<Vec<_>, _>>()?;
                if key == "x0" {
                    cfg.x0 = Some(v);
                } else {
                    cfg.guess = Some(v);
                }
            }
            "input" => {
                let (name, value) =
                    rest_str.split_once('=').ok_or_else(|| cerr(line, "expected `input <name> = <value>`"))?;
                cfg.inputs.push((name.trim().to_string(), real(value.trim(), line)?));
            }
            "step" => {
                let (lhs, value) =
                    rest_str.split_once('=').ok_or_else(|| cerr(line, "expected `step <name> <time> = <value>`"))?;
                let lhs: Vec<&str> = lhs.split_whitespace().collect();
                let [name, t] = lhs[..] else {
                    return Err(cerr(line, "expected `step <name> <time> = <value>`"));
                };
                let t = real(t, line)?;
                if t <= 0.0 {
                    return Err(cerr(line, "step time must be positive"));
                }
                cfg.steps.push((name.to_string(), t, real(value.trim(), line)?));
            }
            "qssa" => cfg.qssa = rest.iter().map(|s| s.to_string()).collect(),
            "methods" => {
                cfg.methods = rest
                    .iter()
                    .map(|s| s.parse::<Method>().map_err(|e| cerr(line, e)))
                    .collect::<Result<_, _>>()?;
                methods_set = true;
            }
            "variant" => {
                let name = single(&rest, line, key)?.to_string();
                if cfg.variants.iter().chain(current.iter()).any(|v| v.name == name) {
                    return Err(cerr(line, format!("duplicate variant `{name}`")));
                }
                if let Some(v) = current.take() {
                    cfg.variants.push(v);
                }
                current = Some(Variant { name, regions: Vec::new() });
            }
            "region" => {
                let (name, spec) =
                    rest_str.split_once('=').ok_or_else(|| cerr(line, "expected `region <name> = <species...> : <keep>`"))?;
                let (species, keep) =
                    spec.split_once(':').ok_or_else(|| cerr(line, "missing `: <keep>` in region"))?;
                let species: Vec<String> = species.split_whitespace().map(str::to_string).collect();
                let keep: usize = keep.trim().parse().map_err(|_| cerr(line, "invalid keep count"))?;
                if species.is_empty() {
                    return Err(cerr(line, "region has no species"));
                }
                if keep == 0 || keep > species.len() {
                    return Err(cerr(line, format!("keep count {keep} outside 1..={}", species.len())));
                }
                let v = current.get_or_insert_with(|| Variant { name: "default".into(), regions: Vec::new() });
                v.regions.push(RegionSpec { name: name.trim().to_string(), species, keep, line });
            }
            _ => return Err(cerr(line, format!("unknown keyword `{key}`"))),
        }
    }
    if let Some(v) = current {
        cfg.variants.push(v);
    }
    cfg.model_path = model.ok_or_else(|| cerr(0, "missing `model` line"))?;
    if !methods_set && cfg.qssa.is_empty() {
        cfg.methods.retain(|m| *m != Method::Qssa);
    }
    if cfg.variants.is_empty() {
        cfg.variants.push(Variant { name: "default".into(), regions: Vec::new() });
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ReductionConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| cerr(0, format!("{}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

impl ReductionConfig {
    pub fn variant(&self, name: Option<&str>) -> Result<&Variant, ConfigError> {
        match name {
            None => Ok(&self.variants[0]),
            Some(n) => {
                self.variants.iter().find(|v| v.name == n).ok_or_else(|| cerr(0, format!("no variant `{n}`")))
            }
        }
    }

    /// Regions of a variant resolved against the model.
    pub fn regions(&self, model: &NetworkModel, variant: &Variant) -> Result<Vec<Region>, ConfigError> {
        let mut used = vec![false; model.n_species()];
        let mut out = Vec::new();
        for r in &variant.regions {
            let mut indices = Vec::new();
            for s in &r.species {
                let i = model
                    .species_index(s)
                    .ok_or_else(|| cerr(r.line, format!("unknown species `{s}` in region `{}`", r.name)))?;
                if used[i] {
                    return Err(cerr(r.line, format!("species `{s}` appears in two regions")));
                }
                used[i] = true;
                indices.push(i);
            }
            out.push(Region { name: r.name.clone(), removed: indices.len() - r.keep, indices });
        }
        Ok(out)
    }

    fn resolve_input(&self, model: &NetworkModel, name: &str) -> Result<usize, ConfigError> {
        model
            .input_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| cerr(0, format!("unknown input `{name}`")))
    }

    /// Steady-state input: model defaults with `input` overrides.
    pub fn steady_input(&self, model: &NetworkModel) -> Result<DVector<f64>, ConfigError> {
        let mut u = model.steady_input();
        for (name, v) in &self.inputs {
            u[self.resolve_input(model, name)?] = *v;
        }
        Ok(u)
    }

    /// Simulation input: the steady input switched by `step` lines.
    pub fn input_signal(&self, model: &NetworkModel) -> Result<InputSignal, ConfigError> {
        let u = self.steady_input(model)?;
        if self.steps.is_empty() {
            return Ok(InputSignal::constant(u));
        }
        let mut steps = self.steps.clone();
        steps.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut breaks: Vec<f64> = Vec::new();
        let mut values = vec![u];
        for (name, t, v) in steps {
            let k = self.resolve_input(model, &name)?;
            if breaks.last() != Some(&t) {
                breaks.push(t);
                values.push(values.last().expect("non-empty").clone());
            }
            values.last_mut().expect("non-empty")[k] = v;
        }
        InputSignal::piecewise(breaks, values).map_err(|e: SimError| cerr(0, e.to_string()))
    }

    pub fn initial_state(&self, model: &NetworkModel) -> Result<DVector<f64>, ConfigError> {
        self.vector(model, self.x0.as_ref(), "x0").map(|v| v.unwrap_or_else(|| model.initial_state()))
    }

    pub fn steady_guess(&self, model: &NetworkModel) -> Result<DVector<f64>, ConfigError> {
        match self.vector(model, self.guess.as_ref(), "guess")? {
            Some(g) => Ok(g),
            None => self.initial_state(model),
        }
    }

    fn vector(&self, model: &NetworkModel, v: Option<&Vec<f64>>, what: &str) -> Result<Option<DVector<f64>>, ConfigError> {
        match v {
            None => Ok(None),
            Some(v) if v.len() == model.n_species() => Ok(Some(DVector::from_column_slice(v))),
            Some(v) => Err(cerr(0, format!("`{what}` has {} values for {} species", v.len(), model.n_species()))),
        }
    }

    pub fn qssa_indices(&self, model: &NetworkModel) -> Result<Vec<usize>, ConfigError> {
        self.qssa
            .iter()
            .map(|s| model.species_index(s).ok_or_else(|| cerr(0, format!("unknown QSSA species `{s}`"))))
            .collect()
    }

    pub fn settings(&self) -> ReductionSettings {
        ReductionSettings {
            backend: self.backend,
            solve: SolveOptions { min_trace: self.min_trace, ..SolveOptions::default() },
            split_by_signature: self.split_by_signature,
            steady_tol: self.steady_tol,
            max_iter: self.max_iter,
            orthant_samples: self.samples,
            seed: self.seed,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions { tol: self.sim_tol, points: self.points }
    }
}
