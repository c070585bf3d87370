//! End-to-end reduction: steady state, linearization, orthant mapping,
//! Gramians, balancing and projection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    detect_orthant, find_steady_state, linearize_with_tol, AnalysisError, LinearizedSystem, OrthantResult,
    OrthantSignature, Partition, Region, SteadyState,
};
use crate::balance::{
    balance_block, build_projectors, check_error_bound, reduce_linear, BalanceError, BalancedProjection,
    ErrorBoundCheck, ReducedLinearModel,
};
use crate::gramian::{
    solve_diagonal_metzler, solve_structured, BlockPattern, GramianError, SolveOptions, StructuredGramianPair,
};
use crate::linalg;
use crate::model::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    MetzlerDiagonal,
    Structured,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metzler-diagonal" => Ok(Backend::MetzlerDiagonal),
            "structured" => Ok(Backend::Structured),
            _ => Err(format!("unknown backend `{s}` (expected metzler-diagonal or structured)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSettings {
    pub backend: Backend,
    pub solve: SolveOptions,
    /// Drop Gramian entries coupling states of opposite orthant sign.
    pub split_by_signature: bool,
    pub steady_tol: f64,
    pub max_iter: usize,
    /// Random states (besides the steady state) used for orthant detection.
    pub orthant_samples: usize,
    pub seed: u64,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        ReductionSettings {
            backend: Backend::Structured,
            solve: SolveOptions::default(),
            split_by_signature: true,
            steady_tol: 1e-10,
            max_iter: 200,
            orthant_samples: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("steady state: {0}")]
    SteadyState(AnalysisError),
    #[error("linearization: {0}")]
    Linearize(AnalysisError),
    #[error("partition: {0}")]
    Partition(AnalysisError),
    #[error("gramians: {0}")]
    Gramian(#[from] GramianError),
    #[error("balancing: {0}")]
    Balance(#[from] BalanceError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::SteadyState(_) => "steady state",
            PipelineError::Linearize(_) => "linearization",
            PipelineError::Partition(_) => "partition",
            PipelineError::Gramian(_) => "gramians",
            PipelineError::Balance(_) => "balancing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub steady: SteadyState,
    pub sys: LinearizedSystem,
    pub orthant: OrthantResult,
    /// Signature used for the conjugation.
    pub signature: OrthantSignature,
    /// Gramians of the conjugated system.
    pub gramians: StructuredGramianPair,
    pub projection: BalancedProjection,
    pub rom: ReducedLinearModel,
    pub bound: Option<ErrorBoundCheck>,
    pub warnings: Vec<String>,
}

/// Samples for orthant detection: the anchor states plus uniform draws from
/// `[0, 2·max(anchor_i, 1)]` per coordinate.
pub fn orthant_samples(anchors: &[DVector<f64>], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let n = anchors.first().map_or(0, |a| a.len());
    let hi: Vec<f64> = (0..n)
        .map(|i| 2.0 * anchors.iter().map(|a| a[i].abs()).fold(1.0, f64::max))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = anchors.to_vec();
    for _ in 0..count {
        out.push(DVector::from_fn(n, |i, _| rng.random_range(0.0..hi[i])));
    }
    out
}

/// Signature from sampled detection, falling back to the steady state alone
/// and finally to the identity.
pub fn choose_signature(
    model: &NetworkModel,
    u: &DVector<f64>,
    samples: &[DVector<f64>],
    warnings: &mut Vec<String>,
) -> Result<(OrthantResult, OrthantSignature), AnalysisError> {
    let res = detect_orthant(model, u, samples)?;
    match &res {
        OrthantResult::Monotone(sig) => Ok((res.clone(), sig.clone())),
        OrthantResult::Infeasible(why) => {
            warnings.push(format!("not monotone on the sample set: {why}"));
            match detect_orthant(model, u, &samples[..1])? {
                OrthantResult::Monotone(sig) => {
                    warnings.push(format!("using the local signature {sig} at the steady state"));
                    Ok((res, sig))
                }
                OrthantResult::Infeasible(_) => {
                    warnings.push("no local orthant either; using the identity signature".into());
                    Ok((res, OrthantSignature::identity(model.n_species())))
                }
            }
        }
    }
}

/// Floors a Gramian block at `floor` on its smallest eigenvalue.
fn floored(m: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let lmin = linalg::lambda_min(&m);
    if lmin >= floor {
        return m;
    }
    let k = m.nrows();
    m + DMatrix::identity(k, k) * (floor - lmin)
}

/// Gramians, balancing and projectors for a linearization already carrying
/// its partition; the signature defines the conjugation.
pub fn reduce_linearized(
    sys: &LinearizedSystem,
    signature: &OrthantSignature,
    settings: &ReductionSettings,
) -> Result<(StructuredGramianPair, BalancedProjection, ReducedLinearModel, Vec<String>), PipelineError> {
    let mut warnings = Vec::new();
    let ac = signature.conjugate(&sys.a);
    let bc = signature.left(&sys.b);
    let cc = signature.right(&sys.c);
    let gramians = match settings.backend {
        Backend::MetzlerDiagonal => solve_diagonal_metzler(&ac, &bc, &cc)?,
        Backend::Structured => {
            let mut pattern = BlockPattern::from_partition(&sys.partition);
            if settings.split_by_signature {
                pattern = pattern.split_by_signature(signature);
            }
            solve_structured(&ac, &bc, &cc, &pattern, &settings.solve)?
        }
    };
    if !gramians.certificate.passed {
        warnings.push("Gramian certificate did not pass".into());
    }
    let floor_p = 1e-8 * linalg::spectral_norm(&gramians.p).max(1.0);
    let floor_q = 1e-8 * linalg::spectral_norm(&gramians.q).max(1.0);
    let mut balances = Vec::new();
    for region in sys.partition.regions() {
        let p22 = floored(linalg::submatrix(&gramians.p, &region.indices, &region.indices), floor_p);
        let q22 = floored(linalg::submatrix(&gramians.q, &region.indices, &region.indices), floor_q);
        balances.push(balance_block(&p22, &q22)?);
    }
    let projection = build_projectors(&sys.partition, signature, balances)?;
    warnings.extend(projection.warnings());
    let rom = reduce_linear(sys, &projection);
    warnings.extend(rom.warnings.iter().cloned());
    Ok((gramians, projection, rom, warnings))
}

/// Runs the whole reduction for one set of regions.
pub fn reduce(
    model: &NetworkModel,
    u_ss: &DVector<f64>,
    guess: &DVector<f64>,
    regions: Vec<Region>,
    settings: &ReductionSettings,
) -> Result<Reduction, PipelineError> {
    let steady = find_steady_state(model, u_ss, guess, settings.steady_tol, settings.max_iter)
        .map_err(PipelineError::SteadyState)?;
    let partition = Partition::new(model.n_species(), regions).map_err(PipelineError::Partition)?;
    let tol = settings.steady_tol.max(crate::analysis::LINEARIZE_TOL);
    let sys = linearize_with_tol(model, &steady.x, u_ss, partition, tol).map_err(PipelineError::Linearize)?;
    let mut warnings = steady.warnings.clone();
    warnings.extend(sys.warnings.iter().cloned());
    let samples = orthant_samples(&[steady.x.clone(), guess.clone()], settings.orthant_samples, settings.seed);
    let (orthant, signature) =
        choose_signature(model, u_ss, &samples, &mut warnings).map_err(PipelineError::Linearize)?;
    let (gramians, projection, mut rom, more) = reduce_linearized(&sys, &signature, settings)?;
    warnings.extend(more);
    let bound = if sys.is_hurwitz() && rom.hurwitz {
        match check_error_bound(&sys, &rom, &projection) {
            Ok(b) => {
                rom.hinf_error = Some(b.hinf_error);
                if !b.satisfied {
                    warnings.push(format!("H-inf error {:e} exceeds bound {:e}", b.hinf_error, b.bound));
                }
                Some(b)
            }
            Err(e) => {
                warnings.push(format!("error bound check failed: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(Reduction { steady, sys, orthant, signature, gramians, projection, rom, bound, warnings })
}
