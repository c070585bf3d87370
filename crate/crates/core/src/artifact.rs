//! JSON artifacts written by `reduce`.
//!
//! Matrices are stored as arrays of rows. Gramians are in conjugated
//! coordinates; projectors and reduced matrices in original ones.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::OrthantResult;
use crate::gramian::{verify_gramians, BlockPattern, Certificate, RESIDUAL_TOL};
use crate::linalg::{self, from_rows, rows_of};
use crate::model::NetworkModel;
use crate::pipeline::Reduction;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionArtifact {
    pub name: String,
    pub species: Vec<String>,
    pub keep: usize,
    pub sigma: Vec<f64>,
    pub t: Rows,
    pub t_inv: Rows,
    pub irreducible_nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionArtifact {
    pub variant: String,
    pub species: Vec<String>,
    pub x_ss: Vec<f64>,
    pub u_ss: Vec<f64>,
    pub steady_residual: f64,
    pub monotone: bool,
    pub signature: Vec<i8>,
    pub reduced_signature: Vec<i8>,
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub spectral_abscissa: f64,
    pub pattern: Vec<Vec<usize>>,
    pub p: Rows,
    pub q: Rows,
    pub certificate: Certificate,
    pub regions: Vec<RegionArtifact>,
    pub w: Rows,
    pub v: Rows,
    pub w_r: Rows,
    pub v_r: Rows,
    pub a_t: Rows,
    pub b_t: Rows,
    pub c_t: Rows,
    pub reduced_metzler: bool,
    pub reduced_hurwitz: bool,
    pub error_bound: f64,
    pub hinf_error: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFile {
    pub model: String,
    pub variants: Vec<ReductionArtifact>,
}

/// Result of re-checking an artifact from its stored matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactCheck {
    pub certificate: Certificate,
    pub biorthogonality: f64,
    /// `‖VᵀAW - A_t‖_max`
    pub projection_residual: f64,
}

impl ArtifactCheck {
    pub fn passed(&self) -> bool {
        self.certificate.passed && self.biorthogonality < 1e-8 && self.projection_residual < 1e-8
    }
}

impl ReductionArtifact {
    pub fn new(variant: &str, model: &NetworkModel, red: &Reduction) -> Self {
        let species = model.species_names().iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let proj = &red.projection;
        let regions = proj
            .regions
            .iter()
            .map(|r| RegionArtifact {
                name: r.name.clone(),
                species: r.indices.iter().map(|&i| species[i].clone()).collect(),
                keep: r.keep(),
                sigma: r.balance.sigma.clone(),
                t: rows_of(&r.balance.t),
                t_inv: rows_of(&r.balance.t_inv),
                irreducible_nonneg: r.balance.irreducible_nonneg,
            })
            .collect();
        ReductionArtifact {
            variant: variant.to_string(),
            species,
            x_ss: red.steady.x.iter().copied().collect(),
            u_ss: red.sys.u_ss.iter().copied().collect(),
            steady_residual: red.steady.residual,
            monotone: matches!(red.orthant, OrthantResult::Monotone(_)),
            signature: red.signature.signs.clone(),
            reduced_signature: proj.reduced_signature.signs.clone(),
            a: rows_of(&red.sys.a),
            b: rows_of(&red.sys.b),
            c: rows_of(&red.sys.c),
            spectral_abscissa: red.sys.spectral_abscissa,
            pattern: red.gramians.pattern.groups().to_vec(),
            p: rows_of(&red.gramians.p),
            q: rows_of(&red.gramians.q),
            certificate: red.gramians.certificate.clone(),
            regions,
            w: rows_of(&proj.w),
            v: rows_of(&proj.v),
            w_r: rows_of(&proj.w_r),
            v_r: rows_of(&proj.v_r),
            a_t: rows_of(&red.rom.a_t),
            b_t: rows_of(&red.rom.b_t),
            c_t: rows_of(&red.rom.c_t),
            reduced_metzler: red.rom.metzler,
            reduced_hurwitz: red.rom.hurwitz,
            error_bound: red.rom.error_bound,
            hinf_error: red.bound.map(|b| b.hinf_error),
            bound_satisfied: red.bound.map(|b| b.satisfied),
            warnings: red.warnings.clone(),
        }
    }

    /// Recomputes the Gramian certificate, bi-orthogonality and the reduced
    /// drift from the stored matrices.
    pub fn verify(&self) -> Result<ArtifactCheck, String> {
        let m = |r: &Rows, what: &str, cols: usize| {
            from_rows(r, cols).ok_or_else(|| format!("`{what}` is not a rectangular matrix"))
        };
        let n = self.species.len();
        let a = m(&self.a, "a", n)?;
        let b = m(&self.b, "b", self.b.first().map_or(0, Vec::len))?;
        let c = m(&self.c, "c", n)?;
        let p = m(&self.p, "p", n)?;
        let q = m(&self.q, "q", n)?;
        let k = self.a_t.len();
        let w = m(&self.w, "w", k)?;
        let v = m(&self.v, "v", k)?;
        let w_r = m(&self.w_r, "w_r", n - k)?;
        let v_r = m(&self.v_r, "v_r", n - k)?;
        let a_t = m(&self.a_t, "a_t", k)?;
        if self.signature.len() != n || a.nrows() != n || w.nrows() != n || w_r.nrows() != n {
            return Err("inconsistent dimensions".into());
        }
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.signature.iter().map(|&x| x as f64),
        ));
        let pattern = BlockPattern::from_blocks(n, self.pattern.clone()).map_err(|e| e.to_string())?;
        let certificate = verify_gramians(&(&s * &a * &s), &(&s * &b), &(&c * &s), &p, &q, &pattern, RESIDUAL_TOL);
        let mut wf = DMatrix::zeros(n, n);
        let mut vf = DMatrix::zeros(n, n);
        wf.columns_mut(0, k).copy_from(&w);
        vf.columns_mut(0, k).copy_from(&v);
        wf.columns_mut(k, n - k).copy_from(&w_r);
        vf.columns_mut(k, n - k).copy_from(&v_r);
        let biorthogonality = linalg::max_abs(&(vf.transpose() * wf - DMatrix::identity(n, n)));
        let projection_residual = linalg::max_abs(&(v.transpose() * &a * &w - a_t));
        Ok(ArtifactCheck { certificate, biorthogonality, projection_residual })
    }
}
