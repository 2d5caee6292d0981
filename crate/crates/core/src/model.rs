//! Finite-rank perturbation `X0 = diag(P J P^{-1}, 0_{N-r})` given in Jordan
//! data, and the model parameters `(N, tau, X0)`.

use crate::linalg::CMat;
use crate::{Error, Result};
use faer::Mat;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

/// `n` identical Jordan blocks `R_p(theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanBlockGroup {
    pub theta: C,
    pub p: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawSpec {
    groups: Vec<JordanBlockGroup>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    similarity: Option<Vec<Vec<C>>>,
}

/// Jordan data of `A0`. Group order fixes the column layout of `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct JordanSpec {
    groups: Vec<JordanBlockGroup>,
    similarity: Option<CMat>,
    p_inv: CMat,
}

impl TryFrom<RawSpec> for JordanSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        let p = match raw.similarity {
            Some(rows) => Some(
                CMat::from_rows(&rows).ok_or_else(|| Error::InvalidSpec("P has ragged rows".into()))?,
            ),
            None => None,
        };
        JordanSpec::new(raw.groups, p)
    }
}

impl From<JordanSpec> for RawSpec {
    fn from(s: JordanSpec) -> Self {
        RawSpec { groups: s.groups, similarity: s.similarity.map(|p| p.to_rows()) }
    }
}

impl JordanSpec {
    pub fn new(groups: Vec<JordanBlockGroup>, similarity: Option<CMat>) -> Result<Self> {
        for g in &groups {
            if g.p == 0 || g.n == 0 {
                return Err(Error::InvalidSpec(format!("block size and count must be >= 1, got p={} n={}", g.p, g.n)));
            }
            if !g.theta.is_finite() {
                return Err(Error::InvalidSpec("non-finite eigenvalue".into()));
            }
        }
        let r: usize = groups.iter().map(|g| g.p * g.n).sum();
        let p_inv = match &similarity {
            None => CMat::identity(r),
            Some(p) => {
                if p.rows() != r || p.cols() != r {
                    return Err(Error::InvalidSpec(format!(
                        "P is {}x{} but the blocks have total size {r}",
                        p.rows(),
                        p.cols()
                    )));
                }
                let inv = p.inverse().ok_or_else(|| Error::InvalidSpec("P is singular".into()))?;
                let cond = p.norm_fro() * inv.norm_fro();
                if !cond.is_finite() || cond > 1e14 {
                    return Err(Error::InvalidSpec(format!("P is numerically singular (condition {cond:.3e})")));
                }
                inv
            }
        };
        Ok(JordanSpec { groups, similarity, p_inv })
    }

    /// No perturbation (`X0 = 0`).
    pub fn empty() -> Self {
        JordanSpec { groups: Vec::new(), similarity: None, p_inv: CMat::identity(0) }
    }

    /// One block `R_p(theta)` with `P = I`.
    pub fn single_block(theta: C, p: usize) -> Result<Self> {
        Self::new(vec![JordanBlockGroup { theta, p, n: 1 }], None)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn groups(&self) -> &[JordanBlockGroup] {
        &self.groups
    }

    pub fn rank(&self) -> usize {
        self.groups.iter().map(|g| g.p * g.n).sum()
    }

    pub fn similarity(&self) -> CMat {
        self.similarity.clone().unwrap_or_else(|| CMat::identity(self.rank()))
    }

    pub fn has_similarity(&self) -> bool {
        self.similarity.is_some()
    }

    pub fn similarity_inverse(&self) -> &CMat {
        &self.p_inv
    }

    /// Block-diagonal Jordan matrix in group order.
    pub fn jordan(&self) -> CMat {
        let r = self.rank();
        let mut j = CMat::zeros(r, r);
        let mut at = 0;
        for g in &self.groups {
            for _ in 0..g.n {
                for k in 0..g.p {
                    j[(at + k, at + k)] = g.theta;
                    if k + 1 < g.p {
                        j[(at + k, at + k + 1)] = C::new(1.0, 0.0);
                    }
                }
                at += g.p;
            }
        }
        j
    }

    /// `A0 = P J P^{-1}`.
    pub fn a0(&self) -> CMat {
        match &self.similarity {
            None => self.jordan(),
            Some(p) => p.matmul(&self.jordan()).matmul(&self.p_inv),
        }
    }

    /// `U = P* P`.
    pub fn gram(&self) -> CMat {
        match &self.similarity {
            None => CMat::identity(self.rank()),
            Some(p) => p.adjoint().matmul(p),
        }
    }

    /// `(e_1* P* P e_1) (e_r* P^{-1} P^{-*} e_r)`, the constant that enters the
    /// outlier laws of a single Jordan block.
    pub fn outlier_constant(&self) -> f64 {
        let r = self.rank();
        if r == 0 {
            return 1.0;
        }
        let u = self.gram();
        let a = u[(0, 0)].re;
        let b: f64 = (0..r).map(|k| self.p_inv[(r - 1, k)].norm_sqr()).sum();
        a * b
    }

    /// The single group `(theta, p)` when the spec is one Jordan block.
    pub fn as_single_block(&self) -> Option<(C, usize)> {
        match self.groups.as_slice() {
            [g] if g.n == 1 => Some((g.theta, g.p)),
            _ => None,
        }
    }
}

/// `diag(P J P^{-1}, 0_{N-r})`.
pub fn build_x0(spec: &JordanSpec, n: usize) -> Result<Mat<C>> {
    let r = spec.rank();
    if r > n {
        return Err(Error::Dimension(format!("rank {r} exceeds matrix size {n}")));
    }
    let a0 = spec.a0();
    Ok(Mat::from_fn(n, n, |i, j| if i < r && j < r { a0[(i, j)] } else { C::new(0.0, 0.0) }))
}

/// Number of blocks whose eigenvalue equals `z0` exactly.
pub fn geometric_multiplicity(spec: &JordanSpec, z0: C) -> usize {
    spec.groups.iter().filter(|g| g.theta == z0).map(|g| g.n).sum()
}

/// Like [`geometric_multiplicity`] but matching eigenvalues within
/// `rel_tol * max(1, |z0|)`; meant for comparisons against numerically
/// computed kernels.
pub fn geometric_multiplicity_approx(spec: &JordanSpec, z0: C, rel_tol: f64) -> usize {
    let tol = rel_tol * z0.norm().max(1.0);
    spec.groups.iter().filter(|g| (g.theta - z0).norm() <= tol).map(|g| g.n).sum()
}

/// 1-based first (`I1`) and last (`I2`) columns of the blocks at `z0`.
pub fn index_sets(spec: &JordanSpec, z0: C) -> (Vec<usize>, Vec<usize>) {
    let (mut first, mut last) = (Vec::new(), Vec::new());
    let mut at = 0;
    for g in &spec.groups {
        for _ in 0..g.n {
            if g.theta == z0 {
                first.push(at + 1);
                last.push(at + g.p);
            }
            at += g.p;
        }
    }
    (first, last)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub tau: f64,
    pub spec: JordanSpec,
}

impl ModelParams {
    pub fn new(n: usize, tau: f64, spec: JordanSpec) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("N must be >= 2, got {n}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be positive, got {tau}")));
        }
        let r = spec.rank();
        if r + 1 > n {
            return Err(Error::Dimension(format!("rank {r} must be at most N - 1 = {}", n - 1)));
        }
        Ok(ModelParams { n, tau, spec })
    }

    pub fn rank(&self) -> usize {
        self.spec.rank()
    }

    pub fn edge_radius(&self) -> f64 {
        self.tau.sqrt()
    }
}
