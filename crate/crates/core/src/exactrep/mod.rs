//! Exact finite-N integral representation of the mean self-overlap for
//! perturbations of rank one and two, evaluated by deterministic quadrature.
//!
//! The density is
//! `O_N(z) = D_N ∫_{η*Uη <= 1} exp(N f(η, y)) g(η, y) dη dy`
//! with `η ∈ C^r`, `y ∈ C` and `U = P*P`.

mod integrate;

pub use integrate::{exact_density, exact_one_point, ExactResult, QuadSettings};

use crate::linalg::{det_in_place, CMat};
use crate::model::ModelParams;
use crate::asymptotics::EvaluationPoint;
use crate::specfun::ln_gamma;
use crate::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How the `g` factor is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GStrategy {
    /// Explicit minor sums.
    PrintedMinors,
    /// Coefficient extraction from the determinant polynomials in `sqrt(mu)`,
    /// averaged over the phase of `y`.
    #[default]
    MuExtraction,
}

/// One point `(η, y)` of the integration domain together with the model
/// data the integrand depends on.
#[derive(Clone, Debug)]
pub struct QuadratureState {
    pub eta: Vec<C>,
    pub y: C,
    pub u: CMat,
    pub j: CMat,
    pub z0: C,
    /// `zhat` in `z = z0 + N^{-rho} zhat`.
    pub zhat: C,
    pub rho: f64,
    pub n: usize,
    pub tau: f64,
    u_inv: CMat,
}

impl QuadratureState {
    pub fn new(params: &ModelParams, point: &EvaluationPoint, eta: Vec<C>, y: C) -> Result<Self> {
        let (z0, zhat, rho) = point.additive_form(params);
        let r = params.rank();
        if eta.len() != r {
            return Err(Error::Dimension(format!("eta has length {}, rank is {r}", eta.len())));
        }
        let u = params.spec.gram();
        let u_inv = u.inverse().ok_or_else(|| Error::InvalidSpec("singular Gram matrix".into()))?;
        Ok(QuadratureState { eta, y, u, j: params.spec.jordan(), z0, zhat, rho, n: params.n, tau: params.tau, u_inv })
    }

    pub fn rank(&self) -> usize {
        self.eta.len()
    }

    pub fn z(&self) -> C {
        self.z0 + self.zhat * (self.n as f64).powf(-self.rho)
    }

    /// `η* U η`.
    pub fn sigma(&self) -> f64 {
        self.u.form(&self.eta, &self.eta).re
    }

    fn with_y(&self, y: C) -> Self {
        let mut s = self.clone();
        s.y = y;
        s
    }
}

/// `log D_N`, with `D_N = π^{N-r-1} / (N (N-r-1)!) (N/(πτ))^{N+1} e^{-N|z|^2/τ} det U`.
pub fn log_dn(n: usize, r: usize, tau: f64, z: C, u: &CMat) -> Result<f64> {
    if r + 1 > n {
        return Err(Error::Domain(format!("rank {r} needs N >= {}", r + 1)));
    }
    let det = u.det();
    if !(det.re > 0.0) {
        return Err(Error::InvalidSpec("Gram matrix is not positive definite".into()));
    }
    let nf = n as f64;
    let m = (n - r - 1) as f64;
    Ok(m * PI.ln() - nf.ln() - ln_gamma(m + 1.0) + (nf + 1.0) * (nf.ln() - (PI * tau).ln()) - nf / tau * z.norm_sqr()
        + det.re.ln())
}

struct Forms {
    /// `(z0 - J)* U (z0 - J)`.
    a: CMat,
    /// `zhat J* U + conj(zhat) U J`.
    b: CMat,
}

fn forms(s: &QuadratureState) -> Forms {
    let r = s.rank();
    let shift = CMat::identity(r).scale(s.z0).sub(&s.j);
    let a = shift.adjoint().matmul(&s.u).matmul(&shift);
    let b = s.j.adjoint().matmul(&s.u).scale(s.zhat).add(&s.u.matmul(&s.j).scale(s.zhat.conj()));
    Forms { a, b }
}

/// The exponent `f(η, y)`. It is real on the domain.
pub fn f_exponent(s: &QuadratureState) -> Result<f64> {
    let sigma = s.sigma();
    if sigma >= 1.0 {
        return Err(Error::Domain("η*Uη >= 1 lies outside the integration domain".into()));
    }
    let fm = forms(s);
    let nr = (s.n as f64).powf(-s.rho);
    let eta = &s.eta;
    let f = -fm.a.form(eta, eta).re / s.tau + (1.0 - sigma).ln() + s.z0.norm_sqr() / s.tau * sigma
        + nr / s.tau * fm.b.form(eta, eta).re
        - s.y.norm_sqr() / s.tau
        + (s.z().norm_sqr() + s.y.norm_sqr()).ln();
    Ok(f)
}

/// Partials of `f` in `(Re η_1, Im η_1, …, Re y, Im y)`.
pub fn f_gradient(s: &QuadratureState) -> Result<Vec<f64>> {
    let sigma = s.sigma();
    if sigma >= 1.0 {
        return Err(Error::Domain("η*Uη >= 1 lies outside the integration domain".into()));
    }
    let fm = forms(s);
    let nr = (s.n as f64).powf(-s.rho);
    let ae = fm.a.matvec(&s.eta);
    let ue = s.u.matvec(&s.eta);
    let be = fm.b.matvec(&s.eta);
    let mut out = Vec::with_capacity(2 * s.rank() + 2);
    for k in 0..s.rank() {
        let d = -ae[k] / s.tau - ue[k] / (1.0 - sigma) + ue[k] * (s.z0.norm_sqr() / s.tau) + be[k] * (nr / s.tau);
        out.push(2.0 * d.re);
        out.push(2.0 * d.im);
    }
    let w = s.z().norm_sqr() + s.y.norm_sqr();
    let d = -s.y / s.tau + s.y / w;
    out.push(2.0 * d.re);
    out.push(2.0 * d.im);
    Ok(out)
}

/// The three pieces `g1, g2, g3` of `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GParts {
    pub g1: C,
    pub g2: C,
    pub g3: C,
}

/// Row-major square matrix of order at most four.
#[derive(Clone, Copy)]
struct Small {
    n: usize,
    a: [C; 16],
}

impl Small {
    fn zeros(n: usize) -> Self {
        Small { n, a: [C::new(0.0, 0.0); 16] }
    }

    fn at(&self, i: usize, j: usize) -> C {
        self.a[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: C) {
        self.a[i * self.n + j] = v;
    }

    fn det(&self) -> C {
        let mut b = self.a;
        det_in_place(&mut b[..self.n * self.n], self.n)
    }

    /// Determinant with the given rows and columns struck out.
    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> C {
        let m = self.n - rows.len();
        let mut b = [C::new(0.0, 0.0); 16];
        let mut k = 0;
        for i in (0..self.n).filter(|i| !rows.contains(i)) {
            for j in (0..self.n).filter(|j| !cols.contains(j)) {
                b[k] = self.at(i, j);
                k += 1;
            }
        }
        det_in_place(&mut b[..m * m], m)
    }
}

/// Blocks of the `2r × 2r` matrices behind `g`.
struct Blocks {
    r: usize,
    /// `[[z - J(I - ηη*U), -conj(y) U^{-1}], [y U, conj(z) - J*(I - Uηη*)]]`.
    m: Small,
    /// `J* U ηη* U J (I - ηη*U)`.
    k: CMat,
}

fn blocks(s: &QuadratureState) -> Blocks {
    let r = s.rank();
    let z = s.z();
    let eta = CMat::from_fn(r, 1, |i, _| s.eta[i]);
    let eet = eta.matmul(&eta.adjoint());
    let left = CMat::identity(r).sub(&eet.matmul(&s.u));
    let right = CMat::identity(r).sub(&s.u.matmul(&eet));
    let tl = CMat::identity(r).scale(z).sub(&s.j.matmul(&left));
    let br = CMat::identity(r).scale(z.conj()).sub(&s.j.adjoint().matmul(&right));
    let mut m = Small::zeros(2 * r);
    for i in 0..r {
        for j in 0..r {
            m.set(i, j, tl[(i, j)]);
            m.set(i, r + j, -s.y.conj() * s.u_inv[(i, j)]);
            m.set(r + i, j, s.y * s.u[(i, j)]);
            m.set(r + i, r + j, br[(i, j)]);
        }
    }
    let k = s.j.adjoint().matmul(&s.u).matmul(&eet).matmul(&s.u).matmul(&s.j).matmul(&left);
    Blocks { r, m, k }
}

fn check_rank(r: usize) -> Result<()> {
    if r == 0 || r > 2 {
        return Err(Error::UnsupportedRank(r));
    }
    Ok(())
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn printed_minors(s: &QuadratureState) -> GParts {
    let b = blocks(s);
    let r = b.r;
    let mm = (s.n - r - 1) as f64;
    let y = s.y;
    let w = s.z().norm_sqr() + y.norm_sqr();
    let det = b.m.det();
    let binom = mm * (mm - 1.0) / 2.0;

    let mut g2 = det * (mm / w + 2.0 * y.norm_sqr() * binom / (w * w));
    let mut g3 = C::new(0.0, 0.0);
    for a in 0..r {
        for c in 0..r {
            let sg = sign(a + c + r) * mm / w;
            let lower = b.m.minor_det(&[r + a], &[c]);
            let upper = b.m.minor_det(&[a], &[r + c]);
            g2 += (y * s.u[(a, c)] * lower - y.conj() * s.u_inv[(a, c)] * upper) * sg;
            g3 += y * b.k[(a, c)] * lower * sg;
        }
    }
    for a1 in 0..r {
        for a2 in 0..r {
            for b1 in 0..r {
                for b2 in 0..r {
                    let sg = sign(a1 + a2 + b1 + b2);
                    let d = b.m.minor_det(&[a2, r + a1], &[b1, r + b2]);
                    g2 += s.u[(a1, b1)] * s.u_inv[(a2, b2)] * d * sg;
                    g3 += s.u_inv[(a2, b2)] * b.k[(a1, b1)] * d * sg;
                }
            }
        }
    }
    GParts { g1: det, g2, g3 }
}

/// Coefficients `c_0, c_1, c_2` of `det(M + s E)` from `2r + 1` samples.
fn low_coefficients(m: &Small, e: &Small, scale: f64) -> [C; 3] {
    let d = m.n + 1;
    let nodes: Vec<f64> = (0..d).map(|k| scale * (PI * (k as f64 + 0.5) / d as f64).cos()).collect();
    let vals: Vec<C> = nodes
        .iter()
        .map(|&s| {
            let mut t = *m;
            for i in 0..m.n * m.n {
                t.a[i] += e.a[i] * s;
            }
            t.det()
        })
        .collect();
    let v = CMat::from_fn(d, d, |i, j| C::new(nodes[i].powi(j as i32), 0.0));
    let inv = v.inverse().expect("distinct nodes");
    let c = inv.matvec(&vals);
    [c[0], c[1], c[2]]
}

fn mu_extraction_at(s: &QuadratureState) -> GParts {
    let b = blocks(s);
    let r = b.r;
    let mm = (s.n - r - 1) as f64;
    let y = s.y;
    let w = s.z().norm_sqr() + y.norm_sqr();
    let binom = mm * (mm - 1.0) / 2.0;
    let mut e1 = Small::zeros(2 * r);
    let mut e2 = Small::zeros(2 * r);
    for i in 0..r {
        for j in 0..r {
            e1.set(i, r + j, -s.u_inv[(i, j)]);
            e2.set(i, r + j, -s.u_inv[(i, j)]);
            e1.set(r + i, j, s.u[(i, j)]);
            e2.set(r + i, j, b.k[(i, j)]);
        }
    }
    let scale = 1f64.max(s.z().norm()).max(y.norm());
    let [d0, d1, d2] = low_coefficients(&b.m, &e1, scale);
    // (|z|^2 + |s + y|^2)^M / w^M = 1 + q1 s + q2 s^2 + O(s^3)
    let bb = y + y.conj();
    let q1 = bb * (mm / w);
    let q2 = mm / w + bb * bb * (binom / (w * w));
    let g2 = d0 * q2 + d1 * q1 + d2;
    let [f0, f1, f2] = low_coefficients(&b.m, &e2, scale);
    // (|z|^2 + y (s + conj y))^M / w^M
    let p1 = y * (mm / w);
    let p2 = y * y * (binom / (w * w));
    let g3 = f0 * p2 + f1 * p1 + f2;
    GParts { g1: d0, g2, g3 }
}

fn mu_extraction(s: &QuadratureState) -> GParts {
    // The integrand's other factors depend on |y| only, and the coefficients
    // carry phases e^{ik arg y} with |k| <= 2: four phases average exactly.
    let mut acc = GParts { g1: C::new(0.0, 0.0), g2: C::new(0.0, 0.0), g3: C::new(0.0, 0.0) };
    let rot = [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)];
    for q in rot {
        let p = mu_extraction_at(&s.with_y(s.y * q));
        acc.g1 += p.g1 * 0.25;
        acc.g2 += p.g2 * 0.25;
        acc.g3 += p.g3 * 0.25;
    }
    acc
}

pub fn g_parts(s: &QuadratureState, strategy: GStrategy) -> Result<GParts> {
    check_rank(s.rank())?;
    Ok(match strategy {
        GStrategy::PrintedMinors => printed_minors(s),
        GStrategy::MuExtraction => mu_extraction(s),
    })
}

/// `g = (1 - η*Uη)^{-r-1} (|z|^2 + |y|^2)^{-r-1} (g1 + τ/N g2 + g3)`.
pub fn g_integrand(s: &QuadratureState, strategy: GStrategy) -> Result<C> {
    let p = g_parts(s, strategy)?;
    let r = s.rank() as i32;
    let sigma = s.sigma();
    let w = s.z().norm_sqr() + s.y.norm_sqr();
    let pre = ((1.0 - sigma) * w).powi(-r - 1);
    Ok((p.g1 + p.g2 * (s.tau / s.n as f64) + p.g3) * pre)
}
