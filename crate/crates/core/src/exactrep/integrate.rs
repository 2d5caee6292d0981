//! Tensor Gauss-Legendre quadrature of the representation.
//!
//! With `q = P η` the domain is the unit ball `|q| <= 1` and `dη = dq / det U`.
//! Every factor of the integrand is invariant under `q -> e^{iφ} q` and, after
//! the phase average built into `g`, under rotations of `y`. What is left:
//!
//! * rank 1: `π dσ` with `σ = |q|^2`,
//! * rank 2: `(π/2) σ dσ dc dψ` with `q = sqrt(σ) (sqrt(c), sqrt(1 - c) e^{iψ})`,
//! * `y`: `π dt` with `t = |y|^2`.
//!
//! Radial ranges come from the concave exponents in `σ` and `t` and cut
//! where they fall `CUT` below their maximum.

use super::{blocks, check_rank, forms, g_parts, log_dn, GStrategy, QuadratureState};
use crate::asymptotics::EvaluationPoint;
use crate::linalg::CMat;
use crate::model::ModelParams;
use crate::quad::{composite, gauss_legendre, pairwise_sum};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const CUT: f64 = 60.0;
const PANELS: usize = 4;
const DOUBLING_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    /// Nodes per radial variable (`σ` and `t`), a multiple of 4.
    pub radial: usize,
    /// Nodes per angle (rank 2 only).
    pub angular: usize,
    pub strategy: GStrategy,
    /// Repeat on the doubled grid and fail if the two differ by more than `1e-4`.
    pub check: bool,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { radial: 64, angular: 32, strategy: GStrategy::MuExtraction, check: true }
    }
}

impl QuadSettings {
    fn validate(&self) -> Result<()> {
        if self.radial < PANELS || self.radial % PANELS != 0 {
            return Err(Error::Config(format!("radial node count must be a positive multiple of {PANELS}")));
        }
        if self.angular < 2 {
            return Err(Error::Config("angular node count must be at least 2".into()));
        }
        Ok(())
    }

    fn doubled(&self) -> Self {
        QuadSettings { radial: 2 * self.radial, angular: 2 * self.angular, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    /// `O_N(z)`.
    pub value: f64,
    /// `value` in the normalization of the matching limit law.
    pub normalized: f64,
    /// Relative change under node doubling, when checked.
    pub delta: Option<f64>,
    /// Integrand evaluations of the reported grid.
    pub nodes: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Parts {
    Full,
    /// `g1` alone: the eigenvalue density.
    OnePoint,
}

struct Setup {
    base: QuadratureState,
    pinv: CMat,
    a: CMat,
    b: CMat,
    log_pre: f64,
    nr: f64,
    z2: f64,
}

fn setup(params: &ModelParams, point: &EvaluationPoint) -> Result<Setup> {
    let r = params.rank();
    check_rank(r)?;
    point.validate(params)?;
    let base = QuadratureState::new(params, point, vec![C::new(0.0, 0.0); r], C::new(0.0, 0.0))?;
    let z = base.z();
    let log_det_u = base.u.det().re.ln();
    let log_pre = log_dn(params.n, r, params.tau, z, &base.u)? - log_det_u;
    let fm = forms(&base);
    Ok(Setup {
        pinv: params.spec.similarity_inverse().clone(),
        a: fm.a,
        b: fm.b,
        log_pre,
        nr: (params.n as f64).powf(-base.rho),
        z2: z.norm_sqr(),
        base,
    })
}

/// Largest interval around `peak` inside `[lo, hi]` where `h >= h(peak) - CUT`.
fn support(h: impl Fn(f64) -> f64, lo: f64, hi: f64, peak: f64) -> (f64, f64) {
    let thr = h(peak) - CUT;
    let edge = |inside: f64, outside: f64| {
        if h(outside) >= thr {
            return outside;
        }
        let (mut a, mut b) = (inside, outside);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if h(m) >= thr {
                a = m;
            } else {
                b = m;
            }
        }
        b
    };
    (edge(peak, lo), edge(peak, hi))
}

fn rule(a: f64, b: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let breaks: Vec<f64> = (0..=PANELS).map(|k| a + (b - a) * k as f64 / PANELS as f64).collect();
    composite(&breaks, nodes / PANELS)
}

/// Partial sum of one direction: `exp(shift) * (re + i im)`.
struct Partial {
    shift: f64,
    re: f64,
    im: f64,
}

struct TGrid {
    t: Vec<f64>,
    /// `log(π w_k) + N(-t/τ + log(|z|^2 + t)) - (r+1) log(|z|^2 + t)`.
    log_w: Vec<f64>,
}

fn t_grid(s: &Setup, radial: usize) -> TGrid {
    let n = s.base.n as f64;
    let r = s.base.rank() as f64;
    let m = n - r - 1.0;
    let tau = s.base.tau;
    let z2 = s.z2;
    let h = |t: f64| -n * t / tau + m * (z2 + t).ln();
    let peak = (m * tau / n - z2).max(0.0);
    let mut hi = 2.0 * peak.max(tau / n);
    while h(hi) >= h(peak) - CUT {
        hi *= 2.0;
    }
    let (a, b) = support(h, 0.0, hi, peak);
    let (t, w) = rule(a, b, radial);
    let log_w = t
        .iter()
        .zip(&w)
        .map(|(&t, &w)| (PI * w).ln() + n * (-t / tau + (z2 + t).ln()) - (r + 1.0) * (z2 + t).ln())
        .collect();
    TGrid { t, log_w }
}

fn direction(s: &Setup, u: &[C], dir_log_w: f64, tg: &TGrid, radial: usize, strategy: GStrategy, parts: Parts) -> Result<Partial> {
    let r = s.base.rank();
    let n = s.base.n as f64;
    let m = n - r as f64 - 1.0;
    let tau = s.base.tau;
    let v = s.pinv.matvec(u);
    let kappa = (-s.a.form(&v, &v).re + s.base.z0.norm_sqr() + s.nr * s.b.form(&v, &v).re) / tau;
    let h = |x: f64| {
        if x >= 1.0 {
            if m > 0.0 {
                f64::NEG_INFINITY
            } else {
                n * kappa
            }
        } else {
            m * (1.0 - x).ln() + n * kappa * x
        }
    };
    let peak = if m == 0.0 {
        if kappa > 0.0 {
            1.0
        } else {
            0.0
        }
    } else if n * kappa > m {
        1.0 - m / (n * kappa)
    } else {
        0.0
    };
    let (a, b) = support(h, 0.0, 1.0, peak);
    let (sig, sw) = rule(a, b, radial);

    let mut logs = Vec::with_capacity(sig.len() * tg.t.len());
    let mut vals = Vec::with_capacity(logs.capacity());
    let mut st = s.base.clone();
    for (&x, &wx) in sig.iter().zip(&sw) {
        let mut lx = s.log_pre + dir_log_w + wx.ln() + n * kappa * x + m * (1.0 - x).ln();
        if r == 2 {
            lx += x.ln();
        }
        let sq = x.sqrt();
        for (k, e) in st.eta.iter_mut().enumerate() {
            *e = v[k] * sq;
        }
        for (&t, &lt) in tg.t.iter().zip(&tg.log_w) {
            st.y = C::new(t.sqrt(), 0.0);
            let g = match parts {
                Parts::Full => {
                    let p = g_parts(&st, strategy)?;
                    p.g1 + p.g2 * (tau / n) + p.g3
                }
                Parts::OnePoint => blocks(&st).m.det(),
            };
            logs.push(lx + lt);
            vals.push(g);
        }
    }
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let re: Vec<f64> = logs.iter().zip(&vals).map(|(l, g)| (l - shift).exp() * g.re).collect();
    let im: Vec<f64> = logs.iter().zip(&vals).map(|(l, g)| (l - shift).exp() * g.im).collect();
    Ok(Partial { shift, re: pairwise_sum(&re), im: pairwise_sum(&im) })
}

fn integrate(s: &Setup, q: &QuadSettings, parts: Parts) -> Result<(f64, usize)> {
    let r = s.base.rank();
    let tg = t_grid(s, q.radial);
    let mut dirs: Vec<(Vec<C>, f64)> = Vec::new();
    if r == 1 {
        dirs.push((vec![C::new(1.0, 0.0)], PI.ln()));
    } else {
        let (xc, wc) = gauss_legendre(q.angular);
        for (&xc, &wc) in xc.iter().zip(&wc) {
            let c = 0.5 * (xc + 1.0);
            for j in 0..q.angular {
                let psi = 2.0 * PI * j as f64 / q.angular as f64;
                let u = vec![C::new(c.sqrt(), 0.0), C::from_polar((1.0 - c).sqrt(), psi)];
                // (π/2) * (wc/2) * (2π/angular)
                dirs.push((u, (PI * PI * wc / (2.0 * q.angular as f64)).ln()));
            }
        }
    }
    let partials: Vec<Partial> = dirs
        .par_iter()
        .map(|(u, lw)| direction(s, u, *lw, &tg, q.radial, q.strategy, parts))
        .collect::<Result<_>>()?;
    let top = partials.iter().map(|p| p.shift).fold(f64::NEG_INFINITY, f64::max);
    let re: Vec<f64> = partials.iter().map(|p| (p.shift - top).exp() * p.re).collect();
    let im: Vec<f64> = partials.iter().map(|p| (p.shift - top).exp() * p.im).collect();
    let (re, im) = (pairwise_sum(&re), pairwise_sum(&im));
    if im.abs() > 1e-6 * re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Accuracy(format!("integral has imaginary part {im:.3e} against real part {re:.3e}")));
    }
    let nodes = dirs.len() * q.radial * q.radial;
    Ok((top.exp() * re, nodes))
}

fn run(params: &ModelParams, point: &EvaluationPoint, quad: &QuadSettings, parts: Parts) -> Result<ExactResult> {
    quad.validate()?;
    let s = setup(params, point)?;
    let (coarse, nodes) = integrate(&s, quad, parts)?;
    let norm = point.normalization(params);
    if !quad.check {
        return Ok(ExactResult { value: coarse, normalized: coarse * norm, delta: None, nodes });
    }
    let (fine, nodes) = integrate(&s, &quad.doubled(), parts)?;
    let delta = (fine - coarse).abs() / fine.abs();
    if !(delta <= DOUBLING_TOL) {
        return Err(Error::Accuracy(format!(
            "doubling the quadrature grid changed the result by {delta:.3e} relative"
        )));
    }
    Ok(ExactResult { value: fine, normalized: fine * norm, delta: Some(delta), nodes })
}

/// `O_N(z)` at `point` from the exact representation.
pub fn exact_density(params: &ModelParams, point: &EvaluationPoint, quad: &QuadSettings) -> Result<ExactResult> {
    run(params, point, quad, Parts::Full)
}

/// The same quadrature with `g` replaced by `g1`, which gives the mean
/// eigenvalue density `E[(1/N) sum_i δ(z - z_i)]`.
pub fn exact_one_point(params: &ModelParams, point: &EvaluationPoint, quad: &QuadSettings) -> Result<ExactResult> {
    run(params, point, quad, Parts::OnePoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{edge_density, Scaling};
    use crate::model::JordanSpec;
    use crate::quad::adaptive;
    use crate::specfun::ln_gamma;

    fn ginibre(n: usize) -> ModelParams {
        ModelParams::new(n, 1.0, JordanSpec::single_block(C::new(0.0, 0.0), 1).unwrap()).unwrap()
    }

    fn at(z: C) -> EvaluationPoint {
        EvaluationPoint::new(z, C::new(0.0, 0.0), Scaling::Additive { rho: 0.5 })
    }

    /// `X0 = 0`, `τ = 1`, rank 1: with `J = 0` and `U = 1` the `η` integral is
    /// elementary and `g` only depends on `t`.
    fn scalar_oracle(n: usize, z: f64) -> f64 {
        let nf = n as f64;
        let z2 = z * z;
        let log_d = (nf - 2.0) * PI.ln() - nf.ln() - ln_gamma(nf - 1.0) + (nf + 1.0) * (nf.ln() - PI.ln()) - nf * z2;
        let f = |t: f64| {
            let w = z2 + t;
            let l = -nf * t + (nf - 3.0) * w.ln() + log_d;
            l.exp() * (w * w + (nf - 1.0) / nf * w + (nf - 1.0) * (nf - 2.0) / nf * t)
        };
        let (v, _) = adaptive(f, 0.0, 20.0, 1e-13);
        v * PI * PI / (nf - 1.0)
    }

    fn ginibre_density(n: usize, z: f64) -> f64 {
        let x = n as f64 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..n {
            term *= x / k as f64;
            sum += term;
        }
        (-x).exp() * sum / PI
    }

    #[test]
    fn scalar_zero_matches_elementary_integral() {
        let q = QuadSettings::default();
        for (n, z) in [(16usize, 0.5f64), (8, 0.9), (16, 1.1), (5, 0.2)] {
            let want = scalar_oracle(n, z);
            for strategy in [GStrategy::MuExtraction, GStrategy::PrintedMinors] {
                let got = exact_density(&ginibre(n), &at(C::new(z, 0.0)), &QuadSettings { strategy, ..q }).unwrap();
                assert!((got.value / want - 1.0).abs() < 1e-9, "n={n} z={z}: {} vs {want}", got.value);
                assert!(got.delta.unwrap() < 1e-4);
            }
        }
        assert!((scalar_oracle(16, 0.5) - 3.81972).abs() < 5e-5);
    }

    #[test]
    fn one_point_is_the_ginibre_density() {
        for (n, z) in [(16usize, C::new(0.5, 0.0)), (10, C::new(0.3, 0.8)), (12, C::new(1.2, 0.0))] {
            let got = exact_one_point(&ginibre(n), &at(z), &QuadSettings::default()).unwrap();
            let want = ginibre_density(n, z.norm());
            assert!((got.value / want - 1.0).abs() < 1e-9, "n={n}: {} vs {want}", got.value);
        }
    }

    #[test]
    fn rank_two_one_point_is_a_density_with_two_outliers() {
        // Diagonal A0 = diag(2, -2i) with a non-trivial similarity. Near an
        // outlier about one eigenvalue in N sits in a disk of radius ~0.5.
        let spec = JordanSpec::new(
            vec![
                crate::model::JordanBlockGroup { theta: C::new(2.0, 0.0), p: 1, n: 1 },
                crate::model::JordanBlockGroup { theta: C::new(0.0, -2.0), p: 1, n: 1 },
            ],
            CMat::from_rows(&[vec![C::new(1.0, 0.0), C::new(0.3, 0.1)], vec![C::new(0.0, 0.0), C::new(1.0, 0.0)]]),
        )
        .unwrap();
        let params = ModelParams::new(6, 1.0, spec).unwrap();
        let q = QuadSettings { radial: 32, angular: 12, check: false, ..QuadSettings::default() };
        let v = exact_one_point(&params, &at(C::new(2.0, 0.0)), &q).unwrap().value;
        assert!(v > 0.0 && v.is_finite());
        let o = exact_density(&params, &at(C::new(2.0, 0.0)), &q).unwrap().value;
        assert!(o > v, "overlap density {o} below eigenvalue density {v}");
    }

    #[test]
    fn rank_two_strategies_give_the_same_integral() {
        let spec = JordanSpec::single_block(C::new(1.0, 0.0), 2).unwrap();
        let params = ModelParams::new(8, 1.0, spec).unwrap();
        let p = at(C::new(0.9, 0.1));
        let q = QuadSettings { radial: 16, angular: 8, check: false, ..QuadSettings::default() };
        let a = exact_density(&params, &p, &q).unwrap().value;
        let b = exact_density(&params, &p, &QuadSettings { strategy: GStrategy::PrintedMinors, ..q }).unwrap().value;
        assert!(a > 0.0);
        assert!((a / b - 1.0).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn edge_values_approach_the_limit() {
        let z0 = C::new(1.0, 0.0);
        let want = edge_density(1, 1.0, C::new(0.0, 0.0)).unwrap();
        let mut gaps = Vec::new();
        for n in [16usize, 32, 64] {
            let params = ModelParams::new(n, 1.0, JordanSpec::single_block(z0, 1).unwrap()).unwrap();
            let p = EvaluationPoint::new(z0, C::new(0.0, 0.0), Scaling::EdgeMultiplicative);
            let got = exact_density(&params, &p, &QuadSettings::default()).unwrap();
            assert!(got.value > 0.0);
            gaps.push((got.normalized - want).abs());
        }
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn rejects_unsupported_ranks_and_bad_grids() {
        let spec = JordanSpec::single_block(C::new(2.0, 0.0), 3).unwrap();
        let params = ModelParams::new(10, 1.0, spec).unwrap();
        let err = exact_density(&params, &at(C::new(2.0, 0.0)), &QuadSettings::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedRank(3)));
        let bad = QuadSettings { radial: 30, ..QuadSettings::default() };
        assert!(exact_density(&ginibre(8), &at(C::new(0.1, 0.0)), &bad).is_err());
        let u = CMat::identity(4);
        assert!(log_dn(4, 4, 1.0, C::new(0.0, 0.0), &u).is_err());
    }

    #[test]
    fn bitwise_reproducible_across_pools() {
        let spec = JordanSpec::single_block(C::new(1.0, 0.0), 2).unwrap();
        let params = ModelParams::new(6, 1.0, spec).unwrap();
        let q = QuadSettings { radial: 8, angular: 6, check: false, ..QuadSettings::default() };
        let p = at(C::new(1.0, 0.0));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| exact_density(&params, &p, &q).unwrap().value)
        };
        assert_eq!(run(1).to_bits(), run(3).to_bits());
    }
}
