//! Large-N limits of the mean self-overlap density.
//!
//! All densities are per unit area of the rescaled variable `zhat`, in the
//! normalization of the estimators in [`crate::sampler`]: the edge law is the
//! limit of `N^{-1/2} O_N(z)`, the outlier laws the limit of `O_N(z)` itself,
//! where `O_N(z) = E[(1/N) sum_i O_ii delta(z - z_i)]`.

use crate::model::{JordanSpec, ModelParams};
use crate::specfun::{e_trunc, ie_sequence, ln_gamma};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How `zhat` maps to the physical point `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scaling {
    /// `z = z0 (1 + N^{-1/2} zhat)`, `|z0| = sqrt(tau)`.
    EdgeMultiplicative,
    /// `z = z0 + N^{-1/(2r)} zhat` around an outlier of a size-`r` block.
    OutlierAdditive,
    /// `z = z0 + (N (1/tau - 1/|z0|^2))^{-1/2} zhat`.
    OutlierAdditiveNormalized,
    /// `z = z0 + N^{-rho} zhat` with no regime requirement.
    Additive { rho: f64 },
}

impl Scaling {
    pub fn name(&self) -> &'static str {
        match self {
            Scaling::EdgeMultiplicative => "edge-multiplicative",
            Scaling::OutlierAdditive => "outlier-additive",
            Scaling::OutlierAdditiveNormalized => "outlier-additive-normalized",
            Scaling::Additive { .. } => "additive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoint {
    pub z0: C,
    pub zhat: C,
    pub scaling: Scaling,
}

impl EvaluationPoint {
    pub fn new(z0: C, zhat: C, scaling: Scaling) -> Self {
        EvaluationPoint { z0, zhat, scaling }
    }

    /// Checks the regime condition of the scaling against the model.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let tau = params.tau;
        let m2 = self.z0.norm_sqr();
        match self.scaling {
            Scaling::EdgeMultiplicative => {
                if (m2 - tau).abs() > 1e-12 * tau {
                    return Err(Error::Domain(format!("edge scaling needs |z0|^2 = tau, got |z0|^2 = {m2}, tau = {tau}")));
                }
            }
            Scaling::OutlierAdditive | Scaling::OutlierAdditiveNormalized => {
                if m2 <= tau {
                    return Err(Error::Domain(format!("outlier scaling needs |z0|^2 > tau, got |z0|^2 = {m2}, tau = {tau}")));
                }
            }
            Scaling::Additive { rho } => {
                if !rho.is_finite() {
                    return Err(Error::Domain("scaling exponent must be finite".into()));
                }
            }
        }
        if !self.zhat.is_finite() || !self.z0.is_finite() {
            return Err(Error::Domain("non-finite evaluation point".into()));
        }
        Ok(())
    }

    /// Exponent `rho` in `z = z0 + N^{-rho} zhat'`.
    pub fn rho(&self, params: &ModelParams) -> f64 {
        match self.scaling {
            Scaling::EdgeMultiplicative | Scaling::OutlierAdditiveNormalized => 0.5,
            Scaling::OutlierAdditive => 0.5 / block_size_at(&params.spec, self.z0) as f64,
            Scaling::Additive { rho } => rho,
        }
    }

    /// Physical length of one `zhat` unit, with its phase: `z = z0 + unit * zhat`.
    pub fn unit(&self, params: &ModelParams) -> C {
        let n = params.n as f64;
        match self.scaling {
            Scaling::EdgeMultiplicative => self.z0 / n.sqrt(),
            Scaling::OutlierAdditive | Scaling::Additive { .. } => C::new(n.powf(-self.rho(params)), 0.0),
            Scaling::OutlierAdditiveNormalized => {
                let c = 1.0 / params.tau - 1.0 / self.z0.norm_sqr();
                C::new((n * c).powf(-0.5), 0.0)
            }
        }
    }

    pub fn physical(&self, params: &ModelParams) -> C {
        self.z0 + self.unit(params) * self.zhat
    }

    /// Factor applied to `O_N(z)` to land on the limit law's normalization.
    pub fn normalization(&self, params: &ModelParams) -> f64 {
        match self.scaling {
            Scaling::EdgeMultiplicative => (params.n as f64).powf(-0.5),
            _ => 1.0,
        }
    }

    /// `(z0, zhat', rho)` with `z = z0 + N^{-rho} zhat'`.
    pub fn additive_form(&self, params: &ModelParams) -> (C, C, f64) {
        let rho = self.rho(params);
        let n = params.n as f64;
        let shift = self.unit(params) * self.zhat * n.powf(rho);
        (self.z0, shift, rho)
    }
}

fn block_size_at(spec: &JordanSpec, z0: C) -> usize {
    spec.groups().iter().filter(|g| g.theta == z0).map(|g| g.p).max().unwrap_or_else(|| spec.rank().max(1))
}

/// `exp(x^2/2) IE_a(x) IE_b(-x)` for integer orders, without forming the
/// Gaussian factor on its own.
fn ie_pair(a: i64, b: i64, x: f64) -> f64 {
    if x >= 0.0 {
        ie_sequence(a, x, true)[(a + 1) as usize] * ie_sequence(b, -x, false)[(b + 1) as usize]
    } else {
        ie_sequence(a, x, false)[(a + 1) as usize] * ie_sequence(b, -x, true)[(b + 1) as usize]
    }
}

/// Edge law for geometric multiplicity `t`.
pub fn edge_density(t: u32, tau: f64, zhat: C) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let u = zhat.re;
    let t = t as i64;
    let x = 2.0 * u;
    // exp(2u^2) IE_a(2u) IE_b(-2u) = [exp(x^2/2) IE_a(x) IE_b(-x)] with x = 2u.
    let first = (t + 1) as f64 * ie_pair(t + 1, t - 1, x);
    let second = if t > 0 { t as f64 * ie_pair(t, t, x) } else { 0.0 };
    let pref = (2.0 / PI).sqrt() * ln_gamma(t as f64 + 1.0).exp() / tau;
    Ok(pref * (first + second))
}

fn outlier_gap(tau: f64, z0: C) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let m2 = z0.norm_sqr();
    if m2 <= tau {
        return Err(Error::Domain(format!("not an outlier: |z0|^2 = {m2} <= tau = {tau}")));
    }
    Ok(1.0 - tau / m2)
}

fn single_block(spec: &JordanSpec) -> Result<(C, usize)> {
    spec.as_single_block()
        .ok_or_else(|| Error::Domain("outlier laws need a spec with exactly one Jordan block".into()))
}

/// Outlier law of a single Jordan block `P R_r(z0) P^{-1}`, in the
/// `z = z0 + N^{-1/(2r)} zhat` scaling.
pub fn outlier_jordan_density(spec: &JordanSpec, tau: f64, zhat: C) -> Result<f64> {
    let (z0, r) = single_block(spec)?;
    let g = outlier_gap(tau, z0)?;
    let k = spec.outlier_constant();
    let expo = -(g / (tau * k)) * zhat.norm_sqr().powi(r as i32);
    Ok(expo.exp() / (PI * tau * g))
}

/// Outlier law for `A0 = z0 I_r` in the normalized scaling.
pub fn outlier_identity_density(r: u32, tau: f64, z0: C, zhat: C) -> Result<f64> {
    if r == 0 {
        return Err(Error::Domain("r must be >= 1".into()));
    }
    let g = outlier_gap(tau, z0)?;
    let a = zhat.norm_sqr();
    let poly = r as f64 * e_trunc(r, a) - a * e_trunc(r - 1, a);
    Ok(poly * (-a).exp() / (PI * tau * g))
}

/// Limit of the eigenvalue one-point function near the outlier of a single
/// Jordan block at `tau = 1`; integrates to `r` over the `zhat` plane.
pub fn outlier_one_point_density(spec: &JordanSpec, z0: C, zhat: C) -> Result<f64> {
    let (theta, r) = single_block(spec)?;
    if theta != z0 {
        return Err(Error::Domain(format!("z0 = {z0} is not the block eigenvalue {theta}")));
    }
    let g = outlier_gap(1.0, z0)?;
    let c = g / spec.outlier_constant();
    let a = zhat.norm_sqr();
    let rr = r as f64;
    Ok(rr * rr * a.powi(r as i32 - 1) / PI * c * (-c * a.powi(r as i32)).exp())
}

/// Which closed-form law a curve evaluates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "kebab-case")]
pub enum TheoryKind {
    Edge { t: u32, tau: f64 },
    OutlierJordan { spec: JordanSpec, tau: f64 },
    OutlierIdentity { r: u32, tau: f64, z0: C },
    OnePoint { spec: JordanSpec, z0: C },
}

impl TheoryKind {
    pub fn tag(&self) -> &'static str {
        match self {
            TheoryKind::Edge { .. } => "edge",
            TheoryKind::OutlierJordan { .. } => "outlier-jordan",
            TheoryKind::OutlierIdentity { .. } => "outlier-identity",
            TheoryKind::OnePoint { .. } => "one-point",
        }
    }

    pub fn scaling(&self) -> Scaling {
        match self {
            TheoryKind::Edge { .. } => Scaling::EdgeMultiplicative,
            TheoryKind::OutlierJordan { .. } | TheoryKind::OnePoint { .. } => Scaling::OutlierAdditive,
            TheoryKind::OutlierIdentity { .. } => Scaling::OutlierAdditiveNormalized,
        }
    }

    pub fn eval(&self, zhat: C) -> Result<f64> {
        match self {
            TheoryKind::Edge { t, tau } => edge_density(*t, *tau, zhat),
            TheoryKind::OutlierJordan { spec, tau } => outlier_jordan_density(spec, *tau, zhat),
            TheoryKind::OutlierIdentity { r, tau, z0 } => outlier_identity_density(*r, *tau, *z0, zhat),
            TheoryKind::OnePoint { spec, z0 } => outlier_one_point_density(spec, *z0, zhat),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub kind: TheoryKind,
    pub points: Vec<(C, f64)>,
}

pub fn theory_curve(kind: TheoryKind, zhats: &[C]) -> Result<TheoryCurve> {
    let points = zhats.iter().map(|&z| Ok((z, kind.eval(z)?))).collect::<Result<Vec<_>>>()?;
    Ok(TheoryCurve { kind, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;
    use crate::model::JordanBlockGroup;
    use crate::specfun::classical_edge_profile;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn edge_t0_at_origin() {
        let v = edge_density(0, 1.0, c(0.0, 0.0)).unwrap();
        assert!(close(v, 1.0 / (PI * (2.0 * PI).sqrt()), 1e-14));
    }

    #[test]
    fn edge_t0_matches_classical_profile() {
        for i in -80..=80 {
            let u = i as f64 * 0.05;
            let v = edge_density(0, 1.0, c(u, 0.3)).unwrap();
            assert!((v - classical_edge_profile(u)).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn edge_decays_outside() {
        assert!(edge_density(0, 1.0, c(8.0, 0.0)).unwrap() < 1e-10);
        assert!(edge_density(0, 1.0, c(10.0, 0.0)).unwrap() < 1e-10);
        for t in 1..5u32 {
            let mut prev = f64::INFINITY;
            for i in 4..=20 {
                let v = edge_density(t, 1.0, c(0.5 * i as f64, 0.0)).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn edge_outer_tail_is_algebraic_for_positive_t() {
        // t IE_t(2u) IE_t(-2u) exp(2u^2) ~ t / (sqrt(2 pi) t! 2u), so the law
        // falls off like t / (2 pi u) outside the disk when t >= 1.
        let u: f64 = 200.0;
        for t in 1..4u32 {
            let v = edge_density(t, 1.0, c(u, 0.0)).unwrap();
            assert!(close(v, t as f64 / (2.0 * PI * u), 0.02), "t={t} v={v}");
        }
    }

    #[test]
    fn outlier_jordan_examples() {
        let spec = JordanSpec::single_block(c(2.0, 0.0), 1).unwrap();
        let v = outlier_jordan_density(&spec, 1.0, c(0.0, 0.0)).unwrap();
        assert!(close(v, 4.0 / (3.0 * PI), 1e-15));
        assert!(outlier_jordan_density(&spec, 1.0, c(10.0, 0.0)).unwrap() < 1e-20);
        let edge = JordanSpec::single_block(c(1.0, 0.0), 1).unwrap();
        assert!(matches!(outlier_jordan_density(&edge, 1.0, c(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn outlier_identity_examples() {
        let z0 = c(2.0, 0.0);
        assert!(close(outlier_identity_density(2, 1.0, z0, c(0.0, 0.0)).unwrap(), 8.0 / (3.0 * PI), 1e-15));
        for a in [0.0, 0.5, 1.3] {
            let v = outlier_identity_density(1, 1.0, z0, c(a, 0.0)).unwrap();
            assert!(close(v, 4.0 / (3.0 * PI) * (-a * a).exp(), 1e-15));
        }
        assert!(outlier_identity_density(1, 1.0, c(0.5, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn identity_and_jordan_agree_at_rank_one() {
        let tau = 1.0;
        let z0 = c(2.0, 0.0);
        let spec = JordanSpec::single_block(z0, 1).unwrap();
        let g: f64 = 1.0 - tau / z0.norm_sqr();
        for x in [0.0, 0.4, 1.0, 2.5] {
            let zh15 = c(x, 0.3 * x);
            let zh14 = zh15 * (tau.sqrt() / g.sqrt());
            let a = outlier_identity_density(1, tau, z0, zh15).unwrap();
            let b = outlier_jordan_density(&spec, tau, zh14).unwrap();
            assert!(close(a, b, 1e-13));
        }
    }

    #[test]
    fn one_point_examples() {
        let spec = JordanSpec::single_block(c(2.0, 0.0), 1).unwrap();
        let v = outlier_one_point_density(&spec, c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(close(v, 3.0 / (4.0 * PI), 1e-15));
        let spec2 = JordanSpec::single_block(c(2.0, 0.0), 2).unwrap();
        assert_eq!(outlier_one_point_density(&spec2, c(2.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert!(outlier_one_point_density(&spec2, c(3.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn scalings_place_points() {
        let params = ModelParams::new(100, 1.0, JordanSpec::empty()).unwrap();
        let p = EvaluationPoint::new(c(0.0, 1.0), c(1.0, 0.0), Scaling::EdgeMultiplicative);
        assert!((p.physical(&params) - c(0.0, 1.1)).norm() < 1e-15);
        p.validate(&params).unwrap();
        let bad = EvaluationPoint::new(c(0.0, 1.1), c(1.0, 0.0), Scaling::EdgeMultiplicative);
        assert!(bad.validate(&params).is_err());
        let spec = JordanSpec::single_block(c(2.0, 0.0), 2).unwrap();
        let params = ModelParams::new(16, 1.0, spec).unwrap();
        let p = EvaluationPoint::new(c(2.0, 0.0), c(1.0, 0.0), Scaling::OutlierAdditive);
        assert_eq!(p.rho(&params), 0.25);
        assert!((p.physical(&params) - c(2.5, 0.0)).norm() < 1e-15);
        let q = EvaluationPoint::new(c(2.0, 0.0), c(1.0, 0.0), Scaling::OutlierAdditiveNormalized);
        assert!((q.physical(&params) - c(2.0 + 1.0 / 12f64.sqrt(), 0.0)).norm() < 1e-15);
        let (z0, zh, rho) = q.additive_form(&params);
        assert!((z0 + zh * 16f64.powf(-rho) - q.physical(&params)).norm() < 1e-15);
    }

    #[test]
    fn curve_over_grid() {
        let zs: Vec<C> = (0..=60).map(|i| c(-3.0 + 0.1 * i as f64, 0.0)).collect();
        let curve = theory_curve(TheoryKind::Edge { t: 0, tau: 1.0 }, &zs).unwrap();
        assert_eq!(curve.points.len(), 61);
        assert!(curve.points.iter().all(|(_, v)| *v >= 0.0 && v.is_finite()));
    }

    fn random_p(seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = CMat::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                p[(i, j)] += c(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
            }
        }
        p
    }

    proptest! {
        #[test]
        fn edge_ignores_imaginary_part(t in 0u32..5, u in -4.0f64..4.0, v in -5.0f64..5.0) {
            prop_assert_eq!(edge_density(t, 1.0, c(u, v)).unwrap(), edge_density(t, 1.0, c(u, 0.0)).unwrap());
        }

        #[test]
        fn edge_tau_scaling(t in 0u32..5, u in -4.0f64..4.0, tau in 0.1f64..10.0) {
            let a = edge_density(t, tau, c(u, 0.0)).unwrap();
            let b = edge_density(t, 1.0, c(u, 0.0)).unwrap() / tau;
            prop_assert!((a - b).abs() <= 1e-15 * b.abs());
        }

        #[test]
        fn densities_non_negative(t in 0u32..6, u in -6.0f64..6.0, r in 1u32..4, a in 0.0f64..5.0) {
            prop_assert!(edge_density(t, 1.0, c(u, 0.0)).unwrap() >= 0.0);
            prop_assert!(outlier_identity_density(r, 1.0, c(0.0, 2.0), c(a, 0.0)).unwrap() >= 0.0);
        }

        #[test]
        fn jordan_scalar_similarity_invariance(seed in 0u64..100, x in 0.0f64..2.0) {
            let p = random_p(seed);
            let z0 = c(1.5, 0.5);
            let g = vec![JordanBlockGroup { theta: z0, p: 3, n: 1 }];
            let base = JordanSpec::new(g.clone(), Some(p.clone())).unwrap();
            let v0 = outlier_jordan_density(&base, 1.0, c(x, 0.1)).unwrap();
            for s in [c(2.0, 0.0), c(0.0, 1.0), c(0.5, -0.5)] {
                let sp = JordanSpec::new(g.clone(), Some(p.scale(s))).unwrap();
                let v = outlier_jordan_density(&sp, 1.0, c(x, 0.1)).unwrap();
                prop_assert!((v - v0).abs() <= 1e-12 * v0);
            }
        }
    }
}
