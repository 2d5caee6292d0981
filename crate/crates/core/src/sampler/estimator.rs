use super::local::eigenpairs_in_disk;
use super::overlap::{decompose, diagonal};
use super::{sample_matrix, trial_rng, OverlapSample, Resample};
use crate::asymptotics::EvaluationPoint;
use crate::model::{build_x0, ModelParams};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_ATTEMPTS: usize = 100;

/// How each trial's eigenvalues are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    /// Full dense decomposition for small N, local solves otherwise.
    #[default]
    Auto,
    Dense,
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub trials: usize,
    pub eps_hat: f64,
    pub seed: u64,
    /// Minimal eigenvalue spacing; `None` means `1e-10 * sqrt(tau/N)`.
    pub dedup_tol: Option<f64>,
    #[serde(default)]
    pub method: SpectrumMethod,
}

impl EstimatorConfig {
    pub fn new(trials: usize, eps_hat: f64, seed: u64) -> Self {
        EstimatorConfig { trials, eps_hat, seed, dedup_tol: None, method: SpectrumMethod::Auto }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if !(self.eps_hat > 0.0 && self.eps_hat <= 0.5) {
            return Err(Error::Config(format!("eps_hat must lie in (0, 0.5], got {}", self.eps_hat)));
        }
        if let Some(t) = self.dedup_tol {
            if !(t >= 0.0) {
                return Err(Error::Config("dedup_tol must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn dedup(&self, params: &ModelParams) -> f64 {
        self.dedup_tol.unwrap_or(1e-10 * (params.tau / params.n as f64).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub zhat: C,
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
    /// No eigenvalue fell in the bin in any trial.
    pub starved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub estimates: Vec<DensityEstimate>,
    pub resampled_degenerate: u64,
    pub resampled_ill_conditioned: u64,
    pub method: SpectrumMethod,
    /// Captured samples, in trial order, when requested.
    #[serde(skip)]
    pub samples: Vec<OverlapSample>,
}

struct Bin {
    z: C,
    eps: f64,
    scale: f64,
}

struct Cluster {
    center: C,
    radius: f64,
}

/// Groups bins into disks of radius at most `cap` around their centroid.
fn clusters(bins: &[Bin], cap: f64) -> (Vec<Cluster>, Vec<usize>) {
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut owner = vec![0; bins.len()];
    let disk = |idx: &[usize]| {
        let c = idx.iter().map(|&i| bins[i].z).sum::<C>() / idx.len() as f64;
        let r = idx.iter().map(|&i| (bins[i].z - c).norm() + bins[i].eps).fold(0.0, f64::max);
        (c, r)
    };
    for i in 0..bins.len() {
        let mut placed = false;
        for (k, m) in members.iter_mut().enumerate() {
            let mut trial = m.clone();
            trial.push(i);
            if disk(&trial).1 <= cap {
                *m = trial;
                owner[i] = k;
                placed = true;
                break;
            }
        }
        if !placed {
            owner[i] = members.len();
            members.push(vec![i]);
        }
    }
    let cl = members
        .iter()
        .map(|m| {
            let (center, radius) = disk(m);
            Cluster { center, radius }
        })
        .collect();
    (cl, owner)
}

fn resolve(method: SpectrumMethod, n: usize, clusters: usize) -> SpectrumMethod {
    match method {
        SpectrumMethod::Auto => {
            let nf = n as f64;
            if n > 32 && clusters as f64 * (nf / 20.0 + 100.0) < nf {
                SpectrumMethod::Local
            } else {
                SpectrumMethod::Dense
            }
        }
        m => m,
    }
}

struct TrialOut {
    weights: Vec<f64>,
    counts: Vec<u64>,
    degenerate: u64,
    ill: u64,
    captured: Vec<OverlapSample>,
}

/// Eigenvalues with overlaps of one trial: all of them (dense) or those in
/// the given disks (local). Resamples are redrawn from the same stream.
fn trial_spectrum(
    params: &ModelParams,
    x0: &faer::Mat<C>,
    seed: u64,
    k: u64,
    dedup: f64,
    method: SpectrumMethod,
    disks: &[(C, f64)],
) -> Result<(Vec<(C, f64)>, u64, u64)> {
    let mut rng = trial_rng(seed, k);
    let (mut degenerate, mut ill) = (0, 0);
    for _ in 0..MAX_ATTEMPTS {
        let x = sample_matrix(params, x0, &mut rng);
        let got = match method {
            SpectrumMethod::Local => {
                let mut all = Vec::new();
                let mut bad = None;
                for &(c, r) in disks {
                    match eigenpairs_in_disk(x.as_ref(), c, r, dedup, &mut rng)? {
                        Ok(v) => all.extend(v),
                        Err(e) => {
                            bad = Some(e);
                            break;
                        }
                    }
                }
                match bad {
                    Some(e) => Err(e),
                    None => Ok(all),
                }
            }
            _ => decompose(x.as_ref(), dedup)?
                .map(|d| diagonal(&d, k).into_iter().map(|s| (s.z, s.o)).collect()),
        };
        match got {
            Ok(v) => return Ok((v, degenerate, ill)),
            Err(Resample::Degenerate) => degenerate += 1,
            Err(Resample::IllConditioned) => ill += 1,
        }
    }
    Err(Error::Accuracy(format!(
        "trial {k}: {MAX_ATTEMPTS} consecutive samples rejected"
    )))
}

/// Binned Monte Carlo estimate of the self-overlap density at several points
/// sharing one model. Per-trial results are reduced in trial order, so the
/// output does not depend on the thread count.
pub fn estimate_density_batch(
    params: &ModelParams,
    points: &[EvaluationPoint],
    cfg: &EstimatorConfig,
    keep_samples: bool,
) -> Result<BatchEstimate> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Config("no evaluation points".into()));
    }
    let n = params.n;
    let bins: Vec<Bin> = points
        .iter()
        .map(|p| {
            p.validate(params)?;
            let eps = cfg.eps_hat * p.unit(params).norm();
            Ok(Bin { z: p.physical(params), eps, scale: p.normalization(params) / (n as f64 * PI * eps * eps) })
        })
        .collect::<Result<_>>()?;
    let cap = 1.5 * (params.tau / n as f64).sqrt();
    let (cl, _) = clusters(&bins, cap);
    let method = resolve(cfg.method, n, cl.len());
    let disks: Vec<(C, f64)> = cl.iter().map(|c| (c.center, c.radius)).collect();
    let x0 = build_x0(&params.spec, n)?;
    let dedup = cfg.dedup(params);

    let outs: Vec<Result<TrialOut>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|k| {
            let (eig, degenerate, ill) = trial_spectrum(params, &x0, cfg.seed, k, dedup, method, &disks)?;
            let mut weights = vec![0.0; bins.len()];
            let mut counts = vec![0; bins.len()];
            let mut captured = Vec::new();
            for &(z, o) in &eig {
                let mut hit = false;
                for (b, bin) in bins.iter().enumerate() {
                    if (z - bin.z).norm() <= bin.eps {
                        weights[b] += o;
                        counts[b] += 1;
                        hit = true;
                    }
                }
                if hit && keep_samples {
                    captured.push(OverlapSample { z, o, trial: k });
                }
            }
            Ok(TrialOut { weights, counts, degenerate, ill, captured })
        })
        .collect();

    let m = cfg.trials as f64;
    let mut sum = vec![0.0; bins.len()];
    let mut sum_sq = vec![0.0; bins.len()];
    let mut count = vec![0u64; bins.len()];
    let (mut degenerate, mut ill) = (0, 0);
    let mut samples = Vec::new();
    for out in outs {
        let out = out?;
        for b in 0..bins.len() {
            let w = out.weights[b] * bins[b].scale;
            sum[b] += w;
            sum_sq[b] += w * w;
            count[b] += out.counts[b];
        }
        degenerate += out.degenerate;
        ill += out.ill;
        samples.extend(out.captured);
    }
    let estimates = points
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let mean = sum[b] / m;
            let var = if cfg.trials > 1 { ((sum_sq[b] - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
            let starved = count[b] == 0;
            DensityEstimate {
                zhat: p.zhat,
                value: if starved { 0.0 } else { mean },
                stderr: if starved { 0.0 } else { (var / m).sqrt() },
                count: count[b],
                starved,
            }
        })
        .collect();
    Ok(BatchEstimate {
        estimates,
        resampled_degenerate: degenerate,
        resampled_ill_conditioned: ill,
        method,
        samples,
    })
}

pub fn estimate_density(params: &ModelParams, point: &EvaluationPoint, cfg: &EstimatorConfig) -> Result<DensityEstimate> {
    Ok(estimate_density_batch(params, std::slice::from_ref(point), cfg, false)?.estimates[0])
}

/// Mean and standard error of the number of eigenvalues per trial in
/// `|z - center| <= radius`.
pub fn mean_count_in_disk(
    params: &ModelParams,
    center: C,
    radius: f64,
    trials: usize,
    seed: u64,
    method: SpectrumMethod,
) -> Result<(f64, f64)> {
    if trials == 0 || !(radius > 0.0) {
        return Err(Error::Config("need positive trials and radius".into()));
    }
    let n = params.n;
    let method = resolve(method, n, 1);
    let x0 = build_x0(&params.spec, n)?;
    let dedup = 1e-10 * (params.tau / n as f64).sqrt();
    let counts: Vec<Result<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let (eig, _, _) = trial_spectrum(params, &x0, seed, k, dedup, method, &[(center, radius)])?;
            Ok(eig.iter().filter(|(z, _)| (z - center).norm() <= radius).count() as f64)
        })
        .collect();
    let mut s = 0.0;
    let mut s2 = 0.0;
    for c in counts {
        let c = c?;
        s += c;
        s2 += c * c;
    }
    let m = trials as f64;
    let mean = s / m;
    let var = if trials > 1 { ((s2 - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::Scaling;
    use crate::model::JordanSpec;

    fn edge_points(zhats: &[f64]) -> Vec<EvaluationPoint> {
        zhats
            .iter()
            .map(|&u| EvaluationPoint::new(C::new(1.0, 0.0), C::new(u, 0.0), Scaling::EdgeMultiplicative))
            .collect()
    }

    #[test]
    fn edge_triplet_forms_one_cluster() {
        let n = 1024.0f64;
        let bins: Vec<Bin> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|u| Bin { z: C::new(1.0 + u / n.sqrt(), 0.0), eps: 0.2 / n.sqrt(), scale: 1.0 })
            .collect();
        let (cl, owner) = clusters(&bins, 1.5 / n.sqrt());
        assert_eq!(cl.len(), 1);
        assert_eq!(owner, vec![0, 0, 0]);
        assert!((cl[0].center - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_wide_bins() {
        let params = ModelParams::new(16, 1.0, JordanSpec::empty()).unwrap();
        let cfg = EstimatorConfig::new(10, 0.6, 1);
        assert!(matches!(
            estimate_density_batch(&params, &edge_points(&[0.0]), &cfg, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let params = ModelParams::new(48, 1.0, JordanSpec::empty()).unwrap();
        let cfg = EstimatorConfig::new(40, 0.3, 9);
        let pts = edge_points(&[-1.0, 0.0, 1.0]);
        let a = estimate_density_batch(&params, &pts, &cfg, true).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_density_batch(&params, &pts, &cfg, true).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn local_and_dense_agree_per_run() {
        let params = ModelParams::new(64, 1.0, JordanSpec::empty()).unwrap();
        let pts = edge_points(&[-1.0, 0.0, 1.0]);
        let mut cfg = EstimatorConfig::new(30, 0.3, 4);
        cfg.method = SpectrumMethod::Dense;
        let d = estimate_density_batch(&params, &pts, &cfg, false).unwrap();
        cfg.method = SpectrumMethod::Local;
        let l = estimate_density_batch(&params, &pts, &cfg, false).unwrap();
        for (a, b) in d.estimates.iter().zip(&l.estimates) {
            assert_eq!(a.count, b.count);
            assert!((a.value - b.value).abs() <= 1e-7 * a.value.abs());
        }
    }

    #[test]
    fn starvation_is_flagged() {
        let spec = JordanSpec::single_block(C::new(3.0, 0.0), 1).unwrap();
        let params = ModelParams::new(16, 1.0, spec).unwrap();
        // A point far outside both the bulk and the outlier.
        let p = EvaluationPoint::new(C::new(0.0, 2.0), C::new(0.0, 0.0), Scaling::Additive { rho: 0.5 });
        let e = estimate_density(&params, &p, &EstimatorConfig::new(20, 0.2, 1)).unwrap();
        assert!(e.starved);
        assert_eq!((e.value, e.stderr, e.count), (0.0, 0.0, 0));
    }
}
