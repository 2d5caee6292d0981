//! Sampling the deformed ensemble and estimating the self-overlap density.
//!
//! Gaussian convention: `G` has independent entries with real and imaginary
//! parts `N(0, 1/2)`, so `E|G_ij|^2 = 1` and `X = X0 + sqrt(tau/N) G` has the
//! density `exp(-(N/tau) Tr (X - X0)(X - X0)*)` up to normalization.

mod estimator;
mod local;
mod overlap;

pub use estimator::{
    estimate_density, estimate_density_batch, mean_count_in_disk, BatchEstimate, DensityEstimate,
    EstimatorConfig, SpectrumMethod,
};
pub use local::eigenpairs_in_disk;
pub use overlap::{overlap_matrix, overlap_via_schur, overlaps, schur_witness, SchurWitness};

use crate::model::ModelParams;
use faer::Mat;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One eigenvalue with its diagonal overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSample {
    pub z: C,
    pub o: f64,
    pub trial: u64,
}

/// Why a sampled matrix was discarded and redrawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    /// Two eigenvalues closer than the dedup tolerance.
    Degenerate,
    /// Eigenvector matrix condition estimate above `1e12`.
    IllConditioned,
}

/// Random stream of trial `k`: independent of how trials are scheduled.
pub fn trial_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `X0 + sqrt(tau/N) G`; `x0` must be the output of
/// [`crate::model::build_x0`] for these parameters.
pub fn sample_matrix(params: &ModelParams, x0: &Mat<C>, rng: &mut impl Rng) -> Mat<C> {
    let n = params.n;
    let s = (params.tau / n as f64).sqrt();
    let mut x = Mat::from_fn(n, n, |_, _| C::new(0.0, 0.0));
    // Column-major fill so the draw order is fixed.
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] = x0[(i, j)] + standard_complex_normal(rng) * s;
        }
    }
    x
}

pub(crate) fn frobenius(x: faer::MatRef<'_, C>) -> f64 {
    let mut s = 0.0;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            s += x[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}
