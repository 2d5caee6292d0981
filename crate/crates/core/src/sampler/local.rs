//! Eigenvalues and overlaps inside a small disk without a full
//! eigendecomposition: one LU of `X - cI`, then block Krylov iterations with
//! `(X - cI)^{-1}` for right eigenvectors and with its adjoint for left ones.

use super::{frobenius, standard_complex_normal, Resample};
use crate::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, Mat, MatRef};
use num_complex::Complex64 as C;
use rand::Rng;

const BLOCK: usize = 2;
const MIN_STEPS: usize = 6;
const MAX_DIM: usize = 256;
const RITZ_TOL: f64 = 1e-10;

struct Ritz {
    theta: C,
    vec: Vec<C>,
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn fill_random(v: &mut Mat<C>, j: usize, rng: &mut impl Rng) {
    for i in 0..v.nrows() {
        v[(i, j)] = standard_complex_normal(rng);
    }
}

/// Orthonormalizes column `j` of `v` against columns `from..j` (two passes).
/// Returns false when the column collapses.
fn orthonormalize(v: &mut Mat<C>, from: usize, j: usize, reference: f64) -> bool {
    for _ in 0..2 {
        for k in from..j {
            let qk = v.col_as_slice(k).to_vec();
            let h = dot(&qk, v.col_as_slice(j));
            for (x, q) in v.col_as_slice_mut(j).iter_mut().zip(&qk) {
                *x -= q * h;
            }
        }
    }
    let nrm = norm(v.col_as_slice(j));
    if !(nrm > 1e-10 * reference) || !nrm.is_finite() {
        return false;
    }
    for x in v.col_as_slice_mut(j) {
        *x /= nrm;
    }
    true
}

/// Makes columns `start..start + b` orthonormal to everything before them.
fn extend_basis(v: &mut Mat<C>, start: usize, b: usize, rng: &mut impl Rng) -> Result<()> {
    let refs: Vec<f64> = (start..start + b).map(|j| norm(v.col_as_slice(j))).collect();
    if start > 0 {
        for _ in 0..2 {
            let h = v.subcols(0, start).adjoint() * v.subcols(start, b);
            let corr = v.subcols(0, start) * &h;
            let blk = v.subcols(start, b) - &corr;
            v.subcols_mut(start, b).copy_from(&blk);
        }
    }
    for (j, &r) in (start..start + b).zip(&refs) {
        let mut ok = orthonormalize(v, start, j, r);
        let mut tries = 0;
        while !ok {
            tries += 1;
            if tries > 4 {
                return Err(Error::Eigensolver("Krylov basis collapsed".into()));
            }
            fill_random(v, j, rng);
            let r = norm(v.col_as_slice(j));
            ok = orthonormalize(v, 0, j, r);
        }
    }
    Ok(())
}

/// Converged Ritz pairs of `(X - cI)^{-1}` (or of its adjoint) with
/// `|theta| >= thr`.
fn krylov(lu: &PartialPivLu<C>, n: usize, adjoint: bool, thr: f64, rng: &mut impl Rng) -> Result<Vec<Ritz>> {
    let cap = MAX_DIM.min(n);
    let mut v = Mat::<C>::zeros(n, cap);
    let mut av = Mat::<C>::zeros(n, cap);
    let b0 = BLOCK.min(cap);
    for j in 0..b0 {
        fill_random(&mut v, j, rng);
    }
    extend_basis(&mut v, 0, b0, rng)?;
    let mut filled = b0;
    let mut done = 0;
    let mut steps = 0;
    loop {
        let b = filled - done;
        let mut z = v.subcols(done, b).to_owned();
        if adjoint {
            lu.solve_adjoint_in_place(z.as_mut());
        } else {
            lu.solve_in_place(z.as_mut());
        }
        if z.col_iter().any(|c| c.iter().any(|x| !x.re.is_finite() || !x.im.is_finite())) {
            return Err(Error::Eigensolver("shift lies on the spectrum".into()));
        }
        av.subcols_mut(done, b).copy_from(&z);
        done = filled;
        steps += 1;

        if steps >= MIN_STEPS || done == cap {
            let m = done;
            let vm = v.subcols(0, m);
            let avm = av.subcols(0, m);
            let h = vm.adjoint() * avm;
            let evd = h
                .eigen()
                .map_err(|e| Error::Eigensolver(format!("projected eigenproblem failed: {e:?}")))?;
            let mut out = Vec::new();
            let mut converged = true;
            for i in 0..m {
                let theta = evd.S()[i];
                if theta.norm() < thr {
                    continue;
                }
                let y = evd.U().col(i);
                let x: Col<C> = vm * y;
                let ax: Col<C> = avm * y;
                let res = (&ax - &x * faer::Scale(theta)).norm_l2();
                let xn = x.norm_l2();
                if res > RITZ_TOL * theta.norm() * xn {
                    converged = false;
                }
                out.push(Ritz { theta, vec: x.iter().map(|c| c / xn).collect() });
            }
            if converged && 2 * out.len() < m {
                return Ok(out);
            }
            if done == cap {
                return Err(Error::Eigensolver(format!(
                    "local eigensolver did not converge in {cap} dimensions"
                )));
            }
        }

        let b = BLOCK.min(cap - filled);
        let src = av.subcols(done - b, b).to_owned();
        v.subcols_mut(filled, b).copy_from(&src);
        extend_basis(&mut v, filled, b, rng)?;
        filled += b;
    }
}

/// Eigenvalues of `x` in `|z - center| <= radius` with their diagonal
/// overlaps. The inner `Err` asks the caller to draw a fresh matrix.
pub fn eigenpairs_in_disk(
    x: MatRef<'_, C>,
    center: C,
    radius: f64,
    dedup_tol: f64,
    rng: &mut impl Rng,
) -> Result<std::result::Result<Vec<(C, f64)>, Resample>> {
    let n = x.nrows();
    let a = Mat::from_fn(n, n, |i, j| if i == j { x[(i, j)] - center } else { x[(i, j)] });
    let lu = a.partial_piv_lu();
    let watch = 1.0 / (1.5 * radius);
    let keep = 1.0 / (1.25 * radius);
    let right = krylov(&lu, n, false, watch, rng)?;
    let left = krylov(&lu, n, true, watch, rng)?;
    let xnorm = frobenius(x);

    let mut found: Vec<(C, f64)> = Vec::new();
    for r in right.iter().filter(|r| r.theta.norm() >= keep) {
        let (best, gap) = left
            .iter()
            .map(|l| (l, (l.theta.conj() - r.theta).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .ok_or_else(|| Error::Eigensolver("left and right Ritz sets differ".into()))?;
        if gap > 1e-6 * r.theta.norm() {
            return Err(Error::Eigensolver("left and right Ritz sets differ".into()));
        }
        let l = &best.vec;
        let rv = &r.vec;
        let lr = dot(l, rv);
        let rcol = Col::from_fn(n, |i| rv[i]);
        let xr: Col<C> = x * &rcol;
        let xr: Vec<C> = xr.iter().copied().collect();
        let lam = dot(l, &xr) / lr;
        let res: f64 = (0..n).map(|i| (xr[i] - rv[i] * lam).norm_sqr()).sum::<f64>().sqrt();
        if res > 1e-8 * xnorm {
            return Err(Error::Eigensolver(format!(
                "local eigenvector residual {:.3e} exceeds bound",
                res / xnorm
            )));
        }
        let o = 1.0 / lr.norm_sqr();
        if !o.is_finite() || o > 1e24 {
            return Ok(Err(Resample::IllConditioned));
        }
        found.push((lam, o));
    }
    for i in 0..found.len() {
        for j in 0..i {
            if (found[i].0 - found[j].0).norm() < dedup_tol {
                return Ok(Err(Resample::Degenerate));
            }
        }
    }
    found.retain(|(z, _)| (z - center).norm() <= radius);
    Ok(Ok(found))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_x0, JordanSpec, ModelParams};
    use crate::sampler::overlap::{decompose, diagonal};
    use crate::sampler::{sample_matrix, trial_rng};

    fn compare(n: usize, spec: JordanSpec, center: C, radius: f64, seeds: std::ops::Range<u64>) -> usize {
        let params = ModelParams::new(n, 1.0, spec).unwrap();
        let x0 = build_x0(&params.spec, n).unwrap();
        let mut seen = 0;
        for seed in seeds {
            let mut rng = trial_rng(seed, 0);
            let x = sample_matrix(&params, &x0, &mut rng);
            let local = eigenpairs_in_disk(x.as_ref(), center, radius, 1e-14, &mut rng).unwrap().unwrap();
            let d = decompose(x.as_ref(), 1e-14).unwrap().unwrap();
            let mut dense: Vec<_> = diagonal(&d, 0)
                .into_iter()
                .filter(|s| (s.z - center).norm() <= radius)
                .collect();
            // Eigenvalues sitting on the disk boundary may fall either way.
            dense.retain(|s| ((s.z - center).norm() - radius).abs() > 1e-9);
            for s in &dense {
                let hit = local
                    .iter()
                    .find(|(z, _)| (z - s.z).norm() < 1e-9)
                    .unwrap_or_else(|| panic!("seed {seed}: missed {s:?}"));
                assert!((hit.1 / s.o - 1.0).abs() < 1e-7, "seed {seed}: {} vs {}", hit.1, s.o);
            }
            assert!(local.len() >= dense.len());
            seen += dense.len();
        }
        seen
    }

    #[test]
    fn matches_dense_at_the_edge() {
        let n = 96;
        let r = 1.5 / (n as f64).sqrt();
        let seen = compare(n, JordanSpec::empty(), C::new(1.0, 0.0), r, 0..30);
        assert!(seen > 20);
    }

    #[test]
    fn matches_dense_in_the_bulk_and_near_an_outlier() {
        let n = 80;
        let r = 1.5 / (n as f64).sqrt();
        compare(n, JordanSpec::empty(), C::new(0.2, -0.1), r, 0..10);
        let spec = JordanSpec::single_block(C::new(2.0, 0.0), 1).unwrap();
        let seen = compare(n, spec.clone(), C::new(2.0, 0.0), 0.5, 0..10);
        assert_eq!(seen, 10);
        let spec = JordanSpec::single_block(C::new(1.0, 0.0), 2).unwrap();
        compare(n, spec, C::new(1.0, 0.0), r, 0..10);
    }
}
