use super::{frobenius, OverlapSample, Resample};
use crate::{Error, Result};
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Col, Mat, MatRef};
use num_complex::Complex64 as C;

/// Eigenvalues with right eigenvectors `s` (columns) and `sinv = s^{-1}`,
/// whose rows are the matching left eigenvectors.
pub(crate) struct EigenData {
    pub z: Vec<C>,
    pub s: Mat<C>,
    pub sinv: Mat<C>,
}

pub(crate) fn decompose(x: MatRef<'_, C>, dedup_tol: f64) -> Result<std::result::Result<EigenData, Resample>> {
    let n = x.nrows();
    let evd = x
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.U().to_owned();
    let z: Vec<C> = (0..n).map(|i| evd.S()[i]).collect();
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (z[i] - z[j]).norm() < dedup_tol {
                return Ok(Err(Resample::Degenerate));
            }
        }
    }
    let xnorm = frobenius(x);
    let xs = x * &s;
    for i in 0..n {
        let mut res = 0.0;
        let mut rn = 0.0;
        for k in 0..n {
            res += (xs[(k, i)] - s[(k, i)] * z[i]).norm_sqr();
            rn += s[(k, i)].norm_sqr();
        }
        if res.sqrt() > 1e-8 * xnorm * rn.sqrt() {
            return Err(Error::Eigensolver(format!(
                "eigenvector residual {:.3e} exceeds bound",
                res.sqrt() / (xnorm * rn.sqrt())
            )));
        }
    }
    let sinv = s.partial_piv_lu().inverse();
    let cond = frobenius(s.as_ref()) * frobenius(sinv.as_ref());
    if !cond.is_finite() || cond > 1e12 {
        return Ok(Err(Resample::IllConditioned));
    }
    Ok(Ok(EigenData { z, s, sinv }))
}

/// Diagonal overlaps `O_ii = (l_i* l_i)(r_i* r_i)` of every eigenvalue, with
/// left eigenvectors taken from the inverse of the right eigenvector matrix.
/// The inner `Err` asks the caller to draw a fresh matrix.
pub fn overlaps(x: MatRef<'_, C>, dedup_tol: f64) -> Result<std::result::Result<Vec<OverlapSample>, Resample>> {
    let d = match decompose(x, dedup_tol)? {
        Ok(d) => d,
        Err(r) => return Ok(Err(r)),
    };
    Ok(Ok(diagonal(&d, 0)))
}

pub(crate) fn diagonal(d: &EigenData, trial: u64) -> Vec<OverlapSample> {
    let n = d.z.len();
    (0..n)
        .map(|i| {
            let mut l = 0.0;
            let mut r = 0.0;
            for k in 0..n {
                l += d.sinv[(i, k)].norm_sqr();
                r += d.s[(k, i)].norm_sqr();
            }
            OverlapSample { z: d.z[i], o: l * r, trial }
        })
        .collect()
}

/// Full overlap matrix `O_ij = (l_i* l_j)(r_j* r_i)`.
pub fn overlap_matrix(x: MatRef<'_, C>, dedup_tol: f64) -> Result<std::result::Result<(Vec<C>, Mat<C>), Resample>> {
    let d = match decompose(x, dedup_tol)? {
        Ok(d) => d,
        Err(r) => return Ok(Err(r)),
    };
    let l = &d.sinv * d.sinv.adjoint();
    let r = d.s.adjoint() * &d.s;
    let n = d.z.len();
    let o = Mat::from_fn(n, n, |i, j| l[(i, j)] * r[(j, i)]);
    Ok(Ok((d.z, o)))
}

/// Partial Schur form `X = H [[z, w^T], [0, X']] H` with `H` a Householder
/// reflector whose first column is the unit right eigenvector.
#[derive(Clone, Debug)]
pub struct SchurWitness {
    /// `conj(w)`, the conjugated first-row remainder.
    pub omega: Col<C>,
    pub x_sub: Mat<C>,
    pub zn: C,
    /// Size of the discarded subdiagonal part of the first column, relative
    /// to `||X||_F`.
    pub deflation_residual: f64,
    pub reflector: Mat<C>,
}

impl SchurWitness {
    /// `1 + omega* ((z - X')* (z - X'))^{-1} omega`.
    pub fn overlap(&self) -> Result<f64> {
        let m = self.x_sub.nrows();
        if m == 0 {
            return Ok(1.0);
        }
        let a = Mat::from_fn(m, m, |i, j| {
            let d = if i == j { self.zn } else { C::new(0.0, 0.0) };
            d - self.x_sub[(i, j)]
        });
        let mut u = Mat::from_fn(m, 1, |i, _| self.omega[i]);
        a.partial_piv_lu().solve_adjoint_in_place(u.as_mut());
        let s: f64 = (0..m).map(|i| u[(i, 0)].norm_sqr()).sum();
        if !s.is_finite() {
            return Err(Error::Accuracy("ill-conditioned Schur complement".into()));
        }
        Ok(1.0 + s)
    }

    /// `H [[z, w^T], [0, X']] H`.
    pub fn reconstruct(&self) -> Mat<C> {
        let n = self.x_sub.nrows() + 1;
        let t = Mat::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) => self.zn,
            (0, j) => self.omega[j - 1].conj(),
            (_, 0) => C::new(0.0, 0.0),
            (i, j) => self.x_sub[(i - 1, j - 1)],
        });
        &self.reflector * &t * &self.reflector
    }
}

/// Hermitian unitary `H` with `H e_1` parallel to `v`.
fn householder(v: &[C]) -> Mat<C> {
    let n = v.len();
    let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { C::new(1.0, 0.0) };
    let mut w: Vec<C> = v.iter().map(|c| c / nv).collect();
    w[0] += phase;
    let ww: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    Mat::from_fn(n, n, |i, j| {
        let d = if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
        d - w[i] * w[j].conj() * (2.0 / ww)
    })
}

pub fn schur_witness(x: MatRef<'_, C>, zn: C, right: &[C]) -> SchurWitness {
    let n = x.nrows();
    let h = householder(right);
    let xs = &h * x * &h;
    let omega = Col::from_fn(n - 1, |j| xs[(0, j + 1)].conj());
    let x_sub = Mat::from_fn(n - 1, n - 1, |i, j| xs[(i + 1, j + 1)]);
    let sub: f64 = (1..n).map(|i| xs[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
    SchurWitness {
        omega,
        x_sub,
        zn,
        deflation_residual: sub / frobenius(x).max(f64::MIN_POSITIVE),
        reflector: h,
    }
}

/// Overlap of eigenvalue `eigen_index` (in eigensolver order) computed from
/// the partial Schur form rather than from the inverse eigenvector matrix.
pub fn overlap_via_schur(x: MatRef<'_, C>, eigen_index: usize) -> Result<f64> {
    let n = x.nrows();
    let evd = x
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("dense eigensolver failed: {e:?}")))?;
    if eigen_index >= n {
        return Err(Error::Config(format!("eigen index {eigen_index} out of range")));
    }
    let zn = evd.S()[eigen_index];
    let v: Vec<C> = (0..n).map(|k| evd.U()[(k, eigen_index)]).collect();
    schur_witness(x, zn, &v).overlap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_x0, JordanSpec, ModelParams};
    use crate::sampler::{sample_matrix, trial_rng};
    use proptest::prelude::*;

    fn mat(rows: &[&[(f64, f64)]]) -> Mat<C> {
        Mat::from_fn(rows.len(), rows.len(), |i, j| C::new(rows[i][j].0, rows[i][j].1))
    }

    fn deformed(n: usize, seed: u64) -> Mat<C> {
        let spec = JordanSpec::single_block(C::new(0.7, 0.7), 2).unwrap();
        let params = ModelParams::new(n, 1.0, spec).unwrap();
        let x0 = build_x0(&params.spec, n).unwrap();
        sample_matrix(&params, &x0, &mut trial_rng(seed, 0))
    }

    #[test]
    fn normal_matrix_has_unit_overlaps() {
        let x = mat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (2.0, 0.0)]]);
        let o = overlaps(x.as_ref(), 1e-12).unwrap().unwrap();
        for s in o {
            assert!((s.o - 1.0).abs() < 1e-12);
        }
        assert!((overlap_via_schur(x.as_ref(), 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_hand_value() {
        let x = mat(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]);
        let o = overlaps(x.as_ref(), 1e-12).unwrap().unwrap();
        for s in &o {
            assert!((s.o - 2.0).abs() < 1e-12, "{s:?}");
        }
        let i0 = o.iter().position(|s| s.z.norm() < 1e-12).unwrap();
        assert!((overlap_via_schur(x.as_ref(), i0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum_requests_resample() {
        let x = mat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]);
        assert_eq!(overlaps(x.as_ref(), 1e-10).unwrap().unwrap_err(), Resample::Degenerate);
    }

    #[test]
    fn witness_reconstructs_input() {
        let x = deformed(8, 3);
        let evd = x.eigen().unwrap();
        for i in 0..8 {
            let v: Vec<C> = (0..8).map(|k| evd.U()[(k, i)]).collect();
            let w = schur_witness(x.as_ref(), evd.S()[i], &v);
            let diff = &w.reconstruct() - &x;
            assert!(frobenius(diff.as_ref()) < 1e-10 * frobenius(x.as_ref()));
            assert!(w.deflation_residual < 1e-10);
        }
    }

    #[test]
    fn unitary_invariance_without_deformation() {
        let params = ModelParams::new(8, 1.0, JordanSpec::empty()).unwrap();
        let x0 = build_x0(&params.spec, 8).unwrap();
        let x = sample_matrix(&params, &x0, &mut trial_rng(21, 0));
        let g = sample_matrix(&params, &x0, &mut trial_rng(22, 0));
        let q = g.qr().compute_Q();
        let y = q.adjoint() * &x * &q;
        let a = overlaps(x.as_ref(), 1e-12).unwrap().unwrap();
        let b = overlaps(y.as_ref(), 1e-12).unwrap().unwrap();
        for s in &a {
            let t = b
                .iter()
                .min_by(|p, q| (p.z - s.z).norm().total_cmp(&(q.z - s.z).norm()))
                .unwrap();
            assert!((t.z - s.z).norm() < 1e-8);
            assert!((t.o / s.o - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn overlap_identities(seed in any::<u64>(), k in 0usize..3) {
            let n = [4usize, 8, 16][k];
            let x = deformed(n, seed);
            let (z, o) = overlap_matrix(x.as_ref(), 1e-12).unwrap().unwrap();
            for i in 0..n {
                let row: C = (0..n).map(|j| o[(i, j)]).sum();
                prop_assert!((row - C::new(1.0, 0.0)).norm() < 1e-8);
                prop_assert!(o[(i, i)].re >= 1.0 - 1e-8);
                prop_assert!(o[(i, i)].im.abs() < 1e-8 * o[(i, i)].re);
            }
            let evd = x.eigen().unwrap();
            for i in 0..n {
                prop_assert_eq!(evd.S()[i], z[i]);
                let schur = overlap_via_schur(x.as_ref(), i).unwrap();
                prop_assert!((schur / o[(i, i)].re - 1.0).abs() < 1e-8);
            }
        }
    }
}
