//! Quadrature rules: Gauss-Legendre nodes, adaptive Gauss-Kronrod, and a
//! pairwise summation that gives the same bits for the same input order.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule: `nodes` points on each panel between
/// consecutive `breaks`.
pub fn composite(breaks: &[f64], nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(nodes);
    let mut xs = Vec::with_capacity((breaks.len() - 1) * nodes);
    let mut ws = Vec::with_capacity(xs.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            xs.push(c + h * xi);
            ws.push(h * wi);
        }
    }
    (xs, ws)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) on [a, b] with a global error target of
/// `rel_tol` times the running estimate. Intervals are bisected largest
/// error first; the final sum is taken in interval order so the result does
/// not depend on heap ordering ties.
pub fn adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    let (v, e) = gk15(&mut f, a, b);
    let mut segs = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segs[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        segs[idx] = (lo, mid, v1, e1);
        segs.insert(idx + 1, (mid, hi, v2, e2));
    }
    let vals: Vec<f64> = segs.iter().map(|s| s.2).collect();
    (pairwise_sum(&vals), segs.iter().map(|s| s.3).sum())
}

/// Recursive pairwise sum; fixed split points make it reproducible.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let m = x.len() / 2;
    pairwise_sum(&x[..m]) + pairwise_sum(&x[m..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64, 128] {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n).min(40) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_inside() {
        let (x, _) = gauss_legendre(33);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x.iter().all(|v| v.abs() < 1.0));
        assert_eq!(x[16], 0.0);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let (v, _) = adaptive(|x| (-(x - 0.3f64).powi(2) * 1e4).exp(), 0.0, 1.0, 1e-13);
        let want = (PI / 1e4).sqrt();
        assert!((v / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composite_matches_single_panel_on_polynomials() {
        let (x, w) = composite(&[0.0, 0.1, 0.5, 2.0], 6);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((got - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }
}
