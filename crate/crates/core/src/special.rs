//! Small numerical kernels shared by the quadrature and series code.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::ops::Add;

/// Gauss–Legendre nodes and weights on `[0, 1]`, ascending.
///
/// Newton iteration on the three-term recurrence from the Tricomi initial
/// guess; converges to machine precision for every order used here.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss–Legendre order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root on [-1, 1]
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dpn = n as f64 * (x * pn - p0) / (x * x - 1.0);
    (pn, dpn)
}

/// Table of `(a)_m / m!` for `m = 0..len`, i.e. `Γ(a+m) / (Γ(a) Γ(m+1))`.
///
/// Built by the running product `∏ (a+i-1)/i`, which never overflows for the
/// moderate `a` used here and is exact at `m = 0`.
pub fn rising_over_factorial(a: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 1.0;
    for m in 0..len {
        if m > 0 {
            acc *= (a + m as f64 - 1.0) / m as f64;
        }
        out.push(acc);
    }
    out
}

/// Pairwise (tree) summation in index order. The split points depend only on
/// the slice length, so the result is reproducible.
pub fn tree_sum<T>(values: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().fold(T::default(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

pub fn tree_sum_complex(values: &[Complex64]) -> Complex64 {
    tree_sum(values)
}

/// Maps `f` over `0..len` and returns results in index order, in parallel
/// when the `parallel` feature is on.
pub(crate) fn ordered_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
