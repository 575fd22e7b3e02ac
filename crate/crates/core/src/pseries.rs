//! Truncated multivariate power series `Σ a_k z^k` with dense coefficient
//! tensors, fractional differentiation and the binomial kernel series.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::rising_over_factorial;

/// Multi-index `k = (k_1, …, k_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("multi-index needs n >= 1".into()));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Fractional order `β` with every `β_j > -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FracOrder(Vec<f64>);

impl FracOrder {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidParameter("fractional order needs n >= 1".into()));
        }
        for &b in &beta {
            if !(b > -1.0) || !b.is_finite() {
                return Err(Error::Domain {
                    name: "beta",
                    value: b,
                    domain: "(-1, inf)",
                });
            }
        }
        Ok(FracOrder(beta))
    }

    /// `β = (1, …, 1)`, the order of the operator `D`.
    pub fn ones(n: usize) -> Self {
        FracOrder(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for FracOrder {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FracOrder::new(v)
    }
}

impl From<FracOrder> for Vec<f64> {
    fn from(b: FracOrder) -> Self {
        b.0
    }
}

/// Dense coefficient tensor for `f(z) = Σ_{0 ≤ k_j ≤ N_j} a_k z^k`, stored
/// row-major with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    degrees: Vec<usize>,
    strides: Vec<usize>,
    coeffs: Vec<Complex64>,
}

fn strides_for(degrees: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; degrees.len()];
    for j in (0..degrees.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * (degrees[j + 1] + 1);
    }
    strides
}

fn box_len(degrees: &[usize]) -> usize {
    degrees.iter().map(|d| d + 1).product()
}

impl CoefficientSeries {
    pub fn new(degrees: Vec<usize>, coeffs: Vec<Complex64>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidParameter("series needs n >= 1".into()));
        }
        let len = box_len(&degrees);
        if coeffs.len() != len {
            return Err(Error::InvalidParameter(format!(
                "coefficient tensor for degrees {degrees:?} needs {len} entries, got {}",
                coeffs.len()
            )));
        }
        Ok(CoefficientSeries {
            strides: strides_for(&degrees),
            degrees,
            coeffs,
        })
    }

    pub fn zeros(degrees: Vec<usize>) -> Result<Self> {
        let len = box_len(&degrees);
        Self::new(degrees, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn constant(n: usize, c: Complex64) -> Result<Self> {
        Self::new(vec![0; n], vec![c])
    }

    /// `c · z^k`, with truncation box exactly `k`.
    pub fn monomial(k: &MultiIndex, c: Complex64) -> Result<Self> {
        let mut s = Self::zeros(k.0.clone())?;
        let last = s.coeffs.len() - 1;
        s.coeffs[last] = c;
        Ok(s)
    }

    pub fn from_fn(degrees: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let mut s = Self::zeros(degrees)?;
        let mut idx = vec![0usize; s.dim()];
        for slot in 0..s.coeffs.len() {
            s.coeffs[slot] = f(&idx);
            s.advance(&mut idx);
        }
        Ok(s)
    }

    /// Coefficients uniform in the unit square `[-1,1] + i[-1,1]`, degree
    /// `degree` in every coordinate.
    pub fn random<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Result<Self> {
        Self::from_fn(vec![degree; n], |_| {
            Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
        })
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn offset(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.dim() {
            return None;
        }
        let mut off = 0;
        for ((&kj, &nj), &sj) in k.iter().zip(&self.degrees).zip(&self.strides) {
            if kj > nj {
                return None;
            }
            off += kj * sj;
        }
        Some(off)
    }

    /// `a_k`, zero outside the truncation box.
    pub fn coeff(&self, k: &[usize]) -> Complex64 {
        self.offset(k)
            .map_or(Complex64::new(0.0, 0.0), |o| self.coeffs[o])
    }

    fn advance(&self, idx: &mut [usize]) {
        for j in (0..idx.len()).rev() {
            if idx[j] < self.degrees[j] {
                idx[j] += 1;
                return;
            }
            idx[j] = 0;
        }
    }

    /// `(k, a_k)` over the box in storage order.
    pub fn indexed(&self) -> impl Iterator<Item = (Vec<usize>, Complex64)> + '_ {
        let mut idx = vec![0usize; self.dim()];
        let mut first = true;
        self.coeffs.iter().map(move |&c| {
            if !first {
                self.advance(&mut idx);
            }
            first = false;
            (idx.clone(), c)
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Σ a_k z^k for `|z_j| < 1`.
    pub fn evaluate(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        for zj in z {
            if !(zj.norm() < 1.0) {
                return Err(Error::Domain {
                    name: "|z_j|",
                    value: zj.norm(),
                    domain: "[0, 1)",
                });
            }
        }
        Ok(self.eval_unchecked(z))
    }

    /// Horner evaluation with no domain check (polynomials extend to the
    /// closed polydisk and beyond). Panics on dimension mismatch.
    #[inline]
    pub fn eval_unchecked(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.dim(), "dimension mismatch");
        self.horner(0, 0, z)
    }

    fn horner(&self, axis: usize, offset: usize, z: &[Complex64]) -> Complex64 {
        let deg = self.degrees[axis];
        let stride = self.strides[axis];
        let mut acc = Complex64::new(0.0, 0.0);
        if axis + 1 == self.dim() {
            for k in (0..=deg).rev() {
                acc = acc * z[axis] + self.coeffs[offset + k * stride];
            }
        } else {
            for k in (0..=deg).rev() {
                acc = acc * z[axis] + self.horner(axis + 1, offset + k * stride, z);
            }
        }
        acc
    }

    /// Multiplies `a_k` by `∏_j table_j[k_j]`.
    fn apply_separable(&self, tables: &[Vec<f64>], divide: bool) -> Self {
        let mut out = self.clone();
        let mut idx = vec![0usize; self.dim()];
        for slot in 0..out.coeffs.len() {
            let m: f64 = idx.iter().zip(tables).map(|(&k, t)| t[k]).product();
            out.coeffs[slot] = if divide { out.coeffs[slot] / m } else { out.coeffs[slot] * m };
            self.advance(&mut idx);
        }
        out
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }

    /// Same function re-boxed to `degrees`; coefficients outside are dropped.
    pub fn resized(&self, degrees: Vec<usize>) -> Result<Self> {
        self.check_dim(degrees.len())?;
        Self::from_fn(degrees, |k| self.coeff(k))
    }

    fn union_degrees(&self, other: &Self) -> Result<Vec<usize>> {
        self.check_dim(other.dim())?;
        Ok(self
            .degrees
            .iter()
            .zip(&other.degrees)
            .map(|(a, b)| *a.max(b))
            .collect())
    }

    /// `a·self + b·other` on the union box.
    pub fn lin_comb(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        let degrees = self.union_degrees(other)?;
        Self::from_fn(degrees, |k| a * self.coeff(k) + b * other.coeff(k))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|a| *a *= c);
        out
    }

    /// Product of two polynomials (no truncation).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        let degrees: Vec<usize> = self.degrees.iter().zip(&other.degrees).map(|(a, b)| a + b).collect();
        let mut out = Self::zeros(degrees)?;
        let rhs: Vec<(Vec<usize>, Complex64)> = other.indexed().filter(|(_, c)| c.norm_sqr() > 0.0).collect();
        let mut k = vec![0usize; self.dim()];
        for (i, a) in self.indexed() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in &rhs {
                for t in 0..k.len() {
                    k[t] = i[t] + j[t];
                }
                let o = out.offset(&k).expect("index in product box");
                out.coeffs[o] += a * b;
            }
        }
        Ok(out)
    }

    /// Partial derivative `∂^{|k|} / ∂z_1^{k_1} … ∂z_n^{k_n}`.
    pub fn partial_derivative(&self, k: &MultiIndex) -> Result<Self> {
        self.check_dim(k.dim())?;
        let degrees: Vec<usize> = self
            .degrees
            .iter()
            .zip(k.as_slice())
            .map(|(&d, &kj)| d.saturating_sub(kj))
            .collect();
        Self::from_fn(degrees, |m| {
            let mut factor = 1.0;
            let mut src = Vec::with_capacity(m.len());
            for (&mj, &kj) in m.iter().zip(k.as_slice()) {
                // (m+k)! / m!
                factor *= ((mj + 1)..=(mj + kj)).map(|x| x as f64).product::<f64>();
                src.push(mj + kj);
            }
            self.coeff(&src) * factor
        })
    }
}

/// Per-coordinate multiplier table `Γ(β+1+k)/(Γ(β+1)Γ(k+1)) = (β+1)_k / k!`.
fn frac_tables(degrees: &[usize], beta: &FracOrder) -> Vec<Vec<f64>> {
    degrees
        .iter()
        .zip(beta.as_slice())
        .map(|(&d, &b)| rising_over_factorial(b + 1.0, d + 1))
        .collect()
}

/// `D^β f`: coefficient-wise multiplication by
/// `∏_j Γ(β_j+1+k_j) / (Γ(β_j+1) Γ(k_j+1))`.
pub fn frac_derivative(f: &CoefficientSeries, beta: &FracOrder) -> Result<CoefficientSeries> {
    f.check_dim(beta.dim())?;
    Ok(f.apply_separable(&frac_tables(f.degrees(), beta), false))
}

/// `D^{-β} f`, the exact inverse of [`frac_derivative`] on the box.
pub fn frac_antiderivative(f: &CoefficientSeries, beta: &FracOrder) -> Result<CoefficientSeries> {
    f.check_dim(beta.dim())?;
    Ok(f.apply_separable(&frac_tables(f.degrees(), beta), true))
}

/// `D = D^{(1,…,1)}`: `a_k ↦ ∏(k_j+1) a_k`.
pub fn derivative_d(f: &CoefficientSeries) -> CoefficientSeries {
    frac_derivative(f, &FracOrder::ones(f.dim())).expect("matching dimension")
}

/// `a_k ↦ a_k ∏ r_j^{k_j}`, i.e. the coefficients of `z ↦ f(r ⊙ z)`.
pub fn scale_radial(f: &CoefficientSeries, r: &[f64]) -> Result<CoefficientSeries> {
    f.check_dim(r.len())?;
    for &rj in r {
        if !(0.0..=1.0).contains(&rj) {
            return Err(Error::Domain {
                name: "r_j",
                value: rj,
                domain: "[0, 1]",
            });
        }
    }
    let tables: Vec<Vec<f64>> = f
        .degrees()
        .iter()
        .zip(r)
        .map(|(&d, &rj)| (0..=d).map(|k| rj.powi(k as i32)).collect())
        .collect();
    Ok(f.apply_separable(&tables, false))
}

/// Truncated kernel together with a bound on the dropped tail,
/// valid uniformly on the closed polydisk.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries {
    pub series: CoefficientSeries,
    pub tail_bound: f64,
}

fn check_kernel_params(r: &[f64], k: &[f64]) -> Result<()> {
    if r.is_empty() || r.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            got: k.len(),
        });
    }
    for &rj in r {
        if !(rj > 0.0 && rj < 1.0) {
            return Err(Error::Domain {
                name: "r_j",
                value: rj,
                domain: "(0, 1)",
            });
        }
    }
    for &kj in k {
        if !(kj > 0.0) || !kj.is_finite() {
            return Err(Error::Domain {
                name: "k_j",
                value: kj,
                domain: "(0, inf)",
            });
        }
    }
    Ok(())
}

/// Partial sum and tail bound of `Σ (k)_m/m! r^m` at degree `deg`.
fn kernel_1d_tail(r: f64, k: f64, deg: usize) -> (f64, f64) {
    let terms = rising_over_factorial(k, deg + 2);
    let mut partial = 0.0;
    let mut rm = 1.0;
    for t in terms.iter().take(deg + 1) {
        partial += t * rm;
        rm *= r;
    }
    let next = terms[deg + 1] * rm;
    // term ratio r(k+m)/(m+1) is monotone in m with limit r
    let n1 = (deg + 1) as f64;
    let rho = r * ((k + n1) / (n1 + 1.0)).max(1.0);
    let tail = if rho < 1.0 { next / (1.0 - rho) } else { f64::INFINITY };
    (partial, tail)
}

/// Coefficients of `∏_j (1 - r_j z_j)^{-k_j}` truncated at `degrees`.
pub fn kernel_series(r: &[f64], k: &[f64], degrees: &[usize]) -> Result<KernelSeries> {
    check_kernel_params(r, k)?;
    if degrees.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            got: degrees.len(),
        });
    }
    let tables: Vec<Vec<f64>> = r
        .iter()
        .zip(k)
        .zip(degrees)
        .map(|((&rj, &kj), &d)| {
            rising_over_factorial(kj, d + 1)
                .into_iter()
                .enumerate()
                .map(|(m, b)| b * rj.powi(m as i32))
                .collect()
        })
        .collect();
    let series = CoefficientSeries::from_fn(degrees.to_vec(), |m| {
        Complex64::new(m.iter().zip(&tables).map(|(&mj, t)| t[mj]).product(), 0.0)
    })?;
    // full − box = ∏(P_j + T_j) − ∏ P_j, accumulated without cancellation
    let mut inside = 1.0;
    let mut tail = 0.0;
    for ((&rj, &kj), &d) in r.iter().zip(k).zip(degrees) {
        let (p, t) = kernel_1d_tail(rj, kj, d);
        tail = tail * (p + t) + inside * t;
        inside *= p;
    }
    Ok(KernelSeries {
        series,
        tail_bound: tail,
    })
}

/// Smallest common per-coordinate degree (up to `max_degree`) whose tail bound
/// is below `tol`.
pub fn kernel_series_with_tol(r: &[f64], k: &[f64], tol: f64, max_degree: usize) -> Result<KernelSeries> {
    check_kernel_params(r, k)?;
    let mut lo = 0usize;
    let mut hi = max_degree;
    let bound_at = |d: usize| -> f64 {
        let mut inside = 1.0;
        let mut tail = 0.0;
        for (&rj, &kj) in r.iter().zip(k) {
            let (p, t) = kernel_1d_tail(rj, kj, d);
            tail = tail * (p + t) + inside * t;
            inside *= p;
        }
        tail
    };
    let top = bound_at(hi);
    if !(top <= tol) {
        return Err(Error::ToleranceUnreachable {
            tol,
            degree: max_degree,
            bound: top,
        });
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bound_at(mid) <= tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    kernel_series(r, k, &vec![lo; r.len()])
}

/// Function description used by configs:
/// `{"type":"monomial","k":[1,0]}`, `{"type":"poly","n":1,"coeffs":[[re,im],...]}`,
/// `{"type":"kernel","r":[0.9],"k":[3],"deg":64}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FunctionSpec {
    Monomial {
        k: Vec<usize>,
        #[serde(default = "one_pair")]
        c: [f64; 2],
    },
    Poly {
        n: usize,
        /// Required when `n > 1`; defaults to `[len - 1]` for `n = 1`.
        #[serde(default)]
        degrees: Option<Vec<usize>>,
        coeffs: Vec<[f64; 2]>,
    },
    Kernel {
        r: Vec<f64>,
        k: Vec<f64>,
        deg: usize,
    },
}

fn one_pair() -> [f64; 2] {
    [1.0, 0.0]
}

impl FunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            FunctionSpec::Monomial { k, .. } => k.len(),
            FunctionSpec::Poly { n, .. } => *n,
            FunctionSpec::Kernel { r, .. } => r.len(),
        }
    }

    pub fn build(&self) -> Result<CoefficientSeries> {
        match self {
            FunctionSpec::Monomial { k, c } => {
                CoefficientSeries::monomial(&MultiIndex::new(k.clone())?, Complex64::new(c[0], c[1]))
            }
            FunctionSpec::Poly { n, degrees, coeffs } => {
                let degrees = match degrees {
                    Some(d) => d.clone(),
                    None if *n == 1 && !coeffs.is_empty() => vec![coeffs.len() - 1],
                    None => {
                        return Err(Error::InvalidParameter(
                            "poly with n > 1 needs explicit degrees".into(),
                        ))
                    }
                };
                if degrees.len() != *n {
                    return Err(Error::DimensionMismatch {
                        expected: *n,
                        got: degrees.len(),
                    });
                }
                CoefficientSeries::new(degrees, coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect())
            }
            FunctionSpec::Kernel { r, k, deg } => Ok(kernel_series(r, k, &vec![*deg; r.len()])?.series),
        }
    }
}
