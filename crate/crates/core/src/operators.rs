//! Toeplitz operators with conjugate symbols, the generalized little Hankel
//! operator, the Berezin-type operator, the weighted Bergman projection, and
//! coordinatewise Blaschke products.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pseries::CoefficientSeries;
use crate::quad::{grading_for, integrate_polydisk, integrate_torus, DiskRule, Node, PolydiskRule, TorusRule};
use crate::special::rising_over_factorial;

/// Default evaluation-point guard for the disk-integral operators.
pub const DEFAULT_GUARD: f64 = 0.95;

/// Anything that can be evaluated pointwise on the closed polydisk.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;

    fn eval_at(&self, z: &[Complex64]) -> Complex64;

    /// Per-coordinate Fourier support `[lo, hi]` of the boundary values, when
    /// finite.
    fn band(&self) -> Option<Vec<(i64, i64)>> {
        None
    }
}

impl Evaluable for CoefficientSeries {
    fn dim(&self) -> usize {
        CoefficientSeries::dim(self)
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        self.eval_unchecked(z)
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        Some(self.degrees().iter().map(|&d| (0, d as i64)).collect())
    }
}

impl<E: Evaluable + ?Sized> Evaluable for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        (**self).eval_at(z)
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        (**self).band()
    }
}

/// Pointwise complex conjugate.
#[derive(Debug, Clone)]
pub struct Conj<E>(pub E);

impl<E: Evaluable> Evaluable for Conj<E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        self.0.eval_at(z).conj()
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        self.0.band().map(|b| b.into_iter().map(|(lo, hi)| (-hi, -lo)).collect())
    }
}

/// Pointwise product.
#[derive(Debug, Clone)]
pub struct Product<A, B>(pub A, pub B);

impl<A: Evaluable, B: Evaluable> Evaluable for Product<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        self.0.eval_at(z) * self.1.eval_at(z)
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        let a = self.0.band()?;
        let b = self.1.band()?;
        Some(a.iter().zip(&b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect())
    }
}

/// One term `c · ζ^a ζ̄^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolTerm {
    pub c: [f64; 2],
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl SymbolTerm {
    pub fn coeff(&self) -> Complex64 {
        Complex64::new(self.c[0], self.c[1])
    }
}

/// Finite symbol `Σ c ζ^a ζ̄^b`, e.g. `{"terms":[{"c":[1,0],"a":[1],"b":[0]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawSymbol", into = "RawSymbol")]
pub struct SymbolSpec {
    terms: Vec<SymbolTerm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymbol {
    terms: Vec<SymbolTerm>,
}

impl TryFrom<RawSymbol> for SymbolSpec {
    type Error = Error;

    fn try_from(raw: RawSymbol) -> Result<Self> {
        SymbolSpec::new(raw.terms)
    }
}

impl From<SymbolSpec> for RawSymbol {
    fn from(s: SymbolSpec) -> Self {
        RawSymbol { terms: s.terms }
    }
}

impl SymbolSpec {
    pub fn new(terms: Vec<SymbolTerm>) -> Result<Self> {
        let n = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("symbol needs at least one term".into()))?
            .a
            .len();
        if n == 0 {
            return Err(Error::InvalidParameter("symbol terms need n >= 1".into()));
        }
        for t in &terms {
            for len in [t.a.len(), t.b.len()] {
                if len != n {
                    return Err(Error::DimensionMismatch { expected: n, got: len });
                }
            }
            if !(t.c[0].is_finite() && t.c[1].is_finite()) {
                return Err(Error::InvalidParameter("symbol coefficient must be finite".into()));
            }
        }
        Ok(SymbolSpec { terms })
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        SymbolSpec {
            terms: vec![SymbolTerm {
                c: [c.re, c.im],
                a: vec![0; n],
                b: vec![0; n],
            }],
        }
    }

    pub fn term(c: Complex64, a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        Self::new(vec![SymbolTerm { c: [c.re, c.im], a, b }])
    }

    /// Holomorphic polynomial symbol with the coefficients of `h`.
    pub fn from_series(h: &CoefficientSeries) -> Self {
        let n = h.dim();
        let terms = h
            .indexed()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(k, c)| SymbolTerm {
                c: [c.re, c.im],
                a: k,
                b: vec![0; n],
            })
            .collect::<Vec<_>>();
        if terms.is_empty() {
            return Self::constant(n, Complex64::new(0.0, 0.0));
        }
        SymbolSpec { terms }
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    pub fn is_holomorphic(&self) -> bool {
        self.terms.iter().all(|t| t.b.iter().all(|&b| b == 0))
    }

    pub fn is_antiholomorphic(&self) -> bool {
        self.terms.iter().all(|t| t.a.iter().all(|&a| a == 0))
    }

    /// `ḡ` as a symbol.
    pub fn conj(&self) -> Self {
        SymbolSpec {
            terms: self
                .terms
                .iter()
                .map(|t| SymbolTerm {
                    c: [t.c[0], -t.c[1]],
                    a: t.b.clone(),
                    b: t.a.clone(),
                })
                .collect(),
        }
    }

    /// Highest power of `ζ̄_j` per coordinate.
    pub fn conj_degrees(&self) -> Vec<usize> {
        let n = Evaluable::dim(self);
        (0..n).map(|j| self.terms.iter().map(|t| t.b[j]).max().unwrap_or(0)).collect()
    }

    /// Coefficients of a holomorphic symbol as a dense series.
    pub fn holomorphic_series(&self) -> Result<CoefficientSeries> {
        if !self.is_holomorphic() {
            return Err(Error::InvalidParameter("symbol has antiholomorphic terms".into()));
        }
        let n = Evaluable::dim(self);
        let degrees: Vec<usize> = (0..n).map(|j| self.terms.iter().map(|t| t.a[j]).max().unwrap_or(0)).collect();
        let mut s = CoefficientSeries::zeros(degrees)?;
        for t in &self.terms {
            let mut m = CoefficientSeries::monomial(&crate::pseries::MultiIndex(t.a.clone()), t.coeff())?;
            m = m.resized(s.degrees().to_vec())?;
            s = s.lin_comb(Complex64::new(1.0, 0.0), &m, Complex64::new(1.0, 0.0))?;
        }
        Ok(s)
    }

    /// Largest `|g|` over a polar grid of the closed polydisk (radii include 1).
    pub fn sup_estimate(&self, angular: usize) -> f64 {
        let n = Evaluable::dim(self);
        let radii = [0.0, 0.25, 0.5, 0.75, 0.9, 1.0];
        let per = radii.len() * angular;
        let total = per.pow(n as u32);
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut best = 0.0f64;
        for mut idx in 0..total {
            for zj in z.iter_mut() {
                let i = idx % per;
                idx /= per;
                let theta = 2.0 * PI * (i % angular) as f64 / angular as f64;
                *zj = Complex64::from_polar(radii[i / angular], theta);
            }
            best = best.max(self.eval_at(&z).norm());
        }
        best
    }
}

impl Evaluable for SymbolSpec {
    fn dim(&self) -> usize {
        self.terms[0].a.len()
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.coeff();
                for (j, zj) in z.iter().enumerate() {
                    v *= zj.powi(t.a[j] as i32) * zj.conj().powi(t.b[j] as i32);
                }
                v
            })
            .sum()
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        let n = Evaluable::dim(self);
        Some(
            (0..n)
                .map(|j| {
                    let freqs = self.terms.iter().map(|t| t.a[j] as i64 - t.b[j] as i64);
                    (freqs.clone().min().unwrap_or(0), freqs.max().unwrap_or(0))
                })
                .collect(),
        )
    }
}

/// Kernel order `α = (α_1, …, α_n)`, `α_j > -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KernelOrder(Vec<f64>);

impl KernelOrder {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidParameter("kernel order needs n >= 1".into()));
        }
        if let Some(&a) = alpha.iter().find(|&&a| !(a > -1.0 && a.is_finite())) {
            return Err(Error::Domain {
                name: "alpha_j",
                value: a,
                domain: "(-1, inf)",
            });
        }
        Ok(KernelOrder(alpha))
    }

    pub fn uniform(alpha: f64, n: usize) -> Result<Self> {
        Self::new(vec![alpha; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Polydisk rule whose radial grading absorbs `(1-|ζ|^2)^{α_j}`.
    pub fn rule(&self, radial: usize, angular: usize) -> Result<PolydiskRule> {
        PolydiskRule::new(
            self.0
                .iter()
                .map(|&a| DiskRule::graded(radial, angular, grading_for(a)))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl TryFrom<Vec<f64>> for KernelOrder {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        KernelOrder::new(v)
    }
}

impl From<KernelOrder> for Vec<f64> {
    fn from(k: KernelOrder) -> Self {
        k.0
    }
}

/// Zeros of the Blaschke product in one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlaschkeCoord {
    pub zeros: Vec<[f64; 2]>,
}

/// `J(z) = c ∏_j ∏_{a} b_a(z_j)`, e.g. `{"coords":[{"zeros":[[0.5,0.0]]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawInner", into = "RawInner")]
pub struct InnerFunctionSpec {
    coords: Vec<Vec<Complex64>>,
    constant: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInner {
    coords: Vec<BlaschkeCoord>,
    #[serde(default = "unit")]
    constant: [f64; 2],
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

impl TryFrom<RawInner> for InnerFunctionSpec {
    type Error = Error;

    fn try_from(raw: RawInner) -> Result<Self> {
        InnerFunctionSpec::new(
            raw.coords
                .into_iter()
                .map(|c| c.zeros.into_iter().map(|p| Complex64::new(p[0], p[1])).collect())
                .collect(),
            Complex64::new(raw.constant[0], raw.constant[1]),
        )
    }
}

impl From<InnerFunctionSpec> for RawInner {
    fn from(j: InnerFunctionSpec) -> Self {
        RawInner {
            coords: j
                .coords
                .into_iter()
                .map(|zs| BlaschkeCoord {
                    zeros: zs.into_iter().map(|a| [a.re, a.im]).collect(),
                })
                .collect(),
            constant: [j.constant.re, j.constant.im],
        }
    }
}

/// Single factor `(ā/|a|)(a - z)/(1 - āz)`, or `z` when `a = 0`.
#[inline]
fn blaschke_factor(a: Complex64, z: Complex64) -> Complex64 {
    if a == Complex64::new(0.0, 0.0) {
        z
    } else {
        a.conj() / a.norm() * (a - z) / (Complex64::new(1.0, 0.0) - a.conj() * z)
    }
}

/// Derivatives `b^{(0..=order)}(z)` of a single factor.
fn blaschke_factor_derivatives(a: Complex64, z: Complex64, order: usize) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; order + 1];
    if a == zero {
        out[0] = z;
        if order >= 1 {
            out[1] = one;
        }
        return out;
    }
    let u = a.conj() / a.norm();
    let d = one - a.conj() * z;
    out[0] = u * (a - z) / d;
    // b^{(m)} = u (|a|^2 - 1) m! ā^{m-1} / (1 - āz)^{m+1}
    let mut fact = 1.0;
    for (m, slot) in out.iter_mut().enumerate().skip(1) {
        fact *= m as f64;
        *slot = u * (a.norm_sqr() - 1.0) * fact * a.conj().powi(m as i32 - 1) / d.powi(m as i32 + 1);
    }
    out
}

/// Leibniz rule for the product of two derivative tables.
fn leibniz(f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
    let order = f.len() - 1;
    (0..=order)
        .map(|m| {
            let mut binom = 1.0;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=m {
                acc += f[i] * g[m - i] * binom;
                binom = binom * (m - i) as f64 / (i + 1) as f64;
            }
            acc
        })
        .collect()
}

impl InnerFunctionSpec {
    pub fn new(coords: Vec<Vec<Complex64>>, constant: Complex64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("inner function needs n >= 1".into()));
        }
        if (constant.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain {
                name: "constant modulus",
                value: constant.norm(),
                domain: "{1}",
            });
        }
        for a in coords.iter().flatten() {
            if !(a.norm() < 1.0) {
                return Err(Error::Domain {
                    name: "|zero|",
                    value: a.norm(),
                    domain: "[0, 1)",
                });
            }
        }
        Ok(InnerFunctionSpec { coords, constant })
    }

    /// `J ≡ 1` in `n` variables.
    pub fn trivial(n: usize) -> Self {
        InnerFunctionSpec {
            coords: vec![Vec::new(); n],
            constant: Complex64::new(1.0, 0.0),
        }
    }

    pub fn zeros(&self) -> &[Vec<Complex64>] {
        &self.coords
    }

    /// `∂^k J(z)`, exact via Leibniz over the factors.
    pub fn partial(&self, k: &[usize], z: &[Complex64]) -> Complex64 {
        let mut v = self.constant;
        for ((zeros, &kj), &zj) in self.coords.iter().zip(k).zip(z) {
            let mut table = vec![Complex64::new(0.0, 0.0); kj + 1];
            table[0] = Complex64::new(1.0, 0.0);
            for &a in zeros {
                table = leibniz(&table, &blaschke_factor_derivatives(a, zj, kj));
            }
            v *= table[kj];
        }
        v
    }
}

impl Evaluable for InnerFunctionSpec {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn eval_at(&self, z: &[Complex64]) -> Complex64 {
        let mut v = self.constant;
        for (zeros, &zj) in self.coords.iter().zip(z) {
            for &a in zeros {
                v *= blaschke_factor(a, zj);
            }
        }
        v
    }

    fn band(&self) -> Option<Vec<(i64, i64)>> {
        // finite only when every zero sits at the origin
        if self.coords.iter().flatten().all(|a| *a == Complex64::new(0.0, 0.0)) {
            Some(self.coords.iter().map(|zs| (zs.len() as i64, zs.len() as i64)).collect())
        } else {
            None
        }
    }
}

/// `J(z)` on the closed polydisk.
pub fn inner_eval(j: &InnerFunctionSpec, z: &[Complex64]) -> Result<Complex64> {
    check_point(j.dim(), z, 1.0)?;
    Ok(j.eval_at(z))
}

fn check_point(n: usize, z: &[Complex64], guard: f64) -> Result<()> {
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    for (coord, zj) in z.iter().enumerate() {
        if zj.norm() > guard * (1.0 + 1e-15) {
            return Err(Error::BoundaryGuard {
                coord,
                modulus: zj.norm(),
                guard,
            });
        }
    }
    Ok(())
}

fn check_dims(n: usize, dims: &[usize]) -> Result<()> {
    for &d in dims {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
    }
    Ok(())
}

/// Coefficient form of `T_{h̄} f`: `(T_{h̄} f)_k = Σ_j conj(b_j) a_{k+j}`.
pub fn toeplitz_conj_coeff(f: &CoefficientSeries, h: &SymbolSpec) -> Result<CoefficientSeries> {
    if !h.is_holomorphic() {
        return Err(Error::InvalidParameter("coefficient oracle needs a holomorphic h".into()));
    }
    check_dims(f.dim(), &[Evaluable::dim(h)])?;
    CoefficientSeries::from_fn(f.degrees().to_vec(), |k| {
        h.terms()
            .iter()
            .map(|t| {
                let shifted: Vec<usize> = k.iter().zip(&t.a).map(|(ki, ai)| ki + ai).collect();
                t.coeff().conj() * f.coeff(&shifted)
            })
            .sum()
    })
}

/// Contour form `(2πi)^{-n} ∮ f(ξ) h(ξ) / ∏(ξ_j - z_j) dξ` on the torus lattice.
///
/// The Cauchy kernel is truncated to the frequencies the lattice resolves,
/// which makes the rule exact whenever `M_j / 2` exceeds the band of `f h`.
pub fn toeplitz_quad<F: Evaluable, H: Evaluable>(f: &F, h: &H, z: &[Complex64], rule: &TorusRule) -> Result<Complex64> {
    let band: Vec<(i64, i64)> = match (f.band(), h.band()) {
        (Some(a), Some(b)) => a.iter().zip(&b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect(),
        _ => {
            return Err(Error::InvalidParameter(
                "toeplitz_quad needs band-limited data; use toeplitz_quad_banded".into(),
            ))
        }
    };
    toeplitz_quad_banded(f, h, z, rule, &band)
}

/// [`toeplitz_quad`] with the band of `f h` on the torus supplied by the
/// caller, for data such as `J F · J̄` whose factors are not band-limited.
pub fn toeplitz_quad_banded<F: Evaluable, H: Evaluable>(
    f: &F,
    h: &H,
    z: &[Complex64],
    rule: &TorusRule,
    band: &[(i64, i64)],
) -> Result<Complex64> {
    let n = f.dim();
    check_dims(n, &[h.dim(), rule.dim(), band.len()])?;
    check_point(n, z, 1.0 - f64::EPSILON)?;
    for (coord, (&(lo, hi), &m)) in band.iter().zip(rule.points()).enumerate() {
        let needed = 2 * (hi.max(-lo).max(0) as usize) + 2;
        if m < needed {
            return Err(Error::RuleTooCoarse { coord, needed, have: m });
        }
    }
    let halves: Vec<i32> = rule.points().iter().map(|&m| (m / 2) as i32).collect();
    let one = Complex64::new(1.0, 0.0);
    Ok(integrate_torus(
        |xi| {
            let mut kernel = one;
            for j in 0..n {
                let w = z[j] * xi[j].conj();
                // Σ_{k < M/2} w^k
                kernel *= if (one - w).norm() < 1e-300 {
                    Complex64::new(halves[j] as f64, 0.0)
                } else {
                    (one - w.powi(halves[j])) / (one - w)
                };
            }
            f.eval_at(xi) * h.eval_at(xi) * kernel
        },
        rule,
    ))
}

/// `∏_j (1 - |ζ_j|^2)^{α_j}`
#[inline]
fn kernel_weight(node: &Node, alpha: &[f64]) -> f64 {
    alpha
        .iter()
        .enumerate()
        .map(|(j, &a)| if a == 0.0 { 1.0 } else { node.gap_sq(j).powf(a) })
        .product()
}

#[inline]
fn cpow(base: Complex64, e: f64) -> Complex64 {
    if e == e.round() && e.abs() < 64.0 {
        base.powi(e as i32)
    } else {
        (base.ln() * e).exp()
    }
}

/// `∫ (1-|ζ|^2)^α f g / (1 - ζ z̄)^{α+2} dm_{2n}` with the default guard.
pub fn hankel_little<F: Evaluable, G: Evaluable>(
    f: &F,
    g: &G,
    alpha: &KernelOrder,
    z: &[Complex64],
    rule: &PolydiskRule,
) -> Result<Complex64> {
    hankel_little_guarded(f, g, alpha, z, rule, DEFAULT_GUARD)
}

pub fn hankel_little_guarded<F: Evaluable, G: Evaluable>(
    f: &F,
    g: &G,
    alpha: &KernelOrder,
    z: &[Complex64],
    rule: &PolydiskRule,
    guard: f64,
) -> Result<Complex64> {
    let n = f.dim();
    check_dims(n, &[g.dim(), alpha.dim(), rule.dim()])?;
    check_point(n, z, guard)?;
    let a = alpha.as_slice();
    let one = Complex64::new(1.0, 0.0);
    integrate_polydisk(
        |node| {
            let mut k = one;
            for j in 0..n {
                k *= cpow(one - node.z[j] * z[j].conj(), -(a[j] + 2.0));
            }
            k * kernel_weight(node, a) * f.eval_at(node.z) * g.eval_at(node.z)
        },
        rule,
    )
}

/// Coefficients `c_m` of the little Hankel image `Σ_m c_m z̄^m`:
/// `c_m = ∏_j (α_j+2)_{m_j}/m_j! · ∫ (1-|ζ|^2)^α ζ^m f g dm_{2n}`.
///
/// Exact for polynomial `f g` when `degrees` covers the `ζ̄`-degree of `f g`.
pub fn hankel_conj_coeffs<F: Evaluable, G: Evaluable>(
    f: &F,
    g: &G,
    alpha: &KernelOrder,
    degrees: &[usize],
    rule: &PolydiskRule,
) -> Result<CoefficientSeries> {
    let n = f.dim();
    check_dims(n, &[g.dim(), alpha.dim(), rule.dim(), degrees.len()])?;
    let a = alpha.as_slice();
    let rising: Vec<Vec<f64>> = a.iter().zip(degrees).map(|(&aj, &d)| rising_over_factorial(aj + 2.0, d + 1)).collect();
    CoefficientSeries::from_fn(degrees.to_vec(), |m| {
        let mut scale = 1.0;
        for j in 0..n {
            scale *= rising[j][m[j]];
        }
        let moment = integrate_polydisk(
            |node| {
                let mut v = f.eval_at(node.z) * g.eval_at(node.z) * kernel_weight(node, a);
                for j in 0..n {
                    v *= node.z[j].powi(m[j] as i32);
                }
                v
            },
            rule,
        );
        moment.map(|c| c * scale).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    })
    .and_then(|s| {
        if s.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            Err(Error::NonFinite { node: Vec::new() })
        } else {
            Ok(s)
        }
    })
}

/// `∏ (α_j+1)/π ∫ (1-|ζ|^2)^α F(ζ) / (1 - z ζ̄)^{α+2} dm_{2n}`.
pub fn bergman_projection<F: Evaluable>(f: &F, alpha: &KernelOrder, z: &[Complex64], rule: &PolydiskRule) -> Result<Complex64> {
    bergman_projection_guarded(f, alpha, z, rule, DEFAULT_GUARD)
}

pub fn bergman_projection_guarded<F: Evaluable>(
    f: &F,
    alpha: &KernelOrder,
    z: &[Complex64],
    rule: &PolydiskRule,
    guard: f64,
) -> Result<Complex64> {
    let n = f.dim();
    check_dims(n, &[alpha.dim(), rule.dim()])?;
    check_point(n, z, guard)?;
    let a = alpha.as_slice();
    let norm: f64 = a.iter().map(|aj| (aj + 1.0) / PI).product();
    let one = Complex64::new(1.0, 0.0);
    let v = integrate_polydisk(
        |node| {
            let mut k = one;
            for j in 0..n {
                k *= cpow(one - z[j] * node.z[j].conj(), -(a[j] + 2.0));
            }
            k * kernel_weight(node, a) * f.eval_at(node.z)
        },
        rule,
    )?;
    Ok(v * norm)
}

/// `φ_z(w) = (z - w)/(1 - z̄ w)`
#[inline]
pub fn mobius(z: Complex64, w: Complex64) -> Complex64 {
    (z - w) / (Complex64::new(1.0, 0.0) - z.conj() * w)
}

/// `∏(α_j+1)/π (1-|z|^2)^{α+2} ∫ (1-|ζ|^2)^α f g / |1 - z ζ̄|^{4+2α} dm_{2n}`.
///
/// Evaluated after the change of variables `ζ = φ_z(w)`, which turns the
/// integral into `∏(α_j+1)/π ∫ (1-|w|^2)^α (f g)(φ_z(w)) dm_{2n}(w)`.
pub fn berezin<F: Evaluable, G: Evaluable>(
    f: &F,
    g: &G,
    alpha: &KernelOrder,
    z: &[Complex64],
    rule: &PolydiskRule,
) -> Result<Complex64> {
    berezin_guarded(f, g, alpha, z, rule, DEFAULT_GUARD)
}

pub fn berezin_guarded<F: Evaluable, G: Evaluable>(
    f: &F,
    g: &G,
    alpha: &KernelOrder,
    z: &[Complex64],
    rule: &PolydiskRule,
    guard: f64,
) -> Result<Complex64> {
    let n = f.dim();
    check_dims(n, &[g.dim(), alpha.dim(), rule.dim()])?;
    check_point(n, z, guard)?;
    let a = alpha.as_slice();
    let norm: f64 = a.iter().map(|aj| (aj + 1.0) / PI).product();
    let v = integrate_polydisk(
        |node| {
            let zeta: Vec<Complex64> = (0..n).map(|j| mobius(z[j], node.z[j])).collect();
            kernel_weight(node, a) * f.eval_at(&zeta) * g.eval_at(&zeta)
        },
        rule,
    )?;
    Ok(v * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseries::MultiIndex;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mono(k: &[usize]) -> CoefficientSeries {
        CoefficientSeries::monomial(&MultiIndex(k.to_vec()), c(1.0, 0.0)).unwrap()
    }

    fn xi() -> SymbolSpec {
        SymbolSpec::term(c(1.0, 0.0), vec![1], vec![0]).unwrap()
    }

    fn one_sym(n: usize) -> SymbolSpec {
        SymbolSpec::constant(n, c(1.0, 0.0))
    }

    #[test]
    fn toeplitz_coefficient_examples() {
        let t = toeplitz_conj_coeff(&mono(&[2]), &xi()).unwrap();
        assert_eq!(t.coeffs(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let f = CoefficientSeries::from_fn(vec![3], |k| c(k[0] as f64, 1.0)).unwrap();
        assert_eq!(toeplitz_conj_coeff(&f, &one_sym(1)).unwrap(), f);
        let t = toeplitz_conj_coeff(&mono(&[0]), &xi()).unwrap();
        assert!(t.is_zero());
        assert!(toeplitz_conj_coeff(&f, &xi().conj()).is_err());
    }

    #[test]
    fn toeplitz_quadrature_examples() {
        let rule = TorusRule::uniform(1, 16).unwrap();
        let z = [c(0.3, 0.0)];
        let v = toeplitz_quad(&mono(&[2]), &xi().conj(), &z, &rule).unwrap();
        assert!((v - c(0.3, 0.0)).norm() < 1e-15);
        let f = CoefficientSeries::from_fn(vec![4], |k| c(1.0 / (k[0] + 1) as f64, -0.5)).unwrap();
        for zz in [c(0.0, 0.0), c(0.7, -0.2), c(-0.1, 0.95)] {
            let v = toeplitz_quad(&f, &one_sym(1), &[zz], &rule).unwrap();
            assert!((v - f.eval_unchecked(&[zz])).norm() < 1e-14);
        }
        let v = toeplitz_quad(&mono(&[0]), &xi().conj(), &z, &rule).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn toeplitz_refuses_coarse_rule() {
        let f = mono(&[8]);
        // f ξ̄ has band [-1, 7]
        let err = toeplitz_quad(&f, &xi().conj(), &[c(0.1, 0.0)], &TorusRule::uniform(1, 14).unwrap()).unwrap_err();
        assert!(matches!(err, Error::RuleTooCoarse { needed: 16, have: 14, .. }));
        let v = toeplitz_quad(&f, &xi().conj(), &[c(0.1, 0.0)], &TorusRule::uniform(1, 16).unwrap()).unwrap();
        assert!((v - c(1e-7, 0.0)).norm() < 1e-15);
        let j = InnerFunctionSpec::new(vec![vec![c(0.5, 0.0)]], c(1.0, 0.0)).unwrap();
        assert!(toeplitz_quad(&f, &Conj(&j), &[c(0.1, 0.0)], &TorusRule::uniform(1, 64).unwrap()).is_err());
    }

    #[test]
    fn hankel_examples() {
        let alpha = KernelOrder::uniform(0.0, 1).unwrap();
        let rule = PolydiskRule::uniform(1, 64, 256).unwrap();
        let one = mono(&[0]);
        for z in [c(0.0, 0.0), c(0.5, 0.5), c(-0.9, 0.0), c(0.0, 0.9)] {
            let v = hankel_little(&one, &one_sym(1), &alpha, &[z], &rule).unwrap();
            assert!((v - c(PI, 0.0)).norm() < 1e-8, "{z}: {v}");
            let v = hankel_little(&mono(&[1]), &one_sym(1), &alpha, &[z], &rule).unwrap();
            assert!(v.norm() < 1e-8);
        }
        let zbar = xi().conj();
        let v = hankel_little(&mono(&[1]), &zbar, &alpha, &[c(0.0, 0.0)], &rule).unwrap();
        assert!((v - c(PI / 2.0, 0.0)).norm() < 1e-12);
        assert!(matches!(
            hankel_little(&one, &one_sym(1), &alpha, &[c(0.96, 0.0)], &rule),
            Err(Error::BoundaryGuard { .. })
        ));
        assert!(hankel_little_guarded(&one, &one_sym(1), &alpha, &[c(0.96, 0.0)], &rule, 0.99).is_ok());
    }

    #[test]
    fn hankel_image_is_conjugate_polynomial() {
        // image coefficients against direct quadrature on a 5×5 grid
        let alpha = KernelOrder::uniform(0.5, 1).unwrap();
        let rule = alpha.rule(64, 256).unwrap();
        let f = CoefficientSeries::from_fn(vec![3], |k| c(0.3 * k[0] as f64 - 0.4, 0.2)).unwrap();
        let g = SymbolSpec::new(vec![
            SymbolTerm { c: [0.5, 0.0], a: vec![0], b: vec![2] },
            SymbolTerm { c: [0.0, 0.25], a: vec![1], b: vec![3] },
            SymbolTerm { c: [0.1, 0.0], a: vec![0], b: vec![0] },
        ])
        .unwrap();
        let image = hankel_conj_coeffs(&f, &g, &alpha, &g.conj_degrees(), &rule).unwrap();
        let mut worst = 0.0f64;
        for i in 0..5 {
            for k in 0..5 {
                let z = c(-0.8 + 0.4 * i as f64, -0.8 + 0.4 * k as f64);
                if z.norm() > 0.95 {
                    continue;
                }
                let direct = hankel_little(&f, &g, &alpha, &[z], &rule).unwrap();
                worst = worst.max((direct - image.eval_unchecked(&[z.conj()])).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn projection_examples() {
        let rule = PolydiskRule::uniform(1, 64, 256).unwrap();
        let a0 = KernelOrder::uniform(0.0, 1).unwrap();
        let v = bergman_projection(&mono(&[0]), &a0, &[c(0.7, 0.1)], &rule).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-10);
        let v = bergman_projection(&xi().conj(), &a0, &[c(0.7, 0.1)], &rule).unwrap();
        assert!(v.norm() < 1e-10);
        let v = bergman_projection(&mono(&[1]), &a0, &[c(0.4, 0.0)], &rule).unwrap();
        assert!((v - c(0.4, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, alpha) in [(1, 0.0), (1, 1.5), (1, -0.5), (2, 0.0)] {
            let f = CoefficientSeries::random(n, if n == 1 { 8 } else { 4 }, &mut rng).unwrap();
            let order = KernelOrder::uniform(alpha, n).unwrap();
            let rule = order.rule(24, if n == 1 { 128 } else { 48 }).unwrap();
            for z in [c(0.0, 0.0), c(0.5, -0.3), c(-0.8, 0.1)] {
                if n == 2 && z.norm() > 0.6 {
                    continue;
                }
                let zz = vec![z; n];
                let v = bergman_projection(&f, &order, &zz, &rule).unwrap();
                assert!((v - f.eval_unchecked(&zz)).norm() < 1e-8, "n={n} alpha={alpha} z={z}");
            }
        }
    }

    /// Direct quadrature of the Berezin integral without the change of variables.
    fn berezin_direct(f: &impl Evaluable, g: &impl Evaluable, alpha: f64, z: Complex64, rule: &PolydiskRule) -> Complex64 {
        let one = c(1.0, 0.0);
        let v = integrate_polydisk(
            |node| {
                let k = (one - z * node.z[0].conj()).norm().powf(-(4.0 + 2.0 * alpha));
                k * node.gap_sq(0).powf(alpha) * f.eval_at(node.z) * g.eval_at(node.z)
            },
            rule,
        )
        .unwrap();
        v * (alpha + 1.0) / PI * (1.0 - z.norm_sqr()).powf(alpha + 2.0)
    }

    #[test]
    fn berezin_examples() {
        let rule = PolydiskRule::uniform(1, 64, 128).unwrap();
        let one = mono(&[0]);
        for alpha in [0.0, 1.0] {
            let order = KernelOrder::uniform(alpha, 1).unwrap();
            for z in [c(0.0, 0.0), c(0.5, 0.0), c(0.6, -0.6), c(0.0, 0.9)] {
                let v = berezin(&one, &one_sym(1), &order, &[z], &rule).unwrap();
                assert!((v - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
        let a0 = KernelOrder::uniform(0.0, 1).unwrap();
        let v = berezin(&mono(&[1]), &one_sym(1), &a0, &[c(0.0, 0.0)], &rule).unwrap();
        assert!(v.norm() < 1e-14);
        let a2 = KernelOrder::uniform(0.0, 2).unwrap();
        let v = berezin(&mono(&[0, 0]), &one_sym(2), &a2, &[c(0.9, 0.0), c(-0.3, 0.4)], &PolydiskRule::uniform(2, 16, 16).unwrap()).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn berezin_pullback_matches_direct_form() {
        let rule = PolydiskRule::uniform(1, 128, 256).unwrap();
        let f = CoefficientSeries::from_fn(vec![2], |k| c(1.0, 0.5 * k[0] as f64)).unwrap();
        let g = xi().conj();
        for alpha in [0.0, 1.0] {
            let order = KernelOrder::uniform(alpha, 1).unwrap();
            for z in [c(0.2, 0.1), c(-0.5, 0.3)] {
                let a = berezin(&f, &g, &order, &[z], &rule).unwrap();
                let b = berezin_direct(&f, &g, alpha, z, &rule);
                assert!((a - b).norm() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn inner_examples() {
        let j0 = InnerFunctionSpec::new(vec![vec![c(0.0, 0.0)]], c(1.0, 0.0)).unwrap();
        assert_eq!(inner_eval(&j0, &[c(0.5, 0.0)]).unwrap(), c(0.5, 0.0));
        let j = InnerFunctionSpec::new(vec![vec![c(0.5, 0.0)]], c(1.0, 0.0)).unwrap();
        assert!(inner_eval(&j, &[c(0.5, 0.0)]).unwrap().norm() < 1e-16);
        let j2 = InnerFunctionSpec::new(vec![vec![c(0.5, 0.2), c(-0.3, 0.6)], vec![c(0.0, 0.0), c(0.9, 0.0)]], c(0.0, 1.0)).unwrap();
        for k in 0..64 {
            let t = 2.0 * PI * k as f64 / 64.0;
            let xi = [Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, 1.7 * t)];
            assert!((inner_eval(&j2, &xi).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!(inner_eval(&j2, &[c(1.1, 0.0), c(0.0, 0.0)]).is_err());
        assert!(InnerFunctionSpec::new(vec![vec![c(1.0, 0.0)]], c(1.0, 0.0)).is_err());
        assert!(InnerFunctionSpec::new(vec![vec![]], c(2.0, 0.0)).is_err());
    }

    #[test]
    fn inner_partials_match_finite_differences() {
        let j = InnerFunctionSpec::new(vec![vec![c(0.5, 0.2), c(0.0, 0.0), c(-0.7, 0.0)]], c(1.0, 0.0)).unwrap();
        let z = c(0.3, -0.4);
        let h = 1e-4;
        let f = |w: Complex64| j.eval_at(&[w]);
        let d1 = (f(z + h) - f(z - h)) / (2.0 * h);
        let d2 = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
        assert!((j.partial(&[1], &[z]) - d1).norm() < 1e-6);
        assert!((j.partial(&[2], &[z]) - d2).norm() < 1e-4);
        assert_eq!(j.partial(&[0], &[z]), f(z));
    }

    #[test]
    fn json_shapes() {
        let s: SymbolSpec = serde_json::from_str(r#"{"terms":[{"c":[1,0],"a":[1],"b":[0]}]}"#).unwrap();
        assert_eq!(s, xi());
        assert!(serde_json::from_str::<SymbolSpec>(r#"{"terms":[]}"#).is_err());
        assert!(serde_json::from_str::<SymbolSpec>(r#"{"terms":[{"c":[1,0],"a":[1],"b":[0,0]}]}"#).is_err());
        let j: InnerFunctionSpec = serde_json::from_str(r#"{"coords":[{"zeros":[[0.5,0.0]]}]}"#).unwrap();
        assert_eq!(j.zeros()[0], vec![c(0.5, 0.0)]);
        let back = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<InnerFunctionSpec>(&back).unwrap(), j);
        assert!(serde_json::from_str::<KernelOrder>("[-1.5]").is_err());
        assert_eq!(serde_json::from_str::<KernelOrder>("[0.5]").unwrap().as_slice(), &[0.5]);
    }

    fn series_strategy(deg: usize) -> impl Strategy<Value = CoefficientSeries> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), deg + 1)
            .prop_map(move |v| CoefficientSeries::new(vec![deg], v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn prop_toeplitz_oracle_agreement(f in series_strategy(8), h in series_strategy(4), zr in 0.0f64..0.95, zt in 0.0f64..6.3) {
            let sym = SymbolSpec::from_series(&h);
            let rule = TorusRule::uniform(1, 2 * (8 + 4) + 2).unwrap();
            let z = [Complex64::from_polar(zr, zt)];
            let a = toeplitz_quad(&f, &sym.conj(), &z, &rule).unwrap();
            let b = toeplitz_conj_coeff(&f, &sym).unwrap().eval_unchecked(&z);
            prop_assert!((a - b).norm() < 1e-10);
        }

        #[test]
        fn prop_operators_linear(f1 in series_strategy(3), f2 in series_strategy(3), s in -2.0f64..2.0) {
            let rule = PolydiskRule::uniform(1, 16, 32).unwrap();
            let alpha = KernelOrder::uniform(1.0, 1).unwrap();
            let g = SymbolSpec::term(c(0.5, 0.0), vec![0], vec![1]).unwrap();
            let combo = f1.lin_comb(c(1.0, 0.0), &f2, c(s, 0.0)).unwrap();
            let z = [c(0.3, -0.2)];
            let h = |f: &CoefficientSeries| hankel_little(f, &g, &alpha, &z, &rule).unwrap();
            prop_assert!((h(&combo) - (h(&f1) + h(&f2) * s)).norm() < 1e-12 * (1.0 + h(&combo).norm()));
            let b = |f: &CoefficientSeries| berezin(f, &g, &alpha, &z, &rule).unwrap();
            prop_assert!((b(&combo) - (b(&f1) + b(&f2) * s)).norm() < 1e-12 * (1.0 + b(&combo).norm()));
            let t = TorusRule::uniform(1, 16).unwrap();
            let tq = |f: &CoefficientSeries| toeplitz_quad(f, &g, &z, &t).unwrap();
            prop_assert!((tq(&combo) - (tq(&f1) + tq(&f2) * s)).norm() < 1e-12 * (1.0 + tq(&combo).norm()));
        }

        #[test]
        fn prop_berezin_positive(zr in 0.0f64..0.95, zt in 0.0f64..6.3, alpha in -0.5f64..2.0, seed in 0u64..100) {
            // f g = |p|^2 ≥ 0
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = CoefficientSeries::random(1, 3, &mut rng).unwrap();
            let order = KernelOrder::uniform(alpha, 1).unwrap();
            let rule = order.rule(16, 32).unwrap();
            let v = berezin(&p, &Conj(&p), &order, &[Complex64::from_polar(zr, zt)], &rule).unwrap();
            prop_assert!(v.re >= 0.0 && v.im.abs() <= 1e-12 * (1.0 + v.re));
        }

        #[test]
        fn prop_berezin_normalized(zr in 0.0f64..0.9, zt in 0.0f64..6.3, ai in 0usize..3, n in 1usize..3) {
            let alpha = [0.0, 0.5, 1.0][ai];
            let order = KernelOrder::uniform(alpha, n).unwrap();
            let rule = order.rule(32, 8).unwrap();
            let z = vec![Complex64::from_polar(zr, zt); n];
            let v = berezin(&mono(&vec![0; n]), &one_sym(n), &order, &z, &rule).unwrap();
            prop_assert!((v - c(1.0, 0.0)).norm() < 1e-6);
        }
    }
}
