//! Tensor-product quadrature on the polydisk `U^n` and the torus `T^n`, and
//! the weighted norms built on it.
//!
//! Each disk factor is a polar rule: Gauss–Legendre in a graded radial
//! variable `s` with `1 - ρ = (1 - s)^κ`, times the uniform trapezoid rule in
//! the angle. The grading turns boundary factors `(1-ρ)^γ dρ` into
//! `κ (1-s)^{κ(γ+1)-1} ds`, which is polynomial for half-integer `γ` at
//! `κ = 2` and for `γ = 1/κ - 1` in general.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pseries::{derivative_d, CoefficientSeries};
use crate::special::{gauss_legendre, ordered_map, tree_sum};
use crate::weights::WeightSpec;

pub const DEFAULT_RADIAL: usize = 64;
pub const DEFAULT_ANGULAR: usize = 128;
pub const DEFAULT_GRADING: u32 = 2;

/// Smallest grading `κ ≥ 2` with `κ(γ+1) ≥ 1`, so that `(1-ρ)^γ dρ` has a
/// non-singular density in the graded variable.
pub fn grading_for(gamma: f64) -> u32 {
    if gamma >= 0.0 {
        return DEFAULT_GRADING;
    }
    assert!(gamma > -1.0, "boundary exponent must exceed -1");
    ((1.0 / (gamma + 1.0)) - 1e-9).ceil().max(DEFAULT_GRADING as f64) as u32
}

/// Polar rule on the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskRule {
    radii: Vec<f64>,
    /// `1 - ρ_i`, kept separately to avoid cancellation near the circle.
    gaps: Vec<f64>,
    /// `Σ_i w_i g(ρ_i) ≈ ∫_0^1 g(ρ) ρ dρ`
    radial_weights: Vec<f64>,
    angular: usize,
    grading: u32,
}

impl DiskRule {
    pub fn new(radial: usize, angular: usize) -> Result<Self> {
        Self::graded(radial, angular, DEFAULT_GRADING)
    }

    pub fn graded(radial: usize, angular: usize, grading: u32) -> Result<Self> {
        if radial == 0 || angular == 0 || grading == 0 {
            return Err(Error::InvalidParameter(format!(
                "disk rule needs positive sizes, got radial={radial} angular={angular} grading={grading}"
            )));
        }
        let (s, ws) = gauss_legendre(radial);
        let kappa = grading as f64;
        let mut radii = Vec::with_capacity(radial);
        let mut gaps = Vec::with_capacity(radial);
        let mut radial_weights = Vec::with_capacity(radial);
        for (&si, &wi) in s.iter().zip(&ws) {
            let gap = (1.0 - si).powi(grading as i32);
            let rho = 1.0 - gap;
            let jac = kappa * (1.0 - si).powi(grading as i32 - 1);
            radii.push(rho);
            gaps.push(gap);
            radial_weights.push(wi * jac * rho);
        }
        Ok(DiskRule {
            radii,
            gaps,
            radial_weights,
            angular,
            grading,
        })
    }

    pub fn radial(&self) -> usize {
        self.radii.len()
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn grading(&self) -> u32 {
        self.grading
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rule with radial and angular counts doubled.
    pub fn refined(&self) -> Self {
        Self::graded(2 * self.radial(), 2 * self.angular, self.grading).expect("sizes stay positive")
    }

    /// Node `i` in radius-major order: `(ζ, 1-|ζ|, area weight)`.
    #[inline]
    pub fn node(&self, i: usize) -> (Complex64, f64, f64) {
        let r = i / self.angular;
        let a = i % self.angular;
        let theta = 2.0 * PI * a as f64 / self.angular as f64;
        let w = self.radial_weights[r] * 2.0 * PI / self.angular as f64;
        (Complex64::from_polar(self.radii[r], theta), self.gaps[r], w)
    }

    /// `∫_U g dm` for a single-disk integrand of `(ζ, 1-|ζ|)`.
    pub fn integrate(&self, g: impl Fn(Complex64, f64) -> Complex64) -> Complex64 {
        let vals: Vec<Complex64> = (0..self.len())
            .map(|i| {
                let (z, gap, w) = self.node(i);
                g(z, gap) * w
            })
            .collect();
        tree_sum(&vals)
    }
}

/// Quadrature point handed to polydisk integrands.
#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    pub z: &'a [Complex64],
    /// `1 - |z_j|`, accurate near the torus.
    pub gap: &'a [f64],
}

impl Node<'_> {
    /// `1 - |z_j|^2`
    #[inline]
    pub fn gap_sq(&self, j: usize) -> f64 {
        self.gap[j] * (2.0 - self.gap[j])
    }

    /// `∏_j (1 - |z_j|^2)`
    pub fn prod_gap_sq(&self) -> f64 {
        (0..self.z.len()).map(|j| self.gap_sq(j)).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolydiskRule {
    coords: Vec<DiskRule>,
}

/// Sizes as they appear in configs: `{"radial":64,"angular":128}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSizes {
    #[serde(default = "default_radial")]
    pub radial: usize,
    #[serde(default = "default_angular")]
    pub angular: usize,
}

fn default_radial() -> usize {
    DEFAULT_RADIAL
}

fn default_angular() -> usize {
    DEFAULT_ANGULAR
}

impl Default for QuadratureSizes {
    fn default() -> Self {
        QuadratureSizes {
            radial: DEFAULT_RADIAL,
            angular: DEFAULT_ANGULAR,
        }
    }
}

impl PolydiskRule {
    pub fn new(coords: Vec<DiskRule>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("polydisk rule needs n >= 1".into()));
        }
        Ok(PolydiskRule { coords })
    }

    pub fn uniform(n: usize, radial: usize, angular: usize) -> Result<Self> {
        Self::new(vec![DiskRule::new(radial, angular)?; n])
    }

    pub fn graded(n: usize, radial: usize, angular: usize, grading: u32) -> Result<Self> {
        Self::new(vec![DiskRule::graded(radial, angular, grading)?; n])
    }

    pub fn from_sizes(n: usize, sizes: QuadratureSizes) -> Result<Self> {
        Self::uniform(n, sizes.radial, sizes.angular)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[DiskRule] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.iter().map(DiskRule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn refined(&self) -> Self {
        PolydiskRule {
            coords: self.coords.iter().map(DiskRule::refined).collect(),
        }
    }

    /// Sum of all tensor weights (`π^n` up to round-off).
    pub fn total_weight(&self) -> f64 {
        self.coords
            .iter()
            .map(|d| d.radial_weights.iter().sum::<f64>() * 2.0 * PI)
            .product()
    }

    /// Visits every node of the sub-grid over coordinates `1..n` with the
    /// first coordinate fixed at node `i0`, in storage order.
    fn ring_values<F>(&self, i0: usize, f: &F) -> Result<Complex64>
    where
        F: Fn(&Node) -> Complex64,
    {
        let n = self.dim();
        let (z0, g0, w0) = self.coords[0].node(i0);
        let mut z = vec![z0; n];
        let mut gap = vec![g0; n];
        let mut w = vec![w0; n];
        let mut idx = vec![0usize; n];
        let rest: usize = self.coords[1..].iter().map(DiskRule::len).product();
        let mut out = Vec::with_capacity(rest);
        for _ in 0..rest {
            for j in 1..n {
                let (zj, gj, wj) = self.coords[j].node(idx[j]);
                z[j] = zj;
                gap[j] = gj;
                w[j] = wj;
            }
            let v = f(&Node { z: &z, gap: &gap });
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite {
                    node: z.iter().map(|c| (c.re, c.im)).collect(),
                });
            }
            out.push(v * w.iter().product::<f64>());
            for j in (1..n).rev() {
                idx[j] += 1;
                if idx[j] < self.coords[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(tree_sum(&out))
    }
}

/// `∫_{U^n} F dm_{2n}` by the tensor rule, reduced in a fixed tree order.
pub fn integrate_polydisk<F>(f: F, rule: &PolydiskRule) -> Result<Complex64>
where
    F: Fn(&Node) -> Complex64 + Sync + Send,
{
    let partial = ordered_map(rule.coords[0].len(), |i0| rule.ring_values(i0, &f));
    let sums = partial.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tree_sum(&sums))
}

/// Uniform lattice on `T^n` with `M_j` points in coordinate `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusRule {
    points: Vec<usize>,
}

impl TorusRule {
    pub fn new(points: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("torus rule needs n >= 1".into()));
        }
        if let Some((j, &m)) = points.iter().enumerate().find(|(_, &m)| m < 4) {
            return Err(Error::RuleTooCoarse {
                coord: j,
                needed: 4,
                have: m,
            });
        }
        Ok(TorusRule { points })
    }

    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        Self::new(vec![m; n])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All lattice points in storage order (last coordinate fastest).
    pub fn nodes(&self) -> impl Iterator<Item = Vec<Complex64>> + '_ {
        let n = self.dim();
        let tables: Vec<Vec<Complex64>> = self
            .points
            .iter()
            .map(|&m| (0..m).map(|a| Complex64::from_polar(1.0, 2.0 * PI * a as f64 / m as f64)).collect())
            .collect();
        let mut idx = vec![0usize; n];
        (0..self.len()).map(move |step| {
            if step > 0 {
                for j in (0..n).rev() {
                    idx[j] += 1;
                    if idx[j] < self.points[j] {
                        break;
                    }
                    idx[j] = 0;
                }
            }
            idx.iter().zip(&tables).map(|(&a, t)| t[a]).collect()
        })
    }
}

/// Average of `F` over the torus lattice; exact for Laurent polynomials of
/// coordinate degree `< M_j`.
pub fn integrate_torus<F>(f: F, rule: &TorusRule) -> Complex64
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let vals: Vec<Complex64> = rule.nodes().map(|xi| f(&xi)).collect();
    tree_sum(&vals) / rule.len() as f64
}

/// Which radial argument the weight is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// `ω(1-|z|)`, as in the norm definitions.
    OneMinusModulus,
    /// `ω(1-|z|^2)`, as in the kernel integral estimate.
    OneMinusModulusSquared,
}

/// `∏_j ω_j(t_j)` at a quadrature node.
#[inline]
pub fn weight_at(w: &WeightSpec, node: &Node, form: WeightForm) -> f64 {
    w.coords
        .iter()
        .enumerate()
        .map(|(j, cw)| {
            let t = match form {
                WeightForm::OneMinusModulus => node.gap[j],
                WeightForm::OneMinusModulusSquared => node.gap_sq(j),
            };
            cw.eval_unchecked(t)
        })
        .product()
}

fn check_norm_args(n_f: usize, w: &WeightSpec, rule: &PolydiskRule) -> Result<()> {
    if w.dim() != n_f {
        return Err(Error::DimensionMismatch {
            expected: n_f,
            got: w.dim(),
        });
    }
    if rule.dim() != n_f {
        return Err(Error::DimensionMismatch {
            expected: n_f,
            got: rule.dim(),
        });
    }
    Ok(())
}

fn check_p(p: f64, min: f64, inclusive: bool) -> Result<()> {
    let ok = if inclusive { p >= min } else { p > min };
    if !ok || !p.is_finite() {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: if inclusive { "[1, inf)" } else { "(1, inf)" },
        });
    }
    Ok(())
}

#[inline]
fn abs_pow(z: Complex64, p: f64) -> f64 {
    if p == 2.0 {
        z.norm_sqr()
    } else {
        z.norm().powf(p)
    }
}

/// `‖F‖_{L^p(ω)}` for an arbitrary integrand on the polydisk.
pub fn norm_lp_grid<F>(f: F, w: &WeightSpec, p: f64, rule: &PolydiskRule) -> Result<f64>
where
    F: Fn(&Node) -> Complex64 + Sync + Send,
{
    check_p(p, 1.0, true)?;
    if w.dim() != rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: rule.dim(),
            got: w.dim(),
        });
    }
    let total = integrate_polydisk(
        |node| Complex64::new(abs_pow(f(node), p) * weight_at(w, node, WeightForm::OneMinusModulus), 0.0),
        rule,
    )?;
    Ok(total.re.max(0.0).powf(1.0 / p))
}

/// `‖f‖_{A^p(ω)} = (∫ |f|^p ω(1-|z|) dm_{2n})^{1/p}`.
pub fn norm_ap(f: &CoefficientSeries, w: &WeightSpec, p: f64, rule: &PolydiskRule) -> Result<f64> {
    check_p(p, 1.0, false)?;
    check_norm_args(f.dim(), w, rule)?;
    if f.is_zero() {
        return Ok(0.0);
    }
    norm_lp_grid(|node| f.eval_unchecked(node.z), w, p, rule)
}

/// `‖f‖_{B_p(ω)} = (∫ |Df|^p ω(1-|z|) (1-|z|^2)^{p-2} dm_{2n})^{1/p}`.
pub fn norm_besov(f: &CoefficientSeries, w: &WeightSpec, p: f64, rule: &PolydiskRule) -> Result<f64> {
    check_p(p, 1.0, true)?;
    check_norm_args(f.dim(), w, rule)?;
    if f.is_zero() {
        return Ok(0.0);
    }
    let df = derivative_d(f);
    let total = integrate_polydisk(
        |node| {
            let factor = if p == 2.0 { 1.0 } else { node.prod_gap_sq().powf(p - 2.0) };
            let v = abs_pow(df.eval_unchecked(node.z), p) * weight_at(w, node, WeightForm::OneMinusModulus) * factor;
            Complex64::new(v, 0.0)
        },
        rule,
    )?;
    Ok(total.re.max(0.0).powf(1.0 / p))
}

/// A norm value together with its value on the doubled rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckedNorm {
    pub value: f64,
    pub refined: f64,
    pub relative_change: f64,
    /// Set when refinement moves the value by more than 1%.
    pub flagged: bool,
}

pub const REFINEMENT_FLAG: f64 = 0.01;

pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// [`norm_besov`] plus a rule-doubling check, which detects an insufficient
/// weight against the `(1-|z|^2)^{p-2}` boundary factor when `p < 2`.
pub fn norm_besov_checked(f: &CoefficientSeries, w: &WeightSpec, p: f64, rule: &PolydiskRule) -> Result<CheckedNorm> {
    let value = norm_besov(f, w, p, rule)?;
    let refined = norm_besov(f, w, p, &rule.refined())?;
    let relative_change = relative_change(value, refined);
    Ok(CheckedNorm {
        value,
        refined,
        relative_change,
        flagged: relative_change > REFINEMENT_FLAG,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseries::MultiIndex;
    use crate::weights::CoordWeight;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn disk_examples() {
        let rule = PolydiskRule::uniform(1, 64, 128).unwrap();
        let area = integrate_polydisk(|_| one(), &rule).unwrap();
        assert!((area.re - PI).abs() < 1e-13);
        let m2 = integrate_polydisk(|n| Complex64::new(n.z[0].norm_sqr(), 0.0), &rule).unwrap();
        assert!((m2.re - PI / 2.0).abs() < 1e-13);
        let odd = integrate_polydisk(|n| n.z[0], &rule).unwrap();
        assert!(odd.norm() < 1e-13);
    }

    #[test]
    fn tensor_weight_sum() {
        for n in 1..=3 {
            let rule = PolydiskRule::uniform(n, 12, 8).unwrap();
            assert!((rule.total_weight() - PI.powi(n as i32)).abs() < 1e-10);
        }
        for kappa in [1, 2, 3, 10] {
            let d = DiskRule::graded(40, 4, kappa).unwrap();
            let s: f64 = d.radial_weights().iter().sum();
            assert!((s - 0.5).abs() < 1e-13, "kappa {kappa}");
            assert!(d.radial_weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let rule = PolydiskRule::uniform(1, 4, 4).unwrap();
        let err = integrate_polydisk(|n| if n.z[0].re > 0.5 { Complex64::new(f64::NAN, 0.0) } else { one() }, &rule)
            .unwrap_err();
        match err {
            Error::NonFinite { node } => assert!(node[0].0 > 0.5),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn torus_orthogonality() {
        let rule = TorusRule::uniform(1, 16).unwrap();
        for k in -15i32..=15 {
            let v = integrate_torus(|xi| xi[0].powi(k), &rule);
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-14, "k={k}");
        }
        let v = integrate_torus(|xi| xi[0].conj() * xi[0], &rule);
        assert!((v.re - 1.0).abs() < 1e-15);
        // boundary values of (1 - ξ/2)^{-1}: constant term 1, aliasing 2^{-16}
        let v = integrate_torus(|xi| (one() - xi[0] * 0.5).inv(), &TorusRule::uniform(1, 64).unwrap());
        assert!((v.re - 1.0).abs() < 1e-15);
        assert!(TorusRule::uniform(1, 3).is_err());
    }

    #[test]
    fn norm_examples() {
        let rule = PolydiskRule::uniform(1, 64, 128).unwrap();
        let t = WeightSpec::new(vec![CoordWeight::power(1.0).unwrap()]).unwrap();
        let flat = WeightSpec::unweighted(1);
        let one_f = CoefficientSeries::constant(1, one()).unwrap();
        let z = CoefficientSeries::monomial(&MultiIndex(vec![1]), one()).unwrap();

        let v = norm_ap(&one_f, &t, 2.0, &rule).unwrap();
        assert!((v - (PI / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(norm_ap(&CoefficientSeries::constant(1, 0.0.into()).unwrap(), &t, 2.0, &rule).unwrap(), 0.0);
        let v = norm_ap(&z, &flat, 2.0, &rule).unwrap();
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-12);

        let v = norm_besov(&z, &t, 2.0, &rule).unwrap();
        assert!((v - (2.0 * PI / 5.0).sqrt()).abs() < 1e-12);
        let c = Complex64::new(0.6, -0.8) * 3.0;
        let v = norm_besov(&CoefficientSeries::constant(1, c).unwrap(), &t, 2.0, &rule).unwrap();
        assert!((v - 3.0 * (PI / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(norm_besov(&CoefficientSeries::constant(1, 0.0.into()).unwrap(), &t, 2.0, &rule).unwrap(), 0.0);

        let v = norm_lp_grid(|_| one(), &flat, 2.0, &rule).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-12);
        let v = norm_lp_grid(|n| n.z[0].conj(), &flat, 2.0, &rule).unwrap();
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(norm_lp_grid(|_| Complex64::new(0.0, 0.0), &flat, 2.0, &rule).unwrap(), 0.0);
    }

    #[test]
    fn norm_argument_checks() {
        let rule = PolydiskRule::uniform(1, 8, 8).unwrap();
        let w = WeightSpec::unweighted(1);
        let f = CoefficientSeries::constant(1, one()).unwrap();
        assert!(norm_ap(&f, &w, 1.0, &rule).is_err());
        assert!(norm_besov(&f, &w, 0.5, &rule).is_err());
        assert!(norm_besov(&f, &w, 1.0, &rule).is_ok());
        assert!(matches!(
            norm_ap(&f, &WeightSpec::unweighted(2), 2.0, &rule),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn besov_refinement_flag_for_weak_weight() {
        // p = 1: ∫ |Df| (1-|z|^2)^{-1} dm diverges logarithmically without weight
        let rule = PolydiskRule::uniform(1, 16, 16).unwrap();
        let f = CoefficientSeries::constant(1, one()).unwrap();
        let bad = norm_besov_checked(&f, &WeightSpec::unweighted(1), 1.0, &rule).unwrap();
        assert!(bad.flagged, "{bad:?}");
        let w = WeightSpec::new(vec![CoordWeight::power(1.0).unwrap()]).unwrap();
        let good = norm_besov_checked(&f, &w, 1.0, &rule).unwrap();
        assert!(!good.flagged, "{good:?}");
    }

    #[test]
    fn grading_choice() {
        assert_eq!(grading_for(0.5), 2);
        assert_eq!(grading_for(-0.5), 2);
        assert_eq!(grading_for(-0.75), 4);
        assert_eq!(grading_for(-0.9), 10);
    }

    #[test]
    fn beta_moment_oracle() {
        let rule = PolydiskRule::uniform(1, 64, 128).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            for s in 0..=8 {
                let got = integrate_polydisk(
                    |n| Complex64::new(n.z[0].norm_sqr().powi(s) * n.gap_sq(0).powf(alpha), 0.0),
                    &rule,
                )
                .unwrap()
                .re;
                let expect = PI * statrs::function::beta::beta(s as f64 + 1.0, alpha + 1.0);
                assert!(((got - expect) / expect).abs() < 1e-10, "s={s} alpha={alpha}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn graded_rule_handles_negative_exponent() {
        let rule = PolydiskRule::graded(1, 64, 8, grading_for(-0.9)).unwrap();
        let got = integrate_polydisk(|n| Complex64::new(n.gap[0].powf(-0.9), 0.0), &rule).unwrap().re;
        // 2π ∫ (1-ρ)^{-0.9} ρ dρ = 2π B(2, 0.1)
        let expect = 2.0 * PI * statrs::function::beta::beta(2.0, 0.1);
        assert!(((got - expect) / expect).abs() < 1e-10);
    }

    fn random_poly(seed: u64, deg: usize) -> CoefficientSeries {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CoefficientSeries::random(1, deg, &mut rng).unwrap()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn prop_homogeneity(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let rule = PolydiskRule::uniform(1, 16, 24).unwrap();
            let w = WeightSpec::new(vec![CoordWeight::power(0.5).unwrap()]).unwrap();
            let f = random_poly(seed, 5);
            let c = Complex64::new(re, im);
            let a = norm_ap(&f.scaled(c), &w, 2.0, &rule).unwrap();
            let b = c.norm() * norm_ap(&f, &w, 2.0, &rule).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn prop_refinement_stability(seed in 0u64..1000, half_p in 1u32..4) {
            // |f|^p with fractional p has kinks at the zeros of f, so only even p is smooth
            let p = 2.0 * half_p as f64;
            let w = WeightSpec::new(vec![CoordWeight::power(1.0).unwrap()]).unwrap();
            let f = random_poly(seed, 8);
            let rule = PolydiskRule::uniform(1, DEFAULT_RADIAL, DEFAULT_ANGULAR).unwrap();
            let a = norm_ap(&f, &w, p, &rule).unwrap();
            let b = norm_ap(&f, &w, p, &rule.refined()).unwrap();
            proptest::prop_assert!(relative_change(a, b) < 1e-8, "{} {}", a, b);
            let a = norm_besov(&f, &w, 2.0, &rule).unwrap();
            let b = norm_besov(&f, &w, 2.0, &rule.refined()).unwrap();
            proptest::prop_assert!(relative_change(a, b) < 1e-8, "{} {}", a, b);
        }

        #[test]
        fn prop_weight_monotone(seed in 0u64..1000, lo in 0.0f64..2.0, bump in 0.0f64..2.0) {
            // t^{a+δ} ≤ t^a on (0,1)
            let rule = PolydiskRule::uniform(1, 16, 16).unwrap();
            let f = random_poly(seed, 4);
            let heavy = WeightSpec::new(vec![CoordWeight::power(lo).unwrap()]).unwrap();
            let light = WeightSpec::new(vec![CoordWeight::power(lo + bump).unwrap()]).unwrap();
            let a = norm_ap(&f, &light, 2.0, &rule).unwrap();
            let b = norm_ap(&f, &heavy, 2.0, &rule).unwrap();
            proptest::prop_assert!(a <= b * (1.0 + 1e-14));
        }
    }
}
