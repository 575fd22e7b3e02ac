//! Normalized kernel family `f_r = C_r (1 - r z)^{-k}` with the unimodular
//! symbol `g_r = exp(-i arg f_r)`, and the little Hankel image norms along an
//! `r`-sweep.
//!
//! Everything is separable across coordinates, so the n-variable ratio is the
//! product of one-variable ratios. In one variable `f_r g_r = |f_r|`, and the
//! image `Σ_m c_m z̄^m` has `c_m = (α+2)_m/m! ∫ (1-|ζ|^2)^α ζ^m |f_r| dm`.
//! The angular part of each moment is a Fourier coefficient of `|f_r|` on a
//! circle, taken by FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{grading_for, DiskRule};
use crate::special::{ordered_map, rising_over_factorial, tree_sum};
use crate::weights::CoordWeight;

/// Angular samples per unit of `1/(1-r)`.
pub const ANGULAR_DENSITY: f64 = 32.0;
pub const MIN_ANGULAR: usize = 256;
pub const DEFAULT_SHARPNESS_RADIAL: usize = 256;
/// Grading of the outer radial rule; the image norm integrand is peaked at the
/// circle for `r` near 1.
pub const OUTER_GRADING: u32 = 4;
const INNER_CHUNKS: usize = 8;

/// One coordinate of the counterexample family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessFamily {
    pub r: f64,
    pub k: f64,
    pub p: f64,
    pub weight: CoordWeight,
}

impl SharpnessFamily {
    pub fn new(r: f64, k: f64, p: f64, weight: CoordWeight) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain {
                name: "r",
                value: r,
                domain: "(0, 1)",
            });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain {
                name: "p",
                value: p,
                domain: "(1, inf)",
            });
        }
        let (alpha_w, _, _) = weight.indices();
        if !(k > (alpha_w + 2.0) / p) {
            return Err(Error::InvalidParameter(format!(
                "kernel exponent k = {k} must exceed (alpha_w + 2)/p = {}",
                (alpha_w + 2.0) / p
            )));
        }
        Ok(SharpnessFamily { r, k, p, weight })
    }

    /// `ln C_r` with `C_r = (1-r)^{k-2/p} ω(1-r)^{-1/p}`.
    pub fn ln_c(&self) -> f64 {
        let t = 1.0 - self.r;
        (self.k - 2.0 / self.p) * t.ln() - self.weight.ln_eval(t) / self.p
    }

    /// `ln |f_r(ρ e^{iθ})|`, stable for `rρ` near 1.
    #[inline]
    pub fn ln_abs_f(&self, rho: f64, theta: f64) -> f64 {
        let s = (0.5 * theta).sin();
        self.ln_abs_f_at(self.ln_c(), rho, s * s)
    }

    /// Same as [`Self::ln_abs_f`] with `ln C_r` and `sin^2(θ/2)` precomputed.
    #[inline]
    fn ln_abs_f_at(&self, ln_c: f64, rho: f64, sin2: f64) -> f64 {
        let x = self.r * rho;
        let d2 = (1.0 - x) * (1.0 - x) + 4.0 * x * sin2;
        ln_c - 0.5 * self.k * d2.ln()
    }

    /// `sin^2(θ_l/2)` for `l = 0..=M/2`; `|f_r|` is even in `θ`.
    fn half_circle(m_ang: usize) -> Vec<f64> {
        let dtheta = 2.0 * PI / m_ang as f64;
        (0..=m_ang / 2).map(|l| (0.5 * l as f64 * dtheta).sin().powi(2)).collect()
    }

    pub fn f(&self, z: Complex64) -> Complex64 {
        self.ln_c().exp() * (Complex64::new(1.0, 0.0) - z * self.r).powf(-self.k)
    }

    /// `exp(-i arg f_r)`
    pub fn g(&self, z: Complex64) -> Complex64 {
        let v = self.f(z);
        if v.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            (v / v.norm()).conj()
        }
    }

    pub fn angular_points(&self, scale: usize) -> usize {
        let m = (ANGULAR_DENSITY / (1.0 - self.r)).ceil() as usize;
        m.next_power_of_two().max(MIN_ANGULAR) * scale
    }
}

/// p-th powers of the image and input norms for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordIntegrals {
    pub image_pp: f64,
    pub f_pp: f64,
    pub angular: usize,
    pub radial: usize,
}

/// Coefficients `c_0..=c_{M/2}` of the image `Σ_m c_m z̄^m`, with `M`
/// angular samples per circle and `radial` graded radii.
pub fn image_coefficients(fam: &SharpnessFamily, alpha: f64, radial: usize, m_ang: usize) -> Result<Vec<f64>> {
    let half = m_ang / 2;
    let inner = DiskRule::graded(radial, 1, grading_for(alpha))?;
    let dtheta = 2.0 * PI / m_ang as f64;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m_ang);
    let sin2 = SharpnessFamily::half_circle(m_ang);
    let ln_c = fam.ln_c();
    // moments ∫ (1-|ζ|^2)^α ζ^m |f_r| dm for m = 0..=half, accumulated per chunk of radii
    let per_chunk = radial.div_ceil(INNER_CHUNKS);
    let chunks = ordered_map(INNER_CHUNKS, |c| {
        let mut acc = vec![0.0f64; half + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); m_ang];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for i in (c * per_chunk)..((c + 1) * per_chunk).min(radial) {
            let rho = inner.radii()[i];
            let gap = inner.gaps()[i];
            for (l, s2) in sin2.iter().enumerate() {
                let v = Complex64::new(fam.ln_abs_f_at(ln_c, rho, *s2).exp(), 0.0);
                buf[l] = v;
                buf[(m_ang - l) % m_ang] = v;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let w = inner.radial_weights()[i] * (gap * (2.0 - gap)).powf(alpha) * dtheta;
            let mut rho_m = 1.0;
            for (m, a) in acc.iter_mut().enumerate() {
                *a += w * rho_m * buf[m].re;
                rho_m *= rho;
            }
        }
        acc
    });
    let rising = rising_over_factorial(alpha + 2.0, half + 1);
    let coeffs = (0..=half)
        .map(|m| {
            let parts: Vec<f64> = chunks.iter().map(|c| c[m]).collect();
            rising[m] * tree_sum(&parts)
        })
        .collect();
    Ok(coeffs)

}

/// Image and input integrals for one coordinate with kernel order `alpha`.
/// `scale` multiplies both the radial and the angular counts.
pub fn coord_integrals(fam: &SharpnessFamily, alpha: f64, radial: usize, scale: usize) -> Result<CoordIntegrals> {
    if !(alpha > -1.0) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(-1, inf)",
        });
    }
    let radial = radial * scale;
    let m_ang = fam.angular_points(scale);
    let coeffs = image_coefficients(fam, alpha, radial, m_ang)?;
    let (alpha_w, _, _) = fam.weight.indices();
    let outer = DiskRule::graded(radial, 1, OUTER_GRADING.max(grading_for(alpha_w)))?;
    let dtheta = 2.0 * PI / m_ang as f64;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m_ang);
    let sin2 = SharpnessFamily::half_circle(m_ang);
    let ln_c = fam.ln_c();
    let half = m_ang / 2;

    let p = fam.p;
    let ring_terms: Vec<(f64, f64)> = ordered_map(radial, |o| {
        let rho = outer.radii()[o];
        let wt = outer.radial_weights()[o] * fam.weight.eval_unchecked(outer.gaps()[o]);
        // ∫_0^{2π} |H(ρ e^{iθ})|^p dθ
        let image_ring = if p == 2.0 {
            let mut rho_m = 1.0;
            let terms: Vec<f64> = coeffs
                .iter()
                .map(|c| {
                    let v = c * c * rho_m;
                    rho_m *= rho * rho;
                    v
                })
                .collect();
            2.0 * PI * tree_sum(&terms)
        } else {
            let mut buf = vec![Complex64::new(0.0, 0.0); m_ang];
            let mut rho_m = 1.0;
            for (b, c) in buf.iter_mut().zip(&coeffs) {
                *b = Complex64::new(c * rho_m, 0.0);
                rho_m *= rho;
            }
            fft.process(&mut buf);
            let vals: Vec<f64> = buf.iter().map(|h| h.norm().powf(p)).collect();
            dtheta * tree_sum(&vals)
        };
        let f_vals: Vec<f64> = sin2
            .iter()
            .enumerate()
            .map(|(l, s2)| {
                let mult = if l == 0 || l == half { 1.0 } else { 2.0 };
                mult * (p * fam.ln_abs_f_at(ln_c, rho, *s2)).exp()
            })
            .collect();
        let f_ring = dtheta * tree_sum(&f_vals);
        (wt * image_ring, wt * f_ring)
    });
    let image: Vec<f64> = ring_terms.iter().map(|t| t.0).collect();
    let f: Vec<f64> = ring_terms.iter().map(|t| t.1).collect();
    let out = CoordIntegrals {
        image_pp: tree_sum(&image),
        f_pp: tree_sum(&f),
        angular: m_ang,
        radial,
    };
    if !(out.image_pp.is_finite() && out.f_pp.is_finite()) {
        return Err(Error::NonFinite { node: vec![(fam.r, 0.0)] });
    }
    Ok(out)
}

/// Ratio `‖h_{g_r}(f_r)‖_{L^p(ω)} / ‖f_r‖_{A^p(ω)}` and `‖f_r‖_{A^p(ω)}` for a
/// product family.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessPoint {
    pub r: f64,
    pub ratio: f64,
    pub f_norm: f64,
    pub image_norm: f64,
}

pub fn sharpness_point(
    r: f64,
    k: &[f64],
    p: f64,
    weights: &[CoordWeight],
    alpha: &[f64],
    radial: usize,
    scale: usize,
) -> Result<SharpnessPoint> {
    let mut image_pp = 1.0;
    let mut f_pp = 1.0;
    for ((&kj, &wj), &aj) in k.iter().zip(weights).zip(alpha) {
        let fam = SharpnessFamily::new(r, kj, p, wj)?;
        let c = coord_integrals(&fam, aj, radial, scale)?;
        image_pp *= c.image_pp;
        f_pp *= c.f_pp;
    }
    let image_norm = image_pp.powf(1.0 / p);
    let f_norm = f_pp.powf(1.0 / p);
    Ok(SharpnessPoint {
        r,
        ratio: image_norm / f_norm,
        f_norm,
        image_norm,
    })
}
