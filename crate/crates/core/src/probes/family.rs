use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseries::{kernel_series_with_tol, CoefficientSeries, MultiIndex};

/// Inputs over which norm ratios are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TestFamily {
    /// All `z^k` with `|k| <= degree`.
    Monomials { n: usize, degree: usize },
    /// `count` polynomials with coefficients uniform in `[-1,1]^2`.
    Random {
        n: usize,
        count: usize,
        degree: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// `∏_j (1 - r z_j)^{-k}` for each `r`, truncated below `1e-12`.
    Kernels {
        n: usize,
        r: Vec<f64>,
        k: f64,
    },
    /// Single Blaschke factors, truncated Taylor series (`n = 1`).
    Blaschke { zeros: Vec<[f64; 2]>, deg: usize },
}

pub const KERNEL_TAIL_TOL: f64 = 1e-12;
pub const KERNEL_MAX_DEGREE: usize = 512;

impl TestFamily {
    pub fn dim(&self) -> usize {
        match self {
            TestFamily::Monomials { n, .. } | TestFamily::Random { n, .. } | TestFamily::Kernels { n, .. } => *n,
            TestFamily::Blaschke { .. } => 1,
        }
    }

    pub fn with_default_seed(mut self, default: u64) -> Self {
        if let TestFamily::Random { seed, .. } = &mut self {
            seed.get_or_insert(default);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match self {
            TestFamily::Monomials { n, .. } | TestFamily::Random { n, .. } | TestFamily::Kernels { n, .. } if *n == 0 => {
                bad("family needs n >= 1")
            }
            TestFamily::Random { count: 0, .. } => bad("random family needs count >= 1"),
            TestFamily::Kernels { r, k, .. } => {
                if r.is_empty() {
                    return bad("kernel family needs at least one radius");
                }
                if r.iter().any(|&x| !(x > 0.0 && x < 1.0)) || !(*k > 0.0) {
                    return bad("kernel family needs r in (0,1) and k > 0");
                }
                Ok(())
            }
            TestFamily::Blaschke { zeros, .. } => {
                if zeros.is_empty() {
                    return bad("blaschke family needs at least one zero");
                }
                if zeros.iter().any(|a| Complex64::new(a[0], a[1]).norm() >= 1.0) {
                    return bad("blaschke zeros must lie in the open disk");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Members in declaration order, each with a stable id.
    pub fn members(&self) -> Result<Vec<(String, CoefficientSeries)>> {
        self.validate()?;
        match self {
            TestFamily::Monomials { n, degree } => {
                let mut out = Vec::new();
                let box_ = CoefficientSeries::zeros(vec![*degree; *n])?;
                for (k, _) in box_.indexed() {
                    if k.iter().sum::<usize>() <= *degree {
                        let id = format!("z^{k:?}");
                        out.push((id, CoefficientSeries::monomial(&MultiIndex(k), Complex64::new(1.0, 0.0))?));
                    }
                }
                Ok(out)
            }
            TestFamily::Random { n, count, degree, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                (0..*count)
                    .map(|i| Ok((format!("random{i}"), CoefficientSeries::random(*n, *degree, &mut rng)?)))
                    .collect()
            }
            TestFamily::Kernels { n, r, k } => r
                .iter()
                .map(|&ri| {
                    let s = kernel_series_with_tol(&vec![ri; *n], &vec![*k; *n], KERNEL_TAIL_TOL, KERNEL_MAX_DEGREE)?;
                    Ok((format!("kernel_r={ri}"), s.series))
                })
                .collect(),
            TestFamily::Blaschke { zeros, deg } => zeros
                .iter()
                .map(|a| {
                    let a = Complex64::new(a[0], a[1]);
                    Ok((format!("blaschke_a={}{:+}i", a.re, a.im), blaschke_taylor(a, *deg)?))
                })
                .collect(),
        }
    }

    /// The family used for the enlargement check, when one is defined.
    pub fn enlarged(&self) -> Option<TestFamily> {
        match self {
            TestFamily::Random { n, count, degree, seed } => Some(TestFamily::Random {
                n: *n,
                count: 2 * count,
                degree: *degree,
                seed: *seed,
            }),
            TestFamily::Monomials { n, degree } => Some(TestFamily::Monomials {
                n: *n,
                degree: 2 * degree.max(&1),
            }),
            _ => None,
        }
    }
}

/// Taylor coefficients of `(ā/|a|)(a - z)/(1 - āz)` up to degree `deg`.
pub fn blaschke_taylor(a: Complex64, deg: usize) -> Result<CoefficientSeries> {
    if a == Complex64::new(0.0, 0.0) {
        return CoefficientSeries::from_fn(vec![deg.max(1)], |k| Complex64::new(if k[0] == 1 { 1.0 } else { 0.0 }, 0.0));
    }
    let u = a.conj() / a.norm();
    CoefficientSeries::from_fn(vec![deg], |k| match k[0] {
        0 => u * a,
        m => u * (a.norm_sqr() - 1.0) * a.conj().powi(m as i32 - 1),
    })
}
