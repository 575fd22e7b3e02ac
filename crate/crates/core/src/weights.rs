//! Admissible weights `ω` on `(0, 1)`: evaluation, growth indices and
//! numerical certification of the bounded-ratio (class S) condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coordinate factor `ω_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoordWeight {
    /// `t^alpha`
    Power { alpha: f64 },
    /// `t^alpha · log(e/t)^s`
    #[serde(rename = "powerlog")]
    PowerLog { alpha: f64, s: f64 },
}

impl CoordWeight {
    pub fn power(alpha: f64) -> Result<Self> {
        let w = CoordWeight::Power { alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn power_log(alpha: f64, s: f64) -> Result<Self> {
        let w = CoordWeight::PowerLog { alpha, s };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let (alpha, s) = self.params();
        if !alpha.is_finite() || alpha <= -1.0 {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                domain: "(-1, inf)",
            });
        }
        if !s.is_finite() {
            return Err(Error::Domain {
                name: "s",
                value: s,
                domain: "finite reals",
            });
        }
        Ok(())
    }

    /// `(alpha, s)`, with `s = 0` for pure powers.
    pub fn params(&self) -> (f64, f64) {
        match *self {
            CoordWeight::Power { alpha } => (alpha, 0.0),
            CoordWeight::PowerLog { alpha, s } => (alpha, s),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain {
                name: "t",
                value: t,
                domain: "(0, 1)",
            });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Evaluation without the domain check; callers guarantee `t ∈ (0, 1)`.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        match *self {
            CoordWeight::Power { alpha } => {
                if alpha == 0.0 {
                    1.0
                } else {
                    t.powf(alpha)
                }
            }
            CoordWeight::PowerLog { .. } => self.ln_eval(t).exp(),
        }
    }

    /// `ln ω(t)`, computed without forming `ω(t)` so it stays finite far below
    /// the underflow threshold of `t^alpha`.
    pub fn ln_eval(&self, t: f64) -> f64 {
        let lt = t.ln();
        match *self {
            CoordWeight::Power { alpha } => alpha * lt,
            CoordWeight::PowerLog { alpha, s } => alpha * lt + s * (1.0 - lt).ln(),
        }
    }

    /// Convention indices `(α_ω, β_ω)` with `α_ω = lim ln ω(t)/ln t` as `t → 0`
    /// and `β_ω = -α_ω`; the flag is true when the sandwich
    /// `t^{α_ω} ≤ ω ≤ t^{-β_ω}` holds with zero slack.
    pub fn indices(&self) -> (f64, f64, bool) {
        let (alpha, s) = self.params();
        (alpha, -alpha, s == 0.0)
    }

    /// Interior critical point of `λ ↦ ω(λr)/ω(r)` on `(lo, 1)`, if any.
    ///
    /// For power-log weights the log-ratio in `L = ln(1/λ)` has derivative
    /// `-α + s/(c+L)` with `c = 1 - ln r`, so it has at most one stationary
    /// point.
    fn ratio_critical_lambda(&self, r: f64, lo: f64) -> Option<f64> {
        let CoordWeight::PowerLog { alpha, s } = *self else {
            return None;
        };
        if alpha == 0.0 || s == 0.0 {
            return None;
        }
        let c = 1.0 - r.ln();
        let l = s / alpha - c;
        if l <= 0.0 {
            return None;
        }
        let lambda = (-l).exp();
        (lambda > lo && lambda < 1.0).then_some(lambda)
    }
}

/// Product weight `ω(1-|z|) = ∏ ω_j(1-|z_j|)` on the polydisk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub coords: Vec<CoordWeight>,
}

impl WeightSpec {
    pub fn new(coords: Vec<CoordWeight>) -> Result<Self> {
        let w = WeightSpec { coords };
        w.validate()?;
        Ok(w)
    }

    /// The same coordinate weight in every one of `n` coordinates.
    pub fn uniform(weight: CoordWeight, n: usize) -> Result<Self> {
        Self::new(vec![weight; n])
    }

    pub fn unweighted(n: usize) -> Self {
        WeightSpec {
            coords: vec![CoordWeight::Power { alpha: 0.0 }; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::InvalidParameter(
                "weight spec needs at least one coordinate".into(),
            ));
        }
        self.coords.iter().try_for_each(CoordWeight::validate)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn indices(&self) -> WeightIndices {
        weight_indices(self)
    }
}

pub fn eval_weight(w: &CoordWeight, t: f64) -> Result<f64> {
    w.eval(t)
}

pub fn eval_product_weight(w: &WeightSpec, t: &[f64]) -> Result<f64> {
    if t.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: t.len(),
        });
    }
    w.coords
        .iter()
        .zip(t)
        .try_fold(1.0, |acc, (cw, &tj)| Ok(acc * cw.eval(tj)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightIndices {
    pub alpha_omega: Vec<f64>,
    pub beta_omega: Vec<f64>,
    /// Per coordinate: whether the sandwich holds with zero slack.
    pub sandwich_exact: Vec<bool>,
}

pub fn weight_indices(w: &WeightSpec) -> WeightIndices {
    let mut out = WeightIndices {
        alpha_omega: Vec::with_capacity(w.dim()),
        beta_omega: Vec::with_capacity(w.dim()),
        sandwich_exact: Vec::with_capacity(w.dim()),
    };
    for cw in &w.coords {
        let (a, b, exact) = cw.indices();
        out.alpha_omega.push(a);
        out.beta_omega.push(b);
        out.sandwich_exact.push(exact);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SClassCertificate {
    pub q: f64,
    pub m_hat: f64,
    #[serde(rename = "M_hat")]
    pub big_m_hat: f64,
    pub grid_size: usize,
    pub passed: bool,
}

impl SClassCertificate {
    /// Indices from the literal ratio-bound formulas
    /// `log m / log q^{-1}` and `log M / log q^{-1}`.
    pub fn literal_indices(&self) -> (f64, f64) {
        let lq = (1.0 / self.q).ln();
        (self.m_hat.ln() / lq, self.big_m_hat.ln() / lq)
    }
}

/// Scan radii: half geometric `2^{-k}` towards 0, half uniform on `(1/2, 1)`.
fn scan_radii(grid_size: usize) -> Vec<f64> {
    let geo = grid_size / 2;
    let uni = grid_size - geo;
    let mut r: Vec<f64> = (0..geo)
        .map(|i| (-(48.0 * (i + 1) as f64 / geo as f64)).exp2())
        .collect();
    r.extend((0..uni).map(|i| 0.5 + 0.5 * (i as f64 + 0.5) / uni as f64));
    r
}

/// Bounds `m̂ ≤ ω(λr)/ω(r) ≤ M̂` over a `grid_size × grid_size` lattice of
/// `(r, λ) ∈ (0,1) × [q,1]`. The λ-grid always contains `q`, `1` and, for
/// power-log weights, the analytic stationary point of the ratio, so the
/// extremes in λ are exact for each scanned `r`.
pub fn certify_s_class(w: &CoordWeight, q: f64, grid_size: usize) -> Result<SClassCertificate> {
    w.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            domain: "(0, 1)",
        });
    }
    if grid_size < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be at least 16, got {grid_size}"
        )));
    }
    let lambdas: Vec<f64> = (0..grid_size)
        .map(|j| q + (1.0 - q) * j as f64 / (grid_size - 1) as f64)
        .collect();
    let mut m_hat = f64::INFINITY;
    let mut big_m_hat = f64::NEG_INFINITY;
    for r in scan_radii(grid_size) {
        let ln_base = w.ln_eval(r);
        let mut visit = |lambda: f64| {
            let ratio = (w.ln_eval(lambda * r) - ln_base).exp();
            m_hat = m_hat.min(ratio);
            big_m_hat = big_m_hat.max(ratio);
        };
        lambdas.iter().for_each(|&l| visit(l));
        if let Some(l) = w.ratio_critical_lambda(r, q) {
            visit(l);
        }
    }
    let passed = m_hat > 0.0 && big_m_hat.is_finite();
    Ok(SClassCertificate {
        q,
        m_hat,
        big_m_hat,
        grid_size,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub holds: bool,
    pub slack: f64,
    /// Grid point with the largest violation (or smallest margin).
    pub worst_t_log2: f64,
    /// Largest violation in exponent units; `<= 0` when the sandwich holds.
    pub max_violation: f64,
}

/// Exponents scanned by [`sandwich_check`]: `t = 2^{-k}` for
/// `k ∈ [256, 1000]`. A log factor exceeds `t^{-ε}` for every moderate `t`,
/// so only the near-zero regime is meaningful for non-pure powers.
pub const SANDWICH_LOG2_RANGE: (f64, f64) = (256.0, 1000.0);

/// Checks `t^{α_ω + slack} ≤ ω(t) ≤ t^{-β_ω - slack}` on a geometric grid.
///
/// Works in exponent form: with `e(t) = ln ω(t) / ln t`, the two inequalities
/// read `-β_ω - slack ≤ e(t) ≤ α_ω + slack`.
pub fn sandwich_check(w: &CoordWeight, grid_size: usize, slack: f64) -> Result<SandwichReport> {
    w.validate()?;
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid_size must be at least 2".into()));
    }
    if !(slack >= 0.0) {
        return Err(Error::Domain {
            name: "slack",
            value: slack,
            domain: "[0, inf)",
        });
    }
    let (alpha_w, beta_w, _) = w.indices();
    let (lo, hi) = SANDWICH_LOG2_RANGE;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_k = lo;
    for i in 0..grid_size {
        let k = lo + (hi - lo) * i as f64 / (grid_size - 1) as f64;
        let t = (-k).exp2();
        let e = w.ln_eval(t) / t.ln();
        let violation = (e - (alpha_w + slack)).max((-beta_w - slack) - e);
        if violation > worst {
            worst = violation;
            worst_k = k;
        }
    }
    // exponent round-off of ln(t^α)/ln t is far below this
    const ROUNDOFF: f64 = 1e-12;
    Ok(SandwichReport {
        holds: worst <= ROUNDOFF,
        slack,
        worst_t_log2: -worst_k,
        max_violation: worst,
    })
}
