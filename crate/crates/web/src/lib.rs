//! Browser bindings for the demo page in `www/`. Every export takes plain
//! numbers or JSON text and returns JSON text or a flat `Float64Array`.

use serde_json::json;
use wasm_bindgen::prelude::*;
use wsop_core::operators::{berezin, KernelOrder, SymbolSpec};
use wsop_core::probes::sharpness_point;
use wsop_core::pseries::CoefficientSeries;
use wsop_core::special::ls_slope;
use wsop_core::weights::{certify_s_class, CoordWeight};
use wsop_core::Complex64;

const PROFILE_T_MIN: f64 = 1e-6;
const FIELD_RULE: (usize, usize) = (24, 24);
const FIELD_RADIUS: f64 = 0.95;
const SWEEP_RADIAL: usize = 128;
const SWEEP_R_MAX: f64 = 0.999;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn coord_weight(kind: &str, alpha: f64, s: f64) -> Result<CoordWeight, String> {
    match kind {
        "power" => CoordWeight::power(alpha).map_err(err),
        "powerlog" => CoordWeight::power_log(alpha, s).map_err(err),
        other => Err(format!("unknown weight kind {other:?}")),
    }
}

/// `ω(t)` on a log-spaced grid with the index envelope `t^{α_ω}`, `t^{-β_ω}`
/// and an S-class certificate for `q = 1/2`.
#[wasm_bindgen]
pub fn weight_profile(kind: &str, alpha: f64, s: f64, samples: usize) -> Result<String, String> {
    let w = coord_weight(kind, alpha, s)?;
    let samples = samples.max(2);
    let ts: Vec<f64> = (0..samples)
        .map(|i| PROFILE_T_MIN.powf(1.0 - i as f64 / (samples - 1) as f64))
        .collect();
    let (a, b, exact) = w.indices();
    let omega: Vec<f64> = ts.iter().map(|&t| w.eval_unchecked(t)).collect();
    let lower: Vec<f64> = ts.iter().map(|&t| t.powf(a)).collect();
    let upper: Vec<f64> = ts.iter().map(|&t| t.powf(-b)).collect();
    let cert = certify_s_class(&w, 0.5, 32).map_err(err)?;
    Ok(json!({
        "t": ts, "omega": omega, "lower": lower, "upper": upper,
        "alpha_omega": a, "beta_omega": b, "sandwich_exact": exact,
        "certificate": cert,
    })
    .to_string())
}

/// `|B^α_g(1)(z)|` on a `grid × grid` raster of `[-1,1]^2`, row-major from
/// the top-left; `NaN` outside `|z| < 0.95`.
#[wasm_bindgen]
pub fn berezin_field(symbol_json: &str, alpha: f64, grid: usize) -> Result<Vec<f64>, String> {
    let g: SymbolSpec = serde_json::from_str(symbol_json).map_err(err)?;
    if wsop_core::operators::Evaluable::dim(&g) != 1 {
        return Err("the demo field is one-dimensional".into());
    }
    let order = KernelOrder::uniform(alpha, 1).map_err(err)?;
    let rule = order.rule(FIELD_RULE.0, FIELD_RULE.1).map_err(err)?;
    let one = CoefficientSeries::constant(1, Complex64::new(1.0, 0.0)).map_err(err)?;
    let grid = grid.max(2);
    let step = 2.0 / (grid - 1) as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for row in 0..grid {
        for col in 0..grid {
            let z = Complex64::new(-1.0 + col as f64 * step, 1.0 - row as f64 * step);
            let v = if z.norm() < FIELD_RADIUS {
                berezin(&one, &g, &order, &[z], &rule).map_err(err)?.norm()
            } else {
                f64::NAN
            };
            out.push(v);
        }
    }
    Ok(out)
}

/// Little Hankel ratios over the normalized kernel family for `n = 1`,
/// radii capped at 0.999, with the fitted log-log slope.
#[wasm_bindgen]
pub fn sharpness_sweep(alpha: f64, weight_alpha: f64, p: f64, k: f64, r_json: &str) -> Result<String, String> {
    let rs: Vec<f64> = serde_json::from_str(r_json).map_err(err)?;
    if let Some(r) = rs.iter().find(|r| !(**r > 0.0 && **r <= SWEEP_R_MAX)) {
        return Err(format!("radius {r} outside (0, {SWEEP_R_MAX}]"));
    }
    let w = CoordWeight::power(weight_alpha).map_err(err)?;
    let mut points = Vec::new();
    for &r in &rs {
        let pt = sharpness_point(r, &[k], p, &[w], &[alpha], SWEEP_RADIAL, 1).map_err(err)?;
        points.push(json!({"r": r, "ratio": pt.ratio, "f_norm": pt.f_norm}));
    }
    let xs: Vec<f64> = rs.iter().map(|r| -(1.0 - r).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|v| v["ratio"].as_f64().unwrap_or(f64::NAN).ln()).collect();
    let slope = if rs.len() >= 2 { ls_slope(&xs, &ys) } else { f64::NAN };
    Ok(json!({
        "points": points,
        "slope": slope,
        "stated_threshold": (weight_alpha + 1.0) / p - 1.0,
        "divergence_threshold": (weight_alpha + 2.0) / p - 2.0,
        "predicted_slope": ((weight_alpha + 2.0 - (alpha + 2.0) * p) / p).max(0.0),
    })
    .to_string())
}
