use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsop_core::operators::{Evaluable, InnerFunctionSpec, KernelOrder, SymbolSpec};
use wsop_core::probes::{sharpness::DEFAULT_SHARPNESS_RADIAL, Expectation, SharpnessParams, TestFamily, DEFAULT_SHARPNESS_K};
use wsop_core::pseries::FunctionSpec;
use wsop_core::quad::QuadratureSizes;
use wsop_core::weights::{CoordWeight, WeightSpec};

pub const PROBES: [&str; 8] = [
    "radial-identity",
    "lemma1",
    "lemma2",
    "toeplitz-bounded",
    "division",
    "hankel-bounded",
    "berezin-bounded",
    "hankel-sharpness",
];

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Semantic(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Semantic(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<wsop_core::Error> for ConfigError {
    fn from(e: wsop_core::Error) -> Self {
        ConfigError::Semantic(e.to_string())
    }
}

fn semantic(msg: impl Into<String>) -> ConfigError {
    ConfigError::Semantic(msg.into())
}

/// Either a full `{"coords":[...]}` spec or one coordinate weight used in every coordinate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum WeightInput {
    Spec(WeightSpec),
    Coord(CoordWeight),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    probe: Option<String>,
    n: Option<usize>,
    p: Option<f64>,
    weight: Option<WeightInput>,
    alpha: Option<Vec<f64>>,
    quadrature: Option<QuadratureSizes>,
    sharpness_radial: Option<usize>,
    function: Option<FunctionSpec>,
    symbol: Option<SymbolSpec>,
    inner: Option<InnerFunctionSpec>,
    family: Option<TestFamily>,
    r_list: Option<Vec<f64>>,
    #[serde(default)]
    seed: u64,
    output: Option<OutputPaths>,
    expect: Option<Expectation>,
    k: Option<Vec<f64>>,
    #[serde(default)]
    alpha_scan: Vec<f64>,
    derivative: Option<Vec<usize>>,
    a: Option<f64>,
    b: Option<f64>,
    z_count: Option<usize>,
    z_max: Option<f64>,
    cap: Option<f64>,
    gauss_order: Option<usize>,
    torus_points: Option<usize>,
    q: Option<f64>,
    grid: Option<usize>,
    slack: Option<f64>,
}

/// Fully resolved run configuration; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    pub n: usize,
    pub p: f64,
    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub q: f64,
    pub weight: WeightSpec,
    pub alpha: Vec<f64>,
    pub quadrature: QuadratureSizes,
    pub sharpness_radial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerFunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<TestFamily>,
    pub r_list: Vec<f64>,
    pub seed: u64,
    pub output: OutputPaths,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    pub k: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alpha_scan: Vec<f64>,
    pub derivative: Vec<usize>,
    pub a: f64,
    pub b: f64,
    pub z_count: usize,
    pub z_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    pub gauss_order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus_points: Option<usize>,
    pub certificate_q: f64,
    pub grid: usize,
    pub slack: f64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub probe: Option<String>,
    pub radial: Option<usize>,
    pub angular: Option<usize>,
    pub p: Option<f64>,
    pub weight: Option<String>,
    pub function: Option<String>,
    pub certificate_q: Option<f64>,
    pub grid: Option<usize>,
    pub slack: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config(&text, &Overrides::default())
}

pub fn parse_config(text: &str, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw, ov)
}

pub fn default_config(ov: &Overrides) -> Result<RunConfig, ConfigError> {
    resolve(RawConfig::default(), ov)
}

fn parse_inline<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse(format!("{what}: {e}")))
}

fn resolve(mut raw: RawConfig, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    if let Some(pr) = &ov.probe {
        raw.probe = Some(pr.clone());
    }
    if let Some(p) = ov.p {
        raw.p = Some(p);
    }
    if let Some(w) = &ov.weight {
        raw.weight = Some(parse_inline("--weight", w)?);
    }
    if let Some(f) = &ov.function {
        raw.function = Some(parse_inline("--function", f)?);
    }
    raw.q = ov.certificate_q.or(raw.q);
    raw.grid = ov.grid.or(raw.grid);
    raw.slack = ov.slack.or(raw.slack);
    if let Some(pr) = &raw.probe {
        if !PROBES.contains(&pr.as_str()) {
            return Err(semantic(format!("unknown probe \"{pr}\"; expected one of {}", PROBES.join(", "))));
        }
    }

    let n = raw
        .n
        .or(match &raw.weight {
            Some(WeightInput::Spec(w)) => Some(w.dim()),
            _ => None,
        })
        .or(raw.alpha.as_ref().map(Vec::len))
        .or(raw.family.as_ref().map(TestFamily::dim))
        .or(raw.function.as_ref().map(FunctionSpec::dim))
        .unwrap_or(1);
    if n == 0 {
        return Err(semantic("n must be at least 1"));
    }
    let check_dim = |what: &str, got: usize| -> Result<(), ConfigError> {
        if got == n {
            Ok(())
        } else {
            Err(semantic(format!("{what} has dimension {got}, expected n = {n}")))
        }
    };

    let p = raw.p.unwrap_or(2.0);
    if !(p > 1.0 && p.is_finite()) {
        return Err(semantic(format!("p = {p} rejected: p > 1 is required")));
    }
    let q = p / (p - 1.0);

    let weight = match raw.weight {
        Some(WeightInput::Spec(w)) => w,
        Some(WeightInput::Coord(c)) => WeightSpec::uniform(c, n)?,
        None => WeightSpec::unweighted(n),
    };
    weight.validate()?;
    check_dim("weight", weight.dim())?;

    let alpha = raw.alpha.unwrap_or_else(|| vec![0.0; n]);
    check_dim("alpha", alpha.len())?;
    KernelOrder::new(alpha.clone())?;

    let mut quadrature = raw.quadrature.unwrap_or_default();
    let mut sharpness_radial = raw.sharpness_radial.unwrap_or(DEFAULT_SHARPNESS_RADIAL);
    if let Some(r) = ov.radial {
        quadrature.radial = r;
        sharpness_radial = r;
    }
    if let Some(m) = ov.angular {
        quadrature.angular = m;
    }
    if quadrature.radial < 1 || quadrature.angular < 1 || sharpness_radial < 1 {
        return Err(semantic("quadrature sizes must be positive"));
    }

    if let Some(f) = &raw.function {
        check_dim("function", f.dim())?;
        f.build()?;
    }
    if let Some(s) = &raw.symbol {
        check_dim("symbol", Evaluable::dim(s))?;
    }
    if let Some(j) = &raw.inner {
        check_dim("inner", Evaluable::dim(j))?;
    }
    let family = raw.family.map(|f| f.with_default_seed(raw.seed));
    if let Some(f) = &family {
        f.validate()?;
        check_dim("family", f.dim())?;
    }

    let r_list = raw.r_list.unwrap_or_else(SharpnessParams::default_r_list);
    if let Some(r) = r_list.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(semantic(format!("r_list entry {r} outside (0, 1)")));
    }
    let k = raw.k.unwrap_or_else(|| vec![DEFAULT_SHARPNESS_K; n]);
    check_dim("k", k.len())?;
    let derivative = raw.derivative.unwrap_or_else(|| vec![1; n]);
    check_dim("derivative", derivative.len())?;

    let z_max = raw.z_max.unwrap_or(0.99);
    if !(z_max > 0.0 && z_max < 1.0) {
        return Err(semantic(format!("z_max = {z_max} outside (0, 1)")));
    }
    let certificate_q = raw.q.unwrap_or(0.5);
    if !(certificate_q > 0.0 && certificate_q < 1.0) {
        return Err(semantic(format!("q = {certificate_q} outside (0, 1)")));
    }

    Ok(RunConfig {
        probe: raw.probe,
        n,
        p,
        q,
        weight,
        alpha,
        quadrature,
        sharpness_radial,
        function: raw.function,
        symbol: raw.symbol,
        inner: raw.inner,
        family,
        r_list,
        seed: raw.seed,
        output: raw.output.unwrap_or_default(),
        expect: raw.expect,
        k,
        alpha_scan: raw.alpha_scan,
        derivative,
        a: raw.a.unwrap_or(0.0),
        b: raw.b.unwrap_or(3.0),
        z_count: raw.z_count.unwrap_or(21),
        z_max,
        cap: raw.cap,
        gauss_order: raw.gauss_order.unwrap_or(32),
        torus_points: raw.torus_points,
        certificate_q,
        grid: raw.grid.unwrap_or(64),
        slack: raw.slack.unwrap_or(0.0),
    })
}

impl RunConfig {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn kernel_order(&self) -> KernelOrder {
        KernelOrder::new(self.alpha.clone()).expect("validated at load")
    }
}
