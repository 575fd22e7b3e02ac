//! `wsop` command-line front end: config loading, probe dispatch and report
//! emission. Exit codes: 0 computed or PASS, 1 configuration or runtime
//! error, 2 FAIL verdict.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use wsop_core::operators::{InnerFunctionSpec, SymbolSpec, SymbolTerm};
use wsop_core::probes::{
    probe_berezin_bounded, probe_division, probe_hankel_bounded, probe_hankel_sharpness, probe_lemma1,
    probe_lemma2, probe_radial_identity, probe_toeplitz_bounded, BoundedFunction, FamilySetting, Lemma2Params,
    ProbeReport, SharpnessParams, TestFamily, Verdict, BEREZIN_INNER,
};
use wsop_core::pseries::{CoefficientSeries, MultiIndex};
use wsop_core::quad::{grading_for, norm_ap, norm_besov, relative_change, DiskRule, PolydiskRule, TorusRule, REFINEMENT_FLAG};
use wsop_core::weights::{certify_s_class, sandwich_check};
use wsop_core::Complex64;

pub use config::{load_config, parse_config, ConfigError, Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wsop", version, about = "Numerical probes for operators on weighted spaces over the polydisk")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Weight indices, S-class certificate and sandwich check per coordinate.
    WeightCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Weight as JSON, overriding the config.
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        slack: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted Bergman or Besov norm of a function.
    Norm {
        #[arg(long, value_enum)]
        space: Space,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Function as JSON, overriding the config.
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        rad: Option<usize>,
        #[arg(long)]
        ang: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one probe and write its report.
    Probe {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(config::PROBES))]
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        rad: Option<usize>,
        #[arg(long)]
        ang: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Space {
    Ap,
    Besov,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return EXIT_ERROR;
    }
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

/// `WSOP_THREADS` caps the worker pool; 0 or unset means one per core.
fn init_threads() -> Result<()> {
    let n = match std::env::var("WSOP_THREADS") {
        Ok(v) => v.trim().parse::<usize>().with_context(|| format!("WSOP_THREADS = {v:?} is not a thread count"))?,
        Err(_) => return Ok(()),
    };
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn resolve(config: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
            parse_config(&text, ov)?
        }
        None => config::default_config(ov)?,
    };
    Ok(cfg)
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::WeightCheck { config, weight, q, grid, slack, out } => {
            let ov = Overrides { weight, certificate_q: q, grid, slack, ..Default::default() };
            let cfg = resolve(config.as_deref(), &ov)?;
            let value = weight_check(&cfg)?;
            emit_json(&serde_json::to_string_pretty(&value)?, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Cmd::Norm { space, config, function, weight, p, rad, ang, out } => {
            let ov = Overrides { function, weight, p, radial: rad, angular: ang, ..Default::default() };
            let cfg = resolve(config.as_deref(), &ov)?;
            let value = norm(&cfg, space)?;
            emit_json(&serde_json::to_string_pretty(&value)?, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Cmd::Probe { name, config, out, csv, rad, ang } => {
            let ov = Overrides { probe: Some(name), radial: rad, angular: ang, ..Default::default() };
            let cfg = resolve(config.as_deref(), &ov)?;
            let started = Instant::now();
            let mut report = run_probe(&cfg)?;
            report.params["config"] = cfg.to_json();
            report.metadata = Some(json!({
                "tool": "wsop",
                "version": env!("CARGO_PKG_VERSION"),
                "unix_time": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                "threads": rayon::current_num_threads(),
                "elapsed_s": started.elapsed().as_secs_f64(),
            }));
            let json_path = out.or_else(|| cfg.output.json.clone());
            let csv_path = csv
                .or_else(|| cfg.output.csv.clone())
                .or_else(|| json_path.as_ref().map(|p| p.with_extension("csv")));
            emit_json(&report.to_json(), json_path.as_deref())?;
            if let Some(path) = csv_path {
                std::fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("{}: {}", report.probe, verdict_label(report.verdict));
            Ok(if report.verdict == Verdict::Fail { EXIT_FAIL } else { EXIT_OK })
        }
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn emit_json(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.context("writing stdout"),
            }
        }
    }
}

fn weight_check(cfg: &RunConfig) -> Result<serde_json::Value> {
    let idx = cfg.weight.indices();
    let mut coords = Vec::new();
    for (j, w) in cfg.weight.coords.iter().enumerate() {
        let cert = certify_s_class(w, cfg.certificate_q, cfg.grid)?;
        let sandwich = sandwich_check(w, cfg.grid, cfg.slack)?;
        coords.push(json!({
            "weight": w,
            "alpha_omega": idx.alpha_omega[j],
            "beta_omega": idx.beta_omega[j],
            "sandwich_exact": idx.sandwich_exact[j],
            "certificate": cert,
            "literal_indices": cert.literal_indices(),
            "sandwich": sandwich,
        }));
    }
    Ok(json!({
        "weight": cfg.weight,
        "q": cfg.certificate_q,
        "grid": cfg.grid,
        "slack": cfg.slack,
        "coords": coords,
    }))
}

/// Polydisk rule graded for the boundary exponents `γ_j` of an integrand.
fn graded_rule(cfg: &RunConfig, exponents: &[f64]) -> Result<PolydiskRule> {
    let coords = exponents
        .iter()
        .map(|&g| DiskRule::graded(cfg.quadrature.radial, cfg.quadrature.angular, grading_for(g.max(-0.9))))
        .collect::<wsop_core::Result<Vec<_>>>()?;
    Ok(PolydiskRule::new(coords)?)
}

fn weight_exponents(cfg: &RunConfig) -> Vec<f64> {
    cfg.weight.indices().alpha_omega
}

fn besov_exponents(cfg: &RunConfig) -> Vec<f64> {
    weight_exponents(cfg).iter().map(|a| a.min(a + cfg.p - 2.0)).collect()
}

fn kernel_exponents(cfg: &RunConfig) -> Vec<f64> {
    weight_exponents(cfg).iter().zip(&cfg.alpha).map(|(w, a)| w.min(*a)).collect()
}

fn norm(cfg: &RunConfig, space: Space) -> Result<serde_json::Value> {
    let Some(spec) = &cfg.function else {
        bail!(ConfigError::Semantic("norm needs a function (config \"function\" or --function)".into()));
    };
    let f = spec.build()?;
    let (name, exps): (&str, Vec<f64>) = match space {
        Space::Ap => ("ap", weight_exponents(cfg)),
        Space::Besov => ("besov", besov_exponents(cfg)),
    };
    let rule = graded_rule(cfg, &exps)?;
    let eval = |r: &PolydiskRule| match space {
        Space::Ap => norm_ap(&f, &cfg.weight, cfg.p, r),
        Space::Besov => norm_besov(&f, &cfg.weight, cfg.p, r),
    };
    let value = eval(&rule)?;
    let refined = eval(&rule.refined())?;
    let change = relative_change(value, refined);
    Ok(json!({
        "space": name,
        "value": value,
        "refined": refined,
        "relative_change": change,
        "flagged": change > REFINEMENT_FLAG,
        "config": cfg.to_json(),
    }))
}

fn default_family(cfg: &RunConfig, one_dim_degree: usize, count: usize) -> TestFamily {
    cfg.family.clone().unwrap_or(TestFamily::Random {
        n: cfg.n,
        count,
        degree: if cfg.n == 1 { one_dim_degree } else { 3 },
        seed: Some(cfg.seed),
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn default_antiholomorphic_symbol(n: usize) -> Result<SymbolSpec> {
    Ok(SymbolSpec::term(c(0.5, 0.0), vec![0; n], vec![1; n])?)
}

fn default_holomorphic_symbol(n: usize) -> Result<SymbolSpec> {
    let mut e1 = vec![0; n];
    e1[0] = 1;
    Ok(SymbolSpec::new(vec![
        SymbolTerm { c: [1.0, 0.0], a: vec![0; n], b: vec![0; n] },
        SymbolTerm { c: [0.5, 0.0], a: e1, b: vec![0; n] },
    ])?)
}

fn function_or_family_member(cfg: &RunConfig) -> Result<CoefficientSeries> {
    match &cfg.function {
        Some(f) => Ok(f.build()?),
        None => {
            let fam = TestFamily::Random { n: cfg.n, count: 1, degree: 6, seed: Some(cfg.seed) };
            Ok(fam.members()?.remove(0).1)
        }
    }
}

pub fn run_probe(cfg: &RunConfig) -> Result<ProbeReport> {
    let name = cfg.probe.as_deref().context("no probe selected")?;
    let n = cfg.n;
    let sizes = cfg.quadrature;
    let report = match name {
        "radial-identity" => {
            let members = match (&cfg.family, &cfg.function) {
                (Some(fam), _) => fam.members()?,
                (None, Some(f)) => vec![("f".to_string(), f.build()?)],
                (None, None) => default_family(cfg, 8, 10).members()?,
            };
            probe_radial_identity(&members, cfg.gauss_order)?
        }
        "lemma1" => {
            let f = match (&cfg.inner, &cfg.function) {
                (Some(j), _) => BoundedFunction::Inner(j.clone()),
                (None, Some(f)) => BoundedFunction::Poly(f.build()?),
                (None, None) => BoundedFunction::Inner(InnerFunctionSpec::new(vec![vec![c(0.5, 0.0)]; n], c(1.0, 0.0))?),
            };
            probe_lemma1(&f, &MultiIndex::new(cfg.derivative.clone())?, sizes.radial, sizes.angular)?
        }
        "lemma2" => {
            if n != 1 {
                bail!(ConfigError::Semantic(format!("lemma2 is one-dimensional, got n = {n}")));
            }
            let prm = Lemma2Params { a: cfg.a, b: cfg.b, weight: cfg.weight.coords[0], z_count: cfg.z_count, z_max: cfg.z_max };
            probe_lemma2(&prm, sizes.radial, sizes.angular)?
        }
        "toeplitz-bounded" => {
            let h = match &cfg.symbol {
                Some(s) => s.clone(),
                None => default_holomorphic_symbol(n)?,
            };
            let family = default_family(cfg, 6, 50);
            let rule = graded_rule(cfg, &besov_exponents(cfg))?;
            let setting = FamilySetting { family: &family, p: cfg.p, weight: &cfg.weight, rule: &rule };
            probe_toeplitz_bounded(&h, &setting, cfg.cap)?
        }
        "division" => {
            let j = match &cfg.inner {
                Some(j) => j.clone(),
                None => InnerFunctionSpec::new(vec![vec![c(0.5, 0.0), c(0.0, -0.3)]; n], c(1.0, 0.0))?,
            };
            let f = function_or_family_member(cfg)?;
            let max_deg = f.degrees().iter().copied().max().unwrap_or(0);
            let torus = TorusRule::uniform(n, cfg.torus_points.unwrap_or((2 * max_deg + 2).max(16)))?;
            let rule = graded_rule(cfg, &besov_exponents(cfg))?;
            probe_division(&j, &f, cfg.p, &cfg.weight, &rule, &torus)?
        }
        "hankel-bounded" | "berezin-bounded" => {
            let g = match &cfg.symbol {
                Some(s) => s.clone(),
                None => default_antiholomorphic_symbol(n)?,
            };
            let family = default_family(cfg, 6, 50);
            let rule = graded_rule(cfg, &kernel_exponents(cfg))?;
            let setting = FamilySetting { family: &family, p: cfg.p, weight: &cfg.weight, rule: &rule };
            if name == "hankel-bounded" {
                probe_hankel_bounded(&g, &cfg.kernel_order(), &setting, cfg.cap)?
            } else {
                probe_berezin_bounded(&g, &cfg.kernel_order(), &setting, BEREZIN_INNER, cfg.cap)?
            }
        }
        "hankel-sharpness" => {
            let prm = SharpnessParams {
                alpha: cfg.alpha.clone(),
                p: cfg.p,
                weights: cfg.weight.coords.clone(),
                r_list: cfg.r_list.clone(),
                k: cfg.k.clone(),
                radial: cfg.sharpness_radial,
                expect: cfg.expect,
                alpha_scan: cfg.alpha_scan.clone(),
            };
            probe_hankel_sharpness(&prm)?
        }
        other => bail!(ConfigError::Semantic(format!("unknown probe \"{other}\""))),
    };
    Ok(report)
}
