//! The `tsl` command line: `example4`, `control` and `verify`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a check failed.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::control::{self, ControlProblem, InvarianceReport};
use crate::error::{Error, Result};
use crate::leitmann::{
    illustrative_problem, linear_shift_case, transport_minimizer, verify_lemma, zero_minimizer, GaugeFault,
    LinearShift, Tolerances, Verdict,
};
use crate::oracle::{discretize, solve_quadratic};
use crate::timescale::{Component, ComponentsSpec, GeneratorSpec, ScaleGenerator, ScaleSpec, TimeScale};
use crate::variational::{check_admissible, evaluate_functional, TOL_ADMISSIBLE, N_DENSE};
use crate::verify::{self, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Pointwise and value agreement required between the transported minimizer
/// and the oracle.
pub const TOL_ORACLE: f64 = 1e-9;
pub const TOL_COST_SCATTERED: f64 = 1e-12;
pub const TOL_COST_DENSE: f64 = 1e-6;

const DEFAULT_EXAMPLE_SCALE: &str = "integers:0..2";
const DEFAULT_CONTROL_SCALE: &str = "hstep:0..1:0.1";

#[derive(Parser, Debug)]
#[command(name = "tsl", version, about = "Variational problems on time scales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the (x^Δ)² + x^σ + t·x^Δ problem through a linear shift and
    /// cross-check it against direct minimization.
    Example4(Flags),
    /// Solve the two-control problem through its invariance family.
    Control(Flags),
    /// Run the invariant suites on one scale or on the default bundle.
    Verify(Flags),
}

#[derive(clap::Args, Debug)]
struct Flags {
    /// integers:A..B, hstep:A..B:H, qscale:Q:KMIN..KMAX, interval:A..B,
    /// file:PATH or inline JSON
    #[arg(long)]
    scale: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol_res: Option<f64>,
    #[arg(long)]
    tol_gap: Option<f64>,
    /// Output directory [default: $TSL_DEFAULT_OUT or .]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the full report as JSON
    #[arg(long)]
    json: bool,
    #[arg(long, value_enum)]
    fault: Option<FaultArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    DropGaugeTerm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubcommandName {
    Example4,
    Control,
    Verify,
}

/// Everything a run depends on. Written into every report so that runs can
/// be reproduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: SubcommandName,
    /// `None` means the default bundle (for `verify`).
    pub scale: Option<ScaleSpec>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub tol_res: Option<f64>,
    pub tol_gap: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub json: bool,
    pub fault: Option<GaugeFault>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    fn scale(&self) -> Result<TimeScale> {
        self.scale
            .as_ref()
            .ok_or_else(|| Error::Config("no time scale given".into()))?
            .build()
    }
}

fn parse_range<T: std::str::FromStr>(text: &str) -> Option<(T, T)> {
    let (lo, hi) = text.split_once("..")?;
    Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
}

/// Parses the `--scale` shorthand into its JSON form.
pub fn parse_scale(text: &str) -> Result<ScaleSpec> {
    let text = text.trim();
    if text.starts_with('{') {
        return ScaleSpec::from_json(text);
    }
    let bad = || Error::Config(format!("cannot parse time scale '{text}'"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let generator = match kind {
        "file" => {
            let body = fs::read_to_string(rest)
                .map_err(|e| Error::Config(format!("cannot read time scale file '{rest}': {e}")))?;
            return ScaleSpec::from_json(&body);
        }
        "integers" => {
            let (a, b) = parse_range(rest).ok_or_else(bad)?;
            ScaleGenerator::Integers { a, b }
        }
        "hstep" => {
            let (range, h) = rest.rsplit_once(':').ok_or_else(bad)?;
            let (a, b) = parse_range(range).ok_or_else(bad)?;
            ScaleGenerator::HStep {
                a,
                b,
                h: h.parse().map_err(|_| bad())?,
            }
        }
        "qscale" => {
            let (q, range) = rest.split_once(':').ok_or_else(bad)?;
            let (k_min, k_max) = parse_range(range).ok_or_else(bad)?;
            ScaleGenerator::QScale {
                q: q.parse().map_err(|_| bad())?,
                k_min,
                k_max,
            }
        }
        "interval" => {
            let (lo, hi) = parse_range(rest).ok_or_else(bad)?;
            return Ok(ScaleSpec::Components(ComponentsSpec {
                components: vec![Component::Interval(lo, hi)],
            }));
        }
        _ => return Err(bad()),
    };
    Ok(ScaleSpec::Generator(GeneratorSpec { generator }))
}

fn default_out() -> PathBuf {
    std::env::var_os("TSL_DEFAULT_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn build_config(name: SubcommandName, f: Flags) -> Result<RunConfig> {
    let scale_text = match (&f.scale, name) {
        (Some(s), _) => Some(s.clone()),
        (None, SubcommandName::Example4) => Some(DEFAULT_EXAMPLE_SCALE.to_string()),
        (None, SubcommandName::Control) => Some(DEFAULT_CONTROL_SCALE.to_string()),
        (None, SubcommandName::Verify) => None,
    };
    let scale = scale_text.as_deref().map(parse_scale).transpose()?;
    if let Some(s) = &scale {
        s.build()?;
    }
    Ok(RunConfig {
        subcommand: name,
        scale,
        a: f.a,
        b: f.b,
        alpha: f.alpha,
        beta: f.beta,
        tol_res: f.tol_res,
        tol_gap: f.tol_gap,
        trials: f.trials,
        seed: f.seed,
        out: f.out.unwrap_or_else(default_out),
        json: f.json,
        fault: f.fault.map(|FaultArg::DropGaugeTerm| GaugeFault::DropQuadraticTerm),
    })
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, flags) = match cli.command {
        Command::Example4(f) => (SubcommandName::Example4, f),
        Command::Control(f) => (SubcommandName::Control, f),
        Command::Verify(f) => (SubcommandName::Verify, f),
    };
    let outcome = build_config(name, flags).and_then(|cfg| run_config(&cfg));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Runs a parsed configuration. `Err` means a configuration problem (exit
/// 1); failed checks come back as `Ok(EXIT_FAILED)`.
pub fn run_config(cfg: &RunConfig) -> Result<i32> {
    match cfg.subcommand {
        SubcommandName::Example4 => cmd_example4(cfg),
        SubcommandName::Control => cmd_control(cfg),
        SubcommandName::Verify => cmd_verify(cfg),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_example4(cfg: &RunConfig) -> Result<i32> {
    let ts = cfg.scale()?;
    let a = cfg.a.unwrap_or(ts.min());
    let b = cfg.b.unwrap_or(ts.max());
    let (alpha, beta) = (cfg.alpha.unwrap_or(0.0), cfg.beta.unwrap_or(1.0));
    let p = illustrative_problem(&ts, a, b, alpha, beta).map_err(|e| Error::Config(e.to_string()))?;
    fs::create_dir_all(&cfg.out)?;

    let pair = linear_shift_case(&p)?;
    let shift = LinearShift::solve(a, b, alpha, beta)?;
    let defaults = Tolerances::for_scale(p.scale());
    let tol = Tolerances {
        tol_res: cfg.tol_res.unwrap_or(defaults.tol_res),
        tol_gap: cfg.tol_gap.unwrap_or(defaults.tol_gap),
    };
    let lemma = verify_lemma(&pair, cfg.trials, cfg.seed, tol.tol_res, tol.tol_gap);
    let x = transport_minimizer(&pair, &zero_minimizer(&pair))?;
    let value = evaluate_functional(&p, &x)?;
    let admissible = check_admissible(&p, &x, TOL_ADMISSIBLE);

    let dp = discretize(&p, 0);
    let (oracle, oracle_check) = match solve_quadratic(&dp) {
        Ok(r) => {
            let pointwise = dp
                .grid()
                .iter()
                .zip(&r.argmin)
                .map(|(&t, v)| (x.eval(t) - v).abs())
                .fold(0.0, f64::max);
            let value_diff = (r.value - value).abs();
            let pass = pointwise <= TOL_ORACLE && value_diff <= TOL_ORACLE;
            let check = json!({
                "max_pointwise_diff": pointwise,
                "value_diff": value_diff,
                "tol": TOL_ORACLE,
                "pass": pass,
            });
            (serde_json::to_value(&r)?, check)
        }
        Err(e) => (
            serde_json::Value::Null,
            json!({"pass": false, "error": e.to_string(), "tol": TOL_ORACLE}),
        ),
    };
    let oracle_pass = oracle_check["pass"] == true;
    let pass = lemma.verdict == Verdict::Pass && oracle_pass && admissible.admissible;

    let report = json!({
        "config": cfg,
        "problem": {"a": a, "b": b, "alpha": alpha, "beta": beta},
        "shift": shift,
        "value": value,
        "lemma": lemma,
        "admissibility": admissible,
        "oracle": oracle,
        "oracle_check": oracle_check,
        "pass": pass,
    });
    write_json(&cfg.out.join("report.json"), &report)?;
    let mut w = BufWriter::new(File::create(cfg.out.join("minimizer.csv"))?);
    x.write_csv(&mut w, N_DENSE)?;
    w.flush()?;

    if cfg.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("minimizer x(t) = {} t + {}", shift.c + 0.0, shift.d + 0.0);
        println!("value {value}");
        println!("lemma {} (max residual {:e})", verdict(lemma.verdict == Verdict::Pass), lemma.max_abs_residual);
        println!("oracle {}", verdict(oracle_pass));
    }
    Ok(if pass { EXIT_OK } else { EXIT_FAILED })
}

pub fn cmd_control(cfg: &RunConfig) -> Result<i32> {
    let ts = cfg.scale()?;
    if ts.min() != 0.0 || ts.max() != 1.0 {
        return Err(Error::Config(format!(
            "control needs a time scale spanning exactly [0, 1], got [{}, {}]",
            ts.min(),
            ts.max()
        )));
    }
    let p = ControlProblem::shipped(&ts)?;
    fs::create_dir_all(&cfg.out)?;
    let scattered = ts.is_purely_scattered();
    let cost_tol = if scattered { TOL_COST_SCATTERED } else { TOL_COST_DENSE };
    let inv_tol = cfg.tol_gap.unwrap_or(if scattered {
        verify::TOL_CONTROL_SCATTERED
    } else {
        verify::TOL_CONTROL_DENSE
    });

    let sol = match control::solve_by_invariance(&p) {
        Ok(s) => s,
        Err(e) => {
            let report = json!({"config": cfg, "error": e.to_string(), "pass": false});
            write_json(&cfg.out.join("control_report.json"), &report)?;
            eprintln!("control: {e}");
            return Ok(EXIT_FAILED);
        }
    };
    let x = control::simulate(&p, &sol.minimizer)?;
    let cost = control::cost(&p, &sol.minimizer)?;
    let feasibility = control::feasible(&p, &sol.minimizer, cost_tol);

    let mut controls = vec![sol.minimizer.clone()];
    controls.extend(verify::feasible_controls(&p, cfg.trials, cfg.seed)?);
    let mut invariance: Vec<InvarianceReport> = Vec::new();
    for u in &controls {
        invariance.extend(control::check_invariance_many(&p, &[-1.0, -0.5, 0.0, 0.5, 1.0], u, inv_tol));
    }
    let invariance_pass = invariance.iter().all(|r| r.pass);
    let worst_gap = invariance.iter().map(|r| r.cost_gap_error).fold(0.0, f64::max);
    let cost_pass = (cost - 1.0).abs() <= cost_tol && (sol.min_cost - 1.0).abs() <= cost_tol;
    let pass = cost_pass && feasibility.feasible && invariance_pass;

    let report = json!({
        "config": cfg,
        "s_star": sol.s_star,
        "min_cost": sol.min_cost,
        "cost": cost,
        "cost_tol": cost_tol,
        "endpoint": feasibility.endpoint,
        "feasibility": feasibility,
        "invariance": {
            "tol": inv_tol,
            "controls": controls.len(),
            "max_gap_error": worst_gap,
            "pass": invariance_pass,
            "checks": invariance,
        },
        "pass": pass,
    });
    write_json(&cfg.out.join("control_report.json"), &report)?;
    let mut w = BufWriter::new(File::create(cfg.out.join("control.csv"))?);
    control::write_csv(&p, &sol.minimizer, &x, &mut w, N_DENSE)?;
    w.flush()?;

    if cfg.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("s* = {}", sol.s_star);
        println!("minimizer u1 = 0, u2 = {}", -sol.s_star);
        println!("cost {cost} {}", verdict(cost_pass));
        println!("feasible {}", verdict(feasibility.feasible));
        println!("invariance {} ({} checks, max gap error {worst_gap:e})", verdict(invariance_pass), invariance.len());
    }
    Ok(if pass { EXIT_OK } else { EXIT_FAILED })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let scales = match &cfg.scale {
        Some(spec) => vec![("scale".to_string(), spec.build()?)],
        None => verify::default_bundle(),
    };
    let opts = VerifyOptions {
        trials: cfg.trials,
        seed: cfg.seed,
        tol_res: cfg.tol_res,
        tol_gap: cfg.tol_gap,
        fault: cfg.fault,
    };
    let outcome = verify::verify_all(&scales, &opts);
    if cfg.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    } else {
        for s in &outcome.scales {
            for suite in &s.suites {
                println!(
                    "{} {} {} (max error {:e}, tol {:e}, {} checks)",
                    verdict(suite.pass),
                    s.name,
                    suite.suite,
                    suite.max_error,
                    suite.tol,
                    suite.checks
                );
            }
            println!(
                "{} {} lemma (max residual {:e}, gap spread {:e})",
                verdict(s.lemma.verdict == Verdict::Pass),
                s.name,
                s.lemma.max_abs_residual,
                s.lemma.gap_constant_spread
            );
        }
    }
    Ok(if outcome.pass { EXIT_OK } else { EXIT_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_forms() {
        let g = |s: &str| match parse_scale(s).unwrap() {
            ScaleSpec::Generator(g) => g.generator,
            other => panic!("{other:?}"),
        };
        assert_eq!(g("integers:0..2"), ScaleGenerator::Integers { a: 0, b: 2 });
        assert_eq!(g("integers:-3..4"), ScaleGenerator::Integers { a: -3, b: 4 });
        assert_eq!(g("hstep:0..1:0.1"), ScaleGenerator::HStep { a: 0.0, b: 1.0, h: 0.1 });
        assert_eq!(g("qscale:2:0..6"), ScaleGenerator::QScale { q: 2.0, k_min: 0, k_max: 6 });
        let ts = parse_scale("interval:0..1").unwrap().build().unwrap();
        assert_eq!(ts.components(), &[Component::Interval(0.0, 1.0)]);
        let inline = parse_scale(r#"{"components":[{"point":0.0},{"interval":[1.0,2.0]}]}"#).unwrap();
        assert_eq!(inline.build().unwrap().components().len(), 2);
        for bad in ["integers:0", "hstep:0..1", "qscale:x:0..2", "nope:1..2", "", "interval:1"] {
            assert!(parse_scale(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scale_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.json");
        fs::write(&path, r#"{"generator":{"integers":{"a":0,"b":3}}}"#).unwrap();
        let ts = parse_scale(&format!("file:{}", path.display())).unwrap().build().unwrap();
        assert_eq!(ts.max(), 3.0);
        assert!(parse_scale("file:/definitely/missing.json").is_err());
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig {
            subcommand: SubcommandName::Example4,
            scale: Some(parse_scale("hstep:0..2:0.25").unwrap()),
            a: Some(0.0),
            b: None,
            alpha: Some(-1.5),
            beta: Some(2.0),
            tol_res: None,
            tol_gap: Some(1e-8),
            trials: 7,
            seed: 42,
            out: PathBuf::from("out"),
            json: false,
            fault: Some(GaugeFault::DropQuadraticTerm),
        };
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"drop-gauge-term\""));
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let mut v: serde_json::Value = serde_json::from_str(
            &RunConfig {
                subcommand: SubcommandName::Verify,
                scale: None,
                a: None,
                b: None,
                alpha: None,
                beta: None,
                tol_res: None,
                tol_gap: None,
                trials: 1,
                seed: 0,
                out: PathBuf::from("."),
                json: true,
                fault: None,
            }
            .to_json(),
        )
        .unwrap();
        v["extra"] = json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
