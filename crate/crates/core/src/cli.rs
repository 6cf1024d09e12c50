//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical
//! non-convergence, 3 parse error (program text or JSON).

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::canonical::to_canonical;
use crate::discrete::{self, DiscreteJoint, DiscreteMeasure};
use crate::error::Error;
use crate::joint::{compose_with, ComposeConfig, JointMeasure2D};
use crate::lang::{evaluate, parse, EvalConfig};
use crate::mc::{mc_evaluate, McConfig};
use crate::measure::{lrn_decompose_with, pair_product_limit_with, ChainConfig, Measure1D};
use crate::report::ConvergenceReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jdist", version, about = "Compose joint distributions and evaluate conditioned gaussian chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct Numerics {
    /// Convergence tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Deepest refinement level (1 to 24).
    #[arg(long, env = "JDIST_MAX_DEPTH", default_value_t = 14)]
    pub max_depth: u32,
    /// Gauss-Legendre nodes per panel.
    #[arg(long, default_value_t = 16)]
    pub quadrature: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a program by joint composition.
    Run {
        program: PathBuf,
        #[command(flatten)]
        num: Numerics,
    },
    /// Estimate a program by forward sampling.
    Mc {
        program: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compose two joints (discrete matrices or joint descriptors).
    Compose {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        num: Numerics,
    },
    /// Transpose a joint.
    Dagger { joint: PathBuf },
    /// Lebesgue decomposition of `nu` with respect to `mu`.
    Rn {
        nu: PathBuf,
        mu: PathBuf,
        #[command(flatten)]
        num: Numerics,
    },
    /// Limit of the pair-product sums of `nu` and `xi` over `mu`.
    Limit {
        nu: PathBuf,
        xi: PathBuf,
        mu: PathBuf,
        #[command(flatten)]
        num: Numerics,
    },
    /// Kernel of a discrete joint; null rows take `fill` (default uniform).
    Disintegrate {
        joint: PathBuf,
        /// JSON array of weights for rows of zero mass.
        #[arg(long)]
        fill: Option<String>,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::UnboundedBracket | Error::RootFinding(_) | Error::TooManyLevels { .. } => {
                EXIT_NONCONVERGENCE
            }
            Error::Parse { .. } | Error::UnboundVariable { .. } | Error::NonPositiveVariance { .. } => EXIT_PARSE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: msg.into() }
}

fn read_input(path: &Path, stdin: &mut dyn Read) -> Result<String, Failure> {
    let mut s = String::new();
    if path == Path::new("-") {
        stdin.read_to_string(&mut s).map_err(|e| usage(format!("reading stdin: {e}")))?;
    } else {
        s = std::fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    }
    Ok(s)
}

fn json_parse_error(path: &Path, e: serde_json::Error) -> Failure {
    Failure { code: EXIT_PARSE, message: format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()) }
}

fn read_json(path: &Path, stdin: &mut dyn Read) -> Result<Value, Failure> {
    serde_json::from_str(&read_input(path, stdin)?).map_err(|e| json_parse_error(path, e))
}

fn decode<T: serde::de::DeserializeOwned>(path: &Path, v: Value) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })
}

/// A joint file: a descriptor carries a `"variant"` tag, anything else is
/// read as a discrete joint matrix.
enum AnyJoint {
    Discrete(DiscreteJoint),
    Continuous(JointMeasure2D),
}

fn read_joint(path: &Path, stdin: &mut dyn Read) -> Result<AnyJoint, Failure> {
    let v = read_json(path, stdin)?;
    if v.get("variant").is_none() {
        Ok(AnyJoint::Discrete(decode(path, v)?))
    } else {
        let j: JointMeasure2D = decode(path, v)?;
        j.validate()?;
        Ok(AnyJoint::Continuous(j))
    }
}

fn read_measure(path: &Path, stdin: &mut dyn Read, quadrature: usize) -> Result<Measure1D, Failure> {
    let m: Measure1D = decode(path, read_json(path, stdin)?)?;
    Ok(m.with_quadrature(quadrature)?)
}

fn canonical<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(to_canonical(v)? + "\n")
}

fn depth_schedule(max_depth: u32) -> Vec<f64> {
    (1..=max_depth as i32).map(|k| 2f64.powi(-k)).collect()
}

fn check_numerics(n: &Numerics) -> Result<(), Failure> {
    if !(n.tol.is_finite() && n.tol > 0.0) {
        return Err(usage(format!("--tol must be positive, got {}", n.tol)));
    }
    if !(1..=24).contains(&n.max_depth) {
        return Err(usage(format!("--max-depth must lie in [1, 24], got {}", n.max_depth)));
    }
    if n.quadrature == 0 {
        return Err(usage("--quadrature must be positive"));
    }
    Ok(())
}

fn report_out(report: &ConvergenceReport, fmt: Format, csv: fn(&ConvergenceReport) -> String, payload: Value) -> Result<String, Failure> {
    match fmt {
        Format::Csv => Ok(csv(report)),
        Format::Json => canonical(&payload),
    }
}

/// Output text, or a failure; a non-converged numerical result is printed
/// and then reported through the exit code.
fn execute(cmd: Command, stdin: &mut dyn Read) -> Result<(String, i32), Failure> {
    let status = |converged: bool| if converged { EXIT_OK } else { EXIT_NONCONVERGENCE };
    match cmd {
        Command::Run { program, num } => {
            check_numerics(&num)?;
            let p = parse(&read_input(&program, stdin)?)?;
            let cfg = EvalConfig { tol: num.tol, max_depth: num.max_depth, quadrature: num.quadrature, ..EvalConfig::default() };
            let e = evaluate(&p, &cfg)?;
            let out = report_out(&e.levels, num.format, ConvergenceReport::compose_csv, serde_json::to_value(&e).expect("serializable"))?;
            Ok((out, EXIT_OK))
        }
        Command::Mc { program, samples, seed } => {
            let p = parse(&read_input(&program, stdin)?)?;
            Ok((canonical(&mc_evaluate(&p, &McConfig { samples, seed })?)?, EXIT_OK))
        }
        Command::Compose { left, right, num } => {
            check_numerics(&num)?;
            match (read_joint(&left, stdin)?, read_joint(&right, stdin)?) {
                (AnyJoint::Discrete(a), AnyJoint::Discrete(b)) => Ok((canonical(&discrete::compose_joints(&a, &b)?)?, EXIT_OK)),
                (a, b) => {
                    let lift = |j: AnyJoint| match j {
                        AnyJoint::Continuous(c) => Ok(c),
                        AnyJoint::Discrete(d) => {
                            let v = json!({ "variant": "discrete", "joint": d });
                            serde_json::from_value::<JointMeasure2D>(v).map_err(|e| usage(e.to_string()))
                        }
                    };
                    let cfg = ComposeConfig::with_tol(num.tol, num.max_depth);
                    let out = compose_with(&lift(a)?, &lift(b)?, &cfg)?;
                    let text = match num.format {
                        Format::Csv => out.report.compose_csv(),
                        Format::Json => canonical(&out.joint)?,
                    };
                    Ok((text, status(out.report.converged)))
                }
            }
        }
        Command::Dagger { joint } => match read_joint(&joint, stdin)? {
            AnyJoint::Discrete(d) => Ok((canonical(&discrete::dagger(&d))?, EXIT_OK)),
            AnyJoint::Continuous(j) => Ok((canonical(&j.dagger())?, EXIT_OK)),
        },
        Command::Rn { nu, mu, num } => {
            check_numerics(&num)?;
            let nu = read_measure(&nu, stdin, num.quadrature)?;
            let mu = read_measure(&mu, stdin, num.quadrature)?;
            let d = lrn_decompose_with(&nu, &mu, &ChainConfig::with_schedule(depth_schedule(num.max_depth)))?;
            let text = match num.format {
                Format::Csv => {
                    let mut s = String::from("lo,hi,value\n");
                    for (c, v) in d.derivative.partition.cells().zip(&d.derivative.values) {
                        s += &format!("{:e},{:e},{:e}\n", c.lo, c.hi, v);
                    }
                    for (x, v) in &d.derivative.points {
                        s += &format!("{x:e},{x:e},{v:e}\n");
                    }
                    s
                }
                Format::Json => {
                    let levels: Vec<Value> = d
                        .chain
                        .iter()
                        .zip(&d.schedule)
                        .map(|(a, e)| json!({ "epsilon": e, "cells": a.partition.len(), "carrier_cells": a.carrier_cells() }))
                        .collect();
                    canonical(&json!({
                        "ac_mass": d.ac_part.total(),
                        "singular_mass": d.singular_part.total(),
                        "singular_atoms": d.singular_part.atoms(),
                        "carrier": d.carrier,
                        "derivative": d.derivative,
                        "levels": levels,
                    }))?
                }
            };
            Ok((text, EXIT_OK))
        }
        Command::Limit { nu, xi, mu, num } => {
            check_numerics(&num)?;
            let nu = read_measure(&nu, stdin, num.quadrature)?;
            let xi = read_measure(&xi, stdin, num.quadrature)?;
            let mu = read_measure(&mu, stdin, num.quadrature)?;
            let cfg = ChainConfig::with_schedule(depth_schedule(num.max_depth));
            let out = pair_product_limit_with(&nu, &xi, &mu, num.tol, &cfg)?;
            let payload = json!({
                "value": out.value,
                "converged": out.report.converged,
                "achieved_tol": out.report.achieved_tol,
                "levels": out.report.levels,
            });
            let text = report_out(&out.report, num.format, ConvergenceReport::limit_csv, payload)?;
            Ok((text, status(out.report.converged)))
        }
        Command::Disintegrate { joint, fill } => {
            let d = match read_joint(&joint, stdin)? {
                AnyJoint::Discrete(d) => d,
                AnyJoint::Continuous(JointMeasure2D::Discrete(e)) => e.joint().clone(),
                AnyJoint::Continuous(_) => return Err(usage("disintegration is only available for discrete joints")),
            };
            let m = d.shape().1;
            let fill = match fill {
                None => DiscreteMeasure::uniform(m),
                Some(s) => {
                    let w: Vec<f64> = serde_json::from_str(&s).map_err(|e| Failure { code: EXIT_PARSE, message: format!("--fill: {e}") })?;
                    DiscreteMeasure::probability(w)?
                }
            };
            Ok((canonical(&discrete::disintegrate(&d, &fill)?)?, EXIT_OK))
        }
    }
}

/// Run the CLI on `args`, writing results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, stdin) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            if code == EXIT_NONCONVERGENCE {
                let _ = writeln!(err, "jdist: no convergence within the depth limit");
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "jdist: {}", f.message);
            f.code
        }
    }
}
