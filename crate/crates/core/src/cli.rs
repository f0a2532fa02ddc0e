//! Command-line front end. Every command reads and writes JSON documents;
//! the exit code reports the failure class.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bridge;
use crate::error::{ErrorClass, MomentError, Result};
use crate::extension::{extension_bound, flat_extend_from_b, successive_flat_extensions, verify_flat_extension};
use crate::io::{self, Eval, SCHEMA};
use crate::linalg::{Scalar, Tolerances, C64};
use crate::localizing::{localize_by_compression, localize_direct};
use crate::moments::{build_moment_matrix, from_measure, psd_check, rank, MomentSequence};
use crate::monomials::Kind;
use crate::polynomial::Polynomial;
use crate::scan::{scan, ScanSpec};
use crate::solve::{basis_labels, minimal_measure_pipeline};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "moment-atlas", version, about = "Truncated K-moment problems: flat extensions and minimal atomic measures")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunConfig {
    /// Relative singular value cutoff for numerical rank.
    #[arg(long, global = true, default_value_t = Tolerances::default().rank)]
    pub tol_rank: f64,
    /// Relative eigenvalue slack for positive semidefiniteness.
    #[arg(long, global = true, default_value_t = Tolerances::default().psd)]
    pub tol_psd: f64,
    /// Least-squares and moment-structure residual bound.
    #[arg(long, global = true, default_value_t = Tolerances::default().residual)]
    pub tol_res: f64,
    /// Zero test for constraint values at atoms.
    #[arg(long, global = true, default_value_t = Tolerances::default().boundary)]
    pub tol_boundary: f64,
    /// Seed for the random combination of multiplication operators.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Accept arithmetic expressions such as "4*pi/3" wherever a number is expected.
    #[arg(long, global = true)]
    pub eval: bool,
}

impl RunConfig {
    pub fn tolerances(&self) -> Result<Tolerances> {
        let tol = Tolerances {
            rank: self.tol_rank,
            psd: self.tol_psd,
            residual: self.tol_res,
            boundary: self.tol_boundary,
            ..Tolerances::default()
        };
        tol.validate()?;
        Ok(tol)
    }

    fn evaluator(&self) -> Eval {
        Eval {
            enabled: self.eval,
            vars: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Direct,
    Compression,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moment matrix M(n) with basis labels.
    Build {
        sequence: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Positive semidefiniteness and rank of M(n).
    Psd {
        sequence: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Localizing matrix M_p(n).
    Localize {
        sequence: PathBuf,
        polynomial: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
    },
    /// Whether M(n+1) is a flat extension of M(n); needs moments through 2n+2.
    FlatCheck {
        sequence: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Flat extension of M(n) from moments of degree 2n+1, then `steps` more.
    Extend {
        sequence: PathBuf,
        odd: PathBuf,
        #[arg(long, default_value_t = 0)]
        steps: usize,
    },
    /// Full pipeline: flat extension, localizing checks, atoms and densities.
    Solve {
        sequence: PathBuf,
        odd: PathBuf,
        constraints: Option<PathBuf>,
        /// Where to write the certificate (embedded in the output when absent).
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Grid and bisection search over up to three free moments.
    Scan { sequence: PathBuf, spec: PathBuf },
    /// Real/complex moment conversions.
    Bridge {
        #[command(subcommand)]
        action: BridgeAction,
    },
    /// Moments of an atomic measure through the given degree.
    FromMeasure {
        measure: PathBuf,
        #[arg(long)]
        degree: u32,
    },
    /// Upper bound on the number of flat-extension steps for Q-constrained data.
    Bound {
        #[arg(long)]
        num_vars: usize,
        #[arg(long)]
        n: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum BridgeAction {
    /// Real moments in 2d variables to complex moments in d variables.
    ToComplex { sequence: PathBuf },
    /// Complex moments in d variables to real moments in 2d variables.
    ToReal { sequence: PathBuf },
    /// Real moments in an odd number of variables, padded by one zero coordinate.
    OddEmbed { sequence: PathBuf },
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Input => EXIT_INPUT,
        ErrorClass::Infeasible => EXIT_INFEASIBLE,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MomentError::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| MomentError::invalid(format!("{}: {e}", path.display())))
}

fn write_doc(path: Option<&Path>, doc: &Value) -> Result<()> {
    let text = io::to_json_string(doc);
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| MomentError::invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// What a command produced: a document and the exit code to report.
struct Outcome {
    doc: Value,
    code: i32,
}

impl Outcome {
    fn ok(doc: Value) -> Self {
        Outcome { doc, code: EXIT_OK }
    }
}

macro_rules! by_kind {
    ($doc:expr, $f:ident($($arg:expr),*)) => {
        match io::doc_kind($doc)? {
            Kind::Real => $f::<f64>($($arg),*),
            Kind::Complex => $f::<C64>($($arg),*),
        }
    };
}

fn cmd_build<T: Scalar>(doc: &Value, n: u32, eval: &Eval) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let m = build_moment_matrix(&seq, n)?;
    Ok(Outcome::ok(io::matrix_json(&m)))
}

fn cmd_psd<T: Scalar>(doc: &Value, n: u32, eval: &Eval, tol: &Tolerances) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let m = build_moment_matrix(&seq, n)?;
    let psd = psd_check(&m, tol.psd);
    let doc = json!({
        "schema": SCHEMA,
        "n": n,
        "size": m.size(),
        "is_psd": psd.is_psd,
        "min_eigenvalue": psd.min_eigenvalue,
        "rank": rank(&m, tol.rank),
    });
    let code = if psd.is_psd { EXIT_OK } else { EXIT_INFEASIBLE };
    Ok(Outcome { doc, code })
}

fn cmd_localize<T: Scalar>(doc: &Value, poly: &Value, n: u32, method: Method, eval: &Eval) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let p = io::parse_polynomial_doc::<T>(poly, eval)?;
    let lm = match method {
        Method::Direct => localize_direct(&seq, &p, n)?,
        Method::Compression => localize_by_compression(&seq, &p, n)?,
    };
    Ok(Outcome::ok(json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "num_vars": seq.num_vars(),
        "n": n,
        "polynomial": io::polynomial_json(&p),
        "labels": lm.basis.labels(),
        "data": io::matrix_rows(&lm.data),
    })))
}

fn cmd_flat_check<T: Scalar>(doc: &Value, n: u32, eval: &Eval, tol: &Tolerances) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let base = build_moment_matrix(&seq, n)?;
    let ext = build_moment_matrix(&seq, n + 1)?;
    let r = verify_flat_extension(&base, &ext, tol)?;
    let doc = json!({
        "schema": SCHEMA,
        "n": n,
        "is_extension": r.is_extension,
        "is_flat": r.is_flat,
        "rank_base": r.rank_base,
        "rank_ext": r.rank_ext,
        "min_eigenvalue": r.min_eigenvalue,
    });
    let code = if r.is_flat { EXIT_OK } else { EXIT_INFEASIBLE };
    Ok(Outcome { doc, code })
}

fn cmd_extend<T: Scalar>(doc: &Value, odd: &Value, steps: usize, eval: &Eval, tol: &Tolerances) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let fragment = io::parse_sequence::<T>(odd, eval)?;
    let base = build_moment_matrix(&seq, seq.degree() / 2)?;
    let cand = flat_extend_from_b(&base, &fragment, tol)?;
    let ext = successive_flat_extensions(&cand, steps, tol)?;
    let last = ext.matrices.last().unwrap_or(&cand.extension);
    Ok(Outcome::ok(json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "rank": cand.rank,
        "range_residual": cand.range_residual,
        "structure_deviation": cand.structure_deviation,
        "recursion_discrepancy": ext.max_discrepancy,
        "matrix": io::matrix_json(last),
        "moments": io::sequence_json(&ext.moments),
    })))
}

fn cmd_solve<T: Scalar>(
    doc: &Value,
    odd: &Value,
    constraints: Option<&Value>,
    eval: &Eval,
    tol: &Tolerances,
    seed: u64,
) -> Result<(Outcome, Value)> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let fragment = io::parse_sequence::<T>(odd, eval)?;
    let qs: Vec<Polynomial<T>> = match constraints {
        Some(c) => io::parse_constraints::<T>(c, eval)?,
        None => Vec::new(),
    };
    match minimal_measure_pipeline(&seq, &fragment, &qs, tol, seed) {
        Ok(out) => {
            let labels = basis_labels(&out.variety);
            let cert = json!({
                "schema": SCHEMA,
                "ok": true,
                "basis": labels,
                "certificate": out.certificate,
            });
            Ok((Outcome::ok(io::measure_json(&out.measure)), cert))
        }
        Err(e) if e.source.class() == ErrorClass::Input => Err(e.source),
        Err(e) => {
            let cert = json!({
                "schema": SCHEMA,
                "ok": false,
                "failed_stage": e.stage,
                "error": e.source.to_string(),
                "certificate": e.certificate,
            });
            let code = exit_code(e.source.class());
            Ok((Outcome { doc: Value::Null, code }, cert))
        }
    }
}

fn cmd_scan<T: Scalar>(doc: &Value, spec: &Value, eval: &Eval, tol: &Tolerances, seed: u64) -> Result<Outcome> {
    let seq = io::parse_sequence::<T>(doc, eval)?;
    let spec = ScanSpec::parse::<T>(spec)?;
    Ok(Outcome::ok(scan(&seq, &spec, tol, seed)?.to_json()))
}

fn cmd_from_measure<T: Scalar>(doc: &Value, degree: u32, eval: &Eval) -> Result<Outcome> {
    let mu = io::parse_measure::<T>(doc, eval)?;
    Ok(Outcome::ok(io::sequence_json(&from_measure(&mu, degree)?)))
}

fn real_sequence(doc: &Value, eval: &Eval) -> Result<MomentSequence<f64>> {
    if io::doc_kind(doc)? != Kind::Real {
        return Err(MomentError::invalid("expected real moment data"));
    }
    io::parse_sequence::<f64>(doc, eval)
}

fn cmd_bridge(action: &BridgeAction, eval: &Eval) -> Result<Outcome> {
    let doc = match action {
        BridgeAction::ToComplex { sequence } => {
            let beta = real_sequence(&read_json(sequence)?, eval)?;
            io::sequence_json(&bridge::beta_to_gamma(&beta)?)
        }
        BridgeAction::ToReal { sequence } => {
            let d = read_json(sequence)?;
            if io::doc_kind(&d)? != Kind::Complex {
                return Err(MomentError::invalid("expected complex moment data"));
            }
            let gamma = io::parse_sequence::<C64>(&d, eval)?;
            io::sequence_json(&bridge::gamma_to_beta(&gamma)?)
        }
        BridgeAction::OddEmbed { sequence } => {
            let beta = real_sequence(&read_json(sequence)?, eval)?;
            io::sequence_json(&bridge::odd_embed(&beta)?)
        }
    };
    Ok(Outcome::ok(doc))
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = &cli.config;
    let tol = cfg.tolerances()?;
    let eval = cfg.evaluator();
    let out = cfg.out.as_deref();
    let outcome = match &cli.command {
        Command::Build { sequence, n } => {
            let doc = read_json(sequence)?;
            by_kind!(&doc, cmd_build(&doc, *n, &eval))?
        }
        Command::Psd { sequence, n } => {
            let doc = read_json(sequence)?;
            by_kind!(&doc, cmd_psd(&doc, *n, &eval, &tol))?
        }
        Command::Localize {
            sequence,
            polynomial,
            n,
            method,
        } => {
            let doc = read_json(sequence)?;
            let poly = read_json(polynomial)?;
            by_kind!(&doc, cmd_localize(&doc, &poly, *n, *method, &eval))?
        }
        Command::FlatCheck { sequence, n } => {
            let doc = read_json(sequence)?;
            by_kind!(&doc, cmd_flat_check(&doc, *n, &eval, &tol))?
        }
        Command::Extend { sequence, odd, steps } => {
            let doc = read_json(sequence)?;
            let odd = read_json(odd)?;
            by_kind!(&doc, cmd_extend(&doc, &odd, *steps, &eval, &tol))?
        }
        Command::Solve {
            sequence,
            odd,
            constraints,
            certificate,
        } => {
            let doc = read_json(sequence)?;
            let odd = read_json(odd)?;
            let cons = constraints.as_deref().map(read_json).transpose()?;
            let (outcome, cert) = by_kind!(&doc, cmd_solve(&doc, &odd, cons.as_ref(), &eval, &tol, cfg.seed))?;
            match certificate {
                Some(path) => {
                    write_doc(Some(path), &cert)?;
                    if outcome.code == EXIT_OK {
                        write_doc(out, &outcome.doc)?;
                    }
                }
                None if outcome.code == EXIT_OK => {
                    write_doc(out, &json!({"schema": SCHEMA, "measure": outcome.doc, "certificate": cert}))?;
                }
                None => write_doc(out, &cert)?,
            }
            if outcome.code != EXIT_OK {
                eprintln!(
                    "moment-atlas: stage {} failed: {}",
                    cert["failed_stage"].as_str().unwrap_or("?"),
                    cert["error"].as_str().unwrap_or("?")
                );
            }
            return Ok(outcome.code);
        }
        Command::Scan { sequence, spec } => {
            let doc = read_json(sequence)?;
            let spec = read_json(spec)?;
            by_kind!(&doc, cmd_scan(&doc, &spec, &eval, &tol, cfg.seed))?
        }
        Command::Bridge { action } => cmd_bridge(action, &eval)?,
        Command::FromMeasure { measure, degree } => {
            let doc = read_json(measure)?;
            by_kind!(&doc, cmd_from_measure(&doc, *degree, &eval))?
        }
        Command::Bound { num_vars, n } => Outcome::ok(json!({
            "schema": SCHEMA,
            "num_vars": num_vars,
            "n": n,
            "bound": extension_bound(*num_vars, *n)?,
        })),
    };
    write_doc(out, &outcome.doc)?;
    Ok(outcome.code)
}

/// Parses arguments, runs one command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("moment-atlas: {e}");
            exit_code(e.class())
        }
    }
}
