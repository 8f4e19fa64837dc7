//! Command-line front end: JSON documents in, JSON reports out.
//!
//! Exit codes: 0 success, 1 failed property, 2 parse error, 3 numerical
//! failure, 4 inclusion violated, 5 certification refused.

pub mod document;
pub mod suites;

use std::io::Read;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::Error;
use crate::hilbert_module::HilbertModule;
use crate::numerics::{op_norm, AntilinearOperator, Tolerance};
use crate::reduction::{fiber_bicommutant_gap, fiber_spaces, pi_fiber};
use crate::standard_form::{
    certify_module_map, counterexample_gallery, exchange_residual, centre_residual, is_standard,
    natural_module_candidate, reduced_standardness_certificate, standardness_from_module_map,
    CertificateKind, ReducedStandardnessCertificate, StandardnessReport, CERTIFICATE_BOUND,
};
use crate::vn_algebra::{generate_algebra, VNAlgebra};

use document::{
    clean, decode_matrix, decode_rect, encode_matrix, encode_matrix_exact, AlgebraDocument,
    CertificateDocument, Instance, ResidualTable, ToleranceDoc, CERTIFICATE_KIND,
};
use suites::{random_inputs, run_many, Suite, SuiteInput};

#[derive(Debug, Parser)]
#[command(name = "wstar", version, about = "Structure, reduction and standard form of finite-dimensional von Neumann algebras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block structure of the generated algebra.
    Structure(Options),
    /// Fiber decomposition along a central subalgebra.
    Reduce(Options),
    /// Standardness verdict, certificates and the counterexample gallery.
    Standard(Options),
    /// Property suites and certificate re-verification.
    Verify(Options),
}

#[derive(Debug, Args, Clone)]
pub struct Options {
    /// Emit a reduced standardness certificate.
    #[arg(long)]
    pub certify: bool,
    /// Run the built-in counterexample gallery.
    #[arg(long)]
    pub gallery: bool,
    /// Suite for `verify`: module, isotr, fibers, atdu, st1 or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Number of generated instances instead of an input file.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Include the canonical unitary in the structure report.
    #[arg(long)]
    pub emit_unitary: bool,
    /// Input document, or `-` for stdin.
    pub file: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerics(Error),
    #[error("inclusion violated: {0}")]
    Inclusion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::Inclusion(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InclusionViolated(msg) => CliError::Inclusion(msg),
            Error::NotAbelian => CliError::Inclusion("central subalgebra is not abelian".to_string()),
            other => CliError::Numerics(other),
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn report(value: &Value, code: i32) -> Self {
        Outcome {
            code,
            stdout: render(value),
            stderr: String::new(),
        }
    }
}

/// Pretty JSON with shallow arrays kept on one line, so a matrix prints one
/// row per line.
fn render(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn array_depth(v: &Value) -> Option<usize> {
    match v {
        Value::Object(_) => None,
        Value::Array(items) => items
            .iter()
            .try_fold(0, |d, x| array_depth(x).map(|e| d.max(e)))
            .map(|d| d + 1),
        _ => Some(0),
    }
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent + 2);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
        Value::Array(items) if !items.is_empty() && array_depth(v).is_none_or(|d| d > 2) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad);
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&" ".repeat(indent));
            out.push(']');
        }
        _ => out.push_str(&v.to_string()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn Read) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let result = match &cli.command {
        Command::Structure(o) => cmd_structure(o, stdin),
        Command::Reduce(o) => cmd_reduce(o, stdin),
        Command::Standard(o) => cmd_standard(o, stdin),
        Command::Verify(o) => cmd_verify(o, stdin),
    };
    result.unwrap_or_else(|e| Outcome {
        code: e.exit_code(),
        stdout: String::new(),
        stderr: format!("wstar: {e}\n"),
    })
}

fn read_input(opts: &Options, stdin: &mut dyn Read) -> Result<String, CliError> {
    let path = opts
        .file
        .as_deref()
        .ok_or_else(|| CliError::Parse("missing input file".to_string()))?;
    let mut text = String::new();
    if path == "-" {
        stdin
            .read_to_string(&mut text)
            .map_err(|e| CliError::Parse(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{path}: {e}")))?;
    }
    Ok(text)
}

fn parse_document(text: &str) -> Result<AlgebraDocument, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

/// Effective tolerance: `--tol` over the document over the default.
fn resolve_tolerance(opts: &Options, doc: Option<&Instance>) -> Result<Tolerance, CliError> {
    let base = doc.and_then(|d| d.tolerance).unwrap_or_default();
    match opts.tol {
        Some(eps) => Tolerance::new(eps, base.abs_eps).map_err(|e| CliError::Parse(format!("--tol: {e}"))),
        None => Ok(base),
    }
}

fn resolve_seed(opts: &Options, doc: Option<&Instance>) -> u64 {
    opts.seed.or(doc.and_then(|d| d.seed)).unwrap_or(0)
}

struct Loaded {
    doc: AlgebraDocument,
    instance: Instance,
    tol: Tolerance,
    seed: u64,
    algebra: VNAlgebra,
}

impl Loaded {
    fn central(&self) -> Result<Option<VNAlgebra>, CliError> {
        match &self.instance.central {
            Some(gens) => Ok(Some(generate_algebra(gens, self.instance.n, self.tol)?)),
            None => Ok(None),
        }
    }

    fn conjugation(&self) -> Option<AntilinearOperator> {
        self.instance.conjugation.clone().map(AntilinearOperator::new)
    }

    /// The document with the effective seed and tolerance written in.
    fn pinned(&self) -> AlgebraDocument {
        let mut doc = self.doc.clone();
        doc.seed = Some(self.seed);
        doc.tolerance = Some(ToleranceDoc {
            rel_eps: self.tol.rel_eps,
            abs_eps: self.tol.abs_eps,
        });
        doc
    }
}

fn load_document(doc: AlgebraDocument, opts: &Options) -> Result<Loaded, CliError> {
    let instance = doc.decode().map_err(CliError::Parse)?;
    let tol = resolve_tolerance(opts, Some(&instance))?;
    let seed = resolve_seed(opts, Some(&instance));
    let algebra = generate_algebra(&instance.generators, instance.n, tol)?;
    Ok(Loaded {
        doc,
        instance,
        tol,
        seed,
        algebra,
    })
}

fn load(opts: &Options, stdin: &mut dyn Read) -> Result<Loaded, CliError> {
    let text = read_input(opts, stdin)?;
    load_document(parse_document(&text)?, opts)
}

fn blocks_json(blocks: &[(usize, usize)]) -> Value {
    Value::from(blocks.iter().map(|&(n, m)| vec![n, m]).collect::<Vec<_>>())
}

pub fn cmd_structure(opts: &Options, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let loaded = load(opts, stdin)?;
    let m = &loaded.algebra;
    let data = m.structure(loaded.seed)?;
    let centre = m.center()?;
    let mut report = json!({
        "command": "structure",
        "ambient_dim": m.ambient_dim(),
        "dim": m.dim(),
        "centre_dim": centre.dim(),
        "blocks": blocks_json(&data.blocks()),
        "central_projections": data.central_projections.iter().map(encode_matrix).collect::<Vec<_>>(),
    });
    if opts.emit_unitary {
        report["canonical_unitary"] = json!(encode_matrix(&data.canonical_unitary));
    }
    Ok(Outcome::report(&report, 0))
}

pub fn cmd_reduce(opts: &Options, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let loaded = load(opts, stdin)?;
    let m = &loaded.algebra;
    let z = loaded
        .central()?
        .ok_or_else(|| CliError::Parse("central_subalgebra: required by reduce".to_string()))?;
    if !z.is_abelian() {
        return Err(CliError::Inclusion("central subalgebra is not abelian".to_string()));
    }
    if !z.is_subalgebra_of(&m.center()?) {
        return Err(CliError::Inclusion(
            "central subalgebra is not contained in the centre of M".to_string(),
        ));
    }
    let big = z.commutant()?;
    let module = HilbertModule::with_canonical_projection(big, loaded.seed)?;
    let fibers = fiber_spaces(&module)?;
    let gaps = fiber_bicommutant_gap(m, &z, &module)?;
    let mut all_agree = true;
    let generators: Vec<Value> = loaded
        .instance
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let norm = op_norm(g);
            let top = pi_fiber(&module, &fibers, g)?.max_norm();
            let agree = (norm - top).abs() <= 1e-8 * norm.max(1.0);
            all_agree &= agree;
            Ok(json!({
                "index": i,
                "norm": clean(norm),
                "max_fiber_norm": clean(top),
                "agree": agree,
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let fiber_reports: Vec<Value> = gaps
        .iter()
        .map(|g| {
            json!({
                "character": g.character,
                "fiber_dim": g.fiber_dim,
                "bicommutant_dim": g.bicommutant_dim,
                "relative_commutant_dim": g.relative_dim,
                "distance": clean(g.distance),
                "gap": if g.equal { "equal" } else { "unequal" },
            })
        })
        .collect();
    let report = json!({
        "command": "reduce",
        "characters": fibers.len(),
        "fiber_dims": fibers.iter().map(|f| f.dim()).collect::<Vec<_>>(),
        "fibers": fiber_reports,
        "generators": generators,
    });
    Ok(Outcome::report(&report, if all_agree { 0 } else { 1 }))
}

fn report_json(report: &StandardnessReport) -> Value {
    json!({
        "standard": report.standard,
        "blocks": blocks_json(&report.blocks),
        "obstruction": report.obstruction().map(|(n, m)| vec![n, m]),
        "obstructions": blocks_json(&report.obstructions),
        "exchange_residual": report.exchange_residual.map(clean),
        "centre_residual": report.centre_residual.map(clean),
    })
}

fn residual_table(cert: &ReducedStandardnessCertificate) -> ResidualTable {
    let r = &cert.residuals;
    ResidualTable {
        fixed_point: clean(r.fixed_point),
        involution: clean(r.involution),
        antiunitary: clean(r.antiunitary),
        z_antilinearity: clean(r.z_antilinearity),
        exchange: clean(r.exchange),
        centre: clean(r.centre),
        worst: clean(cert.worst_residual()),
    }
}

pub fn cmd_standard(opts: &Options, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    if opts.gallery {
        let tol = resolve_tolerance(opts, None)?;
        let cases: Vec<Value> = counterexample_gallery(tol)?
            .iter()
            .map(|case| {
                json!({
                    "name": case.name,
                    "conjugation_exchange_residual": clean(case.exchange_residual),
                    "conjugation_exchanges": case.exchange_residual < 1e-9,
                    "report": report_json(&case.report),
                })
            })
            .collect();
        return Ok(Outcome::report(&json!({"command": "standard", "gallery": cases}), 0));
    }
    let loaded = load(opts, stdin)?;
    let m = &loaded.algebra;
    let report = is_standard(m)?;
    let mut out = json!({"command": "standard", "report": report_json(&report)});
    if let Some(j) = loaded.conjugation() {
        let exchange = exchange_residual(m, &j)?;
        out["supplied_conjugation"] = json!({
            "exchange_residual": clean(exchange),
            "exchanges": exchange < 1e-9,
            "centre_residual": clean(centre_residual(m, &j)?),
        });
    }
    if !opts.certify {
        return Ok(Outcome::report(&out, 0));
    }
    let Some(witness) = report.witness.clone() else {
        let (n, k) = report.obstruction().unwrap_or((0, 0));
        return Ok(Outcome {
            code: 5,
            stdout: render(&out),
            stderr: format!("wstar: certification refused: block ({n}, {k}) is not standard\n"),
        });
    };
    let z = loaded
        .central()?
        .unwrap_or_else(|| VNAlgebra::scalars(m.ambient_dim(), loaded.tol));
    let cert = reduced_standardness_certificate(m, &z, loaded.seed)?;
    let doc = CertificateDocument {
        kind: CERTIFICATE_KIND.to_string(),
        document: loaded.pinned(),
        e: encode_matrix_exact(cert.e()),
        conjugation: encode_matrix_exact(&witness.mat),
        module_action: encode_matrix_exact(&cert.map.action),
        pairing: cert.map.pairing.clone(),
        residuals: residual_table(&cert),
        passes: cert.passes(),
    };
    let value = serde_json::to_value(&doc).expect("certificate serializes");
    Ok(Outcome::report(&value, if cert.passes() { 0 } else { 1 }))
}

fn properties_json(suite: &str, instances: usize, props: &[suites::Property]) -> (Value, bool) {
    let pass = props.iter().all(|p| p.passes());
    let rows: Vec<Value> = props
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "worst": clean(p.worst),
                "threshold": p.threshold,
                "pass": p.passes(),
            })
        })
        .collect();
    (
        json!({
            "command": "verify",
            "suite": suite,
            "instances": instances,
            "properties": rows,
            "pass": pass,
        }),
        pass,
    )
}

fn verify_certificate(cert: CertificateDocument, opts: &Options) -> Result<Outcome, CliError> {
    if cert.kind != CERTIFICATE_KIND {
        return Err(CliError::Parse(format!("kind: unknown certificate kind `{}`", cert.kind)));
    }
    let loaded = load_document(cert.document.clone(), opts)?;
    let n = loaded.instance.n;
    let m = &loaded.algebra;
    let z = loaded
        .central()?
        .unwrap_or_else(|| VNAlgebra::scalars(n, loaded.tol));
    let e = decode_matrix(&cert.e, n, "e").map_err(CliError::Parse)?;
    let j = AntilinearOperator::new(decode_matrix(&cert.conjugation, n, "conjugation").map_err(CliError::Parse)?);
    let map = natural_module_candidate(&j, &z, &e, loaded.seed)?;
    let rows = map.action.nrows();
    let emitted = decode_rect(&cert.module_action, rows, map.action.ncols(), "module_action")
        .map_err(CliError::Parse)?;
    let agreement = (&map.action - emitted).norm();
    let rebuilt = certify_module_map(m, map, CertificateKind::Fixed)?;
    let verdict = standardness_from_module_map(m, &rebuilt.map).map(|r| r.standard);
    let props = vec![
        suites::Property::new("certificate residuals", rebuilt.worst_residual(), CERTIFICATE_BOUND),
        suites::Property::new("module action agreement", agreement, 1e-8),
        suites::Property::flag("recorded as passing", cert.passes),
        suites::Property::flag("structural verdict", matches!(verdict, Ok(true))),
    ];
    let (value, pass) = properties_json("certificate", 1, &props);
    Ok(Outcome::report(&value, if pass { 0 } else { 1 }))
}

pub fn cmd_verify(opts: &Options, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let suite_name = opts.suite.clone().unwrap_or_else(|| "all".to_string());
    let suite: Suite = suite_name.parse().map_err(CliError::Parse)?;
    if let Some(count) = opts.random {
        let tol = resolve_tolerance(opts, None)?;
        let seed = resolve_seed(opts, None);
        let inputs = random_inputs(suite, count, seed, tol)?;
        let props = run_many(suite, &inputs)?;
        let (value, pass) = properties_json(&suite_name, inputs.len(), &props);
        return Ok(Outcome::report(&value, if pass { 0 } else { 1 }));
    }
    let text = read_input(opts, stdin)?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    if raw.get("kind").is_some() {
        let cert: CertificateDocument =
            serde_json::from_value(raw).map_err(|e| CliError::Parse(e.to_string()))?;
        return verify_certificate(cert, opts);
    }
    let loaded = load_document(parse_document(&text)?, opts)?;
    let input = SuiteInput {
        algebra: loaded.algebra.clone(),
        central: loaded.central()?,
        conjugation: loaded.conjugation(),
        seed: loaded.seed,
    };
    let props = run_many(suite, std::slice::from_ref(&input))?;
    let (value, pass) = properties_json(&suite_name, 1, &props);
    Ok(Outcome::report(&value, if pass { 0 } else { 1 }))
}

/// Convenience for embedding: shares one module between commands.
pub fn module_for(algebra: VNAlgebra, seed: u64) -> crate::error::Result<Arc<HilbertModule>> {
    HilbertModule::with_canonical_projection(algebra, seed).map(Arc::new)
}
