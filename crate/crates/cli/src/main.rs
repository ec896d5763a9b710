//! `odlab`: order certificates, operad multifiltrations and deformation
//! brackets from JSON configurations.
//!
//! Exit status is 0 on success, 1 when a requested check fails and 2 for
//! usage, configuration or computation errors. Errors are reported on stderr
//! as a single JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use odlab_core::brackets::{self, HSeriesOperator, PairingStyle};
use odlab_core::config::{OutputFormat, RunConfig};
use odlab_core::diffop::{self, OperatorSpec, OrderKind};
use odlab_core::multifilt::{self, CapRule};
use odlab_core::{selftest, Error, SCHEMA};

/// Relative `--output` paths are resolved against this directory when set.
const OUTPUT_DIR_VAR: &str = "ODLAB_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "odlab", version, about = "Exact order, multifiltration and bracket computations")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derivation and differential-operator order of a linear operator.
    Order {
        #[arg(long)]
        config: PathBuf,
        /// JSON operator spec replacing the `operator` section of the config.
        #[arg(long)]
        operator: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        #[arg(long, value_enum, default_value_t = OrderChoice::Both)]
        kind: OrderChoice,
    },
    /// Dimension lattice of a multifiltration in one arity.
    Filt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        arity: usize,
        #[arg(long, value_enum, default_value_t = FiltKind::Standard)]
        kind: FiltKind,
        #[arg(long, value_enum)]
        check: Option<FiltCheck>,
    },
    /// Whether every relation of the presentation lies in the bottom cell.
    Tight {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        check: Option<TightCheck>,
    },
    /// Big bracket, superbig bracket or Terilla product.
    Bracket {
        #[arg(value_enum)]
        kind: BracketKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BracketCheck::Eval)]
        check: BracketCheck,
    },
    /// Runs the acceptance criteria.
    Selftest {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
        criterion: Option<u8>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrderChoice {
    Derivation,
    Diffop,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FiltKind {
    Standard,
    Prestandard,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FiltCheck {
    Saturated,
    Axioms,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TightCheck {
    Tight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BracketKind {
    Big,
    Superbig,
    Terilla,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BracketCheck {
    Eval,
    Jacobi,
    Assoc,
    Order,
}

/// A finished computation: the JSON document, an optional CSV rendering and
/// whether every requested check passed.
struct Report {
    body: Value,
    csv: Option<String>,
    pass: bool,
}

impl Report {
    fn new(fields: Value, pass: bool) -> Self {
        let mut body = Map::new();
        body.insert("schema".into(), json!(SCHEMA));
        if let Value::Object(m) = fields {
            body.extend(m);
        }
        Report {
            body: Value::Object(body),
            csv: None,
            pass,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(2)
        }
    }
}

fn diagnostic(e: &anyhow::Error) -> Value {
    let kind = match e.downcast_ref::<Error>() {
        Some(Error::ContextMismatch(_)) => "context_mismatch",
        Some(Error::Parse(_)) => "parse",
        Some(Error::Config(_)) => "config",
        Some(Error::NotHomogeneous(_)) => "not_homogeneous",
        Some(Error::Truncation(_)) => "truncation",
        Some(Error::Index(_)) => "index",
        Some(Error::Antisymmetry(_)) => "antisymmetry",
        Some(Error::NotSimplyConnected(_)) => "not_simply_connected",
        Some(Error::ArityBound(..)) => "arity_bound",
        Some(Error::UnknownStability) => "unknown_stability",
        Some(Error::Invalid(_)) => "invalid",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "usage",
    };
    json!({"schema": SCHEMA, "error": {"kind": kind, "message": format!("{e:#}")}})
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(anyhow!("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = match &cli.command {
        Command::Order { config, .. } | Command::Filt { config, .. } | Command::Tight { config, .. } => {
            Some(RunConfig::load(config)?)
        }
        Command::Bracket { config, .. } => config.as_deref().map(RunConfig::load).transpose()?,
        Command::Selftest { .. } => None,
    };
    let report = match &cli.command {
        Command::Order {
            operator,
            max_order,
            kind,
            ..
        } => cmd_order(config.as_ref().expect("loaded"), operator.as_deref(), *max_order, *kind)?,
        Command::Filt { arity, kind, check, .. } => {
            cmd_filt(config.as_ref().expect("loaded"), *arity, *kind, *check)?
        }
        Command::Tight { check, .. } => cmd_tight(config.as_ref().expect("loaded"), check.is_some())?,
        Command::Bracket { kind, check, .. } => cmd_bracket(config.as_ref(), *kind, *check)?,
        Command::Selftest { criterion } => cmd_selftest(*criterion),
    };
    emit(cli, config.as_ref(), &report)?;
    Ok(report.pass)
}

fn emit(cli: &Cli, config: Option<&RunConfig>, report: &Report) -> anyhow::Result<()> {
    let format = match cli.format {
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Csv) => OutputFormat::Csv,
        None => config.map(RunConfig::output_format).unwrap_or_default(),
    };
    let text = match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report.body)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => report.csv.clone().unwrap_or_else(|| flat_csv(&report.body)),
    };
    let path = cli
        .output
        .clone()
        .or_else(|| config.and_then(|c| c.output.as_ref()?.path.as_ref().map(PathBuf::from)));
    match path {
        Some(p) => {
            let p = match std::env::var_os(OUTPUT_DIR_VAR) {
                Some(dir) if p.is_relative() => Path::new(&dir).join(p),
                _ => p,
            };
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `key,value` rows for the top-level fields; nested values are written as JSON.
fn flat_csv(body: &Value) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(m) = body {
        for (k, v) in m {
            let cell = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k},{}\n", csv_quote(&cell)));
        }
    }
    out
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_order(
    config: &RunConfig,
    operator: Option<&Path>,
    max_order: usize,
    kind: OrderChoice,
) -> anyhow::Result<Report> {
    let ctx = config.algebra_context()?;
    let op = match operator {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: OperatorSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            spec.build(&ctx)?
        }
        None => config.operator(&ctx)?,
    };
    let mut fields = Map::new();
    let mut window = op.window();
    if kind != OrderChoice::Diffop {
        let c = diffop::order(&op, OrderKind::Derivation, max_order);
        window = c.window;
        fields.insert("derivation_order".into(), c.describe());
    }
    if kind != OrderChoice::Derivation {
        let c = diffop::order(&op, OrderKind::Diffop, max_order);
        window = c.window;
        fields.insert("diffop_order".into(), c.describe());
    }
    fields.insert("certified_up_to_D".into(), json!(window));
    fields.insert("truncation".into(), json!(ctx.truncation()));
    fields.insert("max_order".into(), json!(max_order));
    Ok(Report::new(Value::Object(fields), true))
}

fn cmd_filt(config: &RunConfig, arity: usize, kind: FiltKind, check: Option<FiltCheck>) -> anyhow::Result<Report> {
    if arity == 0 {
        return Err(anyhow!("--arity must be at least 1"));
    }
    let pres = config.presentation(Some(arity))?;
    let ideal = (!pres.relations.is_empty()).then(|| pres.ideal().map(std::sync::Arc::new)).transpose()?;
    let filt = match kind {
        FiltKind::Standard => multifilt::standard(&pres.op, ideal, arity)?,
        FiltKind::Prestandard => {
            let pre = multifilt::prestandard(&pres.op, arity, CapRule::Sharp)?;
            match ideal {
                Some(i) => pre.pushforward(i)?,
                None => pre,
            }
        }
    };
    let lattice = filt.lattice(arity)?;
    let mut body = serde_json::to_value(&lattice)?;
    let pass = match check {
        None => true,
        Some(FiltCheck::Saturated) => {
            let ok = filt.is_saturated();
            body["saturated"] = json!(ok);
            ok
        }
        Some(FiltCheck::Axioms) => {
            let bad = filt.check_axioms()?;
            body["axiom_violations"] = json!(bad);
            bad.is_empty()
        }
    };
    let mut report = Report::new(body, pass);
    report.csv = Some(lattice.to_csv());
    Ok(report)
}

fn cmd_tight(config: &RunConfig, required: bool) -> anyhow::Result<Report> {
    let pres = config.presentation(None)?;
    let verdict = multifilt::is_tight(&pres)?;
    let pass = verdict.tight || !required;
    Ok(Report::new(serde_json::to_value(&verdict)?, pass))
}

fn cmd_bracket(config: Option<&RunConfig>, kind: BracketKind, check: BracketCheck) -> anyhow::Result<Report> {
    let default = RunConfig::from_json("{}")?;
    let config = config.unwrap_or(&default);
    let spec = config.bracket_spec();
    let style = match kind {
        BracketKind::Terilla => PairingStyle::Plain,
        BracketKind::Big | BracketKind::Superbig => PairingStyle::Suspended,
    };
    let pc = config.paired_context(style)?;
    let ctx = pc.ctx().clone();
    let series = match kind {
        BracketKind::Big => HSeriesOperator::new(vec![brackets::big_bracket_operator(&pc)?], 0, 1)?,
        BracketKind::Superbig => brackets::superbig_bracket_operator(&pc)?,
        BracketKind::Terilla => brackets::terilla_star_operator(&pc)?,
    };
    let name = match kind {
        BracketKind::Big => "big",
        BracketKind::Superbig => "superbig",
        BracketKind::Terilla => "terilla",
    };
    let mut fields = json!({"kind": name, "degrees": spec.degrees, "truncation": spec.truncation});
    let pass = match check {
        BracketCheck::Eval => {
            let (f, g) = match (&spec.f, &spec.g) {
                (Some(f), Some(g)) => (ctx.parse(f)?, ctx.parse(g)?),
                _ => return Err(Error::Config("evaluation needs `bracket.f` and `bracket.g`".into()).into()),
            };
            let value = series.eval_polys(&[f.clone(), g.clone()]);
            fields["f"] = json!(ctx.format(&f));
            fields["g"] = json!(ctx.format(&g));
            fields["value"] = value.to_json(&ctx);
            true
        }
        BracketCheck::Jacobi => {
            if kind == BracketKind::Terilla {
                return Err(anyhow!("--check jacobi applies to the big and superbig brackets"));
            }
            let r = brackets::jacobi_sweep(&series, spec.sweep_max_len)?;
            fields["jacobi_residual"] = json!(r.residual);
            fields["up_to_h"] = json!(r.up_to_h);
            fields["triples"] = json!(r.triples);
            fields["sweep_max_len"] = json!(r.max_len);
            r.residual == 0
        }
        BracketCheck::Assoc => {
            if kind != BracketKind::Terilla {
                return Err(anyhow!("--check assoc applies to the Terilla product"));
            }
            let r = brackets::associativity_sweep(&series, spec.sweep_max_len)?;
            fields["assoc_residual"] = json!(r.residual);
            fields["up_to_h"] = json!(r.up_to_h);
            fields["triples"] = json!(r.triples);
            fields["sweep_max_len"] = json!(r.max_len);
            r.residual == 0
        }
        BracketCheck::Order => {
            let certs = series.certify(OrderKind::Diffop, spec.frozen_max_len)?;
            let rows: Vec<Value> = certs
                .iter()
                .map(|c| {
                    json!({
                        "power": c.power,
                        "declared": c.declared,
                        "slot_orders": c.slots.iter().map(|s| s.order).collect::<Vec<_>>(),
                        "ok": c.ok(),
                    })
                })
                .collect();
            fields["coefficients"] = json!(rows);
            fields["frozen_max_len"] = json!(spec.frozen_max_len);
            certs.iter().all(|c| c.ok())
        }
    };
    Ok(Report::new(fields, pass))
}

fn cmd_selftest(criterion: Option<u8>) -> Report {
    let outcomes = match criterion {
        Some(id) => vec![selftest::run(id)],
        None => selftest::run_all(),
    };
    for o in &outcomes {
        eprintln!("{}", o.line());
    }
    let pass = outcomes.iter().all(|o| o.pass);
    let mut report = Report::new(json!({"pass": pass, "criteria": outcomes}), pass);
    let mut csv = String::from("criterion,name,pass\n");
    for o in &outcomes {
        csv.push_str(&format!("{},{},{}\n", o.id, csv_quote(o.name), o.pass));
    }
    report.csv = Some(csv);
    report
}
