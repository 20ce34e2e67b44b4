//! Command-line front end.
//!
//! Exit codes: 0 success, 1 type error or failed claim, 2 parse, IO or
//! configuration error, 3 normalization budget exhausted.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::corpus::{
    def_eq, erase_query, evaluate, parse_query, query_context, validate_corpus, ClaimStatus,
    Manifest, QueryError,
};
use crate::load::{LoadError, Loader};
use crate::norm::DEFAULT_FUEL;
use crate::pretty::{print_expr, Style};
use crate::pure::{Display, PureTerm};
use crate::syntax::Name;
use crate::typecheck::{Context, ErrorCode, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "cdlec", version, about = "Checker and evaluator for CDLE")]
pub struct Cli {
    /// Reduction-step budget for each normalization.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    pub fuel: u64,
    /// Line-delimited JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Print terms with unicode symbols.
    #[arg(long, global = true)]
    pub unicode: bool,
    /// Directory searched for imports and holding the manifest.
    #[arg(long, global = true, env = "CDLEC_CORPUS", default_value = "./corpus")]
    pub corpus: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check modules and report on each definition.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Normalize an expression: `eval [FILE] EXPR`.
    Eval {
        #[arg(num_args = 1..=2, required = true)]
        args: Vec<String>,
    },
    /// Decide definitional equality; unknown names are free variables:
    /// `eq [FILE] LHS RHS`.
    Eq {
        #[arg(num_args = 2..=3, required = true)]
        args: Vec<String>,
    },
    /// Print the erasure of an expression or definition: `erase [FILE] EXPR`.
    Erase {
        #[arg(num_args = 1..=2, required = true)]
        args: Vec<String>,
    },
    /// Discharge the manifest's claims for the selected tiers.
    Validate {
        #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3],
              value_parser = clap::value_parser!(u8).range(1..=4))]
        tiers: Vec<u8>,
    },
}

/// Run with the process's arguments and standard streams.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let mut app = App {
        cli: &cli,
        out,
        err,
    };
    let r = match &cli.command {
        Command::Check { paths } => app.check(paths),
        Command::Eval { args } => app.eval(args),
        Command::Eq { args } => app.eq(args),
        Command::Erase { args } => app.erase(args),
        Command::Validate { tiers } => app.validate(tiers),
    };
    r.unwrap_or(EXIT_CONFIG)
}

struct App<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

type Io<T> = std::io::Result<T>;

fn load_exit(e: &LoadError) -> i32 {
    match e {
        LoadError::Module(_) | LoadError::ImportFailed { .. } => EXIT_FAIL,
        _ => EXIT_CONFIG,
    }
}

fn query_exit(e: &QueryError) -> i32 {
    match e {
        _ if e.is_budget() => EXIT_BUDGET,
        QueryError::Type(_) => EXIT_FAIL,
        QueryError::Load(l) => load_exit(l),
        QueryError::Syntax(_) => EXIT_CONFIG,
    }
}

impl App<'_> {
    fn style(&self) -> Style {
        Style {
            unicode: self.cli.unicode,
        }
    }

    fn show(&self, t: &PureTerm, ctx: &Context) -> String {
        let free: Vec<Name> = ctx.names().into_iter().rev().collect();
        Display {
            term: t,
            free: &free,
            unicode: self.cli.unicode,
        }
        .to_string()
    }

    fn error(&mut self, e: &dyn std::fmt::Display) -> Io<()> {
        if self.cli.json {
            writeln!(self.out, "{}", json!({ "error": e.to_string() }))
        } else {
            writeln!(self.err, "error: {e}")
        }
    }

    fn check(&mut self, paths: &[PathBuf]) -> Io<i32> {
        let mut loader = Loader::new(&self.cli.corpus, self.cli.fuel);
        let mut code = EXIT_OK;
        for p in paths {
            if let Err(e) = loader.load(p) {
                self.error(&e)?;
                code = code.max(load_exit(&e));
            }
        }
        for m in loader.modules() {
            for r in &m.reports {
                if self.cli.json {
                    writeln!(
                        self.out,
                        "{}",
                        serde_json::to_string(r).expect("serializable")
                    )?;
                    continue;
                }
                match (&r.status, &r.error) {
                    (Status::Checked, _) => writeln!(
                        self.out,
                        "ok    {}.{}  ({} steps, {} ms)",
                        r.module, r.name, r.steps, r.millis
                    )?,
                    (Status::Failed, e) => {
                        writeln!(self.out, "FAIL  {}.{}", r.module, r.name)?;
                        if let Some(e) = e {
                            writeln!(self.out, "{e}")?;
                        }
                    }
                }
            }
            for r in &m.reports {
                if let Some(e) = &r.error {
                    code = code.max(if e.code == ErrorCode::BudgetExhausted {
                        EXIT_BUDGET
                    } else {
                        EXIT_FAIL
                    });
                }
            }
        }
        Ok(code)
    }

    /// Loader with `file` loaded (or, without a file, every non-stub corpus
    /// file), and the context of that file's module.
    fn session(&mut self, file: Option<&str>) -> Result<(Loader, Context), i32> {
        let mut loader = Loader::new(&self.cli.corpus, self.cli.fuel);
        let module = match file {
            Some(f) => match loader.load(Path::new(f)) {
                Ok(m) => Some(m),
                Err(e) => {
                    let _ = self.error(&e);
                    return Err(load_exit(&e));
                }
            },
            None => {
                let manifest = match Manifest::read(&self.cli.corpus.join(MANIFEST)) {
                    Ok(m) => m,
                    Err(e) => {
                        let _ = self.error(&e);
                        return Err(EXIT_CONFIG);
                    }
                };
                for f in manifest.files.iter().filter(|f| !f.stub) {
                    if let Err(e) = loader.load(&self.cli.corpus.join(&f.path)) {
                        let _ = self.error(&e);
                        return Err(load_exit(&e));
                    }
                }
                None
            }
        };
        if let Some(m) = &module {
            let lm = loader.module(m).expect("loaded");
            if !lm.ok() {
                let e = lm
                    .reports
                    .iter()
                    .find_map(|r| r.error.clone())
                    .expect("a failed report");
                let code = if e.code == ErrorCode::BudgetExhausted {
                    EXIT_BUDGET
                } else {
                    EXIT_FAIL
                };
                let _ = self.error(&e);
                return Err(code);
            }
        }
        let unit = module
            .as_ref()
            .map(|m| loader.module(m).expect("loaded").unit.clone());
        match query_context(&loader, unit.as_ref()) {
            Ok(ctx) => Ok((loader, ctx)),
            Err(e) => {
                let _ = self.error(&e);
                Err(query_exit(&e))
            }
        }
    }

    fn split(args: &[String], n: usize) -> (Option<&str>, &[String]) {
        if args.len() > n {
            (Some(args[0].as_str()), &args[1..])
        } else {
            (None, args)
        }
    }

    fn eval(&mut self, args: &[String]) -> Io<i32> {
        let (file, rest) = Self::split(args, 1);
        let (loader, mut ctx) = match self.session(file) {
            Ok(s) => s,
            Err(code) => return Ok(code),
        };
        let result = parse_query(&loader, &mut ctx, &rest[0], false)
            .and_then(|e| Ok(evaluate(&loader, &mut ctx, &e)?));
        match result {
            Ok(ev) => {
                let normal = self.show(&ev.normal, &ctx);
                if self.cli.json {
                    let ty = print_expr(&ev.classifier, &ctx.names(), self.style());
                    writeln!(
                        self.out,
                        "{}",
                        json!({ "classifier": ty, "normal": normal, "value": ev.numeral, "steps": ev.steps })
                    )?;
                } else {
                    writeln!(self.out, "{normal}")?;
                    if let Some(n) = ev.numeral {
                        writeln!(self.out, "{n}")?;
                    }
                }
                Ok(EXIT_OK)
            }
            Err(e) => {
                self.error(&e)?;
                Ok(query_exit(&e))
            }
        }
    }

    fn eq(&mut self, args: &[String]) -> Io<i32> {
        let (file, rest) = Self::split(args, 2);
        let (loader, mut ctx) = match self.session(file) {
            Ok(s) => s,
            Err(code) => return Ok(code),
        };
        let result = parse_query(&loader, &mut ctx, &rest[0], true).and_then(|a| {
            let b = parse_query(&loader, &mut ctx, &rest[1], true)?;
            // names made free by the second side also scope over the first
            let a = parse_query(&loader, &mut ctx, &rest[0], false).unwrap_or(a);
            Ok(def_eq(&loader, &mut ctx, &a, &b)?)
        });
        match result {
            Ok(equal) => {
                if self.cli.json {
                    writeln!(self.out, "{}", json!({ "equal": equal }))?;
                } else {
                    writeln!(self.out, "{}", if equal { "EQUAL" } else { "NOT-EQUAL" })?;
                }
                Ok(if equal { EXIT_OK } else { EXIT_FAIL })
            }
            Err(e) => {
                self.error(&e)?;
                Ok(query_exit(&e))
            }
        }
    }

    fn erase(&mut self, args: &[String]) -> Io<i32> {
        let (file, rest) = Self::split(args, 1);
        let (loader, mut ctx) = match self.session(file) {
            Ok(s) => s,
            Err(code) => return Ok(code),
        };
        let result = parse_query(&loader, &mut ctx, &rest[0], false)
            .and_then(|e| Ok(erase_query(&loader, &mut ctx, &e)?));
        match result {
            Ok(t) => {
                let s = self.show(&t, &ctx);
                if self.cli.json {
                    writeln!(self.out, "{}", json!({ "erasure": s }))?;
                } else {
                    writeln!(self.out, "{s}")?;
                }
                Ok(EXIT_OK)
            }
            Err(e) => {
                self.error(&e)?;
                Ok(query_exit(&e))
            }
        }
    }

    fn validate(&mut self, tiers: &[u8]) -> Io<i32> {
        let manifest = match Manifest::read(&self.cli.corpus.join(MANIFEST)) {
            Ok(m) => m,
            Err(e) => {
                self.error(&e)?;
                return Ok(EXIT_CONFIG);
            }
        };
        let tiers: BTreeSet<u8> = tiers.iter().copied().collect();
        let report = validate_corpus(&manifest, &self.cli.corpus, &tiers, self.cli.fuel);
        for c in &report.claims {
            if self.cli.json {
                writeln!(
                    self.out,
                    "{}",
                    serde_json::to_string(c).expect("serializable")
                )?;
                continue;
            }
            let status = match c.status {
                ClaimStatus::Pass => "pass",
                ClaimStatus::Fail => "FAIL",
                ClaimStatus::Skipped => "skipped (stub)",
            };
            writeln!(
                self.out,
                "{:<15} tier {}  {:<14} {:<12} {}  ({} steps, {} ms)",
                status, c.tier, c.file, c.kind, c.subject, c.steps, c.millis
            )?;
            if let (ClaimStatus::Fail, Some(d)) = (c.status, &c.detail) {
                writeln!(self.out, "    {}", d.replace('\n', "\n    "))?;
            }
        }
        if !self.cli.json {
            writeln!(
                self.out,
                "{} passed, {} failed, {} skipped",
                report.count(ClaimStatus::Pass),
                report.count(ClaimStatus::Fail),
                report.count(ClaimStatus::Skipped)
            )?;
        }
        Ok(if report.ok() { EXIT_OK } else { EXIT_FAIL })
    }
}
