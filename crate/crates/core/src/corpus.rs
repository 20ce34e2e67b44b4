//! Queries against loaded modules (eval, eq, erase), the corpus manifest and
//! claim validation.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erase::erase;
use crate::load::{LoadError, Loader};
use crate::norm::{normalize, NormBudget};
use crate::parser::{parse_expr, SyntaxError};
use crate::pure::PureTerm;
use crate::syntax::{instantiate, name, visit_refs, Expr, Mode, ModuleUnit, Name, SourceSpan};
use crate::typecheck::{
    module_context, Checker, Context, Entry, ErrorCode, Level, Status, TypeError,
};

// ---- queries ----

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

impl QueryError {
    pub fn is_budget(&self) -> bool {
        matches!(self, QueryError::Type(e) if e.code == ErrorCode::BudgetExhausted)
    }
}

fn query_span() -> SourceSpan {
    SourceSpan {
        file: "<query>".into(),
        line: 1,
        column: 1,
        length: 0,
    }
}

/// Context for expressions written inside module `m`: its parameters are in
/// scope and its definitions are applied to them.
pub fn query_context(loader: &Loader, m: Option<&ModuleUnit>) -> Result<Context, QueryError> {
    match m {
        None => Ok(Context::default()),
        Some(m) => Ok(module_context(m, &loader.env, loader.fuel)
            .map_err(LoadError::from)?
            .0),
    }
}

/// Parse `text` in `ctx`. With `open`, names that are neither bound nor
/// defined become fresh variables appended to `ctx`.
pub fn parse_query(
    loader: &Loader,
    ctx: &mut Context,
    text: &str,
    open: bool,
) -> Result<Arc<Expr>, QueryError> {
    let e = parse_expr(text, &ctx.names())?;
    if !open {
        return Ok(e);
    }
    let mut free: Vec<Name> = Vec::new();
    visit_refs(&e, &mut |n| {
        if !loader.env.contains(n) && !free.contains(n) {
            free.push(n.clone());
        }
    });
    let e = if free.is_empty() {
        e
    } else {
        for n in free {
            ctx.push(Entry {
                name: n,
                classifier: None,
                erased: false,
                level: Level::Term,
            });
        }
        parse_expr(text, &ctx.names())?
    };
    infer_free_levels(loader, ctx, &e);
    Ok(e)
}

/// Free names start out as terms; one passed where the head's classifier
/// expects a type or type family (a binder over a kind) becomes a type.
/// Only spines outside binders are inspected.
fn infer_free_levels(loader: &Loader, ctx: &mut Context, e: &Arc<Expr>) {
    let mut c = Checker::new(&loader.env, loader.fuel);
    let (head, args) = e.spine();
    if !args.is_empty() {
        if let Ok((_, mut ty)) = c.infer(ctx, &head) {
            for (_, arg) in &args {
                let Expr::Pi { domain, body, .. } = &*c.whnf(&ty, true) else {
                    break;
                };
                if c.level(ctx, domain) == Level::Kind {
                    if let Expr::Var(i, _) = **arg {
                        let k = ctx.len() - 1 - i;
                        if ctx.entries[k].classifier.is_none() {
                            ctx.entries[k].level = Level::Type;
                        }
                    }
                }
                ty = instantiate(body, arg);
            }
        }
    }
    let children: Vec<&Arc<Expr>> = match &**e {
        Expr::App { .. } => args
            .iter()
            .map(|(_, a)| a)
            .chain(std::iter::once(&head))
            .collect(),
        Expr::Pair(a, b) | Expr::Eq(a, b) => vec![a, b],
        Expr::Proj(_, a) | Expr::Sym(a) => vec![a],
        _ => vec![],
    };
    for ch in children {
        if !Arc::ptr_eq(ch, e) {
            infer_free_levels(loader, ctx, ch);
        }
    }
}

#[derive(Debug)]
pub struct Evaluation {
    pub classifier: Arc<Expr>,
    /// Normal form of the erasure, wrapped with `toChurch` when the
    /// classifier is `NatCV`.
    pub normal: PureTerm,
    pub numeral: Option<u64>,
    pub steps: u64,
}

/// Normal form of the erasure of `e`, with the steps it took.
pub fn normalize_expr(loader: &Loader, e: &Expr) -> Result<(PureTerm, u64), TypeError> {
    let mut budget = NormBudget::new(loader.fuel);
    let t = normalize(&erase(&loader.env, e), &mut budget).map_err(|b| TypeError {
        code: ErrorCode::BudgetExhausted,
        location: query_span(),
        message: b.to_string(),
        expected: None,
        actual: None,
    })?;
    Ok((t, budget.steps_used()))
}

fn is_nat(c: &mut Checker, ctx: &mut Context, ty: &Arc<Expr>) -> Result<bool, TypeError> {
    if !c.env.contains("NatCV") || !c.env.contains("toChurch") {
        return Ok(false);
    }
    c.conv(ctx, ty, &Arc::new(Expr::Ref(name("NatCV"))))
}

/// Typecheck and evaluate `e`.
pub fn evaluate(
    loader: &Loader,
    ctx: &mut Context,
    e: &Arc<Expr>,
) -> Result<Evaluation, TypeError> {
    let mut c = Checker::new(&loader.env, loader.fuel);
    c.location = query_span();
    let (mut elab, classifier) = c.infer(ctx, e)?;
    if is_nat(&mut c, ctx, &classifier)? {
        elab = Expr::app(Mode::Explicit, Arc::new(Expr::Ref(name("toChurch"))), elab);
    }
    let (normal, steps) = normalize_expr(loader, &elab)?;
    Ok(Evaluation {
        classifier,
        numeral: church_readback(&normal),
        normal,
        steps,
    })
}

/// Definitional equality of two terms (normalized erasures) or two types.
pub fn def_eq(
    loader: &Loader,
    ctx: &mut Context,
    a: &Arc<Expr>,
    b: &Arc<Expr>,
) -> Result<bool, TypeError> {
    let mut c = Checker::new(&loader.env, loader.fuel);
    c.location = query_span();
    let a = c.elaborate(ctx, a)?;
    let b = c.elaborate(ctx, b)?;
    match (c.level(ctx, &a), c.level(ctx, &b)) {
        (Level::Term, Level::Term) => c.conv_terms(&a, &b),
        (Level::Term, _) | (_, Level::Term) => Ok(false),
        _ => c.conv(ctx, &a, &b),
    }
}

/// Erasure of `e` (not normalized); global references are inlined.
pub fn erase_query(
    loader: &Loader,
    ctx: &mut Context,
    e: &Arc<Expr>,
) -> Result<PureTerm, TypeError> {
    let mut c = Checker::new(&loader.env, loader.fuel);
    c.location = query_span();
    let e = c.elaborate(ctx, e)?;
    Ok(erase(&loader.env, &e))
}

/// Church numeral `λ s. λ z. s (… (s z))`.
pub fn church(n: u64) -> PureTerm {
    let mut body = PureTerm::Var(0);
    for _ in 0..n {
        body = PureTerm::app(PureTerm::Var(1), body);
    }
    PureTerm::lam("s", PureTerm::lam("z", body))
}

/// Inverse of `church` on eta-contracted normal forms (`λ s. s` is 1).
pub fn church_readback(t: &PureTerm) -> Option<u64> {
    let PureTerm::Lam(_, b) = t else { return None };
    match &**b {
        PureTerm::Var(0) => Some(1),
        PureTerm::Lam(_, body) => {
            let mut n = 0;
            let mut cur: &PureTerm = body;
            loop {
                match cur {
                    PureTerm::Var(0) => return Some(n),
                    PureTerm::App(f, a) if matches!(**f, PureTerm::Var(1)) => {
                        n += 1;
                        cur = a;
                    }
                    _ => return None,
                }
            }
        }
        _ => None,
    }
}

// ---- manifest ----

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Claim {
    Typechecks { name: String },
    DefEqHolds { lhs: String, rhs: String },
    EvaluatesTo { expr: String, value: u64 },
}

impl Claim {
    fn kind(&self) -> &'static str {
        match self {
            Claim::Typechecks { .. } => "typechecks",
            Claim::DefEqHolds { .. } => "defEqHolds",
            Claim::EvaluatesTo { .. } => "evaluatesTo",
        }
    }

    fn subject(&self) -> String {
        match self {
            Claim::Typechecks { name } => name.clone(),
            Claim::DefEqHolds { lhs, rhs } => format!("{lhs} ≃ {rhs}"),
            Claim::EvaluatesTo { expr, value } => format!("{expr} ⇒ {value}"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub tier: u8,
    /// Stub files list their intended definitions but ship without them.
    #[serde(default)]
    pub stub: bool,
    #[serde(default)]
    pub definitions: Vec<String>,
    #[serde(default, rename = "claim")]
    pub claims: Vec<Claim>,
}

impl FileEntry {
    /// Explicit claims, preceded by a `typechecks` claim per definition.
    pub fn all_claims(&self) -> Vec<Claim> {
        self.definitions
            .iter()
            .map(|n| Claim::Typechecks { name: n.clone() })
            .chain(self.claims.iter().cloned())
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "file")]
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("manifest: {0}")]
    Invalid(String),
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, String> {
        let m: Manifest = toml::from_str(text).map_err(|e| e.to_string())?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Manifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Manifest = toml::from_str(&text).map_err(|source| ManifestError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        m.validate().map_err(ManifestError::Invalid)?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), String> {
        let mut seen: HashMap<&str, &str> = HashMap::new();
        for f in &self.files {
            if !(1..=4).contains(&f.tier) {
                return Err(format!("{}: tier {} is not in 1..4", f.path, f.tier));
            }
            for d in &f.definitions {
                if let Some(other) = seen.insert(d, &f.path) {
                    return Err(format!("`{d}` is listed in both {other} and {}", f.path));
                }
            }
        }
        Ok(())
    }
}

// ---- validation ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClaimResult {
    pub file: String,
    pub tier: u8,
    pub kind: &'static str,
    pub subject: String,
    pub status: ClaimStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub steps: u64,
    pub millis: u128,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub claims: Vec<ClaimResult>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.claims.iter().all(|c| c.status != ClaimStatus::Fail)
    }

    pub fn count(&self, s: ClaimStatus) -> usize {
        self.claims.iter().filter(|c| c.status == s).count()
    }
}

/// Check every file of the selected tiers and discharge its claims. Errors
/// are reported per claim; lower-tier files are loaded as needed but their
/// claims are only reported when selected.
pub fn validate_corpus(
    manifest: &Manifest,
    dir: &Path,
    tiers: &BTreeSet<u8>,
    fuel: u64,
) -> ValidationReport {
    let mut loader = Loader::new(dir, fuel);
    let mut report = ValidationReport::default();
    let tier_of: HashMap<&str, u8> = manifest
        .files
        .iter()
        .map(|f| (f.path.trim_end_matches(".cdl"), f.tier))
        .collect();
    for f in manifest.files.iter().filter(|f| tiers.contains(&f.tier)) {
        let result = |claim: &Claim, status, detail: Option<String>, steps, millis| ClaimResult {
            file: f.path.clone(),
            tier: f.tier,
            kind: claim.kind(),
            subject: claim.subject(),
            status,
            detail,
            steps,
            millis,
        };
        if f.stub {
            for claim in f.all_claims() {
                report.claims.push(result(
                    &claim,
                    ClaimStatus::Skipped,
                    Some("skipped (stub)".into()),
                    0,
                    0,
                ));
            }
            continue;
        }
        let loaded = loader
            .load(&dir.join(&f.path))
            .map_err(|e| e.to_string())
            .and_then(|m| {
                let unit = &loader.module(&m).expect("loaded").unit;
                for imp in &unit.imports {
                    match tier_of.get(imp.as_ref()) {
                        Some(t) if *t <= f.tier => {}
                        Some(t) => return Err(format!("imports `{imp}` from higher tier {t}")),
                        None => {
                            return Err(format!("imports `{imp}`, which is not in the manifest"))
                        }
                    }
                }
                Ok(m)
            });
        for claim in f.all_claims() {
            let start = Instant::now();
            let (status, detail, steps) = match &loaded {
                Err(e) => (ClaimStatus::Fail, Some(e.clone()), 0),
                Ok(m) => discharge(&loader, m, &claim),
            };
            report.claims.push(result(
                &claim,
                status,
                detail,
                steps,
                start.elapsed().as_millis(),
            ));
        }
    }
    report
}

fn discharge(loader: &Loader, module: &Name, claim: &Claim) -> (ClaimStatus, Option<String>, u64) {
    let loaded = loader.module(module).expect("loaded");
    let fail = |d: String| (ClaimStatus::Fail, Some(d), 0);
    match claim {
        Claim::Typechecks { name } => match loaded.reports.iter().find(|r| r.name == *name) {
            Some(r) if r.status == Status::Checked => (ClaimStatus::Pass, None, r.steps),
            Some(r) => fail(r.error.as_ref().map(|e| e.to_string()).unwrap_or_default()),
            None if loaded.unit.defs.iter().any(|d| d.name.as_ref() == name) => {
                fail("not reached: an earlier definition failed".into())
            }
            None => fail(format!("`{name}` is not defined in module `{module}`")),
        },
        Claim::DefEqHolds { lhs, rhs } => {
            let run = || -> Result<bool, QueryError> {
                let mut ctx = query_context(loader, Some(&loaded.unit))?;
                let a = parse_query(loader, &mut ctx, lhs, true)?;
                let b = parse_query(loader, &mut ctx, rhs, true)?;
                Ok(def_eq(loader, &mut ctx, &a, &b)?)
            };
            match run() {
                Ok(true) => (ClaimStatus::Pass, None, 0),
                Ok(false) => fail("sides are not definitionally equal".into()),
                Err(e) => fail(e.to_string()),
            }
        }
        Claim::EvaluatesTo { expr, value } => {
            let run = || -> Result<Evaluation, QueryError> {
                let mut ctx = query_context(loader, Some(&loaded.unit))?;
                let e = parse_query(loader, &mut ctx, expr, false)?;
                Ok(evaluate(loader, &mut ctx, &e)?)
            };
            match run() {
                Ok(ev) if ev.numeral == Some(*value) => (ClaimStatus::Pass, None, ev.steps),
                Ok(ev) => (
                    ClaimStatus::Fail,
                    Some(match ev.numeral {
                        Some(n) => format!("evaluates to {n}"),
                        None => format!("normal form is not a numeral: {}", ev.normal),
                    }),
                    ev.steps,
                ),
                Err(e) => fail(e.to_string()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::DEFAULT_FUEL;

    fn shipped() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
    }

    fn loaded(file: &str) -> (Loader, Context) {
        let mut l = Loader::new(shipped(), DEFAULT_FUEL);
        let m = l.load(&shipped().join(file)).unwrap();
        let unit = l.module(&m).unwrap().unit.clone();
        let ctx = query_context(&l, Some(&unit)).unwrap();
        (l, ctx)
    }

    #[test]
    fn church_numerals_read_back() {
        for n in 0..20 {
            let t = normalize(&church(n), &mut NormBudget::new(10)).unwrap();
            assert_eq!(church_readback(&t), Some(n));
        }
        assert_eq!(
            church_readback(&PureTerm::lam("x", PureTerm::lam("y", PureTerm::Var(1)))),
            None
        );
        assert_eq!(church_readback(&PureTerm::Var(0)), None);
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_tiers() {
        let dup = "[[file]]\npath = \"a.cdl\"\ntier = 1\ndefinitions = [\"x\"]\n\
                   [[file]]\npath = \"b.cdl\"\ntier = 2\ndefinitions = [\"x\"]\n";
        assert!(Manifest::parse(dup).unwrap_err().contains("`x`"));
        assert!(Manifest::parse("[[file]]\npath = \"a.cdl\"\ntier = 5\n").is_err());
        assert!(Manifest::parse(
            "[[file]]\npath = \"a.cdl\"\ntier = 1\n[[file.claim]]\nkind = \"guess\"\n"
        )
        .is_err());
    }

    #[test]
    fn shipped_manifest_lists_every_definition_once() {
        let m = Manifest::read(&shipped().join("manifest.toml")).unwrap();
        for f in m.files.iter().filter(|f| !f.stub) {
            let unit = crate::parser::parse_module(
                &std::fs::read_to_string(shipped().join(&f.path)).unwrap(),
                &f.path,
            )
            .unwrap();
            let defs: Vec<&str> = unit.defs.iter().map(|d| d.name.as_ref()).collect();
            assert_eq!(defs, f.definitions, "{}", f.path);
        }
    }

    #[test]
    fn free_names_become_variables_with_inferred_levels() {
        let (l, mut ctx) = loaded("prelude.cdl");
        let e = parse_query(&l, &mut ctx, "case ·A ·B ·X s f g", true).unwrap();
        let levels: Vec<(String, Level)> = ctx
            .entries
            .iter()
            .map(|e| (e.name.to_string(), e.level))
            .collect();
        assert_eq!(levels[0], ("A".into(), Level::Type));
        assert_eq!(levels[3], ("s".into(), Level::Term));
        let rhs = parse_query(&l, &mut ctx, "s f g", true).unwrap();
        assert!(def_eq(&l, &mut ctx, &e, &rhs).unwrap());
        assert!(parse_query(&l, &mut Context::default(), "case ·A", false).is_ok());
    }

    #[test]
    fn evaluation_reads_back_naturals() {
        let (l, mut ctx) = loaded("nat.cdl");
        let e = parse_query(&l, &mut ctx, "add 2 2", false).unwrap();
        let ev = evaluate(&l, &mut ctx, &e).unwrap();
        assert_eq!(ev.numeral, Some(4));
        let e = parse_query(&l, &mut ctx, "unit", false).unwrap();
        assert_eq!(
            evaluate(&l, &mut ctx, &e).unwrap().numeral,
            Some(1),
            "unit is the identity"
        );
        let e = parse_query(&l, &mut ctx, "tt", false).unwrap();
        assert_eq!(evaluate(&l, &mut ctx, &e).unwrap().numeral, None);
    }

    #[test]
    fn evaluation_is_fuel_bounded() {
        let (mut l, mut ctx) = loaded("nat.cdl");
        l.fuel = 50;
        let e = parse_query(&l, &mut ctx, "mult 3 3", false).unwrap();
        assert_eq!(
            evaluate(&l, &mut ctx, &e).unwrap_err().code,
            ErrorCode::BudgetExhausted
        );
    }

    #[test]
    fn equality_distinguishes_terms_and_types() {
        let (l, mut ctx) = loaded("nat.cdl");
        let mut eq = |a: &str, b: &str| {
            let a = parse_query(&l, &mut ctx, a, true).unwrap();
            let b = parse_query(&l, &mut ctx, b, true).unwrap();
            def_eq(&l, &mut ctx, &a, &b).unwrap()
        };
        assert!(eq("NatCV", "FixCV ·NF -nfimap"));
        assert!(!eq("NatCV", "Bool"));
        assert!(!eq("zero", "suc zero"));
        assert!(eq("minus (suc n) 1", "n"));
        assert!(!eq("NatCV", "zero"));
    }

    #[test]
    fn validation_reports_failures_per_claim() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(
            d.path().join("a.cdl"),
            "module a . def T : ★ = ∀ X : ★. X ➔ X . def id : T = Λ X. λ x. x .",
        )
        .unwrap();
        std::fs::write(
            d.path().join("b.cdl"),
            "module b . import a . def bad : T = nope .",
        )
        .unwrap();
        let m = Manifest::parse(
            "[[file]]\npath = \"a.cdl\"\ntier = 1\ndefinitions = [\"T\", \"id\", \"ghost\"]\n\
             [[file.claim]]\nkind = \"defEqHolds\"\nlhs = \"id\"\nrhs = \"λ x. x\"\n\
             [[file.claim]]\nkind = \"evaluatesTo\"\nexpr = \"id\"\nvalue = 1\n\
             [[file]]\npath = \"b.cdl\"\ntier = 1\ndefinitions = [\"bad\"]\n\
             [[file]]\npath = \"c.cdl\"\ntier = 4\nstub = true\ndefinitions = [\"later\"]\n",
        )
        .unwrap();
        let all: BTreeSet<u8> = [1, 4].into();
        let r = validate_corpus(&m, d.path(), &all, 1000);
        let status: Vec<(&str, ClaimStatus)> = r
            .claims
            .iter()
            .map(|c| (c.subject.as_str(), c.status))
            .collect();
        assert_eq!(
            status,
            [
                ("T", ClaimStatus::Pass),
                ("id", ClaimStatus::Pass),
                ("ghost", ClaimStatus::Fail),
                ("id ≃ λ x. x", ClaimStatus::Pass),
                ("id ⇒ 1", ClaimStatus::Pass),
                ("bad", ClaimStatus::Fail),
                ("later", ClaimStatus::Skipped),
            ]
        );
        assert!(!r.ok());
        let only4 = validate_corpus(&m, d.path(), &[4].into(), 1000);
        assert!(only4.ok() && only4.count(ClaimStatus::Skipped) == 1);
    }

    #[test]
    fn tiers_only_depend_downward() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(
            d.path().join("hi.cdl"),
            "module hi . def T : ★ = ∀ X : ★. X .",
        )
        .unwrap();
        std::fs::write(
            d.path().join("lo.cdl"),
            "module lo . import hi . def U : ★ = T .",
        )
        .unwrap();
        let m = Manifest::parse(
            "[[file]]\npath = \"lo.cdl\"\ntier = 1\ndefinitions = [\"U\"]\n\
             [[file]]\npath = \"hi.cdl\"\ntier = 2\ndefinitions = [\"T\"]\n",
        )
        .unwrap();
        let r = validate_corpus(&m, d.path(), &[1].into(), 1000);
        assert_eq!(r.claims[0].status, ClaimStatus::Fail);
        assert!(r.claims[0].detail.as_ref().unwrap().contains("higher tier"));
    }
}
