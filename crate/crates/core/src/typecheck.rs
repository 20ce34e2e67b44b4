//! Bidirectional checking for the core theory.
//!
//! Checking elaborates as it goes: explicit applications of a term to a type
//! become erased applications, lambda annotations are filled in from the
//! goal, and references to definitions of the module being checked are
//! applied to the module's parameters. Definitions are stored closed over
//! their module parameters together with their cached erasure.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::erase::{erase, Globals};
use crate::norm::{normalize, BudgetExhausted, NormBudget};
use crate::pretty::{print_expr, Style};
use crate::pure::PureTerm;
use crate::syntax::{
    free_in_erasure, instantiate, name, shift, Expr, Mode, ModuleUnit, Name, SourceSpan, Which,
};

/// What an expression classifies: terms have types, types have kinds,
/// kinds have `□`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Level {
    Term,
    Type,
    Kind,
}

#[derive(Clone, Debug)]
pub struct GlobalDef {
    pub name: Name,
    /// Closed over the module parameters.
    pub classifier: Arc<Expr>,
    pub body: Arc<Expr>,
    pub level: Level,
    pub erased: Arc<PureTerm>,
    pub module: Name,
    /// How the closed definition takes each module parameter.
    pub param_modes: Vec<Mode>,
    pub span: SourceSpan,
}

/// Checked definitions of all loaded modules.
#[derive(Default, Clone)]
pub struct Env {
    defs: HashMap<Name, GlobalDef>,
    order: Vec<Name>,
}

impl Env {
    pub fn get(&self, n: &str) -> Option<&GlobalDef> {
        self.defs.get(n)
    }

    pub fn contains(&self, n: &str) -> bool {
        self.defs.contains_key(n)
    }

    pub fn insert(&mut self, d: GlobalDef) {
        self.order.push(d.name.clone());
        self.defs.insert(d.name.clone(), d);
    }

    /// Definitions in the order they were checked.
    pub fn defs(&self) -> impl Iterator<Item = &GlobalDef> {
        self.order.iter().map(|n| &self.defs[n])
    }

    fn rank(&self, n: &str) -> usize {
        self.order.iter().position(|m| m.as_ref() == n).unwrap_or(0)
    }
}

impl Globals for Env {
    fn erased(&self, n: &str) -> Option<Arc<PureTerm>> {
        self.defs.get(n).map(|d| d.erased.clone())
    }
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub name: Name,
    /// `None` for binders whose classifier is never needed (motive and
    /// equation binders, free names in `eq` queries).
    pub classifier: Option<Arc<Expr>>,
    pub erased: bool,
    pub level: Level,
}

/// Local variables, innermost last, plus the module currently being checked.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub entries: Vec<Entry>,
    /// Module whose definitions are referenced unapplied, and its number of
    /// parameters (always the outermost entries).
    pub module: Option<(Name, usize)>,
}

impl Context {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<Name> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn pop(&mut self) {
        self.entries.pop();
    }

    fn lookup(&self, i: usize) -> &Entry {
        &self.entries[self.entries.len() - 1 - i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ErrorCode {
    UnboundVar,
    ErasedVarUsed,
    IotaComponentsDiffer,
    NotConvertible,
    BetaSidesDiffer,
    AppModeMismatch,
    NotAFunction,
    NotAnIntersection,
    NotAnEquation,
    BudgetExhausted,
    SortError,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, Error, Serialize)]
#[error("{location}: {code}: {message}{}", detail(.expected, .actual))]
pub struct TypeError {
    pub code: ErrorCode,
    pub location: SourceSpan,
    pub message: String,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

fn detail(expected: &Option<String>, actual: &Option<String>) -> String {
    let mut s = String::new();
    if let Some(e) = expected {
        s.push_str("\n  expected: ");
        s.push_str(e);
    }
    if let Some(a) = actual {
        s.push_str("\n  actual:   ");
        s.push_str(a);
    }
    s
}

type TResult<T> = Result<T, TypeError>;

pub struct Checker<'a> {
    pub env: &'a Env,
    pub fuel: u64,
    /// Reduction steps used by all normalizations so far.
    pub steps: u64,
    pub location: SourceSpan,
}

fn star() -> Arc<Expr> {
    Arc::new(Expr::SortStar)
}

fn is_sort(e: &Expr) -> bool {
    matches!(e, Expr::SortStar | Expr::SortBox)
}

impl<'a> Checker<'a> {
    pub fn new(env: &'a Env, fuel: u64) -> Self {
        Checker {
            env,
            fuel,
            steps: 0,
            location: SourceSpan::default(),
        }
    }

    fn err(&self, code: ErrorCode, message: impl Into<String>) -> TypeError {
        TypeError {
            code,
            location: self.location.clone(),
            message: message.into(),
            expected: None,
            actual: None,
        }
    }

    fn err_with(
        &self,
        code: ErrorCode,
        message: impl Into<String>,
        ctx: &Context,
        expected: &Expr,
        actual: &Expr,
    ) -> TypeError {
        let names = ctx.names();
        TypeError {
            expected: Some(print_expr(expected, &names, Style::default())),
            actual: Some(print_expr(actual, &names, Style::default())),
            ..self.err(code, message)
        }
    }

    fn show(&self, ctx: &Context, e: &Expr) -> String {
        print_expr(e, &ctx.names(), Style::default())
    }

    // ---- levels ----

    pub fn level(&self, ctx: &mut Context, e: &Expr) -> Level {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match e {
            Expr::Var(i, _) => {
                if *i < ctx.len() {
                    ctx.lookup(*i).level
                } else {
                    Level::Term
                }
            }
            Expr::Ref(n) => self.env.get(n).map_or(Level::Term, |d| d.level),
            Expr::SortStar | Expr::SortBox => Level::Kind,
            Expr::Pi {
                name, domain, body, ..
            } => {
                let entry = self.untyped_entry(ctx, name, Some(domain));
                ctx.push(entry);
                let l = self.level(ctx, body);
                ctx.pop();
                if l == Level::Kind {
                    Level::Kind
                } else {
                    Level::Type
                }
            }
            Expr::Lam {
                name, annot, body, ..
            } => {
                let entry = self.untyped_entry(ctx, name, annot.as_ref());
                ctx.push(entry);
                let l = self.level(ctx, body);
                ctx.pop();
                l
            }
            Expr::App { fun, .. } => self.level(ctx, fun),
            Expr::Iota { .. } | Expr::Eq(..) => Level::Type,
            _ => Level::Term,
        })
    }

    /// Level of a variable bound with classifier `domain`.
    fn binder_level(&self, ctx: &mut Context, domain: &Expr) -> Level {
        if self.level(ctx, domain) == Level::Kind {
            Level::Type
        } else {
            Level::Term
        }
    }

    fn untyped_entry(&self, ctx: &mut Context, n: &Name, annot: Option<&Arc<Expr>>) -> Entry {
        let level = match annot {
            Some(a) => self.binder_level(ctx, a),
            None => Level::Term,
        };
        Entry {
            name: n.clone(),
            classifier: annot.cloned(),
            erased: false,
            level,
        }
    }

    fn typed_entry(&self, ctx: &mut Context, n: &Name, domain: &Arc<Expr>, erased: bool) -> Entry {
        Entry {
            name: n.clone(),
            classifier: Some(domain.clone()),
            erased,
            level: self.binder_level(ctx, domain),
        }
    }

    // ---- references ----

    /// A reference, applied to the module parameters when it belongs to the
    /// module being checked. Returns the elaborated expression and the
    /// definition's classifier instantiated accordingly.
    fn reference(&self, ctx: &Context, n: &Name) -> TResult<(Arc<Expr>, Arc<Expr>)> {
        let d = self
            .env
            .get(n)
            .ok_or_else(|| self.err(ErrorCode::UnboundVar, format!("unbound name `{n}`")))?;
        let mut e = Arc::new(Expr::Ref(n.clone()));
        let mut ty = d.classifier.clone();
        if let Some((m, nparams)) = &ctx.module {
            if *m == d.module {
                for (k, mode) in d.param_modes.iter().enumerate().take(*nparams) {
                    let idx = ctx.len() - 1 - k;
                    let v = Expr::var(idx, &ctx.entries[k].name);
                    e = Expr::app(*mode, e, v.clone());
                    ty = match &*ty {
                        Expr::Pi { body, .. } => instantiate(body, &v),
                        _ => unreachable!("closed classifier has a binder per parameter"),
                    };
                }
            }
        }
        Ok((e, ty))
    }

    // ---- untyped elaboration (equation sides, motives, hints) ----

    /// Resolve references and turn explicit type applications of terms into
    /// erased ones, without classifying anything.
    pub fn elaborate(&self, ctx: &mut Context, e: &Arc<Expr>) -> TResult<Arc<Expr>> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.elaborate_inner(ctx, e))
    }

    fn elaborate_inner(&self, ctx: &mut Context, e: &Arc<Expr>) -> TResult<Arc<Expr>> {
        Ok(match &**e {
            Expr::Var(..) | Expr::SortStar | Expr::SortBox | Expr::Beta(None) => e.clone(),
            Expr::Ref(n) => self.reference(ctx, n)?.0,
            Expr::Pi {
                mode,
                name,
                domain,
                body,
            } => {
                let d = self.elaborate(ctx, domain)?;
                let entry = self.untyped_entry(ctx, name, Some(&d));
                ctx.push(entry);
                let b = self.elaborate(ctx, body);
                ctx.pop();
                Expr::pi(*mode, name.clone(), d, b?)
            }
            Expr::Lam {
                mode,
                name,
                annot,
                body,
            } => {
                let a = match annot {
                    Some(a) => Some(self.elaborate(ctx, a)?),
                    None => None,
                };
                let entry = self.untyped_entry(ctx, name, a.as_ref());
                ctx.push(entry);
                let b = self.elaborate(ctx, body);
                ctx.pop();
                Expr::lam(*mode, name.clone(), a, b?)
            }
            Expr::App { mode, fun, arg } => {
                let f = self.elaborate(ctx, fun)?;
                let a = self.elaborate(ctx, arg)?;
                let mode = if *mode == Mode::Explicit
                    && self.level(ctx, &f) == Level::Term
                    && self.level(ctx, &a) != Level::Term
                {
                    Mode::Erased
                } else {
                    *mode
                };
                Expr::app(mode, f, a)
            }
            Expr::Iota { name, left, right } => {
                let l = self.elaborate(ctx, left)?;
                let entry = self.untyped_entry(ctx, name, Some(&l));
                ctx.push(entry);
                let r = self.elaborate(ctx, right);
                ctx.pop();
                Arc::new(Expr::Iota {
                    name: name.clone(),
                    left: l,
                    right: r?,
                })
            }
            Expr::Pair(l, r) => {
                Arc::new(Expr::Pair(self.elaborate(ctx, l)?, self.elaborate(ctx, r)?))
            }
            Expr::Eq(l, r) => Arc::new(Expr::Eq(self.elaborate(ctx, l)?, self.elaborate(ctx, r)?)),
            Expr::Proj(w, x) => Arc::new(Expr::Proj(*w, self.elaborate(ctx, x)?)),
            Expr::Sym(x) => Arc::new(Expr::Sym(self.elaborate(ctx, x)?)),
            Expr::Beta(Some(h)) => Arc::new(Expr::Beta(Some(self.elaborate(ctx, h)?))),
            Expr::Rho {
                proof,
                name,
                motive,
                target,
            } => {
                let p = self.elaborate(ctx, proof)?;
                let entry = self.untyped_entry(ctx, name, None);
                ctx.push(entry);
                let m = self.elaborate(ctx, motive);
                ctx.pop();
                Arc::new(Expr::Rho {
                    proof: p,
                    name: name.clone(),
                    motive: m?,
                    target: self.elaborate(ctx, target)?,
                })
            }
            Expr::Phi {
                proof,
                typed,
                erasure,
            } => Arc::new(Expr::Phi {
                proof: self.elaborate(ctx, proof)?,
                typed: self.elaborate(ctx, typed)?,
                erasure: self.elaborate(ctx, erasure)?,
            }),
        })
    }

    // ---- conversion ----

    fn normal_erasure(&mut self, e: &Expr) -> TResult<PureTerm> {
        let mut budget = NormBudget::new(self.fuel);
        let r = normalize(&erase(self.env, e), &mut budget);
        self.steps += budget.steps_used();
        r.map_err(|BudgetExhausted { limit }| {
            self.err(
                ErrorCode::BudgetExhausted,
                format!("normalization did not finish within {limit} steps"),
            )
        })
    }

    /// Terms are equal when their erasures have the same normal form.
    pub fn conv_terms(&mut self, a: &Expr, b: &Expr) -> TResult<bool> {
        if a == b {
            return Ok(true);
        }
        Ok(self.normal_erasure(a)? == self.normal_erasure(b)?)
    }

    /// Weak head normal form of a type: beta at the head, and unfolding of
    /// type-level definitions when `unfold` is set.
    pub fn whnf(&self, e: &Arc<Expr>, unfold: bool) -> Arc<Expr> {
        let mut cur = e.clone();
        loop {
            let (head, args) = cur.spine();
            match &*head {
                Expr::Lam { body, .. } if !args.is_empty() => {
                    let b = instantiate(body, &args[0].1);
                    cur = Expr::apply_spine(b, &args[1..]);
                }
                Expr::Ref(n) if unfold => match self.env.get(n) {
                    Some(d) if d.level != Level::Term => {
                        cur = Expr::apply_spine(d.body.clone(), &args);
                    }
                    _ => return cur,
                },
                _ => return cur,
            }
        }
    }

    fn unfold_head(&self, e: &Arc<Expr>) -> Option<Arc<Expr>> {
        let (head, args) = e.spine();
        match &*head {
            Expr::Ref(n) => match self.env.get(n) {
                Some(d) if d.level != Level::Term => {
                    Some(self.whnf(&Expr::apply_spine(d.body.clone(), &args), false))
                }
                _ => None,
            },
            _ => None,
        }
    }

    /// Definitional equality, dispatching on level.
    pub fn conv(&mut self, ctx: &mut Context, a: &Arc<Expr>, b: &Arc<Expr>) -> TResult<bool> {
        if a == b {
            return Ok(true);
        }
        if self.level(ctx, a) == Level::Term && self.level(ctx, b) == Level::Term {
            return self.conv_terms(a, b);
        }
        self.conv_types(ctx, a, b)
    }

    fn conv_types(&mut self, ctx: &mut Context, a: &Arc<Expr>, b: &Arc<Expr>) -> TResult<bool> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || {
            self.conv_types_inner(ctx, a, b)
        })
    }

    fn conv_types_inner(
        &mut self,
        ctx: &mut Context,
        a: &Arc<Expr>,
        b: &Arc<Expr>,
    ) -> TResult<bool> {
        if a == b {
            return Ok(true);
        }
        let mut a = self.whnf(a, false);
        let mut b = self.whnf(b, false);
        loop {
            if a == b {
                return Ok(true);
            }
            let (ha, xs) = a.spine();
            let (hb, ys) = b.spine();
            // same definition applied: try the arguments before unfolding
            if let (Expr::Ref(m), Expr::Ref(n)) = (&*ha, &*hb) {
                if m == n && xs.len() == ys.len() && self.conv_spines(ctx, &xs, &ys)? {
                    return Ok(true);
                }
            }
            let ra = matches!(&*ha, Expr::Ref(n) if self.env.get(n).is_some_and(|d| d.level != Level::Term));
            let rb = matches!(&*hb, Expr::Ref(n) if self.env.get(n).is_some_and(|d| d.level != Level::Term));
            match (ra, rb) {
                (false, false) => break,
                (true, true) => {
                    // unfold the later definition first: it may mention the other
                    let (Expr::Ref(m), Expr::Ref(n)) = (&*ha, &*hb) else {
                        unreachable!()
                    };
                    if self.env.rank(m) >= self.env.rank(n) {
                        a = self.unfold_head(&a).unwrap();
                    } else {
                        b = self.unfold_head(&b).unwrap();
                    }
                }
                (true, false) => a = self.unfold_head(&a).unwrap(),
                (false, true) => b = self.unfold_head(&b).unwrap(),
            }
        }
        self.conv_structural(ctx, &a, &b)
    }

    fn conv_spines(
        &mut self,
        ctx: &mut Context,
        xs: &[(Mode, Arc<Expr>)],
        ys: &[(Mode, Arc<Expr>)],
    ) -> TResult<bool> {
        for ((m1, x), (m2, y)) in xs.iter().zip(ys) {
            if m1 != m2 || !self.conv(ctx, x, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn under<T>(
        &mut self,
        ctx: &mut Context,
        entry: Entry,
        f: impl FnOnce(&mut Self, &mut Context) -> T,
    ) -> T {
        ctx.push(entry);
        let r = f(self, ctx);
        ctx.pop();
        r
    }

    fn conv_structural(
        &mut self,
        ctx: &mut Context,
        a: &Arc<Expr>,
        b: &Arc<Expr>,
    ) -> TResult<bool> {
        match (&**a, &**b) {
            (Expr::SortStar, Expr::SortStar) | (Expr::SortBox, Expr::SortBox) => Ok(true),
            (
                Expr::Pi {
                    mode: m1,
                    name,
                    domain: d1,
                    body: b1,
                },
                Expr::Pi {
                    mode: m2,
                    domain: d2,
                    body: b2,
                    ..
                },
            ) => {
                if m1 != m2 || !self.conv(ctx, d1, d2)? {
                    return Ok(false);
                }
                let entry = self.typed_entry(ctx, name, d1, *m1 == Mode::Erased);
                self.under(ctx, entry, |s, ctx| s.conv(ctx, b1, b2))
            }
            (
                Expr::Iota {
                    name,
                    left: l1,
                    right: r1,
                },
                Expr::Iota {
                    left: l2,
                    right: r2,
                    ..
                },
            ) => {
                if !self.conv(ctx, l1, l2)? {
                    return Ok(false);
                }
                let entry = self.typed_entry(ctx, name, l1, false);
                self.under(ctx, entry, |s, ctx| s.conv(ctx, r1, r2))
            }
            (Expr::Eq(a1, b1), Expr::Eq(a2, b2)) => {
                Ok(self.conv_terms(a1, a2)? && self.conv_terms(b1, b2)?)
            }
            (
                Expr::Lam {
                    mode: m1,
                    name,
                    annot,
                    body: b1,
                },
                Expr::Lam {
                    mode: m2, body: b2, ..
                },
            ) => {
                if m1 != m2 {
                    return Ok(false);
                }
                let entry = self.untyped_entry(ctx, name, annot.as_ref());
                self.under(ctx, entry, |s, ctx| s.conv(ctx, b1, b2))
            }
            _ => {
                let (ha, xs) = a.spine();
                let (hb, ys) = b.spine();
                if xs.is_empty() || xs.len() != ys.len() {
                    return Ok(false);
                }
                let heads = match (&*ha, &*hb) {
                    (Expr::Var(i, _), Expr::Var(j, _)) => i == j,
                    (Expr::Ref(m), Expr::Ref(n)) => m == n,
                    _ => false,
                };
                Ok(heads && self.conv_spines(ctx, &xs, &ys)?)
            }
        }
    }

    fn expect_conv(
        &mut self,
        ctx: &mut Context,
        expected: &Arc<Expr>,
        actual: &Arc<Expr>,
        what: &str,
    ) -> TResult<()> {
        if self.conv(ctx, expected, actual)? {
            Ok(())
        } else {
            Err(self.err_with(ErrorCode::NotConvertible, what, ctx, expected, actual))
        }
    }

    // ---- classification ----

    /// Infer a classifier and sort-check it: returns the elaborated
    /// expression and `★` or `□`.
    fn infer_sort(&mut self, ctx: &mut Context, e: &Arc<Expr>) -> TResult<(Arc<Expr>, Arc<Expr>)> {
        let (e2, s) = self.infer(ctx, e)?;
        let s = self.whnf(&s, true);
        if !is_sort(&s) {
            return Err(self.err(
                ErrorCode::SortError,
                format!("`{}` is not a type or kind", self.show(ctx, e)),
            ));
        }
        Ok((e2, s))
    }

    pub fn infer(&mut self, ctx: &mut Context, e: &Arc<Expr>) -> TResult<(Arc<Expr>, Arc<Expr>)> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.infer_inner(ctx, e))
    }

    fn infer_inner(&mut self, ctx: &mut Context, e: &Arc<Expr>) -> TResult<(Arc<Expr>, Arc<Expr>)> {
        match &**e {
            Expr::Var(i, n) => {
                if *i >= ctx.len() {
                    return Err(self.err(ErrorCode::UnboundVar, format!("unbound variable `{n}`")));
                }
                match &ctx.lookup(*i).classifier {
                    Some(c) => Ok((e.clone(), shift(c, i + 1))),
                    None => Err(self.err(
                        ErrorCode::SortError,
                        format!("cannot classify `{n}`: its binder has no classifier"),
                    )),
                }
            }
            Expr::Ref(n) => self.reference(ctx, n),
            Expr::SortStar => Ok((e.clone(), Arc::new(Expr::SortBox))),
            Expr::SortBox => Err(self.err(ErrorCode::SortError, "□ has no classifier")),
            Expr::Pi {
                mode,
                name,
                domain,
                body,
            } => {
                let (d, s1) = self.infer_sort(ctx, domain)?;
                let entry = self.typed_entry(ctx, name, &d, *mode == Mode::Erased);
                let (b, s2) = self.under(ctx, entry, |c, ctx| c.infer_sort(ctx, body))?;
                if *mode == Mode::Explicit
                    && matches!(*s1, Expr::SortBox)
                    && matches!(*s2, Expr::SortStar)
                {
                    return Err(self.err(
                        ErrorCode::SortError,
                        "a function type over types must be written with All",
                    ));
                }
                Ok((Expr::pi(*mode, name.clone(), d, b), s2))
            }
            Expr::Lam {
                mode,
                name,
                annot: Some(a),
                body,
            } => {
                let (a, _) = self.infer_sort(ctx, a)?;
                let entry = self.typed_entry(ctx, name, &a, *mode == Mode::Erased);
                let (b, bt) = self.under(ctx, entry, |c, ctx| {
                    let r = c.infer(ctx, body)?;
                    c.erased_side_condition(ctx, *mode, &r.0, name)?;
                    Ok::<_, TypeError>(r)
                })?;
                Ok((
                    Expr::lam(*mode, name.clone(), Some(a.clone()), b),
                    Expr::pi(*mode, name.clone(), a, bt),
                ))
            }
            Expr::Lam { name, .. } => Err(self.err(
                ErrorCode::SortError,
                format!("cannot infer the type of an unannotated lambda over `{name}`"),
            )),
            Expr::App { mode, fun, arg } => {
                // a redex whose lambda is unannotated takes the argument's type
                if let (
                    Mode::Explicit,
                    Expr::Lam {
                        mode: Mode::Explicit,
                        name,
                        annot: None,
                        body,
                    },
                ) = (mode, &**fun)
                {
                    let (_, at) = self.infer(ctx, arg)?;
                    let fun = Expr::lam(Mode::Explicit, name.clone(), Some(at), body.clone());
                    return self.infer(ctx, &Expr::app(Mode::Explicit, fun, arg.clone()));
                }
                let (f, ft) = self.infer(ctx, fun)?;
                let ft = self.whnf(&ft, true);
                let Expr::Pi {
                    mode: pmode,
                    domain,
                    body,
                    ..
                } = &*ft
                else {
                    return Err(self.err(
                        ErrorCode::NotAFunction,
                        format!(
                            "`{}` is applied but has type `{}`",
                            self.show(ctx, &f),
                            self.show(ctx, &ft)
                        ),
                    ));
                };
                let mode = match (*mode, *pmode) {
                    (m, p) if m == p => m,
                    // type application written without the dash
                    (Mode::Explicit, Mode::Erased) if self.level(ctx, domain) == Level::Kind => {
                        Mode::Erased
                    }
                    (m, _) => {
                        let what = if m == Mode::Erased {
                            "erased"
                        } else {
                            "explicit"
                        };
                        return Err(self.err_with(
                            ErrorCode::AppModeMismatch,
                            format!("{what} application of `{}`", self.show(ctx, &f)),
                            ctx,
                            &Expr::Pi {
                                mode: m,
                                name: name("_"),
                                domain: domain.clone(),
                                body: body.clone(),
                            },
                            &ft,
                        ));
                    }
                };
                let a = self.check(ctx, arg, domain)?;
                Ok((Expr::app(mode, f, a.clone()), instantiate(body, &a)))
            }
            Expr::Iota { name, left, right } => {
                let (l, s1) = self.infer_sort(ctx, left)?;
                let entry = self.typed_entry(ctx, name, &l, false);
                let (r, s2) = self.under(ctx, entry, |c, ctx| c.infer_sort(ctx, right))?;
                if !matches!(*s1, Expr::SortStar) || !matches!(*s2, Expr::SortStar) {
                    return Err(self.err(
                        ErrorCode::SortError,
                        "intersection components must be types",
                    ));
                }
                Ok((
                    Arc::new(Expr::Iota {
                        name: name.clone(),
                        left: l,
                        right: r,
                    }),
                    star(),
                ))
            }
            Expr::Proj(w, x) => {
                let (x, t) = self.infer(ctx, x)?;
                let t = self.whnf(&t, true);
                let Expr::Iota { left, right, .. } = &*t else {
                    return Err(self.err(
                        ErrorCode::NotAnIntersection,
                        format!(
                            "projection from `{}` of type `{}`",
                            self.show(ctx, &x),
                            self.show(ctx, &t)
                        ),
                    ));
                };
                let first = Arc::new(Expr::Proj(Which::First, x.clone()));
                match w {
                    Which::First => Ok((first, left.clone())),
                    Which::Second => Ok((
                        Arc::new(Expr::Proj(Which::Second, x)),
                        instantiate(right, &first),
                    )),
                }
            }
            Expr::Eq(l, r) => {
                let l = self.elaborate(ctx, l)?;
                let r = self.elaborate(ctx, r)?;
                Ok((Arc::new(Expr::Eq(l, r)), star()))
            }
            Expr::Sym(q) => {
                let (q, t) = self.infer(ctx, q)?;
                let (a, b) = self.equation(ctx, &q, &t)?;
                Ok((Arc::new(Expr::Sym(q)), Arc::new(Expr::Eq(b, a))))
            }
            Expr::Phi {
                proof,
                typed,
                erasure,
            } => {
                let (t, ty) = self.infer(ctx, typed)?;
                let t2 = self.elaborate(ctx, erasure)?;
                let q = self.check(ctx, proof, &Arc::new(Expr::Eq(t.clone(), t2.clone())))?;
                Ok((
                    Arc::new(Expr::Phi {
                        proof: q,
                        typed: t,
                        erasure: t2,
                    }),
                    ty,
                ))
            }
            Expr::Rho {
                proof,
                name,
                motive,
                target,
            } => {
                let (q, t) = self.infer(ctx, proof)?;
                let (a, b) = self.equation(ctx, &q, &t)?;
                let entry = self.untyped_entry(ctx, name, None);
                ctx.push(entry);
                let m = self.elaborate(ctx, motive);
                ctx.pop();
                let m = m?;
                let t = self.check(ctx, target, &instantiate(&m, &a))?;
                Ok((
                    Arc::new(Expr::Rho {
                        proof: q,
                        name: name.clone(),
                        motive: m.clone(),
                        target: t,
                    }),
                    instantiate(&m, &b),
                ))
            }
            Expr::Pair(..) => Err(self.err(
                ErrorCode::SortError,
                "cannot infer the type of a pair; it needs an intersection type to check against",
            )),
            Expr::Beta(_) => Err(self.err(
                ErrorCode::SortError,
                "cannot infer the type of beta; it needs an equation to check against",
            )),
        }
    }

    fn equation(&self, ctx: &Context, q: &Expr, t: &Arc<Expr>) -> TResult<(Arc<Expr>, Arc<Expr>)> {
        match &*self.whnf(t, true) {
            Expr::Eq(a, b) => Ok((a.clone(), b.clone())),
            other => Err(self.err(
                ErrorCode::NotAnEquation,
                format!(
                    "`{}` has type `{}`, which is not an equation",
                    self.show(ctx, q),
                    self.show(ctx, other)
                ),
            )),
        }
    }

    /// The erased-abstraction rule: the bound variable (index 0 of `ctx`)
    /// must not survive erasure of a term-level body.
    fn erased_side_condition(
        &self,
        ctx: &mut Context,
        mode: Mode,
        body: &Expr,
        n: &Name,
    ) -> TResult<()> {
        if mode == Mode::Erased && self.level(ctx, body) == Level::Term && free_in_erasure(body, 0)
        {
            return Err(self.err(
                ErrorCode::ErasedVarUsed,
                format!("erased variable `{n}` occurs in the erasure of the body"),
            ));
        }
        Ok(())
    }

    pub fn check(
        &mut self,
        ctx: &mut Context,
        e: &Arc<Expr>,
        goal: &Arc<Expr>,
    ) -> TResult<Arc<Expr>> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || {
            self.check_inner(ctx, e, goal)
        })
    }

    fn check_inner(
        &mut self,
        ctx: &mut Context,
        e: &Arc<Expr>,
        goal: &Arc<Expr>,
    ) -> TResult<Arc<Expr>> {
        let g = self.whnf(goal, true);
        match (&**e, &*g) {
            (
                Expr::Lam {
                    mode,
                    name,
                    annot,
                    body,
                },
                Expr::Pi {
                    mode: pmode,
                    domain,
                    body: cod,
                    ..
                },
            ) if mode == pmode => {
                if let Some(a) = annot {
                    let (a, _) = self.infer_sort(ctx, a)?;
                    self.expect_conv(
                        ctx,
                        domain,
                        &a,
                        "lambda annotation does not match the expected domain",
                    )?;
                }
                let entry = self.typed_entry(ctx, name, domain, *mode == Mode::Erased);
                let b = self.under(ctx, entry, |c, ctx| {
                    let b = c.check(ctx, body, cod)?;
                    c.erased_side_condition(ctx, *mode, &b, name)?;
                    Ok::<_, TypeError>(b)
                })?;
                Ok(Expr::lam(*mode, name.clone(), Some(domain.clone()), b))
            }
            // implicit abstraction inserted in front of an introduction form
            (
                Expr::Lam {
                    mode: Mode::Explicit,
                    ..
                }
                | Expr::Beta(_)
                | Expr::Pair(..),
                Expr::Pi {
                    mode: Mode::Erased,
                    name,
                    domain,
                    body: cod,
                },
            ) => {
                let entry = self.typed_entry(ctx, name, domain, true);
                let b = self.under(ctx, entry, |c, ctx| {
                    let b = c.check(ctx, &shift(e, 1), cod)?;
                    c.erased_side_condition(ctx, Mode::Erased, &b, name)?;
                    Ok::<_, TypeError>(b)
                })?;
                Ok(Expr::lam(
                    Mode::Erased,
                    name.clone(),
                    Some(domain.clone()),
                    b,
                ))
            }
            (Expr::Lam { mode, .. }, Expr::Pi { .. }) => Err(self.err_with(
                ErrorCode::AppModeMismatch,
                format!(
                    "{} abstraction checked against a function type of the other mode",
                    if *mode == Mode::Erased {
                        "erased"
                    } else {
                        "explicit"
                    }
                ),
                ctx,
                &g,
                e,
            )),
            (Expr::Lam { annot: None, .. }, _) => Err(self.err_with(
                ErrorCode::NotAFunction,
                "lambda checked against a non-function type",
                ctx,
                &g,
                e,
            )),
            (Expr::Pair(l, r), Expr::Iota { left, right, .. }) => {
                let l = self.check(ctx, l, left)?;
                let r = self.check(ctx, r, &instantiate(right, &l))?;
                if !self.conv_terms(&l, &r)? {
                    return Err(self.err_with(
                        ErrorCode::IotaComponentsDiffer,
                        "the components of an intersection must erase to the same term",
                        ctx,
                        &l,
                        &r,
                    ));
                }
                Ok(Arc::new(Expr::Pair(l, r)))
            }
            (Expr::Pair(..), _) => Err(self.err_with(
                ErrorCode::NotAnIntersection,
                "pair checked against a type that is not an intersection",
                ctx,
                &g,
                e,
            )),
            (Expr::Beta(h), Expr::Eq(a, b)) => {
                if !self.conv_terms(a, b)? {
                    return Err(self.err_with(
                        ErrorCode::BetaSidesDiffer,
                        "the sides of the equation are not definitionally equal",
                        ctx,
                        a,
                        b,
                    ));
                }
                let h = match h {
                    Some(h) => Some(self.elaborate(ctx, h)?),
                    None => None,
                };
                Ok(Arc::new(Expr::Beta(h)))
            }
            (Expr::Beta(_), _) => Err(self.err(
                ErrorCode::NotAnEquation,
                format!(
                    "beta checked against `{}`, which is not an equation",
                    self.show(ctx, &g)
                ),
            )),
            (Expr::Sym(q), Expr::Eq(a, b)) => {
                let flipped = Arc::new(Expr::Eq(b.clone(), a.clone()));
                Ok(Arc::new(Expr::Sym(self.check(ctx, q, &flipped)?)))
            }
            _ => {
                let (e2, t) = self.infer(ctx, e)?;
                if !self.conv(ctx, goal, &t)? {
                    return Err(self.err_with(
                        ErrorCode::NotConvertible,
                        format!("`{}` does not have the expected type", self.show(ctx, &e2)),
                        ctx,
                        goal,
                        &t,
                    ));
                }
                Ok(e2)
            }
        }
    }
}

// ---- modules ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Checked,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefReport {
    pub module: String,
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<TypeError>,
    pub steps: u64,
    pub millis: u128,
}

/// Module-level failures other than type errors in a definition.
#[derive(Debug, Error)]
pub enum ModuleError {
    #[error("{span}: `{name}` is already defined")]
    Duplicate { name: Name, span: SourceSpan },
    #[error("{span}: module parameter `{name}`: {source}")]
    Param {
        name: Name,
        span: SourceSpan,
        source: TypeError,
    },
}

/// Check every definition of `m` in order, adding each to `env`. Stops at
/// the first failing definition; reports cover all definitions attempted.
/// Context holding the parameters of `m`, ready for checking its definitions.
pub fn module_context(
    m: &ModuleUnit,
    env: &Env,
    fuel: u64,
) -> Result<(Context, Vec<Level>), ModuleError> {
    let mut ctx = Context::default();
    let mut param_levels = Vec::new();
    for p in &m.params {
        let mut c = Checker::new(env, fuel);
        c.location = p.span.clone();
        let (cl, _) =
            c.infer_sort(&mut ctx, &p.classifier)
                .map_err(|source| ModuleError::Param {
                    name: p.name.clone(),
                    span: p.span.clone(),
                    source,
                })?;
        let entry = c.typed_entry(&mut ctx, &p.name, &cl, p.erased);
        param_levels.push(entry.level);
        ctx.push(entry);
    }
    ctx.module = Some((m.name.clone(), m.params.len()));
    Ok((ctx, param_levels))
}

/// Check every definition of `m` in order, adding each to `env`. Stops at
/// the first failing definition; reports cover all definitions attempted.
pub fn check_module(
    m: &ModuleUnit,
    env: &mut Env,
    fuel: u64,
) -> Result<Vec<DefReport>, ModuleError> {
    let (mut ctx, param_levels) = module_context(m, env, fuel)?;

    let mut reports = Vec::new();
    for d in &m.defs {
        if env.contains(&d.name) {
            return Err(ModuleError::Duplicate {
                name: d.name.clone(),
                span: d.span.clone(),
            });
        }
        let start = Instant::now();
        let mut c = Checker::new(env, fuel);
        c.location = d.span.clone();
        let result = check_definition(&mut c, &mut ctx, m, d, &param_levels);
        let steps = c.steps;
        let millis = start.elapsed().as_millis();
        let mut report = DefReport {
            module: m.name.to_string(),
            name: d.name.to_string(),
            status: Status::Checked,
            error: None,
            steps,
            millis,
        };
        match result {
            Ok(def) => {
                env.insert(def);
                reports.push(report);
            }
            Err(e) => {
                report.status = Status::Failed;
                report.error = Some(e);
                reports.push(report);
                break;
            }
        }
    }
    Ok(reports)
}

fn check_definition(
    c: &mut Checker,
    ctx: &mut Context,
    m: &ModuleUnit,
    d: &crate::syntax::Definition,
    param_levels: &[Level],
) -> TResult<GlobalDef> {
    let (classifier, sort) = c.infer_sort(ctx, &d.classifier)?;
    let body = c.check(ctx, &d.body, &classifier)?;
    let level = if matches!(*sort, Expr::SortBox) {
        Level::Type
    } else {
        Level::Term
    };
    let n = ctx.len();
    if level == Level::Term {
        for (k, p) in m.params.iter().enumerate() {
            if p.erased && free_in_erasure(&body, n - 1 - k) {
                return Err(c.err(
                    ErrorCode::ErasedVarUsed,
                    format!(
                        "erased module parameter `{}` occurs in the erasure of `{}`",
                        p.name, d.name
                    ),
                ));
            }
        }
    }
    let param_modes: Vec<Mode> = m
        .params
        .iter()
        .zip(param_levels)
        .map(|(p, l)| {
            if p.erased || (level == Level::Term && *l == Level::Type) {
                Mode::Erased
            } else {
                Mode::Explicit
            }
        })
        .collect();
    let mut closed_ty = classifier;
    let mut closed_body = body;
    for ((k, mode), p) in param_modes
        .iter()
        .enumerate()
        .rev()
        .zip(m.params.iter().rev())
    {
        let cl = ctx.entries[k]
            .classifier
            .clone()
            .expect("parameters are classified");
        closed_ty = Expr::pi(*mode, p.name.clone(), cl.clone(), closed_ty);
        closed_body = Expr::lam(*mode, p.name.clone(), Some(cl), closed_body);
    }
    let erased = Arc::new(erase(c.env, &closed_body));
    Ok(GlobalDef {
        name: d.name.clone(),
        classifier: closed_ty,
        body: closed_body,
        level,
        erased,
        module: m.name.clone(),
        param_modes,
        span: d.span.clone(),
    })
}
