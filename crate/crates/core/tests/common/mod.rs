//! Generators and checks shared by the property suite and the acceptance
//! harness.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use cdle_core::erase::erase;
use cdle_core::load::Loader;
use cdle_core::norm::{normalize, NormBudget, DEFAULT_FUEL};
use cdle_core::parser::{parse_expr, parse_module};
use cdle_core::pretty::{print_expr, print_module, Style};
use cdle_core::pure::PureTerm;
use cdle_core::syntax::{free_in_erasure, name, substitute, Expr, Mode, Name, Which};
use cdle_core::typecheck::Level;

pub fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub const FILES: [&str; 8] = [
    "prelude.cdl",
    "fixind.cdl",
    "rcoend.cdl",
    "rext.cdl",
    "cov.cdl",
    "nat.cdl",
    "programs.cdl",
    "stretch.cdl",
];

pub fn loaded_corpus() -> Loader {
    let mut l = Loader::new(corpus(), DEFAULT_FUEL);
    for f in FILES {
        l.load(&corpus().join(f)).unwrap();
    }
    assert!(l.modules().all(|m| m.ok()));
    l
}

// ---- random well-scoped expressions ----

/// Expression skeleton; variable choices are resolved against the binders in
/// scope when the skeleton is turned into an expression.
#[derive(Clone, Debug)]
enum Shape {
    Var(usize),
    Lam(bool, Box<Shape>, Box<Shape>),
    App(bool, Box<Shape>, Box<Shape>),
    Pair(Box<Shape>, Box<Shape>),
    Proj(bool, Box<Shape>),
    Beta(Option<Box<Shape>>),
    Sym(Box<Shape>),
    Phi(Box<Shape>, Box<Shape>, Box<Shape>),
    Rho(Box<Shape>, Box<Shape>, Box<Shape>),
    Pi(bool, Box<Shape>, Box<Shape>),
    Iota(Box<Shape>, Box<Shape>),
    Eq(Box<Shape>, Box<Shape>),
}

fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![any::<usize>().prop_map(Shape::Var), Just(Shape::Beta(None))];
    leaf.prop_recursive(5, 48, 3, |s| {
        let b = move || s.clone().prop_map(Box::new);
        prop_oneof![
            (any::<bool>(), b(), b()).prop_map(|(e, a, t)| Shape::Lam(e, a, t)),
            (any::<bool>(), b(), b()).prop_map(|(e, f, a)| Shape::App(e, f, a)),
            (b(), b()).prop_map(|(a, c)| Shape::Pair(a, c)),
            (any::<bool>(), b()).prop_map(|(w, a)| Shape::Proj(w, a)),
            b().prop_map(|a| Shape::Beta(Some(a))),
            b().prop_map(Shape::Sym),
            (b(), b(), b()).prop_map(|(p, t, e)| Shape::Phi(p, t, e)),
            (b(), b(), b()).prop_map(|(p, m, t)| Shape::Rho(p, m, t)),
            (any::<bool>(), b(), b()).prop_map(|(e, d, t)| Shape::Pi(e, d, t)),
            (b(), b()).prop_map(|(l, r)| Shape::Iota(l, r)),
            (b(), b()).prop_map(|(l, r)| Shape::Eq(l, r)),
        ]
    })
}

const NAMES: [&str; 4] = ["x", "y", "z", "w"];

/// `scope[i]` tells whether the binder `i` levels up from the root survives
/// erasure. In relevant positions only surviving binders are referenced and
/// only term formers are produced, so erasure never needs a dangling variable.
fn build(s: &Shape, scope: &mut Vec<bool>, relevant: bool) -> Arc<Expr> {
    let var = |scope: &Vec<bool>, k: usize| -> Option<Arc<Expr>> {
        let ok: Vec<usize> = (0..scope.len())
            .filter(|&l| scope[l] || !relevant)
            .collect();
        if ok.is_empty() {
            return None;
        }
        let level = ok[k % ok.len()];
        let index = scope.len() - 1 - level;
        Some(Expr::var(index, &name(NAMES[level % NAMES.len()])))
    };
    let under = |scope: &mut Vec<bool>, kept: bool, s: &Shape, relevant: bool| {
        scope.push(kept);
        let e = build(s, scope, relevant);
        scope.pop();
        e
    };
    let bname = |scope: &Vec<bool>| name(NAMES[scope.len() % NAMES.len()]);
    match s {
        Shape::Var(k) => var(scope, *k).unwrap_or_else(|| Arc::new(Expr::Beta(None))),
        Shape::Lam(erased, a, t) => {
            let mode = if *erased {
                Mode::Erased
            } else {
                Mode::Explicit
            };
            let annot = if *erased {
                Some(build(a, scope, false))
            } else {
                None
            };
            let n = bname(scope);
            let body = under(scope, !erased, t, relevant);
            Expr::lam(mode, n, annot, body)
        }
        Shape::App(erased, f, a) => {
            let mode = if *erased {
                Mode::Erased
            } else {
                Mode::Explicit
            };
            let f = build(f, scope, relevant);
            let a = build(a, scope, relevant && !erased);
            Expr::app(mode, f, a)
        }
        Shape::Pair(a, c) => Arc::new(Expr::Pair(
            build(a, scope, relevant),
            build(c, scope, false),
        )),
        Shape::Proj(w, a) => Arc::new(Expr::Proj(
            if *w { Which::First } else { Which::Second },
            build(a, scope, relevant),
        )),
        Shape::Beta(h) => Arc::new(Expr::Beta(h.as_ref().map(|h| build(h, scope, relevant)))),
        Shape::Sym(a) => Arc::new(Expr::Sym(build(a, scope, relevant))),
        Shape::Phi(p, t, e) => Arc::new(Expr::Phi {
            proof: build(p, scope, false),
            typed: build(t, scope, false),
            erasure: build(e, scope, relevant),
        }),
        Shape::Rho(p, m, t) => {
            let proof = build(p, scope, false);
            let n = bname(scope);
            let motive = under(scope, false, m, false);
            Arc::new(Expr::Rho {
                proof,
                name: n,
                motive,
                target: build(t, scope, relevant),
            })
        }
        Shape::Pi(..) | Shape::Iota(..) | Shape::Eq(..) if relevant => Expr::lam(
            Mode::Explicit,
            bname(scope),
            None,
            under(scope, true, &Shape::Var(0), true),
        ),
        Shape::Pi(erased, d, t) => {
            let mode = if *erased {
                Mode::Erased
            } else {
                Mode::Explicit
            };
            let d = build(d, scope, false);
            let n = bname(scope);
            Expr::pi(mode, n, d, under(scope, true, t, false))
        }
        Shape::Iota(l, r) => {
            let l = build(l, scope, false);
            let n = bname(scope);
            Arc::new(Expr::Iota {
                name: n,
                left: l,
                right: under(scope, true, r, false),
            })
        }
        Shape::Eq(l, r) => Arc::new(Expr::Eq(build(l, scope, false), build(r, scope, false))),
    }
}

/// A term over `free` free variables, all of them surviving erasure.
pub fn term(free: usize) -> impl Strategy<Value = Arc<Expr>> {
    shape().prop_map(move |s| build(&s, &mut vec![true; free], true))
}

/// Pure terms over at most `free` free variables.
pub fn pure_term(free: usize) -> impl Strategy<Value = PureTerm> {
    term(free).prop_map(|e| erase(&(), &e))
}

// ---- properties ----

pub fn commutes(e: &Arc<Expr>, v: &Arc<Expr>) -> Result<(), TestCaseError> {
    let lhs = erase(&(), &substitute(e, 0, v));
    let rhs = erase(&(), e).substitute(0, &erase(&(), v));
    prop_assert_eq!(lhs, rhs);
    Ok(())
}

/// Normal forms are reached in the same number of steps every time and are
/// fixed points; terms that exhaust the budget are skipped.
pub fn normalizes_stably(t: &PureTerm) -> Result<(), TestCaseError> {
    let mut b1 = NormBudget::new(20_000);
    if let Ok(n) = normalize(t, &mut b1) {
        let mut b2 = NormBudget::new(20_000);
        prop_assert_eq!(normalize(t, &mut b2).unwrap(), n.clone());
        prop_assert_eq!(b1.steps_used(), b2.steps_used());
        let mut b3 = NormBudget::new(20_000);
        prop_assert_eq!(normalize(&n, &mut b3).unwrap(), n);
        prop_assert_eq!(b3.steps_used(), 0);
    }
    Ok(())
}

pub fn reparses(e: &Arc<Expr>) -> Result<(), TestCaseError> {
    let scope: Vec<Name> = vec![name("a"), name("b")];
    let text = print_expr(e, &scope, Style::default());
    let back =
        parse_expr(&text, &scope).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
    prop_assert!(
        *back == **e,
        "{} reparsed as {}",
        text,
        print_expr(&back, &scope, Style::default())
    );
    Ok(())
}

// ---- the shipped corpus ----

/// Number of term definitions checked.
pub fn corpus_normalizes_stably(l: &Loader) -> usize {
    let mut n = 0;
    for d in l.env.defs().filter(|d| d.level == Level::Term) {
        let mut b1 = NormBudget::new(DEFAULT_FUEL);
        let nf = normalize(&d.erased, &mut b1).unwrap();
        let mut b2 = NormBudget::new(DEFAULT_FUEL);
        assert_eq!(normalize(&d.erased, &mut b2).unwrap(), nf, "{}", d.name);
        assert_eq!(b1.steps_used(), b2.steps_used(), "{}", d.name);
        let mut b3 = NormBudget::new(DEFAULT_FUEL);
        assert_eq!(normalize(&nf, &mut b3).unwrap(), nf, "{}", d.name);
        assert_eq!(b3.steps_used(), 0, "{}", d.name);
        assert!(nf.is_closed(), "{}", d.name);
        n += 1;
    }
    n
}

/// Number of definitions compared.
pub fn corpus_round_trips() -> usize {
    let mut n = 0;
    for f in FILES {
        let text = std::fs::read_to_string(corpus().join(f)).unwrap();
        let m = parse_module(&text, f).unwrap();
        for unicode in [false, true] {
            let printed = print_module(&m, Style { unicode });
            let back = parse_module(&printed, f).unwrap_or_else(|e| panic!("{f}: {e}\n{printed}"));
            assert_eq!(back.name, m.name);
            assert_eq!(back.imports, m.imports);
            assert_eq!(back.params.len(), m.params.len());
            for (p, q) in m.params.iter().zip(&back.params) {
                assert!(p.name == q.name && p.erased == q.erased && *p.classifier == *q.classifier);
            }
            assert_eq!(back.defs.len(), m.defs.len());
            for (d, e) in m.defs.iter().zip(&back.defs) {
                assert_eq!(d.name, e.name);
                assert!(
                    *d.classifier == *e.classifier,
                    "{f}: classifier of {}",
                    d.name
                );
                assert!(*d.body == *e.body, "{f}: body of {}", d.name);
                n += 1;
            }
        }
    }
    n
}

/// Number of (definition, erased parameter) pairs checked.
pub fn erased_parameters_absent(l: &Loader) -> usize {
    let mut checked = 0;
    for d in l.env.defs() {
        let mut body = d.body.clone();
        for (k, mode) in d.param_modes.iter().enumerate() {
            let Expr::Lam {
                mode: m, body: b, ..
            } = &*body
            else {
                panic!("{} is not closed over its parameters", d.name)
            };
            assert_eq!(m, mode);
            if *mode == Mode::Erased {
                assert!(!free_in_erasure(b, 0), "{}: parameter {k} occurs", d.name);
                checked += 1;
            }
            body = b.clone();
        }
        if d.level == Level::Term {
            assert!(d.erased.is_closed(), "{}", d.name);
        }
    }
    checked
}
