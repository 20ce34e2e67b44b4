//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so that the lines appear in order and undecorated.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};

use cdle_core::cli;
use cdle_core::corpus::{erase_query, normalize_expr, parse_query, query_context};
use cdle_core::erase::identity;
use cdle_core::load::Loader;
use cdle_core::norm::DEFAULT_FUEL;
use cdle_core::parser::parse_module;
use cdle_core::pretty::{print_expr, Style};
use cdle_core::syntax::{Expr, Name};
use cdle_core::typecheck::{check_module, Checker, Env, ErrorCode, Level};

use common::*;

fn cdlec(args: &[&str]) -> (i32, String) {
    let c = corpus().display().to_string();
    let mut argv = vec!["cdlec", "--corpus", c.as_str()];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(argv, &mut out, &mut err);
    let mut text = String::from_utf8(out).unwrap();
    text.push_str(&String::from_utf8(err).unwrap());
    (code, text)
}

fn file(f: &str) -> String {
    corpus().join(f).display().to_string()
}

fn within(limit: Duration, start: Instant, what: &str) {
    let t = start.elapsed();
    assert!(t < limit, "{what} took {t:?}, limit {limit:?}");
}

// ---- independent oracles, in ordinary arithmetic ----

fn fib(n: u64) -> u64 {
    let (mut a, mut b) = (0, 1);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Unrolling of `div 0 m = 0; div (suc r) m = if suc r < m then 0 else
/// suc (div (r - pred m) m)` with `pred 0 = 0` and truncated subtraction.
fn div(n: u64, m: u64) -> u64 {
    if n == 0 || n < m {
        0
    } else {
        1 + div((n - 1).saturating_sub(m.saturating_sub(1)), m)
    }
}

fn catalan(n: usize) -> u64 {
    let mut c = vec![1u64];
    for k in 0..n {
        c.push((0..=k).map(|i| c[i] * c[k - i]).sum());
    }
    c[n]
}

// ---- criteria ----

fn tier1() -> String {
    let start = Instant::now();
    let (code, out) = cdlec(&["validate", "--tiers", "1"]);
    assert_eq!(code, 0, "{out}");
    within(Duration::from_secs(60), start, "validate --tiers 1");
    format!("{} in {:.2?}", out.lines().last().unwrap(), start.elapsed())
}

/// Strip leading binders off an equation statement, returning the binder
/// names and both sides printed in their scope.
fn statement(params: &[Name], classifier: &Expr) -> (Vec<Name>, String, String) {
    let mut scope = params.to_vec();
    let mut e = classifier;
    while let Expr::Pi { name, body, .. } = e {
        scope.push(name.clone());
        e = body;
    }
    let Expr::Eq(l, r) = e else {
        panic!("not an equation")
    };
    let show = |x: &Expr| print_expr(x, &scope, Style::default());
    (scope[params.len()..].to_vec(), show(l), show(r))
}

fn tier2() -> String {
    let start = Instant::now();
    let (code, out) = cdlec(&["validate", "--tiers", "2"]);
    assert_eq!(code, 0, "{out}");
    let text = std::fs::read_to_string(corpus().join("cov.cdl")).unwrap();
    let m = parse_module(&text, "cov.cdl").unwrap();
    let params: Vec<Name> = m.params.iter().map(|p| p.name.clone()).collect();
    let mut confirmed = Vec::new();
    for n in ["outCVEq", "lambekCV1", "cancel", "indCancel"] {
        let d = m.defs.iter().find(|d| d.name.as_ref() == n).unwrap();
        assert!(
            matches!(*d.body, Expr::Beta(None)),
            "{n} is not proved by a bare β"
        );
        let (_, l, r) = statement(&params, &d.classifier);
        let (code, out) = cdlec(&["eq", &file("cov.cdl"), &l, &r]);
        assert_eq!((code, out.trim()), (0, "EQUAL"), "{n}: {l} ≃ {r}");
        confirmed.push(n);
    }
    let l2 = m
        .defs
        .iter()
        .find(|d| d.name.as_ref() == "lambekCV2")
        .unwrap();
    assert!(
        !matches!(*l2.body, Expr::Beta(_)),
        "lambekCV2 should not be a β proof"
    );
    let (_, l, r) = statement(&params, &l2.classifier);
    let (_, out) = cdlec(&["eq", &file("cov.cdl"), &l, &r]);
    assert_eq!(out.trim(), "NOT-EQUAL", "lambekCV2 is propositional only");
    within(Duration::from_secs(60), start, "tier 2");
    format!(
        "{} = β and eq-confirmed; lambekCV2 checked by ρ; {:.2?}",
        confirmed.join(", "),
        start.elapsed()
    )
}

fn erasure() -> String {
    let witnesses = [
        "elimId ·Unit ·Unit -(trivIdExt ·Unit)",
        "elimId ·NatCV ·NatCV -(intrId ·NatCV ·NatCV (λ n. n) -β)",
        "elimId ·(NF NatCV) ·(NF NatCV) -(nfimap ·NatCV ·NatCV (trivIdExt ·NatCV))",
        "elimId ·Bool ·Bool -(compose ·Bool ·Bool ·Bool (trivIdExt ·Bool) (trivIdExt ·Bool))",
        "Λ A : ★. Λ B : ★. Λ c : Id ·A ·B. elimId ·A ·B -c",
    ];
    let mut l = Loader::new(corpus(), DEFAULT_FUEL);
    l.load(&corpus().join("programs.cdl")).unwrap();
    for w in witnesses {
        let mut ctx = query_context(&l, None).unwrap();
        let e = parse_query(&l, &mut ctx, w, false).unwrap();
        assert_eq!(erase_query(&l, &mut ctx, &e).unwrap(), identity(), "{w}");
        let (code, out) = cdlec(&["erase", &file("programs.cdl"), w]);
        assert_eq!((code, out.trim()), (0, "lam x . x"), "{w}");
    }
    format!("{} witnesses erase to λ x. x", witnesses.len())
}

fn open_equation() -> String {
    let (code, out) = cdlec(&[
        "eq",
        &file("programs.cdl"),
        "fibCV (suc (suc n))",
        "add (fibCV (suc n)) (fibCV n)",
    ]);
    assert_eq!((code, out.trim()), (0, "EQUAL"));
    let (code, out) = cdlec(&[
        "eq",
        &file("programs.cdl"),
        "fibCV (suc (suc n))",
        "add (fibCV n) (fibCV n)",
    ]);
    assert_eq!((code, out.trim()), (1, "NOT-EQUAL"));
    "fibCV (suc (suc n)) ≃ add (fibCV (suc n)) (fibCV n) with n free".into()
}

fn eval_numeral(expr: &str) -> (u64, Duration) {
    let start = Instant::now();
    let (code, out) = cdlec(&["eval", &file("programs.cdl"), expr]);
    let t = start.elapsed();
    assert_eq!(code, 0, "{expr}: {out}");
    let n = out
        .lines()
        .last()
        .unwrap()
        .parse()
        .unwrap_or_else(|_| panic!("{expr}: {out}"));
    assert!(t < Duration::from_secs(30), "{expr} took {t:?}");
    (n, t)
}

fn numerics() -> String {
    let mut slowest = (Duration::ZERO, String::new());
    let mut check = |expr: String, expected: u64| {
        let (n, t) = eval_numeral(&expr);
        assert_eq!(n, expected, "{expr}");
        if t > slowest.0 {
            slowest = (t, expr);
        }
    };
    for k in 0..=10 {
        check(format!("fibCV {k}"), fib(k));
    }
    for (n, m) in [(7, 2), (9, 3), (3, 5), (3, 0)] {
        check(format!("div {n} {m}"), div(n, m));
    }
    for k in 0..=5 {
        check(format!("cat {k}"), catalan(k));
    }
    let fibs: Vec<u64> = (0..=10).map(fib).collect();
    let cats: Vec<u64> = (0..=5).map(catalan).collect();
    assert_eq!(fibs, [0, 1, 1, 2, 3, 5, 8, 13, 21, 34, 55]);
    assert_eq!(cats, [1, 1, 2, 5, 14, 42]);
    assert_eq!([div(7, 2), div(9, 3), div(3, 5), div(3, 0)], [3, 3, 0, 3]);
    format!(
        "fib 0..10, div ×4, cat 0..5 match; slowest `{}` {:.2?}",
        slowest.1, slowest.0
    )
}

/// Steps to normalize `outCV n` minus the steps to normalize `n` itself.
fn predecessor_overhead(l: &Loader, k: u64) -> i64 {
    let steps = |text: &str| {
        let mut ctx = query_context(l, None).unwrap();
        let e = parse_query(l, &mut ctx, text, false).unwrap();
        let c = Checker::new(&l.env, l.fuel);
        let e = c.elaborate(&mut ctx, &e).unwrap();
        assert_eq!(c.level(&mut ctx, &e), Level::Term);
        normalize_expr(l, &e).unwrap().1 as i64
    };
    steps(&format!("outCV ·NF -nfimap {k}")) - steps(&k.to_string())
}

fn constant_predecessor() -> String {
    let mut l = Loader::new(corpus(), DEFAULT_FUEL);
    l.load(&corpus().join("nat.cdl")).unwrap();
    let d10 = predecessor_overhead(&l, 10);
    let d100 = predecessor_overhead(&l, 100);
    assert_eq!(d10, d100);
    format!("overhead {d10} steps at k=10 and k=100")
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    })
}

fn properties() -> String {
    let mut runner = self::runner(1000);
    runner
        .run(&(term(3), term(2)), |(e, v)| commutes(&e, &v))
        .unwrap();
    let mut runner = self::runner(300);
    runner
        .run(&pure_term(2), |t| normalizes_stably(&t))
        .unwrap();
    runner.run(&term(2), |e| reparses(&e)).unwrap();
    let l = loaded_corpus();
    let normalized = corpus_normalizes_stably(&l);
    let round_trips = corpus_round_trips();
    let params = erased_parameters_absent(&l);
    format!(
        "1000 commutation pairs; {normalized} corpus terms normalize stably; \
         {round_trips} definitions round-trip; {params} erased parameters absent"
    )
}

fn rejects(src: &str) -> ErrorCode {
    let m = parse_module(src, "neg.cdl").unwrap();
    let reports = check_module(&m, &mut Env::default(), DEFAULT_FUEL).unwrap();
    reports
        .last()
        .unwrap()
        .error
        .as_ref()
        .expect("rejected")
        .code
}

fn negative() -> String {
    let t = "module neg . def T : ★ = ∀ X : ★. X ➔ X . ";
    assert_eq!(
        rejects(&format!("{t} def bad : ∀ x : T. T = Λ x. x .")),
        ErrorCode::ErasedVarUsed
    );
    assert_eq!(
        rejects("module neg . def bad : { λ x. x ≃ λ x. λ y. x } = β ."),
        ErrorCode::BetaSidesDiffer
    );
    let b = "module neg . def B : ★ = ∀ X : ★. X ➔ X ➔ X . ";
    assert_eq!(
        rejects(&format!(
            "{b} def bad : ι x : B. B = [ Λ X. λ a b. a , Λ X. λ a b. b ] ."
        )),
        ErrorCode::IotaComponentsDiffer
    );
    "ErasedVarUsed, BetaSidesDiffer, IotaComponentsDiffer".into()
}

fn main() {
    let criteria: [(&str, fn() -> String); 8] = [
        ("tier-1 corpus typechecks", tier1),
        ("tier-2 β claims and lambekCV2", tier2),
        ("elimId erases to the identity", erasure),
        ("open-term defining equation of fibCV", open_equation),
        ("numeric programs", numerics),
        ("constant-step predecessor", constant_predecessor),
        ("property suites", properties),
        ("negative tests", negative),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (what, run)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => println!("PASS criterion {}: {what} ({detail})", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL criterion {}: {what}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
