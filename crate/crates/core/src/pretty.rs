//! Pretty-printing of expressions and modules in the concrete `.cdl` syntax.
//!
//! Output re-parses to an alpha-equal tree. Binders are renamed with primes
//! whenever the source name would capture or shadow something referenced
//! underneath.

use std::collections::HashSet;
use std::fmt::Write;

use crate::syntax::{occurs, visit_refs, Expr, Mode, ModuleUnit, Name, Which};

#[derive(Clone, Copy, Debug, Default)]
pub struct Style {
    pub unicode: bool,
}

impl Style {
    fn pick<'a>(&self, ascii: &'a str, uni: &'a str) -> &'a str {
        if self.unicode {
            uni
        } else {
            ascii
        }
    }
}

/// Print `e` in a context whose variables are named `ctx` (outermost first).
pub fn print_expr(e: &Expr, ctx: &[Name], style: Style) -> String {
    let mut refs = HashSet::new();
    visit_refs(e, &mut |n| {
        refs.insert(n.to_string());
    });
    let mut p = Printer {
        names: ctx.iter().map(|n| n.to_string()).collect(),
        refs,
        style,
        out: String::new(),
    };
    p.expr(e, Prec::Expr);
    p.out
}

pub fn print_module(m: &ModuleUnit, style: Style) -> String {
    let mut out = String::new();
    writeln!(out, "module {} .", m.name).unwrap();
    for i in &m.imports {
        writeln!(out, "import {i} .").unwrap();
    }
    if !m.imports.is_empty() || !m.params.is_empty() {
        out.push('\n');
    }
    let mut scope: Vec<Name> = Vec::new();
    for p in &m.params {
        let ty = print_expr(&p.classifier, &scope, style);
        let (open, close) = if p.erased { ('{', '}') } else { ('(', ')') };
        writeln!(out, "{open}{} : {ty}{close} .", p.name).unwrap();
        scope.push(p.name.clone());
    }
    for d in &m.defs {
        out.push('\n');
        let ty = print_expr(&d.classifier, &scope, style);
        let body = print_expr(&d.body, &scope, style);
        writeln!(out, "def {} : {ty}\n  = {body} .", d.name).unwrap();
    }
    out
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Expr,
    App,
    Atom,
}

struct Printer {
    names: Vec<String>,
    refs: HashSet<String>,
    style: Style,
    out: String,
}

impl Printer {
    fn fresh(&self, base: &str) -> String {
        let base = if base.is_empty() { "x" } else { base };
        let mut c = base.to_string();
        while self.names.contains(&c) || self.refs.contains(&c) || is_keyword(&c) {
            c.push('\'');
        }
        c
    }

    fn open(&mut self, needed: bool) {
        if needed {
            self.out.push('(');
        }
    }

    fn close(&mut self, needed: bool) {
        if needed {
            self.out.push(')');
        }
    }

    /// Display name for a binder whose body is `body`.
    fn bind(&self, name: &Name, body: &Expr) -> String {
        if name.as_ref() == "_" {
            if occurs(body, 0) {
                self.fresh("x")
            } else {
                "_".into()
            }
        } else {
            self.fresh(name)
        }
    }

    fn expr(&mut self, e: &Expr, prec: Prec) {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.expr_inner(e, prec))
    }

    fn expr_inner(&mut self, e: &Expr, prec: Prec) {
        let st = self.style;
        match e {
            Expr::Var(i, n) => {
                if *i < self.names.len() {
                    let s = self.names[self.names.len() - 1 - i].clone();
                    self.out.push_str(&s);
                } else {
                    write!(self.out, "{n}").unwrap();
                }
            }
            Expr::Ref(n) => self.out.push_str(n),
            Expr::SortStar => self.out.push_str(st.pick("*", "★")),
            Expr::SortBox => self.out.push('□'),
            Expr::Pi {
                mode,
                name,
                domain,
                body,
            } => {
                let paren = prec > Prec::Expr;
                self.open(paren);
                if !occurs(body, 0) {
                    self.expr(domain, Prec::App);
                    let arrow = match mode {
                        Mode::Explicit => st.pick(" -> ", " ➔ "),
                        Mode::Erased => st.pick(" => ", " ➾ "),
                    };
                    self.out.push_str(arrow);
                    self.names.push("_".into());
                    self.expr(body, Prec::Expr);
                    self.names.pop();
                } else {
                    let kw = match mode {
                        Mode::Explicit => st.pick("Pi", "Π"),
                        Mode::Erased => st.pick("All", "∀"),
                    };
                    self.out.push_str(kw);
                    self.out.push(' ');
                    let x = self.bind(name, body);
                    self.out.push_str(&x);
                    self.out.push_str(" : ");
                    self.expr(domain, Prec::Expr);
                    self.out.push_str(" . ");
                    self.names.push(x);
                    self.expr(body, Prec::Expr);
                    self.names.pop();
                }
                self.close(paren);
            }
            Expr::Lam {
                mode,
                name,
                annot,
                body,
            } => {
                let paren = prec > Prec::Expr;
                self.open(paren);
                let kw = match mode {
                    Mode::Explicit => st.pick("lam", "λ"),
                    Mode::Erased => st.pick("Lam", "Λ"),
                };
                self.out.push_str(kw);
                self.out.push(' ');
                let x = self.bind(name, body);
                self.out.push_str(&x);
                if let Some(a) = annot {
                    self.out.push_str(" : ");
                    self.expr(a, Prec::Expr);
                }
                self.out.push_str(" . ");
                self.names.push(x);
                self.expr(body, Prec::Expr);
                self.names.pop();
                self.close(paren);
            }
            Expr::App { mode, fun, arg } => {
                let paren = prec > Prec::App;
                self.open(paren);
                // `β {` would read as a hinted beta
                let guard = matches!(**arg, Expr::Eq(..)) && ends_with_bare_beta(fun);
                self.open(guard);
                self.expr(fun, Prec::App);
                self.close(guard);
                self.out.push(' ');
                if *mode == Mode::Erased {
                    self.out.push('-');
                }
                self.expr(arg, Prec::Atom);
                self.close(paren);
            }
            Expr::Iota { name, left, right } => {
                let paren = prec > Prec::Expr;
                self.open(paren);
                self.out.push_str(st.pick("iota ", "ι "));
                let x = self.bind(name, right);
                self.out.push_str(&x);
                self.out.push_str(" : ");
                self.expr(left, Prec::Expr);
                self.out.push_str(" . ");
                self.names.push(x);
                self.expr(right, Prec::Expr);
                self.names.pop();
                self.close(paren);
            }
            Expr::Pair(l, r) => {
                self.out.push_str("[ ");
                self.expr(l, Prec::Expr);
                self.out.push_str(" , ");
                self.expr(r, Prec::Expr);
                self.out.push_str(" ]");
            }
            Expr::Proj(w, x) => {
                self.expr(x, Prec::Atom);
                self.out.push_str(match w {
                    Which::First => ".1",
                    Which::Second => ".2",
                });
            }
            Expr::Eq(l, r) => {
                self.out.push_str("{ ");
                self.expr(l, Prec::Expr);
                self.out.push_str(st.pick(" ~ ", " ≃ "));
                self.expr(r, Prec::Expr);
                self.out.push_str(" }");
            }
            Expr::Beta(h) => {
                self.out.push_str(st.pick("beta", "β"));
                if let Some(h) = h {
                    self.out.push_str(" { ");
                    self.expr(h, Prec::Expr);
                    self.out.push_str(" }");
                }
            }
            Expr::Rho {
                proof,
                name,
                motive,
                target,
            } => {
                let paren = prec > Prec::Expr;
                self.open(paren);
                self.out.push_str(st.pick("rho ", "ρ "));
                self.expr(proof, Prec::Atom);
                let x = self.bind(name, motive);
                write!(self.out, " @{x} . ").unwrap();
                self.names.push(x);
                self.expr(motive, Prec::Expr);
                self.names.pop();
                self.out.push_str(" - ");
                self.expr(target, Prec::Atom);
                self.close(paren);
            }
            Expr::Sym(p) => {
                let paren = prec > Prec::App;
                self.open(paren);
                self.out.push_str("sym ");
                self.expr(p, Prec::Atom);
                self.close(paren);
            }
            Expr::Phi {
                proof,
                typed,
                erasure,
            } => {
                let paren = prec > Prec::App;
                self.open(paren);
                self.out.push_str(st.pick("phi ", "φ "));
                self.expr(proof, Prec::Atom);
                self.out.push_str(" - ");
                let guard = ends_with_bare_beta(typed);
                self.open(guard);
                self.expr(typed, Prec::Atom);
                self.close(guard);
                self.out.push_str(" { ");
                self.expr(erasure, Prec::Expr);
                self.out.push_str(" }");
                self.close(paren);
            }
        }
    }
}

/// Whether `e`, printed in application position, ends with an unhinted `β`.
fn ends_with_bare_beta(e: &Expr) -> bool {
    match e {
        Expr::Beta(None) => true,
        Expr::App { arg, .. } => ends_with_bare_beta(arg),
        Expr::Sym(p) => ends_with_bare_beta(p),
        _ => false,
    }
}

pub fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "module"
            | "import"
            | "def"
            | "Pi"
            | "All"
            | "lam"
            | "Lam"
            | "iota"
            | "beta"
            | "rho"
            | "sym"
            | "phi"
            | "Π"
            | "∀"
            | "λ"
            | "Λ"
            | "ι"
            | "β"
            | "ρ"
            | "φ"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;
    use crate::syntax::name;

    fn round_trip(text: &str, unicode: bool) -> String {
        let e = parse_expr(text, &[]).unwrap();
        let printed = print_expr(&e, &[], Style { unicode });
        assert!(*parse_expr(&printed, &[]).unwrap() == *e, "{printed}");
        printed
    }

    #[test]
    fn ascii_and_unicode() {
        assert_eq!(round_trip("∀ X : ★. X ➔ X", false), "All X : * . X -> X");
        assert_eq!(round_trip("All X : * . X -> X", true), "∀ X : ★ . X ➔ X");
        assert_eq!(round_trip("Λ X. λ x. f -x ·X", true), "Λ X . λ x . f -x X");
    }

    #[test]
    fn shadowed_binders_are_renamed() {
        let e = parse_expr("λ x. λ x'. λ x. x' x", &[]).unwrap();
        assert_eq!(
            print_expr(&e, &[], Style::default()),
            "lam x . lam x' . lam x'' . x' x''"
        );
        let inner = parse_expr("λ y. x y", &[name("x")]).unwrap();
        assert_eq!(
            print_expr(&inner, &[name("x")], Style::default()),
            "lam y . x y"
        );
    }

    #[test]
    fn unhinted_beta_before_a_brace_is_parenthesized() {
        assert_eq!(
            round_trip("φ p - (β) { λ x. x }", false),
            "phi p - (beta) { lam x . x }"
        );
        assert_eq!(round_trip("(f β) { a ≃ b }", false), "(f beta) { a ~ b }");
        round_trip("f β{ a } { a ≃ b }", true);
    }

    #[test]
    fn keywords_are_not_binder_names() {
        assert!(is_keyword("phi") && is_keyword("Lam") && !is_keyword("w"));
    }
}
