//! Erased, untyped lambda terms.

use std::fmt;
use std::sync::Arc;

use crate::syntax::Name;

/// Index used for a variable whose binder was erased. Only reachable from
/// ill-formed input (e.g. an erased variable inside an equation side); such a
/// variable never reduces and never matches a real one.
pub const DANGLING: usize = usize::MAX / 2;

#[derive(Clone, Debug)]
pub enum PureTerm {
    Var(usize),
    Lam(Name, Arc<PureTerm>),
    App(Arc<PureTerm>, Arc<PureTerm>),
}

use PureTerm::*;

impl PartialEq for PureTerm {
    /// Alpha-equivalence.
    fn eq(&self, other: &PureTerm) -> bool {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match (self, other) {
            (Var(i), Var(j)) => i == j,
            (Lam(_, a), Lam(_, b)) => a == b,
            (App(f, a), App(g, b)) => f == g && a == b,
            _ => false,
        })
    }
}

impl PureTerm {
    pub fn lam(n: &str, body: PureTerm) -> PureTerm {
        Lam(Arc::from(n), Arc::new(body))
    }

    pub fn app(f: PureTerm, a: PureTerm) -> PureTerm {
        App(Arc::new(f), Arc::new(a))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            n += 1;
            match t {
                Var(_) => {}
                Lam(_, b) => stack.push(b),
                App(f, a) => {
                    stack.push(f);
                    stack.push(a);
                }
            }
        }
        n
    }

    /// Does variable `index` occur free?
    pub fn occurs(&self, index: usize) -> bool {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match self {
            Var(i) => *i == index,
            Lam(_, b) => b.occurs(index + 1),
            App(f, a) => f.occurs(index) || a.occurs(index),
        })
    }

    pub fn is_closed(&self) -> bool {
        fn go(t: &PureTerm, depth: usize) -> bool {
            stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match t {
                Var(i) => *i < depth,
                Lam(_, b) => go(b, depth + 1),
                App(f, a) => go(f, depth) && go(a, depth),
            })
        }
        go(self, 0)
    }

    fn map_free(&self, depth: usize, f: &dyn Fn(usize, usize) -> PureTerm) -> PureTerm {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match self {
            Var(i) if *i >= depth && *i != DANGLING => f(depth, *i),
            Var(_) => self.clone(),
            Lam(n, b) => Lam(n.clone(), Arc::new(b.map_free(depth + 1, f))),
            App(g, a) => App(
                Arc::new(g.map_free(depth, f)),
                Arc::new(a.map_free(depth, f)),
            ),
        })
    }

    pub fn shift(&self, by: usize) -> PureTerm {
        if by == 0 {
            return self.clone();
        }
        self.map_free(0, &|_, i| Var(i + by))
    }

    /// Capture-avoiding substitution of `value` for free variable `index`;
    /// variables above `index` move down by one.
    pub fn substitute(&self, index: usize, value: &PureTerm) -> PureTerm {
        self.map_free(0, &|depth, i| {
            let free = i - depth;
            if free == index {
                value.shift(depth)
            } else if free > index {
                Var(i - 1)
            } else {
                Var(i)
            }
        })
    }

    /// One step of eta-contraction at the root, if applicable:
    /// `λ x. f x` with `x` not free in `f` becomes `f`.
    pub fn eta_contract_root(&self) -> Option<PureTerm> {
        if let Lam(_, body) = self {
            if let App(f, a) = &**body {
                if matches!(**a, Var(0)) && !f.occurs(0) {
                    return Some(f.map_free(0, &|_, i| Var(i - 1)));
                }
            }
        }
        None
    }
}

/// Prints with names, renaming binders that would shadow a name still in use.
/// Free variables print as `#i` (index relative to the root) unless `free`
/// supplies a name.
pub struct Display<'a> {
    pub term: &'a PureTerm,
    pub free: &'a [Name],
    pub unicode: bool,
}

impl fmt::Display for PureTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Display {
            term: self,
            free: &[],
            unicode: false,
        }
        .fmt(f)
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `free[0]` is the innermost free variable (index 0)
        let mut names: Vec<String> = self.free.iter().rev().map(|n| n.to_string()).collect();
        let mut out = String::new();
        write_term(self.term, &mut names, self.unicode, false, false, &mut out);
        f.write_str(&out)
    }
}

fn fresh(base: &str, names: &[String]) -> String {
    let base = if base.is_empty() || base == "_" {
        "x"
    } else {
        base
    };
    let mut candidate = base.to_string();
    while names.iter().any(|n| *n == candidate) {
        candidate.push('\'');
    }
    candidate
}

fn write_term(
    t: &PureTerm,
    names: &mut Vec<String>,
    unicode: bool,
    arg_pos: bool,
    fun_pos: bool,
    out: &mut String,
) {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match t {
        Var(i) => {
            if *i < names.len() {
                out.push_str(&names[names.len() - 1 - i]);
            } else if *i >= DANGLING {
                out.push_str("#?");
            } else {
                out.push_str(&format!("#{}", i - names.len()));
            }
        }
        Lam(n, body) => {
            if arg_pos || fun_pos {
                out.push('(');
            }
            let x = fresh(n, names);
            out.push_str(if unicode { "λ " } else { "lam " });
            out.push_str(&x);
            out.push_str(" . ");
            names.push(x);
            write_term(body, names, unicode, false, false, out);
            names.pop();
            if arg_pos || fun_pos {
                out.push(')');
            }
        }
        App(g, a) => {
            if arg_pos {
                out.push('(');
            }
            write_term(g, names, unicode, false, true, out);
            out.push(' ');
            write_term(a, names, unicode, true, false, out);
            if arg_pos {
                out.push(')');
            }
        }
    })
}
