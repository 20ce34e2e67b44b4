//! Erasure from annotated syntax to pure lambda terms.

use std::sync::Arc;

use crate::pure::{PureTerm, DANGLING};
use crate::syntax::{Expr, Mode};

/// Source of erased bodies for global definitions.
pub trait Globals {
    fn erased(&self, name: &str) -> Option<Arc<PureTerm>>;
}

impl Globals for () {
    fn erased(&self, _: &str) -> Option<Arc<PureTerm>> {
        None
    }
}

/// Erase `e`. Free variables keep their indices (relative to the context `e`
/// lives in); global references are replaced by their erased bodies, or by a
/// dangling variable when unknown.
pub fn erase(globals: &dyn Globals, e: &Expr) -> PureTerm {
    let mut env = Vec::new();
    Eraser { globals }.go(e, &mut env, 0)
}

struct Eraser<'a> {
    globals: &'a dyn Globals,
}

impl Eraser<'_> {
    /// `env` has one slot per binder of `e` entered so far (innermost last):
    /// `Some(level)` for binders kept in the pure term, `None` for erased ones.
    /// `depth` is the number of kept binders.
    fn go(&self, e: &Expr, env: &mut Vec<Option<usize>>, depth: usize) -> PureTerm {
        stacker::maybe_grow(64 * 1024, 8 * 1024 * 1024, || self.go_inner(e, env, depth))
    }

    fn go_inner(&self, e: &Expr, env: &mut Vec<Option<usize>>, depth: usize) -> PureTerm {
        match e {
            Expr::Var(i, _) => {
                if *i < env.len() {
                    match env[env.len() - 1 - i] {
                        Some(level) => PureTerm::Var(depth - 1 - level),
                        None => PureTerm::Var(DANGLING),
                    }
                } else {
                    PureTerm::Var(i - env.len() + depth)
                }
            }
            Expr::Ref(n) => match self.globals.erased(n) {
                Some(t) => (*t).clone(),
                None => PureTerm::Var(DANGLING),
            },
            Expr::Lam {
                mode: Mode::Explicit,
                name,
                body,
                ..
            } => {
                env.push(Some(depth));
                let b = self.go(body, env, depth + 1);
                env.pop();
                PureTerm::Lam(name.clone(), Arc::new(b))
            }
            Expr::Lam {
                mode: Mode::Erased,
                body,
                ..
            } => {
                env.push(None);
                let b = self.go(body, env, depth);
                env.pop();
                b
            }
            Expr::App {
                mode: Mode::Explicit,
                fun,
                arg,
            } => PureTerm::App(
                Arc::new(self.go(fun, env, depth)),
                Arc::new(self.go(arg, env, depth)),
            ),
            Expr::App {
                mode: Mode::Erased,
                fun,
                ..
            } => self.go(fun, env, depth),
            Expr::Pair(l, _) => self.go(l, env, depth),
            Expr::Proj(_, x) | Expr::Sym(x) | Expr::Beta(Some(x)) => self.go(x, env, depth),
            Expr::Beta(None) => identity(),
            Expr::Rho { target, .. } => self.go(target, env, depth),
            Expr::Phi { erasure, .. } => self.go(erasure, env, depth),
            // Types and kinds have no computational content; they only reach
            // here through ill-formed input.
            Expr::SortStar | Expr::SortBox | Expr::Pi { .. } | Expr::Iota { .. } | Expr::Eq(..) => {
                PureTerm::Var(DANGLING)
            }
        }
    }
}

/// `λ x. x`
pub fn identity() -> PureTerm {
    PureTerm::lam("x", PureTerm::Var(0))
}
