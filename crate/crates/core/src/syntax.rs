//! Abstract syntax of the core theory.
//!
//! Terms, types and kinds share one grammar. Bound variables are de Bruijn
//! indices (binder names are kept only for printing), so alpha-equivalence is
//! structural equality modulo names and substitution never captures.
//! Global definitions are referenced by name through [`Expr::Ref`].

use std::fmt;
use std::sync::Arc;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Whether a binder or application is computationally relevant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Explicit,
    Erased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    First,
    Second,
}

#[derive(Clone, Debug)]
pub enum Expr {
    /// Bound variable: de Bruijn index plus the binder's display name.
    Var(usize, Name),
    /// Global definition (or, before checking, an unresolved free name).
    Ref(Name),
    SortStar,
    SortBox,
    Pi {
        mode: Mode,
        name: Name,
        domain: Arc<Expr>,
        body: Arc<Expr>,
    },
    Lam {
        mode: Mode,
        name: Name,
        annot: Option<Arc<Expr>>,
        body: Arc<Expr>,
    },
    App {
        mode: Mode,
        fun: Arc<Expr>,
        arg: Arc<Expr>,
    },
    Iota {
        name: Name,
        left: Arc<Expr>,
        right: Arc<Expr>,
    },
    Pair(Arc<Expr>, Arc<Expr>),
    Proj(Which, Arc<Expr>),
    Eq(Arc<Expr>, Arc<Expr>),
    Beta(Option<Arc<Expr>>),
    Rho {
        proof: Arc<Expr>,
        name: Name,
        motive: Arc<Expr>,
        target: Arc<Expr>,
    },
    Sym(Arc<Expr>),
    Phi {
        proof: Arc<Expr>,
        typed: Arc<Expr>,
        erasure: Arc<Expr>,
    },
}

use Expr::*;

impl Expr {
    pub fn var(index: usize, n: &Name) -> Arc<Expr> {
        Arc::new(Var(index, n.clone()))
    }

    pub fn app(mode: Mode, fun: Arc<Expr>, arg: Arc<Expr>) -> Arc<Expr> {
        Arc::new(App { mode, fun, arg })
    }

    pub fn pi(mode: Mode, name: Name, domain: Arc<Expr>, body: Arc<Expr>) -> Arc<Expr> {
        Arc::new(Pi {
            mode,
            name,
            domain,
            body,
        })
    }

    pub fn lam(mode: Mode, name: Name, annot: Option<Arc<Expr>>, body: Arc<Expr>) -> Arc<Expr> {
        Arc::new(Lam {
            mode,
            name,
            annot,
            body,
        })
    }

    /// Head and arguments of an application spine.
    pub fn spine(self: &Arc<Expr>) -> (Arc<Expr>, Vec<(Mode, Arc<Expr>)>) {
        let mut args = Vec::new();
        let mut head = self.clone();
        while let App { mode, fun, arg } = &*head {
            args.push((*mode, arg.clone()));
            let next = fun.clone();
            head = next;
        }
        args.reverse();
        (head, args)
    }

    pub fn apply_spine(head: Arc<Expr>, args: &[(Mode, Arc<Expr>)]) -> Arc<Expr> {
        args.iter()
            .fold(head, |f, (m, a)| Expr::app(*m, f, a.clone()))
    }
}

/// Alpha-equivalence: structural equality ignoring binder names.
impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        alpha_eq(self, other)
    }
}

pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || alpha_eq_inner(a, b))
}

fn alpha_eq_inner(a: &Expr, b: &Expr) -> bool {
    fn opt(a: &Option<Arc<Expr>>, b: &Option<Arc<Expr>>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => alpha_eq(x, y),
            _ => false,
        }
    }
    match (a, b) {
        (Var(i, _), Var(j, _)) => i == j,
        (Ref(x), Ref(y)) => x == y,
        (SortStar, SortStar) | (SortBox, SortBox) => true,
        (
            Pi {
                mode: m1,
                domain: d1,
                body: b1,
                ..
            },
            Pi {
                mode: m2,
                domain: d2,
                body: b2,
                ..
            },
        ) => m1 == m2 && alpha_eq(d1, d2) && alpha_eq(b1, b2),
        (
            Lam {
                mode: m1,
                annot: a1,
                body: b1,
                ..
            },
            Lam {
                mode: m2,
                annot: a2,
                body: b2,
                ..
            },
        ) => m1 == m2 && opt(a1, a2) && alpha_eq(b1, b2),
        (
            App {
                mode: m1,
                fun: f1,
                arg: x1,
            },
            App {
                mode: m2,
                fun: f2,
                arg: x2,
            },
        ) => m1 == m2 && alpha_eq(f1, f2) && alpha_eq(x1, x2),
        (
            Iota {
                left: l1,
                right: r1,
                ..
            },
            Iota {
                left: l2,
                right: r2,
                ..
            },
        ) => alpha_eq(l1, l2) && alpha_eq(r1, r2),
        (Pair(l1, r1), Pair(l2, r2)) | (Eq(l1, r1), Eq(l2, r2)) => {
            alpha_eq(l1, l2) && alpha_eq(r1, r2)
        }
        (Proj(w1, e1), Proj(w2, e2)) => w1 == w2 && alpha_eq(e1, e2),
        (Beta(h1), Beta(h2)) => opt(h1, h2),
        (
            Rho {
                proof: p1,
                motive: m1,
                target: t1,
                ..
            },
            Rho {
                proof: p2,
                motive: m2,
                target: t2,
                ..
            },
        ) => alpha_eq(p1, p2) && alpha_eq(m1, m2) && alpha_eq(t1, t2),
        (Sym(p1), Sym(p2)) => alpha_eq(p1, p2),
        (
            Phi {
                proof: p1,
                typed: t1,
                erasure: e1,
            },
            Phi {
                proof: p2,
                typed: t2,
                erasure: e2,
            },
        ) => alpha_eq(p1, p2) && alpha_eq(t1, t2) && alpha_eq(e1, e2),
        _ => false,
    }
}

/// Rebuild `e`, mapping every variable `Var(i)` with `i >= depth` (free at the
/// current binder depth) through `f(depth, i, name)`.
fn map_free(
    e: &Arc<Expr>,
    depth: usize,
    f: &dyn Fn(usize, usize, &Name) -> Arc<Expr>,
) -> Arc<Expr> {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || map_free_inner(e, depth, f))
}

fn map_free_inner(
    e: &Arc<Expr>,
    depth: usize,
    f: &dyn Fn(usize, usize, &Name) -> Arc<Expr>,
) -> Arc<Expr> {
    let go = |x: &Arc<Expr>, d: usize| map_free(x, d, f);
    match &**e {
        Var(i, n) => {
            if *i >= depth {
                f(depth, *i, n)
            } else {
                e.clone()
            }
        }
        Ref(_) | SortStar | SortBox | Beta(None) => e.clone(),
        Pi {
            mode,
            name,
            domain,
            body,
        } => Arc::new(Pi {
            mode: *mode,
            name: name.clone(),
            domain: go(domain, depth),
            body: go(body, depth + 1),
        }),
        Lam {
            mode,
            name,
            annot,
            body,
        } => Arc::new(Lam {
            mode: *mode,
            name: name.clone(),
            annot: annot.as_ref().map(|a| go(a, depth)),
            body: go(body, depth + 1),
        }),
        App { mode, fun, arg } => Arc::new(App {
            mode: *mode,
            fun: go(fun, depth),
            arg: go(arg, depth),
        }),
        Iota { name, left, right } => Arc::new(Iota {
            name: name.clone(),
            left: go(left, depth),
            right: go(right, depth + 1),
        }),
        Pair(l, r) => Arc::new(Pair(go(l, depth), go(r, depth))),
        Proj(w, x) => Arc::new(Proj(*w, go(x, depth))),
        Eq(l, r) => Arc::new(Eq(go(l, depth), go(r, depth))),
        Beta(Some(h)) => Arc::new(Beta(Some(go(h, depth)))),
        Rho {
            proof,
            name,
            motive,
            target,
        } => Arc::new(Rho {
            proof: go(proof, depth),
            name: name.clone(),
            motive: go(motive, depth + 1),
            target: go(target, depth),
        }),
        Sym(p) => Arc::new(Sym(go(p, depth))),
        Phi {
            proof,
            typed,
            erasure,
        } => Arc::new(Phi {
            proof: go(proof, depth),
            typed: go(typed, depth),
            erasure: go(erasure, depth),
        }),
    }
}

/// Add `by` to every free variable index.
pub fn shift(e: &Arc<Expr>, by: usize) -> Arc<Expr> {
    if by == 0 || is_closed(e) {
        return e.clone();
    }
    map_free(e, 0, &|_, i, n| Expr::var(i + by, n))
}

/// Substitute `value` for variable 0 of `body` (the body of a binder),
/// lowering the remaining free variables by one.
pub fn instantiate(body: &Arc<Expr>, value: &Arc<Expr>) -> Arc<Expr> {
    if is_closed(body) {
        return body.clone();
    }
    map_free(body, 0, &|depth, i, n| {
        if i == depth {
            shift(value, depth)
        } else if i > depth {
            Expr::var(i - 1, n)
        } else {
            unreachable!()
        }
    })
}

/// Substitute for free variable `index` (not necessarily a binder's own
/// variable); used to instantiate motives and module parameters.
pub fn substitute(e: &Arc<Expr>, index: usize, value: &Arc<Expr>) -> Arc<Expr> {
    map_free(e, 0, &|depth, i, n| {
        let free = i - depth;
        if free == index {
            shift(value, depth)
        } else if free > index {
            Expr::var(i - 1, n)
        } else {
            Expr::var(i, n)
        }
    })
}

/// Smallest index bound outside `e` that `e` refers to, i.e. `e` only mentions
/// variables `< free_bound(e)` relative to its root.
pub fn free_bound(e: &Expr) -> usize {
    fn go(e: &Expr, depth: usize, acc: &mut usize) {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match e {
            Var(i, _) => {
                if *i >= depth {
                    *acc = (*acc).max(i - depth + 1);
                }
            }
            Ref(_) | SortStar | SortBox | Beta(None) => {}
            Pi { domain, body, .. } => {
                go(domain, depth, acc);
                go(body, depth + 1, acc);
            }
            Lam { annot, body, .. } => {
                if let Some(a) = annot {
                    go(a, depth, acc);
                }
                go(body, depth + 1, acc);
            }
            App { fun, arg, .. } => {
                go(fun, depth, acc);
                go(arg, depth, acc);
            }
            Iota { left, right, .. } => {
                go(left, depth, acc);
                go(right, depth + 1, acc);
            }
            Pair(l, r) | Eq(l, r) => {
                go(l, depth, acc);
                go(r, depth, acc);
            }
            Proj(_, x) | Sym(x) | Beta(Some(x)) => go(x, depth, acc),
            Rho {
                proof,
                motive,
                target,
                ..
            } => {
                go(proof, depth, acc);
                go(motive, depth + 1, acc);
                go(target, depth, acc);
            }
            Phi {
                proof,
                typed,
                erasure,
            } => {
                go(proof, depth, acc);
                go(typed, depth, acc);
                go(erasure, depth, acc);
            }
        })
    }
    let mut acc = 0;
    go(e, 0, &mut acc);
    acc
}

pub fn is_closed(e: &Expr) -> bool {
    free_bound(e) == 0
}

/// Does variable `index` occur free in `e` (anywhere, including types)?
pub fn occurs(e: &Expr, index: usize) -> bool {
    fn go(e: &Expr, target: usize) -> bool {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match e {
            Var(i, _) => *i == target,
            Ref(_) | SortStar | SortBox | Beta(None) => false,
            Pi { domain, body, .. } => go(domain, target) || go(body, target + 1),
            Lam { annot, body, .. } => {
                annot.as_ref().is_some_and(|a| go(a, target)) || go(body, target + 1)
            }
            App { fun, arg, .. } => go(fun, target) || go(arg, target),
            Iota { left, right, .. } => go(left, target) || go(right, target + 1),
            Pair(l, r) | Eq(l, r) => go(l, target) || go(r, target),
            Proj(_, x) | Sym(x) | Beta(Some(x)) => go(x, target),
            Rho {
                proof,
                motive,
                target: t,
                ..
            } => go(proof, target) || go(motive, target + 1) || go(t, target),
            Phi {
                proof,
                typed,
                erasure,
            } => go(proof, target) || go(typed, target) || go(erasure, target),
        })
    }
    go(e, index)
}

/// True iff variable `index` occurs free in the erasure of `e`.
///
/// Follows the erasure equations: annotations, erased binders' domains,
/// erased arguments, second components of pairs, rewrite/cast evidence and
/// equality types contribute nothing.
pub fn free_in_erasure(e: &Expr, index: usize) -> bool {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match e {
        Var(i, _) => *i == index,
        Ref(_) | SortStar | SortBox | Beta(None) => false,
        // types never survive erasure of a term
        Pi { .. } | Iota { .. } | Eq(..) => false,
        Lam { body, .. } => free_in_erasure(body, index + 1),
        App { mode, fun, arg } => {
            free_in_erasure(fun, index) || (*mode == Mode::Explicit && free_in_erasure(arg, index))
        }
        Pair(l, _) => free_in_erasure(l, index),
        Proj(_, x) | Sym(x) | Beta(Some(x)) => free_in_erasure(x, index),
        Rho { target, .. } => free_in_erasure(target, index),
        Phi { erasure, .. } => free_in_erasure(erasure, index),
    })
}

/// Every variable resolves to a binder in `e` or one of `ctx_len` context
/// entries, and every global reference satisfies `known`.
pub fn well_scoped(e: &Expr, ctx_len: usize, known: &dyn Fn(&str) -> bool) -> bool {
    fn refs_ok(e: &Expr, known: &dyn Fn(&str) -> bool) -> bool {
        let mut ok = true;
        visit_refs(e, &mut |n| ok &= known(n));
        ok
    }
    free_bound(e) <= ctx_len && refs_ok(e, known)
}

/// Call `f` on every global name referenced by `e`.
pub fn visit_refs(e: &Expr, f: &mut dyn FnMut(&Name)) {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match e {
        Ref(n) => f(n),
        Var(..) | SortStar | SortBox | Beta(None) => {}
        Pi { domain, body, .. } => {
            visit_refs(domain, f);
            visit_refs(body, f);
        }
        Lam { annot, body, .. } => {
            if let Some(a) = annot {
                visit_refs(a, f);
            }
            visit_refs(body, f);
        }
        App { fun, arg, .. } => {
            visit_refs(fun, f);
            visit_refs(arg, f);
        }
        Iota { left, right, .. } => {
            visit_refs(left, f);
            visit_refs(right, f);
        }
        Pair(l, r) | Eq(l, r) => {
            visit_refs(l, f);
            visit_refs(r, f);
        }
        Proj(_, x) | Sym(x) | Beta(Some(x)) => visit_refs(x, f),
        Rho {
            proof,
            motive,
            target,
            ..
        } => {
            visit_refs(proof, f);
            visit_refs(motive, f);
            visit_refs(target, f);
        }
        Phi {
            proof,
            typed,
            erasure,
        } => {
            visit_refs(proof, f);
            visit_refs(typed, f);
            visit_refs(erasure, f);
        }
    })
}

/// Location in a source file. Lines and columns are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A module parameter: `(x : A)` or erased `{x : A}`.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: Name,
    pub classifier: Arc<Expr>,
    pub erased: bool,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub struct Definition {
    pub name: Name,
    pub classifier: Arc<Expr>,
    pub body: Arc<Expr>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub struct ModuleUnit {
    pub name: Name,
    pub imports: Vec<Name>,
    pub params: Vec<Param>,
    pub defs: Vec<Definition>,
    pub span: SourceSpan,
}
