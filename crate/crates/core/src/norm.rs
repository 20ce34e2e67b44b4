//! Fuel-bounded normalization of pure terms.
//!
//! Normal-order evaluation with sharing (call-by-need): arguments are
//! suspended and evaluated at most once, the head is always reduced first, and
//! bodies are normalized under binders during read-back. The result is the
//! beta-normal form, eta-contracted bottom-up. Each contracted beta-redex
//! costs one step.

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use crate::pure::{PureTerm, DANGLING};
use crate::syntax::Name;

pub const DEFAULT_FUEL: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("normalization budget of {limit} steps exhausted")]
pub struct BudgetExhausted {
    pub limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormBudget {
    max_steps: u64,
    steps_used: u64,
}

impl NormBudget {
    pub fn new(max_steps: u64) -> Self {
        assert!(max_steps >= 1, "budget must allow at least one step");
        NormBudget {
            max_steps,
            steps_used: 0,
        }
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    pub fn steps_used(&self) -> u64 {
        self.steps_used
    }

    fn tick(&mut self) -> Result<(), BudgetExhausted> {
        if self.steps_used >= self.max_steps {
            return Err(BudgetExhausted {
                limit: self.max_steps,
            });
        }
        self.steps_used += 1;
        Ok(())
    }
}

impl Default for NormBudget {
    fn default() -> Self {
        NormBudget::new(DEFAULT_FUEL)
    }
}

#[derive(Clone, Copy)]
enum Head {
    /// Free variable of the input term, by its index at the root.
    Free(usize),
    /// Variable introduced while reading back under a binder, by level.
    Bound(usize),
    Dangling,
}

#[derive(Clone)]
enum Value {
    Lam(Name, Arc<PureTerm>, Env),
    Neutral(Head, Rc<Vec<Thunk>>),
}

enum ThunkState {
    Delayed(Arc<PureTerm>, Env),
    Done(Value),
    Forcing,
}

type Thunk = Rc<RefCell<ThunkState>>;

#[derive(Clone, Default)]
struct Env(Option<Rc<EnvNode>>);

struct EnvNode {
    value: Thunk,
    len: usize,
    next: Env,
}

impl Env {
    fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    fn push(&self, value: Thunk) -> Env {
        Env(Some(Rc::new(EnvNode {
            value,
            len: self.len() + 1,
            next: self.clone(),
        })))
    }

    fn get(&self, mut index: usize) -> Option<&Thunk> {
        let mut cur = self.0.as_ref();
        while let Some(node) = cur {
            if index == 0 {
                return Some(&node.value);
            }
            index -= 1;
            cur = node.next.0.as_ref();
        }
        None
    }
}

impl Drop for EnvNode {
    // Long environments would otherwise drop recursively.
    fn drop(&mut self) {
        let mut next = self.next.0.take();
        while let Some(node) = next {
            match Rc::try_unwrap(node) {
                Ok(mut n) => next = n.next.0.take(),
                Err(_) => break,
            }
        }
    }
}

fn ready(v: Value) -> Thunk {
    Rc::new(RefCell::new(ThunkState::Done(v)))
}

struct Machine<'a> {
    budget: &'a mut NormBudget,
}

impl Machine<'_> {
    fn force(&mut self, thunk: &Thunk) -> Result<Value, BudgetExhausted> {
        let state = std::mem::replace(&mut *thunk.borrow_mut(), ThunkState::Forcing);
        match state {
            ThunkState::Done(v) => {
                *thunk.borrow_mut() = ThunkState::Done(v.clone());
                Ok(v)
            }
            ThunkState::Delayed(t, env) => match self.eval(&t, &env) {
                Ok(v) => {
                    *thunk.borrow_mut() = ThunkState::Done(v.clone());
                    Ok(v)
                }
                Err(e) => {
                    *thunk.borrow_mut() = ThunkState::Delayed(t, env);
                    Err(e)
                }
            },
            ThunkState::Forcing => unreachable!("pure terms cannot demand their own value"),
        }
    }

    fn suspend(&mut self, t: &Arc<PureTerm>, env: &Env) -> Thunk {
        match &**t {
            PureTerm::Var(i) if *i < env.len() => env.get(*i).unwrap().clone(),
            PureTerm::Lam(n, b) => ready(Value::Lam(n.clone(), b.clone(), env.clone())),
            _ => Rc::new(RefCell::new(ThunkState::Delayed(t.clone(), env.clone()))),
        }
    }

    /// Weak head normal form.
    fn eval(&mut self, t: &Arc<PureTerm>, env: &Env) -> Result<Value, BudgetExhausted> {
        stacker::maybe_grow(128 * 1024, 16 * 1024 * 1024, || self.eval_inner(t, env))
    }

    fn eval_inner(&mut self, t: &Arc<PureTerm>, env: &Env) -> Result<Value, BudgetExhausted> {
        let mut term = t.clone();
        let mut env = env.clone();
        // pending arguments, last one applied first
        let mut args: Vec<Thunk> = Vec::new();
        loop {
            let value = match &*term {
                PureTerm::Var(i) => {
                    if *i >= DANGLING {
                        Value::Neutral(Head::Dangling, Rc::new(Vec::new()))
                    } else if *i < env.len() {
                        let th = env.get(*i).unwrap().clone();
                        self.force(&th)?
                    } else {
                        Value::Neutral(Head::Free(i - env.len()), Rc::new(Vec::new()))
                    }
                }
                PureTerm::Lam(n, b) => Value::Lam(n.clone(), b.clone(), env.clone()),
                PureTerm::App(f, a) => {
                    let th = self.suspend(a, &env);
                    args.push(th);
                    term = f.clone();
                    continue;
                }
            };
            match value {
                Value::Lam(n, body, cenv) => match args.pop() {
                    Some(arg) => {
                        self.budget.tick()?;
                        env = cenv.push(arg);
                        term = body;
                    }
                    None => return Ok(Value::Lam(n, body, cenv)),
                },
                Value::Neutral(h, spine) => {
                    if args.is_empty() {
                        return Ok(Value::Neutral(h, spine));
                    }
                    let mut spine = (*spine).clone();
                    while let Some(a) = args.pop() {
                        spine.push(a);
                    }
                    return Ok(Value::Neutral(h, Rc::new(spine)));
                }
            }
        }
    }

    fn read_back(&mut self, v: Value, depth: usize) -> Result<PureTerm, BudgetExhausted> {
        stacker::maybe_grow(128 * 1024, 16 * 1024 * 1024, || {
            self.read_back_inner(v, depth)
        })
    }

    fn read_back_inner(&mut self, v: Value, depth: usize) -> Result<PureTerm, BudgetExhausted> {
        match v {
            Value::Lam(n, body, env) => {
                let x = ready(Value::Neutral(Head::Bound(depth), Rc::new(Vec::new())));
                let bv = self.eval(&body, &env.push(x))?;
                let b = self.read_back(bv, depth + 1)?;
                let lam = PureTerm::Lam(n, Arc::new(b));
                Ok(lam.eta_contract_root().unwrap_or(lam))
            }
            Value::Neutral(h, spine) => {
                let mut t = match h {
                    Head::Free(i) => PureTerm::Var(i + depth),
                    Head::Bound(l) => PureTerm::Var(depth - 1 - l),
                    Head::Dangling => PureTerm::Var(DANGLING),
                };
                for a in spine.iter() {
                    let av = self.force(a)?;
                    let at = self.read_back(av, depth)?;
                    t = PureTerm::App(Arc::new(t), Arc::new(at));
                }
                Ok(t)
            }
        }
    }
}

/// Beta-normalize then eta-contract. Free variables are inert.
pub fn normalize(t: &PureTerm, budget: &mut NormBudget) -> Result<PureTerm, BudgetExhausted> {
    let term = Arc::new(t.clone());
    let mut m = Machine { budget };
    let v = m.eval(&term, &Env::default())?;
    m.read_back(v, 0)
}
