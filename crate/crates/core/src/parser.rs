//! Lexer and recursive-descent parser for `.cdl` modules.
//!
//! Names are resolved while parsing: binder-bound names become de Bruijn
//! variables, everything else becomes a global reference checked later.
//! Unicode and ASCII spellings of every token are interchangeable; the
//! type-application dot `·` is skipped.

use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{name, Definition, Expr, Mode, ModuleUnit, Name, Param, SourceSpan, Which};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Module,
    Import,
    Def,
    Pi,
    All,
    Lam,
    BigLam,
    Iota,
    Beta,
    Rho,
    Sym,
    Phi,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Proj(Which),
    Arrow,
    FatArrow,
    Equals,
    Tilde,
    At,
    /// `-` followed by whitespace: separator in `rho` and `phi`.
    Dash,
    /// `-` glued to the next token: erased application.
    ErasedDash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Nat(n) => format!("numeral `{n}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", spelling(other)),
        }
    }
}

fn spelling(t: &Tok) -> &'static str {
    match t {
        Tok::Module => "module",
        Tok::Import => "import",
        Tok::Def => "def",
        Tok::Pi => "Pi",
        Tok::All => "All",
        Tok::Lam => "lam",
        Tok::BigLam => "Lam",
        Tok::Iota => "iota",
        Tok::Beta => "beta",
        Tok::Rho => "rho",
        Tok::Sym => "sym",
        Tok::Phi => "phi",
        Tok::Star => "*",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Comma => ",",
        Tok::Colon => ":",
        Tok::Dot => ".",
        Tok::Proj(Which::First) => ".1",
        Tok::Proj(Which::Second) => ".2",
        Tok::Arrow => "->",
        Tok::FatArrow => "=>",
        Tok::Equals => "=",
        Tok::Tilde => "~",
        Tok::At => "@",
        Tok::Dash => "-",
        Tok::ErasedDash => "-",
        Tok::Ident(_) | Tok::Nat(_) | Tok::Eof => "",
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    length: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || ('₀'..='₉').contains(&c)
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "module" => Tok::Module,
        "import" => Tok::Import,
        "def" => Tok::Def,
        "Pi" | "Π" => Tok::Pi,
        "All" => Tok::All,
        "lam" | "λ" => Tok::Lam,
        "Lam" | "Λ" => Tok::BigLam,
        "iota" | "ι" => Tok::Iota,
        "beta" | "β" => Tok::Beta,
        "rho" | "ρ" => Tok::Rho,
        "sym" => Tok::Sym,
        "phi" | "φ" => Tok::Phi,
        _ => return None,
    })
}

fn lex(text: &str, file: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, found: String| SyntaxError {
        span: SourceSpan {
            file: file.to_string(),
            line,
            column,
            length: 1,
        },
        expected: vec!["a token".into()],
        found,
    };
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() || c == '·' {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && next == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        let (tok, len) = if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && is_ident_continue(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            (keyword(&s).unwrap_or(Tok::Ident(s)), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let n = s
                .parse()
                .map_err(|_| err(line, col, format!("numeral `{s}` out of range")))?;
            (Tok::Nat(n), j - i)
        } else {
            match c {
                '.' => {
                    let glued = i > 0 && !chars[i - 1].is_whitespace();
                    let after = chars.get(i + 2).copied();
                    let digit_ends = !after.is_some_and(|a| a.is_ascii_digit());
                    match next {
                        Some('1') if glued && digit_ends => (Tok::Proj(Which::First), 2),
                        Some('2') if glued && digit_ends => (Tok::Proj(Which::Second), 2),
                        _ => (Tok::Dot, 1),
                    }
                }
                '-' if next == Some('>') => (Tok::Arrow, 2),
                '-' => {
                    if next.is_none_or(|n| n.is_whitespace()) {
                        (Tok::Dash, 1)
                    } else {
                        (Tok::ErasedDash, 1)
                    }
                }
                '=' if next == Some('>') => (Tok::FatArrow, 2),
                '=' => (Tok::Equals, 1),
                '*' | '★' => (Tok::Star, 1),
                '∀' => (Tok::All, 1),
                '➔' | '→' => (Tok::Arrow, 1),
                '➾' => (Tok::FatArrow, 1),
                '~' | '≃' => (Tok::Tilde, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ',' => (Tok::Comma, 1),
                ':' => (Tok::Colon, 1),
                '@' => (Tok::At, 1),
                other => return Err(err(line, col, format!("character `{other}`"))),
            }
        };
        out.push(Token {
            tok,
            line,
            column: start_col,
            length: len,
        });
        i += len;
        col += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
        length: 0,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    /// Bound names, innermost last.
    scope: Vec<Name>,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    fn new(text: &str, file: &'a str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(text, file)?,
            pos: 0,
            file,
            scope: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        let t = &self.toks[self.pos];
        SourceSpan {
            file: self.file.to_string(),
            line: t.line,
            column: t.column,
            length: t.length,
        }
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(SyntaxError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(&[&format!("`{}`", spelling(&t))])
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(name(&s))
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn resolve(&self, n: &str) -> Arc<Expr> {
        if n != "_" {
            if let Some(pos) = self.scope.iter().rposition(|s| s.as_ref() == n) {
                return Expr::var(self.scope.len() - 1 - pos, &self.scope[pos]);
            }
        }
        Arc::new(Expr::Ref(name(n)))
    }

    fn module(&mut self) -> PResult<ModuleUnit> {
        let span = self.span();
        self.expect(Tok::Module)?;
        let mname = self.ident()?;
        self.expect(Tok::Dot)?;
        let mut imports = Vec::new();
        while self.eat(&Tok::Import) {
            imports.push(self.ident()?);
            self.expect(Tok::Dot)?;
        }
        let mut params = Vec::new();
        loop {
            let (close, erased) = match self.peek() {
                Tok::LParen => (Tok::RParen, false),
                Tok::LBrace => (Tok::RBrace, true),
                _ => break,
            };
            let pspan = self.span();
            self.bump();
            let pname = self.ident()?;
            self.expect(Tok::Colon)?;
            let classifier = self.expr()?;
            self.expect(close)?;
            self.expect(Tok::Dot)?;
            self.scope.push(pname.clone());
            params.push(Param {
                name: pname,
                classifier,
                erased,
                span: pspan,
            });
        }
        let mut defs = Vec::new();
        while *self.peek() == Tok::Def {
            let dspan = self.span();
            self.bump();
            let dname = self.ident()?;
            self.expect(Tok::Colon)?;
            let classifier = self.expr()?;
            self.expect(Tok::Equals)?;
            let body = self.expr()?;
            self.expect(Tok::Dot)?;
            defs.push(Definition {
                name: dname,
                classifier,
                body,
                span: dspan,
            });
        }
        if *self.peek() != Tok::Eof {
            return self.fail(&["`def`", "end of input"]);
        }
        Ok(ModuleUnit {
            name: mname,
            imports,
            params,
            defs,
            span,
        })
    }

    fn expr(&mut self) -> PResult<Arc<Expr>> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.expr_inner())
    }

    fn expr_inner(&mut self) -> PResult<Arc<Expr>> {
        let binder = match self.peek() {
            Tok::Pi | Tok::All | Tok::Lam | Tok::BigLam | Tok::Iota => self.bump(),
            _ => return self.arrow(),
        };
        let mut names = vec![self.ident()?];
        while let Tok::Ident(_) = self.peek() {
            names.push(self.ident()?);
        }
        let needs_annot = matches!(binder, Tok::Pi | Tok::All | Tok::Iota);
        let annot = if self.eat(&Tok::Colon) {
            Some(self.expr()?)
        } else if needs_annot {
            return self.fail(&["`:`"]);
        } else {
            None
        };
        self.expect(Tok::Dot)?;
        for n in &names {
            self.scope.push(n.clone());
        }
        let mut body = self.expr()?;
        for _ in &names {
            self.scope.pop();
        }
        for (k, n) in names.iter().enumerate().rev() {
            let ann = annot.as_ref().map(|a| crate::syntax::shift(a, k));
            let n = n.clone();
            body = match binder {
                Tok::Pi | Tok::All => {
                    let mode = if binder == Tok::Pi {
                        Mode::Explicit
                    } else {
                        Mode::Erased
                    };
                    Expr::pi(mode, n, ann.unwrap(), body)
                }
                Tok::Lam => Expr::lam(Mode::Explicit, n, ann, body),
                Tok::BigLam => Expr::lam(Mode::Erased, n, ann, body),
                Tok::Iota => Arc::new(Expr::Iota {
                    name: n,
                    left: ann.unwrap(),
                    right: body,
                }),
                _ => unreachable!(),
            };
        }
        Ok(body)
    }

    fn arrow(&mut self) -> PResult<Arc<Expr>> {
        let lhs = self.app()?;
        let mode = match self.peek() {
            Tok::Arrow => Mode::Explicit,
            Tok::FatArrow => Mode::Erased,
            _ => return Ok(lhs),
        };
        self.bump();
        self.scope.push(name("_"));
        let rhs = self.expr();
        self.scope.pop();
        Ok(Expr::pi(mode, name("_"), lhs, rhs?))
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_)
                | Tok::Nat(_)
                | Tok::Star
                | Tok::LParen
                | Tok::LBracket
                | Tok::LBrace
                | Tok::Beta
                | Tok::Rho
                | Tok::Sym
                | Tok::Phi
        )
    }

    fn app(&mut self) -> PResult<Arc<Expr>> {
        let mut f = self.atom()?;
        loop {
            if self.eat(&Tok::ErasedDash) {
                let a = self.atom()?;
                f = Expr::app(Mode::Erased, f, a);
            } else if self.starts_atom() {
                let a = self.atom()?;
                f = Expr::app(Mode::Explicit, f, a);
            } else {
                return Ok(f);
            }
        }
    }

    fn separator(&mut self) -> PResult<()> {
        if self.eat(&Tok::Dash) {
            Ok(())
        } else {
            self.fail(&["` - `"])
        }
    }

    fn atom(&mut self) -> PResult<Arc<Expr>> {
        let mut e = self.atom_base()?;
        while let Tok::Proj(w) = *self.peek() {
            self.bump();
            e = Arc::new(Expr::Proj(w, e));
        }
        Ok(e)
    }

    fn atom_base(&mut self) -> PResult<Arc<Expr>> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(self.resolve(&s))
            }
            Tok::Nat(n) => {
                self.bump();
                let suc = self.resolve("suc");
                let mut e = self.resolve("zero");
                for _ in 0..n {
                    e = Expr::app(Mode::Explicit, suc.clone(), e);
                }
                Ok(e)
            }
            Tok::Star => {
                self.bump();
                Ok(Arc::new(Expr::SortStar))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let l = self.expr()?;
                self.expect(Tok::Comma)?;
                let r = self.expr()?;
                self.expect(Tok::RBracket)?;
                Ok(Arc::new(Expr::Pair(l, r)))
            }
            Tok::LBrace => {
                self.bump();
                let l = self.expr()?;
                self.expect(Tok::Tilde)?;
                let r = self.expr()?;
                self.expect(Tok::RBrace)?;
                Ok(Arc::new(Expr::Eq(l, r)))
            }
            Tok::Beta => {
                self.bump();
                if self.eat(&Tok::LBrace) {
                    let h = self.expr()?;
                    self.expect(Tok::RBrace)?;
                    Ok(Arc::new(Expr::Beta(Some(h))))
                } else {
                    Ok(Arc::new(Expr::Beta(None)))
                }
            }
            Tok::Rho => {
                self.bump();
                let proof = self.atom()?;
                self.expect(Tok::At)?;
                let x = self.ident()?;
                self.expect(Tok::Dot)?;
                self.scope.push(x.clone());
                let motive = self.expr();
                self.scope.pop();
                let motive = motive?;
                self.separator()?;
                let target = self.atom()?;
                Ok(Arc::new(Expr::Rho {
                    proof,
                    name: x,
                    motive,
                    target,
                }))
            }
            Tok::Sym => {
                self.bump();
                Ok(Arc::new(Expr::Sym(self.atom()?)))
            }
            Tok::Phi => {
                self.bump();
                let proof = self.atom()?;
                self.separator()?;
                let typed = self.atom()?;
                self.expect(Tok::LBrace)?;
                let erasure = self.expr()?;
                self.expect(Tok::RBrace)?;
                Ok(Arc::new(Expr::Phi {
                    proof,
                    typed,
                    erasure,
                }))
            }
            _ => self.fail(&["expression"]),
        }
    }
}

pub fn parse_module(text: &str, file: &str) -> Result<ModuleUnit, SyntaxError> {
    Parser::new(text, file)?.module()
}

/// Parse a standalone expression with `scope` (outermost first) bound.
pub fn parse_expr(text: &str, scope: &[Name]) -> Result<Arc<Expr>, SyntaxError> {
    let mut p = Parser::new(text, "<expr>")?;
    p.scope = scope.to_vec();
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.fail(&["end of input"]);
    }
    Ok(e)
}
