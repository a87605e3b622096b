//! Line-oriented equation language. The grammar is documented in `docs/dsl.md`.

use super::ast::{Exponent, Expr, Func};
use super::system::{Interval, System, TimeAxis};
use crate::error::{ParseError, ParseErrorKind};

/// Domain assumed for a variable without a `domain:` line.
pub const DEFAULT_DOMAIN: Interval = Interval {
    lo: -10.0,
    hi: 10.0,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of line".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn lex(text: &str, line: usize, col0: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| err(line, col, ParseErrorKind::InvalidNumber(s.clone())))?;
            out.push(Token { tok: Tok::Num(v), col });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(s), col });
        } else if "+-*/^()[],=|:".contains(c) {
            out.push(Token { tok: Tok::Sym(c), col });
            i += 1;
        } else {
            return Err(err(line, col, ParseErrorKind::UnexpectedChar(c)));
        }
    }
    out.push(Token {
        tok: Tok::End,
        col: col0 + chars.len(),
    });
    Ok(out)
}

/// Variable and time-symbol resolution shared across lines.
struct Names {
    vars: Vec<String>,
    strict: bool,
    time: Option<String>,
}

impl Names {
    fn resolve(&mut self, name: &str) -> Option<Expr> {
        if self.time.as_deref() == Some(name) {
            return Some(Expr::Time);
        }
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Some(Expr::Var(i));
        }
        if self.strict {
            return None;
        }
        self.vars.push(name.to_string());
        Some(Expr::Var(self.vars.len() - 1))
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    names: &'a mut Names,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn col(&self) -> usize {
        self.toks[self.pos].col
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, kind: ParseErrorKind) -> Result<T, ParseError> {
        Err(err(self.line, self.col(), kind))
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ParseError> {
        self.fail(ParseErrorKind::UnexpectedToken {
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Sym('-') => {
                // A minus directly on a literal folds into a negative constant,
                // unless the literal is the base of a power (`-2^2` is `-(2^2)`).
                if let Tok::Num(v) = *self.peek_at(1) {
                    if *self.peek_at(2) != Tok::Sym('^') {
                        self.bump();
                        self.bump();
                        return Ok(Expr::Const(-v));
                    }
                }
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let col = self.col();
        let exponent = self.unary()?;
        if exponent_has_symbols(&exponent) {
            return Err(err(self.line, col, ParseErrorKind::NonConstantExponent));
        }
        match exponent.eval(&[], 0.0) {
            Ok(p) => Ok(Expr::Pow(Box::new(base), Exponent::from_value(p))),
            Err(_) => Err(err(self.line, col, ParseErrorKind::NonConstantExponent)),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Sym('|') => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym('|')?;
                Ok(Expr::Func(Func::Abs, Box::new(e)))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        err(self.line, col, ParseErrorKind::UnknownFunction(name.clone()))
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Sym(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect_sym(')')?;
                    if args.len() != 1 {
                        return Err(err(
                            self.line,
                            col,
                            ParseErrorKind::Arity {
                                function: name,
                                expected: 1,
                                found: args.len(),
                            },
                        ));
                    }
                    return Ok(Expr::Func(func, Box::new(args.pop().unwrap())));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                if Func::from_name(&name).is_some() {
                    return self.unexpected("`(` after function name");
                }
                self.names
                    .resolve(&name)
                    .ok_or_else(|| err(self.line, col, ParseErrorKind::UnknownIdentifier(name)))
            }
            _ => self.unexpected("an expression"),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                true
            }
            Tok::Sym('+') => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            Tok::Ident(s) if s == "pi" => {
                self.bump();
                let v = std::f64::consts::PI;
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("a number"),
        }
    }

    /// `[lo, hi]` or `(lo, hi)`; both are stored as closed intervals.
    fn interval(&mut self) -> Result<Interval, ParseError> {
        let col = self.col();
        match self.peek() {
            Tok::Sym('[') | Tok::Sym('(') => {
                self.bump();
            }
            _ => return self.unexpected("`[` or `(`"),
        }
        let lo = self.signed_number()?;
        self.expect_sym(',')?;
        let hi = self.signed_number()?;
        match self.peek() {
            Tok::Sym(']') | Tok::Sym(')') => {
                self.bump();
            }
            _ => return self.unexpected("`]` or `)`"),
        }
        if !(lo < hi) {
            return Err(err(
                self.line,
                col,
                ParseErrorKind::InvalidDomain(format!("lower bound {lo} is not below upper bound {hi}")),
            ));
        }
        Ok(Interval { lo, hi })
    }

    fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            _ => self.unexpected(&format!("`{word}`")),
        }
    }

    fn ident(&mut self) -> Result<(String, usize), ParseError> {
        let col = self.col();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, col))
            }
            _ => self.unexpected("a name"),
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => self.unexpected("end of line"),
        }
    }
}

fn exponent_has_symbols(e: &Expr) -> bool {
    e.max_var().is_some() || e.uses_time()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Vars,
    Time,
    Domain,
    Equation,
}

struct Line<'a> {
    number: usize,
    kind: LineKind,
    body: &'a str,
    col0: usize,
}

fn classify(number: usize, raw: &str) -> Option<Line<'_>> {
    let text = raw.split('#').next().unwrap_or("");
    if text.trim().is_empty() {
        return None;
    }
    let trimmed = text.trim_start();
    for (word, kind) in [
        ("vars", LineKind::Vars),
        ("time", LineKind::Time),
        ("domain", LineKind::Domain),
    ] {
        if let Some(rest) = trimmed.strip_prefix(word) {
            if let Some(body) = rest.trim_start().strip_prefix(':') {
                let col0 = text.len() - body.len() + 1;
                return Some(Line {
                    number,
                    kind,
                    body,
                    col0,
                });
            }
        }
    }
    Some(Line {
        number,
        kind: LineKind::Equation,
        body: text,
        col0: 1,
    })
}

/// Parses a system written in the equation language.
pub fn parse_system(source: &str) -> Result<System, ParseError> {
    let lines: Vec<Line> = source
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| classify(i + 1, raw))
        .collect();

    let mut names = Names {
        vars: Vec::new(),
        strict: false,
        time: None,
    };
    let mut time_interval = None;

    for line in lines.iter().filter(|l| l.kind == LineKind::Vars) {
        names.strict = true;
        let toks = lex(line.body, line.number, line.col0)?;
        let mut p = Parser {
            toks,
            pos: 0,
            line: line.number,
            names: &mut names,
        };
        let mut declared = Vec::new();
        loop {
            declared.push(p.ident()?);
            if *p.peek() == Tok::Sym(',') {
                p.bump();
            } else {
                p.end()?;
                break;
            }
        }
        for (name, col) in declared {
            if names.vars.contains(&name) || Func::from_name(&name).is_some() || name == "pi" {
                let kind = if names.vars.contains(&name) {
                    ParseErrorKind::DuplicateVariable(name)
                } else {
                    ParseErrorKind::UnexpectedToken {
                        expected: "a variable name".into(),
                        found: format!("reserved name `{name}`"),
                    }
                };
                return Err(err(line.number, col, kind));
            }
            names.vars.push(name);
        }
    }

    for line in lines.iter().filter(|l| l.kind == LineKind::Time) {
        let toks = lex(line.body, line.number, line.col0)?;
        let mut p = Parser {
            toks,
            pos: 0,
            line: line.number,
            names: &mut names,
        };
        let (name, col) = p.ident()?;
        p.keyword("in")?;
        let iv = p.interval()?;
        p.end()?;
        if names.time.is_some() {
            return Err(err(line.number, col, ParseErrorKind::DuplicateVariable(name)));
        }
        if names.vars.contains(&name) {
            return Err(err(line.number, col, ParseErrorKind::DuplicateVariable(name)));
        }
        names.time = Some(name.clone());
        time_interval = Some(TimeAxis { name, interval: iv });
    }

    let mut equations = Vec::new();
    for line in lines.iter().filter(|l| l.kind == LineKind::Equation) {
        let toks = lex(line.body, line.number, line.col0)?;
        let mut p = Parser {
            toks,
            pos: 0,
            line: line.number,
            names: &mut names,
        };
        let lhs = p.expr()?;
        p.expect_sym('=')?;
        let rhs = p.expr()?;
        p.end()?;
        equations.push(match rhs {
            Expr::Const(c) if c == 0.0 => lhs,
            rhs => Expr::Sub(Box::new(lhs), Box::new(rhs)),
        });
    }
    if equations.is_empty() {
        let line = lines.last().map_or(1, |l| l.number);
        return Err(err(line, 1, ParseErrorKind::EmptySystem));
    }

    let mut domain = vec![DEFAULT_DOMAIN; names.vars.len()];
    for line in lines.iter().filter(|l| l.kind == LineKind::Domain) {
        let toks = lex(line.body, line.number, line.col0)?;
        let nvars = names.vars.len();
        let vars = names.vars.clone();
        let mut p = Parser {
            toks,
            pos: 0,
            line: line.number,
            names: &mut names,
        };
        loop {
            let target = if *p.peek() == Tok::Sym('*') {
                p.bump();
                None
            } else {
                let (name, col) = p.ident()?;
                let idx = vars.iter().position(|v| *v == name).ok_or_else(|| {
                    err(line.number, col, ParseErrorKind::UnknownIdentifier(name.clone()))
                })?;
                Some(idx)
            };
            p.keyword("in")?;
            let iv = p.interval()?;
            match target {
                Some(i) => domain[i] = iv,
                None => domain.iter_mut().take(nvars).for_each(|d| *d = iv),
            }
            if *p.peek() == Tok::Sym(',') {
                p.bump();
            } else {
                p.end()?;
                break;
            }
        }
    }

    if time_interval.is_none() && equations.len() != names.vars.len() {
        return Err(err(
            lines[0].number,
            1,
            ParseErrorKind::NotSquare {
                equations: equations.len(),
                variables: names.vars.len(),
            },
        ));
    }

    Ok(System::new(equations, names.vars, domain, time_interval))
}
