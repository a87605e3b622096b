use std::fmt;

use crate::error::DomainKind;

/// Elementary one-argument functions understood by the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Abs,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "ln" | "log" => Self::Ln,
            "abs" => Self::Abs,
            "sqrt" => Self::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Exp => "exp",
            Self::Ln => "ln",
            Self::Abs => "abs",
            Self::Sqrt => "sqrt",
        }
    }

    pub(crate) fn apply(self, u: f64) -> Result<f64, DomainKind> {
        let v = match self {
            Self::Sin => u.sin(),
            Self::Cos => u.cos(),
            Self::Tan => u.tan(),
            Self::Exp => u.exp(),
            Self::Ln => {
                if u <= 0.0 {
                    return Err(DomainKind::LogOfNonPositive);
                }
                u.ln()
            }
            Self::Abs => u.abs(),
            Self::Sqrt => {
                if u < 0.0 {
                    return Err(DomainKind::SqrtOfNegative);
                }
                u.sqrt()
            }
        };
        finite(v)
    }

    /// d/du of the function, given the argument `u` and the value `v = f(u)`.
    pub(crate) fn derivative(self, u: f64, v: f64) -> Result<f64, DomainKind> {
        let d = match self {
            Self::Sin => u.cos(),
            Self::Cos => -u.sin(),
            Self::Tan => 1.0 + v * v,
            Self::Exp => v,
            Self::Ln => 1.0 / u,
            // Subgradient convention: sign(0) = 0.
            Self::Abs => {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Sqrt => {
                if v == 0.0 {
                    return Err(DomainKind::NotDifferentiable);
                }
                0.5 / v
            }
        };
        finite(d)
    }
}

/// Constant exponent of a power node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Int(i32),
    Real(f64),
}

impl Exponent {
    pub fn from_value(p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            Self::Int(p as i32)
        } else {
            Self::Real(p)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Int(n) => n as f64,
            Self::Real(p) => p,
        }
    }
}

/// Expression tree over indexed variables and an optional time symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Time,
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Exponent),
}

#[inline]
pub(crate) fn finite(v: f64) -> Result<f64, DomainKind> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainKind::NonFinite)
    }
}

/// `base^n` by binary exponentiation, so small powers are exact products.
pub(crate) fn int_pow(base: f64, n: i32) -> Result<f64, DomainKind> {
    if n < 0 && base == 0.0 {
        return Err(DomainKind::DivisionByZero);
    }
    let mut e = n.unsigned_abs();
    let mut b = base;
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        e >>= 1;
        if e > 0 {
            b *= b;
        }
    }
    finite(if n < 0 { 1.0 / acc } else { acc })
}

pub(crate) fn real_pow(base: f64, p: f64) -> Result<f64, DomainKind> {
    if base <= 0.0 {
        return Err(DomainKind::NonPositiveBase);
    }
    finite(base.powf(p))
}

pub(crate) fn divide(a: f64, b: f64) -> Result<f64, DomainKind> {
    if b == 0.0 {
        return Err(DomainKind::DivisionByZero);
    }
    finite(a / b)
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Self::Var(i)
    }

    pub fn constant(v: f64) -> Self {
        Self::Const(v)
    }

    /// Evaluates at `vars` with the time symbol bound to `time`.
    pub fn eval(&self, vars: &[f64], time: f64) -> Result<f64, DomainKind> {
        match self {
            Self::Const(c) => Ok(*c),
            Self::Var(i) => Ok(vars[*i]),
            Self::Time => Ok(time),
            Self::Neg(a) => Ok(-a.eval(vars, time)?),
            Self::Func(f, a) => f.apply(a.eval(vars, time)?),
            Self::Add(a, b) => finite(a.eval(vars, time)? + b.eval(vars, time)?),
            Self::Sub(a, b) => finite(a.eval(vars, time)? - b.eval(vars, time)?),
            Self::Mul(a, b) => finite(a.eval(vars, time)? * b.eval(vars, time)?),
            Self::Div(a, b) => divide(a.eval(vars, time)?, b.eval(vars, time)?),
            Self::Pow(a, Exponent::Int(n)) => int_pow(a.eval(vars, time)?, *n),
            Self::Pow(a, Exponent::Real(p)) => real_pow(a.eval(vars, time)?, *p),
        }
    }

    /// Forward-mode evaluation along the coordinate direction `dir`:
    /// returns `(value, d value / d vars[dir])`.
    pub fn eval_tangent(
        &self,
        vars: &[f64],
        time: f64,
        dir: usize,
    ) -> Result<(f64, f64), DomainKind> {
        Ok(match self {
            Self::Const(c) => (*c, 0.0),
            Self::Var(i) => (vars[*i], if *i == dir { 1.0 } else { 0.0 }),
            Self::Time => (time, 0.0),
            Self::Neg(a) => {
                let (v, d) = a.eval_tangent(vars, time, dir)?;
                (-v, -d)
            }
            Self::Func(f, a) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let v = f.apply(u)?;
                (v, finite(f.derivative(u, v)? * du)?)
            }
            Self::Add(a, b) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let (w, dw) = b.eval_tangent(vars, time, dir)?;
                (finite(u + w)?, du + dw)
            }
            Self::Sub(a, b) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let (w, dw) = b.eval_tangent(vars, time, dir)?;
                (finite(u - w)?, du - dw)
            }
            Self::Mul(a, b) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let (w, dw) = b.eval_tangent(vars, time, dir)?;
                (finite(u * w)?, finite(du * w + u * dw)?)
            }
            Self::Div(a, b) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let (w, dw) = b.eval_tangent(vars, time, dir)?;
                let v = divide(u, w)?;
                (v, finite((du - v * dw) / w)?)
            }
            Self::Pow(a, Exponent::Int(n)) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let v = int_pow(u, *n)?;
                let d = if *n == 0 {
                    0.0
                } else {
                    *n as f64 * int_pow(u, n - 1)? * du
                };
                (v, finite(d)?)
            }
            Self::Pow(a, Exponent::Real(p)) => {
                let (u, du) = a.eval_tangent(vars, time, dir)?;
                let v = real_pow(u, *p)?;
                (v, finite(p * real_pow(u, p - 1.0)? * du)?)
            }
        })
    }

    /// Replaces the time symbol by a constant.
    pub fn fix_time(&self, time: f64) -> Expr {
        let b = |e: &Expr| Box::new(e.fix_time(time));
        match self {
            Self::Time => Self::Const(time),
            Self::Const(_) | Self::Var(_) => self.clone(),
            Self::Neg(a) => Self::Neg(b(a)),
            Self::Func(f, a) => Self::Func(*f, b(a)),
            Self::Add(x, y) => Self::Add(b(x), b(y)),
            Self::Sub(x, y) => Self::Sub(b(x), b(y)),
            Self::Mul(x, y) => Self::Mul(b(x), b(y)),
            Self::Div(x, y) => Self::Div(b(x), b(y)),
            Self::Pow(a, e) => Self::Pow(b(a), *e),
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Self::Time => true,
            Self::Const(_) | Self::Var(_) => false,
            Self::Neg(a) | Self::Func(_, a) | Self::Pow(a, _) => a.uses_time(),
            Self::Add(x, y) | Self::Sub(x, y) | Self::Mul(x, y) | Self::Div(x, y) => {
                x.uses_time() || y.uses_time()
            }
        }
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Self::Var(i) => Some(*i),
            Self::Const(_) | Self::Time => None,
            Self::Neg(a) | Self::Func(_, a) | Self::Pow(a, _) => a.max_var(),
            Self::Add(x, y) | Self::Sub(x, y) | Self::Mul(x, y) | Self::Div(x, y) => {
                x.max_var().max(y.max_var())
            }
        }
    }

    /// Renders with variable names resolved through `names`.
    pub fn display<'a>(&'a self, names: &'a [String], time: &'a str) -> ExprDisplay<'a> {
        ExprDisplay {
            expr: self,
            names,
            time,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Self::Add(..) | Self::Sub(..) => 1,
            Self::Mul(..) | Self::Div(..) => 2,
            Self::Neg(_) => 3,
            Self::Const(c) if *c < 0.0 => 3,
            Self::Pow(..) => 4,
            _ => 5,
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
    time: &'a str,
}

impl ExprDisplay<'_> {
    fn child<'b>(&'b self, e: &'b Expr) -> ExprDisplay<'b> {
        ExprDisplay {
            expr: e,
            names: self.names,
            time: self.time,
        }
    }

    fn wrapped(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
        if e.precedence() < min {
            write!(f, "({})", self.child(e))
        } else {
            write!(f, "{}", self.child(e))
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Time => write!(f, "{}", self.time),
            Expr::Neg(a) => {
                write!(f, "-")?;
                self.wrapped(f, a, 4)
            }
            Expr::Func(func, a) => write!(f, "{}({})", func.name(), self.child(a)),
            Expr::Add(a, b) => {
                self.wrapped(f, a, 1)?;
                write!(f, " + ")?;
                self.wrapped(f, b, 2)
            }
            Expr::Sub(a, b) => {
                self.wrapped(f, a, 1)?;
                write!(f, " - ")?;
                self.wrapped(f, b, 2)
            }
            Expr::Mul(a, b) => {
                self.wrapped(f, a, 2)?;
                write!(f, "*")?;
                self.wrapped(f, b, 3)
            }
            Expr::Div(a, b) => {
                self.wrapped(f, a, 2)?;
                write!(f, "/")?;
                self.wrapped(f, b, 3)
            }
            Expr::Pow(a, e) => {
                self.wrapped(f, a, 5)?;
                match e {
                    Exponent::Int(n) if *n < 0 => write!(f, "^({n})"),
                    Exponent::Int(n) => write!(f, "^{n}"),
                    Exponent::Real(p) if *p < 0.0 => write!(f, "^({p})"),
                    Exponent::Real(p) => write!(f, "^{p}"),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Box<Expr> {
        Box::new(Expr::Var(0))
    }

    #[test]
    fn int_pow_is_exact_product() {
        let b = 1.1_f64;
        assert_eq!(int_pow(b, 2).unwrap(), b * b);
        assert_eq!(int_pow(b, 3).unwrap(), b * b * b);
        assert_eq!(int_pow(b, 0).unwrap(), 1.0);
        assert_eq!(int_pow(0.0, -1), Err(DomainKind::DivisionByZero));
    }

    #[test]
    fn domain_errors_are_explicit() {
        let recip = Expr::Div(Box::new(Expr::Const(1.0)), x());
        assert_eq!(recip.eval(&[0.0], 0.0), Err(DomainKind::DivisionByZero));
        let ln = Expr::Func(Func::Ln, x());
        assert_eq!(ln.eval(&[0.0], 0.0), Err(DomainKind::LogOfNonPositive));
        assert_eq!(ln.eval(&[-1.0], 0.0), Err(DomainKind::LogOfNonPositive));
        let half = Expr::Pow(x(), Exponent::Real(0.5));
        assert_eq!(half.eval(&[-4.0], 0.0), Err(DomainKind::NonPositiveBase));
        let inv2 = Expr::Pow(x(), Exponent::Int(-2));
        assert_eq!(inv2.eval(&[0.0], 0.0), Err(DomainKind::DivisionByZero));
        let big = Expr::Func(Func::Exp, x());
        assert_eq!(big.eval(&[1000.0], 0.0), Err(DomainKind::NonFinite));
    }

    #[test]
    fn abs_tangent_uses_zero_subgradient() {
        let e = Expr::Func(Func::Abs, x());
        assert_eq!(e.eval_tangent(&[0.0], 0.0, 0).unwrap(), (0.0, 0.0));
        assert_eq!(e.eval_tangent(&[-2.0], 0.0, 0).unwrap(), (2.0, -1.0));
    }

    #[test]
    fn fix_time_substitutes_constant() {
        let e = Expr::Mul(Box::new(Expr::Time), x());
        assert!(e.uses_time());
        let fixed = e.fix_time(3.0);
        assert!(!fixed.uses_time());
        assert_eq!(fixed.eval(&[2.0], 100.0).unwrap(), 6.0);
    }
}
