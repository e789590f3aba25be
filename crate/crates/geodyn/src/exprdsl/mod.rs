//! Scalar expression DSL in which metrics and tensor fields are written.
//!
//! Expressions are parsed over a declared variable list (`t1..tm`, `x1..xn`,
//! or the jet block `x<i>_<alpha>`), evaluate to IEEE doubles and support
//! exact symbolic differentiation. Values are immutable after construction;
//! evaluation is pure, so a `ScalarExpr` can be shared freely across threads.
//!
//! Simplification is limited to constant folding and the 0/1 identities:
//! correctness over canonical form.

mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parser::parse_expr;

/// Ordered list of declared variable names. The index of a name is the slot
/// it reads from in an evaluation point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSet {
    names: Vec<String>,
}

impl VarSet {
    pub fn new(names: Vec<String>) -> Self {
        VarSet { names }
    }

    /// `t1..tm`
    pub fn t_vars(m: usize) -> Self {
        VarSet::new((1..=m).map(|a| format!("t{a}")).collect())
    }

    /// `x1..xn`
    pub fn x_vars(n: usize) -> Self {
        VarSet::new((1..=n).map(|i| format!("x{i}")).collect())
    }

    /// `t1..tm` followed by `x1..xn`
    pub fn tx_vars(m: usize, n: usize) -> Self {
        let mut names: Vec<String> = (1..=m).map(|a| format!("t{a}")).collect();
        names.extend((1..=n).map(|i| format!("x{i}")));
        VarSet::new(names)
    }

    /// Jet block `x<i>_<alpha>` for alpha = 0..m, i = 1..n, alpha-major.
    /// Slot of `x<i>_<alpha>` is `alpha * n + (i - 1)`.
    pub fn jet_vars(n: usize, m: usize) -> Self {
        let mut names = Vec::with_capacity((m + 1) * n);
        for alpha in 0..=m {
            for i in 1..=n {
                names.push(format!("x{i}_{alpha}"));
            }
        }
        VarSet::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parse(&self, source: &str) -> Result<ScalarExpr, ParseError> {
        parse_expr(source, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed symbolic expression. Construct via [`parse_expr`] or the folding
/// constructors; both keep constants folded as they build.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Num(f64),
    Var { index: usize, name: Arc<str> },
    Unary(UnaryOp, Box<ScalarExpr>),
    Binary(BinOp, Box<ScalarExpr>, Box<ScalarExpr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("no value supplied for variable `{name}` (slot {index})")]
    MissingVariable { name: String, index: usize },
}

impl ScalarExpr {
    pub fn num(v: f64) -> Self {
        ScalarExpr::Num(v)
    }

    pub fn var(index: usize, name: &str) -> Self {
        ScalarExpr::Var {
            index,
            name: Arc::from(name),
        }
    }

    pub fn from_var_set(vars: &VarSet, index: usize) -> Self {
        ScalarExpr::var(index, &vars.names[index])
    }

    pub fn zero() -> Self {
        ScalarExpr::Num(0.0)
    }

    pub fn one() -> Self {
        ScalarExpr::Num(1.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarExpr::Num(v) if *v == 0.0)
    }

    /// Evaluate at a point. `point[i]` is the value of the variable with
    /// slot `i`. Division by zero, `log`/`sqrt` outside their domain and any
    /// non-finite intermediate raise a domain error instead of propagating
    /// NaN or infinity.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            ScalarExpr::Num(v) => *v,
            ScalarExpr::Var { index, name } => {
                *point
                    .get(*index)
                    .ok_or_else(|| EvalError::MissingVariable {
                        name: name.to_string(),
                        index: *index,
                    })?
            }
            ScalarExpr::Unary(op, a) => {
                let x = a.eval(point)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Tan => x.tan(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x <= 0.0 {
                            return Err(self.domain_error("log of non-positive argument"));
                        }
                        x.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain_error("sqrt of negative argument"));
                        }
                        x.sqrt()
                    }
                    UnaryOp::Sinh => x.sinh(),
                    UnaryOp::Cosh => x.cosh(),
                }
            }
            ScalarExpr::Binary(op, a, b) => {
                let x = a.eval(point)?;
                let y = b.eval(point)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(self.domain_error("division by zero"));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let r = x.powf(y);
                        if r.is_nan() {
                            return Err(self.domain_error("invalid power (negative base?)"));
                        }
                        r
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(self.domain_error("non-finite result"));
        }
        Ok(v)
    }

    fn domain_error(&self, reason: &str) -> EvalError {
        EvalError::Domain {
            expr: self.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Exact symbolic partial derivative with respect to variable slot `var`.
    pub fn diff(&self, var: usize) -> ScalarExpr {
        match self {
            ScalarExpr::Num(_) => ScalarExpr::zero(),
            ScalarExpr::Var { index, .. } => {
                if *index == var {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }
            ScalarExpr::Unary(op, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return ScalarExpr::zero();
                }
                let a = a.as_ref().clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Sin => mul(cos(a), da),
                    UnaryOp::Cos => neg(mul(sin(a), da)),
                    UnaryOp::Tan => div(da, mul(cos(a.clone()), cos(a))),
                    UnaryOp::Exp => mul(exp(a), da),
                    UnaryOp::Log => div(da, a),
                    UnaryOp::Sqrt => div(da, mul(ScalarExpr::num(2.0), sqrt(a))),
                    UnaryOp::Sinh => mul(cosh(a), da),
                    UnaryOp::Cosh => mul(sinh(a), da),
                }
            }
            ScalarExpr::Binary(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.diff(var), b.diff(var)),
                    BinOp::Sub => sub(a.diff(var), b.diff(var)),
                    BinOp::Mul => add(
                        mul(a.diff(var), b.clone()),
                        mul(a.clone(), b.diff(var)),
                    ),
                    BinOp::Div => {
                        let num = sub(
                            mul(a.diff(var), b.clone()),
                            mul(a.clone(), b.diff(var)),
                        );
                        div(num, mul(b.clone(), b.clone()))
                    }
                    BinOp::Pow => {
                        let db = b.diff(var);
                        let da = a.diff(var);
                        if db.is_zero() {
                            // u^c with constant-in-var exponent: c * u^(c-1) * u'
                            let reduced = pow(a.clone(), sub(b.clone(), ScalarExpr::one()));
                            mul(mul(b.clone(), reduced), da)
                        } else {
                            // u^v * (v' log u + v u' / u)
                            let term = add(
                                mul(db, log(a.clone())),
                                div(mul(b.clone(), da), a.clone()),
                            );
                            mul(pow(a.clone(), b.clone()), term)
                        }
                    }
                }
            }
        }
    }

    /// Replace every variable slot `i` by `replacements[i]`. Used to compose
    /// fields, e.g. pulling a metric on M back through an analytic map.
    pub fn substitute(&self, replacements: &[ScalarExpr]) -> ScalarExpr {
        match self {
            ScalarExpr::Num(v) => ScalarExpr::Num(*v),
            ScalarExpr::Var { index, .. } => replacements[*index].clone(),
            ScalarExpr::Unary(op, a) => fold_unary(*op, a.substitute(replacements)),
            ScalarExpr::Binary(op, a, b) => fold_binary(
                *op,
                a.substitute(replacements),
                b.substitute(replacements),
            ),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ScalarExpr::Num(v) if *v < 0.0 => 3,
            ScalarExpr::Num(_) | ScalarExpr::Var { .. } => 5,
            ScalarExpr::Unary(UnaryOp::Neg, _) => 3,
            ScalarExpr::Unary(..) => 5,
            ScalarExpr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            ScalarExpr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            ScalarExpr::Binary(BinOp::Pow, ..) => 4,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &ScalarExpr, min: u8) -> fmt::Result {
    if child.precedence() < min {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarExpr::Num(v) => write!(f, "{v}"),
            ScalarExpr::Var { name, .. } => write!(f, "{name}"),
            ScalarExpr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                write_child(f, a, 4)
            }
            ScalarExpr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            ScalarExpr::Binary(op, a, b) => match op {
                BinOp::Add => {
                    write_child(f, a, 1)?;
                    write!(f, " + ")?;
                    write_child(f, b, 2)
                }
                BinOp::Sub => {
                    write_child(f, a, 1)?;
                    write!(f, " - ")?;
                    write_child(f, b, 2)
                }
                BinOp::Mul => {
                    write_child(f, a, 2)?;
                    write!(f, "*")?;
                    write_child(f, b, 3)
                }
                BinOp::Div => {
                    write_child(f, a, 2)?;
                    write!(f, "/")?;
                    write_child(f, b, 3)
                }
                BinOp::Pow => {
                    write_child(f, a, 5)?;
                    write!(f, "^")?;
                    write_child(f, b, 4)
                }
            },
        }
    }
}

fn both_nums(a: &ScalarExpr, b: &ScalarExpr) -> Option<(f64, f64)> {
    match (a, b) {
        (ScalarExpr::Num(x), ScalarExpr::Num(y)) => Some((*x, *y)),
        _ => None,
    }
}

/// Folding constructors. Constant subtrees collapse when the result is
/// finite and does not change the error behaviour of the expression.
pub fn add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let Some((x, y)) = both_nums(&a, &b) {
        if (x + y).is_finite() {
            return ScalarExpr::Num(x + y);
        }
    }
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    ScalarExpr::Binary(BinOp::Add, Box::new(a), Box::new(b))
}

pub fn sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let Some((x, y)) = both_nums(&a, &b) {
        if (x - y).is_finite() {
            return ScalarExpr::Num(x - y);
        }
    }
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    ScalarExpr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
}

pub fn mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let Some((x, y)) = both_nums(&a, &b) {
        if (x * y).is_finite() {
            return ScalarExpr::Num(x * y);
        }
    }
    if a.is_zero() || b.is_zero() {
        return ScalarExpr::zero();
    }
    if matches!(a, ScalarExpr::Num(v) if v == 1.0) {
        return b;
    }
    if matches!(b, ScalarExpr::Num(v) if v == 1.0) {
        return a;
    }
    ScalarExpr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
}

pub fn div(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let ScalarExpr::Num(y) = b {
        if y != 0.0 {
            if let ScalarExpr::Num(x) = a {
                if (x / y).is_finite() {
                    return ScalarExpr::Num(x / y);
                }
            }
            if a.is_zero() {
                return ScalarExpr::zero();
            }
            if y == 1.0 {
                return a;
            }
        }
    }
    ScalarExpr::Binary(BinOp::Div, Box::new(a), Box::new(b))
}

pub fn pow(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let ScalarExpr::Num(y) = b {
        if y == 1.0 {
            return a;
        }
        if y == 0.0 {
            return ScalarExpr::one();
        }
        if let ScalarExpr::Num(x) = a {
            let r = x.powf(y);
            if r.is_finite() {
                return ScalarExpr::Num(r);
            }
        }
    }
    ScalarExpr::Binary(BinOp::Pow, Box::new(a), Box::new(b))
}

pub fn neg(a: ScalarExpr) -> ScalarExpr {
    match a {
        ScalarExpr::Num(v) => ScalarExpr::Num(-v),
        ScalarExpr::Unary(UnaryOp::Neg, inner) => *inner,
        other => ScalarExpr::Unary(UnaryOp::Neg, Box::new(other)),
    }
}

macro_rules! unary_ctor {
    ($name:ident, $op:expr) => {
        pub fn $name(a: ScalarExpr) -> ScalarExpr {
            fold_unary($op, a)
        }
    };
}

unary_ctor!(sin, UnaryOp::Sin);
unary_ctor!(cos, UnaryOp::Cos);
unary_ctor!(tan, UnaryOp::Tan);
unary_ctor!(exp, UnaryOp::Exp);
unary_ctor!(log, UnaryOp::Log);
unary_ctor!(sqrt, UnaryOp::Sqrt);
unary_ctor!(sinh, UnaryOp::Sinh);
unary_ctor!(cosh, UnaryOp::Cosh);

fn fold_unary(op: UnaryOp, a: ScalarExpr) -> ScalarExpr {
    if op == UnaryOp::Neg {
        return neg(a);
    }
    if let ScalarExpr::Num(x) = a {
        let v = match op {
            UnaryOp::Neg => unreachable!(),
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => x.tan(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Sinh => x.sinh(),
            UnaryOp::Cosh => x.cosh(),
        };
        if v.is_finite() {
            return ScalarExpr::Num(v);
        }
    }
    ScalarExpr::Unary(op, Box::new(a))
}

fn fold_binary(op: BinOp, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    match op {
        BinOp::Add => add(a, b),
        BinOp::Sub => sub(a, b),
        BinOp::Mul => mul(a, b),
        BinOp::Div => div(a, b),
        BinOp::Pow => pow(a, b),
    }
}

/// Seeded random expression over `vars`, depth-limited. Used by the
/// derivative validation harnesses; `log` and `sqrt` arguments are offset so
/// most sample points stay inside their domain.
pub fn random_expr<R: rand::Rng>(rng: &mut R, vars: &VarSet, depth: usize) -> ScalarExpr {
    if depth == 0 {
        return if rng.random_bool(0.7) && !vars.is_empty() {
            let i = rng.random_range(0..vars.len());
            ScalarExpr::from_var_set(vars, i)
        } else {
            ScalarExpr::Num((rng.random_range(-20..=20) as f64) / 10.0)
        };
    }
    let next = depth - 1;
    match rng.random_range(0..12u32) {
        0 => add(random_expr(rng, vars, next), random_expr(rng, vars, next)),
        1 => sub(random_expr(rng, vars, next), random_expr(rng, vars, next)),
        2 | 3 => mul(random_expr(rng, vars, next), random_expr(rng, vars, next)),
        4 => div(
            random_expr(rng, vars, next),
            add(ScalarExpr::num(2.5), random_expr(rng, vars, next)),
        ),
        5 => pow(
            random_expr(rng, vars, next),
            ScalarExpr::num(rng.random_range(2..=3) as f64),
        ),
        6 => sin(random_expr(rng, vars, next)),
        7 => cos(random_expr(rng, vars, next)),
        8 => exp(random_expr(rng, vars, next)),
        9 => log(add(ScalarExpr::num(3.0), random_expr(rng, vars, next))),
        10 => sqrt(add(ScalarExpr::num(3.0), random_expr(rng, vars, next))),
        _ => sinh(random_expr(rng, vars, next)),
    }
}
