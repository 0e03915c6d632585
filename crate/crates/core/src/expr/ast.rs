//! Expression tree: nodes, smart constructors, differentiation, evaluation.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;

use super::{EvalError, Var};

/// Exact rational exponent; keeps half-integer powers symbolically exact.
pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Neg(Arc<Node>),
    /// Power with an exact rational exponent.
    Pow(Arc<Node>, Rational),
    Exp(Arc<Node>),
    Log(Arc<Node>),
    Sqrt(Arc<Node>),
    Sin(Arc<Node>),
    Cos(Arc<Node>),
}

impl Node {
    fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }
}

fn is_const(node: &Node, value: f64) -> bool {
    matches!(node, Node::Const(c) if *c == value)
}

// Smart constructors. Only the cheap identities (x+0, x*0, x*1, constant
// folding, pow 0/1) are applied so derivative trees stay bounded; values are
// never changed on the common domain.

pub fn cnst(c: f64) -> Arc<Node> {
    Arc::new(Node::Const(c))
}

pub fn var(v: Var) -> Arc<Node> {
    Arc::new(Node::Var(v))
}

pub fn add(l: Arc<Node>, r: Arc<Node>) -> Arc<Node> {
    if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
        let s = a + b;
        if s.is_finite() {
            return cnst(s);
        }
    }
    if is_const(&l, 0.0) {
        return r;
    }
    if is_const(&r, 0.0) {
        return l;
    }
    Arc::new(Node::Add(l, r))
}

pub fn sub(l: Arc<Node>, r: Arc<Node>) -> Arc<Node> {
    if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
        let s = a - b;
        if s.is_finite() {
            return cnst(s);
        }
    }
    if is_const(&r, 0.0) {
        return l;
    }
    if is_const(&l, 0.0) {
        return neg(r);
    }
    Arc::new(Node::Sub(l, r))
}

pub fn mul(l: Arc<Node>, r: Arc<Node>) -> Arc<Node> {
    if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
        let p = a * b;
        if p.is_finite() {
            return cnst(p);
        }
    }
    if is_const(&l, 0.0) || is_const(&r, 0.0) {
        return cnst(0.0);
    }
    if is_const(&l, 1.0) {
        return r;
    }
    if is_const(&r, 1.0) {
        return l;
    }
    Arc::new(Node::Mul(l, r))
}

pub fn div(l: Arc<Node>, r: Arc<Node>) -> Arc<Node> {
    if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
        // Fold only when the quotient is well defined; 1/0 stays symbolic and
        // surfaces as a domain error at evaluation.
        if b != 0.0 {
            let q = a / b;
            if q.is_finite() {
                return cnst(q);
            }
        }
    }
    if is_const(&r, 1.0) {
        return l;
    }
    if is_const(&l, 0.0) && !is_const(&r, 0.0) {
        return cnst(0.0);
    }
    Arc::new(Node::Div(l, r))
}

pub fn neg(x: Arc<Node>) -> Arc<Node> {
    match &*x {
        Node::Const(c) => cnst(-c),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(x)),
    }
}

pub fn pow(base: Arc<Node>, exponent: Rational) -> Arc<Node> {
    if exponent == Rational::from_integer(0) {
        return cnst(1.0);
    }
    if exponent == Rational::from_integer(1) {
        return base;
    }
    if let Some(b) = base.as_const() {
        if let Ok(v) = pow_value(b, exponent) {
            if v.is_finite() {
                return cnst(v);
            }
        }
    }
    Arc::new(Node::Pow(base, exponent))
}

pub fn exp(x: Arc<Node>) -> Arc<Node> {
    if is_const(&x, 0.0) {
        return cnst(1.0);
    }
    Arc::new(Node::Exp(x))
}

pub fn log(x: Arc<Node>) -> Arc<Node> {
    if is_const(&x, 1.0) {
        return cnst(0.0);
    }
    Arc::new(Node::Log(x))
}

pub fn sqrt(x: Arc<Node>) -> Arc<Node> {
    if let Some(c) = x.as_const() {
        if c >= 0.0 {
            return cnst(c.sqrt());
        }
    }
    Arc::new(Node::Sqrt(x))
}

pub fn sin(x: Arc<Node>) -> Arc<Node> {
    if is_const(&x, 0.0) {
        return cnst(0.0);
    }
    Arc::new(Node::Sin(x))
}

pub fn cos(x: Arc<Node>) -> Arc<Node> {
    if is_const(&x, 0.0) {
        return cnst(1.0);
    }
    Arc::new(Node::Cos(x))
}

/// Exact symbolic partial derivative with respect to `by`.
pub fn differentiate(node: &Arc<Node>, by: Var) -> Arc<Node> {
    match &**node {
        Node::Const(_) => cnst(0.0),
        Node::Var(v) => cnst(if *v == by { 1.0 } else { 0.0 }),
        Node::Add(l, r) => add(differentiate(l, by), differentiate(r, by)),
        Node::Sub(l, r) => sub(differentiate(l, by), differentiate(r, by)),
        Node::Mul(l, r) => add(
            mul(differentiate(l, by), r.clone()),
            mul(l.clone(), differentiate(r, by)),
        ),
        Node::Div(l, r) => {
            // (l/r)' = l'/r - l r'/r^2
            let dl = differentiate(l, by);
            let dr = differentiate(r, by);
            sub(
                div(dl, r.clone()),
                div(mul(l.clone(), dr), pow(r.clone(), Rational::from_integer(2))),
            )
        }
        Node::Neg(x) => neg(differentiate(x, by)),
        Node::Pow(base, q) => {
            // d x^q = q x^(q-1) x'
            let db = differentiate(base, by);
            let qf = rational_to_f64(*q);
            mul(
                mul(cnst(qf), pow(base.clone(), *q - Rational::from_integer(1))),
                db,
            )
        }
        Node::Exp(x) => mul(exp(x.clone()), differentiate(x, by)),
        Node::Log(x) => div(differentiate(x, by), x.clone()),
        Node::Sqrt(x) => div(differentiate(x, by), mul(cnst(2.0), sqrt(x.clone()))),
        Node::Sin(x) => mul(cos(x.clone()), differentiate(x, by)),
        Node::Cos(x) => neg(mul(sin(x.clone()), differentiate(x, by))),
    }
}

/// Replace each variable by the other (u <-> v).
pub fn swap_vars(node: &Arc<Node>) -> Arc<Node> {
    match &**node {
        Node::Const(_) => node.clone(),
        Node::Var(Var::U) => var(Var::V),
        Node::Var(Var::V) => var(Var::U),
        Node::Add(l, r) => add(swap_vars(l), swap_vars(r)),
        Node::Sub(l, r) => sub(swap_vars(l), swap_vars(r)),
        Node::Mul(l, r) => mul(swap_vars(l), swap_vars(r)),
        Node::Div(l, r) => div(swap_vars(l), swap_vars(r)),
        Node::Neg(x) => neg(swap_vars(x)),
        Node::Pow(b, q) => pow(swap_vars(b), *q),
        Node::Exp(x) => exp(swap_vars(x)),
        Node::Log(x) => log(swap_vars(x)),
        Node::Sqrt(x) => sqrt(swap_vars(x)),
        Node::Sin(x) => sin(swap_vars(x)),
        Node::Cos(x) => cos(swap_vars(x)),
    }
}

pub fn rational_to_f64(q: Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn pow_value(base: f64, q: Rational) -> Result<f64, &'static str> {
    if q.is_integer() {
        let n = *q.numer();
        if base == 0.0 && n < 0 {
            return Err("zero base with negative exponent");
        }
        // |n| is bounded by the parser, so the cast is safe.
        return Ok(base.powi(n as i32));
    }
    if base < 0.0 {
        return Err("fractional power of negative base");
    }
    if base == 0.0 {
        return if q > Rational::from_integer(0) {
            Ok(0.0)
        } else {
            Err("zero base with negative exponent")
        };
    }
    Ok(base.powf(rational_to_f64(q)))
}

/// Evaluate at (u, v). Domain violations are reported with the offending
/// subexpression; non-finite intermediates are never passed through silently.
pub fn evaluate(node: &Arc<Node>, u: f64, v: f64) -> Result<f64, EvalError> {
    let value = match &**node {
        Node::Const(c) => *c,
        Node::Var(Var::U) => u,
        Node::Var(Var::V) => v,
        Node::Add(l, r) => evaluate(l, u, v)? + evaluate(r, u, v)?,
        Node::Sub(l, r) => evaluate(l, u, v)? - evaluate(r, u, v)?,
        Node::Mul(l, r) => evaluate(l, u, v)? * evaluate(r, u, v)?,
        Node::Div(l, r) => {
            let denom = evaluate(r, u, v)?;
            if denom == 0.0 {
                return Err(domain_err("division by zero", node, u, v));
            }
            evaluate(l, u, v)? / denom
        }
        Node::Neg(x) => -evaluate(x, u, v)?,
        Node::Pow(base, q) => {
            let b = evaluate(base, u, v)?;
            pow_value(b, *q).map_err(|reason| domain_err(reason, node, u, v))?
        }
        Node::Exp(x) => evaluate(x, u, v)?.exp(),
        Node::Log(x) => {
            let a = evaluate(x, u, v)?;
            if a <= 0.0 {
                return Err(domain_err("logarithm of a non-positive value", node, u, v));
            }
            a.ln()
        }
        Node::Sqrt(x) => {
            let a = evaluate(x, u, v)?;
            if a < 0.0 {
                return Err(domain_err("square root of a negative value", node, u, v));
            }
            a.sqrt()
        }
        Node::Sin(x) => evaluate(x, u, v)?.sin(),
        Node::Cos(x) => evaluate(x, u, v)?.cos(),
    };
    if !value.is_finite() {
        return Err(domain_err("non-finite result (overflow)", node, u, v));
    }
    Ok(value)
}

fn domain_err(reason: &str, node: &Arc<Node>, u: f64, v: f64) -> EvalError {
    EvalError {
        reason: reason.to_string(),
        subexpression: format!("{}", DisplayNode(node)),
        point: (u, v),
    }
}

// Precedence levels for printing: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

pub struct DisplayNode<'a>(pub &'a Arc<Node>);

impl fmt::Display for DisplayNode<'_> {
    fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, self.0)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Arc<Node>, min_prec: u8) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "(")?;
        write_node(f, child)?;
        write!(f, ")")
    } else {
        write_node(f, child)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Arc<Node>) -> fmt::Result {
    match &**node {
        Node::Const(c) => write!(f, "{}", c),
        Node::Var(Var::U) => write!(f, "u"),
        Node::Var(Var::V) => write!(f, "v"),
        Node::Add(l, r) => {
            write_child(f, l, 1)?;
            write!(f, " + ")?;
            write_child(f, r, 2)
        }
        Node::Sub(l, r) => {
            write_child(f, l, 1)?;
            write!(f, " - ")?;
            write_child(f, r, 2)
        }
        Node::Mul(l, r) => {
            write_child(f, l, 2)?;
            write!(f, "*")?;
            write_child(f, r, 3)
        }
        Node::Div(l, r) => {
            write_child(f, l, 2)?;
            write!(f, "/")?;
            write_child(f, r, 5)
        }
        Node::Neg(x) => {
            write!(f, "-")?;
            write_child(f, x, 4)
        }
        Node::Pow(base, q) => {
            write_child(f, base, 5)?;
            if q.is_integer() && *q.numer() >= 0 {
                write!(f, "^{}", q.numer())
            } else {
                write!(f, "^({})", q)
            }
        }
        Node::Exp(x) => write_fn(f, "exp", x),
        Node::Log(x) => write_fn(f, "log", x),
        Node::Sqrt(x) => write_fn(f, "sqrt", x),
        Node::Sin(x) => write_fn(f, "sin", x),
        Node::Cos(x) => write_fn(f, "cos", x),
    }
}

fn write_fn(f: &mut fmt::Formatter<'_>, name: &str, arg: &Arc<Node>) -> fmt::Result {
    write!(f, "{}(", name)?;
    write_node(f, arg)?;
    write!(f, ")")
}
