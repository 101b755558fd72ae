use std::fmt;

/// Byte range of a node in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
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
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Tan => Some("tan"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" | "ln" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a numeric exponent.
    Pow(Box<Expr>, f64),
}

/// Expression tree over a single real parameter.
///
/// Equality is structural and ignores source spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Const(a), ExprKind::Const(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Var, ExprKind::Var) => true,
            (ExprKind::Unary(oa, a), ExprKind::Unary(ob, b)) => oa == ob && a == b,
            (ExprKind::Binary(oa, la, ra), ExprKind::Binary(ob, lb, rb)) => {
                oa == ob && la == lb && ra == rb
            }
            (ExprKind::Pow(a, pa), ExprKind::Pow(b, pb)) => pa.to_bits() == pb.to_bits() && a == b,
            _ => false,
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(ExprKind::Const(value), Span::default())
    }

    pub fn var() -> Self {
        Self::new(ExprKind::Var, Span::default())
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Self::new(ExprKind::Unary(op, Box::new(arg)), Span::default())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), Span::default())
    }

    pub fn pow(base: Expr, exponent: f64) -> Self {
        Self::new(ExprKind::Pow(Box::new(base), exponent), Span::default())
    }

    pub fn contains_var(&self) -> bool {
        match &self.kind {
            ExprKind::Const(_) => false,
            ExprKind::Var => true,
            ExprKind::Unary(_, a) | ExprKind::Pow(a, _) => a.contains_var(),
            ExprKind::Binary(_, a, b) => a.contains_var() || b.contains_var(),
        }
    }

    /// Fully parenthesized rendering using `var` as the parameter name.
    ///
    /// Parsing the output with the same parameter name gives back a
    /// structurally identical tree.
    pub fn display_with<'a>(&'a self, var: &'a str) -> impl fmt::Display + 'a {
        Printer { expr: self, var }
    }
}

struct Printer<'a> {
    expr: &'a Expr,
    var: &'a str,
}

fn write_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{:?})", -x)
    } else {
        write!(f, "{x:?}")
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| Printer { expr: e, var: self.var };
        match &self.expr.kind {
            ExprKind::Const(c) => write_number(f, *c),
            ExprKind::Var => f.write_str(self.var),
            ExprKind::Unary(UnaryOp::Neg, a) => write!(f, "(-({}))", sub(a)),
            ExprKind::Unary(op, a) => {
                write!(f, "{}({})", op.function_name().unwrap_or_default(), sub(a))
            }
            ExprKind::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            ExprKind::Pow(a, p) => {
                write!(f, "({}^", sub(a))?;
                write_number(f, *p)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with("t"))
    }
}
