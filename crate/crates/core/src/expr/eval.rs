use thiserror::Error;

use super::ast::{BinaryOp, Expr, ExprKind, Span, UnaryOp};
use super::jet::{Jet, Jet4};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at bytes {}..{}", span.start, span.end)]
    DivisionByZero { span: Span },
    #[error("{function} outside its domain (argument {argument}) at bytes {}..{}", span.start, span.end)]
    Domain { function: &'static str, argument: f64, span: Span },
    #[error("non-finite result at bytes {}..{}", span.start, span.end)]
    NonFinite { span: Span },
}

impl EvalError {
    pub fn span(&self) -> Span {
        match self {
            EvalError::DivisionByZero { span }
            | EvalError::Domain { span, .. }
            | EvalError::NonFinite { span } => *span,
        }
    }
}

/// Value and first four derivatives of `ast` at `t`.
pub fn eval_jet(ast: &Expr, t: f64) -> Result<Jet4, EvalError> {
    eval_series(ast, t)
}

/// Plain value of `ast` at `t`.
pub fn eval_value(ast: &Expr, t: f64) -> Result<f64, EvalError> {
    eval_series::<1>(ast, t).map(|j| j.value())
}

/// Truncated Taylor series of `ast` around `t` with `N` coefficients.
pub fn eval_series<const N: usize>(ast: &Expr, t: f64) -> Result<Jet<N>, EvalError> {
    let x = Jet::<N>::variable(t);
    eval_node(ast, &x)
}

fn eval_node<const N: usize>(node: &Expr, x: &Jet<N>) -> Result<Jet<N>, EvalError> {
    let span = node.span;
    let out = match &node.kind {
        ExprKind::Const(c) => Jet::constant(*c),
        ExprKind::Var => *x,
        ExprKind::Unary(op, arg) => {
            let a = eval_node(arg, x)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Tan => {
                    let (s, c) = a.sin_cos();
                    if c.value() == 0.0 {
                        return Err(EvalError::DivisionByZero { span });
                    }
                    s / c
                }
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => {
                    if a.value() <= 0.0 {
                        return Err(EvalError::Domain { function: "log", argument: a.value(), span });
                    }
                    a.ln()
                }
                UnaryOp::Sqrt => {
                    if a.value() <= 0.0 {
                        return Err(EvalError::Domain { function: "sqrt", argument: a.value(), span });
                    }
                    a.sqrt()
                }
            }
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let a = eval_node(lhs, x)?;
            let b = eval_node(rhs, x)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b.value() == 0.0 {
                        return Err(EvalError::DivisionByZero { span });
                    }
                    a / b
                }
            }
        }
        ExprKind::Pow(base, p) => {
            let a = eval_node(base, x)?;
            let p = *p;
            if p.fract() == 0.0 && p.abs() <= 1024.0 {
                if p < 0.0 && a.value() == 0.0 {
                    return Err(EvalError::DivisionByZero { span });
                }
                a.powi(p as i32)
            } else {
                if a.value() <= 0.0 {
                    return Err(EvalError::Domain { function: "pow", argument: a.value(), span });
                }
                a.powf(p)
            }
        }
    };
    if out.coeffs().iter().all(|c| c.is_finite()) {
        Ok(out)
    } else {
        Err(EvalError::NonFinite { span })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    #[test]
    fn polynomial_jet() {
        let ast = parse_expression("t^2").unwrap();
        assert_eq!(eval_jet(&ast, 3.0).unwrap().derivatives(), [9.0, 6.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn sine_jet_at_origin() {
        let ast = parse_expression("sin(t)").unwrap();
        let d = eval_jet(&ast, 0.0).unwrap().derivatives();
        assert_eq!(d, [0.0, 1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn domain_errors_carry_spans() {
        let ast = parse_expression("1 + log(t - 2)").unwrap();
        match eval_jet(&ast, 1.0).unwrap_err() {
            EvalError::Domain { function, span, .. } => {
                assert_eq!(function, "log");
                assert_eq!(span, Span::new(4, 14));
            }
            e => panic!("unexpected {e:?}"),
        }
        let ast = parse_expression("1/(t-1)").unwrap();
        assert!(matches!(eval_jet(&ast, 1.0), Err(EvalError::DivisionByZero { .. })));
        let ast = parse_expression("sqrt(t)").unwrap();
        assert!(matches!(eval_jet(&ast, -1.0), Err(EvalError::Domain { function: "sqrt", .. })));
        let ast = parse_expression("t^0.5").unwrap();
        assert!(matches!(eval_jet(&ast, 0.0), Err(EvalError::Domain { function: "pow", .. })));
        let ast = parse_expression("t^-1").unwrap();
        assert!(matches!(eval_jet(&ast, 0.0), Err(EvalError::DivisionByZero { .. })));
    }

    #[test]
    fn negative_base_integer_power() {
        let ast = parse_expression("t^3").unwrap();
        let j = eval_jet(&ast, -2.0).unwrap();
        assert_eq!(j.derivatives(), [-8.0, 12.0, -12.0, 6.0, 0.0]);
    }

    #[test]
    fn tan_matches_sin_over_cos() {
        let a = eval_jet(&parse_expression("tan(t)").unwrap(), 0.3).unwrap();
        let b = eval_jet(&parse_expression("sin(t)/cos(t)").unwrap(), 0.3).unwrap();
        for k in 0..5 {
            assert!((a.derivative(k) - b.derivative(k)).abs() < 1e-12);
        }
        // d/dt tan = 1 + tan^2
        let tan = 0.3f64.tan();
        assert!((a.d1() - (1.0 + tan * tan)).abs() < 1e-14);
    }
}
