use super::{BinOp, ExprError, Func, Node};

fn checked(op: &'static str, v: f64, point: &[f64]) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Eval {
            op,
            point: point.to_vec(),
        })
    }
}

fn domain(op: &'static str, point: &[f64]) -> ExprError {
    ExprError::Eval {
        op,
        point: point.to_vec(),
    }
}

fn pow_value(a: f64, e: f64, point: &[f64]) -> Result<f64, ExprError> {
    if a < 0.0 && e.fract() != 0.0 {
        return Err(domain("^", point));
    }
    if a == 0.0 && e < 0.0 {
        return Err(domain("^", point));
    }
    checked("^", a.powf(e), point)
}

fn call_value(func: Func, a: f64, point: &[f64]) -> Result<f64, ExprError> {
    let v = match func {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(domain("log", point));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(domain("sqrt", point));
            }
            a.sqrt()
        }
        Func::Atan => a.atan(),
        Func::Abs => a.abs(),
        Func::Tanh => a.tanh(),
    };
    checked(func.name(), v, point)
}

pub(super) fn eval(node: &Node, point: &[f64]) -> Result<f64, ExprError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(i) => Ok(point[*i]),
        Node::Neg(a) => Ok(-eval(a, point)?),
        Node::Binary(op, a, b) => {
            let x = eval(a, point)?;
            let y = eval(b, point)?;
            match op {
                BinOp::Add => checked("+", x + y, point),
                BinOp::Sub => checked("-", x - y, point),
                BinOp::Mul => checked("*", x * y, point),
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(domain("/", point));
                    }
                    checked("/", x / y, point)
                }
                BinOp::Pow => pow_value(x, y, point),
            }
        }
        Node::Call(func, a) => call_value(*func, eval(a, point)?, point),
    }
}

/// Value and derivative along one coordinate direction.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

fn not_differentiable(op: &'static str, point: &[f64]) -> ExprError {
    ExprError::Derivative {
        op,
        point: point.to_vec(),
    }
}

pub(super) fn eval_dual(
    node: &Node,
    point: &[f64],
    direction: usize,
) -> Result<(f64, f64), ExprError> {
    let r = dual(node, point, direction)?;
    let d = checked("derivative", r.d, point)?;
    Ok((r.v, d))
}

fn dual(node: &Node, point: &[f64], dir: usize) -> Result<Dual, ExprError> {
    match node {
        Node::Num(v) => Ok(Dual { v: *v, d: 0.0 }),
        Node::Var(i) => Ok(Dual {
            v: point[*i],
            d: if *i == dir { 1.0 } else { 0.0 },
        }),
        Node::Neg(a) => {
            let a = dual(a, point, dir)?;
            Ok(Dual { v: -a.v, d: -a.d })
        }
        Node::Binary(op, a, b) => {
            let x = dual(a, point, dir)?;
            let y = dual(b, point, dir)?;
            match op {
                BinOp::Add => Ok(Dual {
                    v: checked("+", x.v + y.v, point)?,
                    d: x.d + y.d,
                }),
                BinOp::Sub => Ok(Dual {
                    v: checked("-", x.v - y.v, point)?,
                    d: x.d - y.d,
                }),
                BinOp::Mul => Ok(Dual {
                    v: checked("*", x.v * y.v, point)?,
                    d: x.d * y.v + x.v * y.d,
                }),
                BinOp::Div => {
                    if y.v == 0.0 {
                        return Err(domain("/", point));
                    }
                    let v = checked("/", x.v / y.v, point)?;
                    Ok(Dual {
                        v,
                        d: (x.d - v * y.d) / y.v,
                    })
                }
                BinOp::Pow => pow_dual(x, y, point),
            }
        }
        Node::Call(func, a) => {
            let a = dual(a, point, dir)?;
            let v = call_value(*func, a.v, point)?;
            let slope = match func {
                Func::Sin => a.v.cos(),
                Func::Cos => -a.v.sin(),
                Func::Exp => v,
                Func::Log => 1.0 / a.v,
                Func::Sqrt => {
                    if v == 0.0 {
                        if a.d == 0.0 {
                            return Ok(Dual { v, d: 0.0 });
                        }
                        return Err(not_differentiable("sqrt", point));
                    }
                    0.5 / v
                }
                Func::Atan => 1.0 / (1.0 + a.v * a.v),
                Func::Abs => {
                    if a.v == 0.0 {
                        if a.d == 0.0 {
                            return Ok(Dual { v, d: 0.0 });
                        }
                        return Err(not_differentiable("abs", point));
                    }
                    a.v.signum()
                }
                Func::Tanh => 1.0 - v * v,
            };
            Ok(Dual { v, d: slope * a.d })
        }
    }
}

fn pow_dual(x: Dual, y: Dual, point: &[f64]) -> Result<Dual, ExprError> {
    let v = pow_value(x.v, y.v, point)?;
    if y.d == 0.0 {
        // Exponent constant along this direction: power rule.
        if x.d == 0.0 {
            return Ok(Dual { v, d: 0.0 });
        }
        if y.v == 0.0 {
            return Ok(Dual { v, d: 0.0 });
        }
        if x.v == 0.0 && y.v < 1.0 {
            return Err(not_differentiable("^", point));
        }
        let d = y.v * x.v.powf(y.v - 1.0) * x.d;
        return Ok(Dual { v, d });
    }
    if x.v <= 0.0 {
        return Err(not_differentiable("^", point));
    }
    let d = v * (y.d * x.v.ln() + y.v * x.d / x.v);
    Ok(Dual { v, d })
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, ExprError};
    use std::f64::consts::PI;

    #[test]
    fn evaluates_basic_examples() {
        assert_eq!(parse("1 + x^2", 1).unwrap().eval(&[2.0]).unwrap(), 5.0);
        assert_eq!(parse("atan(x)", 1).unwrap().eval(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn domain_violations_are_errors() {
        let cases = [
            ("log(x)", -1.0, "log"),
            ("log(x)", 0.0, "log"),
            ("sqrt(x)", -1.0, "sqrt"),
            ("x^(-1)", 0.0, "^"),
            ("x^0.5", -4.0, "^"),
            ("1/x", 0.0, "/"),
            ("exp(x)", 1000.0, "exp"),
        ];
        for (src, at, op) in cases {
            let err = parse(src, 1).unwrap().eval(&[at]).unwrap_err();
            assert_eq!(
                err,
                ExprError::Eval {
                    op,
                    point: vec![at]
                },
                "{src} at {at}"
            );
        }
        // integer powers of negative bases are fine
        assert_eq!(parse("x^3", 1).unwrap().eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn dual_number_derivatives() {
        let (v, d) = parse("x^2", 1)
            .unwrap()
            .eval_with_derivative(&[3.0], 0)
            .unwrap();
        assert_eq!((v, d), (9.0, 6.0));

        let e = parse("atan(x)", 1).unwrap();
        let (v, d) = e.eval_with_derivative(&[1.0], 0).unwrap();
        assert!((v - PI / 4.0).abs() < 1e-15);
        // central difference cross-check
        let h = 1e-6;
        let fd = (e.eval1(1.0 + h).unwrap() - e.eval1(1.0 - h).unwrap()) / (2.0 * h);
        assert!((d - 0.5).abs() < 1e-15);
        assert!((d - fd).abs() <= 1e-8);
    }

    #[test]
    fn abs_kink_is_reported() {
        let e = parse("abs(x)", 1).unwrap();
        assert!(matches!(
            e.eval_with_derivative(&[0.0], 0),
            Err(ExprError::Derivative { op: "abs", .. })
        ));
        assert_eq!(e.eval_with_derivative(&[-2.0], 0).unwrap(), (2.0, -1.0));
        // abs of a quantity that does not move along this direction is fine
        let e = parse("abs(x2) * x1", 2).unwrap();
        assert_eq!(e.eval_with_derivative(&[3.0, 0.0], 0).unwrap(), (0.0, 0.0));
        assert!(e.eval_with_derivative(&[3.0, 0.0], 1).is_err());
    }

    #[test]
    fn multivariate_gradient() {
        let e = parse("x1*x2 + sin(x1) + exp(x2) + x1^x2", 2).unwrap();
        let (v, g) = e.eval_gradient(&[1.5, 2.0]).unwrap();
        let (x, y) = (1.5f64, 2.0f64);
        assert!((v - (x * y + x.sin() + y.exp() + x.powf(y))).abs() < 1e-12);
        assert!((g[0] - (y + x.cos() + y * x.powf(y - 1.0))).abs() < 1e-12);
        assert!((g[1] - (x + y.exp() + x.powf(y) * x.ln())).abs() < 1e-12);
    }

    #[test]
    fn elementary_function_derivatives() {
        let cases: [(&str, f64, f64); 6] = [
            ("sin(x)", 0.3, 0.3f64.cos()),
            ("cos(x)", 0.3, -(0.3f64.sin())),
            ("log(x)", 2.0, 0.5),
            ("sqrt(x)", 4.0, 0.25),
            ("tanh(x)", 0.5, 1.0 - 0.5f64.tanh().powi(2)),
            ("exp(2*x)", 0.1, 2.0 * 0.2f64.exp()),
        ];
        for (src, x, expected) in cases {
            let (_, d) = parse(src, 1)
                .unwrap()
                .eval_with_derivative(&[x], 0)
                .unwrap();
            assert!((d - expected).abs() < 1e-14, "{src}");
        }
    }
}
