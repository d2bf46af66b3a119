//! Closed-form scalar expressions and vector fields.
//!
//! Expressions are parsed from a small infix language (see `docs/grammar.md`
//! at the repository root) into an immutable AST. Evaluation is plain IEEE-754
//! arithmetic, except that domain violations are reported as errors instead of
//! producing NaN. Partial derivatives come from forward-mode dual numbers.

mod eval;
mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::{parse, parse_radial};

/// Errors raised while parsing or evaluating an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at offset {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("variable `{name}` at offset {position} exceeds dimension {dim}")]
    Dimension {
        name: String,
        position: usize,
        dim: usize,
    },
    #[error("`{op}` is undefined at {point:?}")]
    Eval { op: &'static str, point: Vec<f64> },
    #[error("`{op}` is not differentiable at {point:?}")]
    Derivative { op: &'static str, point: Vec<f64> },
    #[error("point has {got} coordinates, expression expects {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("radial bound is not strictly positive: beta({r}) = {value}")]
    NonPositiveBound { r: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    Abs,
    Tanh,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }
}

/// AST node. Variables are zero-based coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// How variables are spelled when printing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStyle {
    /// `x1 .. xd` (and `x` as an alias of `x1` when d = 1).
    Cartesian,
    /// The single radial variable `r`.
    Radial,
}

/// A parsed expression together with the dimension of its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dim: usize,
    style: VarStyle,
}

impl Expr {
    pub(crate) fn from_parts(root: Node, dim: usize, style: VarStyle) -> Self {
        Expr { root, dim, style }
    }

    /// Builds an expression from an AST. Fails if a variable index is out of range.
    pub fn from_node(root: Node, dim: usize) -> Result<Self, ExprError> {
        fn max_var(n: &Node) -> Option<usize> {
            match n {
                Node::Num(_) => None,
                Node::Var(i) => Some(*i),
                Node::Neg(a) | Node::Call(_, a) => max_var(a),
                Node::Binary(_, a, b) => max_var(a).max(max_var(b)),
            }
        }
        if let Some(i) = max_var(&root) {
            if i >= dim {
                return Err(ExprError::Dimension {
                    name: format!("x{}", i + 1),
                    position: 0,
                    dim,
                });
            }
        }
        Ok(Expr {
            root,
            dim,
            style: VarStyle::Cartesian,
        })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Expr {
            root: Node::Num(value),
            dim,
            style: VarStyle::Cartesian,
        }
    }

    /// The expression -self.
    pub fn negated(&self) -> Self {
        Expr::from_parts(Node::Neg(Box::new(self.root.clone())), self.dim, self.style)
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn style(&self) -> VarStyle {
        self.style
    }

    /// Evaluates the expression at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_point(point)?;
        eval::eval(&self.root, point)
    }

    /// One-dimensional convenience wrapper around [`Expr::eval`].
    pub fn eval1(&self, x: f64) -> Result<f64, ExprError> {
        self.eval(&[x])
    }

    /// Value and partial derivative along coordinate `direction` (zero-based),
    /// propagated with dual numbers.
    pub fn eval_with_derivative(
        &self,
        point: &[f64],
        direction: usize,
    ) -> Result<(f64, f64), ExprError> {
        self.check_point(point)?;
        if direction >= self.dim {
            return Err(ExprError::PointDimension {
                expected: self.dim,
                got: direction + 1,
            });
        }
        eval::eval_dual(&self.root, point, direction)
    }

    /// Value and full gradient.
    pub fn eval_gradient(&self, point: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        self.check_point(point)?;
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let (v, p) = eval::eval_dual(&self.root, point, k)?;
            value = v;
            grad.push(p);
        }
        if self.dim == 0 {
            value = eval::eval(&self.root, point)?;
        }
        Ok((value, grad))
    }

    fn check_point(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != self.dim {
            return Err(ExprError::PointDimension {
                expected: self.dim,
                got: point.len(),
            });
        }
        Ok(())
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, self.style, f)
    }
}

fn write_node(n: &Node, style: VarStyle, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        // Debug formatting of f64 is the shortest representation that round-trips.
        Node::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Var(i) => match style {
            VarStyle::Cartesian => write!(f, "x{}", i + 1),
            VarStyle::Radial => write!(f, "r"),
        },
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, style, f)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            write!(f, "(")?;
            write_node(a, style, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(b, style, f)?;
            write!(f, ")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, style, f)?;
            write!(f, ")")
        }
    }
}

/// A vector field b: R^d -> R^d given by d component expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
    /// User assertion that b is locally Lipschitz. Never checked.
    pub lipschitz_claim: bool,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self, ExprError> {
        let d = components.len();
        if d == 0 {
            return Err(ExprError::PointDimension {
                expected: 1,
                got: 0,
            });
        }
        for c in &components {
            if c.dim() != d {
                return Err(ExprError::PointDimension {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        Ok(VectorField {
            components,
            lipschitz_claim: true,
        })
    }

    /// Parses `sources` as the d components of a field on R^d.
    pub fn parse(sources: &[&str]) -> Result<Self, ExprError> {
        let d = sources.len();
        let components = sources
            .iter()
            .map(|s| parse(s, d))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// The scalar expression of a one-dimensional field.
    pub fn scalar(&self) -> Option<&Expr> {
        match self.components.as_slice() {
            [b] => Some(b),
            _ => None,
        }
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(point)?;
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(point, &mut out)?;
        Ok(out)
    }

    /// The field x -> -b(x).
    pub fn negated(&self) -> Self {
        VectorField {
            components: self.components.iter().map(Expr::negated).collect(),
            lipschitz_claim: self.lipschitz_claim,
        }
    }
}

/// A radial bound beta(r) for r >= inner_radius.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RadialBound {
    beta: Expr,
    inner_radius: f64,
}

impl RadialBound {
    pub fn new(beta: Expr, inner_radius: f64) -> Self {
        RadialBound { beta, inner_radius }
    }

    pub fn parse(src: &str, inner_radius: f64) -> Result<Self, ExprError> {
        Ok(Self::new(parse_radial(src)?, inner_radius))
    }

    pub fn beta(&self) -> &Expr {
        &self.beta
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// beta(r), rejected unless strictly positive.
    pub fn eval(&self, r: f64) -> Result<f64, ExprError> {
        let value = self.beta.eval1(r)?;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(ExprError::NonPositiveBound { r, value })
        }
    }
}
