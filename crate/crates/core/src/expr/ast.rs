//! Expression tree for Lagrangians L(x, y).
//!
//! Variables are written `x1..xn`, `y1..yn` in source text; internally they
//! map to indices `0..n` (base) and `n..2n` (fiber). Trees are immutable after
//! construction and carry byte spans for error reporting.

use std::fmt;

use super::taylor::{ladders, JetSpace, TaylorPoly};
use super::ExprError;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncKind {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl FuncKind {
    pub fn name(self) -> &'static str {
        match self {
            FuncKind::Sin => "sin",
            FuncKind::Cos => "cos",
            FuncKind::Tan => "tan",
            FuncKind::Exp => "exp",
            FuncKind::Log => "log",
            FuncKind::Sqrt => "sqrt",
            FuncKind::Sinh => "sinh",
            FuncKind::Cosh => "cosh",
            FuncKind::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<FuncKind> {
        match s {
            "sin" => Some(FuncKind::Sin),
            "cos" => Some(FuncKind::Cos),
            "tan" => Some(FuncKind::Tan),
            "exp" => Some(FuncKind::Exp),
            "log" => Some(FuncKind::Log),
            "sqrt" => Some(FuncKind::Sqrt),
            "sinh" => Some(FuncKind::Sinh),
            "cosh" => Some(FuncKind::Cosh),
            "tanh" => Some(FuncKind::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Const(f64),
    /// 0-based variable index in [0, 2n)
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// exponent restricted to a constant (smoothness analysis stays tractable)
    Pow(Box<Node>, f64),
    Func(FuncKind, Box<Node>),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    /// byte offset of the node's leading token in the source
    pub offset: usize,
}

// structural equality; source offsets are irrelevant to tree identity
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// Parsed Lagrangian over a 2n-dimensional phase domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionAst {
    n: usize,
    root: Node,
}

impl ExpressionAst {
    pub(crate) fn from_parts(n: usize, root: Node) -> Self {
        ExpressionAst { n, root }
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluate at a phase point given as the flat coordinate vector
    /// (x1..xn, y1..yn).
    pub fn evaluate(&self, coords: &[f64]) -> Result<f64, ExprError> {
        assert_eq!(coords.len(), 2 * self.n, "phase point dimension mismatch");
        eval_node(&self.root, coords)
    }

    /// Evaluate the tree over truncated Taylor polynomials around `coords`.
    pub fn evaluate_taylor(
        &self,
        space: &Arc<JetSpace>,
        coords: &[f64],
    ) -> Result<TaylorPoly, ExprError> {
        assert_eq!(coords.len(), 2 * self.n, "phase point dimension mismatch");
        assert_eq!(space.nvars(), 2 * self.n);
        eval_taylor_node(&self.root, space, coords)
    }

    /// Canonical text form; `parse(print(ast))` reproduces the tree.
    pub fn print(&self) -> String {
        let mut s = String::new();
        print_node(&self.root, self.n, 0, &mut s);
        s
    }
}

impl fmt::Display for ExpressionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

fn domain_err(node: &Node, what: &str) -> ExprError {
    ExprError::Domain {
        offset: node.offset,
        what: what.to_string(),
    }
}

fn is_integer_exponent(p: f64) -> Option<i64> {
    if p.fract() == 0.0 && p.abs() <= 2.0_f64.powi(31) {
        Some(p as i64)
    } else {
        None
    }
}

fn eval_node(node: &Node, coords: &[f64]) -> Result<f64, ExprError> {
    let v = match &node.kind {
        NodeKind::Const(c) => *c,
        NodeKind::Var(i) => coords[*i],
        NodeKind::Neg(a) => -eval_node(a, coords)?,
        NodeKind::Add(a, b) => eval_node(a, coords)? + eval_node(b, coords)?,
        NodeKind::Sub(a, b) => eval_node(a, coords)? - eval_node(b, coords)?,
        NodeKind::Mul(a, b) => eval_node(a, coords)? * eval_node(b, coords)?,
        NodeKind::Div(a, b) => {
            let den = eval_node(b, coords)?;
            if den == 0.0 {
                return Err(domain_err(node, "division by zero"));
            }
            eval_node(a, coords)? / den
        }
        NodeKind::Pow(base, p) => {
            let b = eval_node(base, coords)?;
            match is_integer_exponent(*p) {
                Some(e) => {
                    if b == 0.0 && e < 0 {
                        return Err(domain_err(node, "zero base with negative exponent"));
                    }
                    b.powi(e as i32)
                }
                None => {
                    if b <= 0.0 {
                        return Err(domain_err(
                            node,
                            "non-integer power of a non-positive base",
                        ));
                    }
                    b.powf(*p)
                }
            }
        }
        NodeKind::Func(kind, a) => {
            let x = eval_node(a, coords)?;
            match kind {
                FuncKind::Sin => x.sin(),
                FuncKind::Cos => x.cos(),
                FuncKind::Tan => {
                    let t = x.tan();
                    if !t.is_finite() {
                        return Err(domain_err(node, "tan pole"));
                    }
                    t
                }
                FuncKind::Exp => x.exp(),
                FuncKind::Log => {
                    if x <= 0.0 {
                        return Err(domain_err(node, "log of a non-positive value"));
                    }
                    x.ln()
                }
                FuncKind::Sqrt => {
                    if x < 0.0 {
                        return Err(domain_err(node, "sqrt of a negative value"));
                    }
                    x.sqrt()
                }
                FuncKind::Sinh => x.sinh(),
                FuncKind::Cosh => x.cosh(),
                FuncKind::Tanh => x.tanh(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain_err(node, "non-finite value"))
    }
}

fn eval_taylor_node(
    node: &Node,
    space: &Arc<JetSpace>,
    coords: &[f64],
) -> Result<TaylorPoly, ExprError> {
    let order = space.order();
    Ok(match &node.kind {
        NodeKind::Const(c) => TaylorPoly::constant(space, *c),
        NodeKind::Var(i) => TaylorPoly::variable(space, *i, coords[*i]),
        NodeKind::Neg(a) => eval_taylor_node(a, space, coords)?.neg(),
        NodeKind::Add(a, b) => {
            eval_taylor_node(a, space, coords)?.add(&eval_taylor_node(b, space, coords)?)
        }
        NodeKind::Sub(a, b) => {
            eval_taylor_node(a, space, coords)?.sub(&eval_taylor_node(b, space, coords)?)
        }
        NodeKind::Mul(a, b) => {
            eval_taylor_node(a, space, coords)?.mul(&eval_taylor_node(b, space, coords)?)
        }
        NodeKind::Div(a, b) => {
            let den = eval_taylor_node(b, space, coords)?;
            if den.value() == 0.0 {
                return Err(domain_err(node, "division by zero"));
            }
            let num = eval_taylor_node(a, space, coords)?;
            num.mul(&den.compose(&ladders::recip(den.value(), order)))
        }
        NodeKind::Pow(base, p) => {
            let b = eval_taylor_node(base, space, coords)?;
            match is_integer_exponent(*p) {
                Some(e) if e >= 0 => b.powi(e as u64),
                Some(e) => {
                    if b.value() == 0.0 {
                        return Err(domain_err(node, "zero base with negative exponent"));
                    }
                    b.compose(&ladders::recip(b.value(), order)).powi((-e) as u64)
                }
                None => {
                    if b.value() <= 0.0 {
                        return Err(domain_err(
                            node,
                            "non-integer power of a non-positive base",
                        ));
                    }
                    b.compose(&ladders::powf(b.value(), *p, order))
                }
            }
        }
        NodeKind::Func(kind, a) => {
            let x = eval_taylor_node(a, space, coords)?;
            let x0 = x.value();
            let us = match kind {
                FuncKind::Sin => ladders::sin(x0, order),
                FuncKind::Cos => ladders::cos(x0, order),
                FuncKind::Tan => {
                    if !x0.tan().is_finite() {
                        return Err(domain_err(node, "tan pole"));
                    }
                    ladders::tan(x0, order)
                }
                FuncKind::Exp => ladders::exp(x0, order),
                FuncKind::Log => {
                    if x0 <= 0.0 {
                        return Err(domain_err(node, "log of a non-positive value"));
                    }
                    ladders::log(x0, order)
                }
                FuncKind::Sqrt => {
                    if x0 <= 0.0 {
                        return Err(domain_err(
                            node,
                            "sqrt of a non-positive value (derivatives undefined at zero)",
                        ));
                    }
                    ladders::sqrt(x0, order)
                }
                FuncKind::Sinh => ladders::sinh(x0, order),
                FuncKind::Cosh => ladders::cosh(x0, order),
                FuncKind::Tanh => ladders::tanh(x0, order),
            };
            x.compose(&us)
        }
    })
}

// Precedence levels: 0 additive, 1 multiplicative, 2 power, 3 unary, 4 atom.
fn print_node(node: &Node, n: usize, parent_prec: u8, out: &mut String) {
    let prec = match &node.kind {
        NodeKind::Add(..) | NodeKind::Sub(..) => 0,
        NodeKind::Mul(..) | NodeKind::Div(..) => 1,
        NodeKind::Pow(..) => 2,
        NodeKind::Neg(..) => 3,
        NodeKind::Const(_) | NodeKind::Var(_) | NodeKind::Func(..) => 4,
    };
    let need_parens = prec < parent_prec;
    if need_parens {
        out.push('(');
    }
    match &node.kind {
        NodeKind::Const(c) => {
            if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                out.push_str(&format!("(0 - {})", format_literal(-*c)));
            } else {
                out.push_str(&format_literal(*c));
            }
        }
        NodeKind::Var(i) => {
            if *i < n {
                out.push_str(&format!("x{}", i + 1));
            } else {
                out.push_str(&format!("y{}", i - n + 1));
            }
        }
        NodeKind::Neg(a) => {
            out.push('-');
            print_node(a, n, 3, out);
        }
        NodeKind::Add(a, b) => {
            print_node(a, n, 0, out);
            out.push_str(" + ");
            print_node(b, n, 1, out);
        }
        NodeKind::Sub(a, b) => {
            print_node(a, n, 0, out);
            out.push_str(" - ");
            print_node(b, n, 1, out);
        }
        NodeKind::Mul(a, b) => {
            print_node(a, n, 1, out);
            out.push('*');
            print_node(b, n, 2, out);
        }
        NodeKind::Div(a, b) => {
            print_node(a, n, 1, out);
            out.push('/');
            print_node(b, n, 2, out);
        }
        NodeKind::Pow(a, p) => {
            // the grammar only allows a unary-level base before '^'
            print_node(a, n, 3, out);
            out.push('^');
            if *p < 0.0 {
                out.push('-');
                out.push_str(&format_literal(-*p));
            } else {
                out.push_str(&format_literal(*p));
            }
        }
        NodeKind::Func(kind, a) => {
            out.push_str(kind.name());
            out.push('(');
            print_node(a, n, 0, out);
            out.push(')');
        }
    }
    if need_parens {
        out.push(')');
    }
}

fn format_literal(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{}", v)
    }
}
