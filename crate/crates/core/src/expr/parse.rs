//! Recursive-descent parser for the Lagrangian grammar.
//!
//! ```text
//! expr    := term (("+"|"-") term)*
//! term    := factor (("*"|"/") factor)*
//! factor  := unary ("^" factor)?
//! unary   := "-" unary | primary
//! primary := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"
//! VAR     := ("x"|"y") DIGITS       FUNC in {sin,cos,tan,exp,log,sqrt,sinh,cosh,tanh}
//! ```
//!
//! `^` is right-associative; unary minus binds tighter than the base of `^`
//! (so `-x1^2` parses as `(-x1)^2`). The exponent of `^` must be a numeric
//! literal, optionally negated.

use super::ast::{ExpressionAst, FuncKind, Node, NodeKind};
use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let at = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, at));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                    self.pos += 1;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
                    let mark = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        // not an exponent after all (e.g. "2*exp(..)" tokenized greedily)
                        self.pos = mark;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: "numeric literal".into(),
                    found: text.to_string(),
                })?;
                Tok::Num(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Tok::Ident(text.to_string())
            }
            other => {
                return Err(ExprError::Syntax {
                    offset: at,
                    expected: "token".into(),
                    found: format!("{:?}", other as char),
                })
            }
        };
        Ok((tok, at))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<usize, ExprError> {
        let (tok, at) = self.bump();
        if tok == want {
            Ok(at)
        } else {
            Err(ExprError::Syntax {
                offset: at,
                expected: what.into(),
                found: format!("{:?}", tok),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    let (_, at) = self.bump();
                    let rhs = self.term()?;
                    lhs = Node {
                        kind: NodeKind::Add(Box::new(lhs), Box::new(rhs)),
                        offset: at,
                    };
                }
                Tok::Minus => {
                    let (_, at) = self.bump();
                    let rhs = self.term()?;
                    lhs = Node {
                        kind: NodeKind::Sub(Box::new(lhs), Box::new(rhs)),
                        offset: at,
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    let (_, at) = self.bump();
                    let rhs = self.factor()?;
                    lhs = Node {
                        kind: NodeKind::Mul(Box::new(lhs), Box::new(rhs)),
                        offset: at,
                    };
                }
                Tok::Slash => {
                    let (_, at) = self.bump();
                    let rhs = self.factor()?;
                    lhs = Node {
                        kind: NodeKind::Div(Box::new(lhs), Box::new(rhs)),
                        offset: at,
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.unary()?;
        if self.peek().0 == Tok::Caret {
            let (_, at) = self.bump();
            let exp_at = self.peek().1;
            let exp_node = self.factor()?;
            let p = constant_exponent(&exp_node).ok_or(ExprError::NonConstantExponent {
                offset: exp_at,
            })?;
            return Ok(Node {
                kind: NodeKind::Pow(Box::new(base), p),
                offset: at,
            });
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek().0 == Tok::Minus {
            let (_, at) = self.bump();
            let inner = self.unary()?;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                offset: at,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node {
                kind: NodeKind::Const(v),
                offset: at,
            }),
            Tok::Ident(name) => {
                if let Some(func) = FuncKind::from_name(&name) {
                    self.expect(Tok::LParen, "'('")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Node {
                        kind: NodeKind::Func(func, Box::new(arg)),
                        offset: at,
                    });
                }
                let bytes = name.as_bytes();
                if (bytes[0] == b'x' || bytes[0] == b'y')
                    && bytes.len() > 1
                    && bytes[1..].iter().all(|b| b.is_ascii_digit())
                {
                    let idx: usize =
                        name[1..].parse().map_err(|_| ExprError::UnknownIdentifier {
                            offset: at,
                            name: name.clone(),
                        })?;
                    if idx < 1 || idx > self.n {
                        return Err(ExprError::VariableOutOfRange {
                            offset: at,
                            name,
                            n: self.n,
                        });
                    }
                    let global = if bytes[0] == b'x' {
                        idx - 1
                    } else {
                        self.n + idx - 1
                    };
                    return Ok(Node {
                        kind: NodeKind::Var(global),
                        offset: at,
                    });
                }
                Err(ExprError::UnknownIdentifier { offset: at, name })
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            other => Err(ExprError::Syntax {
                offset: at,
                expected: "number, variable, function or '('".into(),
                found: format!("{:?}", other),
            }),
        }
    }
}

fn constant_exponent(node: &Node) -> Option<f64> {
    match &node.kind {
        NodeKind::Const(c) => Some(*c),
        NodeKind::Neg(inner) => constant_exponent(inner).map(|v| -v),
        _ => None,
    }
}

/// Parse `source` as a Lagrangian over base dimension `n` (variables
/// x1..xn, y1..yn).
pub fn parse(source: &str, n: usize) -> Result<ExpressionAst, ExprError> {
    if source.trim().is_empty() {
        return Err(ExprError::EmptySource);
    }
    if n < 2 {
        return Err(ExprError::BaseDimension { n });
    }
    let mut lexer = Lexer::new(source);
    let mut toks = Vec::new();
    loop {
        let (tok, at) = lexer.next()?;
        let done = tok == Tok::Eof;
        toks.push((tok, at));
        if done {
            break;
        }
    }
    let mut parser = Parser { toks, pos: 0, n };
    let root = parser.expr()?;
    let (tok, at) = parser.bump();
    if tok != Tok::Eof {
        return Err(ExprError::Syntax {
            offset: at,
            expected: "end of input".into(),
            found: format!("{:?}", tok),
        });
    }
    Ok(ExpressionAst::from_parts(n, root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let ast = parse("y1^2 + y2^2", 2).unwrap();
        assert_eq!(ast.evaluate(&[0.0, 0.0, 1.0, 2.0]).unwrap(), 5.0);
    }

    #[test]
    fn nested_product() {
        let ast = parse("x1^2 * (y1^2 + y2^2)", 2).unwrap();
        assert_eq!(ast.evaluate(&[2.0, 0.0, 1.0, 1.0]).unwrap(), 8.0);
    }

    #[test]
    fn variable_out_of_range() {
        let err = parse("y3^2", 2).unwrap_err();
        match err {
            ExprError::VariableOutOfRange { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn non_constant_exponent_rejected() {
        let err = parse("y1^x1", 2).unwrap_err();
        assert!(matches!(err, ExprError::NonConstantExponent { .. }));
    }

    #[test]
    fn unary_minus_binds_tighter_than_pow_base() {
        // -x1^2 == (-x1)^2
        let ast = parse("-x1^2", 2).unwrap();
        assert_eq!(ast.evaluate(&[3.0, 0.0, 0.0, 0.0]).unwrap(), 9.0);
    }

    #[test]
    fn pow_right_associative_constant_exponents_fold() {
        // exponent must be a literal; chained ^ in the exponent is rejected
        assert!(parse("x1^2^3", 2).is_err());
    }

    #[test]
    fn negative_exponent_literal() {
        let ast = parse("x1^-2", 2).unwrap();
        assert_eq!(ast.evaluate(&[2.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn syntax_error_offset() {
        let err = parse("y1 + * y2", 2).unwrap_err();
        match err {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 5),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "y1^2 + y2^2",
            "x1^2*(y1^2 + y2^2)",
            "-x1^2",
            "sin(x1)*cos(y2) - exp(x2/2)",
            "(1 + 0.3*cos(x1))*(y1^4 + y2^4)^0.5",
            "y1^-2 / (1 + y2^2)",
        ] {
            let a = parse(src, 2).unwrap();
            let b = parse(&a.print(), 2).unwrap();
            assert_eq!(a, b, "round trip failed for {src}: printed {}", a.print());
        }
    }
}
