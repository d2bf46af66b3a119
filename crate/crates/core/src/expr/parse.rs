use super::{BinOp, Expr, ExprError, Func, Node, VarStyle};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        match c {
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                let text = &self.src[start..end];
                let value: f64 = text.parse().map_err(|_| ExprError::Parse {
                    position: start,
                    expected: "a numeric literal".into(),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Parse {
                        position: start,
                        expected: "a finite numeric literal".into(),
                    });
                }
                self.pos = end;
                Ok((Tok::Num(value), start))
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = start;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                Ok((Tok::Ident(self.src[start..end].to_string()), start))
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Ok((Tok::Op(c as char), start))
            }
            b'(' => {
                self.pos += 1;
                Ok((Tok::LParen, start))
            }
            b')' => {
                self.pos += 1;
                Ok((Tok::RParen, start))
            }
            _ => Err(ExprError::Parse {
                position: start,
                expected: "an operator, operand or parenthesis".into(),
            }),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    dim: usize,
    style: VarStyle,
    // Reported only if the whole input parses.
    dim_error: Option<ExprError>,
}

const OPERAND: &str = "a number, variable, function call or '('";

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize, style: VarStyle) -> Result<Self, ExprError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, tok_pos) = lexer.next()?;
        Ok(Parser {
            lexer,
            tok,
            tok_pos,
            dim,
            style,
            dim_error: None,
        })
    }

    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.tok_pos = pos;
        Ok(())
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ExprError> {
        Err(ExprError::Parse {
            position: self.tok_pos,
            expected: expected.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            // Right-associative; the exponent may carry its own unary minus.
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail("')'");
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let pos = self.tok_pos;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return self.fail("'(' after function name");
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.fail("')'");
                    }
                    self.bump()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                self.variable(&name, pos)
            }
            _ => self.fail(OPERAND),
        }
    }

    fn variable(&mut self, name: &str, pos: usize) -> Result<Node, ExprError> {
        let unknown = || ExprError::Parse {
            position: pos,
            expected: "a known variable or function".into(),
        };
        match self.style {
            VarStyle::Radial => {
                if name == "r" {
                    Ok(Node::Var(0))
                } else {
                    Err(unknown())
                }
            }
            VarStyle::Cartesian => {
                let index = if name == "x" {
                    1
                } else if let Some(digits) = name.strip_prefix('x') {
                    match digits.parse::<usize>() {
                        Ok(k) if k >= 1 && !digits.starts_with('0') => k,
                        _ => return Err(unknown()),
                    }
                } else {
                    return Err(unknown());
                };
                let out_of_range = index > self.dim || (name == "x" && self.dim != 1);
                if out_of_range && self.dim_error.is_none() {
                    self.dim_error = Some(ExprError::Dimension {
                        name: name.to_string(),
                        position: pos,
                        dim: self.dim,
                    });
                }
                Ok(Node::Var(index - 1))
            }
        }
    }
}

fn parse_with(src: &str, dim: usize, style: VarStyle) -> Result<Expr, ExprError> {
    if src.trim().is_empty() {
        return Err(ExprError::Parse {
            position: 0,
            expected: OPERAND.into(),
        });
    }
    let mut p = Parser::new(src, dim, style)?;
    let root = p.expr()?;
    if p.tok != Tok::End {
        return p.fail("an operator or end of input");
    }
    if let Some(e) = p.dim_error {
        return Err(e);
    }
    Ok(Expr::from_parts(root, dim, style))
}

/// Parses an expression over R^d with variables `x1 .. xd` (`x` allowed when d = 1).
pub fn parse(src: &str, dim: usize) -> Result<Expr, ExprError> {
    parse_with(src, dim, VarStyle::Cartesian)
}

/// Parses a one-variable expression in `r`, as used by radial bounds.
pub fn parse_radial(src: &str) -> Result<Expr, ExprError> {
    parse_with(src, 1, VarStyle::Radial)
}
