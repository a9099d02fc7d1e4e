//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' posint)?
//! atom   := number | name | func '(' expr ')' | '(' expr ')' | '-' atom
//! ```

use super::{BinaryOp, CoordinateSystem, SuperExpr, UnaryOp};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => out.push((Token::Plus, start)),
            '-' => out.push((Token::Minus, start)),
            '*' => out.push((Token::Star, start)),
            '/' => out.push((Token::Slash, start)),
            '^' => out.push((Token::Caret, start)),
            '(' => out.push((Token::LParen, start)),
            ')' => out.push((Token::RParen, start)),
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Lex {
                    position: start,
                    reason: format!("malformed number {text:?}"),
                })?;
                out.push((Token::Number(value), start));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(Error::Lex {
                    position: start,
                    reason: format!("unexpected character {c:?}"),
                })
            }
        }
        i += 1;
    }
    out.push((Token::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    coords: &'a CoordinateSystem,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, reason: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.position(),
            reason: reason.into(),
        }
    }

    fn expr(&mut self) -> Result<SuperExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = SuperExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<SuperExpr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = SuperExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<SuperExpr> {
        let base = self.atom()?;
        if *self.peek() != Token::Caret {
            return Ok(base);
        }
        self.bump();
        match self.bump() {
            Token::Number(n) if n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                Ok(SuperExpr::raw_pow(base, n as u32))
            }
            _ => Err(Error::Syntax {
                position: self.tokens[self.pos.saturating_sub(1)].1,
                reason: "exponent must be a positive integer".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<SuperExpr> {
        let position = self.position();
        match self.bump() {
            Token::Number(v) => Ok(SuperExpr::constant(v)),
            Token::Minus => Ok(SuperExpr::raw_unary(UnaryOp::Neg, self.atom()?)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    if *self.peek() != Token::LParen {
                        return Err(self.error(format!("expected '(' after {name}")));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(SuperExpr::raw_unary(op, arg))
                } else {
                    let _ = position;
                    self.coords.var_named(&name)
                }
            }
            Token::End => Err(Error::Syntax {
                position,
                reason: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                position,
                reason: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() == Token::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error("expected ')'"))
        }
    }
}

/// Parses and validates (identifiers resolved, parity rules checked).
pub fn parse(src: &str, coords: &CoordinateSystem) -> Result<SuperExpr> {
    let mut parser = Parser {
        tokens: lex(src)?,
        pos: 0,
        coords,
    };
    let e = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.error(format!("unexpected trailing {:?}", parser.peek())));
    }
    e.check_parity_rules()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superexpr::Kind;

    fn coords() -> CoordinateSystem {
        CoordinateSystem::new(&["x1", "x2"], &["xi1", "xi2"]).unwrap()
    }

    #[test]
    fn builds_left_associative_tree() {
        let c = coords();
        let e = parse("x1*x1 + 2", &c).unwrap();
        let Kind::Binary(BinaryOp::Add, lhs, rhs) = e.kind() else {
            panic!("expected add, got {e}")
        };
        assert!(matches!(lhs.kind(), Kind::Binary(BinaryOp::Mul, _, _)));
        assert_eq!(rhs.as_const(), Some(2.0));
        let e = parse("x1 - x2 - 1", &c).unwrap();
        assert_eq!(e.to_string(), "x1 - x2 - 1");
        let e = parse("x1 - (x2 - 1)", &c).unwrap();
        assert_eq!(e.to_string(), "x1 - (x2 - 1)");
    }

    #[test]
    fn caret_binds_tightest() {
        let c = coords();
        let e = parse("2*x1^3", &c).unwrap();
        let Kind::Binary(BinaryOp::Mul, _, rhs) = e.kind() else { panic!() };
        assert!(matches!(rhs.kind(), Kind::Pow(_, 3)));
        let e = parse("-x1^2", &c).unwrap();
        assert!(matches!(e.kind(), Kind::Pow(_, 2)));
    }

    #[test]
    fn rejects_odd_transcendental_arguments() {
        let c = coords();
        assert!(matches!(parse("sin(xi1)", &c), Err(Error::ParityViolation(_))));
        assert!(matches!(parse("exp(x1 + xi1)", &c), Err(Error::ParityViolation(_))));
        assert!(parse("exp(xi1*xi2)", &c).is_ok());
        assert!(matches!(parse("x1/xi1", &c), Err(Error::ParityViolation(_))));
    }

    #[test]
    fn reports_errors_with_positions() {
        let c = coords();
        assert!(matches!(parse("x1 $ 2", &c), Err(Error::Lex { position: 3, .. })));
        assert!(matches!(parse("y + 1", &c), Err(Error::UnknownIdentifier(n)) if n == "y"));
        assert!(matches!(parse("x1^0", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1^1.5", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse("(x1", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse("sin x1", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 x2", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse("", &c), Err(Error::Syntax { .. })));
    }

    #[test]
    fn numbers_with_exponents() {
        let c = coords();
        assert_eq!(parse("1.5e-3", &c).unwrap().as_const(), Some(1.5e-3));
        assert_eq!(parse(".25", &c).unwrap().as_const(), Some(0.25));
        assert!(parse("1.2.3", &c).is_err());
    }
}
