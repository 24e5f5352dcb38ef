//! Infix expression grammar: identifiers, decimal literals, `+ - * ^`,
//! unary minus, `exp`/`log`/`sqrt` calls, parentheses. `^` takes a literal
//! exponent. No division, no relational operators inside expressions.

use crate::expr::Expr;
use crate::model::VariableMeta;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {col}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("equality constraints are not supported (line {line}, column {col}); rewrite as two inequalities if both directions are convex")]
    EqualityUnsupported { line: usize, col: usize },
    #[error("exponent must be a numeric literal at line {line}, column {col}")]
    NonLiteralExponent { line: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();

    while let Some(&ch) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                chars.next();
                bump(ch, &mut line, &mut col);
            }
            '+' | '-' | '*' | '^' | '(' | ')' => {
                chars.next();
                bump(ch, &mut line, &mut col);
                let tok = match ch {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                tokens.push(Token { tok, line: tl, col: tc });
            }
            '=' => return Err(ParseError::EqualityUnsupported { line: tl, col: tc }),
            '<' | '>' => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!(
                        "relational operator `{ch}` does not belong in an expression; relations live in the constraint's `relation` field"
                    ),
                })
            }
            '/' => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: "division is not part of the grammar".into(),
                })
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut s = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_digit() || c2 == '.' {
                        s.push(c2);
                        chars.next();
                        bump(c2, &mut line, &mut col);
                    } else if c2 == 'e' || c2 == 'E' {
                        // exponent part: e[+-]?digits
                        let mut clone = chars.clone();
                        clone.next();
                        let sign = matches!(clone.peek(), Some('+') | Some('-'));
                        if sign {
                            clone.next();
                        }
                        if matches!(clone.peek(), Some(d) if d.is_ascii_digit()) {
                            s.push(c2);
                            chars.next();
                            bump(c2, &mut line, &mut col);
                            if sign {
                                let sc = *chars.peek().unwrap();
                                s.push(sc);
                                chars.next();
                                bump(sc, &mut line, &mut col);
                            }
                        } else {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = s.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("malformed number literal `{s}`"),
                })?;
                tokens.push(Token { tok: Tok::Num(value), line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        s.push(c2);
                        chars.next();
                        bump(c2, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                tokens.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    names: &'a dyn Fn(&str) -> Option<usize>,
    end_line: usize,
    end_col: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or((self.end_line, self.end_col))
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let (line, col) = self.here();
        match self.advance() {
            Some(t) if t.tok == tok => Ok(()),
            _ => Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected {what}"),
            }),
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.advance();
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.advance();
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    // term := '-' term | chain   (unary minus binds looser than '*')
    fn term(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.advance();
            return Ok(Expr::neg(self.term()?));
        }
        self.chain()
    }

    // chain := power ('*' power)*
    fn chain(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.power()?];
        while matches!(self.peek(), Some(Tok::Star)) {
            self.advance();
            factors.push(self.power()?);
        }
        Ok(Expr::product(factors))
    }

    // power := primary ('^' ['-'] number)*
    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.advance();
            let mut sign = 1.0;
            if matches!(self.peek(), Some(Tok::Minus)) {
                self.advance();
                sign = -1.0;
            }
            let (line, col) = self.here();
            match self.advance().map(|t| t.tok) {
                Some(Tok::Num(v)) => base = Expr::pow(base, sign * v),
                _ => return Err(ParseError::NonLiteralExponent { line, col }),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        match self.advance().map(|t| t.tok) {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.advance();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)` to close the call")?;
                    match name.as_str() {
                        "exp" => Ok(Expr::exp(arg)),
                        "log" => Ok(Expr::log(arg)),
                        "sqrt" => Ok(Expr::sqrt(arg)),
                        other => Err(ParseError::Syntax {
                            line,
                            col,
                            message: format!(
                                "unknown function `{other}` (supported: exp, log, sqrt)"
                            ),
                        }),
                    }
                } else {
                    match (self.names)(&name) {
                        Some(index) => Ok(Expr::Var(index)),
                        None => Err(ParseError::UnknownIdentifier { name, line, col }),
                    }
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(ParseError::Syntax {
                line,
                col,
                message: "expected a number, identifier, call, or `(`".into(),
            }),
        }
    }
}

fn parse_with(
    text: &str,
    names: &dyn Fn(&str) -> Option<usize>,
) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let end_line = text.lines().count().max(1);
    let end_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut parser = Parser {
        tokens,
        pos: 0,
        names,
        end_line,
        end_col,
    };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        let (line, col) = parser.here();
        return Err(ParseError::Syntax {
            line,
            col,
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

/// Parse an expression, resolving identifiers against the given variables.
pub fn parse_expr(text: &str, variables: &[VariableMeta]) -> Result<Expr, ParseError> {
    let lookup = |name: &str| variables.iter().position(|v| v.name == name);
    parse_with(text, &lookup)
}

/// Parse against a bare name list. Convenient for tests and tools.
pub fn parse_expr_str(text: &str, names: &[&str]) -> Result<Expr, ParseError> {
    let lookup = |name: &str| names.iter().position(|n| *n == name);
    parse_with(text, &lookup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Expr {
        parse_expr_str(text, &["x", "y", "z"]).unwrap()
    }

    #[test]
    fn precedence_and_structure() {
        assert_eq!(
            p("x + y*z"),
            Expr::Sum(vec![
                Expr::Var(0),
                Expr::Prod(vec![Expr::Var(1), Expr::Var(2)])
            ])
        );
        // unary minus binds looser than `*`
        assert_eq!(
            p("-x*y"),
            Expr::Neg(Box::new(Expr::Prod(vec![Expr::Var(0), Expr::Var(1)])))
        );
        // `^` binds tighter than `*`
        assert_eq!(
            p("2*x^2"),
            Expr::Prod(vec![
                Expr::Const(2.0),
                Expr::Pow(Box::new(Expr::Var(0)), 2.0)
            ])
        );
    }

    #[test]
    fn sums_flatten() {
        assert_eq!(
            p("x + y + z"),
            Expr::Sum(vec![Expr::Var(0), Expr::Var(1), Expr::Var(2)])
        );
        assert_eq!(p("(x + y) + z"), p("x + y + z"));
    }

    #[test]
    fn minus_becomes_negated_term() {
        assert_eq!(
            p("x - 2"),
            Expr::Sum(vec![Expr::Var(0), Expr::Const(-2.0)])
        );
        assert_eq!(
            p("x - 2*y"),
            Expr::Sum(vec![
                Expr::Var(0),
                Expr::Neg(Box::new(Expr::Prod(vec![Expr::Const(2.0), Expr::Var(1)])))
            ])
        );
    }

    #[test]
    fn calls_and_negative_exponents() {
        assert_eq!(p("exp(x)"), Expr::Exp(Box::new(Expr::Var(0))));
        assert_eq!(p("x^-2"), Expr::Pow(Box::new(Expr::Var(0)), -2.0));
        assert_eq!(p("1e-3"), Expr::Const(1e-3));
    }

    #[test]
    fn unknown_identifier_has_position() {
        let err = parse_expr_str("x + foo", &["x"]).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                line: 1,
                col: 5
            }
        );
    }

    #[test]
    fn equality_is_rejected() {
        let err = parse_expr_str("x + y == 1", &["x", "y"]).unwrap_err();
        assert!(matches!(err, ParseError::EqualityUnsupported { line: 1, col: 7 }));
    }

    #[test]
    fn non_literal_exponent_rejected() {
        let err = parse_expr_str("x^y", &["x", "y"]).unwrap_err();
        assert!(matches!(err, ParseError::NonLiteralExponent { .. }));
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse_expr_str("x +\n* y", &["x", "y"]).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, col: 1, .. }));
    }

    #[test]
    fn division_rejected() {
        let err = parse_expr_str("x/y", &["x", "y"]).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }
}
