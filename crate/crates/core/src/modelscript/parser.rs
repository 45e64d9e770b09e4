//! ```text
//! program   := (paramDecl | letDecl)* "output" expr ";"
//! paramDecl := "param" ident "=" signed ("in" "[" signed "," signed "]")? ";"
//! letDecl   := "let" ident "=" expr ";"
//! expr      := term (("+" | "-") term)*
//! term      := unary (("*" | "/") unary)*
//! unary     := "-" unary | atom
//! atom      := number | ident | ident "(" args? ")" | "(" expr ")" | "(" expr "," expr ("," expr)? ")"
//! args      := arg ("," arg)*
//! arg       := (ident "=")? expr
//! signed    := "-"? number
//! ```

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::{ScriptError, SourceSpan};

pub fn parse(tokens: &[Token]) -> Result<Program, ScriptError> {
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &'a TokenKind {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].kind
    }

    fn advance(&mut self) -> &'a Token {
        let t = self.peek();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ScriptError> {
        let t = self.peek();
        Err(ScriptError::parse(t.span, expected.iter().map(|s| s.to_string()).collect(), t.kind.describe()))
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'a Token, ScriptError> {
        if self.peek().kind == kind {
            Ok(self.advance())
        } else {
            self.fail(&[&format!("`{}`", kind.text())])
        }
    }

    fn ident(&mut self) -> Result<Ident, ScriptError> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let span = self.advance().span;
                Ok(Ident { name: name.clone(), span })
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn signed(&mut self) -> Result<f64, ScriptError> {
        let neg = self.peek().kind == TokenKind::Minus;
        if neg {
            self.advance();
        }
        match self.peek().kind {
            TokenKind::Number(v) => {
                self.advance();
                Ok(if neg { -v } else { v })
            }
            _ => self.fail(&["number"]),
        }
    }

    fn program(&mut self) -> Result<Program, ScriptError> {
        let mut items = Vec::new();
        loop {
            let start = self.peek().span;
            match self.peek().kind {
                TokenKind::Param => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect(TokenKind::Eq)?;
                    let init = self.signed()?;
                    let bounds = if self.peek().kind == TokenKind::In {
                        self.advance();
                        self.expect(TokenKind::LBracket)?;
                        let lo = self.signed()?;
                        self.expect(TokenKind::Comma)?;
                        let hi = self.signed()?;
                        self.expect(TokenKind::RBracket)?;
                        Some((lo, hi))
                    } else {
                        None
                    };
                    if bounds.is_none() && self.peek().kind != TokenKind::Semi {
                        return self.fail(&["`in`", "`;`"]);
                    }
                    let end = self.expect(TokenKind::Semi)?.span;
                    items.push(Item::Param(ParamDecl { name, init, bounds, span: start.to(end) }));
                }
                TokenKind::Let => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect(TokenKind::Eq)?;
                    let expr = self.expr()?;
                    let end = self.semi_after_expr()?;
                    items.push(Item::Let(LetDecl { name, expr, span: start.to(end) }));
                }
                TokenKind::Output => {
                    self.advance();
                    let output = self.expr()?;
                    self.semi_after_expr()?;
                    if self.peek().kind != TokenKind::Eof {
                        return self.fail(&["end of input"]);
                    }
                    return Ok(Program { items, output });
                }
                _ => return self.fail(&["`param`", "`let`", "`output`"]),
            }
        }
    }

    /// `;` closing a statement; anything else could also have continued the expression.
    fn semi_after_expr(&mut self) -> Result<SourceSpan, ScriptError> {
        if self.peek().kind == TokenKind::Semi {
            return Ok(self.advance().span);
        }
        self.fail(&["`;`", "`+`", "`-`", "`*`", "`/`"])
    }

    fn expr(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn term(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary(&mut self) -> Result<Expr, ScriptError> {
        if self.peek().kind == TokenKind::Minus {
            let start = self.advance().span;
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr { kind: ExprKind::Neg(Box::new(e)), span });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ScriptError> {
        let t = self.peek();
        match &t.kind {
            TokenKind::Number(v) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Number(*v), span: t.span })
            }
            TokenKind::Ident(_) => {
                let name = self.ident()?;
                if self.peek().kind != TokenKind::LParen {
                    return Ok(Expr { kind: ExprKind::Ident(name.name), span: name.span });
                }
                self.advance();
                let mut args = Vec::new();
                if self.peek().kind != TokenKind::RParen {
                    loop {
                        let arg_name = match (&self.peek().kind, self.peek2()) {
                            (TokenKind::Ident(_), TokenKind::Eq) => {
                                let n = self.ident()?;
                                self.advance();
                                Some(n)
                            }
                            _ => None,
                        };
                        let value = self.expr()?;
                        args.push(Arg { name: arg_name, value });
                        match self.peek().kind {
                            TokenKind::Comma => {
                                self.advance();
                            }
                            TokenKind::RParen => break,
                            _ => return self.fail(&["`,`", "`)`"]),
                        }
                    }
                }
                let end = self.expect(TokenKind::RParen)?.span;
                let span = name.span.to(end);
                Ok(Expr { kind: ExprKind::Call { name, args }, span })
            }
            TokenKind::LParen => {
                let start = self.advance().span;
                let first = self.expr()?;
                let mut elems = vec![first];
                while self.peek().kind == TokenKind::Comma {
                    if elems.len() == 3 {
                        return self.fail(&["`)`"]);
                    }
                    self.advance();
                    elems.push(self.expr()?);
                }
                if self.peek().kind != TokenKind::RParen {
                    return self.fail(if elems.len() == 3 { &["`)`"] } else { &["`,`", "`)`"] });
                }
                let end = self.advance().span;
                let span = start.to(end);
                if elems.len() == 1 {
                    let mut e = elems.pop().expect("one element");
                    e.span = span;
                    return Ok(e);
                }
                Ok(Expr { kind: ExprKind::Tuple(elems), span })
            }
            _ => self.fail(&["number", "identifier", "`(`", "`-`"]),
        }
    }
}
