use super::ast::*;
use super::lexer::{Keyword, Punct, Token, TokenKind};
use super::FrontendError;

/// Parses exactly one function from a token stream and checks its scoping rules.
pub fn parse_function(tokens: &[Token]) -> Result<Function, FrontendError> {
    let mut p = Parser { tokens, pos: 0 };
    let f = p.function()?;
    if let Some(t) = p.peek() {
        return Err(FrontendError::Parse {
            expected: "end of input".into(),
            found: t.kind.to_string(),
            span: t.span,
        });
    }
    super::check::check_function(&f)?;
    Ok(f)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn last_span(&self) -> SourceSpan {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn error<T>(&self, expected: &str) -> Result<T, FrontendError> {
        let (found, span) = match self.peek() {
            Some(t) => (t.kind.to_string(), t.span),
            None => {
                let s = self.last_span();
                (
                    "end of input".to_string(),
                    SourceSpan::new(s.end_line, s.end_col, s.end_line, s.end_col),
                )
            }
        };
        Err(FrontendError::Parse {
            expected: expected.to_string(),
            found,
            span,
        })
    }

    fn is_punct(&self, p: Punct) -> bool {
        self.peek_kind() == Some(&TokenKind::Punct(p))
    }

    fn is_kw(&self, k: Keyword) -> bool {
        self.peek_kind() == Some(&TokenKind::Keyword(k))
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: Punct) -> Result<SourceSpan, FrontendError> {
        if self.is_punct(p) {
            self.pos += 1;
            Ok(self.last_span())
        } else {
            self.error(&format!("'{}'", p.as_str()))
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> Result<SourceSpan, FrontendError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(self.last_span())
        } else {
            self.error(&format!("'{}'", k.as_str()))
        }
    }

    fn ident(&mut self) -> Result<(String, SourceSpan), FrontendError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
            }) => {
                self.pos += 1;
                Ok((name.clone(), *span))
            }
            _ => self.error("identifier"),
        }
    }

    fn int_lit(&mut self) -> Result<i64, FrontendError> {
        match self.peek_kind() {
            Some(TokenKind::IntLit(v)) => {
                self.pos += 1;
                Ok(*v)
            }
            _ => self.error("integer literal"),
        }
    }

    fn array_size(&mut self) -> Result<u32, FrontendError> {
        let v = self.int_lit()?;
        match u32::try_from(v) {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(FrontendError::Scope {
                message: format!("array size must be a positive literal, got {v}"),
                span: self.last_span(),
            }),
        }
    }

    fn function(&mut self) -> Result<Function, FrontendError> {
        let start = match self.peek() {
            Some(t) => t.span,
            None => return self.error("function definition"),
        };
        let ret = if self.is_kw(Keyword::Int) {
            RetType::Int
        } else if self.is_kw(Keyword::Void) {
            RetType::Void
        } else {
            return self.error("'int' or 'void'");
        };
        self.pos += 1;
        let (name, _) = self.ident()?;
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        if !self.is_punct(Punct::RParen) {
            loop {
                let pstart = self.expect_kw(Keyword::Int)?;
                let (pname, _) = self.ident()?;
                let ty = if self.eat_punct(Punct::LBracket) {
                    let n = self.array_size()?;
                    self.expect_punct(Punct::RBracket)?;
                    VarType::Array(n)
                } else {
                    VarType::Int
                };
                params.push(Param {
                    name: pname,
                    ty,
                    span: pstart.join(self.last_span()),
                });
                if !self.eat_punct(Punct::Comma) {
                    break;
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        let body = self.block()?;
        Ok(Function {
            ret,
            name,
            params,
            span: start.join(body.span),
            body,
        })
    }

    fn block(&mut self) -> Result<Block, FrontendError> {
        let start = self.expect_punct(Punct::LBrace)?;
        let mut stmts = Vec::new();
        while !self.is_punct(Punct::RBrace) {
            if self.peek().is_none() {
                return self.error("'}'");
            }
            stmts.push(self.stmt()?);
        }
        let end = self.expect_punct(Punct::RBrace)?;
        Ok(Block {
            stmts,
            span: start.join(end),
        })
    }

    /// Branch and loop bodies: a braced block, or a single statement wrapped in one.
    fn body(&mut self) -> Result<Block, FrontendError> {
        if self.is_punct(Punct::LBrace) {
            self.block()
        } else {
            let s = self.stmt()?;
            Ok(Block {
                span: s.span,
                stmts: vec![s],
            })
        }
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let start = match self.peek() {
            Some(t) => t.span,
            None => return self.error("statement"),
        };
        let kind = match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Int)) => {
                let k = self.decl()?;
                self.expect_punct(Punct::Semi)?;
                k
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let cond = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                let then_block = self.body()?;
                let else_block = if self.is_kw(Keyword::Else) {
                    self.pos += 1;
                    Some(self.body()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                }
            }
            Some(TokenKind::Keyword(Keyword::While)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let cond = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Some(TokenKind::Keyword(Keyword::For)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let init = if self.is_punct(Punct::Semi) {
                    None
                } else {
                    let s0 = self.peek().map(|t| t.span).unwrap_or_default();
                    let k = if self.is_kw(Keyword::Int) {
                        self.decl()?
                    } else {
                        self.simple()?
                    };
                    Some(Box::new(Stmt {
                        kind: k,
                        span: s0.join(self.last_span()),
                    }))
                };
                self.expect_punct(Punct::Semi)?;
                let cond = if self.is_punct(Punct::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(Punct::Semi)?;
                let update = if self.is_punct(Punct::RParen) {
                    None
                } else {
                    let s0 = self.peek().map(|t| t.span).unwrap_or_default();
                    let k = self.simple()?;
                    Some(Box::new(Stmt {
                        kind: k,
                        span: s0.join(self.last_span()),
                    }))
                };
                self.expect_punct(Punct::RParen)?;
                let body = self.body()?;
                StmtKind::For {
                    init,
                    cond,
                    update,
                    body,
                }
            }
            Some(TokenKind::Keyword(Keyword::Switch)) => self.switch()?,
            Some(TokenKind::Keyword(Keyword::Break)) => {
                self.pos += 1;
                self.expect_punct(Punct::Semi)?;
                StmtKind::Break
            }
            Some(TokenKind::Keyword(Keyword::Return)) => {
                self.pos += 1;
                let value = if self.is_punct(Punct::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(Punct::Semi)?;
                StmtKind::Return(value)
            }
            Some(TokenKind::Punct(Punct::LBrace)) => StmtKind::Block(self.block()?),
            Some(TokenKind::Punct(Punct::Semi)) => return self.error("statement"),
            _ => {
                let k = self.simple()?;
                self.expect_punct(Punct::Semi)?;
                k
            }
        };
        Ok(Stmt {
            kind,
            span: start.join(self.last_span()),
        })
    }

    fn decl(&mut self) -> Result<StmtKind, FrontendError> {
        self.expect_kw(Keyword::Int)?;
        let (name, _) = self.ident()?;
        if self.eat_punct(Punct::LBracket) {
            let n = self.array_size()?;
            self.expect_punct(Punct::RBracket)?;
            return Ok(StmtKind::Decl {
                name,
                size: Some(n),
                init: None,
            });
        }
        let init = if self.eat_punct(Punct::Assign) {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(StmtKind::Decl {
            name,
            size: None,
            init,
        })
    }

    /// Assignment or expression statement, without the trailing `;`.
    fn simple(&mut self) -> Result<StmtKind, FrontendError> {
        let e = self.expr()?;
        if self.is_punct(Punct::Assign) {
            let target = match e.kind {
                ExprKind::Var(n) => LValue::Var(n),
                ExprKind::Index(n, i) => LValue::Index(n, i),
                _ => {
                    return Err(FrontendError::Parse {
                        expected: "assignable expression before '='".into(),
                        found: "expression".into(),
                        span: e.span,
                    })
                }
            };
            self.pos += 1;
            let value = self.expr()?;
            Ok(StmtKind::Assign { target, value })
        } else {
            Ok(StmtKind::Expr(e))
        }
    }

    fn switch(&mut self) -> Result<StmtKind, FrontendError> {
        self.expect_kw(Keyword::Switch)?;
        self.expect_punct(Punct::LParen)?;
        let scrutinee = self.expr()?;
        self.expect_punct(Punct::RParen)?;
        self.expect_punct(Punct::LBrace)?;
        let mut cases: Vec<Case> = Vec::new();
        let mut default = None;
        loop {
            if self.is_kw(Keyword::Case) {
                let label = self.expect_kw(Keyword::Case)?;
                if default.is_some() {
                    return Err(FrontendError::Parse {
                        expected: "'default' as the last label".into(),
                        found: "case".into(),
                        span: label,
                    });
                }
                let neg = self.eat_punct(Punct::Minus);
                let v = self.int_lit()?;
                let value = if neg { -v } else { v };
                if cases.iter().any(|c| c.value == value) {
                    return Err(FrontendError::Scope {
                        message: format!("duplicate case label {value}"),
                        span: label.join(self.last_span()),
                    });
                }
                let colon = self.expect_punct(Punct::Colon)?;
                let body = self.case_body(colon)?;
                cases.push(Case { value, body });
            } else if self.is_kw(Keyword::Default) {
                if default.is_some() {
                    return self.error("single 'default'");
                }
                self.pos += 1;
                let colon = self.expect_punct(Punct::Colon)?;
                default = Some(self.case_body(colon)?);
            } else if self.is_punct(Punct::RBrace) {
                self.pos += 1;
                break;
            } else {
                return self.error("'case', 'default' or '}'");
            }
        }
        Ok(StmtKind::Switch {
            scrutinee,
            cases,
            default,
        })
    }

    fn case_body(&mut self, colon: SourceSpan) -> Result<Block, FrontendError> {
        let mut stmts = Vec::new();
        while !(self.is_kw(Keyword::Case) || self.is_kw(Keyword::Default) || self.is_punct(Punct::RBrace)) {
            if self.peek().is_none() {
                return self.error("'}'");
            }
            stmts.push(self.stmt()?);
        }
        let span = match (stmts.first(), stmts.last()) {
            (Some(a), Some(b)) => a.span.join(b.span),
            _ => colon,
        };
        Ok(Block { stmts, span })
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let op = match self.peek_kind()? {
            TokenKind::Punct(p) => match p {
                Punct::Plus => BinOp::Add,
                Punct::Minus => BinOp::Sub,
                Punct::Star => BinOp::Mul,
                Punct::Slash => BinOp::Div,
                Punct::Percent => BinOp::Rem,
                Punct::Lt => BinOp::Lt,
                Punct::Le => BinOp::Le,
                Punct::Gt => BinOp::Gt,
                Punct::Ge => BinOp::Ge,
                Punct::EqEq => BinOp::Eq,
                Punct::Ne => BinOp::Ne,
                Punct::AndAnd => BinOp::And,
                Punct::OrOr => BinOp::Or,
                _ => return None,
            },
            _ => return None,
        };
        Some(op)
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let op = if self.is_punct(Punct::Minus) {
            Some(UnOp::Neg)
        } else if self.is_punct(Punct::Bang) {
            Some(UnOp::Not)
        } else {
            None
        };
        match op {
            Some(op) => {
                self.pos += 1;
                let start = self.last_span();
                let operand = self.unary()?;
                let span = start.join(operand.span);
                Ok(Expr {
                    kind: ExprKind::Unary(op, Box::new(operand)),
                    span,
                })
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek_kind() {
            Some(TokenKind::IntLit(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr {
                    kind: ExprKind::Int(v),
                    span: self.last_span(),
                })
            }
            Some(TokenKind::Ident(_)) => {
                let (name, start) = self.ident()?;
                if self.eat_punct(Punct::LParen) {
                    let mut args = Vec::new();
                    if !self.is_punct(Punct::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(Punct::Comma) {
                                break;
                            }
                        }
                    }
                    let end = self.expect_punct(Punct::RParen)?;
                    Ok(Expr {
                        kind: ExprKind::Call(name, args),
                        span: start.join(end),
                    })
                } else if self.eat_punct(Punct::LBracket) {
                    let idx = self.expr()?;
                    let end = self.expect_punct(Punct::RBracket)?;
                    Ok(Expr {
                        kind: ExprKind::Index(name, Box::new(idx)),
                        span: start.join(end),
                    })
                } else {
                    Ok(Expr {
                        kind: ExprKind::Var(name),
                        span: start,
                    })
                }
            }
            Some(TokenKind::Punct(Punct::LParen)) => {
                let start = self.expect_punct(Punct::LParen)?;
                let mut e = self.expr()?;
                let end = self.expect_punct(Punct::RParen)?;
                e.span = start.join(end);
                Ok(e)
            }
            _ => self.error("expression"),
        }
    }
}
