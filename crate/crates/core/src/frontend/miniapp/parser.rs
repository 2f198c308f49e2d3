use super::ast::*;
use super::lexer::{tokenize, Token};

/// Nesting bound for blocks and expressions.
const MAX_DEPTH: usize = 64;

const KEYWORDS: &[&str] = &[
    "class", "extends", "if", "else", "while", "return", "new", "this", "true", "false", "null",
];

pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

pub fn parse_classes(text: &str) -> Result<Vec<ClassDecl>, ParseError> {
    let tokens = tokenize(text).map_err(|e| ParseError {
        offset: e.offset,
        message: e.message,
    })?;
    let mut parser = Parser { tokens, pos: 0, depth: 0 };
    let mut classes = Vec::new();
    while parser.peek() != &Token::Eof {
        classes.push(parser.class()?);
    }
    Ok(classes)
}

struct Parser {
    tokens: Vec<(Token, Span)>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        let idx = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].0
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].1
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].1
    }

    fn bump(&mut self) -> (Token, Span) {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            offset: self.span().start,
            message: message.into(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Token::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.bump().1)
        } else {
            self.error(format!("expected `{p}`, found {}", self.peek().describe()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.bump().1)
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek().describe()))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Token::Ident(text) if !KEYWORDS.contains(&text.as_str()) => {
                let span = self.bump().1;
                Ok(Ident { text, span })
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn class(&mut self) -> PResult<ClassDecl> {
        let start = self.expect_keyword("class")?;
        let name = self.ident()?;
        let extends = if self.is_keyword("extends") {
            self.bump();
            Some(self.ident()?)
        } else {
            None
        };
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Token::Eof {
                return self.error("unterminated class body");
            }
            let member_start = self.span();
            let ty = self.ident()?;
            let name = self.ident()?;
            if self.eat_punct(";") {
                fields.push(FieldDecl { ty, name });
                continue;
            }
            self.expect_punct("(")?;
            let mut params = Vec::new();
            if !self.is_punct(")") {
                loop {
                    let ty = self.ident()?;
                    let name = self.ident()?;
                    params.push(Param { ty, name });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let body = if self.eat_punct(";") {
                None
            } else {
                Some(self.block()?)
            };
            methods.push(MethodDecl {
                ret: ty,
                name,
                params,
                body,
                span: member_start.to(self.prev_span()),
            });
        }
        let end = self.expect_punct("}")?;
        Ok(ClassDecl {
            name,
            extends,
            fields,
            methods,
            span: start.to(end),
            stub: false,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.enter()?;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Token::Eof {
                return self.error("unterminated block");
            }
            stmts.push(self.statement()?);
        }
        self.bump();
        self.leave();
        Ok(stmts)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = if self.is_keyword("if") {
            self.if_rest()?
        } else if self.is_keyword("while") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            StmtKind::While { cond, body }
        } else if self.is_keyword("return") {
            self.bump();
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            StmtKind::Return(value)
        } else if matches!(
            (self.peek(), self.peek_at(1)),
            (Token::Ident(a), Token::Ident(b)) if !KEYWORDS.contains(&a.as_str()) && !KEYWORDS.contains(&b.as_str())
        ) {
            let ty = self.ident()?;
            let name = self.ident()?;
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            self.expect_punct(";")?;
            StmtKind::Local { ty, name, init }
        } else {
            let expr = self.expr()?;
            if self.eat_punct("=") {
                let target = match expr.kind {
                    ExprKind::Name(id) => LValue::Name(id),
                    ExprKind::Field(obj, field) => LValue::Field(*obj, field),
                    _ => {
                        return Err(ParseError {
                            offset: expr.span.start,
                            message: "left-hand side of assignment must be a name or field".into(),
                        })
                    }
                };
                let value = self.expr()?;
                self.expect_punct(";")?;
                StmtKind::Assign { target, value }
            } else {
                if !matches!(expr.kind, ExprKind::Call { .. } | ExprKind::New(_)) {
                    return Err(ParseError {
                        offset: expr.span.start,
                        message: "expression statement must be a call or instantiation".into(),
                    });
                }
                self.expect_punct(";")?;
                StmtKind::Expr(expr)
            }
        };
        Ok(Stmt {
            kind,
            span: start.to(self.prev_span()),
        })
    }

    fn if_rest(&mut self) -> PResult<StmtKind> {
        self.enter()?;
        self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then = self.block()?;
        let otherwise = if self.is_keyword("else") {
            self.bump();
            if self.is_keyword("if") {
                let start = self.span();
                let kind = self.if_rest()?;
                Some(vec![Stmt {
                    kind,
                    span: start.to(self.prev_span()),
                }])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        self.leave();
        Ok(StmtKind::If { cond, then, otherwise })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let e = self.binary(0);
        self.leave();
        e
    }

    fn binary(&mut self, min_level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[("<=", BinOp::Le), (">=", BinOp::Ge), ("<", BinOp::Lt), (">", BinOp::Gt)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div)],
        ];
        if min_level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(min_level + 1)?;
        let mut links = 0;
        'more: loop {
            for (sym, op) in LEVELS[min_level] {
                if self.is_punct(sym) {
                    self.bump();
                    // Left-nested chains recurse during lowering.
                    self.enter()?;
                    links += 1;
                    let rhs = self.binary(min_level + 1)?;
                    let span = lhs.span.to(rhs.span);
                    lhs = Expr {
                        kind: ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)),
                        span,
                    };
                    continue 'more;
                }
            }
            self.depth -= links;
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let op = if self.is_punct("!") {
            UnOp::Not
        } else if self.is_punct("-") {
            UnOp::Neg
        } else {
            return self.postfix();
        };
        self.bump();
        self.enter()?;
        let inner = self.unary()?;
        self.leave();
        let span = start.to(inner.span);
        Ok(Expr {
            kind: ExprKind::Unary(op, Box::new(inner)),
            span,
        })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        let mut links = 0;
        while self.eat_punct(".") {
            self.enter()?;
            links += 1;
            let name = self.ident()?;
            if self.is_punct("(") {
                let args = self.args()?;
                let span = expr.span.to(self.prev_span());
                expr = Expr {
                    kind: ExprKind::Call {
                        receiver: Some(Box::new(expr)),
                        name,
                        args,
                    },
                    span,
                };
            } else {
                let span = expr.span.to(name.span);
                expr = Expr {
                    kind: ExprKind::Field(Box::new(expr), name),
                    span,
                };
            }
        }
        self.depth -= links;
        Ok(expr)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Token::Int(i) => {
                self.bump();
                ExprKind::Int(i)
            }
            Token::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Token::Punct("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_punct(")")?;
                return Ok(Expr {
                    kind: inner.kind,
                    span: start.to(self.prev_span()),
                });
            }
            Token::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Bool(word == "true")
                }
                "null" => {
                    self.bump();
                    ExprKind::Null
                }
                "this" => {
                    self.bump();
                    ExprKind::This
                }
                "new" => {
                    self.bump();
                    let ty = self.ident()?;
                    self.expect_punct("(")?;
                    self.expect_punct(")")?;
                    ExprKind::New(ty)
                }
                _ => {
                    let name = self.ident()?;
                    if self.is_punct("(") {
                        let args = self.args()?;
                        ExprKind::Call {
                            receiver: None,
                            name,
                            args,
                        }
                    } else {
                        ExprKind::Name(name)
                    }
                }
            },
            other => return self.error(format!("expected expression, found {}", other.describe())),
        };
        Ok(Expr {
            kind,
            span: start.to(self.prev_span()),
        })
    }
}
