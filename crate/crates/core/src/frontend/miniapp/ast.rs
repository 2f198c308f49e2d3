/// Byte range within one source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: Ident,
    pub extends: Option<Ident>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub span: Span,
    /// Declared by the platform profile rather than app source.
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub ty: Ident,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub ty: Ident,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub ret: Ident,
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Option<Vec<Stmt>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Local { ty: Ident, name: Ident, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    Expr(Expr),
    If { cond: Expr, then: Vec<Stmt>, otherwise: Option<Vec<Stmt>> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
}

impl StmtKind {
    pub fn label(&self) -> &'static str {
        match self {
            StmtKind::Local { .. } => "local",
            StmtKind::Assign { .. } => "assign",
            StmtKind::Expr(_) => "call",
            StmtKind::If { .. } => "if",
            StmtKind::While { .. } => "while",
            StmtKind::Return(_) => "return",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Name(Ident),
    Field(Expr, Ident),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    This,
    Name(Ident),
    New(Ident),
    Field(Box<Expr>, Ident),
    Call { receiver: Option<Box<Expr>>, name: Ident, args: Vec<Expr> },
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
}
