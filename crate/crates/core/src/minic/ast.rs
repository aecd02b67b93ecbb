use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based, inclusive-start / exclusive-end source region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Self {
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn join(self, other: SourceSpan) -> SourceSpan {
        let (start_line, start_col) =
            (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let (end_line, end_col) = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        SourceSpan {
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<u32> {
        self.start_line..=self.end_line.max(self.start_line)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_line, self.start_col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarType {
    Int,
    /// Fixed-size int array; the size is always a positive literal.
    Array(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RetType {
    Int,
    Void,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: VarType,
    pub span: SourceSpan,
}

/// A single MiniC function: the unit of parsing, transformation and graph extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub ret: RetType,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: SourceSpan,
}

/// The typed syntax tree of one function.
pub type Ast = Function;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: SourceSpan,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Self {
            stmts,
            span: SourceSpan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Self {
            kind,
            span: SourceSpan::default(),
        }
    }

    /// Loops, branches and jumps.
    pub fn is_control_flow(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::If { .. }
                | StmtKind::While { .. }
                | StmtKind::For { .. }
                | StmtKind::Switch { .. }
                | StmtKind::Break
                | StmtKind::Return(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub value: i64,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Decl {
        name: String,
        size: Option<u32>,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Block,
    },
    Switch {
        scrutinee: Expr,
        cases: Vec<Case>,
        default: Option<Block>,
    },
    Break,
    Return(Option<Expr>),
    Expr(Expr),
    Block(Block),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Index(String, Box<Expr>),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Self {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn int(v: i64) -> Self {
        Self::new(ExprKind::Int(v))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::new(ExprKind::Var(name.into()))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    pub fn unary(op: UnOp, operand: Expr) -> Self {
        Self::new(ExprKind::Unary(op, Box::new(operand)))
    }

    /// True when evaluating the expression cannot call a function.
    pub fn is_pure(&self) -> bool {
        let mut pure = true;
        self.walk(&mut |e| {
            if matches!(e.kind, ExprKind::Call(..)) {
                pure = false;
            }
        });
        pure
    }

    /// True when evaluation may trap (array access or division).
    pub fn may_trap(&self) -> bool {
        let mut trap = false;
        self.walk(&mut |e| match &e.kind {
            ExprKind::Index(..) | ExprKind::Call(..) => trap = true,
            ExprKind::Binary(BinOp::Div | BinOp::Rem, ..) => trap = true,
            _ => {}
        });
        trap
    }

    /// Pre-order visit of every sub-expression, including `self`.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => {}
            ExprKind::Index(_, i) => i.walk(f),
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Unary(_, e) => e.walk(f),
            ExprKind::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
        }
    }

    /// Names read by this expression (variables and indexed arrays).
    pub fn reads(&self, out: &mut Vec<String>) {
        self.walk(&mut |e| match &e.kind {
            ExprKind::Var(n) | ExprKind::Index(n, _) => out.push(n.clone()),
            _ => {}
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExprKind {
    /// Always non-negative; negative constants are `Unary(Neg, Int)`.
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Call(String, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_comparison(self) -> bool {
        self.is_relational() || matches!(self, BinOp::Eq | BinOp::Ne)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// The operator that gives the same result with swapped operands.
    pub fn mirrored(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Gt => BinOp::Lt,
            BinOp::Le => BinOp::Ge,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    /// Logical complement of a comparison (`a < b` is false iff `a >= b`).
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Lt => BinOp::Ge,
            BinOp::Ge => BinOp::Lt,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            _ => return None,
        })
    }
}

impl Function {
    /// Structural equality: same tree, spans ignored.
    pub fn structurally_eq(&self, other: &Function) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.clear_spans();
        b.clear_spans();
        a == b
    }

    pub fn clear_spans(&mut self) {
        self.span = SourceSpan::default();
        for p in &mut self.params {
            p.span = SourceSpan::default();
        }
        clear_block(&mut self.body);
    }

    /// Every identifier spelled anywhere in the function: its name, parameters,
    /// declared variables and called functions.
    pub fn identifiers(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        out.insert(self.name.clone());
        for p in &self.params {
            out.insert(p.name.clone());
        }
        visit_stmts(&self.body, &mut |s| {
            if let StmtKind::Decl { name, .. } = &s.kind {
                out.insert(name.clone());
            }
            if let StmtKind::Assign { target, .. } = &s.kind {
                out.insert(target.name().to_string());
            }
            for e in stmt_exprs(s) {
                e.walk(&mut |e| match &e.kind {
                    ExprKind::Var(n) | ExprKind::Index(n, _) | ExprKind::Call(n, _) => {
                        out.insert(n.clone());
                    }
                    _ => {}
                });
            }
        });
        out
    }
}

fn clear_block(b: &mut Block) {
    b.span = SourceSpan::default();
    for s in &mut b.stmts {
        clear_stmt(s);
    }
}

fn clear_stmt(s: &mut Stmt) {
    s.span = SourceSpan::default();
    match &mut s.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                clear_expr(e);
            }
        }
        StmtKind::Assign { target, value } => {
            if let LValue::Index(_, i) = target {
                clear_expr(i);
            }
            clear_expr(value);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            clear_expr(cond);
            clear_block(then_block);
            if let Some(b) = else_block {
                clear_block(b);
            }
        }
        StmtKind::While { cond, body } => {
            clear_expr(cond);
            clear_block(body);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(s) = init {
                clear_stmt(s);
            }
            if let Some(c) = cond {
                clear_expr(c);
            }
            if let Some(s) = update {
                clear_stmt(s);
            }
            clear_block(body);
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            clear_expr(scrutinee);
            for c in cases {
                clear_block(&mut c.body);
            }
            if let Some(b) = default {
                clear_block(b);
            }
        }
        StmtKind::Break => {}
        StmtKind::Return(e) => {
            if let Some(e) = e {
                clear_expr(e);
            }
        }
        StmtKind::Expr(e) => clear_expr(e),
        StmtKind::Block(b) => clear_block(b),
    }
}

fn clear_expr(e: &mut Expr) {
    e.span = SourceSpan::default();
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Var(_) => {}
        ExprKind::Index(_, i) => clear_expr(i),
        ExprKind::Call(_, args) => args.iter_mut().for_each(clear_expr),
        ExprKind::Unary(_, o) => clear_expr(o),
        ExprKind::Binary(_, l, r) => {
            clear_expr(l);
            clear_expr(r);
        }
    }
}

/// Pre-order visit of every statement in `block`, descending into nested
/// blocks and the init/update clauses of `for`.
pub fn visit_stmts<'a>(block: &'a Block, f: &mut impl FnMut(&'a Stmt)) {
    for s in &block.stmts {
        visit_stmt(s, f);
    }
}

pub fn visit_stmt<'a>(s: &'a Stmt, f: &mut impl FnMut(&'a Stmt)) {
    f(s);
    for b in child_blocks(s) {
        visit_stmts(b, f);
    }
    if let StmtKind::For { init, update, .. } = &s.kind {
        if let Some(i) = init {
            visit_stmt(i, f);
        }
        if let Some(u) = update {
            visit_stmt(u, f);
        }
    }
}

/// Blocks directly owned by a statement, in source order.
pub fn child_blocks(s: &Stmt) -> Vec<&Block> {
    match &s.kind {
        StmtKind::If {
            then_block,
            else_block,
            ..
        } => {
            let mut v = vec![then_block];
            if let Some(b) = else_block {
                v.push(b);
            }
            v
        }
        StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
        StmtKind::Switch { cases, default, .. } => {
            let mut v: Vec<&Block> = cases.iter().map(|c| &c.body).collect();
            if let Some(b) = default {
                v.push(b);
            }
            v
        }
        StmtKind::Block(b) => vec![b],
        _ => Vec::new(),
    }
}

/// Expressions evaluated by the statement itself (not by nested statements).
pub fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match &s.kind {
        StmtKind::Decl { init, .. } => init.iter().collect(),
        StmtKind::Assign { target, value } => {
            let mut v = Vec::new();
            if let LValue::Index(_, i) = target {
                v.push(&**i);
            }
            v.push(value);
            v
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
        StmtKind::For { cond, .. } => cond.iter().collect(),
        StmtKind::Switch { scrutinee, .. } => vec![scrutinee],
        StmtKind::Return(e) => e.iter().collect(),
        StmtKind::Expr(e) => vec![e],
        StmtKind::Break | StmtKind::Block(_) => Vec::new(),
    }
}
