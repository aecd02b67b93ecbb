use std::fmt;

use serde::{Deserialize, Serialize};

use crate::minic::*;

/// One edge of a path from the function root to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Param(usize),
    Stmt(usize),
    Then,
    Else,
    Body,
    Case(usize),
    Default,
    Init,
    Update,
    Cond,
    Scrutinee,
    Value,
    Index,
    Lhs,
    Rhs,
    Operand,
    Arg(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodePath(pub Vec<Step>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn split_last(&self) -> Option<(&[Step], Step)> {
        self.0.split_last().map(|(l, rest)| (rest, *l))
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match s {
                Step::Param(k) => write!(f, "param{k}")?,
                Step::Stmt(k) => write!(f, "{k}")?,
                Step::Case(k) => write!(f, "case{k}")?,
                Step::Arg(k) => write!(f, "arg{k}")?,
                other => write!(f, "{}", format!("{other:?}").to_lowercase())?,
            }
        }
        Ok(())
    }
}

pub(crate) enum Slot<'a> {
    Block(&'a mut Block),
    Stmt(&'a mut Stmt),
    Expr(&'a mut Expr),
}

fn descend(slot: Slot<'_>, step: Step) -> Option<Slot<'_>> {
    match slot {
        Slot::Block(b) => match step {
            Step::Stmt(i) => b.stmts.get_mut(i).map(Slot::Stmt),
            _ => None,
        },
        Slot::Stmt(s) => match (&mut s.kind, step) {
            (StmtKind::Block(b), Step::Stmt(i)) => b.stmts.get_mut(i).map(Slot::Stmt),
            (StmtKind::If { then_block, .. }, Step::Then) => Some(Slot::Block(then_block)),
            (StmtKind::If { else_block: Some(b), .. }, Step::Else) => Some(Slot::Block(b)),
            (StmtKind::If { cond, .. } | StmtKind::While { cond, .. }, Step::Cond) => Some(Slot::Expr(cond)),
            (StmtKind::While { body, .. } | StmtKind::For { body, .. }, Step::Body) => Some(Slot::Block(body)),
            (StmtKind::For { init: Some(i), .. }, Step::Init) => Some(Slot::Stmt(i)),
            (StmtKind::For { update: Some(u), .. }, Step::Update) => Some(Slot::Stmt(u)),
            (StmtKind::For { cond: Some(c), .. }, Step::Cond) => Some(Slot::Expr(c)),
            (StmtKind::Switch { scrutinee, .. }, Step::Scrutinee) => Some(Slot::Expr(scrutinee)),
            (StmtKind::Switch { cases, .. }, Step::Case(k)) => cases.get_mut(k).map(|c| Slot::Block(&mut c.body)),
            (StmtKind::Switch { default: Some(d), .. }, Step::Default) => Some(Slot::Block(d)),
            (
                StmtKind::Decl { init: Some(e), .. }
                | StmtKind::Assign { value: e, .. }
                | StmtKind::Return(Some(e))
                | StmtKind::Expr(e),
                Step::Value,
            ) => Some(Slot::Expr(e)),
            (StmtKind::Assign { target: LValue::Index(_, i), .. }, Step::Index) => Some(Slot::Expr(i)),
            _ => None,
        },
        Slot::Expr(e) => match (&mut e.kind, step) {
            (ExprKind::Binary(_, l, _), Step::Lhs) => Some(Slot::Expr(l)),
            (ExprKind::Binary(_, _, r), Step::Rhs) => Some(Slot::Expr(r)),
            (ExprKind::Unary(_, o), Step::Operand) => Some(Slot::Expr(o)),
            (ExprKind::Index(_, i), Step::Index) => Some(Slot::Expr(i)),
            (ExprKind::Call(_, args), Step::Arg(k)) => args.get_mut(k).map(Slot::Expr),
            _ => None,
        },
    }
}

pub(crate) fn slot_mut<'a>(f: &'a mut Function, path: &[Step]) -> Option<Slot<'a>> {
    let mut slot = Slot::Block(&mut f.body);
    for step in path {
        slot = descend(slot, *step)?;
    }
    Some(slot)
}

pub(crate) fn stmt_mut<'a>(f: &'a mut Function, path: &[Step]) -> Option<&'a mut Stmt> {
    if path.is_empty() {
        return None;
    }
    match slot_mut(f, path)? {
        Slot::Stmt(s) => Some(s),
        _ => None,
    }
}

pub(crate) fn expr_mut<'a>(f: &'a mut Function, path: &[Step]) -> Option<&'a mut Expr> {
    match slot_mut(f, path)? {
        Slot::Expr(e) => Some(e),
        _ => None,
    }
}

/// The statement list addressed by `path` (the function body for the empty path).
pub(crate) fn block_mut<'a>(f: &'a mut Function, path: &[Step]) -> Option<&'a mut Block> {
    match slot_mut(f, path)? {
        Slot::Block(b) => Some(b),
        Slot::Stmt(Stmt {
            kind: StmtKind::Block(b),
            ..
        }) => Some(b),
        _ => None,
    }
}
