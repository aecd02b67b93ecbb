//! Semantics-preserving program transformations used as contrastive views.
//!
//! Each operator has a precondition strict enough that the transformed
//! program produces the same [`ExecTrace`](crate::minic::ExecTrace) as the
//! original for every input: same printed values, same termination status.

mod path;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minic::*;
pub use path::{NodePath, Step};
use path::{block_mut, expr_mut, stmt_mut};

/// Transformation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    /// Function renaming.
    FR,
    /// Variable renaming.
    VR,
    /// Operand swap.
    OS,
    /// Statement permutation.
    SP,
    /// Loop exchange.
    LX,
    /// Block swap.
    BS,
    /// Switch to if.
    SI,
}

impl Op {
    pub const ALL: [Op; 7] = [Op::FR, Op::VR, Op::OS, Op::SP, Op::LX, Op::BS, Op::SI];
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// An injection location and the operators whose preconditions hold there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub path: NodePath,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("name '{0}' collides with an existing identifier")]
    Collision(String),
    #[error("operand may have side effects or trap order matters")]
    Purity,
    #[error("statements depend on each other")]
    Dependency,
    #[error("if statement has no else block")]
    NoElse,
    #[error("switch has a case that falls through")]
    Fallthrough,
    #[error("{0:?} does not apply at {1}")]
    NotApplicable(Op, NodePath),
}

pub const DEFAULT_VOCABULARY_SIZE: usize = 10_000;

/// Fresh identifiers `v0..v{n-1}` for renaming.
pub fn default_vocabulary(n: usize) -> Arc<[String]> {
    (0..n).map(|i| format!("v{i}")).collect()
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    pub per_op_probability: f64,
    pub rng_seed: u64,
    pub vocabulary: Arc<[String]>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            per_op_probability: 0.5,
            rng_seed: 0,
            vocabulary: default_vocabulary(DEFAULT_VOCABULARY_SIZE),
        }
    }
}

impl AugmentConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub op: Op,
    pub path: NodePath,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub ast: Function,
    pub applied: Vec<AppliedTransform>,
}

// ---------------------------------------------------------------------------
// Site discovery

/// All injection sites in pre-order: the function itself (FR), parameters,
/// then statements and their expressions in source order.
pub fn find_sites(f: &Function) -> Vec<Site> {
    let mut out = vec![Site {
        path: NodePath::root(),
        ops: vec![Op::FR],
    }];
    for i in 0..f.params.len() {
        out.push(Site {
            path: NodePath(vec![Step::Param(i)]),
            ops: vec![Op::VR],
        });
    }
    let mut path = Vec::new();
    sites_in_block(&f.body, &mut path, &mut out);
    out
}

fn sites_in_block(b: &Block, path: &mut Vec<Step>, out: &mut Vec<Site>) {
    for (i, s) in b.stmts.iter().enumerate() {
        path.push(Step::Stmt(i));
        let mut ops = Vec::new();
        if matches!(s.kind, StmtKind::Decl { .. }) {
            ops.push(Op::VR);
        }
        if let Some(next) = b.stmts.get(i + 1) {
            if check_sp(s, next).is_ok() {
                ops.push(Op::SP);
            }
        }
        match &s.kind {
            StmtKind::For { .. } | StmtKind::While { .. } => ops.push(Op::LX),
            StmtKind::If { else_block: Some(_), .. } => ops.push(Op::BS),
            StmtKind::Switch { .. } if check_si(s).is_ok() => ops.push(Op::SI),
            _ => {}
        }
        if !ops.is_empty() {
            out.push(Site {
                path: NodePath(path.clone()),
                ops,
            });
        }
        sites_in_stmt(s, path, out);
        path.pop();
    }
}

fn sites_in_stmt(s: &Stmt, path: &mut Vec<Step>, out: &mut Vec<Site>) {
    let expr_at = |e: &Expr, step: Step, path: &mut Vec<Step>, out: &mut Vec<Site>| {
        path.push(step);
        sites_in_expr(e, path, out);
        path.pop();
    };
    let block_at = |b: &Block, step: Step, path: &mut Vec<Step>, out: &mut Vec<Site>| {
        path.push(step);
        sites_in_block(b, path, out);
        path.pop();
    };
    match &s.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                expr_at(e, Step::Value, path, out);
            }
        }
        StmtKind::Assign { target, value } => {
            if let LValue::Index(_, i) = target {
                expr_at(i, Step::Index, path, out);
            }
            expr_at(value, Step::Value, path, out);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            expr_at(cond, Step::Cond, path, out);
            block_at(then_block, Step::Then, path, out);
            if let Some(b) = else_block {
                block_at(b, Step::Else, path, out);
            }
        }
        StmtKind::While { cond, body } => {
            expr_at(cond, Step::Cond, path, out);
            block_at(body, Step::Body, path, out);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(i) = init {
                path.push(Step::Init);
                if matches!(i.kind, StmtKind::Decl { .. }) {
                    out.push(Site {
                        path: NodePath(path.clone()),
                        ops: vec![Op::VR],
                    });
                }
                sites_in_stmt(i, path, out);
                path.pop();
            }
            if let Some(c) = cond {
                expr_at(c, Step::Cond, path, out);
            }
            if let Some(u) = update {
                path.push(Step::Update);
                sites_in_stmt(u, path, out);
                path.pop();
            }
            block_at(body, Step::Body, path, out);
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            expr_at(scrutinee, Step::Scrutinee, path, out);
            for (k, c) in cases.iter().enumerate() {
                block_at(&c.body, Step::Case(k), path, out);
            }
            if let Some(d) = default {
                block_at(d, Step::Default, path, out);
            }
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => expr_at(e, Step::Value, path, out),
        StmtKind::Block(b) => sites_in_block(b, path, out),
        StmtKind::Return(None) | StmtKind::Break => {}
    }
}

fn sites_in_expr(e: &Expr, path: &mut Vec<Step>, out: &mut Vec<Site>) {
    match &e.kind {
        ExprKind::Binary(op, l, r) => {
            if check_os(*op, l, r).is_ok() {
                out.push(Site {
                    path: NodePath(path.clone()),
                    ops: vec![Op::OS],
                });
            }
            path.push(Step::Lhs);
            sites_in_expr(l, path, out);
            path.pop();
            path.push(Step::Rhs);
            sites_in_expr(r, path, out);
            path.pop();
        }
        ExprKind::Unary(_, o) => {
            path.push(Step::Operand);
            sites_in_expr(o, path, out);
            path.pop();
        }
        ExprKind::Index(_, i) => {
            path.push(Step::Index);
            sites_in_expr(i, path, out);
            path.pop();
        }
        ExprKind::Call(_, args) => {
            for (k, a) in args.iter().enumerate() {
                path.push(Step::Arg(k));
                sites_in_expr(a, path, out);
                path.pop();
            }
        }
        ExprKind::Int(_) | ExprKind::Var(_) => {}
    }
}

// ---------------------------------------------------------------------------
// Preconditions

fn check_os(op: BinOp, l: &Expr, r: &Expr) -> Result<(), TransformError> {
    if !(op.is_comparison() || op.is_logical()) {
        return Err(TransformError::Purity);
    }
    if !l.is_pure() || !r.is_pure() {
        return Err(TransformError::Purity);
    }
    // Short-circuiting may skip a trapping operand; a comparison evaluates
    // both, so only the order of two potential traps matters.
    let order_matters = if op.is_logical() {
        l.may_trap() || r.may_trap()
    } else {
        l.may_trap() && r.may_trap()
    };
    if order_matters {
        Err(TransformError::Purity)
    } else {
        Ok(())
    }
}

fn defs_uses(s: &Stmt) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut defs = BTreeSet::new();
    let mut reads = Vec::new();
    match &s.kind {
        StmtKind::Decl { name, .. } => {
            defs.insert(name.clone());
        }
        StmtKind::Assign { target, .. } => {
            defs.insert(target.name().to_string());
        }
        _ => {}
    }
    for e in stmt_exprs(s) {
        e.reads(&mut reads);
    }
    (defs, reads.into_iter().collect())
}

fn stmt_may_trap(s: &Stmt) -> bool {
    matches!(
        &s.kind,
        StmtKind::Assign {
            target: LValue::Index(..),
            ..
        }
    ) || stmt_exprs(s).iter().any(|e| e.may_trap())
}

fn check_sp(a: &Stmt, b: &Stmt) -> Result<(), TransformError> {
    let simple = |s: &Stmt| !s.is_control_flow() && !matches!(s.kind, StmtKind::Block(_));
    if !simple(a) || !simple(b) {
        return Err(TransformError::Dependency);
    }
    if stmt_exprs(a).iter().chain(stmt_exprs(b).iter()).any(|e| !e.is_pure()) {
        return Err(TransformError::Dependency);
    }
    if stmt_may_trap(a) && stmt_may_trap(b) {
        return Err(TransformError::Dependency);
    }
    let (da, ua) = defs_uses(a);
    let (db, ub) = defs_uses(b);
    let clash = da.iter().any(|d| db.contains(d) || ub.contains(d)) || db.iter().any(|d| ua.contains(d));
    if clash {
        Err(TransformError::Dependency)
    } else {
        Ok(())
    }
}

/// True if a `break` inside `b` would exit the enclosing switch/loop of `b`.
fn has_escaping_break(b: &Block) -> bool {
    b.stmts.iter().any(stmt_has_escaping_break)
}

fn stmt_has_escaping_break(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Break => true,
        StmtKind::If {
            then_block,
            else_block,
            ..
        } => has_escaping_break(then_block) || else_block.as_ref().is_some_and(has_escaping_break),
        StmtKind::Block(b) => has_escaping_break(b),
        _ => false,
    }
}

fn strip_trailing_break(b: &Block) -> Option<Block> {
    match b.stmts.last() {
        Some(Stmt {
            kind: StmtKind::Break, ..
        }) => {
            let mut out = b.clone();
            out.stmts.pop();
            Some(out)
        }
        _ => None,
    }
}

fn check_si(s: &Stmt) -> Result<(), TransformError> {
    let StmtKind::Switch {
        scrutinee,
        cases,
        default,
    } = &s.kind
    else {
        return Err(TransformError::Fallthrough);
    };
    // With no cases the lowered form never evaluates the scrutinee.
    if !scrutinee.is_pure() || (cases.is_empty() && scrutinee.may_trap()) {
        return Err(TransformError::Purity);
    }
    for c in cases {
        match strip_trailing_break(&c.body) {
            Some(rest) if !has_escaping_break(&rest) => {}
            _ => return Err(TransformError::Fallthrough),
        }
    }
    if let Some(d) = default {
        let rest = strip_trailing_break(d).unwrap_or_else(|| d.clone());
        if has_escaping_break(&rest) {
            return Err(TransformError::Fallthrough);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Operators

fn not_applicable(op: Op, path: &[Step]) -> TransformError {
    TransformError::NotApplicable(op, NodePath(path.to_vec()))
}

fn valid_fresh(f: &Function, name: &str) -> Result<(), TransformError> {
    let well_formed = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && Keyword::from_str(name).is_none()
        && !is_intrinsic(name);
    if !well_formed || f.identifiers().contains(name) {
        Err(TransformError::Collision(name.to_string()))
    } else {
        Ok(())
    }
}

/// FR at the root path renames the function (and its recursive calls); VR at
/// a parameter or declaration renames that variable throughout its scope.
pub fn apply_fr_vr(f: &Function, site: &NodePath, fresh_name: &str) -> Result<Function, TransformError> {
    valid_fresh(f, fresh_name)?;
    let mut out = f.clone();
    let steps = site.steps();
    match steps {
        [] => {
            let old = std::mem::replace(&mut out.name, fresh_name.to_string());
            rename_calls_block(&mut out.body, &old, fresh_name);
        }
        [Step::Param(i)] => {
            let p = out.params.get_mut(*i).ok_or_else(|| not_applicable(Op::VR, steps))?;
            let old = std::mem::replace(&mut p.name, fresh_name.to_string());
            rename_var_block(&mut out.body, &old, fresh_name);
        }
        _ => {
            let (parent, last) = site.split_last().expect("non-empty");
            let decl = stmt_mut(&mut out, steps).ok_or_else(|| not_applicable(Op::VR, steps))?;
            let StmtKind::Decl { name, .. } = &mut decl.kind else {
                return Err(not_applicable(Op::VR, steps));
            };
            let old = std::mem::replace(name, fresh_name.to_string());
            match last {
                Step::Stmt(i) => {
                    let b = block_mut(&mut out, parent).ok_or_else(|| not_applicable(Op::VR, steps))?;
                    for s in &mut b.stmts[i + 1..] {
                        rename_var_stmt(s, &old, fresh_name);
                    }
                }
                Step::Init => {
                    let for_stmt = stmt_mut(&mut out, parent).ok_or_else(|| not_applicable(Op::VR, steps))?;
                    if let StmtKind::For {
                        cond, update, body, ..
                    } = &mut for_stmt.kind
                    {
                        if let Some(c) = cond {
                            rename_var_expr(c, &old, fresh_name);
                        }
                        if let Some(u) = update {
                            rename_var_stmt(u, &old, fresh_name);
                        }
                        rename_var_block(body, &old, fresh_name);
                    }
                }
                _ => return Err(not_applicable(Op::VR, steps)),
            }
        }
    }
    Ok(out)
}

fn rename_var_block(b: &mut Block, old: &str, new: &str) {
    for s in &mut b.stmts {
        rename_var_stmt(s, old, new);
    }
}

fn rename_var_stmt(s: &mut Stmt, old: &str, new: &str) {
    let fix = |n: &mut String| {
        if n == old {
            *n = new.to_string();
        }
    };
    match &mut s.kind {
        StmtKind::Decl { name, init, .. } => {
            fix(name);
            if let Some(e) = init {
                rename_var_expr(e, old, new);
            }
        }
        StmtKind::Assign { target, value } => {
            match target {
                LValue::Var(n) => fix(n),
                LValue::Index(n, i) => {
                    fix(n);
                    rename_var_expr(i, old, new);
                }
            }
            rename_var_expr(value, old, new);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            rename_var_expr(cond, old, new);
            rename_var_block(then_block, old, new);
            if let Some(b) = else_block {
                rename_var_block(b, old, new);
            }
        }
        StmtKind::While { cond, body } => {
            rename_var_expr(cond, old, new);
            rename_var_block(body, old, new);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(i) = init {
                rename_var_stmt(i, old, new);
            }
            if let Some(c) = cond {
                rename_var_expr(c, old, new);
            }
            if let Some(u) = update {
                rename_var_stmt(u, old, new);
            }
            rename_var_block(body, old, new);
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            rename_var_expr(scrutinee, old, new);
            for c in cases {
                rename_var_block(&mut c.body, old, new);
            }
            if let Some(d) = default {
                rename_var_block(d, old, new);
            }
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => rename_var_expr(e, old, new),
        StmtKind::Block(b) => rename_var_block(b, old, new),
        StmtKind::Return(None) | StmtKind::Break => {}
    }
}

fn rename_var_expr(e: &mut Expr, old: &str, new: &str) {
    match &mut e.kind {
        ExprKind::Var(n) => {
            if n == old {
                *n = new.to_string();
            }
        }
        ExprKind::Index(n, i) => {
            if n == old {
                *n = new.to_string();
            }
            rename_var_expr(i, old, new);
        }
        ExprKind::Call(_, args) => args.iter_mut().for_each(|a| rename_var_expr(a, old, new)),
        ExprKind::Unary(_, o) => rename_var_expr(o, old, new),
        ExprKind::Binary(_, l, r) => {
            rename_var_expr(l, old, new);
            rename_var_expr(r, old, new);
        }
        ExprKind::Int(_) => {}
    }
}

fn rename_calls_block(b: &mut Block, old: &str, new: &str) {
    for s in &mut b.stmts {
        rename_calls_stmt(s, old, new);
    }
}

fn rename_calls_stmt(s: &mut Stmt, old: &str, new: &str) {
    match &mut s.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                rename_calls_expr(e, old, new);
            }
        }
        StmtKind::Assign { target, value } => {
            if let LValue::Index(_, i) = target {
                rename_calls_expr(i, old, new);
            }
            rename_calls_expr(value, old, new);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            rename_calls_expr(cond, old, new);
            rename_calls_block(then_block, old, new);
            if let Some(b) = else_block {
                rename_calls_block(b, old, new);
            }
        }
        StmtKind::While { cond, body } => {
            rename_calls_expr(cond, old, new);
            rename_calls_block(body, old, new);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(i) = init {
                rename_calls_stmt(i, old, new);
            }
            if let Some(c) = cond {
                rename_calls_expr(c, old, new);
            }
            if let Some(u) = update {
                rename_calls_stmt(u, old, new);
            }
            rename_calls_block(body, old, new);
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            rename_calls_expr(scrutinee, old, new);
            for c in cases {
                rename_calls_block(&mut c.body, old, new);
            }
            if let Some(d) = default {
                rename_calls_block(d, old, new);
            }
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => rename_calls_expr(e, old, new),
        StmtKind::Block(b) => rename_calls_block(b, old, new),
        StmtKind::Return(None) | StmtKind::Break => {}
    }
}

fn rename_calls_expr(e: &mut Expr, old: &str, new: &str) {
    match &mut e.kind {
        ExprKind::Call(n, args) => {
            if n == old {
                *n = new.to_string();
            }
            args.iter_mut().for_each(|a| rename_calls_expr(a, old, new));
        }
        ExprKind::Index(_, i) => rename_calls_expr(i, old, new),
        ExprKind::Unary(_, o) => rename_calls_expr(o, old, new),
        ExprKind::Binary(_, l, r) => {
            rename_calls_expr(l, old, new);
            rename_calls_expr(r, old, new);
        }
        ExprKind::Int(_) | ExprKind::Var(_) => {}
    }
}

/// `a < b` becomes `b > a`; symmetric operators keep their symbol.
pub fn apply_os(f: &Function, site: &NodePath) -> Result<Function, TransformError> {
    let mut out = f.clone();
    let e = expr_mut(&mut out, site.steps()).ok_or_else(|| not_applicable(Op::OS, site.steps()))?;
    let ExprKind::Binary(op, l, r) = &mut e.kind else {
        return Err(not_applicable(Op::OS, site.steps()));
    };
    check_os(*op, l, r)?;
    std::mem::swap(l, r);
    *op = op.mirrored();
    Ok(out)
}

/// Exchanges the statement at `site` with its successor in the same block.
pub fn apply_sp(f: &Function, site: &NodePath) -> Result<Function, TransformError> {
    let mut out = f.clone();
    let Some((parent, Step::Stmt(i))) = site.split_last() else {
        return Err(not_applicable(Op::SP, site.steps()));
    };
    let b = block_mut(&mut out, parent).ok_or_else(|| not_applicable(Op::SP, site.steps()))?;
    if i + 1 >= b.stmts.len() {
        return Err(not_applicable(Op::SP, site.steps()));
    }
    check_sp(&b.stmts[i], &b.stmts[i + 1])?;
    b.stmts.swap(i, i + 1);
    Ok(out)
}

/// `for (init; c; u) { B }` becomes `{ init; while (c) { B u; } }`, and
/// `while (c) { B }` becomes `for (; c;) { B }`.
pub fn apply_lx(f: &Function, site: &NodePath) -> Result<Function, TransformError> {
    let mut out = f.clone();
    let s = stmt_mut(&mut out, site.steps()).ok_or_else(|| not_applicable(Op::LX, site.steps()))?;
    let kind = std::mem::replace(&mut s.kind, StmtKind::Break);
    s.kind = match kind {
        StmtKind::For {
            init,
            cond,
            update,
            mut body,
        } => {
            if let Some(u) = update {
                body.stmts.push(*u);
            }
            let w = Stmt::new(StmtKind::While {
                cond: cond.unwrap_or_else(|| Expr::int(1)),
                body,
            });
            match init {
                Some(i) => StmtKind::Block(Block::new(vec![*i, w])),
                None => w.kind,
            }
        }
        StmtKind::While { cond, body } => StmtKind::For {
            init: None,
            cond: Some(cond),
            update: None,
            body,
        },
        other => {
            s.kind = other;
            return Err(not_applicable(Op::LX, site.steps()));
        }
    };
    Ok(out)
}

/// Negates the condition and exchanges the branches of an if/else.
pub fn apply_bs(f: &Function, site: &NodePath) -> Result<Function, TransformError> {
    let mut out = f.clone();
    let s = stmt_mut(&mut out, site.steps()).ok_or_else(|| not_applicable(Op::BS, site.steps()))?;
    let StmtKind::If {
        cond,
        then_block,
        else_block,
    } = &mut s.kind
    else {
        return Err(not_applicable(Op::BS, site.steps()));
    };
    let Some(else_block) = else_block else {
        return Err(TransformError::NoElse);
    };
    std::mem::swap(then_block, else_block);
    let old = std::mem::replace(cond, Expr::int(0));
    *cond = match old.kind {
        ExprKind::Binary(op, l, r) if op.negated().is_some() => {
            Expr::new(ExprKind::Binary(op.negated().unwrap(), l, r))
        }
        _ => Expr::unary(UnOp::Not, old),
    };
    Ok(out)
}

/// Lowers a fallthrough-free switch into an if / else-if chain.
pub fn apply_si(f: &Function, site: &NodePath) -> Result<Function, TransformError> {
    let mut out = f.clone();
    let s = stmt_mut(&mut out, site.steps()).ok_or_else(|| not_applicable(Op::SI, site.steps()))?;
    if !matches!(s.kind, StmtKind::Switch { .. }) {
        return Err(not_applicable(Op::SI, site.steps()));
    }
    check_si(s)?;
    let StmtKind::Switch {
        scrutinee,
        cases,
        default,
    } = std::mem::replace(&mut s.kind, StmtKind::Break)
    else {
        unreachable!()
    };
    let mut tail: Option<Block> = default.map(|d| strip_trailing_break(&d).unwrap_or(d));
    if cases.is_empty() {
        s.kind = StmtKind::Block(tail.unwrap_or_default());
        return Ok(out);
    }
    for c in cases.into_iter().rev() {
        let lit = if c.value < 0 {
            Expr::unary(UnOp::Neg, Expr::int(c.value.unsigned_abs() as i64))
        } else {
            Expr::int(c.value)
        };
        let branch = Stmt::new(StmtKind::If {
            cond: Expr::binary(BinOp::Eq, scrutinee.clone(), lit),
            then_block: strip_trailing_break(&c.body).expect("checked"),
            else_block: tail,
        });
        tail = Some(Block::new(vec![branch]));
    }
    let mut chain = tail.expect("at least one case");
    s.kind = chain.stmts.pop().expect("chain head").kind;
    Ok(out)
}

/// Applies `op` at `site`, drawing a fresh name for FR/VR.
pub fn apply(f: &Function, site: &NodePath, op: Op, fresh_name: Option<&str>) -> Result<Function, TransformError> {
    match op {
        Op::FR | Op::VR => {
            let name = fresh_name.ok_or(TransformError::Collision(String::new()))?;
            let is_root = site.steps().is_empty();
            if is_root != (op == Op::FR) {
                return Err(not_applicable(op, site.steps()));
            }
            apply_fr_vr(f, site, name)
        }
        Op::OS => apply_os(f, site),
        Op::SP => apply_sp(f, site),
        Op::LX => apply_lx(f, site),
        Op::BS => apply_bs(f, site),
        Op::SI => apply_si(f, site),
    }
}

// ---------------------------------------------------------------------------
// Randomized augmentation

/// Walks the sites in order; at each, with probability `per_op_probability`
/// applies one uniformly chosen applicable operator. Sites are recomputed
/// after every rewrite and the walk continues at the next position.
pub fn augment(f: &Function, config: &AugmentConfig) -> Augmented {
    let p = config.per_op_probability.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut ast = f.clone();
    let mut applied = Vec::new();
    let mut sites = find_sites(&ast);
    let cap = 4 * sites.len() + 8;
    let mut k = 0;
    while k < sites.len() && k < cap {
        let site = sites[k].clone();
        k += 1;
        if !rng.gen_bool(p) {
            continue;
        }
        let op = *site.ops.choose(&mut rng).expect("sites carry at least one op");
        let fresh = if matches!(op, Op::FR | Op::VR) {
            match pick_fresh(&ast, &config.vocabulary, &mut rng) {
                Some(n) => Some(n),
                None => continue,
            }
        } else {
            None
        };
        if let Ok(next) = apply(&ast, &site.path, op, fresh.as_deref()) {
            ast = next;
            applied.push(AppliedTransform { op, path: site.path });
            sites = find_sites(&ast);
        }
    }
    Augmented { ast, applied }
}

fn pick_fresh(f: &Function, vocabulary: &[String], rng: &mut impl Rng) -> Option<String> {
    if vocabulary.is_empty() {
        return None;
    }
    let taken = f.identifiers();
    (0..64)
        .map(|_| &vocabulary[rng.gen_range(0..vocabulary.len())])
        .find(|n| !taken.contains(*n))
        .cloned()
}

#[cfg(test)]
mod tests;
