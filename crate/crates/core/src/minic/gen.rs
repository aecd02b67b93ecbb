//! Seeded random MiniC programs for property tests and benchmarks.
//!
//! Generated functions always pass the scope checker and always terminate:
//! loop counters are never assigned inside their loop body and loop bounds are
//! small literals. They may trap (out-of-bounds, division by zero) depending
//! on the inputs.

use rand::Rng;

use super::ast::*;
use super::check::{PRINT_INT, READ_INT};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: usize,
    pub max_block_len: usize,
    pub max_expr_depth: usize,
    pub max_loop_bound: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_block_len: 5,
            max_expr_depth: 3,
            max_loop_bound: 4,
        }
    }
}

/// A random terminating, scope-correct function named `f`.
pub fn random_function<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Function {
    let mut g = Gen {
        rng,
        cfg,
        scopes: vec![Vec::new()],
        locked: Vec::new(),
        fresh: 0,
        loop_depth: 0,
        switch_depth: 0,
    };
    g.function()
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    cfg: &'a GenConfig,
    /// Visible names with their types, innermost scope last.
    scopes: Vec<Vec<(String, VarType)>>,
    /// Loop counters that the current loop body must not assign.
    locked: Vec<String>,
    fresh: usize,
    loop_depth: usize,
    switch_depth: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn declare(&mut self, name: &str, ty: VarType) {
        self.scopes.last_mut().unwrap().push((name.to_string(), ty));
    }

    fn scalars(&self) -> Vec<String> {
        self.scopes
            .iter()
            .flatten()
            .filter(|(_, t)| *t == VarType::Int)
            .map(|(n, _)| n.clone())
            .collect()
    }

    fn assignable(&self) -> Vec<String> {
        self.scalars()
            .into_iter()
            .filter(|n| !self.locked.contains(n))
            .collect()
    }

    fn arrays(&self) -> Vec<(String, u32)> {
        self.scopes
            .iter()
            .flatten()
            .filter_map(|(n, t)| match t {
                VarType::Array(k) => Some((n.clone(), *k)),
                VarType::Int => None,
            })
            .collect()
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> Option<T> {
        if items.is_empty() {
            None
        } else {
            Some(items[self.rng.gen_range(0..items.len())].clone())
        }
    }

    fn function(&mut self) -> Function {
        let mut params = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            let n = self.name("p");
            self.declare(&n, VarType::Int);
            params.push(Param {
                name: n,
                ty: VarType::Int,
                span: SourceSpan::default(),
            });
        }
        if self.rng.gen_bool(0.2) {
            let n = self.name("pa");
            let size = self.rng.gen_range(2..=4);
            self.declare(&n, VarType::Array(size));
            params.push(Param {
                name: n,
                ty: VarType::Array(size),
                span: SourceSpan::default(),
            });
        }
        let mut stmts = Vec::new();
        for _ in 0..self.rng.gen_range(1..=3) {
            let n = self.name("x");
            let init = if self.rng.gen_bool(0.5) {
                call(READ_INT, vec![])
            } else {
                Expr::int(self.rng.gen_range(0..10))
            };
            self.declare(&n, VarType::Int);
            stmts.push(decl(&n, None, Some(init)));
        }
        if self.rng.gen_bool(0.8) {
            let n = self.name("a");
            let size = self.rng.gen_range(2..=6);
            self.declare(&n, VarType::Array(size));
            stmts.push(decl(&n, Some(size), None));
        }
        let len = self.rng.gen_range(2..=self.cfg.max_block_len + 1);
        for _ in 0..len {
            stmts.extend(self.stmt(0));
        }
        if self.rng.gen_bool(0.7) {
            let e = self.expr(1);
            stmts.push(Stmt::new(StmtKind::Return(Some(e))));
        }
        Function {
            ret: RetType::Int,
            name: "f".into(),
            params,
            body: Block::new(stmts),
            span: SourceSpan::default(),
        }
    }

    fn block(&mut self, depth: usize) -> Block {
        self.scopes.push(Vec::new());
        let len = self.rng.gen_range(0..=self.cfg.max_block_len.min(3));
        let mut stmts = Vec::new();
        for _ in 0..len {
            stmts.extend(self.stmt(depth));
        }
        self.scopes.pop();
        Block::new(stmts)
    }

    /// One source-level statement; a `while` comes with its counter declaration.
    fn stmt(&mut self, depth: usize) -> Vec<Stmt> {
        let compound = depth < self.cfg.max_depth;
        let choice = self.rng.gen_range(0..if compound { 14 } else { 7 });
        match choice {
            0 | 1 => {
                let n = self.name("t");
                let init = self.expr(0);
                self.declare(&n, VarType::Int);
                vec![decl(&n, None, Some(init))]
            }
            2 | 3 => match self.pick(&self.assignable()) {
                Some(n) => {
                    let v = self.expr(0);
                    vec![assign(LValue::Var(n), v)]
                }
                None => vec![print(Expr::int(1))],
            },
            4 => match self.pick(&self.arrays()) {
                Some((n, size)) => {
                    let idx = self.index(size);
                    let v = self.expr(0);
                    vec![assign(LValue::Index(n, Box::new(idx)), v)]
                }
                None => vec![print(Expr::int(2))],
            },
            5 => {
                let e = self.expr(0);
                vec![print(e)]
            }
            6 => {
                if (self.loop_depth > 0 || self.switch_depth > 0) && self.rng.gen_bool(0.5) {
                    let c = self.cond();
                    vec![Stmt::new(StmtKind::If {
                        cond: c,
                        then_block: Block::new(vec![Stmt::new(StmtKind::Break)]),
                        else_block: None,
                    })]
                } else if self.rng.gen_bool(0.3) {
                    let c = self.cond();
                    let e = self.expr(1);
                    vec![Stmt::new(StmtKind::If {
                        cond: c,
                        then_block: Block::new(vec![Stmt::new(StmtKind::Return(Some(e)))]),
                        else_block: None,
                    })]
                } else {
                    vec![Stmt::new(StmtKind::Expr(call(READ_INT, vec![])))]
                }
            }
            7..=9 => {
                let cond = self.cond();
                let then_block = self.block(depth + 1);
                let else_block = if self.rng.gen_bool(0.6) {
                    Some(self.block(depth + 1))
                } else {
                    None
                };
                vec![Stmt::new(StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                })]
            }
            10 => vec![self.for_loop(depth)],
            11 => self.while_loop(depth),
            12 => vec![self.switch(depth)],
            _ => vec![Stmt::new(StmtKind::Block(self.block(depth + 1)))],
        }
    }

    fn for_loop(&mut self, depth: usize) -> Stmt {
        self.scopes.push(Vec::new());
        let i = self.name("i");
        self.declare(&i, VarType::Int);
        let bound = self.rng.gen_range(0..=self.cfg.max_loop_bound);
        let init = Stmt::new(StmtKind::Decl {
            name: i.clone(),
            size: None,
            init: Some(Expr::int(0)),
        });
        let cond = Expr::binary(BinOp::Lt, Expr::var(&i), Expr::int(bound));
        let update = assign(
            LValue::Var(i.clone()),
            Expr::binary(BinOp::Add, Expr::var(&i), Expr::int(1)),
        );
        self.locked.push(i.clone());
        self.loop_depth += 1;
        let body = self.block(depth + 1);
        self.loop_depth -= 1;
        self.locked.pop();
        self.scopes.pop();
        Stmt::new(StmtKind::For {
            init: Some(Box::new(init)),
            cond: Some(cond),
            update: Some(Box::new(update)),
            body,
        })
    }

    fn while_loop(&mut self, depth: usize) -> Vec<Stmt> {
        let k = self.name("k");
        let bound = self.rng.gen_range(0..=self.cfg.max_loop_bound);
        let d = decl(&k, None, Some(Expr::int(bound)));
        self.declare(&k, VarType::Int);
        self.locked.push(k.clone());
        self.loop_depth += 1;
        let mut body = self.block(depth + 1);
        self.loop_depth -= 1;
        self.locked.pop();
        body.stmts.push(assign(
            LValue::Var(k.clone()),
            Expr::binary(BinOp::Sub, Expr::var(&k), Expr::int(1)),
        ));
        let cond = Expr::binary(BinOp::Gt, Expr::var(&k), Expr::int(0));
        vec![d, Stmt::new(StmtKind::While { cond, body })]
    }

    fn switch(&mut self, depth: usize) -> Stmt {
        let scrutinee = match self.pick(&self.scalars()) {
            Some(v) if self.rng.gen_bool(0.7) => {
                Expr::binary(BinOp::Rem, Expr::var(v), Expr::int(3))
            }
            _ => self.expr(1),
        };
        let n_cases = self.rng.gen_range(0..=3);
        let mut values: Vec<i64> = (-2..4).collect();
        let mut cases = Vec::new();
        self.switch_depth += 1;
        for _ in 0..n_cases {
            let k = self.rng.gen_range(0..values.len());
            let value = values.remove(k);
            let mut body = self.block(depth + 1);
            if self.rng.gen_bool(0.85) {
                body.stmts.push(Stmt::new(StmtKind::Break));
            }
            cases.push(Case { value, body });
        }
        let default = if self.rng.gen_bool(0.6) || cases.is_empty() {
            Some(self.block(depth + 1))
        } else {
            None
        };
        self.switch_depth -= 1;
        Stmt::new(StmtKind::Switch {
            scrutinee,
            cases,
            default,
        })
    }

    fn index(&mut self, size: u32) -> Expr {
        let r: f64 = self.rng.gen();
        if r < 0.6 {
            Expr::int(self.rng.gen_range(0..size as i64))
        } else if r < 0.9 {
            match self.pick(&self.scalars()) {
                Some(v) => Expr::binary(BinOp::Rem, Expr::var(v), Expr::int(size as i64)),
                None => Expr::int(0),
            }
        } else {
            self.expr(1)
        }
    }

    fn cond(&mut self) -> Expr {
        let ops = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
        let op = ops[self.rng.gen_range(0..ops.len())];
        let c = Expr::binary(op, self.expr(1), self.expr(1));
        if self.rng.gen_bool(0.25) {
            let op2 = ops[self.rng.gen_range(0..ops.len())];
            let d = Expr::binary(op2, self.expr(2), self.expr(2));
            let join = if self.rng.gen_bool(0.5) { BinOp::And } else { BinOp::Or };
            Expr::binary(join, c, d)
        } else {
            c
        }
    }

    fn leaf(&mut self) -> Expr {
        match self.rng.gen_range(0..10) {
            0..=3 => Expr::int(self.rng.gen_range(0..10)),
            4..=7 => match self.pick(&self.scalars()) {
                Some(v) => Expr::var(v),
                None => Expr::int(3),
            },
            8 => match self.pick(&self.arrays()) {
                Some((a, size)) => {
                    let idx = if self.rng.gen_bool(0.7) {
                        Expr::int(self.rng.gen_range(0..size as i64))
                    } else {
                        match self.pick(&self.scalars()) {
                            Some(v) => Expr::binary(BinOp::Rem, Expr::var(v), Expr::int(size as i64)),
                            None => Expr::int(0),
                        }
                    };
                    Expr::new(ExprKind::Index(a, Box::new(idx)))
                }
                None => Expr::int(4),
            },
            _ => call(READ_INT, vec![]),
        }
    }

    fn expr(&mut self, level: usize) -> Expr {
        if level >= self.cfg.max_expr_depth || self.rng.gen_bool(0.4) {
            return self.leaf();
        }
        match self.rng.gen_range(0..12) {
            0 => Expr::unary(UnOp::Neg, self.expr(level + 1)),
            1 => Expr::unary(UnOp::Not, self.expr(level + 1)),
            k => {
                let ops = [
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Mul,
                    BinOp::Div,
                    BinOp::Rem,
                    BinOp::Lt,
                    BinOp::Le,
                    BinOp::Gt,
                    BinOp::Ge,
                    BinOp::Eq,
                    BinOp::Ne,
                    BinOp::And,
                    BinOp::Or,
                ];
                let op = ops[(k as usize * 7 + self.rng.gen_range(0..ops.len())) % ops.len()];
                let lhs = self.expr(level + 1);
                let rhs = if matches!(op, BinOp::Div | BinOp::Rem) && self.rng.gen_bool(0.7) {
                    Expr::int(self.rng.gen_range(1..6))
                } else {
                    self.expr(level + 1)
                };
                Expr::binary(op, lhs, rhs)
            }
        }
    }
}

fn call(name: &str, args: Vec<Expr>) -> Expr {
    Expr::new(ExprKind::Call(name.to_string(), args))
}

fn decl(name: &str, size: Option<u32>, init: Option<Expr>) -> Stmt {
    Stmt::new(StmtKind::Decl {
        name: name.to_string(),
        size,
        init,
    })
}

fn assign(target: LValue, value: Expr) -> Stmt {
    Stmt::new(StmtKind::Assign { target, value })
}

fn print(e: Expr) -> Stmt {
    Stmt::new(StmtKind::Expr(call(PRINT_INT, vec![e])))
}
