use std::collections::HashMap;

use super::ast::*;
use super::FrontendError;

pub const READ_INT: &str = "read_int";
pub const PRINT_INT: &str = "print_int";

pub fn is_intrinsic(name: &str) -> bool {
    name == READ_INT || name == PRINT_INT
}

/// Enforces declaration-before-use, no shadowing, scalar/array usage,
/// intrinsic arity and `break` placement.
pub fn check_function(f: &Function) -> Result<(), FrontendError> {
    if is_intrinsic(&f.name) {
        return Err(scope_err(format!("'{}' is reserved", f.name), f.span));
    }
    let mut c = Checker {
        func: f,
        scopes: vec![HashMap::new()],
        breakable: 0,
    };
    for p in &f.params {
        c.declare(&p.name, p.ty, p.span)?;
    }
    c.block(&f.body)
}

fn scope_err(message: String, span: SourceSpan) -> FrontendError {
    FrontendError::Scope { message, span }
}

struct Checker<'a> {
    func: &'a Function,
    scopes: Vec<HashMap<String, VarType>>,
    breakable: usize,
}

impl Checker<'_> {
    fn lookup(&self, name: &str) -> Option<VarType> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, ty: VarType, span: SourceSpan) -> Result<(), FrontendError> {
        if is_intrinsic(name) {
            return Err(scope_err(format!("'{name}' is reserved"), span));
        }
        if self.lookup(name).is_some() {
            return Err(scope_err(format!("'{name}' is already declared in an enclosing scope"), span));
        }
        self.scopes.last_mut().expect("scope stack").insert(name.to_string(), ty);
        Ok(())
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, FrontendError>) -> Result<T, FrontendError> {
        self.scopes.push(HashMap::new());
        let r = f(self);
        self.scopes.pop();
        r
    }

    fn block(&mut self, b: &Block) -> Result<(), FrontendError> {
        self.scoped(|c| b.stmts.iter().try_for_each(|s| c.stmt(s)))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        match &s.kind {
            StmtKind::Decl { name, size, init } => {
                if let Some(e) = init {
                    self.scalar(e)?;
                }
                let ty = size.map_or(VarType::Int, VarType::Array);
                self.declare(name, ty, s.span)
            }
            StmtKind::Assign { target, value } => {
                match target {
                    LValue::Var(n) => match self.lookup(n) {
                        Some(VarType::Int) => {}
                        Some(VarType::Array(_)) => {
                            return Err(scope_err(format!("cannot assign to array '{n}'"), s.span))
                        }
                        None => return Err(scope_err(format!("undeclared identifier '{n}'"), s.span)),
                    },
                    LValue::Index(n, i) => {
                        self.array(n, s.span)?;
                        self.scalar(i)?;
                    }
                }
                self.scalar(value)
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.scalar(cond)?;
                self.block(then_block)?;
                if let Some(b) = else_block {
                    self.block(b)?;
                }
                Ok(())
            }
            StmtKind::While { cond, body } => {
                self.scalar(cond)?;
                self.breakable += 1;
                let r = self.block(body);
                self.breakable -= 1;
                r
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => self.scoped(|c| {
                if let Some(i) = init {
                    c.stmt(i)?;
                }
                if let Some(e) = cond {
                    c.scalar(e)?;
                }
                if let Some(u) = update {
                    c.stmt(u)?;
                }
                c.breakable += 1;
                let r = c.block(body);
                c.breakable -= 1;
                r
            }),
            StmtKind::Switch {
                scrutinee,
                cases,
                default,
            } => {
                self.scalar(scrutinee)?;
                self.breakable += 1;
                let r = cases
                    .iter()
                    .map(|c| &c.body)
                    .chain(default.iter())
                    .try_for_each(|b| self.block(b));
                self.breakable -= 1;
                r
            }
            StmtKind::Break => {
                if self.breakable == 0 {
                    Err(scope_err("'break' outside of a loop or switch".into(), s.span))
                } else {
                    Ok(())
                }
            }
            StmtKind::Return(e) => e.iter().try_for_each(|e| self.scalar(e)),
            StmtKind::Expr(e) => self.scalar(e),
            StmtKind::Block(b) => self.block(b),
        }
    }

    fn array(&self, name: &str, span: SourceSpan) -> Result<u32, FrontendError> {
        match self.lookup(name) {
            Some(VarType::Array(n)) => Ok(n),
            Some(VarType::Int) => Err(scope_err(format!("'{name}' is not an array"), span)),
            None => Err(scope_err(format!("undeclared identifier '{name}'"), span)),
        }
    }

    /// Checks an expression evaluated for its integer value.
    fn scalar(&self, e: &Expr) -> Result<(), FrontendError> {
        match &e.kind {
            ExprKind::Int(_) => Ok(()),
            ExprKind::Var(n) => match self.lookup(n) {
                Some(VarType::Int) => Ok(()),
                Some(VarType::Array(_)) => Err(scope_err(format!("array '{n}' used as a scalar"), e.span)),
                None => Err(scope_err(format!("undeclared identifier '{n}'"), e.span)),
            },
            ExprKind::Index(n, i) => {
                self.array(n, e.span)?;
                self.scalar(i)
            }
            ExprKind::Unary(_, o) => self.scalar(o),
            ExprKind::Binary(_, l, r) => {
                self.scalar(l)?;
                self.scalar(r)
            }
            ExprKind::Call(name, args) => self.call(name, args, e.span),
        }
    }

    fn call(&self, name: &str, args: &[Expr], span: SourceSpan) -> Result<(), FrontendError> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(scope_err(
                    format!("'{name}' expects {n} argument(s), got {}", args.len()),
                    span,
                ))
            }
        };
        if name == READ_INT {
            return arity(0);
        }
        if name == PRINT_INT {
            arity(1)?;
            return self.scalar(&args[0]);
        }
        if name == self.func.name {
            arity(self.func.params.len())?;
            for (a, p) in args.iter().zip(&self.func.params) {
                match p.ty {
                    VarType::Int => self.scalar(a)?,
                    VarType::Array(n) => match &a.kind {
                        ExprKind::Var(v) if self.array(v, a.span)? == n => {}
                        _ => {
                            return Err(scope_err(
                                format!("argument for '{}' must be an int[{n}] array", p.name),
                                a.span,
                            ))
                        }
                    },
                }
            }
            return Ok(());
        }
        // External functions are opaque: any arity, scalar arguments.
        args.iter().try_for_each(|a| self.scalar(a))
    }
}
