use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::check::{PRINT_INT, READ_INT};

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;

/// Recursion deeper than this is reported as step-limit exhaustion.
const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    OutOfBounds,
    DivByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecStatus {
    Normal,
    Trap(TrapKind),
    StepLimitExceeded,
}

/// Observable behaviour of one run: what was printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub outputs: Vec<i64>,
    pub status: ExecStatus,
}

/// Runs the function with its parameters bound from `inputs` (scalars take one
/// value each, arrays are filled element-wise), then serves `read_int()` from
/// the remaining inputs (0 once exhausted).
///
/// Arithmetic wraps on overflow. Calls to functions other than the intrinsics
/// and the function itself evaluate their arguments and return 0.
pub fn interpret(f: &Function, inputs: &[i64], step_limit: u64) -> ExecTrace {
    let mut m = Machine {
        func: f,
        inputs,
        next_input: 0,
        outputs: Vec::new(),
        steps: 0,
        step_limit,
        depth: 0,
    };
    let mut frame = Frame::default();
    for p in &f.params {
        let v = match p.ty {
            VarType::Int => Value::Int(m.read()),
            VarType::Array(n) => {
                let data = (0..n).map(|_| m.read()).collect();
                Value::Array(Rc::new(RefCell::new(data)))
            }
        };
        frame.declare(&p.name, v);
    }
    let status = match m.call_body(&mut frame) {
        Ok(_) => ExecStatus::Normal,
        Err(Halt::Trap(t)) => ExecStatus::Trap(t),
        Err(Halt::StepLimit) => ExecStatus::StepLimitExceeded,
    };
    ExecTrace {
        outputs: m.outputs,
        status,
    }
}

#[derive(Debug, Clone)]
enum Value {
    Int(i64),
    Array(Rc<RefCell<Vec<i64>>>),
}

#[derive(Debug)]
enum Halt {
    Trap(TrapKind),
    StepLimit,
}

enum Flow {
    Normal,
    Break,
    Return(i64),
}

#[derive(Default)]
struct Frame {
    scopes: Vec<HashMap<String, Value>>,
}

impl Frame {
    fn declare(&mut self, name: &str, v: Value) {
        if self.scopes.is_empty() {
            self.scopes.push(HashMap::new());
        }
        self.scopes.last_mut().unwrap().insert(name.to_string(), v);
    }

    fn get(&self, name: &str) -> &Value {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .unwrap_or_else(|| panic!("unbound '{name}' in a checked program"))
    }

    fn get_mut(&mut self, name: &str) -> &mut Value {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|s| s.get_mut(name))
            .unwrap_or_else(|| panic!("unbound '{name}' in a checked program"))
    }
}

struct Machine<'a> {
    func: &'a Function,
    inputs: &'a [i64],
    next_input: usize,
    outputs: Vec<i64>,
    steps: u64,
    step_limit: u64,
    depth: usize,
}

impl Machine<'_> {
    fn read(&mut self) -> i64 {
        let v = self.inputs.get(self.next_input).copied().unwrap_or(0);
        self.next_input += 1;
        v
    }

    fn tick(&mut self) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > self.step_limit {
            Err(Halt::StepLimit)
        } else {
            Ok(())
        }
    }

    fn call_body(&mut self, frame: &mut Frame) -> Result<i64, Halt> {
        let func = self.func;
        match self.block(&func.body, frame)? {
            Flow::Return(v) => Ok(v),
            _ => Ok(0),
        }
    }

    fn block(&mut self, b: &Block, frame: &mut Frame) -> Result<Flow, Halt> {
        frame.scopes.push(HashMap::new());
        let r = self.stmts(&b.stmts, frame);
        frame.scopes.pop();
        r
    }

    fn stmts(&mut self, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Halt> {
        for s in stmts {
            match self.stmt(s, frame)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame) -> Result<Flow, Halt> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl { name, size, init } => {
                let v = match (size, init) {
                    (Some(n), _) => Value::Array(Rc::new(RefCell::new(vec![0; *n as usize]))),
                    (None, Some(e)) => Value::Int(self.eval(e, frame)?),
                    (None, None) => Value::Int(0),
                };
                frame.declare(name, v);
            }
            StmtKind::Assign { target, value } => match target {
                LValue::Var(n) => {
                    let v = self.eval(value, frame)?;
                    *frame.get_mut(n) = Value::Int(v);
                }
                LValue::Index(n, i) => {
                    let idx = self.eval(i, frame)?;
                    let v = self.eval(value, frame)?;
                    let arr = self.array(n, frame);
                    let mut arr = arr.borrow_mut();
                    let slot = usize::try_from(idx)
                        .ok()
                        .and_then(|k| arr.get_mut(k))
                        .ok_or(Halt::Trap(TrapKind::OutOfBounds))?;
                    *slot = v;
                }
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.eval(cond, frame)? != 0 {
                    return self.block(then_block, frame);
                } else if let Some(b) = else_block {
                    return self.block(b, frame);
                }
            }
            StmtKind::While { cond, body } => loop {
                self.tick()?;
                if self.eval(cond, frame)? == 0 {
                    break;
                }
                match self.block(body, frame)? {
                    Flow::Break => break,
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    Flow::Normal => {}
                }
            },
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                frame.scopes.push(HashMap::new());
                let r = self.for_loop(init.as_deref(), cond.as_ref(), update.as_deref(), body, frame);
                frame.scopes.pop();
                return r;
            }
            StmtKind::Switch {
                scrutinee,
                cases,
                default,
            } => {
                let v = self.eval(scrutinee, frame)?;
                let start = cases
                    .iter()
                    .position(|c| c.value == v)
                    .or_else(|| default.as_ref().map(|_| cases.len()));
                if let Some(start) = start {
                    let bodies = cases[start..].iter().map(|c| &c.body).chain(default.iter());
                    for b in bodies {
                        match self.block(b, frame)? {
                            Flow::Normal => {}
                            Flow::Break => break,
                            ret @ Flow::Return(_) => return Ok(ret),
                        }
                    }
                }
            }
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, frame)?,
                    None => 0,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
            }
            StmtKind::Block(b) => return self.block(b, frame),
        }
        Ok(Flow::Normal)
    }

    fn for_loop(
        &mut self,
        init: Option<&Stmt>,
        cond: Option<&Expr>,
        update: Option<&Stmt>,
        body: &Block,
        frame: &mut Frame,
    ) -> Result<Flow, Halt> {
        if let Some(i) = init {
            self.stmt(i, frame)?;
        }
        loop {
            self.tick()?;
            if let Some(c) = cond {
                if self.eval(c, frame)? == 0 {
                    break;
                }
            }
            match self.block(body, frame)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                Flow::Normal => {}
            }
            if let Some(u) = update {
                self.stmt(u, frame)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn array(&self, name: &str, frame: &Frame) -> Rc<RefCell<Vec<i64>>> {
        match frame.get(name) {
            Value::Array(a) => a.clone(),
            Value::Int(_) => panic!("'{name}' is not an array in a checked program"),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<i64, Halt> {
        Ok(match &e.kind {
            ExprKind::Int(v) => *v,
            ExprKind::Var(n) => match frame.get(n) {
                Value::Int(v) => *v,
                Value::Array(_) => panic!("array '{n}' used as scalar in a checked program"),
            },
            ExprKind::Index(n, i) => {
                let idx = self.eval(i, frame)?;
                let arr = self.array(n, frame);
                let arr = arr.borrow();
                usize::try_from(idx)
                    .ok()
                    .and_then(|k| arr.get(k).copied())
                    .ok_or(Halt::Trap(TrapKind::OutOfBounds))?
            }
            ExprKind::Unary(op, o) => {
                let v = self.eval(o, frame)?;
                match op {
                    UnOp::Neg => v.wrapping_neg(),
                    UnOp::Not => (v == 0) as i64,
                }
            }
            ExprKind::Binary(BinOp::And, l, r) => {
                (self.eval(l, frame)? != 0 && self.eval(r, frame)? != 0) as i64
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                (self.eval(l, frame)? != 0 || self.eval(r, frame)? != 0) as i64
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval(l, frame)?;
                let b = self.eval(r, frame)?;
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div | BinOp::Rem if b == 0 => return Err(Halt::Trap(TrapKind::DivByZero)),
                    BinOp::Div => a.wrapping_div(b),
                    BinOp::Rem => a.wrapping_rem(b),
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
            ExprKind::Call(name, args) => self.call(name, args, frame)?,
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], frame: &mut Frame) -> Result<i64, Halt> {
        if name == READ_INT {
            return Ok(self.read());
        }
        if name == PRINT_INT {
            let v = self.eval(&args[0], frame)?;
            self.outputs.push(v);
            return Ok(0);
        }
        if name != self.func.name {
            for a in args {
                self.eval(a, frame)?;
            }
            return Ok(0);
        }
        let mut callee = Frame::default();
        for (a, p) in args.iter().zip(&self.func.params) {
            let v = match (&p.ty, &a.kind) {
                (VarType::Array(_), ExprKind::Var(n)) => Value::Array(self.array(n, frame)),
                _ => Value::Int(self.eval(a, frame)?),
            };
            callee.declare(&p.name, v);
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::StepLimit);
        }
        self.depth += 1;
        let r = self.call_body(&mut callee);
        self.depth -= 1;
        r
    }
}
