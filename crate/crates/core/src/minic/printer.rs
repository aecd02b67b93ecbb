use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical source text: four-space indentation, every branch and loop body
/// braced, one statement per line, minimal parentheses.
pub fn pretty_print(f: &Function) -> String {
    let mut out = String::new();
    let ret = match f.ret {
        RetType::Int => "int",
        RetType::Void => "void",
    };
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| match p.ty {
            VarType::Int => format!("int {}", p.name),
            VarType::Array(n) => format!("int {}[{n}]", p.name),
        })
        .collect();
    let _ = writeln!(out, "{ret} {}({}) {{", f.name, params.join(", "));
    for s in &f.body.stmts {
        stmt(&mut out, s, 1);
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn block_body(out: &mut String, b: &Block, depth: usize) {
    for s in &b.stmts {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_to_string(cond));
            block_body(out, then_block, depth + 1);
            indent(out, depth);
            match else_block {
                Some(e) => {
                    out.push_str("} else {\n");
                    block_body(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr_to_string(cond));
            block_body(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            let init = init.as_deref().map(simple_to_string).unwrap_or_default();
            let cond = cond.as_ref().map(expr_to_string).unwrap_or_default();
            let update = update.as_deref().map(simple_to_string).unwrap_or_default();
            let cond_sep = if cond.is_empty() { ";" } else { "; " };
            let upd_sep = if update.is_empty() { ";" } else { "; " };
            let _ = writeln!(out, "for ({init}{cond_sep}{cond}{upd_sep}{update}) {{");
            block_body(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            let _ = writeln!(out, "switch ({}) {{", expr_to_string(scrutinee));
            for c in cases {
                indent(out, depth);
                let _ = writeln!(out, "case {}:", c.value);
                block_body(out, &c.body, depth + 1);
            }
            if let Some(d) = default {
                indent(out, depth);
                out.push_str("default:\n");
                block_body(out, d, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Block(b) => {
            out.push_str("{\n");
            block_body(out, b, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        _ => {
            out.push_str(&simple_to_string(s));
            out.push_str(";\n");
        }
    }
}

/// One-line rendering of a non-compound statement, without the trailing `;`.
/// Compound statements render as their header (e.g. `if (c)`).
pub fn simple_to_string(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl { name, size, init } => match (size, init) {
            (Some(n), _) => format!("int {name}[{n}]"),
            (None, Some(e)) => format!("int {name} = {}", expr_to_string(e)),
            (None, None) => format!("int {name}"),
        },
        StmtKind::Assign { target, value } => {
            format!("{} = {}", lvalue_to_string(target), expr_to_string(value))
        }
        StmtKind::Break => "break".to_string(),
        StmtKind::Return(None) => "return".to_string(),
        StmtKind::Return(Some(e)) => format!("return {}", expr_to_string(e)),
        StmtKind::Expr(e) => expr_to_string(e),
        StmtKind::If { cond, .. } => format!("if ({})", expr_to_string(cond)),
        StmtKind::While { cond, .. } => format!("while ({})", expr_to_string(cond)),
        StmtKind::Switch { scrutinee, .. } => format!("switch ({})", expr_to_string(scrutinee)),
        StmtKind::For { cond, .. } => format!(
            "for (;{};)",
            cond.as_ref().map(expr_to_string).unwrap_or_default()
        ),
        StmtKind::Block(_) => "{}".to_string(),
    }
}

pub fn lvalue_to_string(l: &LValue) -> String {
    match l {
        LValue::Var(n) => n.clone(),
        LValue::Index(n, i) => format!("{n}[{}]", expr_to_string(i)),
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Index(n, i) => {
            out.push_str(n);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        ExprKind::Call(n, args) => {
            out.push_str(n);
            out.push('(');
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
        ExprKind::Unary(op, o) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            let atomic = matches!(
                o.kind,
                ExprKind::Int(_) | ExprKind::Var(_) | ExprKind::Index(..) | ExprKind::Call(..)
            );
            if atomic {
                write_expr(out, o, 0);
            } else {
                out.push('(');
                write_expr(out, o, 0);
                out.push(')');
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let paren = p < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, l, p);
            let _ = write!(out, " {} ", op.symbol());
            // left-associative: an equal-precedence right operand needs parentheses
            write_expr(out, r, p + 1);
            if paren {
                out.push(')');
            }
        }
    }
}
