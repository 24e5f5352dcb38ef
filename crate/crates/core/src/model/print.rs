//! Canonical expression printer. Deterministic, and inverse to the parser:
//! reparsing printed output reproduces the tree structurally.

use crate::expr::Expr;
use crate::model::VariableMeta;
use std::fmt::Write;

// effective precedence: sums 1, unary minus (and negative literals) 2,
// products 3, powers 4, atoms 5
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Sum(_) => 1,
        Expr::Neg(_) => 2,
        Expr::Const(v) if *v < 0.0 => 2,
        Expr::Prod(_) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

/// Render `expr` as infix text using the given variable names.
pub fn print_expr(expr: &Expr, variables: &[VariableMeta]) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, variables, 1);
    out
}

fn write_expr(out: &mut String, e: &Expr, vars: &[VariableMeta], ctx: u8) {
    let needs_parens = prec(e) < ctx;
    if needs_parens {
        out.push('(');
    }
    match e {
        Expr::Const(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(i) => out.push_str(&vars[*i].name),
        Expr::Sum(children) => {
            for (k, c) in children.iter().enumerate() {
                if k == 0 {
                    write_expr(out, c, vars, 1);
                    continue;
                }
                match c {
                    Expr::Neg(inner) => {
                        out.push_str(" - ");
                        write_expr(out, inner, vars, 2);
                    }
                    Expr::Const(v) if *v < 0.0 => {
                        let _ = write!(out, " - {}", -v);
                    }
                    other => {
                        out.push_str(" + ");
                        write_expr(out, other, vars, 2);
                    }
                }
            }
        }
        Expr::Prod(children) => {
            for (k, c) in children.iter().enumerate() {
                if k > 0 {
                    out.push_str(" * ");
                }
                write_expr(out, c, vars, 3);
            }
        }
        Expr::Pow(base, p) => {
            write_expr(out, base, vars, 5);
            let _ = write!(out, "^{p}");
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, vars, 3);
        }
        Expr::Exp(inner) => {
            out.push_str("exp(");
            write_expr(out, inner, vars, 1);
            out.push(')');
        }
        Expr::Log(inner) => {
            out.push_str("log(");
            write_expr(out, inner, vars, 1);
            out.push(')');
        }
        Expr::Sqrt(inner) => {
            out.push_str("sqrt(");
            write_expr(out, inner, vars, 1);
            out.push(')');
        }
    }
    if needs_parens {
        out.push(')');
    }
}
