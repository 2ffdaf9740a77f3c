// SPDX-License-Identifier: Apache-2.0

//! Integer folding for ranges and parameter defaults at parse time.

use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, UnaryOp};

/// `ceil(log2(v))`, with `clog2(0) == 0`.
pub fn clog2(v: i64) -> i64 {
    if v <= 1 {
        return 0;
    }
    64 - i64::from((v - 1).leading_zeros())
}

pub fn eval_const(expr: &Expr, env: &HashMap<String, i64>) -> Option<i64> {
    Some(match expr {
        Expr::Ident(n) => *env.get(n)?,
        Expr::Number(n) => {
            let lit = n.bits()?;
            if lit.unknown.iter().any(|u| *u) {
                return None;
            }
            let mut v: i64 = 0;
            for (i, b) in lit.bits.iter().enumerate().take(63) {
                if *b {
                    v |= 1 << i;
                }
            }
            if lit.signed && lit.width <= 63 && lit.bits[lit.width as usize - 1] {
                v -= 1 << lit.width;
            }
            v
        }
        Expr::Unary { op, operand } => {
            let v = eval_const(operand, env)?;
            match op {
                UnaryOp::Plus => v,
                UnaryOp::Neg => v.checked_neg()?,
                UnaryOp::LogNot => i64::from(v == 0),
                UnaryOp::Not => !v,
                _ => return None,
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_const(lhs, env)?;
            let b = eval_const(rhs, env)?;
            match op {
                BinaryOp::Add => a.checked_add(b)?,
                BinaryOp::Sub => a.checked_sub(b)?,
                BinaryOp::Mul => a.checked_mul(b)?,
                BinaryOp::Div => a.checked_div(b)?,
                BinaryOp::Mod => a.checked_rem(b)?,
                BinaryOp::Pow => a.checked_pow(u32::try_from(b).ok()?)?,
                BinaryOp::Shl | BinaryOp::AShl => a.checked_shl(u32::try_from(b).ok()?)?,
                BinaryOp::Shr | BinaryOp::AShr => a.checked_shr(u32::try_from(b).ok()?)?,
                BinaryOp::And => a & b,
                BinaryOp::Or => a | b,
                BinaryOp::Xor => a ^ b,
                BinaryOp::Eq | BinaryOp::CaseEq => i64::from(a == b),
                BinaryOp::Ne | BinaryOp::CaseNe => i64::from(a != b),
                BinaryOp::Lt => i64::from(a < b),
                BinaryOp::Le => i64::from(a <= b),
                BinaryOp::Gt => i64::from(a > b),
                BinaryOp::Ge => i64::from(a >= b),
                BinaryOp::LogAnd => i64::from(a != 0 && b != 0),
                BinaryOp::LogOr => i64::from(a != 0 || b != 0),
                BinaryOp::Xnor => !(a ^ b),
            }
        }
        Expr::Ternary { cond, then, els } => {
            if eval_const(cond, env)? != 0 {
                eval_const(then, env)?
            } else {
                eval_const(els, env)?
            }
        }
        Expr::Call { name, args } if name == "$clog2" && args.len() == 1 => clog2(eval_const(&args[0], env)?),
        _ => return None,
    })
}
