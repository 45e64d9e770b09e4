use std::collections::HashMap;

use super::ast::{Arg, BinOp, Expr, ExprKind, Item, Program};
use super::builtins::{self, map_binary, map_unary, ArgKind, ArgValue, Args, Builtin, Default, Value};
use super::{ScriptError, SourceSpan};
use crate::adiff::ExprGraph;
use crate::geom::{Attr, ParamSet, ScalarField, Vec3Attr};

/// A compiled model file.
#[derive(Debug, Clone)]
pub struct Model {
    pub field: ScalarField,
    pub params: ParamSet,
}

pub fn compile(program: &Program) -> Result<Model, ScriptError> {
    let mut env: HashMap<String, Value> = HashMap::new();
    let mut params = ParamSet::new();
    for item in &program.items {
        let (name, value) = match item {
            Item::Param(p) => {
                params.add(&p.name.name, p.init, p.bounds).map_err(|e| ScriptError::compile(p.span, e.to_string()))?;
                (&p.name, Value::Scalar(Attr::param(&p.name.name)))
            }
            Item::Let(l) => (&l.name, eval(&l.expr, &env)?),
        };
        if builtins::lookup(&name.name).is_some() {
            return Err(ScriptError::compile(name.span, format!("`{}` is a builtin and cannot be rebound", name.name)));
        }
        if env.contains_key(&name.name) {
            return Err(ScriptError::compile(name.span, format!("`{}` is already defined", name.name)));
        }
        env.insert(name.name.clone(), value);
    }
    match eval(&program.output, &env)? {
        Value::Field(field) => Ok(Model { field, params }),
        other => Err(ScriptError::compile(
            program.output.span,
            format!("output must be a field, found a {}", other.kind_name()),
        )),
    }
}

fn eval(e: &Expr, env: &HashMap<String, Value>) -> Result<Value, ScriptError> {
    match &e.kind {
        ExprKind::Number(v) => Ok(Value::Scalar(Attr::from(*v))),
        ExprKind::Ident(name) => match env.get(name) {
            Some(v) => Ok(v.clone()),
            None if builtins::lookup(name).is_some() => {
                Err(ScriptError::compile(e.span, format!("`{name}` is a builtin; call it as `{name}(...)`")))
            }
            None => Err(ScriptError::compile(e.span, format!("unknown name `{name}`"))),
        },
        ExprKind::Neg(inner) => {
            let v = eval(inner, env)?;
            // negating a field is the set complement and keeps its family
            map_unary(&v, |x| -x, ExprGraph::neg, |f| f)
                .ok_or_else(|| ScriptError::compile(e.span, "cannot negate a tuple".to_string()))
        }
        ExprKind::Binary(op, a, b) => {
            let (x, y) = (eval(a, env)?, eval(b, env)?);
            let r = match op {
                BinOp::Add => map_binary(&x, &y, |u, v| u + v, ExprGraph::add),
                BinOp::Sub => map_binary(&x, &y, |u, v| u - v, ExprGraph::sub),
                BinOp::Mul => map_binary(&x, &y, |u, v| u * v, ExprGraph::mul),
                BinOp::Div => map_binary(&x, &y, |u, v| u / v, ExprGraph::div),
            };
            r.ok_or_else(|| ScriptError::compile(e.span, "arithmetic on a tuple".to_string()))
        }
        ExprKind::Tuple(items) => Ok(Value::Tuple(items.iter().map(|i| eval(i, env)).collect::<Result<_, _>>()?)),
        ExprKind::Call { name, args } => {
            let b = match builtins::lookup(&name.name) {
                Some(b) => b,
                None if env.contains_key(&name.name) => {
                    return Err(ScriptError::compile(name.span, format!("`{}` is not a function", name.name)))
                }
                None => return Err(ScriptError::compile(name.span, format!("unknown function `{}`", name.name))),
            };
            let resolved = bind_args(b, args, e.span, env)?;
            b.call(&resolved).map_err(|err| ScriptError::compile(e.span, format!("{}: {err}", b.name)))
        }
    }
}

/// Matches positional then named arguments to the signature and checks kinds.
fn bind_args(b: &Builtin, args: &[Arg], call: SourceSpan, env: &HashMap<String, Value>) -> Result<Args, ScriptError> {
    let mut slots: Vec<Option<(Value, SourceSpan)>> = vec![None; b.args.len()];
    let mut seen_named = false;
    for (i, a) in args.iter().enumerate() {
        let idx = match &a.name {
            None => {
                if seen_named {
                    return Err(ScriptError::compile(a.value.span, "positional argument after a named one".into()));
                }
                if i >= b.args.len() {
                    return Err(ScriptError::compile(
                        a.value.span,
                        format!("`{}` takes {} argument(s), {} given", b.name, b.args.len(), args.len()),
                    ));
                }
                i
            }
            Some(n) => {
                seen_named = true;
                match b.spec(&n.name) {
                    Some((j, _)) => j,
                    None => {
                        let names: Vec<&str> = b.args.iter().map(|s| s.name).collect();
                        return Err(ScriptError::compile(
                            n.span,
                            format!("`{}` has no argument `{}` (expected one of: {})", b.name, n.name, names.join(", ")),
                        ));
                    }
                }
            }
        };
        if slots[idx].is_some() {
            return Err(ScriptError::compile(a.value.span, format!("argument `{}` given twice", b.args[idx].name)));
        }
        slots[idx] = Some((eval(&a.value, env)?, a.value.span));
    }
    let mut out = Vec::with_capacity(b.args.len());
    for (spec, slot) in b.args.iter().zip(slots) {
        let v = match slot {
            Some((v, span)) => convert(v, spec.kind).ok_or_else(|| {
                ScriptError::compile(span, format!("argument `{}` of `{}` must be a {}", spec.name, b.name, spec.kind.name()))
            })?,
            None => match spec.default {
                Some(d) => default_value(d, spec.kind),
                None => {
                    return Err(ScriptError::compile(call, format!("missing argument `{}` of `{}`", spec.name, b.name)))
                }
            },
        };
        out.push(v);
    }
    Ok(Args(out))
}

fn literal(v: &Value) -> Option<f64> {
    match v {
        Value::Scalar(a) => a.literal(),
        _ => None,
    }
}

fn convert(v: Value, kind: ArgKind) -> Option<ArgValue> {
    match kind {
        ArgKind::Field => match v {
            Value::Field(f) => Some(ArgValue::Field(f)),
            _ => None,
        },
        ArgKind::Scalar => match v {
            Value::Scalar(a) => Some(ArgValue::Scalar(a)),
            _ => None,
        },
        ArgKind::Number => match v {
            Value::Tuple(_) => None,
            v => Some(ArgValue::Number(v)),
        },
        ArgKind::Vec3 => match v {
            Value::Tuple(items) if items.len() == 3 => {
                let mut attrs = Vec::with_capacity(3);
                for it in items {
                    match it {
                        Value::Scalar(a) => attrs.push(a),
                        _ => return None,
                    }
                }
                let [a, b, c]: [Attr; 3] = attrs.try_into().ok()?;
                Some(ArgValue::Vec3(Vec3Attr([a, b, c])))
            }
            _ => None,
        },
        ArgKind::Direction => match v {
            Value::Tuple(items) if items.len() == 3 => {
                Some(ArgValue::Direction([literal(&items[0])?, literal(&items[1])?, literal(&items[2])?]))
            }
            _ => None,
        },
        ArgKind::Axis => match literal(&v)? {
            x if x == 0.0 || x == 1.0 || x == 2.0 => Some(ArgValue::Int(x as usize)),
            _ => None,
        },
        ArgKind::Count => match literal(&v)? {
            x if x >= 1.0 && x.fract() == 0.0 && x < 1e6 => Some(ArgValue::Int(x as usize)),
            _ => None,
        },
    }
}

fn default_value(d: Default, kind: ArgKind) -> ArgValue {
    match (d, kind) {
        (Default::Vec3(v), _) => ArgValue::Vec3(Vec3Attr::from(v)),
        (Default::Int(n), _) => ArgValue::Int(n),
        (Default::Scalar(x), ArgKind::Number) => ArgValue::Number(Value::Scalar(x.into())),
        (Default::Scalar(x), _) => ArgValue::Scalar(x.into()),
    }
}
