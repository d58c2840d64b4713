//! Prefix-notation expression trees for dynamics.
//!
//! JSON form: a number is a constant, `"x0"`/`"u1"` name a state or input
//! coordinate, and arrays are `["+", a, b, ...]`, `["*", a, b]`,
//! `["sin", a]`, `["cos", a]`, `["clip", a, lo, hi]`, `["var", "x0"]`,
//! `["const", c]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    State(usize),
    Input(usize),
}

impl VarRef {
    fn parse(s: &str) -> Option<VarRef> {
        let (head, idx) = s.split_at(1);
        let i: usize = idx.parse().ok()?;
        match head {
            "x" => Some(VarRef::State(i)),
            "u" => Some(VarRef::Input(i)),
            _ => None,
        }
    }

    fn name(self) -> String {
        match self {
            VarRef::State(i) => format!("x{i}"),
            VarRef::Input(i) => format!("u{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(VarRef),
    Const(f64),
    Add(Vec<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Clip(Box<Expr>, f64, f64),
}

impl Expr {
    pub fn x(i: usize) -> Expr {
        Expr::Var(VarRef::State(i))
    }

    pub fn u(i: usize) -> Expr {
        Expr::Var(VarRef::Input(i))
    }

    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        Expr::Add(terms)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::Sin(Box::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::Cos(Box::new(a))
    }

    pub fn clip(a: Expr, lo: f64, hi: f64) -> Expr {
        Expr::Clip(Box::new(a), lo, hi)
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Var(VarRef::State(i)) => x[*i],
            Expr::Var(VarRef::Input(i)) => u[*i],
            Expr::Const(c) => *c,
            Expr::Add(ts) => ts.iter().map(|t| t.eval(x, u)).sum(),
            Expr::Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Expr::Sin(a) => a.eval(x, u).sin(),
            Expr::Cos(a) => a.eval(x, u).cos(),
            Expr::Clip(a, lo, hi) => a.eval(x, u).clamp(*lo, *hi),
        }
    }

    /// Checks variable references against the declared dimensions.
    pub fn check(&self, n_x: usize, n_u: usize) -> Result<()> {
        match self {
            Expr::Var(VarRef::State(i)) if *i >= n_x => {
                Err(Error::Config(format!("expression references x{i}, state has {n_x} coordinates")))
            }
            Expr::Var(VarRef::Input(i)) if *i >= n_u => {
                Err(Error::Config(format!("expression references u{i}, input has {n_u} coordinates")))
            }
            Expr::Var(_) => Ok(()),
            Expr::Const(c) if !c.is_finite() => Err(Error::NonFinite("expression constant")),
            Expr::Const(_) => Ok(()),
            Expr::Add(ts) => ts.iter().try_for_each(|t| t.check(n_x, n_u)),
            Expr::Mul(a, b) => {
                a.check(n_x, n_u)?;
                b.check(n_x, n_u)
            }
            Expr::Sin(a) | Expr::Cos(a) => a.check(n_x, n_u),
            Expr::Clip(a, lo, hi) => {
                if !(lo <= hi) {
                    return Err(Error::Config(format!("clip bounds [{lo}, {hi}]")));
                }
                a.check(n_x, n_u)
            }
        }
    }

    pub fn from_value(v: &Value) -> Result<Expr> {
        match v {
            Value::Number(n) => Ok(Expr::Const(n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) => VarRef::parse(s)
                .map(Expr::Var)
                .ok_or_else(|| Error::Config(format!("unknown variable {s:?}"))),
            Value::Array(items) => {
                let head = items
                    .first()
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Config(format!("expression must start with an operator: {v}")))?;
                let args = &items[1..];
                let arity = |n: usize| -> Result<()> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(Error::Config(format!("{head:?} takes {n} arguments, got {}", args.len())))
                    }
                };
                let num = |v: &Value| {
                    v.as_f64()
                        .ok_or_else(|| Error::Config(format!("{head:?} expects a number, got {v}")))
                };
                match head {
                    "var" => {
                        arity(1)?;
                        Expr::from_value(&args[0])
                    }
                    "const" => {
                        arity(1)?;
                        Ok(Expr::Const(num(&args[0])?))
                    }
                    "+" => Ok(Expr::Add(args.iter().map(Expr::from_value).collect::<Result<_>>()?)),
                    "*" => {
                        arity(2)?;
                        Ok(Expr::mul(Expr::from_value(&args[0])?, Expr::from_value(&args[1])?))
                    }
                    "sin" => {
                        arity(1)?;
                        Ok(Expr::sin(Expr::from_value(&args[0])?))
                    }
                    "cos" => {
                        arity(1)?;
                        Ok(Expr::cos(Expr::from_value(&args[0])?))
                    }
                    "clip" => {
                        arity(3)?;
                        Ok(Expr::clip(Expr::from_value(&args[0])?, num(&args[1])?, num(&args[2])?))
                    }
                    other => Err(Error::Abstraction(format!("unsupported primitive {other:?}"))),
                }
            }
            other => Err(Error::Config(format!("invalid expression {other}"))),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Expr::Var(r) => Value::String(r.name()),
            Expr::Const(c) => json!(c),
            Expr::Add(ts) => {
                let mut v = vec![json!("+")];
                v.extend(ts.iter().map(Expr::to_value));
                Value::Array(v)
            }
            Expr::Mul(a, b) => json!(["*", a.to_value(), b.to_value()]),
            Expr::Sin(a) => json!(["sin", a.to_value()]),
            Expr::Cos(a) => json!(["cos", a.to_value()]),
            Expr::Clip(a, lo, hi) => json!(["clip", a.to_value(), lo, hi]),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Expr::from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_robot_expression() {
        let v: Value = serde_json::from_str(r#"["+", "x0", ["*", "u0", ["cos", "u1"]]]"#).unwrap();
        let e = Expr::from_value(&v).unwrap();
        let got = e.eval(&[1.0, 0.0], &[2.0, 0.0]);
        assert!((got - 3.0).abs() < 1e-15);
        assert_eq!(Expr::from_value(&e.to_value()).unwrap(), e);
    }

    #[test]
    fn rejects_unknown_primitive() {
        let v: Value = serde_json::from_str(r#"["exp", "x0"]"#).unwrap();
        assert!(matches!(Expr::from_value(&v), Err(Error::Abstraction(_))));
        let v: Value = serde_json::from_str(r#"["sin", "x0", "x1"]"#).unwrap();
        assert!(Expr::from_value(&v).is_err());
    }

    #[test]
    fn check_catches_bad_index() {
        assert!(Expr::u(2).check(2, 2).is_err());
        assert!(Expr::add(vec![Expr::x(0), Expr::u(1)]).check(2, 2).is_ok());
    }
}
