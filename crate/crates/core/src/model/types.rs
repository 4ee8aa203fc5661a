use std::fmt;

use ordered_float::OrderedFloat;

use crate::syntax::is_identifier;

/// Data types available to parameters, attributes, and context dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Bool,
    Int,
    Double,
    String,
    Enum { name: String, values: Vec<String> },
    Time,
    Currency,
    PricingUnit,
    Tuple(Vec<DataType>),
}

impl DataType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, DataType::Int | DataType::Double | DataType::Time)
    }

    pub fn enum_values(&self) -> Option<&[String]> {
        match self {
            DataType::Enum { values, .. } => Some(values),
            _ => None,
        }
    }

    /// 1-based position of `symbol` in an enum type; 0 is reserved for "unset".
    pub fn enum_code(&self, symbol: &str) -> Option<i64> {
        self.enum_values()?
            .iter()
            .position(|v| v == symbol)
            .map(|i| i as i64 + 1)
    }

    /// Whether `value` is a member of this type.
    pub fn admits(&self, value: &Value) -> bool {
        match (self, value) {
            (DataType::Bool, Value::Bool(_)) => true,
            (DataType::Int | DataType::Time, Value::Int(_)) => true,
            (DataType::Double, Value::Int(_) | Value::Real(_)) => true,
            (DataType::String, Value::Str(_)) => true,
            (DataType::Enum { values, .. }, Value::Sym(s)) => values.contains(s),
            (DataType::Currency | DataType::PricingUnit, Value::Sym(_)) => true,
            (DataType::Tuple(tys), Value::Tuple(vs)) => {
                tys.len() == vs.len() && tys.iter().zip(vs).all(|(t, v)| t.admits(v))
            }
            _ => false,
        }
    }

    /// Best-effort conversion of a loosely typed value (e.g. from a TOML
    /// options file, where enum tags arrive as strings) into this type.
    pub fn coerce(&self, value: Value) -> Option<Value> {
        if self.admits(&value) {
            return Some(value);
        }
        let out = match (self, value) {
            (DataType::Enum { .. } | DataType::Currency | DataType::PricingUnit, Value::Str(s)) => {
                Value::Sym(s)
            }
            (DataType::String, Value::Sym(s)) => Value::Str(s),
            (DataType::Int | DataType::Time, Value::Real(r)) if r.fract() == 0.0 => {
                Value::Int(r.0 as i64)
            }
            (DataType::Tuple(tys), Value::Tuple(vs)) if tys.len() == vs.len() => Value::Tuple(
                tys.iter()
                    .zip(vs)
                    .map(|(t, v)| t.coerce(v))
                    .collect::<Option<Vec<_>>>()?,
            ),
            _ => return None,
        };
        self.admits(&out).then_some(out)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::Bool => f.write_str("bool"),
            DataType::Int => f.write_str("int"),
            DataType::Double => f.write_str("double"),
            DataType::String => f.write_str("string"),
            DataType::Time => f.write_str("time"),
            DataType::Currency => f.write_str("currency"),
            DataType::PricingUnit => f.write_str("unit"),
            DataType::Enum { name, values } => write!(f, "enum {name} {{ {} }}", values.join(", ")),
            DataType::Tuple(tys) => {
                f.write_str("(")?;
                for (i, t) in tys.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A typed constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(OrderedFloat<f64>),
    Str(String),
    /// Enum tag, currency, or pricing unit.
    Sym(String),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn real(v: f64) -> Self {
        Value::Real(OrderedFloat(v))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(r.0),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Real(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "double",
            Value::Str(_) => "string",
            Value::Sym(_) => "symbol",
            Value::Tuple(_) => "tuple",
        }
    }
}

/// Renders a number without a trailing `.0` when it is integral.
pub fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => {
                if r.fract() == 0.0 {
                    write!(f, "{:.1}", r.0)
                } else {
                    write!(f, "{}", r.0)
                }
            }
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Sym(s) => {
                if is_identifier(s) {
                    f.write_str(s)
                } else {
                    write!(f, "{s:?}")
                }
            }
            Value::Tuple(vs) => {
                f.write_str("(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}
