use std::fmt;

use super::time::ModelTime;

/// Payload type of a colour set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorKind {
    Unit,
    Int,
    Real,
    Pair,
    /// Fixed-arity product of reals.
    Record(usize),
}

/// A colour set: payload kind plus whether its tokens carry timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColorSet {
    pub kind: ColorKind,
    pub timed: bool,
}

impl ColorSet {
    pub const fn timed(kind: ColorKind) -> Self {
        ColorSet { kind, timed: true }
    }

    pub const fn untimed(kind: ColorKind) -> Self {
        ColorSet { kind, timed: false }
    }

    pub fn admits(&self, value: &Value) -> bool {
        matches!(
            (self.kind, value),
            (ColorKind::Unit, Value::Unit)
                | (ColorKind::Int, Value::Int(_))
                | (ColorKind::Real, Value::Real(_))
                | (ColorKind::Pair, Value::Pair(..))
        ) || matches!((self.kind, value), (ColorKind::Record(n), Value::Record(v)) if v.len() == n)
    }
}

impl fmt::Display for ColorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ColorKind::Unit => write!(f, "unit")?,
            ColorKind::Int => write!(f, "int")?,
            ColorKind::Real => write!(f, "real")?,
            ColorKind::Pair => write!(f, "real*real")?,
            ColorKind::Record(n) => write!(f, "record/{n}")?,
        }
        if self.timed {
            write!(f, " timed")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Unit,
    Int(i64),
    Real(f64),
    Pair(f64, f64),
    Record(Vec<f64>),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Pair(..) => "real*real",
            Value::Record(_) => "record",
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match *self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(f64, f64)> {
        match *self {
            Value::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&[f64]> {
        match self {
            Value::Record(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Pair(a, b) => write!(f, "({a},{b})"),
            Value::Record(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A value in a place. `seq` is the insertion sequence number, unique per net.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub value: Value,
    pub timestamp: ModelTime,
    pub seq: u64,
}
