//! Translation of model constraints into integer model expressions.

use indexmap::IndexMap;

use super::expr::TaExpr;
use super::TaGenError;
use crate::model::{BinOp, DataType, Expr, Parameter, Value};

const MAX_DECIMALS: u32 = 4;

/// How model values map onto the integers of the generated model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    /// Fractional quantities are multiplied by this power of ten.
    pub scale: i64,
    /// Codes for string, currency, and pricing-unit values, 1-based in
    /// first-seen order.
    pub strings: IndexMap<String, i64>,
}

impl Default for Encoding {
    fn default() -> Self {
        Encoding {
            scale: 1,
            strings: IndexMap::new(),
        }
    }
}

impl Encoding {
    /// Smallest power of ten that makes every value integral.
    pub fn scale_for(values: impl IntoIterator<Item = f64>) -> Result<i64, f64> {
        let mut decimals = 0;
        for v in values {
            let d = (0..=MAX_DECIMALS)
                .find(|d| {
                    let s = v * 10f64.powi(*d as i32);
                    (s - s.round()).abs() < 1e-9
                })
                .ok_or(v)?;
            decimals = decimals.max(d);
        }
        Ok(10i64.pow(decimals))
    }

    pub fn intern(&mut self, s: &str) -> i64 {
        let next = self.strings.len() as i64 + 1;
        *self.strings.entry(s.to_string()).or_insert(next)
    }

    fn scaled(&self, name: &str, v: f64) -> Result<i64, TaGenError> {
        let s = v * self.scale as f64;
        if (s - s.round()).abs() > 1e-9 || s.abs() > i64::MAX as f64 {
            return Err(TaGenError::Precision {
                name: name.to_string(),
                value: v.to_string(),
            });
        }
        Ok(s.round() as i64)
    }

    /// Integer representation of `v` read as type `t`.
    pub fn encode(&mut self, name: &str, v: &Value, t: &DataType) -> Result<i64, TaGenError> {
        let bad = || TaGenError::Unrepresentable(name.to_string());
        match (t, v) {
            (DataType::Bool, Value::Bool(b)) => Ok(*b as i64),
            (DataType::Int | DataType::Time, Value::Int(i)) => Ok(*i),
            (DataType::Double, Value::Int(i)) => i.checked_mul(self.scale).ok_or_else(bad),
            (DataType::Double, Value::Real(r)) => self.scaled(name, r.0),
            (DataType::Enum { .. }, Value::Sym(s)) => t.enum_code(s).ok_or_else(bad),
            (DataType::String, Value::Str(s))
            | (DataType::Currency | DataType::PricingUnit, Value::Sym(s)) => Ok(self.intern(s)),
            _ => Err(bad()),
        }
    }
}

/// Lowered expression with its fixed-point status.
struct Lowered {
    e: TaExpr,
    scaled: bool,
}

pub(crate) struct Lower<'a> {
    pub params: &'a IndexMap<String, Parameter>,
    pub dims: &'a IndexMap<String, DataType>,
    /// Enum tags declared as named constants.
    pub consts: &'a IndexMap<String, i64>,
    pub enc: &'a mut Encoding,
}

impl Lower<'_> {
    pub fn expr(&mut self, e: &Expr) -> Result<TaExpr, TaGenError> {
        Ok(self.go(e)?.e)
    }

    /// Lowers a numeric expression that must come out in fixed point, e.g.
    /// an amount added to a scaled path variable.
    pub fn scaled(&mut self, e: &Expr) -> Result<TaExpr, TaGenError> {
        let l = self.go(e)?;
        Ok(self.rescale(l))
    }

    fn rescale(&self, l: Lowered) -> TaExpr {
        match l.e {
            e if l.scaled || self.enc.scale == 1 => e,
            TaExpr::Int(i) => TaExpr::Int(i.saturating_mul(self.enc.scale)),
            e => TaExpr::bin(BinOp::Mul, e, TaExpr::Int(self.enc.scale)),
        }
    }

    fn type_of(&self, e: &Expr) -> Option<&DataType> {
        match e {
            Expr::Var(v) => self.params.get(v).map(|p| &p.dtype),
            Expr::Ctx(d) => self.dims.get(d),
            _ => None,
        }
    }

    fn symbol(&mut self, v: &Value, hint: Option<&DataType>, ctx: bool) -> Result<Lowered, TaGenError> {
        let e = match (v, hint) {
            (Value::Sym(s), Some(t @ DataType::Enum { .. })) if ctx => {
                TaExpr::Int(t.enum_code(s).ok_or_else(|| TaGenError::UnknownName(s.clone()))?)
            }
            (Value::Sym(s), _) if self.consts.contains_key(s) => TaExpr::Var(s.clone()),
            (Value::Sym(s), Some(DataType::Currency | DataType::PricingUnit)) => {
                TaExpr::Int(self.enc.intern(s))
            }
            (Value::Str(s), _) => TaExpr::Int(self.enc.intern(s)),
            (Value::Sym(s), _) => return Err(TaGenError::UnknownName(s.clone())),
            _ => return Err(TaGenError::Unrepresentable(v.to_string())),
        };
        Ok(Lowered { e, scaled: false })
    }

    fn operand(&mut self, e: &Expr, other: &Expr) -> Result<Lowered, TaGenError> {
        match e {
            Expr::Lit(v @ (Value::Sym(_) | Value::Str(_))) => {
                let hint = self.type_of(other).cloned();
                self.symbol(v, hint.as_ref(), matches!(other, Expr::Ctx(_)))
            }
            _ => self.go(e),
        }
    }

    fn go(&mut self, e: &Expr) -> Result<Lowered, TaGenError> {
        let plain = |e| Ok(Lowered { e, scaled: false });
        match e {
            Expr::Lit(Value::Bool(b)) => plain(TaExpr::Bool(*b)),
            Expr::Lit(Value::Int(i)) => plain(TaExpr::Int(*i)),
            Expr::Lit(Value::Real(r)) => Ok(Lowered {
                e: TaExpr::Int(self.enc.scaled(&e.to_string(), r.0)?),
                scaled: self.enc.scale > 1,
            }),
            Expr::Lit(v) => self.symbol(v, None, false),
            Expr::Var(v) => {
                let p = self
                    .params
                    .get(v)
                    .ok_or_else(|| TaGenError::UnknownName(v.clone()))?;
                if matches!(p.dtype, DataType::Tuple(_)) {
                    return Err(TaGenError::Unrepresentable(v.clone()));
                }
                Ok(Lowered {
                    e: TaExpr::Var(v.clone()),
                    scaled: p.dtype == DataType::Double && self.enc.scale > 1,
                })
            }
            Expr::Ctx(d) => {
                let t = self
                    .dims
                    .get(d)
                    .ok_or_else(|| TaGenError::UnknownName(format!("ctx.{d}")))?;
                if matches!(t, DataType::Tuple(_)) {
                    return Err(TaGenError::Unrepresentable(format!("ctx.{d}")));
                }
                Ok(Lowered {
                    e: TaExpr::Field(d.clone()),
                    scaled: *t == DataType::Double && self.enc.scale > 1,
                })
            }
            Expr::Not(inner) => plain(TaExpr::not(self.go(inner)?.e)),
            Expr::Binary(op, l, r) => {
                let a = self.operand(l, r)?;
                let b = self.operand(r, l)?;
                match op {
                    BinOp::And | BinOp::Or | BinOp::Implies => plain(TaExpr::bin(*op, a.e, b.e)),
                    BinOp::Mul => {
                        if a.scaled && b.scaled {
                            return Err(TaGenError::NonLinear(e.to_string()));
                        }
                        Ok(Lowered {
                            scaled: a.scaled || b.scaled,
                            e: TaExpr::bin(*op, a.e, b.e),
                        })
                    }
                    _ => {
                        let scaled = a.scaled || b.scaled;
                        let (x, y) = if scaled {
                            (self.rescale(a), self.rescale(b))
                        } else {
                            (a.e, b.e)
                        };
                        let arithmetic = op.is_arithmetic();
                        Ok(Lowered {
                            e: TaExpr::bin(*op, x, y),
                            scaled: scaled && arithmetic,
                        })
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_expr_in, Direction, Ident, Scope};

    struct Tags;

    impl Scope for Tags {
        fn ident(&self, name: &str) -> Option<Ident> {
            match name {
                "caa" | "aaa" | "toyota" | "honda" => Some(Ident::Symbol),
                _ => Some(Ident::Var),
            }
        }
        fn dimension(&self, _: &str) -> bool {
            true
        }
    }

    fn params() -> IndexMap<String, Parameter> {
        [
            ("carType", DataType::Enum { name: "CarKind".into(), values: vec!["toyota".into(), "honda".into()] }),
            ("Deposit", DataType::Double),
            ("n", DataType::Int),
            ("name", DataType::String),
        ]
        .into_iter()
        .map(|(n, t)| (n.to_string(), Parameter::new(n, t, Direction::Input)))
        .collect()
    }

    fn dims() -> IndexMap<String, DataType> {
        IndexMap::from([(
            "membership".to_string(),
            DataType::Enum { name: "M".into(), values: vec!["caa".into(), "aaa".into()] },
        )])
    }

    fn lower(src: &str, scale: i64) -> Result<String, TaGenError> {
        let (p, d) = (params(), dims());
        let consts = IndexMap::from([("toyota".to_string(), 1), ("honda".to_string(), 2)]);
        let mut enc = Encoding { scale, ..Encoding::default() };
        let mut l = Lower { params: &p, dims: &d, consts: &consts, enc: &mut enc };
        Ok(l.expr(&parse_expr_in(src, &Tags).unwrap())?.to_string())
    }

    #[test]
    fn context_tags_become_codes_and_param_tags_stay_named() {
        assert_eq!(lower("ctx.membership == aaa", 1).unwrap(), "RequesterContext.membership==2");
        assert_eq!(lower("carType == toyota", 1).unwrap(), "carType==toyota");
    }

    #[test]
    fn fixed_point_alignment() {
        assert_eq!(lower("Deposit + 2.5 <= 10", 10).unwrap(), "(Deposit+25)<=100");
        assert_eq!(lower("Deposit + 300", 1).unwrap(), "Deposit+300");
        assert_eq!(lower("n * 2.5", 10).unwrap(), "n*25");
        assert!(matches!(lower("Deposit * 2.5", 10), Err(TaGenError::NonLinear(_))));
    }

    #[test]
    fn strings_are_interned() {
        assert_eq!(lower("name == \"bob\" || name == \"al\"", 1).unwrap(), "(name==1)||(name==2)");
    }

    #[test]
    fn scale_is_smallest_sufficient_power_of_ten() {
        assert_eq!(Encoding::scale_for([1.0, 2.5, 0.25]), Ok(100));
        assert_eq!(Encoding::scale_for([3.0]), Ok(1));
        assert!(Encoding::scale_for([0.123456]).is_err());
    }
}
