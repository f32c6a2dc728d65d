//! Structured description of a symbol, shared by configs and exports.
//!
//! ```toml
//! kind = "builtin"
//! name = "elliptic_demo"
//! dim = 1
//! m = 1.0
//! ```
//!
//! ```toml
//! kind = "expression"
//! dim = 1
//! order = 1.0
//! expr = "Lambda(1)*(2+cos(2*pi*x1))"
//! ```
//!
//! `sum` and `product` combine nested descriptions; `recipe` carries a full
//! evaluation tree (used when exporting derived symbols).

use serde::{Deserialize, Serialize};

use super::builtin::{builtin_symbol, Builtin};
use super::node::Node;
use super::{symbol_add, symbol_mul, Symbol, SymbolKind};
use crate::error::{Error, Result};

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    Builtin {
        #[serde(default = "one")]
        dim: usize,
        #[serde(flatten)]
        builtin: Builtin,
    },
    Expression {
        #[serde(default = "one")]
        dim: usize,
        order: f64,
        expr: String,
    },
    Sum {
        terms: Vec<SymbolSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<f64>,
    },
    Product {
        factors: Vec<SymbolSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<f64>,
    },
    Recipe {
        dim: usize,
        order: f64,
        #[serde(default)]
        label: String,
        root: Node,
    },
}

impl SymbolSpec {
    pub fn builtin(dim: usize, builtin: Builtin) -> Self {
        SymbolSpec::Builtin { dim, builtin }
    }

    pub fn build(&self) -> Result<Symbol> {
        match self {
            SymbolSpec::Builtin { dim, builtin } => builtin_symbol(*dim, builtin),
            SymbolSpec::Expression { dim, order, expr } => Symbol::expression(*dim, *order, expr),
            SymbolSpec::Sum { terms, order } => {
                let s = fold(terms, symbol_add)?;
                Ok(match order {
                    Some(m) => s.with_order(*m),
                    None => s,
                })
            }
            SymbolSpec::Product { factors, order } => {
                let s = fold(factors, symbol_mul)?;
                Ok(match order {
                    Some(m) => s.with_order(*m),
                    None => s,
                })
            }
            SymbolSpec::Recipe {
                dim,
                order,
                label,
                root,
            } => Ok(Symbol::new(
                *dim,
                *order,
                SymbolKind::Derived,
                label.clone(),
                root.clone(),
            )),
        }
    }

    /// Describe an existing symbol by its evaluation tree.
    pub fn recipe(s: &Symbol) -> Self {
        SymbolSpec::Recipe {
            dim: s.dim,
            order: s.order,
            label: s.label.clone(),
            root: (*s.root).clone(),
        }
    }
}

fn fold(parts: &[SymbolSpec], op: fn(&Symbol, &Symbol) -> Result<Symbol>) -> Result<Symbol> {
    let mut it = parts.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidParams("empty symbol combination".into()))?
        .build()?;
    it.try_fold(first, |acc, p| op(&acc, &p.build()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_descriptions() {
        let s: SymbolSpec =
            serde_json::from_str(r#"{"kind":"builtin","name":"elliptic_demo","m":1}"#).unwrap();
        let a = s.build().unwrap();
        assert_eq!(a.order, 1.0);
        assert_eq!(a.dim, 1);

        let s: SymbolSpec = serde_json::from_str(
            r#"{"kind":"product","order":1.0,"factors":[
                {"kind":"builtin","name":"elliptic_demo","m":1},
                {"kind":"expression","order":0,"expr":"1 + 0.3*exp(2*pi*i*x1)"}]}"#,
        )
        .unwrap();
        let p = s.build().unwrap();
        let v = p.eval(&[0], &[0.0]).unwrap();
        assert!((v.re - 3.9).abs() < 1e-13);
    }

    #[test]
    fn recipe_round_trip_preserves_values() {
        let a = SymbolSpec::builtin(1, Builtin::EllipticDemo { m: 1.0 })
            .build()
            .unwrap();
        let d = a
            .difference(&crate::lattice::MultiIndex(vec![1]))
            .unwrap()
            .conj();
        let json = serde_json::to_string(&SymbolSpec::recipe(&d)).unwrap();
        let back: SymbolSpec = serde_json::from_str(&json).unwrap();
        let e = back.build().unwrap();
        assert_eq!(e.order, d.order);
        for k in -4..=4 {
            assert_eq!(e.eval(&[k], &[0.3]).unwrap(), d.eval(&[k], &[0.3]).unwrap());
        }
    }

    #[test]
    fn schema_errors() {
        assert!(
            serde_json::from_str::<SymbolSpec>(r#"{"kind":"builtin","name":"bogus"}"#).is_err()
        );
        assert!(
            serde_json::from_str::<SymbolSpec>(r#"{"kind":"expression","expr":"k1"}"#).is_err()
        );
        let bad = SymbolSpec::Expression {
            dim: 1,
            order: 0.0,
            expr: "k2".into(),
        };
        assert!(bad.build().is_err());
    }
}
