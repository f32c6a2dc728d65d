use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::node::{Node, TrigTerm};
use super::{Symbol, SymbolKind};
use crate::error::{Error, Result};

/// Built-in symbol families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    /// `Λ_s(k) = (1+|k|²)^{s/2}`, order `s`.
    JapaneseBracket { s: f64 },
    /// `e^{±2πi x_axis}` (axis is 0-based), order 0. Quantizes to the shift
    /// `u ↦ u(· ± e_axis)`.
    AxisShift { axis: usize, sign: i8 },
    /// `Σ c_f e^{2πi f·x}`, order 0.
    TrigPoly { terms: Vec<TrigTerm> },
    /// `Σⱼ 2(cos 2πxⱼ − 1)`, order 0.
    DiscreteLaplacian,
    /// `Λ_m(k)(2 + cos 2πx₁)`, order `m`.
    EllipticDemo { m: f64 },
    /// `Λ_m(k)(2 + cos 2πx₁) + Λ_{m−1}(k)·Σ c_f e^{2πi f·x}`, order `m`.
    Perturbed { m: f64, terms: Vec<TrigTerm> },
}

const NAMES: &[&str] = &[
    "japanese_bracket",
    "axis_shift",
    "trig_poly",
    "discrete_laplacian",
    "elliptic_demo",
    "perturbed",
];

fn check_terms(dim: usize, terms: &[TrigTerm]) -> Result<()> {
    for t in terms {
        if t.freq.len() != dim {
            return Err(Error::InvalidParams(format!(
                "trig term frequency {:?} has length {}, expected {dim}",
                t.freq,
                t.freq.len()
            )));
        }
    }
    Ok(())
}

fn demo(dim: usize, m: f64) -> Node {
    let mut cos = vec![
        TrigTerm::new(vec![0; dim], Complex64::new(2.0, 0.0)),
        TrigTerm::new(vec![0; dim], Complex64::new(0.5, 0.0)),
        TrigTerm::new(vec![0; dim], Complex64::new(0.5, 0.0)),
    ];
    cos[1].freq[0] = 1;
    cos[2].freq[0] = -1;
    Node::Product {
        factors: vec![
            Arc::new(Node::JapaneseBracket { s: m }),
            Arc::new(Node::TrigPoly { terms: cos }),
        ],
    }
}

/// Build a built-in symbol on `ℤ^dim × 𝕋^dim`.
pub fn builtin_symbol(dim: usize, b: &Builtin) -> Result<Symbol> {
    if dim == 0 {
        return Err(Error::InvalidParams("dimension must be at least 1".into()));
    }
    let closed = |order: f64, label: String, node: Node| {
        Symbol::new(dim, order, SymbolKind::ClosedForm, label, node)
    };
    Ok(match b {
        Builtin::JapaneseBracket { s } => {
            if !s.is_finite() {
                return Err(Error::InvalidParams(
                    "japanese_bracket exponent must be finite".into(),
                ));
            }
            closed(*s, format!("Λ_{s}"), Node::JapaneseBracket { s: *s })
        }
        Builtin::AxisShift { axis, sign } => {
            if *axis >= dim || sign.abs() != 1 {
                return Err(Error::InvalidParams(format!(
                    "axis_shift needs axis < {dim} and sign ±1, got axis {axis}, sign {sign}"
                )));
            }
            let s = if *sign > 0 { '+' } else { '-' };
            closed(
                0.0,
                format!("exp({s}2πi x{})", axis + 1),
                Node::AxisShift {
                    axis: *axis,
                    sign: *sign,
                },
            )
        }
        Builtin::TrigPoly { terms } => {
            check_terms(dim, terms)?;
            closed(
                0.0,
                "trig_poly".into(),
                Node::TrigPoly {
                    terms: terms.clone(),
                },
            )
        }
        Builtin::DiscreteLaplacian => {
            closed(0.0, "discrete_laplacian".into(), Node::DiscreteLaplacian)
        }
        Builtin::EllipticDemo { m } => closed(*m, format!("elliptic_demo({m})"), demo(dim, *m)),
        Builtin::Perturbed { m, terms } => {
            check_terms(dim, terms)?;
            let lower = Node::Product {
                factors: vec![
                    Arc::new(Node::JapaneseBracket { s: m - 1.0 }),
                    Arc::new(Node::TrigPoly {
                        terms: terms.clone(),
                    }),
                ],
            };
            closed(
                *m,
                format!("perturbed({m})"),
                Node::Sum {
                    terms: vec![Arc::new(demo(dim, *m)), Arc::new(lower)],
                },
            )
        }
    })
}

/// Look up a built-in by name with parameters given as a JSON object.
pub fn builtin(name: &str, dim: usize, params: serde_json::Value) -> Result<Symbol> {
    if !NAMES.contains(&name) {
        return Err(Error::UnknownBuiltin(name.to_string()));
    }
    let mut obj = match params {
        serde_json::Value::Object(o) => o,
        serde_json::Value::Null => serde_json::Map::new(),
        other => {
            return Err(Error::InvalidParams(format!(
                "parameters must be an object, got {other}"
            )))
        }
    };
    obj.insert("name".into(), serde_json::Value::String(name.into()));
    let b: Builtin = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| Error::InvalidParams(format!("{name}: {e}")))?;
    builtin_symbol(dim, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn japanese_bracket_values() {
        let z = builtin("japanese_bracket", 1, json!({"s": 0.0})).unwrap();
        assert_eq!(z.eval(&[7], &[0.3]).unwrap().re, 1.0);
        let two = builtin("japanese_bracket", 1, json!({"s": 2})).unwrap();
        assert_eq!(two.eval(&[1], &[0.0]).unwrap().re, 2.0);
        let m2 = builtin("japanese_bracket", 2, json!({"s": -2})).unwrap();
        assert!((m2.eval(&[1, 1], &[0.0, 0.0]).unwrap().re - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m2.order, -2.0);
    }

    #[test]
    fn demo_and_perturbed() {
        let d = builtin("elliptic_demo", 1, json!({"m": 1})).unwrap();
        let v = d.eval(&[2], &[0.5]).unwrap();
        assert!((v.re - 5f64.sqrt()).abs() < 1e-14);
        let p = builtin(
            "perturbed",
            1,
            json!({"m": 1, "terms": [{"freq": [2], "re": 0.25}]}),
        )
        .unwrap();
        let v = p.eval(&[0], &[0.0]).unwrap();
        assert!((v.re - 3.25).abs() < 1e-14);
        assert_eq!(p.order, 1.0);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(matches!(
            builtin("nope", 1, json!({})),
            Err(Error::UnknownBuiltin(_))
        ));
        assert!(matches!(
            builtin("axis_shift", 1, json!({"axis": 1, "sign": 1})),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            builtin("axis_shift", 1, json!({"axis": 0, "sign": 2})),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            builtin("trig_poly", 2, json!({"terms": [{"freq": [1], "re": 1.0}]})),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            builtin("japanese_bracket", 1, json!({})),
            Err(Error::InvalidParams(_))
        ));
    }
}
