//! Symbols `a(k,x)` on `ℤⁿ×𝕋ⁿ` with a declared order.

mod builtin;
mod classes;
mod expr;
mod node;
mod spec;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use builtin::{builtin, builtin_symbol, Builtin};
pub use classes::{
    check_ellipticity, estimate_seminorm, EllipticityCertificate, SeminormReport, DEFAULT_C_MIN,
    DEFAULT_SLACK,
};
pub use expr::Expression;
pub use node::{cutoff, Node, Table, TrigTerm};
pub use spec::SymbolSpec;

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, MultiIndex};
use crate::par;
use crate::torus::{TorusFunction, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    ClosedForm,
    Tabulated,
    /// Output of an expansion or construction; the recipe is the node tree.
    Derived,
}

/// Optional facts attached to a symbol. Constants are scan estimates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elliptic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipticity_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    pub dim: usize,
    pub order: f64,
    pub kind: SymbolKind,
    pub label: String,
    pub root: Arc<Node>,
    #[serde(default)]
    pub metadata: Metadata,
}

impl Symbol {
    pub fn new(
        dim: usize,
        order: f64,
        kind: SymbolKind,
        label: impl Into<String>,
        root: Node,
    ) -> Self {
        Symbol {
            dim,
            order,
            kind,
            label: label.into(),
            root: Arc::new(root),
            metadata: Metadata::default(),
        }
    }

    fn derived(dim: usize, order: f64, label: String, root: Node) -> Self {
        Symbol::new(dim, order, SymbolKind::Derived, label, root)
    }

    /// The constant symbol `c`, order 0.
    pub fn constant(dim: usize, c: Complex64) -> Self {
        Symbol::new(
            dim,
            0.0,
            SymbolKind::ClosedForm,
            format!("{c}"),
            Node::constant(c),
        )
    }

    /// Parse a closed-form expression with declared order.
    pub fn expression(dim: usize, order: f64, source: &str) -> Result<Self> {
        let expr = Expression::parse(source, dim)?;
        Ok(Symbol::new(
            dim,
            order,
            SymbolKind::ClosedForm,
            source,
            Node::Expr { expr },
        ))
    }

    /// Tabulate the symbol on every stored point of `lattice`.
    pub fn tabulate(&self, lattice: LatticeBox, grid: TorusGrid) -> Result<Symbol> {
        self.check_dim(lattice.dim)?;
        let rows = par::try_map(lattice.len(), |i| self.row(&lattice.point(i), &grid))?;
        let table = Table {
            lattice,
            grid,
            rows,
        };
        Ok(Symbol {
            kind: SymbolKind::Tabulated,
            root: Arc::new(Node::Tabulated {
                table: Arc::new(table),
            }),
            ..self.clone()
        })
    }

    /// The same evaluator re-declared at another order.
    pub fn with_order(&self, order: f64) -> Symbol {
        Symbol {
            order,
            ..self.clone()
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Symbol {
        self.label = label.into();
        self
    }

    pub fn is_x_independent(&self) -> bool {
        self.root.is_x_independent()
    }

    pub fn trig_degree(&self) -> Option<usize> {
        self.root.trig_degree()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: dim,
            });
        }
        Ok(())
    }

    /// Samples of `x ↦ a(k,x)` on `grid`.
    pub fn row(&self, k: &[i64], grid: &TorusGrid) -> Result<Vec<Complex64>> {
        self.check_dim(k.len())?;
        self.check_dim(grid.dim)?;
        let r = self.root.row(k, grid)?;
        if r.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(k.to_vec()));
        }
        Ok(r)
    }

    pub fn torus_function(&self, k: &[i64], grid: &TorusGrid) -> Result<TorusFunction> {
        TorusFunction::new(*grid, self.row(k, grid)?)
    }

    /// `a(k,x)` at a single point.
    pub fn eval(&self, k: &[i64], x: &[f64]) -> Result<Complex64> {
        self.check_dim(k.len())?;
        self.check_dim(x.len())?;
        self.root.eval(self.dim, k, x)
    }

    pub fn conj(&self) -> Symbol {
        Symbol::derived(
            self.dim,
            self.order,
            format!("conj({})", self.label),
            Node::Conj {
                inner: self.root.clone(),
            },
        )
    }

    pub fn scale(&self, c: Complex64) -> Symbol {
        Symbol::derived(
            self.dim,
            self.order,
            format!("{c}*({})", self.label),
            Node::Scale {
                re: c.re,
                im: c.im,
                inner: self.root.clone(),
            },
        )
    }

    /// `Δᵅ_k a`, declared order `m − |α|`.
    pub fn difference(&self, alpha: &MultiIndex) -> Result<Symbol> {
        self.check_dim(alpha.dim())?;
        if alpha.is_zero() {
            return Ok(self.clone());
        }
        Ok(Symbol::derived(
            self.dim,
            self.order - alpha.order() as f64,
            format!("Δ^{:?}({})", alpha.0, self.label),
            Node::Difference {
                alpha: alpha.clone(),
                inner: self.root.clone(),
            },
        ))
    }

    /// `D⁽ᵝ⁾_x a`, same declared order.
    pub fn falling(&self, beta: &MultiIndex) -> Result<Symbol> {
        self.check_dim(beta.dim())?;
        if beta.is_zero() {
            return Ok(self.clone());
        }
        Ok(Symbol::derived(
            self.dim,
            self.order,
            format!("D^{:?}({})", beta.0, self.label),
            Node::Falling {
                beta: beta.clone(),
                inner: self.root.clone(),
                resolution: 64,
            },
        ))
    }

    /// `χ(|k|/R)·a`.
    pub fn excise(&self, radius: f64) -> Symbol {
        Symbol::derived(
            self.dim,
            self.order,
            format!("χ(|k|/{radius})·{}", self.label),
            Node::Cutoff {
                radius,
                inner: self.root.clone(),
            },
        )
    }
}

/// Pointwise sum, declared order `max(m₁, m₂)`.
pub fn symbol_add(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.check_dim(b.dim)?;
    Ok(Symbol::derived(
        a.dim,
        a.order.max(b.order),
        format!("({})+({})", a.label, b.label),
        Node::Sum {
            terms: vec![a.root.clone(), b.root.clone()],
        },
    ))
}

/// Pointwise difference, declared order `max(m₁, m₂)`.
pub fn symbol_sub(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.check_dim(b.dim)?;
    let neg = Arc::new(Node::Scale {
        re: -1.0,
        im: 0.0,
        inner: b.root.clone(),
    });
    Ok(Symbol::derived(
        a.dim,
        a.order.max(b.order),
        format!("({})-({})", a.label, b.label),
        Node::Sum {
            terms: vec![a.root.clone(), neg],
        },
    ))
}

/// Pointwise product, declared order `m₁ + m₂`.
pub fn symbol_mul(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.check_dim(b.dim)?;
    Ok(Symbol::derived(
        a.dim,
        a.order + b.order,
        format!("({})*({})", a.label, b.label),
        Node::Product {
            factors: vec![a.root.clone(), b.root.clone()],
        },
    ))
}

/// Sum of many symbols, declared order the maximum.
pub fn symbol_sum(parts: &[Symbol]) -> Result<Symbol> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParams("empty symbol sum".into()))?;
    for p in parts {
        first.check_dim(p.dim)?;
    }
    Ok(Symbol::derived(
        first.dim,
        parts
            .iter()
            .map(|p| p.order)
            .fold(f64::NEG_INFINITY, f64::max),
        parts
            .iter()
            .map(|p| p.label.as_str())
            .collect::<Vec<_>>()
            .join(" + "),
        Node::Sum {
            terms: parts.iter().map(|p| p.root.clone()).collect(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::japanese_bracket;

    fn jb(s: f64) -> Symbol {
        builtin_symbol(1, &Builtin::JapaneseBracket { s }).unwrap()
    }

    #[test]
    fn product_of_brackets_adds_exponents() {
        let p = symbol_mul(&jb(1.5), &jb(-0.7)).unwrap();
        assert!((p.order - 0.8).abs() < 1e-15);
        for k in -5..=5 {
            let v = p.eval(&[k], &[0.3]).unwrap();
            assert!((v.re - japanese_bracket(&[k], 0.8)).abs() < 1e-13);
        }
    }

    #[test]
    fn adding_zero_and_order_bookkeeping() {
        let a = builtin_symbol(1, &Builtin::EllipticDemo { m: 1.0 }).unwrap();
        let z = Symbol::constant(1, Complex64::new(0.0, 0.0));
        let s = symbol_add(&a, &z).unwrap();
        for k in -3..=3 {
            for &x in &[0.0, 0.2, 0.7] {
                assert_eq!(s.eval(&[k], &[x]).unwrap(), a.eval(&[k], &[x]).unwrap());
            }
        }
        let sh = builtin_symbol(1, &Builtin::AxisShift { axis: 0, sign: 1 }).unwrap();
        assert_eq!(symbol_mul(&jb(1.0), &sh).unwrap().order, 1.0);
        assert_eq!(symbol_add(&jb(1.0), &sh).unwrap().order, 1.0);
        assert!(symbol_add(
            &jb(1.0),
            &builtin_symbol(2, &Builtin::DiscreteLaplacian).unwrap()
        )
        .is_err());
    }

    #[test]
    fn tabulated_symbols_match_and_refuse_outside() {
        let a = builtin_symbol(1, &Builtin::EllipticDemo { m: 1.0 }).unwrap();
        let g = TorusGrid::new(1, 16).unwrap();
        let t = a.tabulate(LatticeBox::new(1, 4, 2).unwrap(), g).unwrap();
        assert_eq!(t.kind, SymbolKind::Tabulated);
        let g2 = TorusGrid::new(1, 24).unwrap();
        for k in -6..=6 {
            let r1 = a.row(&[k], &g2).unwrap();
            let r2 = t.row(&[k], &g2).unwrap();
            assert!(r1.iter().zip(&r2).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        assert!(matches!(t.row(&[7], &g), Err(Error::OutsideTable(_))));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let s = Symbol::expression(1, 0.0, "1/k1").unwrap();
        let g = TorusGrid::new(1, 4).unwrap();
        assert!(matches!(s.row(&[0], &g), Err(Error::NonFinite(_))));
    }
}
