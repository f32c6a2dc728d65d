//! Serializable evaluation tree behind every [`Symbol`](super::Symbol).
//!
//! A node produces, for a fixed lattice point `k`, the row `x ↦ a(k,x)` on a
//! torus grid. Differences in `k` are taken on the evaluator directly, so
//! closed-form symbols lose no halo. Torus derivatives are spectral on the
//! evaluation grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::expr::Expression;
use crate::error::{Error, Result};
use crate::lattice::{japanese_bracket, norm, LatticeBox, MultiIndex};
use crate::torus::{falling_derivative_in_place, TorusFunction, TorusGrid};

/// One term `c·e^{2πi f·x}` of a trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl TrigTerm {
    pub fn new(freq: Vec<i64>, c: Complex64) -> Self {
        TrigTerm {
            freq,
            re: c.re,
            im: c.im,
        }
    }

    pub fn coefficient(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Per-k torus samples on a fixed box and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub lattice: LatticeBox,
    pub grid: TorusGrid,
    /// One row of `Mⁿ` samples per stored lattice point, in storage order.
    pub rows: Vec<Vec<Complex64>>,
}

fn default_resolution() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Node {
    Constant {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// `Λ_s(k)`.
    JapaneseBracket {
        s: f64,
    },
    /// `e^{±2πi x_axis}`.
    AxisShift {
        axis: usize,
        sign: i8,
    },
    TrigPoly {
        terms: Vec<TrigTerm>,
    },
    /// `Σⱼ 2(cos 2πxⱼ − 1)`.
    DiscreteLaplacian,
    Expr {
        expr: Expression,
    },
    Sum {
        terms: Vec<Arc<Node>>,
    },
    Product {
        factors: Vec<Arc<Node>>,
    },
    Scale {
        re: f64,
        #[serde(default)]
        im: f64,
        inner: Arc<Node>,
    },
    Conj {
        inner: Arc<Node>,
    },
    /// `Δᵅ_k` of the inner symbol.
    Difference {
        alpha: MultiIndex,
        inner: Arc<Node>,
    },
    /// `D⁽ᵝ⁾_x` of the inner symbol. `resolution` is the grid used for
    /// pointwise evaluation off the caller's grid.
    Falling {
        beta: MultiIndex,
        inner: Arc<Node>,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// `χ(|k|/R)` times the inner symbol; the inner symbol is not evaluated
    /// where the cutoff vanishes.
    Cutoff {
        radius: f64,
        inner: Arc<Node>,
    },
    /// `p̄/(|p|²+ε)`.
    RegularizedInverse {
        eps: f64,
        inner: Arc<Node>,
    },
    Tabulated {
        table: Arc<Table>,
    },
}

/// Smooth cutoff: 0 on `[0,1]`, 1 on `[2,∞)`, quintic smootherstep between.
pub fn cutoff(t: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else if t >= 2.0 {
        1.0
    } else {
        let s = t - 1.0;
        s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Node {
    pub fn constant(c: Complex64) -> Node {
        Node::Constant { re: c.re, im: c.im }
    }

    /// Whether the node is independent of the torus variable.
    pub fn is_x_independent(&self) -> bool {
        match self {
            Node::Constant { .. } | Node::JapaneseBracket { .. } => true,
            Node::AxisShift { .. } | Node::DiscreteLaplacian | Node::Tabulated { .. } => false,
            Node::TrigPoly { terms } => terms.iter().all(|t| t.freq.iter().all(|&f| f == 0)),
            Node::Expr { expr } => expr.is_x_independent(),
            Node::Sum { terms } => terms.iter().all(|t| t.is_x_independent()),
            Node::Product { factors } => factors.iter().all(|t| t.is_x_independent()),
            Node::Scale { inner, .. }
            | Node::Conj { inner }
            | Node::Difference { inner, .. }
            | Node::Falling { inner, .. }
            | Node::Cutoff { inner, .. }
            | Node::RegularizedInverse { inner, .. } => inner.is_x_independent(),
        }
    }

    /// Largest `|f|` per axis among Fourier modes of `x ↦ a(k,x)`, when the
    /// node is a trigonometric polynomial in `x` of known degree.
    pub fn trig_degree(&self) -> Option<usize> {
        match self {
            Node::Constant { .. } | Node::JapaneseBracket { .. } => Some(0),
            Node::AxisShift { .. } | Node::DiscreteLaplacian => Some(1),
            Node::TrigPoly { terms } => Some(
                terms
                    .iter()
                    .flat_map(|t| t.freq.iter().map(|f| f.unsigned_abs() as usize))
                    .max()
                    .unwrap_or(0),
            ),
            Node::Expr { expr } => expr.is_x_independent().then_some(0),
            Node::Sum { terms } => terms
                .iter()
                .map(|t| t.trig_degree())
                .try_fold(0, |a, d| d.map(|d| a.max(d))),
            Node::Product { factors } => factors
                .iter()
                .map(|t| t.trig_degree())
                .try_fold(0, |a, d| d.map(|d| a + d)),
            Node::Scale { inner, .. }
            | Node::Conj { inner }
            | Node::Difference { inner, .. }
            | Node::Falling { inner, .. }
            | Node::Cutoff { inner, .. } => inner.trig_degree(),
            Node::RegularizedInverse { inner, .. } => inner.is_x_independent().then_some(0),
            Node::Tabulated { .. } => None,
        }
    }

    /// Samples of `x ↦ a(k,x)` on `grid`.
    pub fn row(&self, k: &[i64], grid: &TorusGrid) -> Result<Vec<Complex64>> {
        let n = grid.len();
        match self {
            Node::Constant { re, im } => Ok(vec![Complex64::new(*re, *im); n]),
            Node::JapaneseBracket { s } => {
                Ok(vec![Complex64::new(japanese_bracket(k, *s), 0.0); n])
            }
            Node::Sum { terms } => {
                let mut acc = vec![zero(); n];
                for t in terms {
                    let r = t.row(k, grid)?;
                    acc.iter_mut().zip(r).for_each(|(a, b)| *a += b);
                }
                Ok(acc)
            }
            Node::Product { factors } => {
                let mut acc = vec![Complex64::new(1.0, 0.0); n];
                for t in factors {
                    let r = t.row(k, grid)?;
                    acc.iter_mut().zip(r).for_each(|(a, b)| *a *= b);
                }
                Ok(acc)
            }
            Node::Scale { re, im, inner } => {
                let c = Complex64::new(*re, *im);
                Ok(inner.row(k, grid)?.into_iter().map(|v| v * c).collect())
            }
            Node::Conj { inner } => Ok(inner.row(k, grid)?.into_iter().map(|v| v.conj()).collect()),
            Node::Difference { alpha, inner } => {
                let mut acc = vec![zero(); n];
                let total = alpha.order();
                for beta in alpha.below() {
                    let sign = if (total - beta.order()) % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let w = sign * alpha.binomial(&beta);
                    let kk: Vec<i64> = k.iter().zip(&beta.0).map(|(a, b)| a + *b as i64).collect();
                    let r = inner.row(&kk, grid)?;
                    acc.iter_mut().zip(r).for_each(|(a, b)| *a += w * b);
                }
                Ok(acc)
            }
            Node::Falling { beta, inner, .. } => {
                if !beta.is_zero() && inner.is_x_independent() {
                    return Ok(vec![zero(); n]);
                }
                let mut r = inner.row(k, grid)?;
                falling_derivative_in_place(&mut r, *grid, beta);
                Ok(r)
            }
            Node::Cutoff { radius, inner } => {
                let chi = cutoff_weight(k, *radius);
                if chi == 0.0 {
                    return Ok(vec![zero(); n]);
                }
                let r = inner.row(k, grid)?;
                Ok(r.into_iter().map(|v| v * chi).collect())
            }
            Node::RegularizedInverse { eps, inner } => Ok(inner
                .row(k, grid)?
                .into_iter()
                .map(|p| p.conj() / (p.norm_sqr() + eps))
                .collect()),
            Node::Tabulated { table } => tabulated_row(table, k, grid),
            _ => Ok((0..n)
                .map(|i| self.eval_pointwise(k, &grid.point(i)))
                .collect()),
        }
    }

    /// Value at one `(k, x)`.
    pub fn eval(&self, dim: usize, k: &[i64], x: &[f64]) -> Result<Complex64> {
        match self {
            Node::Sum { terms } => terms
                .iter()
                .try_fold(zero(), |a, t| Ok(a + t.eval(dim, k, x)?)),
            Node::Product { factors } => factors
                .iter()
                .try_fold(Complex64::new(1.0, 0.0), |a, t| Ok(a * t.eval(dim, k, x)?)),
            Node::Scale { re, im, inner } => Ok(Complex64::new(*re, *im) * inner.eval(dim, k, x)?),
            Node::Conj { inner } => Ok(inner.eval(dim, k, x)?.conj()),
            Node::Difference { alpha, inner } => {
                let total = alpha.order();
                let mut acc = zero();
                for beta in alpha.below() {
                    let sign = if (total - beta.order()) % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let kk: Vec<i64> = k.iter().zip(&beta.0).map(|(a, b)| a + *b as i64).collect();
                    acc += sign * alpha.binomial(&beta) * inner.eval(dim, &kk, x)?;
                }
                Ok(acc)
            }
            Node::Falling {
                beta,
                inner,
                resolution,
            } => {
                if beta.is_zero() {
                    return inner.eval(dim, k, x);
                }
                if inner.is_x_independent() {
                    return Ok(zero());
                }
                let grid = TorusGrid::new(dim, *resolution)?;
                let row = self.row(k, &grid)?;
                Ok(TorusFunction::new(grid, row)?.eval(x))
            }
            Node::Cutoff { radius, inner } => {
                let chi = cutoff_weight(k, *radius);
                if chi == 0.0 {
                    return Ok(zero());
                }
                Ok(chi * inner.eval(dim, k, x)?)
            }
            Node::RegularizedInverse { eps, inner } => {
                let p = inner.eval(dim, k, x)?;
                Ok(p.conj() / (p.norm_sqr() + eps))
            }
            Node::Tabulated { table } => {
                let i = table
                    .lattice
                    .index(k)
                    .ok_or_else(|| Error::OutsideTable(k.to_vec()))?;
                Ok(TorusFunction::new(table.grid, table.rows[i].clone())?.eval(x))
            }
            _ => Ok(self.eval_pointwise(k, x)),
        }
    }

    /// Leaf evaluation for nodes with closed forms.
    fn eval_pointwise(&self, k: &[i64], x: &[f64]) -> Complex64 {
        match self {
            Node::Constant { re, im } => Complex64::new(*re, *im),
            Node::JapaneseBracket { s } => Complex64::new(japanese_bracket(k, *s), 0.0),
            Node::AxisShift { axis, sign } => {
                Complex64::from_polar(1.0, 2.0 * PI * (*sign as f64) * x[*axis])
            }
            Node::TrigPoly { terms } => terms
                .iter()
                .map(|t| {
                    let ph: f64 = t.freq.iter().zip(x).map(|(&f, &xj)| f as f64 * xj).sum();
                    t.coefficient() * Complex64::from_polar(1.0, 2.0 * PI * ph)
                })
                .sum(),
            Node::DiscreteLaplacian => Complex64::new(
                x.iter()
                    .map(|&xj| 2.0 * ((2.0 * PI * xj).cos() - 1.0))
                    .sum(),
                0.0,
            ),
            Node::Expr { expr } => expr.eval(k, x),
            _ => unreachable!("composite node evaluated as a leaf"),
        }
    }
}

fn cutoff_weight(k: &[i64], radius: f64) -> f64 {
    if radius <= 0.0 {
        1.0
    } else {
        cutoff(norm(k) / radius)
    }
}

fn tabulated_row(table: &Table, k: &[i64], grid: &TorusGrid) -> Result<Vec<Complex64>> {
    let i = table
        .lattice
        .index(k)
        .ok_or_else(|| Error::OutsideTable(k.to_vec()))?;
    if table.grid == *grid {
        return Ok(table.rows[i].clone());
    }
    Ok(TorusFunction::new(table.grid, table.rows[i].clone())?
        .resample(*grid)?
        .values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5), 0.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(2.0), 1.0);
        assert_eq!(cutoff(7.0), 1.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = cutoff(1.0 + i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_skips_inner_evaluation() {
        // The inner expression is singular at k = 0; the cutoff must not touch it.
        let inner = Arc::new(Node::Expr {
            expr: Expression::parse("1/k1", 1).unwrap(),
        });
        let n = Node::Cutoff { radius: 2.0, inner };
        let g = TorusGrid::new(1, 8).unwrap();
        assert!(n.row(&[0], &g).unwrap().iter().all(|v| *v == zero()));
        assert!((n.row(&[5], &g).unwrap()[0].re - 0.2).abs() < 1e-15);
    }

    #[test]
    fn row_and_pointwise_agree() {
        let g = TorusGrid::new(1, 16).unwrap();
        let p = Arc::new(Node::Product {
            factors: vec![
                Arc::new(Node::JapaneseBracket { s: 1.0 }),
                Arc::new(Node::TrigPoly {
                    terms: vec![
                        TrigTerm::new(vec![0], Complex64::new(2.0, 0.0)),
                        TrigTerm::new(vec![1], Complex64::new(0.5, 0.0)),
                        TrigTerm::new(vec![-1], Complex64::new(0.5, 0.0)),
                    ],
                }),
            ],
        });
        let n = Node::Falling {
            beta: MultiIndex(vec![1]),
            inner: Arc::new(Node::Difference {
                alpha: MultiIndex(vec![2]),
                inner: p,
            }),
            resolution: 16,
        };
        let row = n.row(&[3], &g).unwrap();
        for (i, v) in row.iter().enumerate() {
            let w = n.eval(1, &[3], &g.point(i)).unwrap();
            assert!((v - w).norm() < 1e-12);
        }
        let off = n.eval(1, &[3], &[0.123]).unwrap();
        let d2 = japanese_bracket(&[5], 1.0) - 2.0 * japanese_bracket(&[4], 1.0)
            + japanese_bracket(&[3], 1.0);
        // D⁽¹⁾ multiplies frequency f by f.
        let want = d2
            * 0.5
            * (Complex64::from_polar(1.0, 2.0 * PI * 0.123)
                - Complex64::from_polar(1.0, -2.0 * PI * 0.123));
        assert!((off - want).norm() < 1e-12);
    }

    #[test]
    fn node_trees_serialize() {
        let n = Node::Cutoff {
            radius: 3.0,
            inner: Arc::new(Node::Conj {
                inner: Arc::new(Node::AxisShift { axis: 0, sign: 1 }),
            }),
        };
        let s = serde_json::to_string(&n).unwrap();
        let back: Node = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
    }
}
