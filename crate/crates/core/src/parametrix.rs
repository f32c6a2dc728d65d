//! Parametrices of elliptic symbols and elliptic-regularity scans.
//!
//! The parametrix starts from the excised, regularized reciprocal
//! `q₀ = χ(|k|/R) p̄/(|p|²+ε)` and applies the Neumann-type correction
//! `q_{j+1} = q_j − q₀·(q_j # p − 1)`, where `#` is the composition expansion
//! truncated at `j+2` terms. Smoothing of `QP − I` and `PQ − I` is checked as
//! boundedness of finite-section norms `H⁰ → H^t` on the high-frequency
//! interior `|k| > 2R`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::compose_symbols;
use crate::error::{Error, Result};
use crate::lattice::{japanese_bracket, norm, LatticeBox, LatticeFunction};
use crate::quantization::{
    finite_section, section_product, sobolev_norm, spectral_norm, submatrix,
};
use crate::symbol::{
    check_ellipticity, symbol_mul, symbol_sub, EllipticityCertificate, Node, Symbol, SymbolKind,
};
use crate::torus::TorusGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametrixConfig {
    /// Correction steps `J`.
    pub steps: usize,
    /// Excision radius `R`.
    pub radius: f64,
    /// Regularizer; `0` selects the fallback rule.
    pub eps: f64,
    /// Smoothing orders `t` to measure.
    pub orders: Vec<f64>,
    /// Box for the residual sections; also the ellipticity scan radius.
    pub lattice: LatticeBox,
    pub grid: TorusGrid,
    pub margin: usize,
    /// Extra layers for the middle index of products.
    pub pad: usize,
    pub c_min: f64,
}

impl ParametrixConfig {
    pub fn new(lattice: LatticeBox, grid: TorusGrid) -> Self {
        ParametrixConfig {
            steps: 3,
            radius: 4.0,
            eps: 0.0,
            orders: vec![0.0, 1.0, 2.0],
            lattice,
            grid,
            margin: 6,
            pad: 6,
            c_min: crate::symbol::DEFAULT_C_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    /// Correction step `j` the row was measured at.
    pub step: usize,
    pub t: f64,
    /// `‖QP − I‖_{H⁰→H^t}` on the high-frequency interior.
    pub qp: f64,
    /// `‖PQ − I‖_{H⁰→H^t}` on the high-frequency interior.
    pub pq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametrixResult {
    pub q: Symbol,
    /// Every iterate `q_0..q_J`.
    pub iterates: Vec<Symbol>,
    pub steps: usize,
    pub radius: f64,
    /// Regularizer actually used.
    pub eps: f64,
    pub certificate: EllipticityCertificate,
    /// Residual norms for every step and order.
    pub residuals: Vec<ResidualRow>,
}

impl ParametrixResult {
    /// Rows measured at the final step.
    pub fn final_rows(&self) -> Vec<&ResidualRow> {
        self.residuals
            .iter()
            .filter(|r| r.step == self.steps)
            .collect()
    }

    /// `(step, t, qp, pq)` table.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "t", "qp", "pq"])?;
        for r in &self.residuals {
            w.write_record([
                r.step.to_string(),
                r.t.to_string(),
                r.qp.to_string(),
                r.pq.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Build `q ∈ S^{−m}` with `QP ≈ I ≈ PQ` modulo smoothing operators.
pub fn build_parametrix(p: &Symbol, cfg: &ParametrixConfig) -> Result<ParametrixResult> {
    p.check_dim(cfg.lattice.dim)?;
    if cfg.radius <= 0.0 {
        return Err(Error::InvalidParams(
            "excision radius must be positive".into(),
        ));
    }
    let certificate = check_ellipticity(p, cfg.radius, cfg.lattice.radius, &cfg.grid, cfg.c_min)?;
    if !certificate.passed {
        return Err(Error::NotElliptic {
            label: p.label.clone(),
            constant: certificate.constant,
            threshold: cfg.c_min,
        });
    }
    let eps = if cfg.eps > 0.0 {
        cfg.eps
    } else if certificate.constant > 0.0 {
        0.0
    } else {
        1e-12 * p_scale(p, cfg)?
    };

    let dim = p.dim;
    let q0 = Symbol::new(
        dim,
        -p.order,
        SymbolKind::Derived,
        format!("q0[{}]", p.label),
        Node::RegularizedInverse {
            eps,
            inner: p.root.clone(),
        },
    )
    .excise(cfg.radius)
    .with_label(format!("q0[{}]", p.label));
    let one = Symbol::constant(dim, Complex64::new(1.0, 0.0));
    let mut iterates = vec![q0.clone()];
    for j in 0..cfg.steps {
        let qj = iterates.last().unwrap();
        let c = compose_symbols(qj, p, j + 2)?;
        let defect = symbol_sub(&c.symbol, &one)?;
        let next = symbol_sub(qj, &symbol_mul(&q0, &defect)?)?
            .with_order(-p.order)
            .with_label(format!("q{}[{}]", j + 1, p.label));
        iterates.push(next);
    }

    let mut residuals = Vec::new();
    for (step, q) in iterates.iter().enumerate() {
        for row in residual_rows(p, q, cfg)? {
            residuals.push(ResidualRow { step, ..row });
        }
    }
    Ok(ParametrixResult {
        q: iterates.last().unwrap().clone(),
        iterates,
        steps: cfg.steps,
        radius: cfg.radius,
        eps,
        certificate,
        residuals,
    })
}

fn p_scale(p: &Symbol, cfg: &ParametrixConfig) -> Result<f64> {
    let mut s: f64 = 0.0;
    for k in cfg.lattice.points() {
        for v in p.row(&k, &cfg.grid)? {
            s = s.max(v.norm_sqr());
        }
    }
    Ok(s)
}

/// Interior indices (margin) with `|k| > 2R`.
pub fn high_frequency_indices(lattice: &LatticeBox, margin: usize, radius: f64) -> Vec<usize> {
    (0..lattice.len())
        .filter(|&i| {
            let k = lattice.point(i);
            lattice.within_margin(&k, margin) && norm(&k) > 2.0 * radius
        })
        .collect()
}

/// `H⁰ → H^t` norms of `QP − I` and `PQ − I` on the high-frequency interior.
pub fn residual_rows(p: &Symbol, q: &Symbol, cfg: &ParametrixConfig) -> Result<Vec<ResidualRow>> {
    let lat = cfg.lattice.interior();
    let n = lat.len();
    let eye = DMatrix::<Complex64>::identity(n, n);
    let qp = section_product(q, p, &lat, &cfg.grid, cfg.pad)? - &eye;
    let pq = section_product(p, q, &lat, &cfg.grid, cfg.pad)? - &eye;
    let idx = high_frequency_indices(&lat, cfg.margin, cfg.radius);
    let qp = submatrix(&qp, &idx, &idx);
    let pq = submatrix(&pq, &idx, &idx);
    Ok(cfg
        .orders
        .iter()
        .map(|&t| {
            let w: Vec<f64> = idx
                .iter()
                .map(|&i| japanese_bracket(&lat.point(i), t))
                .collect();
            let scale = |m: &DMatrix<Complex64>| {
                DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * w[i])
            };
            ResidualRow {
                step: 0,
                t,
                qp: spectral_norm(&scale(&qp)),
                pq: spectral_norm(&scale(&pq)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub radius: usize,
    pub singular: bool,
    /// `‖u‖_{H^{s+m}}`.
    pub norm: f64,
    /// `‖u‖_{H^{s+m+1}}`.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub s: f64,
    pub order: f64,
    pub rows: Vec<RegularityRow>,
}

impl RegularityReport {
    /// Relative change of `‖u‖_{H^{s+m}}` between the last two radii.
    pub fn plateau_change(&self) -> Option<f64> {
        rel_change(self.rows.iter().map(|r| r.norm))
    }

    /// Relative change of `‖u‖_{H^{s+m+1}}` between the last two radii.
    pub fn contrast_change(&self) -> Option<f64> {
        rel_change(self.rows.iter().map(|r| r.contrast))
    }

    pub fn any_singular(&self) -> bool {
        self.rows.iter().any(|r| r.singular)
    }
}

fn rel_change(it: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = it.collect();
    if v.len() < 2 {
        return None;
    }
    let (a, b) = (v[v.len() - 2], v[v.len() - 1]);
    Some((b - a).abs() / a.abs().max(f64::MIN_POSITIVE))
}

/// Solve the finite sections `A u = f` on growing boxes and track
/// `‖u‖_{H^{s+m}}` (expected to plateau) and `‖u‖_{H^{s+m+1}}` (contrast).
/// `f` is restricted to (or zero-extended onto) each box.
pub fn elliptic_regularity_experiment(
    a: &Symbol,
    f: &LatticeFunction,
    s: f64,
    radii: &[usize],
    grid: &TorusGrid,
) -> Result<RegularityReport> {
    a.check_dim(f.lattice.dim)?;
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(
            "box radii must increase strictly".into(),
        ));
    }
    let m = a.order;
    let rows = crate::par::try_map(radii.len(), |i| -> Result<RegularityRow> {
        let lat = LatticeBox::new(a.dim, radii[i], 0)?;
        let sec = finite_section(a, &lat, grid, s + m, s)?;
        let rhs = LatticeFunction::from_fn(lat, |k| f.get(k).unwrap_or_default());
        let lu = sec.matrix.clone().lu();
        let diag = lu.u().diagonal();
        let top = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let low = diag.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        let solved = if low <= 1e-14 * top {
            None
        } else {
            lu.solve(&DVector::from_vec(rhs.values.clone()))
        };
        Ok(match solved {
            Some(x) => {
                let u = LatticeFunction::from_values(lat, x.iter().copied().collect())?;
                RegularityRow {
                    radius: radii[i],
                    singular: false,
                    norm: sobolev_norm(&u, s + m),
                    contrast: sobolev_norm(&u, s + m + 1.0),
                }
            }
            None => RegularityRow {
                radius: radii[i],
                singular: true,
                norm: f64::NAN,
                contrast: f64::NAN,
            },
        })
    })?;
    Ok(RegularityReport { s, order: m, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin_symbol, Builtin};

    fn sym(b: Builtin) -> Symbol {
        builtin_symbol(1, &b).unwrap()
    }

    fn cfg(n: usize) -> ParametrixConfig {
        let mut c = ParametrixConfig::new(
            LatticeBox::new(1, n, 0).unwrap(),
            TorusGrid::new(1, 128).unwrap(),
        );
        c.steps = 2;
        c
    }

    #[test]
    fn diagonal_symbol_inverts_exactly() {
        let p = sym(Builtin::JapaneseBracket { s: 1.5 });
        let r = build_parametrix(&p, &cfg(24)).unwrap();
        assert_eq!(r.q.order, -1.5);
        assert_eq!(r.eps, 0.0);
        for row in &r.residuals {
            assert!(row.qp < 1e-8 && row.pq < 1e-8, "{row:?}");
        }
        for k in 9..=20i64 {
            let v = r.q.eval(&[k], &[0.3]).unwrap();
            assert!((v.re - japanese_bracket(&[k], -1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn non_elliptic_symbols_are_refused() {
        let p = sym(Builtin::DiscreteLaplacian);
        assert!(matches!(
            build_parametrix(&p, &cfg(16)),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn demo_residual_improves_with_steps() {
        let p = sym(Builtin::EllipticDemo { m: 1.0 });
        let r = build_parametrix(&p, &cfg(24)).unwrap();
        for t in [0.0, 1.0, 2.0] {
            let seq: Vec<&ResidualRow> = r.residuals.iter().filter(|x| x.t == t).collect();
            for w in seq.windows(2) {
                assert!(w[1].qp <= 1.1 * w[0].qp, "t = {t}: {:?}", w);
                assert!(w[1].pq <= 1.1 * w[0].pq, "t = {t}: {:?}", w);
            }
            let last = seq.last().unwrap();
            assert!(last.qp <= 4.0 * last.pq && last.pq <= 4.0 * last.qp);
        }
    }

    #[test]
    fn regularity_scans() {
        let g = TorusGrid::new(1, 128).unwrap();
        let big = LatticeBox::new(1, 32, 0).unwrap();
        let p = sym(Builtin::JapaneseBracket { s: 2.0 });
        let d0 = LatticeFunction::delta(big, &[0]).unwrap();
        let r = elliptic_regularity_experiment(&p, &d0, 0.7, &[8, 16], &g).unwrap();
        for row in &r.rows {
            assert!((row.norm - 1.0).abs() < 1e-13 && (row.contrast - 1.0).abs() < 1e-13);
        }

        let a = sym(Builtin::EllipticDemo { m: 1.0 });
        let tail =
            LatticeFunction::from_fn(big, |k| Complex64::new((1.0 + norm(k)).powf(-1.5), 0.0));
        let r = elliptic_regularity_experiment(&a, &tail, 0.0, &[8, 16, 32], &g).unwrap();
        assert!(!r.any_singular());
        assert!(r.plateau_change().unwrap() < 0.02);
        assert!(r.contrast_change().unwrap() > 5.0 * r.plateau_change().unwrap());

        let zero = Symbol::constant(1, Complex64::new(0.0, 0.0));
        let r = elliptic_regularity_experiment(&zero, &d0, 0.0, &[4, 6], &g).unwrap();
        assert!(r.any_singular() && r.rows[1].norm.is_nan());
    }
}
