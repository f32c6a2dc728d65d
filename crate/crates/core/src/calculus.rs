//! Composition and adjoint expansions, asymptotic sums and remainder probes.
//!
//! On the lattice the composition expansion puts torus derivatives on the
//! left factor and differences on the right one:
//! `c ~ Σ_α (1/α!) D⁽ᵅ⁾_x a · Δᵅ_k b`. The adjoint expansion is
//! `a* ~ Σ_α (1/α!) Δᵅ_k D⁽ᵅ⁾_x ā`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::slope;
use crate::lattice::{norm, MultiIndex};
use crate::quantization::{finite_section, interior_indices, FiniteSectionOperator};
use crate::symbol::{estimate_seminorm, symbol_mul, symbol_sum, Symbol};
use crate::torus::TorusGrid;

/// Default number of expansion terms.
pub const DEFAULT_TERMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub alpha: MultiIndex,
    pub symbol: Symbol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    /// Truncated sum over `|α| < n_terms`.
    pub symbol: Symbol,
    pub n_terms: usize,
    pub claimed_remainder_order: f64,
    /// Non-vanishing terms in order of `|α|`.
    pub terms: Vec<ExpansionTerm>,
}

impl ExpansionResult {
    /// Terms with `|α| = n_terms − 1`.
    pub fn last_terms(&self) -> Vec<&ExpansionTerm> {
        let top = self.n_terms.saturating_sub(1);
        self.terms
            .iter()
            .filter(|t| t.alpha.order() == top)
            .collect()
    }
}

fn check_terms(n_terms: usize) -> Result<()> {
    if n_terms == 0 {
        return Err(Error::InvalidParams(
            "expansion needs at least one term".into(),
        ));
    }
    Ok(())
}

fn finish(
    dim: usize,
    order: f64,
    n_terms: usize,
    claimed: f64,
    label: String,
    terms: Vec<ExpansionTerm>,
) -> Result<ExpansionResult> {
    let parts: Vec<Symbol> = terms.iter().map(|t| t.symbol.clone()).collect();
    let symbol = if parts.len() == 1 {
        parts[0].clone()
    } else {
        symbol_sum(&parts)?
    };
    let mut symbol = symbol.with_order(order).with_label(label);
    symbol.kind = crate::symbol::SymbolKind::Derived;
    debug_assert_eq!(symbol.dim, dim);
    Ok(ExpansionResult {
        symbol,
        n_terms,
        claimed_remainder_order: claimed,
        terms,
    })
}

/// Truncated composition expansion `Σ_{|α|<N} (1/α!) D⁽ᵅ⁾a · Δᵅb`.
pub fn compose_symbols(a: &Symbol, b: &Symbol, n_terms: usize) -> Result<ExpansionResult> {
    a.check_dim(b.dim)?;
    check_terms(n_terms)?;
    let a_const = a.is_x_independent();
    let mut terms = Vec::new();
    for alpha in MultiIndex::all_below_order(a.dim, n_terms) {
        if a_const && !alpha.is_zero() {
            continue;
        }
        let t = symbol_mul(&a.falling(&alpha)?, &b.difference(&alpha)?)?;
        let t = t.scale(Complex64::new(1.0 / alpha.factorial(), 0.0));
        terms.push(ExpansionTerm { alpha, symbol: t });
    }
    finish(
        a.dim,
        a.order + b.order,
        n_terms,
        a.order + b.order - n_terms as f64,
        format!("({})#({})[{n_terms}]", a.label, b.label),
        terms,
    )
}

/// Truncated adjoint expansion `Σ_{|α|<N} (1/α!) Δᵅ D⁽ᵅ⁾ ā`.
pub fn adjoint_symbol(a: &Symbol, n_terms: usize) -> Result<ExpansionResult> {
    check_terms(n_terms)?;
    let abar = a.conj();
    let a_const = a.is_x_independent();
    let mut terms = Vec::new();
    for alpha in MultiIndex::all_below_order(a.dim, n_terms) {
        if a_const && !alpha.is_zero() {
            continue;
        }
        let t = abar.falling(&alpha)?.difference(&alpha)?;
        let t = t.scale(Complex64::new(1.0 / alpha.factorial(), 0.0));
        terms.push(ExpansionTerm { alpha, symbol: t });
    }
    finish(
        a.dim,
        a.order,
        n_terms,
        a.order - n_terms as f64,
        format!("({})*[{n_terms}]", a.label),
        terms,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSum {
    pub symbol: Symbol,
    /// Excision radii actually used, one per term.
    pub radii: Vec<f64>,
    /// Scanned `(0,0)` seminorm of each excised term at the leading order.
    pub contributions: Vec<f64>,
}

/// `Σ_j χ(|k|/R_j) a_j` with radii enlarged (doubling) until term `j`
/// (0-based) contributes at most `2^{-j}` of the first term's scanned
/// seminorm at the leading order.
pub fn asymptotic_sum(
    symbols: &[Symbol],
    radii: &[f64],
    grid: &TorusGrid,
    scan_radius: usize,
) -> Result<AsymptoticSum> {
    if symbols.is_empty() {
        return Err(Error::InvalidParams("asymptotic sum of no symbols".into()));
    }
    if radii.len() != symbols.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} symbols but {} excision radii",
            symbols.len(),
            radii.len()
        )));
    }
    for w in symbols.windows(2) {
        w[0].check_dim(w[1].dim)?;
        if w[1].order >= w[0].order {
            return Err(Error::NonDecreasingOrders {
                prev: w[0].order,
                next: w[1].order,
            });
        }
    }
    if radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(Error::InvalidParams(
            "excision radii must be positive".into(),
        ));
    }
    let lead = symbols[0].order;
    let z = MultiIndex::zero(symbols[0].dim);
    let contribution = |s: &Symbol, r: f64| -> Result<f64> {
        Ok(estimate_seminorm(&s.excise(r).with_order(lead), &z, &z, scan_radius, grid)?.constant)
    };
    let mut used = Vec::with_capacity(radii.len());
    let mut contributions = Vec::with_capacity(radii.len());
    let mut parts = Vec::with_capacity(radii.len());
    let mut first = 0.0;
    for (j, (s, &r0)) in symbols.iter().zip(radii).enumerate() {
        let mut r = used.last().map_or(r0, |&p: &f64| r0.max(p));
        let mut c = contribution(s, r)?;
        if j == 0 {
            first = c;
        } else {
            let budget = first * 0.5f64.powi(j as i32);
            let mut tries = 0;
            while c > budget && tries < 40 {
                r *= 2.0;
                c = contribution(s, r)?;
                tries += 1;
            }
        }
        used.push(r);
        contributions.push(c);
        parts.push(s.excise(r));
    }
    let symbol = symbol_sum(&parts)?
        .with_order(lead)
        .with_label(format!("asymptotic sum of {} terms", symbols.len()));
    Ok(AsymptoticSum {
        symbol,
        radii: used,
        contributions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub shell: usize,
    pub residual: f64,
    /// `(1+ρ)^{claimed order}`.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub claimed_order: f64,
    pub shells: Vec<ShellRow>,
    /// Slope of `log residual` against `log(1+ρ)` over the upper half of the
    /// interior shells; `None` when the residual vanishes there.
    pub fitted_exponent: Option<f64>,
    /// Largest shell residual.
    pub max_residual: f64,
    /// `max_ρ residual(ρ) / (1+ρ)^{order}` for each tested order.
    pub budget_ratios: Vec<(f64, f64)>,
}

impl DecayReport {
    /// `max_ρ residual(ρ)/(1+ρ)^{claimed}`.
    pub fn residual_norm(&self) -> f64 {
        self.shells
            .iter()
            .map(|r| r.residual / r.reference)
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["shell", "residual", "reference"])?;
        for r in &self.shells {
            w.write_record([
                r.shell.to_string(),
                r.residual.to_string(),
                r.reference.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shell profile of a residual matrix: for each `ρ = round(|k|)` over rows at
/// least `margin` inside the box, the largest row ℓ² norm (all columns).
pub fn shell_profile(
    residual: &DMatrix<Complex64>,
    op: &FiniteSectionOperator,
) -> Vec<(usize, f64)> {
    let rows = interior_indices(&op.lattice, op.margin);
    let top = op.lattice.radius.saturating_sub(op.margin);
    let mut shells =
        vec![0.0f64; (top as f64 * (op.lattice.dim as f64).sqrt()).round() as usize + 1];
    for i in rows {
        let k = op.lattice.point(i);
        let rho = norm(&k).round() as usize;
        let r = residual
            .row(i)
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        shells[rho] = shells[rho].max(r);
    }
    shells.into_iter().enumerate().collect()
}

/// Fit window shared by the probes: shells `ρ ∈ [r/2, r]`, `r = N − margin`.
pub fn fit_exponent(profile: &[(usize, f64)], top: usize) -> Option<f64> {
    let lo = top.div_ceil(2).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile
        .iter()
        .filter(|(r, v)| *r >= lo && *r <= top && *v > 1e-300)
        .map(|(r, v)| ((1.0 + *r as f64).ln(), v.ln()))
        .unzip();
    (xs.len() >= 2).then(|| slope(&xs, &ys))
}

/// Compare `exact_op` against the section of `expansion.symbol` shell by shell.
pub fn remainder_order_probe(
    exact_op: &FiniteSectionOperator,
    expansion: &ExpansionResult,
    grid: &TorusGrid,
    orders: &[f64],
) -> Result<DecayReport> {
    let approx = finite_section(
        &expansion.symbol,
        &exact_op.lattice,
        grid,
        exact_op.source.s,
        exact_op.target.s,
    )?;
    let residual = &exact_op.matrix - &approx.matrix;
    let profile = shell_profile(&residual, exact_op);
    let top = exact_op.lattice.radius.saturating_sub(exact_op.margin);
    let claimed = expansion.claimed_remainder_order;
    let shells: Vec<ShellRow> = profile
        .iter()
        .map(|&(shell, residual)| ShellRow {
            shell,
            residual,
            reference: (1.0 + shell as f64).powf(claimed),
        })
        .collect();
    let budget_ratios = orders
        .iter()
        .map(|&m| {
            let r = shells
                .iter()
                .map(|s| s.residual / (1.0 + s.shell as f64).powf(m))
                .fold(0.0, f64::max);
            (m, r)
        })
        .collect();
    Ok(DecayReport {
        claimed_order: claimed,
        fitted_exponent: fit_exponent(&profile, top),
        max_residual: profile.iter().map(|p| p.1).fold(0.0, f64::max),
        shells,
        budget_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{japanese_bracket, LatticeBox};
    use crate::quantization::{section_product, spectral_norm, submatrix};
    use crate::symbol::{builtin_symbol, Builtin, TrigTerm};

    fn sym(b: Builtin) -> Symbol {
        builtin_symbol(1, &b).unwrap()
    }

    fn setup() -> (LatticeBox, TorusGrid) {
        (
            LatticeBox::new(1, 24, 0).unwrap(),
            TorusGrid::new(1, 128).unwrap(),
        )
    }

    #[test]
    fn x_independent_composition_is_exact() {
        let a = sym(Builtin::JapaneseBracket { s: 1.0 });
        let b = sym(Builtin::JapaneseBracket { s: -2.5 });
        let c = compose_symbols(&a, &b, 3).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert_eq!(c.symbol.order, -1.5);
        assert_eq!(c.claimed_remainder_order, -4.5);
        for k in -10..=10 {
            let v = c.symbol.eval(&[k], &[0.4]).unwrap();
            assert!((v.re - japanese_bracket(&[k], -1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_after_multiplier_terminates() {
        let (lat, g) = setup();
        let a = sym(Builtin::AxisShift { axis: 0, sign: 1 });
        let b = sym(Builtin::JapaneseBracket { s: 1.0 });
        let c2 = compose_symbols(&a, &b, 2).unwrap();
        let c5 = compose_symbols(&a, &b, 5).unwrap();
        for k in -6..=6i64 {
            for &x in &[0.0, 0.31, 0.77] {
                let want = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x)
                    * japanese_bracket(&[k + 1], 1.0);
                assert!((c2.symbol.eval(&[k], &[x]).unwrap() - want).norm() < 1e-12);
                assert!((c5.symbol.eval(&[k], &[x]).unwrap() - want).norm() < 1e-12);
            }
        }
        let exact = section_product(&a, &b, &lat, &g, 2).unwrap();
        let approx = finite_section(&c2.symbol, &lat, &g, 0.0, 0.0).unwrap();
        let diff = &exact - &approx.matrix;
        // Only the last row sees the truncation of T_b.
        let rows: Vec<usize> = (0..lat.len() - 1).collect();
        let cols: Vec<usize> = (0..lat.len()).collect();
        assert!(spectral_norm(&submatrix(&diff, &rows, &cols)) < 1e-11);
    }

    #[test]
    fn composition_converges_with_terms() {
        let (lat, g) = setup();
        let a = sym(Builtin::EllipticDemo { m: 1.0 });
        let b = sym(Builtin::Perturbed {
            m: 1.0,
            terms: vec![TrigTerm::new(vec![2], Complex64::new(0.3, 0.1))],
        });
        let exact = section_product(&a, &b, &lat, &g, 4).unwrap();
        // Forward-difference series degrade for negative k near the origin;
        // stay at |k| ≥ 12.
        let op = FiniteSectionOperator::new(lat, exact, 0.0, 0.0)
            .unwrap()
            .with_margin(4);
        let rows: Vec<usize> = op
            .interior_indices()
            .into_iter()
            .filter(|&i| lat.point(i)[0].abs() >= 12)
            .collect();
        let mut prev = f64::INFINITY;
        for n in 1..=5 {
            let c = compose_symbols(&a, &b, n).unwrap();
            let s = finite_section(&c.symbol, &lat, &g, 0.0, 0.0).unwrap();
            let r = spectral_norm(&submatrix(&(&op.matrix - &s.matrix), &rows, &rows));
            assert!(r < prev, "n = {n}: {r} ≥ {prev}");
            prev = r;
        }
    }

    #[test]
    fn adjoint_examples() {
        let (lat, g) = setup();
        let jb = sym(Builtin::JapaneseBracket { s: 1.5 });
        let q = adjoint_symbol(&jb, 4).unwrap();
        for k in -8..=8 {
            assert_eq!(
                q.symbol.eval(&[k], &[0.2]).unwrap(),
                jb.eval(&[k], &[0.2]).unwrap()
            );
        }
        let sh = sym(Builtin::AxisShift { axis: 0, sign: 1 });
        let q = adjoint_symbol(&sh, 4).unwrap();
        let p = finite_section(&sh, &lat, &g, 0.0, 0.0).unwrap();
        let qs = finite_section(&q.symbol, &lat, &g, 0.0, 0.0).unwrap();
        let d = &qs.matrix - p.matrix.adjoint();
        assert!(d.iter().all(|v| v.norm() < 1e-13));

        // Λ₁e^{2πix}: the expansion approaches the conjugate transpose.
        let a = symbol_mul(&sym(Builtin::JapaneseBracket { s: 1.0 }), &sh).unwrap();
        let p = finite_section(&a, &lat, &g, 0.0, 0.0).unwrap();
        let rows: Vec<usize> = (0..lat.len())
            .filter(|&i| lat.point(i)[0].abs() >= 12 && lat.point(i)[0].abs() <= 20)
            .collect();
        let mut prev = f64::INFINITY;
        for n in 1..=5 {
            let q = adjoint_symbol(&a, n).unwrap();
            let qs = finite_section(&q.symbol, &lat, &g, 0.0, 0.0).unwrap();
            let r = spectral_norm(&submatrix(&(&qs.matrix - p.matrix.adjoint()), &rows, &rows));
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn asymptotic_sum_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let one = asymptotic_sum(&[sym(Builtin::EllipticDemo { m: 1.0 })], &[3.0], &g, 32).unwrap();
        let a = sym(Builtin::EllipticDemo { m: 1.0 });
        for k in -20..=20i64 {
            let d = (one.symbol.eval(&[k], &[0.1]).unwrap() - a.eval(&[k], &[0.1]).unwrap()).norm();
            if k.abs() > 6 {
                assert_eq!(d, 0.0);
            }
        }
        let parts: Vec<Symbol> = [-1.0, -2.0, -3.0]
            .iter()
            .map(|&s| sym(Builtin::JapaneseBracket { s }))
            .collect();
        let s = asymptotic_sum(&parts, &[2.0, 4.0, 8.0], &g, 48).unwrap();
        assert_eq!(s.radii, vec![2.0, 4.0, 8.0]);
        for k in 16..=40i64 {
            let plain: f64 = [-1.0, -2.0, -3.0]
                .iter()
                .map(|&t| japanese_bracket(&[k], t))
                .sum();
            assert!((s.symbol.eval(&[k], &[0.0]).unwrap().re - plain).abs() < 1e-15);
        }
        assert!(matches!(
            asymptotic_sum(&[parts[1].clone(), parts[0].clone()], &[1.0, 2.0], &g, 8),
            Err(Error::NonDecreasingOrders { .. })
        ));
    }

    #[test]
    fn asymptotic_radii_grow_until_budget() {
        let g = TorusGrid::new(1, 16).unwrap();
        let a = sym(Builtin::JapaneseBracket { s: 0.0 });
        let b = sym(Builtin::JapaneseBracket { s: -0.1 }).scale(Complex64::new(10.0, 0.0));
        let s = asymptotic_sum(&[a, b], &[1.0, 1.0], &g, 4096).unwrap();
        assert!(s.radii[1] > 1.0);
        assert!(s.contributions[1] <= 0.5 * s.contributions[0]);
    }

    #[test]
    fn partial_sum_remainder_has_lower_order() {
        let g = TorusGrid::new(1, 16).unwrap();
        let parts: Vec<Symbol> = [0.5, -0.5, -1.5]
            .iter()
            .map(|&s| sym(Builtin::EllipticDemo { m: s }))
            .collect();
        let s = asymptotic_sum(&parts, &[1.0, 2.0, 4.0], &g, 64).unwrap();
        let head = asymptotic_sum(&parts[..1], &[1.0], &g, 64).unwrap();
        let rem = crate::symbol::symbol_sub(&s.symbol, &head.symbol)
            .unwrap()
            .with_order(-0.5);
        let z = MultiIndex(vec![0]);
        let r = estimate_seminorm(&rem, &z, &z, 64, &g).unwrap();
        assert!(r.accepted, "growth {}", r.growth);
        let too_low = estimate_seminorm(&rem.with_order(-1.5), &z, &z, 64, &g).unwrap();
        assert!(!too_low.accepted);
    }

    #[test]
    fn probe_on_exact_and_terminating_expansions() {
        let (lat, g) = setup();
        let a = sym(Builtin::JapaneseBracket { s: 1.0 });
        let b = sym(Builtin::JapaneseBracket { s: 0.5 });
        let c = compose_symbols(&a, &b, 2).unwrap();
        let exact = FiniteSectionOperator::new(
            lat,
            section_product(&a, &b, &lat, &g, 2).unwrap(),
            0.0,
            0.0,
        )
        .unwrap();
        let rep = remainder_order_probe(&exact, &c, &g, &[c.claimed_remainder_order]).unwrap();
        assert!(rep.max_residual < 1e-12);
        assert!(rep.fitted_exponent.is_none() || rep.max_residual < 1e-12);

        let sh = sym(Builtin::AxisShift { axis: 0, sign: 1 });
        let q = adjoint_symbol(&sh, 3).unwrap();
        let p = finite_section(&sh, &lat, &g, 0.0, 0.0).unwrap();
        let ct = crate::quantization::conjugate_transpose(&p);
        let rep = remainder_order_probe(&ct, &q, &g, &[]).unwrap();
        assert!(rep.max_residual < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        rep.write_csv(dir.path().join("r.csv")).unwrap();
    }
}
