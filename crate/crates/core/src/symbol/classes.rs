//! Finite scans standing in for symbol-class membership and ellipticity.
//! Every constant reported here is a scan estimate over a bounded box.

use serde::{Deserialize, Serialize};

use super::Symbol;
use crate::error::{Error, Result};
use crate::fit::slope;
use crate::lattice::{norm, LatticeBox, MultiIndex};
use crate::par;
use crate::torus::TorusGrid;

/// Default acceptance slack on the growth slope.
pub const DEFAULT_SLACK: f64 = 0.05;
/// Default ellipticity threshold.
pub const DEFAULT_C_MIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub scan_radius: usize,
    /// Order the ratios were normalized against.
    pub order: f64,
    /// `Ĉ = max |D⁽ᵝ⁾Δᵅa(k,x)| / (1+|k|)^{m−|α|}`.
    pub constant: f64,
    pub argmax: Vec<i64>,
    /// Slope of the log running-max ratio envelope against `log(1+ρ)` over the
    /// upper half of the shells.
    pub growth: f64,
    pub slack: f64,
    pub accepted: bool,
    /// `(ρ, max ratio on shell ρ)`.
    pub shells: Vec<(usize, f64)>,
}

/// Points `k` of the box of radius `radius` with `lo < |k| ≤ hi`.
fn scan_points(dim: usize, radius: usize, lo: Option<f64>, hi: f64) -> Vec<Vec<i64>> {
    let b = LatticeBox {
        dim,
        radius,
        halo: 0,
    };
    b.points()
        .into_iter()
        .filter(|k| {
            let r = norm(k);
            r <= hi + 1e-12 && lo.is_none_or(|lo| r > lo)
        })
        .collect()
}

/// Estimate the `(α, β)` seminorm constant of `a` at its declared order.
pub fn estimate_seminorm(
    a: &Symbol,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    radius: usize,
    grid: &TorusGrid,
) -> Result<SeminormReport> {
    a.check_dim(alpha.dim())?;
    a.check_dim(beta.dim())?;
    a.check_dim(grid.dim)?;
    if radius == 0 {
        return Err(Error::InvalidParams("scan radius must be positive".into()));
    }
    let target = a.difference(alpha)?.falling(beta)?;
    let expo = a.order - alpha.order() as f64;
    let points = scan_points(a.dim, radius, None, radius as f64);
    let ratios = par::try_map(points.len(), |i| -> Result<f64> {
        let k = &points[i];
        let row = target.row(k, grid)?;
        let peak = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(peak / (1.0 + norm(k)).powf(expo))
    })?;

    let mut shells = vec![0.0f64; radius + 1];
    let mut constant = 0.0;
    let mut argmax = vec![0; a.dim];
    for (k, &r) in points.iter().zip(&ratios) {
        let rho = norm(k).round() as usize;
        shells[rho.min(radius)] = shells[rho.min(radius)].max(r);
        if r > constant {
            constant = r;
            argmax = k.clone();
        }
    }
    let mut envelope = Vec::with_capacity(shells.len());
    let mut run = 0.0f64;
    for &s in &shells {
        run = run.max(s);
        envelope.push(run);
    }
    let lo = radius.div_ceil(2).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=radius)
        .filter(|&r| envelope[r] > 0.0)
        .map(|r| ((1.0 + r as f64).ln(), envelope[r].ln()))
        .unzip();
    let growth = if xs.len() >= 2 { slope(&xs, &ys) } else { 0.0 };
    Ok(SeminormReport {
        alpha: alpha.clone(),
        beta: beta.clone(),
        scan_radius: radius,
        order: a.order,
        constant,
        argmax,
        growth,
        slack: DEFAULT_SLACK,
        accepted: growth <= DEFAULT_SLACK,
        shells: shells.into_iter().enumerate().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCertificate {
    pub exclusion_radius: f64,
    pub scan_radius: usize,
    pub order: f64,
    /// `min_{R<|k|≤K, x} |a(k,x)| / (1+|k|)^m`.
    pub constant: f64,
    pub argmin: Vec<i64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Scan `R < |k| ≤ K` for the ellipticity lower bound at the declared order.
pub fn check_ellipticity(
    a: &Symbol,
    exclusion_radius: f64,
    radius: usize,
    grid: &TorusGrid,
    c_min: f64,
) -> Result<EllipticityCertificate> {
    a.check_dim(grid.dim)?;
    if !(exclusion_radius >= 0.0 && (radius as f64) > exclusion_radius) {
        return Err(Error::InvalidParams(format!(
            "ellipticity scan needs K > R ≥ 0 (K = {radius}, R = {exclusion_radius})"
        )));
    }
    let points = scan_points(a.dim, radius, Some(exclusion_radius), radius as f64);
    let mins = par::try_map(points.len(), |i| -> Result<f64> {
        let k = &points[i];
        let row = a.row(k, grid)?;
        let low = row.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        Ok(low / (1.0 + norm(k)).powf(a.order))
    })?;
    let mut constant = f64::INFINITY;
    let mut argmin = vec![0; a.dim];
    for (k, &v) in points.iter().zip(&mins) {
        if v < constant {
            constant = v;
            argmin = k.clone();
        }
    }
    Ok(EllipticityCertificate {
        exclusion_radius,
        scan_radius: radius,
        order: a.order,
        constant,
        argmin,
        threshold: c_min,
        passed: constant >= c_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin_symbol, symbol_add, symbol_mul, Builtin};

    fn g1() -> TorusGrid {
        TorusGrid::new(1, 32).unwrap()
    }

    fn b(x: Builtin) -> Symbol {
        builtin_symbol(1, &x).unwrap()
    }

    #[test]
    fn bracket_seminorm_is_attained_at_origin() {
        for s in [0.0, 0.5, 1.0, 2.5] {
            let a = b(Builtin::JapaneseBracket { s });
            let r = estimate_seminorm(&a, &MultiIndex(vec![0]), &MultiIndex(vec![0]), 24, &g1())
                .unwrap();
            assert!((r.constant - 1.0).abs() < 1e-14, "s = {s}");
            if s > 0.0 {
                assert_eq!(r.argmax, vec![0]);
            }
            assert!(r.accepted);
        }
    }

    #[test]
    fn torus_derivatives_of_x_independent_symbols_vanish() {
        let a = b(Builtin::JapaneseBracket { s: 1.0 });
        let r =
            estimate_seminorm(&a, &MultiIndex(vec![1]), &MultiIndex(vec![2]), 16, &g1()).unwrap();
        assert_eq!(r.constant, 0.0);
    }

    #[test]
    fn shift_symbol_first_derivative() {
        let a = b(Builtin::AxisShift { axis: 0, sign: 1 });
        let r =
            estimate_seminorm(&a, &MultiIndex(vec![0]), &MultiIndex(vec![1]), 16, &g1()).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growth_is_detected() {
        // Order 2 growth declared as order 1.
        let a = b(Builtin::JapaneseBracket { s: 2.0 }).with_order(1.0);
        let r =
            estimate_seminorm(&a, &MultiIndex(vec![0]), &MultiIndex(vec![0]), 24, &g1()).unwrap();
        assert!(r.growth > 0.5 && !r.accepted);
    }

    #[test]
    fn class_lemmas() {
        let g = g1();
        let z = MultiIndex(vec![0]);
        let a = b(Builtin::EllipticDemo { m: 1.0 });
        // Inclusion: re-declared at a higher order.
        let up = estimate_seminorm(&a.with_order(2.0), &z, &z, 24, &g).unwrap();
        assert!(up.growth <= 0.0 + 1e-12);
        // Product closure.
        let c = b(Builtin::Perturbed {
            m: -0.5,
            terms: vec![crate::symbol::TrigTerm::new(vec![2], 0.3.into())],
        });
        let p = symbol_mul(&a, &c).unwrap();
        for al in 0..3 {
            for be in 0..3 {
                let r = estimate_seminorm(&p, &MultiIndex(vec![al]), &MultiIndex(vec![be]), 24, &g)
                    .unwrap();
                assert!(r.accepted, "α={al}, β={be}: growth {}", r.growth);
                assert!(r.constant.is_finite());
            }
        }
        // Derivative shift.
        let d = a.difference(&MultiIndex(vec![2])).unwrap();
        assert_eq!(d.order, -1.0);
        let r = estimate_seminorm(&d, &z, &z, 24, &g).unwrap();
        assert!(r.accepted && r.constant < 10.0);
    }

    #[test]
    fn ellipticity_examples() {
        let g = g1();
        for m in [0.5, 1.0, 3.0] {
            let c = check_ellipticity(
                &b(Builtin::JapaneseBracket { s: m }),
                0.0,
                24,
                &g,
                DEFAULT_C_MIN,
            )
            .unwrap();
            assert!(c.passed && c.constant >= 2f64.powf(-m / 2.0));
        }
        let lap =
            check_ellipticity(&b(Builtin::DiscreteLaplacian), 0.0, 24, &g, DEFAULT_C_MIN).unwrap();
        assert!(!lap.passed && lap.constant == 0.0);
        let d = check_ellipticity(
            &b(Builtin::EllipticDemo { m: 1.0 }),
            0.0,
            24,
            &g,
            DEFAULT_C_MIN,
        )
        .unwrap();
        assert!(d.passed);
        assert!(check_ellipticity(
            &b(Builtin::EllipticDemo { m: 1.0 }),
            5.0,
            5,
            &g,
            DEFAULT_C_MIN
        )
        .is_err());
    }

    #[test]
    fn ellipticity_is_stable() {
        let g = g1();
        let a = b(Builtin::EllipticDemo { m: 1.0 });
        // Lower-order perturbation that cancels the symbol at k = 2; ellipticity
        // returns past a larger exclusion radius.
        let c = Symbol::expression(1, 0.0, "-sqrt(5)*(2+cos(2*pi*x1))").unwrap();
        let s = symbol_add(&a, &c).unwrap();
        assert!(!check_ellipticity(&s, 0.0, 32, &g, 1e-3).unwrap().passed);
        assert!(check_ellipticity(&s, 12.0, 32, &g, 1e-3).unwrap().passed);
        let ab = symbol_mul(&a, &b(Builtin::JapaneseBracket { s: 0.5 })).unwrap();
        assert!(
            check_ellipticity(&ab, 0.0, 32, &g, DEFAULT_C_MIN)
                .unwrap()
                .passed
        );
    }
}
