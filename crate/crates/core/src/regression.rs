//! Built-in regression corpus and the pass/fail checks run over it.
//!
//! Each criterion returns a [`Verdict`] made of [`Check`]s; every check carries
//! the measured value and the tolerance it was judged against.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjointness::{
    build_block, deficiency_probe, duality_check, ellipticity_of_pq_plus_i, riesz_consistency,
    symmetry_defect, AdjointMode, Restriction, Sign,
};
use crate::calculus::{adjoint_symbol, compose_symbols, remainder_order_probe};
use crate::error::Result;
use crate::lattice::{japanese_bracket, LatticeBox, LatticeFunction};
use crate::parametrix::{build_parametrix, elliptic_regularity_experiment, ParametrixConfig};
use crate::quantization::{
    finite_section, operator_norm_estimate, section_product, spectral_norm, submatrix,
    window_indices, FiniteSectionOperator,
};
use crate::symbol::{builtin_symbol, Builtin, Symbol, TrigTerm, DEFAULT_C_MIN};
use crate::torus::{dft, TorusGrid};

/// Default seed for the randomized checks.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub what: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(what: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            what: what.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// Passes when `measured ≥ tolerance`.
    pub fn at_least(what: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            what: what.into(),
            measured,
            tolerance,
            passed: measured >= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: u8,
    pub name: String,
    pub checks: Vec<Check>,
}

impl Verdict {
    fn new(id: u8, name: &str, checks: Vec<Check>) -> Self {
        Verdict {
            id,
            name: name.into(),
            checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Failing checks first, then the rest.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| !c.passed)
            .or(self.checks.first())
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match self.worst() {
            Some(c) => format!(
                "[{status}] {:>2} {}: {} = {:.3e} (tol {:.3e}); {} checks",
                self.id,
                self.name,
                c.what,
                c.measured,
                c.tolerance,
                self.checks.len()
            ),
            None => format!("[{status}] {:>2} {}: no checks", self.id, self.name),
        }
    }
}

fn sym(b: Builtin) -> Symbol {
    builtin_symbol(1, &b).expect("corpus symbols are valid")
}

fn lam(s: f64) -> Symbol {
    sym(Builtin::JapaneseBracket { s })
}

fn demo(m: f64) -> Symbol {
    sym(Builtin::EllipticDemo { m })
}

fn shift() -> Symbol {
    sym(Builtin::AxisShift { axis: 0, sign: 1 })
}

/// `cos 2πx₁`.
fn cosine() -> Symbol {
    sym(Builtin::TrigPoly {
        terms: vec![
            TrigTerm::new(vec![1], Complex64::new(0.5, 0.0)),
            TrigTerm::new(vec![-1], Complex64::new(0.5, 0.0)),
        ],
    })
}

/// Elliptic demo of order 1 with a `0.3 e^{2πix₁}` lower-order perturbation.
pub fn perturbed_demo() -> Symbol {
    sym(Builtin::Perturbed {
        m: 1.0,
        terms: vec![TrigTerm::new(vec![1], Complex64::new(0.3, 0.0))],
    })
}

/// One-dimensional symbol corpus.
pub fn symbol_corpus() -> Vec<Symbol> {
    vec![
        lam(1.0),
        lam(-0.5),
        shift(),
        cosine(),
        sym(Builtin::DiscreteLaplacian),
        demo(1.0),
        demo(0.5),
        perturbed_demo(),
    ]
}

/// Elliptic corpus cases `(a, s₁, s₂)` with `m > s₁ − s₂`.
pub fn elliptic_cases() -> Vec<(Symbol, f64, f64)> {
    vec![
        (demo(1.0), 0.5, 0.0),
        (perturbed_demo(), 0.5, 0.0),
        (demo(1.0), 1.0, 0.5),
        (lam(1.5), 1.0, 0.0),
    ]
}

/// Lattice functions on the box of radius `n`.
pub fn function_corpus(n: usize, seed: u64) -> Vec<LatticeFunction> {
    let lat = LatticeBox::new(1, n, 0).expect("radius is positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        LatticeFunction::delta(lat, &[0]).unwrap(),
        LatticeFunction::delta(lat, &[3]).unwrap(),
        LatticeFunction::from_fn(lat, |k| {
            Complex64::new((-(k[0] * k[0]) as f64 / 8.0).exp(), 0.0)
        }),
        LatticeFunction::from_fn(lat, |k| {
            Complex64::from_polar(japanese_bracket(k, -2.0), 0.7 * k[0] as f64)
        }),
        LatticeFunction::from_fn(lat, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }),
    ]
}

fn grid1() -> TorusGrid {
    TorusGrid::new(1, 128).expect("grid size is positive")
}

fn box1(n: usize) -> LatticeBox {
    LatticeBox::new(1, n, 0).expect("radius is positive")
}

/// 1. `Σ|u|² = ∫|û|²` on random band-limited functions.
pub fn plancherel(seed: u64) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for dim in [1, 2] {
        let lat = LatticeBox::new(dim, 8, 0)?;
        let grid = TorusGrid::new(dim, 32)?;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let u = LatticeFunction::from_fn(lat, |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let uh = dft(&u, grid)?;
            let lhs = u.l2_norm().powi(2);
            let rhs = uh.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.len() as f64;
            worst = worst.max((lhs - rhs).abs() / lhs);
        }
        checks.push(Check::at_most(
            format!("relative error, n = {dim}"),
            worst,
            1e-12,
        ));
    }
    Ok(Verdict::new(1, "Plancherel", checks))
}

/// 2. Diagonal sections for `x`-independent symbols; the shift symbol shifts.
pub fn quantization_exactness() -> Result<Verdict> {
    let lat = box1(32);
    let g = grid1();
    let mut off: f64 = 0.0;
    for a in [lam(1.0), lam(-0.5), lam(2.5), lam(0.0)] {
        let p = finite_section(&a, &lat, &g, 0.0, 0.0)?;
        for i in 0..p.len() {
            for j in 0..p.len() {
                if i != j {
                    off = off.max(p.matrix[(i, j)].norm());
                }
            }
        }
    }
    let p = finite_section(&shift(), &lat, &g, 0.0, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let u = LatticeFunction::from_fn(lat, |_| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
    let v = p.apply_to(&u)?;
    let mut shift_err: f64 = 0.0;
    for k in -31..=31i64 {
        let want = u.get(&[k + 1]).unwrap();
        shift_err = shift_err.max((v.get(&[k]).unwrap() - want).norm());
    }
    Ok(Verdict::new(
        2,
        "Quantization exactness",
        vec![
            Check::at_most("off-diagonal of x-independent sections", off, 1e-12),
            Check::at_most("shift section vs lattice shift", shift_err, 1e-12),
        ],
    ))
}

/// Window `|k| ≥ N/2` inside the default margin.
fn hf_window(lat: &LatticeBox, margin: usize) -> Vec<usize> {
    window_indices(lat, margin, lat.radius as f64 / 2.0)
}

fn adjoint_residual(
    a: &Symbol,
    p: &FiniteSectionOperator,
    g: &TorusGrid,
    n_terms: usize,
    idx: &[usize],
) -> Result<f64> {
    let star = adjoint_symbol(a, n_terms)?;
    let q = finite_section(&star.symbol, &p.lattice, g, 0.0, 0.0)?;
    Ok(spectral_norm(&submatrix(
        &(q.matrix - p.matrix.adjoint()),
        idx,
        idx,
    )))
}

/// 3. Adjoint expansion against the conjugate transpose.
pub fn formal_adjoint() -> Result<Verdict> {
    let lat = box1(32);
    let g = grid1();
    let mut checks = Vec::new();
    let mut exact: f64 = 0.0;
    for a in [shift(), lam(1.0), lam(-0.5), lam(2.0)] {
        let p = finite_section(&a, &lat, &g, 0.0, 0.0)?;
        let all: Vec<usize> = crate::quantization::interior_indices(&lat, p.margin);
        for n in 1..=3 {
            exact = exact.max(adjoint_residual(&a, &p, &g, n, &all)?);
        }
    }
    checks.push(Check::at_most(
        "shift and real x-independent residual",
        exact,
        1e-12,
    ));
    for a in symbol_corpus() {
        let p = finite_section(&a, &lat, &g, 0.0, 0.0)?;
        let idx = hf_window(&lat, p.margin);
        let res: Vec<f64> = (1..=6)
            .map(|n| adjoint_residual(&a, &p, &g, n, &idx))
            .collect::<Result<_>>()?;
        let worst = res
            .windows(2)
            .filter(|w| w[1] > 1e-12)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max);
        checks.push(Check::at_most(
            format!("{}: worst residual ratio over N_terms 1..6", a.label),
            worst,
            1.1,
        ));
    }
    Ok(Verdict::new(3, "Formal adjoint", checks))
}

/// Composition pairs probed for the remainder order.
pub fn composition_pairs() -> Vec<(Symbol, Symbol)> {
    vec![
        (demo(1.0), lam(0.5)),
        (cosine(), lam(1.5)),
        (demo(1.0), demo(-0.5)),
        (demo(0.5), lam(-0.5)),
    ]
}

/// Fitted exponents of the composition residual for `N_terms = 1..=max`.
pub fn composition_exponents(
    a: &Symbol,
    b: &Symbol,
    radius: usize,
    margin: usize,
    max_terms: usize,
) -> Result<Vec<f64>> {
    let lat = box1(radius);
    let g = grid1();
    let exact = section_product(a, b, &lat, &g, 8)?;
    let op = FiniteSectionOperator::new(lat, exact, 0.0, 0.0)?.with_margin(margin);
    (1..=max_terms)
        .map(|n| {
            let e = compose_symbols(a, b, n)?;
            let r = remainder_order_probe(&op, &e, &g, &[])?;
            Ok(r.fitted_exponent.unwrap_or(f64::NEG_INFINITY))
        })
        .collect()
}

/// 4. Each extra composition term lowers the fitted decay exponent by one.
pub fn composition_order() -> Result<Verdict> {
    let mut checks = Vec::new();
    for (a, b) in composition_pairs() {
        let ex = composition_exponents(&a, &b, 32, 8, 4)?;
        let worst = ex
            .windows(2)
            .map(|w| ((w[0] - w[1]) - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(
            format!(
                "{} # {}: worst |drop − 1|, exponents {:.2?}",
                a.label, b.label, ex
            ),
            worst,
            0.3,
        ));
    }
    Ok(Verdict::new(4, "Composition remainder order", checks))
}

/// 5. Parametrix residuals for the elliptic demo and a diagonal symbol.
pub fn parametrix() -> Result<Verdict> {
    let g = grid1();
    let mut cfg = ParametrixConfig::new(box1(32), g);
    cfg.steps = 3;
    cfg.radius = 4.0;
    cfg.orders = vec![0.0, 1.0, 2.0];
    let r = build_parametrix(&demo(1.0), &cfg)?;
    let mut checks = Vec::new();
    for row in r.final_rows() {
        checks.push(Check::at_most(
            format!("‖QP − I‖ H⁰→H^{} at J = 3", row.t),
            row.qp,
            1e-3,
        ));
    }
    let mut rise: f64 = 0.0;
    for &t in &cfg.orders {
        let by_step: Vec<f64> = r
            .residuals
            .iter()
            .filter(|x| x.t == t)
            .map(|x| x.qp)
            .collect();
        for w in by_step.windows(2) {
            rise = rise.max((w[1] - w[0]) / w[0]);
        }
    }
    checks.push(Check::at_most(
        "relative rise of residual between steps",
        rise,
        0.0,
    ));
    let d = build_parametrix(&lam(1.0), &cfg)?;
    let diag = d
        .final_rows()
        .iter()
        .map(|x| x.qp.max(x.pq))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("diagonal symbol residual", diag, 1e-8));
    Ok(Verdict::new(5, "Parametrix", checks))
}

/// 6. `‖u‖_{H^{s+1}}` of the solution of `T_a u = δ₀` plateaus in `N`.
pub fn elliptic_regularity() -> Result<Verdict> {
    let f = LatticeFunction::delta(box1(32), &[0])?;
    let r = elliptic_regularity_experiment(&demo(1.0), &f, 0.0, &[16, 32], &grid1())?;
    let change = r.plateau_change().unwrap_or(f64::INFINITY);
    Ok(Verdict::new(
        6,
        "Elliptic regularity",
        vec![Check::at_most(
            "relative change of ‖u‖_{H^1}, N = 16 → 32",
            change,
            0.02,
        )],
    ))
}

/// 7. `H^s → H^{s−m}` section norms are stable in `N`.
pub fn boundedness() -> Result<Verdict> {
    let g = grid1();
    let mut checks = Vec::new();
    for a in symbol_corpus() {
        for s in [0.0, 1.0] {
            let n16 = operator_norm_estimate(&finite_section(&a, &box1(16), &g, s, s - a.order)?);
            let n32 = operator_norm_estimate(&finite_section(&a, &box1(32), &g, s, s - a.order)?);
            checks.push(Check::at_most(
                format!("{} at s = {s}: relative norm change", a.label),
                (n32 - n16).abs() / n16,
                0.05,
            ));
        }
    }
    Ok(Verdict::new(7, "Boundedness", checks))
}

/// 8. Cauchy–Schwarz in `H^s × H^{−s}` and the attained supremum.
pub fn duality(seed: u64) -> Result<Verdict> {
    let us = function_corpus(16, seed);
    let ss = [-2.0, -0.5, 0.0, 0.5, 2.0];
    let mut violation = f64::NEG_INFINITY;
    let mut attained: f64 = 0.0;
    // 10³ random pairs split over the corpus and exponents.
    let trials = 1000usize.div_ceil(us.len() * ss.len());
    for (i, u) in us.iter().enumerate() {
        for (j, &s) in ss.iter().enumerate() {
            let r = duality_check(u, s, trials, seed.wrapping_add((i * ss.len() + j) as u64));
            violation = violation.max(r.max_violation);
            attained = attained.max(r.attained_error);
        }
    }
    Ok(Verdict::new(
        8,
        "Duality",
        vec![
            Check::at_most(
                "largest relative Cauchy–Schwarz violation",
                violation,
                1e-12,
            ),
            Check::at_most("maximizer error", attained, 1e-10),
        ],
    ))
}

/// 9. Hermitian blocks, σ_min of elliptic blocks, expansion-mode defect.
pub fn deficiency() -> Result<Verdict> {
    let g = grid1();
    let radii = [8, 16, 32];
    let both = [Sign::Plus, Sign::Minus];
    let mut checks = Vec::new();
    let herm = [lam(1.0), lam(2.0), lam(1.0).scale(Complex64::new(0.0, 1.0))];
    let mut herm_min = f64::INFINITY;
    for a in &herm {
        let r = deficiency_probe(a, 0.0, 0.0, AdjointMode::ExactWeighted, &radii, &g, &both)?;
        herm_min = herm_min.min(r.min_sigma());
    }
    checks.push(Check::at_least(
        "Hermitian σ_min(𝒯 ± i)",
        herm_min,
        1.0 - 1e-12,
    ));
    for (a, s1, s2) in elliptic_cases() {
        let r = deficiency_probe(&a, s1, s2, AdjointMode::ExactWeighted, &radii, &g, &both)?;
        checks.push(Check::at_least(
            format!("{} (s₁, s₂) = ({s1}, {s2}): σ_min", a.label),
            r.min_sigma(),
            0.9,
        ));
        let lat = box1(32);
        let t = build_block(&a, s1, s2, &lat, &g, AdjointMode::Expansion { n_terms: 6 })?;
        let d = symmetry_defect(&t, Restriction::Window { floor: 16.0 });
        checks.push(Check::at_most(
            format!("{} (s₁, s₂) = ({s1}, {s2}): defect at N_terms = 6", a.label),
            d,
            1e-6,
        ));
    }
    Ok(Verdict::new(9, "Block operator deficiency", checks))
}

/// 10. `PQ + I` is elliptic of order `2m + 2s₂ − 2s₁`.
pub fn pq_ellipticity() -> Result<Verdict> {
    let g = TorusGrid::new(1, 64)?;
    let mut checks = Vec::new();
    for (a, s1, s2) in elliptic_cases() {
        let c = ellipticity_of_pq_plus_i(&a, s1, s2, a.order, 4, 0.0, 32, &g, DEFAULT_C_MIN)?;
        checks.push(Check::at_least(
            format!(
                "{} (s₁, s₂) = ({s1}, {s2}): constant at order {}",
                a.label, c.order
            ),
            c.certificate.constant,
            DEFAULT_C_MIN,
        ));
    }
    Ok(Verdict::new(10, "Ellipticity of PQ + I", checks))
}

/// 11. Both realizations of `Q` agree with the weighted adjoint.
pub fn riesz_weights() -> Result<Verdict> {
    let g = grid1();
    let lat = box1(32);
    let mut checks = Vec::new();
    for (a, s1, s2) in elliptic_cases() {
        let r = riesz_consistency(&a, s1, s2, &lat, &g, 6, 16.0)?;
        checks.push(Check::at_most(
            format!("{} ({s1}, {s2}): exact-weighted gap", a.label),
            r.exact_gap,
            1e-12,
        ));
        checks.push(Check::at_most(
            format!(
                "{} ({s1}, {s2}): expansion gap vs last-term budget",
                a.label
            ),
            r.expansion_gap,
            r.expansion_budget,
        ));
    }
    Ok(Verdict::new(11, "Riesz-weight consistency", checks))
}

/// Every criterion in order.
pub fn run_all(seed: u64) -> Result<Vec<Verdict>> {
    Ok(vec![
        plancherel(seed)?,
        quantization_exactness()?,
        formal_adjoint()?,
        composition_order()?,
        parametrix()?,
        elliptic_regularity()?,
        boundedness()?,
        duality(seed)?,
        deficiency()?,
        pq_ellipticity()?,
        riesz_weights()?,
    ])
}
