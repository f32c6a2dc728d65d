//! The block operator `𝒯 = [[0, Q], [P, 0]]` on `H^{s₁} ⊕ H^{s₂}`, its symmetry
//! defect and deficiency probes, and the Sobolev duality pairing.
//!
//! With `D_s = diag(Λ_s)` the weighted inner product on the direct sum has
//! `W^{1/2} = diag(D_{s₁}, D_{s₂})`, so `𝒯` is symmetric exactly when
//! `W^{1/2} 𝒯 W^{−1/2}` is Hermitian, i.e. `Q = D_{s₁}⁻² Pᴴ D_{s₂}²`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calculus::{adjoint_symbol, compose_symbols, ExpansionResult};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticeFunction};
use crate::par;
use crate::quantization::{
    finite_section, interior_indices, max_abs, smallest_singular_value, sobolev_norm,
    spectral_norm, submatrix, weighted_adjoint, window_indices, FiniteSectionOperator, SobolevSpec,
};
use crate::symbol::{
    builtin_symbol, check_ellipticity, symbol_add, Builtin, EllipticityCertificate, Symbol,
};
use crate::torus::TorusGrid;

/// How `Q` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AdjointMode {
    /// Section of `T_{Λ_{−2s₁}} T_{a*} T_{Λ_{2s₂}}` with `a*` the truncated
    /// adjoint expansion.
    Expansion { n_terms: usize },
    /// `D_{s₁}⁻² Pᴴ D_{s₂}²`.
    ExactWeighted,
}

/// Index set a defect is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Restriction {
    /// Points at least `margin` layers inside.
    Interior,
    FullBox,
    /// Interior points with `|k| ≥ floor`.
    Window {
        floor: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    /// `H^{s₁} → H^{s₂}`.
    pub p: FiniteSectionOperator,
    /// `H^{s₂} → H^{s₁}`.
    pub q: FiniteSectionOperator,
    pub s1: f64,
    pub s2: f64,
    pub mode: AdjointMode,
    /// Declared order of the symbol.
    pub order: f64,
}

impl BlockOperator {
    pub fn lattice(&self) -> LatticeBox {
        self.p.lattice
    }

    /// Half the block size.
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `m > s₁ − s₂`.
    pub fn hypothesis_met(&self) -> bool {
        self.order > self.s1 - self.s2
    }

    /// Diagonal of `W^{1/2}`: `Λ_{s₁}` then `Λ_{s₂}`.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = SobolevSpec::new(self.s1).weights(&self.lattice());
        w.extend(SobolevSpec::new(self.s2).weights(&self.lattice()));
        w
    }

    /// `[[0, Q], [P, 0]]` in plain coordinates.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.len();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, n), (n, n)).copy_from(&self.q.matrix);
        t.view_mut((n, 0), (n, n)).copy_from(&self.p.matrix);
        t
    }

    /// `W^{1/2} 𝒯 W^{−1/2}`, an operator on plain ℓ².
    pub fn weighted_matrix(&self) -> DMatrix<Complex64> {
        let w = self.weights();
        let t = self.matrix();
        DMatrix::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)] * (w[i] / w[j]))
    }

    /// `X = D_{s₁} Q D_{s₂}⁻¹ − D_{s₁}⁻¹ Pᴴ D_{s₂}`, the only non-zero block of
    /// the weighted `𝒯 − 𝒯*` (up to sign and conjugate transpose).
    pub fn defect_block(&self) -> DMatrix<Complex64> {
        let w1 = SobolevSpec::new(self.s1).weights(&self.lattice());
        let w2 = SobolevSpec::new(self.s2).weights(&self.lattice());
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.q.matrix[(i, j)] * (w1[i] / w2[j]) - self.p.matrix[(j, i)].conj() * (w2[j] / w1[i])
        })
    }

    fn indices(&self, restriction: Restriction) -> Vec<usize> {
        let lat = self.lattice();
        match restriction {
            Restriction::Interior => interior_indices(&lat, self.p.margin),
            Restriction::FullBox => (0..lat.len()).collect(),
            Restriction::Window { floor } => window_indices(&lat, self.p.margin, floor),
        }
    }
}

/// Assemble `𝒯` for `a` between `H^{s₁}` and `H^{s₂}`.
pub fn build_block(
    a: &Symbol,
    s1: f64,
    s2: f64,
    lattice: &LatticeBox,
    grid: &TorusGrid,
    mode: AdjointMode,
) -> Result<BlockOperator> {
    let p = finite_section(a, lattice, grid, s1, s2)?;
    let q = match mode {
        AdjointMode::ExactWeighted => weighted_adjoint(&p),
        AdjointMode::Expansion { n_terms } => {
            if n_terms == 0 {
                return Err(Error::InvalidParams(
                    "expansion mode needs at least one term".into(),
                ));
            }
            let star = adjoint_symbol(a, n_terms)?;
            expansion_q(&star, &p, grid)?
        }
    };
    Ok(BlockOperator {
        p,
        q,
        s1,
        s2,
        mode,
        order: a.order,
    })
}

/// `D_{s₁}⁻² · section(a*) · D_{s₂}²`.
fn expansion_q(
    star: &ExpansionResult,
    p: &FiniteSectionOperator,
    grid: &TorusGrid,
) -> Result<FiniteSectionOperator> {
    let raw = finite_section(&star.symbol, &p.lattice, grid, p.target.s, p.source.s)?;
    Ok(FiniteSectionOperator {
        matrix: riesz_conjugate(&raw.matrix, &p.lattice, p.source.s, p.target.s),
        margin: p.margin,
        ..raw
    })
}

/// `D_{s₁}⁻² M D_{s₂}²`.
fn riesz_conjugate(
    m: &DMatrix<Complex64>,
    lattice: &LatticeBox,
    s1: f64,
    s2: f64,
) -> DMatrix<Complex64> {
    let w1 = SobolevSpec::new(s1).weights(lattice);
    let w2 = SobolevSpec::new(s2).weights(lattice);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * (w2[j] * w2[j] / (w1[i] * w1[i]))
    })
}

/// `‖𝒯 − 𝒯*‖` in the weighted direct-sum inner product, on vectors supported
/// in the restriction.
pub fn symmetry_defect(t: &BlockOperator, restriction: Restriction) -> f64 {
    let idx = t.indices(restriction);
    spectral_norm(&submatrix(&t.defect_block(), &idx, &idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `σ_min(W^{1/2}(𝒯 ± iI)W^{−1/2})`.
pub fn deficiency_sigma(t: &BlockOperator, sign: Sign) -> f64 {
    let mut b = t.weighted_matrix();
    for i in 0..b.nrows() {
        b[(i, i)] += Complex64::new(0.0, sign.value());
    }
    smallest_singular_value(&b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyRow {
    pub radius: usize,
    pub sign: Sign,
    pub sigma_min: f64,
    /// Interior symmetry defect.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyReport {
    pub label: String,
    pub s1: f64,
    pub s2: f64,
    pub order: f64,
    pub mode: AdjointMode,
    pub hypothesis_met: bool,
    pub rows: Vec<DeficiencyRow>,
}

impl DeficiencyReport {
    pub fn min_sigma(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.sigma_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.defect).fold(0.0, f64::max)
    }

    /// `(N, sign, sigma_min, defect)` table.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["N", "sign", "sigma_min", "defect"])?;
        for r in &self.rows {
            let sign = match r.sign {
                Sign::Plus => "+",
                Sign::Minus => "-",
            };
            w.write_record([
                r.radius.to_string(),
                sign.into(),
                r.sigma_min.to_string(),
                r.defect.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Assemble `𝒯` on every box of the scan and record both signs.
pub fn deficiency_probe(
    a: &Symbol,
    s1: f64,
    s2: f64,
    mode: AdjointMode,
    radii: &[usize],
    grid: &TorusGrid,
    signs: &[Sign],
) -> Result<DeficiencyReport> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(
            "box scan must be strictly increasing".into(),
        ));
    }
    let per_box = par::try_map(radii.len(), |i| -> Result<Vec<DeficiencyRow>> {
        let lat = LatticeBox::new(a.dim, radii[i], 0)?;
        let t = build_block(a, s1, s2, &lat, grid, mode)?;
        let defect = symmetry_defect(&t, Restriction::Interior);
        Ok(signs
            .iter()
            .map(|&sign| DeficiencyRow {
                radius: radii[i],
                sign,
                sigma_min: deficiency_sigma(&t, sign),
                defect,
            })
            .collect())
    })?;
    Ok(DeficiencyReport {
        label: a.label.clone(),
        s1,
        s2,
        order: a.order,
        mode,
        hypothesis_met: a.order > s1 - s2,
        rows: per_box.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub s: f64,
    pub seed: u64,
    pub trials: usize,
    /// `‖u‖_{H^s}`.
    pub norm: f64,
    /// `|(u, v*)|` for the explicit maximizer.
    pub attained: f64,
    /// `‖v*‖_{H^{−s}}`.
    pub maximizer_norm: f64,
    /// `max(|attained − norm|, |maximizer_norm − 1|·norm)`, relative to `norm`.
    pub attained_error: f64,
    /// Largest `(|(u,v)| − ‖u‖_{H^s}‖v‖_{H^{−s}}) / (‖u‖_{H^s}‖v‖_{H^{−s}})` over
    /// the random trials; non-positive when the bound holds.
    pub max_violation: f64,
}

/// `(u, v) = Σ u(k) v̄(k)`.
pub fn pairing(u: &LatticeFunction, v: &LatticeFunction) -> Complex64 {
    u.values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * b.conj())
        .sum()
}

/// Test `|(u,v)| ≤ ‖u‖_{H^s}‖v‖_{H^{−s}}` on random `v` and the explicit
/// maximizer `v* = Λ_{2s} u / ‖u‖_{H^s}`.
pub fn duality_check(u: &LatticeFunction, s: f64, trials: usize, seed: u64) -> DualityReport {
    let norm = sobolev_norm(u, s);
    let mut rep = DualityReport {
        s,
        seed,
        trials,
        norm,
        attained: 0.0,
        maximizer_norm: 0.0,
        attained_error: 0.0,
        max_violation: f64::NEG_INFINITY,
    };
    let lat = u.lattice;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let v = LatticeFunction::from_fn(lat, |_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let bound = norm * sobolev_norm(&v, -s);
        let lhs = pairing(u, &v).norm();
        let viol = if bound > 0.0 {
            (lhs - bound) / bound
        } else {
            lhs
        };
        rep.max_violation = rep.max_violation.max(viol);
    }
    if trials == 0 {
        rep.max_violation = 0.0;
    }
    if norm == 0.0 {
        return rep;
    }
    let two_s = SobolevSpec::new(2.0 * s);
    let vstar = LatticeFunction::from_fn(lat, |k| u.get(k).unwrap() * (two_s.weight(k) / norm));
    rep.attained = pairing(u, &vstar).norm();
    rep.maximizer_norm = sobolev_norm(&vstar, -s);
    rep.attained_error = ((rep.attained - norm).abs() / norm).max((rep.maximizer_norm - 1.0).abs());
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqCertificate {
    pub s1: f64,
    pub s2: f64,
    pub m: f64,
    pub hypothesis_met: bool,
    /// `2m + 2s₂ − 2s₁`.
    pub order: f64,
    pub certificate: EllipticityCertificate,
}

/// Ellipticity scan of the symbol of `PQ + I` with `Q = T_{Λ_{−2s₁}} T_{a*} T_{Λ_{2s₂}}`.
/// Runs even when `m > s₁ − s₂` fails; the flag records it.
#[allow(clippy::too_many_arguments)]
pub fn ellipticity_of_pq_plus_i(
    a: &Symbol,
    s1: f64,
    s2: f64,
    m: f64,
    n_terms: usize,
    exclusion_radius: f64,
    scan_radius: usize,
    grid: &TorusGrid,
    c_min: f64,
) -> Result<PqCertificate> {
    let dim = a.dim;
    let lam = |s: f64| builtin_symbol(dim, &Builtin::JapaneseBracket { s });
    let star = adjoint_symbol(a, n_terms)?.symbol;
    let right = compose_symbols(&star, &lam(2.0 * s2)?, n_terms)?.symbol;
    let q = compose_symbols(&lam(-2.0 * s1)?, &right, n_terms)?.symbol;
    let pq = compose_symbols(a, &q, n_terms)?.symbol;
    let order = 2.0 * m + 2.0 * s2 - 2.0 * s1;
    let one = Symbol::constant(dim, Complex64::new(1.0, 0.0));
    let sym = symbol_add(&pq, &one)?.with_order(order);
    let certificate = check_ellipticity(&sym, exclusion_radius, scan_radius, grid, c_min)?;
    Ok(PqCertificate {
        s1,
        s2,
        m,
        hypothesis_met: m + s2 - s1 > 0.0,
        order,
        certificate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszReport {
    /// Entrywise gap between `section(Λ_{−2s₁})·Pᴴ·section(Λ_{2s₂})` and the
    /// weighted adjoint, on the interior.
    pub exact_gap: f64,
    /// Entrywise gap between the expansion-built `Q` and the weighted adjoint,
    /// on the window `|k| ≥ floor`.
    pub expansion_gap: f64,
    /// Largest entry of the Riesz-conjugated section of the last retained
    /// expansion terms on the same window.
    pub expansion_budget: f64,
    pub n_terms: usize,
    pub floor: f64,
}

/// Compare the two realizations of `Q` against `weighted_adjoint(P)`.
pub fn riesz_consistency(
    a: &Symbol,
    s1: f64,
    s2: f64,
    lattice: &LatticeBox,
    grid: &TorusGrid,
    n_terms: usize,
    floor: f64,
) -> Result<RieszReport> {
    let dim = a.dim;
    let p = finite_section(a, lattice, grid, s1, s2)?;
    let wa = weighted_adjoint(&p);
    let lam = |s: f64| -> Result<FiniteSectionOperator> {
        finite_section(
            &builtin_symbol(dim, &Builtin::JapaneseBracket { s })?,
            lattice,
            grid,
            0.0,
            0.0,
        )
    };
    let via_ops = lam(-2.0 * s1)?.matrix * p.matrix.adjoint() * lam(2.0 * s2)?.matrix;
    let inner = interior_indices(&p.lattice, p.margin);
    let exact_gap = max_abs(&submatrix(&(via_ops - &wa.matrix), &inner, &inner));

    let star = adjoint_symbol(a, n_terms)?;
    let q = expansion_q(&star, &p, grid)?;
    let win = window_indices(&p.lattice, p.margin, floor);
    let expansion_gap = max_abs(&submatrix(&(&q.matrix - &wa.matrix), &win, &win));
    let mut expansion_budget: f64 = 0.0;
    for t in star.last_terms() {
        let sec = finite_section(&t.symbol, &p.lattice, grid, s2, s1)?;
        let m = riesz_conjugate(&sec.matrix, &p.lattice, s1, s2);
        expansion_budget = expansion_budget.max(max_abs(&submatrix(&m, &win, &win)));
    }
    Ok(RieszReport {
        exact_gap,
        expansion_gap,
        expansion_budget,
        n_terms,
        floor,
    })
}
