//! Quantization `a ↦ T_a` as an applier and as dense finite sections between
//! weighted spaces.
//!
//! Because `Λ_s` does not depend on `x`, `T_{Λ_s}` is the multiplier
//! `u(k) ↦ Λ_s(k)u(k)`: inserting an `x`-independent symbol into the
//! quantization formula leaves `∫ e^{2πik·x} û(x) dx = u(k)`. Hence `H^s` is
//! ℓ² weighted by `Λ_s(k)²`, and the `H^{s₁}→H^{s₂}` norm of a section `A` is
//! the spectral norm of `D_{s₂} A D_{s₁}⁻¹` with `D_s = diag(Λ_s)`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{japanese_bracket, norm, LatticeBox, LatticeFunction};
use crate::par;
use crate::symbol::Symbol;
use crate::torus::{dft, fft_nd, TorusGrid};

/// Boundary band excluded from residual metrics unless stated otherwise.
pub const DEFAULT_MARGIN: usize = 6;

/// Sobolev exponent `s` with weight `Λ_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub s: f64,
}

impl SobolevSpec {
    pub fn new(s: f64) -> Self {
        SobolevSpec { s }
    }

    pub fn weight(&self, k: &[i64]) -> f64 {
        japanese_bracket(k, self.s)
    }

    /// Weights for every stored point of `lattice`, in storage order.
    pub fn weights(&self, lattice: &LatticeBox) -> Vec<f64> {
        (0..lattice.len())
            .map(|i| self.weight(&lattice.point(i)))
            .collect()
    }
}

/// Dense section of `T_a` on the interior points of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSectionOperator {
    /// Box without halo; rows and columns follow its storage order.
    pub lattice: LatticeBox,
    pub matrix: DMatrix<Complex64>,
    pub source: SobolevSpec,
    pub target: SobolevSpec,
    pub margin: usize,
}

impl FiniteSectionOperator {
    pub fn new(
        lattice: LatticeBox,
        matrix: DMatrix<Complex64>,
        source: f64,
        target: f64,
    ) -> Result<Self> {
        let lattice = lattice.interior();
        let n = lattice.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "section over {n} points needs a {n}×{n} matrix, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(FiniteSectionOperator {
            lattice,
            matrix,
            source: SobolevSpec::new(source),
            target: SobolevSpec::new(target),
            margin: DEFAULT_MARGIN.min(lattice.radius.saturating_sub(1)),
        })
    }

    pub fn identity(lattice: LatticeBox, s: f64) -> Self {
        let n = lattice.interior().len();
        Self::new(lattice, DMatrix::identity(n, n), s, s).unwrap()
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multiply by a lattice function supported on the box.
    pub fn apply_to(&self, u: &LatticeFunction) -> Result<LatticeFunction> {
        let v = u.restrict(self.lattice)?;
        let x = nalgebra::DVector::from_vec(v.values);
        let y = &self.matrix * x;
        LatticeFunction::from_values(self.lattice, y.iter().copied().collect())
    }

    /// `D_{s₂} A D_{s₁}⁻¹`: the section as an operator on plain ℓ².
    pub fn weighted(&self) -> DMatrix<Complex64> {
        let wt = self.target.weights(&self.lattice);
        let ws = self.source.weights(&self.lattice);
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            self.matrix[(i, j)] * (wt[i] / ws[j])
        })
    }

    /// `self ∘ other`, tagged `other.source → self.target`.
    pub fn compose(&self, other: &FiniteSectionOperator) -> Result<FiniteSectionOperator> {
        if self.lattice != other.lattice {
            return Err(Error::ShapeMismatch(
                "composed sections live on different boxes".into(),
            ));
        }
        Ok(FiniteSectionOperator {
            matrix: &self.matrix * &other.matrix,
            source: other.source,
            target: self.target,
            ..self.clone()
        })
    }

    /// Indices of points at least `margin` layers inside the box.
    pub fn interior_indices(&self) -> Vec<usize> {
        interior_indices(&self.lattice, self.margin)
    }

    /// Write `row,col,re,im` lines in row-major lexicographic order.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "k_row", "k_col", "re", "im"])?;
        for i in 0..self.len() {
            let ki = fmt_point(&self.lattice.point(i));
            for j in 0..self.len() {
                let v = self.matrix[(i, j)];
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    ki.clone(),
                    fmt_point(&self.lattice.point(j)),
                    v.re.to_string(),
                    v.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary dump: magic `LPDOSEC1`, then little-endian `u64` dim, radius,
    /// margin, `f64` source and target exponents, and `n²` `(re, im)` pairs
    /// in row-major order.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        for v in [
            self.lattice.dim as u64,
            self.lattice.radius as u64,
            self.margin as u64,
        ] {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&self.source.s.to_le_bytes())?;
        f.write_all(&self.target.s.to_le_bytes())?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.matrix[(i, j)];
                f.write_all(&v.re.to_le_bytes())?;
                f.write_all(&v.im.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ShapeMismatch("not a section dump".into()));
        }
        let mut b8 = [0u8; 8];
        let mut u = || -> Result<u64> {
            f.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let dim = u()? as usize;
        let radius = u()? as usize;
        let margin = u()? as usize;
        let source = f64::from_bits(u()?);
        let target = f64::from_bits(u()?);
        let lattice = LatticeBox::new(dim, radius, 0)?;
        let n = lattice.len();
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let re = f64::from_bits(u()?);
            let im = f64::from_bits(u()?);
            data.push(Complex64::new(re, im));
        }
        let matrix = DMatrix::from_row_slice(n, n, &data);
        Ok(Self::new(lattice, matrix, source, target)?.with_margin(margin))
    }
}

const MAGIC: &[u8; 8] = b"LPDOSEC1";

fn fmt_point(k: &[i64]) -> String {
    k.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Storage indices of points of `lattice` at least `margin` layers inside.
pub fn interior_indices(lattice: &LatticeBox, margin: usize) -> Vec<usize> {
    (0..lattice.len())
        .filter(|&i| lattice.within_margin(&lattice.point(i), margin))
        .collect()
}

/// Interior indices with the extra restriction `|k| ≥ floor`.
pub fn window_indices(lattice: &LatticeBox, margin: usize, floor: f64) -> Vec<usize> {
    interior_indices(lattice, margin)
        .into_iter()
        .filter(|&i| norm(&lattice.point(i)) >= floor)
        .collect()
}

/// Sub-matrix on the given row and column index lists.
pub fn submatrix(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Smallest singular value of a square matrix.
pub fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().min()
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `(T_a u)(k) = ∫ e^{2πik·x} a(k,x) û(x) dx` on every stored point of `u`,
/// by the trapezoid rule on `grid`.
pub fn apply(a: &Symbol, u: &LatticeFunction, grid: &TorusGrid) -> Result<LatticeFunction> {
    a.check_dim(u.lattice.dim)?;
    let uh = dft(u, *grid)?;
    let m = grid.m;
    let phase: Vec<Complex64> = (0..m)
        .map(|t| Complex64::from_polar(1.0, 2.0 * PI * t as f64 / m as f64))
        .collect();
    let multi: Vec<Vec<usize>> = (0..grid.len()).map(|i| grid.multi(i)).collect();
    let scale = 1.0 / grid.len() as f64;
    let lat = u.lattice;
    let values = par::try_map(lat.len(), |i| -> Result<Complex64> {
        let k = lat.point(i);
        let row = a.row(&k, grid)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, mi) in multi.iter().enumerate() {
            let t = mi
                .iter()
                .zip(&k)
                .fold(0i64, |s, (&mj, &kj)| s + kj * mj as i64)
                .rem_euclid(m as i64) as usize;
            acc += phase[t] * row[x] * uh.values[x];
        }
        Ok(acc * scale)
    })?;
    LatticeFunction::from_values(lat, values)
}

/// Per-row Fourier coefficients of `a(k,·)` (indexed by frequency mod M).
fn row_coefficients(a: &Symbol, k: &[i64], grid: &TorusGrid) -> Result<Vec<Complex64>> {
    let mut c = a.row(k, grid)?;
    fft_nd(&mut c, *grid, false);
    let scale = 1.0 / grid.len() as f64;
    c.iter_mut().for_each(|v| *v *= scale);
    Ok(c)
}

/// Kernel `K(k,l) = ∫ a(k,x) e^{2πi(k−l)·x} dx` for `k` in `rows`, `l` in `cols`.
/// Needs `M ≥ N_rows + N_cols + 1` so that distinct offsets `l − k` stay distinct
/// modulo `M` as far as the grid allows.
pub fn section_rect(
    a: &Symbol,
    rows: &LatticeBox,
    cols: &LatticeBox,
    grid: &TorusGrid,
) -> Result<DMatrix<Complex64>> {
    a.check_dim(rows.dim)?;
    a.check_dim(cols.dim)?;
    a.check_dim(grid.dim)?;
    let need = rows.extent() + cols.extent() + 1;
    if grid.m < need {
        return Err(Error::Aliasing {
            m: grid.m,
            radius: rows.extent().max(cols.extent()),
            need,
        });
    }
    let col_pts = cols.points();
    let row_data = par::try_map(rows.len(), |i| -> Result<Vec<Complex64>> {
        let k = rows.point(i);
        let c = row_coefficients(a, &k, grid)?;
        Ok(col_pts
            .iter()
            .map(|l| {
                let f: Vec<i64> = l.iter().zip(&k).map(|(lj, kj)| lj - kj).collect();
                c[grid.wrap(&f)]
            })
            .collect())
    })?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        row_data[i][j]
    }))
}

/// Section of `T_a` on `lattice` (halo ignored), tagged `H^{s₁} → H^{s₂}`.
pub fn finite_section(
    a: &Symbol,
    lattice: &LatticeBox,
    grid: &TorusGrid,
    s1: f64,
    s2: f64,
) -> Result<FiniteSectionOperator> {
    let b = lattice.interior();
    grid.check_extent(b.radius)?;
    let m = section_rect(a, &b, &b, grid)?;
    FiniteSectionOperator::new(b, m, s1, s2)
}

/// Interior section of `T_a T_b`, summing the middle index over the box
/// enlarged by `pad` layers.
pub fn section_product(
    a: &Symbol,
    b: &Symbol,
    lattice: &LatticeBox,
    grid: &TorusGrid,
    pad: usize,
) -> Result<DMatrix<Complex64>> {
    let inner = lattice.interior();
    let mid = LatticeBox::new(inner.dim, inner.radius + pad, 0)?;
    let left = section_rect(a, &inner, &mid, grid)?;
    let right = section_rect(b, &mid, &inner, grid)?;
    Ok(left * right)
}

/// `‖u‖_{H^s} = ‖Λ_s u‖_{ℓ²}` over every stored point.
pub fn sobolev_norm(u: &LatticeFunction, s: f64) -> f64 {
    let spec = SobolevSpec::new(s);
    u.values
        .iter()
        .enumerate()
        .map(|(i, v)| (spec.weight(&u.lattice.point(i)) * v.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Finite-section `H^{s₁}→H^{s₂}` norm.
pub fn operator_norm_estimate(a: &FiniteSectionOperator) -> f64 {
    spectral_norm(&a.weighted())
}

/// Adjoint for the weighted inner products, `D_{s₁}⁻² Aᴴ D_{s₂}²`, as a map
/// `H^{s₂} → H^{s₁}`.
pub fn weighted_adjoint(a: &FiniteSectionOperator) -> FiniteSectionOperator {
    let ws = a.source.weights(&a.lattice);
    let wt = a.target.weights(&a.lattice);
    let n = a.len();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        a.matrix[(j, i)].conj() * (wt[j] * wt[j] / (ws[i] * ws[i]))
    });
    FiniteSectionOperator {
        matrix,
        source: a.target,
        target: a.source,
        ..a.clone()
    }
}

/// ℓ² adjoint `Aᴴ`, the dual map `H^{−s₂} → H^{−s₁}`.
pub fn conjugate_transpose(a: &FiniteSectionOperator) -> FiniteSectionOperator {
    FiniteSectionOperator {
        matrix: a.matrix.adjoint(),
        source: SobolevSpec::new(-a.target.s),
        target: SobolevSpec::new(-a.source.s),
        ..a.clone()
    }
}
