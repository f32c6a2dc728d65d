//! Uniform grids on the torus, the lattice Fourier transform and spectral
//! falling-factorial derivatives.
//!
//! Frequencies are centered: grid index `m` stands for `m` when `m < M/2` and
//! `m - M` when `m > M/2`. For even `M` the Nyquist index `M/2` is split
//! evenly between `+M/2` and `-M/2`, which keeps real data real under
//! off-grid evaluation and spectral multipliers.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticeFunction, MultiIndex};

/// Uniform grid `xⱼ = mⱼ/M`, `mⱼ ∈ {0..M-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub m: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        if dim == 0 || m == 0 {
            return Err(Error::InvalidParams(
                "torus grid needs positive dimension and resolution".into(),
            ));
        }
        Ok(TorusGrid { dim, m })
    }

    /// Number of grid points `Mⁿ`.
    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of grid point `idx` (row-major in `m_1..m_n`).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi(idx)
            .into_iter()
            .map(|mj| mj as f64 / self.m as f64)
            .collect()
    }

    /// Integer grid coordinates of `idx`.
    pub fn multi(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        let mut rem = idx;
        for j in (0..self.dim).rev() {
            out[j] = rem % self.m;
            rem /= self.m;
        }
        out
    }

    /// Grid index of the integer frequency vector `f`, reduced mod `M`.
    pub fn wrap(&self, f: &[i64]) -> usize {
        let m = self.m as i64;
        f.iter()
            .fold(0usize, |acc, &fj| acc * self.m + fj.rem_euclid(m) as usize)
    }

    /// Centered frequency of grid index `mj` along one axis. The Nyquist
    /// index of an even grid maps to `+M/2`.
    pub fn centered(&self, mj: usize) -> i64 {
        if 2 * mj <= self.m {
            mj as i64
        } else {
            mj as i64 - self.m as i64
        }
    }

    fn is_nyquist(&self, mj: usize) -> bool {
        self.m % 2 == 0 && 2 * mj == self.m
    }

    /// Enforce `M ≥ 2(N+h)+1` for lattice functions on `lattice`.
    pub fn check_box(&self, lattice: &LatticeBox) -> Result<()> {
        if lattice.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: lattice.dim,
            });
        }
        self.check_extent(lattice.extent())
    }

    /// Enforce `M ≥ 2e+1`.
    pub fn check_extent(&self, extent: usize) -> Result<()> {
        let need = 2 * extent + 1;
        if self.m < need {
            return Err(Error::Aliasing {
                m: self.m,
                radius: extent,
                need,
            });
        }
        Ok(())
    }

    /// Smallest power of two `M ≥ 2e+1`.
    pub fn for_extent(dim: usize, extent: usize) -> TorusGrid {
        TorusGrid {
            dim,
            m: (2 * extent + 1).next_power_of_two(),
        }
    }
}

/// Samples of a trigonometric polynomial on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusFunction {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl TorusFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid holds {} points, got {} samples",
                grid.len(),
                values.len()
            )));
        }
        Ok(TorusFunction { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        TorusFunction { grid, values }
    }

    /// Fourier coefficients `c(f) = M⁻ⁿ Σ_x e^{-2πif·x} g(x)` indexed by grid
    /// index (frequency mod M).
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut c = self.values.clone();
        fft_nd(&mut c, self.grid, false);
        let scale = 1.0 / self.grid.len() as f64;
        c.iter_mut().for_each(|v| *v *= scale);
        c
    }

    /// `∫_{𝕋ⁿ} g(x) dx` by the trapezoid rule.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.grid.len() as f64
    }

    /// Evaluate the interpolating trigonometric polynomial at an arbitrary `x`.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let c = self.coefficients();
        let g = self.grid;
        // Per-axis phase tables: e^{2πifx} for every grid index.
        let tables: Vec<Vec<Complex64>> = (0..g.dim)
            .map(|j| {
                (0..g.m)
                    .map(|mj| {
                        if g.is_nyquist(mj) {
                            let h = (g.m / 2) as f64;
                            Complex64::new((2.0 * PI * h * x[j]).cos(), 0.0)
                        } else {
                            let f = g.centered(mj) as f64;
                            Complex64::from_polar(1.0, 2.0 * PI * f * x[j])
                        }
                    })
                    .collect()
            })
            .collect();
        c.iter()
            .enumerate()
            .map(|(i, ci)| {
                let mi = g.multi(i);
                let mut w = *ci;
                for j in 0..g.dim {
                    w *= tables[j][mi[j]];
                }
                w
            })
            .sum()
    }

    /// Resample onto another grid of the same dimension through the
    /// trigonometric interpolant.
    pub fn resample(&self, target: TorusGrid) -> Result<TorusFunction> {
        if target.dim != self.grid.dim {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim,
                found: target.dim,
            });
        }
        if target == self.grid {
            return Ok(self.clone());
        }
        let g = self.grid;
        let c = self.coefficients();
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        for (i, ci) in c.iter().enumerate() {
            if ci.norm() == 0.0 {
                continue;
            }
            // Spread Nyquist coefficients over both signs.
            let mut parts: Vec<(Vec<i64>, Complex64)> = vec![(Vec::new(), *ci)];
            for mj in g.multi(i) {
                let mut next = Vec::with_capacity(parts.len() * 2);
                for (f, w) in parts {
                    if g.is_nyquist(mj) {
                        let h = (g.m / 2) as i64;
                        let mut a = f.clone();
                        a.push(h);
                        next.push((a, w * 0.5));
                        let mut b = f;
                        b.push(-h);
                        next.push((b, w * 0.5));
                    } else {
                        let mut a = f;
                        a.push(g.centered(mj));
                        next.push((a, w));
                    }
                }
                parts = next;
            }
            for (f, w) in parts {
                out[target.wrap(&f)] += w;
            }
        }
        fft_nd(&mut out, target, true);
        Ok(TorusFunction {
            grid: target,
            values: out,
        })
    }
}

/// `û(x) = Σ_k e^{-2πik·x} u(k)` over every stored point of `u`.
pub fn dft(u: &LatticeFunction, grid: TorusGrid) -> Result<TorusFunction> {
    grid.check_box(&u.lattice)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, v) in u.values.iter().enumerate() {
        let k = u.lattice.point(i);
        buf[grid.wrap(&k)] += *v;
    }
    fft_nd(&mut buf, grid, false);
    Ok(TorusFunction { grid, values: buf })
}

/// `u(k) = ∫ e^{2πik·x} f(x) dx` on every stored point of `lattice`.
pub fn idft(f: &TorusFunction, lattice: LatticeBox) -> Result<LatticeFunction> {
    f.grid.check_box(&lattice)?;
    let mut buf = f.values.clone();
    fft_nd(&mut buf, f.grid, true);
    let scale = 1.0 / f.grid.len() as f64;
    Ok(LatticeFunction::from_fn(lattice, |k| {
        buf[f.grid.wrap(k)] * scale
    }))
}

/// Falling factorial `f(f-1)⋯(f-b+1)`.
pub fn falling_factorial(f: i64, b: usize) -> f64 {
    (0..b as i64).map(|r| (f - r) as f64).product()
}

/// Relative magnitude below which Fourier coefficients count as round-off
/// before a falling-factorial multiplier is applied.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Spectral multiplier of `D⁽ᵝ⁾` at grid index `mi`.
fn falling_multiplier(grid: &TorusGrid, mi: &[usize], beta: &MultiIndex) -> f64 {
    mi.iter()
        .zip(&beta.0)
        .map(|(&mj, &bj)| {
            if grid.is_nyquist(mj) {
                let h = (grid.m / 2) as i64;
                0.5 * (falling_factorial(h, bj) + falling_factorial(-h, bj))
            } else {
                falling_factorial(grid.centered(mj), bj)
            }
        })
        .product()
}

/// Apply `D⁽ᵝ⁾` to raw grid samples in place.
pub(crate) fn falling_derivative_in_place(
    values: &mut [Complex64],
    grid: TorusGrid,
    beta: &MultiIndex,
) {
    if beta.is_zero() {
        return;
    }
    fft_nd(values, grid, false);
    let scale = 1.0 / grid.len() as f64;
    // Coefficients at round-off level would be amplified by up to (M/2)^|β|.
    let floor = NOISE_FLOOR * values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (i, v) in values.iter_mut().enumerate() {
        if v.norm() <= floor {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let w = falling_multiplier(&grid, &grid.multi(i), beta);
        *v *= w * scale;
    }
    fft_nd(values, grid, true);
}

/// `D⁽ᵝ⁾f`: the coefficient at frequency `f` is multiplied by
/// `Πⱼ fⱼ(fⱼ-1)⋯(fⱼ-βⱼ+1)`.
pub fn falling_derivative(f: &TorusFunction, beta: &MultiIndex) -> Result<TorusFunction> {
    if beta.dim() != f.grid.dim {
        return Err(Error::DimensionMismatch {
            expected: f.grid.dim,
            found: beta.dim(),
        });
    }
    let mut values = f.values.clone();
    falling_derivative_in_place(&mut values, f.grid, beta);
    Ok(TorusFunction {
        grid: f.grid,
        values,
    })
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Unnormalized n-dimensional FFT over a row-major `Mⁿ` buffer. Forward uses
/// `e^{-2πi}`, inverse `e^{+2πi}`.
pub(crate) fn fft_nd(data: &mut [Complex64], grid: TorusGrid, inverse: bool) {
    let m = grid.m;
    let fft = plan(m, inverse);
    if grid.dim == 1 {
        fft.process(data);
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..grid.dim {
        let stride = m.pow((grid.dim - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }
}
