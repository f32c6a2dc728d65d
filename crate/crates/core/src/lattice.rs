//! Multi-indices, truncated lattice boxes and forward differences.
//!
//! Points of a [`LatticeBox`] are stored row-major in lexicographic order of
//! `(k_1, ..., k_n)`, each coordinate running from `-(N+h)` to `N+h`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multi-index `α ∈ N₀ⁿ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `e_j` scaled by `order`.
    pub fn axis(dim: usize, j: usize, order: usize) -> Self {
        let mut v = vec![0; dim];
        v[j] = order;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|α| = Σ αⱼ`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    /// `α! = Πⱼ αⱼ!`.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(|i| i as f64).product::<f64>())
            .product()
    }

    /// `kᵅ = Πⱼ kⱼ^αⱼ`.
    pub fn monomial(&self, k: &[i64]) -> f64 {
        self.0
            .iter()
            .zip(k)
            .map(|(&a, &kj)| (kj as f64).powi(a as i32))
            .product()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Entry-wise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All `β ≤ α` entry-wise, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.dim()))];
        for &a in &self.0 {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..=a).map(move |b| {
                        let mut q = p.clone();
                        q.0.push(b);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// `Πⱼ C(αⱼ, βⱼ)`.
    pub fn binomial(&self, beta: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&a, &b)| binom(a, b))
            .product()
    }

    /// All multi-indices of dimension `dim` with `|α| < bound`, ordered by `|α|`
    /// then lexicographically.
    pub fn all_below_order(dim: usize, bound: usize) -> Vec<MultiIndex> {
        if bound == 0 {
            return Vec::new();
        }
        let mut all = MultiIndex(vec![bound - 1; dim])
            .below()
            .into_iter()
            .filter(|a| a.order() < bound)
            .collect::<Vec<_>>();
        all.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| b.0.cmp(&a.0)));
        all
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The truncated lattice `{-N..N}ⁿ` plus `halo` extra layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub dim: usize,
    pub radius: usize,
    pub halo: usize,
}

impl LatticeBox {
    pub fn new(dim: usize, radius: usize, halo: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams(
                "lattice dimension must be at least 1".into(),
            ));
        }
        if radius == 0 {
            return Err(Error::InvalidParams(
                "lattice radius must be at least 1".into(),
            ));
        }
        Ok(LatticeBox { dim, radius, halo })
    }

    /// Extent `N + h` of the stored region.
    pub fn extent(&self) -> usize {
        self.radius + self.halo
    }

    /// Points per axis including the halo.
    pub fn side(&self) -> usize {
        2 * self.extent() + 1
    }

    /// Number of stored points (interior plus halo).
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of interior points `(2N+1)ⁿ`.
    pub fn interior_len(&self) -> usize {
        (2 * self.radius + 1).pow(self.dim as u32)
    }

    /// The same box without halo.
    pub fn interior(&self) -> LatticeBox {
        LatticeBox { halo: 0, ..*self }
    }

    pub fn with_halo(&self, halo: usize) -> LatticeBox {
        LatticeBox { halo, ..*self }
    }

    /// Lattice point stored at `idx`.
    pub fn point(&self, idx: usize) -> Vec<i64> {
        let side = self.side();
        let e = self.extent() as i64;
        let mut k = vec![0i64; self.dim];
        let mut rem = idx;
        for j in (0..self.dim).rev() {
            k[j] = (rem % side) as i64 - e;
            rem /= side;
        }
        k
    }

    /// Storage index of `k`, if it lies in the stored region.
    pub fn index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let e = self.extent() as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &kj in k {
            if kj < -e || kj > e {
                return None;
            }
            idx = idx * side + (kj + e) as usize;
        }
        Some(idx)
    }

    /// All stored points in storage order.
    pub fn points(&self) -> Vec<Vec<i64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Whether `k` is an interior point, i.e. `|kⱼ| ≤ N` for all j.
    pub fn contains_interior(&self, k: &[i64]) -> bool {
        k.iter()
            .all(|&kj| kj.unsigned_abs() as usize <= self.radius)
    }

    /// Whether `k` lies at least `margin` layers inside the interior.
    pub fn within_margin(&self, k: &[i64], margin: usize) -> bool {
        let r = self.radius.saturating_sub(margin);
        k.iter().all(|&kj| kj.unsigned_abs() as usize <= r)
    }
}

/// Euclidean norm `|k|`.
pub fn norm(k: &[i64]) -> f64 {
    k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()
}

/// `Λ_s(k) = (1+|k|²)^{s/2}`.
pub fn japanese_bracket(k: &[i64], s: f64) -> f64 {
    let n2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
    (1.0 + n2).powf(0.5 * s)
}

/// Complex values on every stored point of a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFunction {
    pub lattice: LatticeBox,
    pub values: Vec<Complex64>,
}

impl LatticeFunction {
    pub fn zeros(lattice: LatticeBox) -> Self {
        LatticeFunction {
            lattice,
            values: vec![Complex64::new(0.0, 0.0); lattice.len()],
        }
    }

    pub fn from_fn(lattice: LatticeBox, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let values = (0..lattice.len()).map(|i| f(&lattice.point(i))).collect();
        LatticeFunction { lattice, values }
    }

    pub fn from_values(lattice: LatticeBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::ShapeMismatch(format!(
                "box holds {} points, got {} values",
                lattice.len(),
                values.len()
            )));
        }
        Ok(LatticeFunction { lattice, values })
    }

    /// Kronecker delta at `at`.
    pub fn delta(lattice: LatticeBox, at: &[i64]) -> Result<Self> {
        let mut u = Self::zeros(lattice);
        let i = lattice
            .index(at)
            .ok_or_else(|| Error::OutsideTable(at.to_vec()))?;
        u.values[i] = Complex64::new(1.0, 0.0);
        Ok(u)
    }

    /// Value at `k`, or `None` outside the stored region.
    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.lattice.index(k).map(|i| self.values[i])
    }

    /// Restrict to a smaller box with the same dimension.
    pub fn restrict(&self, target: LatticeBox) -> Result<LatticeFunction> {
        if target.dim != self.lattice.dim {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.dim,
                found: target.dim,
            });
        }
        if target.extent() > self.lattice.extent() {
            return Err(Error::ShapeMismatch(format!(
                "cannot restrict extent {} to larger extent {}",
                self.lattice.extent(),
                target.extent()
            )));
        }
        Ok(LatticeFunction::from_fn(target, |k| self.get(k).unwrap()))
    }

    /// Extend by zero to a larger box.
    pub fn extend(&self, target: LatticeBox) -> LatticeFunction {
        LatticeFunction::from_fn(target, |k| self.get(k).unwrap_or_default())
    }

    /// Plain ℓ² norm over all stored points.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> LatticeFunction {
        LatticeFunction {
            lattice: self.lattice,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// `Δᵅu` on the box with halo reduced by `|α|`.
pub fn forward_difference(u: &LatticeFunction, alpha: &MultiIndex) -> Result<LatticeFunction> {
    let lat = u.lattice;
    if alpha.dim() != lat.dim {
        return Err(Error::DimensionMismatch {
            expected: lat.dim,
            found: alpha.dim(),
        });
    }
    let order = alpha.order();
    if order > lat.halo {
        return Err(Error::StencilOutOfRange {
            order,
            halo: lat.halo,
        });
    }
    let mut cur = u.clone();
    for j in 0..lat.dim {
        for _ in 0..alpha.0[j] {
            let out_box = cur.lattice.with_halo(cur.lattice.halo - 1);
            cur = LatticeFunction::from_fn(out_box, |k| {
                let mut kp = k.to_vec();
                kp[j] += 1;
                cur.get(&kp).unwrap() - cur.get(k).unwrap()
            });
        }
    }
    Ok(cur)
}

/// `max_{|kⱼ| ≤ N} |kᵅ (Δᵝu)(k)|`.
pub fn schwartz_seminorm(
    u: &LatticeFunction,
    alpha: &MultiIndex,
    beta: &MultiIndex,
) -> Result<f64> {
    if alpha.dim() != u.lattice.dim {
        return Err(Error::DimensionMismatch {
            expected: u.lattice.dim,
            found: alpha.dim(),
        });
    }
    let d = forward_difference(u, beta)?;
    let interior = u.lattice.interior();
    Ok((0..interior.len())
        .map(|i| {
            let k = interior.point(i);
            alpha.monomial(&k).abs() * d.get(&k).unwrap().norm()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn storage_order_is_lexicographic() {
        let b = LatticeBox::new(2, 1, 1).unwrap();
        assert_eq!(b.len(), 25);
        assert_eq!(b.point(0), vec![-2, -2]);
        assert_eq!(b.point(1), vec![-2, -1]);
        assert_eq!(b.point(5), vec![-1, -2]);
        for i in 0..b.len() {
            assert_eq!(b.index(&b.point(i)), Some(i));
        }
        assert_eq!(b.index(&[3, 0]), None);
    }

    #[test]
    fn factorial_is_product_of_factorials() {
        assert_eq!(MultiIndex(vec![2, 0, 3]).factorial(), 12.0);
        assert_eq!(MultiIndex(vec![0, 0]).factorial(), 1.0);
    }

    #[test]
    fn multi_indices_below_order() {
        let all = MultiIndex::all_below_order(2, 3);
        assert_eq!(all.len(), 6);
        assert!(all.windows(2).all(|w| w[0].order() <= w[1].order()));
        assert!(MultiIndex::all_below_order(1, 0).is_empty());
    }

    #[test]
    fn differences_of_polynomials() {
        let b = LatticeBox::new(1, 5, 2).unwrap();
        let one = LatticeFunction::from_fn(b, |_| c(1.0));
        let d = forward_difference(&one, &MultiIndex(vec![1])).unwrap();
        assert!(d.values.iter().all(|v| v.norm() == 0.0));

        let id = LatticeFunction::from_fn(b, |k| c(k[0] as f64));
        let d = forward_difference(&id, &MultiIndex(vec![1])).unwrap();
        assert_eq!(d.lattice.halo, 1);
        assert!(d.values.iter().all(|v| *v == c(1.0)));

        let sq = LatticeFunction::from_fn(b, |k| c((k[0] * k[0]) as f64));
        let d2 = forward_difference(&sq, &MultiIndex(vec![2])).unwrap();
        for k in -5i64..=5 {
            // (k+2)² − 2(k+1)² + k², enumerated
            let want = (k + 2) * (k + 2) - 2 * (k + 1) * (k + 1) + k * k;
            assert_eq!(d2.get(&[k]).unwrap(), c(want as f64));
        }
    }

    #[test]
    fn insufficient_halo_is_rejected() {
        let b = LatticeBox::new(1, 3, 1).unwrap();
        let u = LatticeFunction::zeros(b);
        assert!(matches!(
            forward_difference(&u, &MultiIndex(vec![2])),
            Err(Error::StencilOutOfRange { order: 2, halo: 1 })
        ));
    }

    #[test]
    fn seminorms_of_delta_and_geometric_decay() {
        let b = LatticeBox::new(1, 6, 0).unwrap();
        let d = LatticeFunction::delta(b, &[0]).unwrap();
        let z = MultiIndex(vec![0]);
        let one = MultiIndex(vec![1]);
        assert_eq!(schwartz_seminorm(&d, &z, &z).unwrap(), 1.0);
        assert_eq!(schwartz_seminorm(&d, &one, &z).unwrap(), 0.0);

        let g = LatticeFunction::from_fn(b, |k| c(0.5f64.powi(k[0].abs() as i32)));
        let want = (-6i64..=6)
            .map(|k| k.abs() as f64 * 0.5f64.powi(k.abs() as i32))
            .fold(0.0, f64::max);
        assert_eq!(want, 0.5);
        assert_relative_eq!(schwartz_seminorm(&g, &one, &z).unwrap(), want);
    }

    fn arb_fn(b: LatticeBox) -> impl Strategy<Value = LatticeFunction> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), b.len()).prop_map(move |v| {
            LatticeFunction::from_values(
                b,
                v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn difference_is_linear(
            u in arb_fn(LatticeBox { dim: 2, radius: 3, halo: 3 }),
            v in arb_fn(LatticeBox { dim: 2, radius: 3, halo: 3 }),
            a0 in 0usize..2, a1 in 0usize..2,
            cr in -2.0..2.0f64, ci in -2.0..2.0f64,
        ) {
            let alpha = MultiIndex(vec![a0, a1]);
            let cc = Complex64::new(cr, ci);
            let sum = LatticeFunction::from_values(
                u.lattice,
                u.values.iter().zip(&v.values).map(|(a, b)| a + cc * b).collect(),
            ).unwrap();
            let lhs = forward_difference(&sum, &alpha).unwrap();
            let du = forward_difference(&u, &alpha).unwrap();
            let dv = forward_difference(&v, &alpha).unwrap();
            for i in 0..lhs.values.len() {
                let rhs = du.values[i] + cc * dv.values[i];
                prop_assert!((lhs.values[i] - rhs).norm() < 1e-12);
            }
        }

        #[test]
        fn differences_compose(
            u in arb_fn(LatticeBox { dim: 2, radius: 2, halo: 4 }),
            a in (0usize..2, 0usize..2), b in (0usize..2, 0usize..2),
        ) {
            let alpha = MultiIndex(vec![a.0, a.1]);
            let beta = MultiIndex(vec![b.0, b.1]);
            let lhs = forward_difference(&forward_difference(&u, &beta).unwrap(), &alpha).unwrap();
            let rhs = forward_difference(&u, &alpha.add(&beta)).unwrap();
            prop_assert_eq!(lhs.lattice, rhs.lattice);
            for i in 0..lhs.values.len() {
                prop_assert!((lhs.values[i] - rhs.values[i]).norm() < 1e-12);
            }
        }

        #[test]
        fn seminorm_is_homogeneous(
            u in arb_fn(LatticeBox { dim: 1, radius: 6, halo: 2 }),
            cr in -3.0..3.0f64, ci in -3.0..3.0f64, a in 0usize..3, b in 0usize..3,
        ) {
            let cc = Complex64::new(cr, ci);
            let alpha = MultiIndex(vec![a]);
            let beta = MultiIndex(vec![b]);
            let lhs = schwartz_seminorm(&u.scale(cc), &alpha, &beta).unwrap();
            let rhs = cc.norm() * schwartz_seminorm(&u, &alpha, &beta).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
