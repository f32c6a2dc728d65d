//! Invariants checked on random inputs.

use lattice_pdo::adjointness::{build_block, pairing, symmetry_defect, AdjointMode, Restriction};
use lattice_pdo::calculus::compose_symbols;
use lattice_pdo::lattice::{LatticeBox, LatticeFunction};
use lattice_pdo::quantization::{
    apply, finite_section, max_abs, operator_norm_estimate, sobolev_norm, weighted_adjoint,
};
use lattice_pdo::symbol::{builtin_symbol, Builtin, Symbol, TrigTerm};
use lattice_pdo::torus::{dft, TorusGrid};
use lattice_pdo::Complex64;
use proptest::prelude::*;

const N: usize = 8;

fn lat() -> LatticeBox {
    LatticeBox::new(1, N, 0).unwrap()
}

fn grid() -> TorusGrid {
    TorusGrid::new(1, 64).unwrap()
}

fn values() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)),
        2 * N + 1,
    )
}

fn func(v: Vec<Complex64>) -> LatticeFunction {
    LatticeFunction::from_values(lat(), v).unwrap()
}

fn trig(c1: f64, c2: f64, m: f64) -> Symbol {
    builtin_symbol(
        1,
        &Builtin::Perturbed {
            m,
            terms: vec![
                TrigTerm::new(vec![1], Complex64::new(c1, 0.0)),
                TrigTerm::new(vec![-2], Complex64::new(0.0, c2)),
            ],
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plancherel(v in values()) {
        let u = func(v);
        let uh = dft(&u, grid()).unwrap();
        let l2 = uh.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / uh.values.len() as f64;
        prop_assert!((l2 - u.l2_norm().powi(2)).abs() <= 1e-12 * (1.0 + l2));
    }

    #[test]
    fn apply_is_linear(v in values(), w in values(), a in -2.0..2.0f64, c1 in -0.4..0.4f64, c2 in -0.4..0.4f64) {
        let sym = trig(c1, c2, 1.0);
        let (u, w) = (func(v), func(w));
        let combo = LatticeFunction::from_fn(lat(), |k| u.get(k).unwrap() * a + w.get(k).unwrap());
        let lhs = apply(&sym, &combo, &grid()).unwrap();
        let tu = apply(&sym, &u, &grid()).unwrap();
        let tw = apply(&sym, &w, &grid()).unwrap();
        for (i, z) in lhs.values.iter().enumerate() {
            prop_assert!((z - (tu.values[i] * a + tw.values[i])).norm() < 1e-10);
        }
    }

    #[test]
    fn weighted_adjoint_is_involution(c1 in -0.4..0.4f64, c2 in -0.4..0.4f64, s in -1.0..1.0f64, t in -1.0..1.0f64) {
        let p = finite_section(&trig(c1, c2, 0.5), &lat(), &grid(), s, t).unwrap();
        let back = weighted_adjoint(&weighted_adjoint(&p));
        prop_assert!(max_abs(&(&back.matrix - &p.matrix)) < 1e-10);
    }

    #[test]
    fn cauchy_schwarz(v in values(), w in values(), s in -2.0..2.0f64) {
        let (u, w) = (func(v), func(w));
        let bound = sobolev_norm(&u, s) * sobolev_norm(&w, -s);
        prop_assert!(pairing(&u, &w).norm() <= bound * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn sobolev_norm_grows_with_s(v in values(), s in -2.0..2.0f64, ds in 0.0..1.0f64) {
        let u = func(v);
        prop_assert!(sobolev_norm(&u, s) <= sobolev_norm(&u, s + ds) * (1.0 + 1e-12));
    }

    #[test]
    fn multiplier_is_isometry(m in -2.0..2.0f64, s in -1.0..1.0f64) {
        let a = builtin_symbol(1, &Builtin::JapaneseBracket { s: m }).unwrap();
        let p = finite_section(&a, &lat(), &grid(), s, s - m).unwrap();
        prop_assert!((operator_norm_estimate(&p) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn multipliers_compose_exactly(a in -1.5..1.5f64, b in -1.5..1.5f64) {
        let x = builtin_symbol(1, &Builtin::JapaneseBracket { s: a }).unwrap();
        let y = builtin_symbol(1, &Builtin::JapaneseBracket { s: b }).unwrap();
        let c = compose_symbols(&x, &y, 3).unwrap().symbol;
        for k in -6..=6i64 {
            let want = (1.0 + (k * k) as f64).powf((a + b) / 2.0);
            prop_assert!((c.eval(&[k], &[0.3]).unwrap().re - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn exact_weighted_block_is_symmetric(c1 in -0.4..0.4f64, c2 in -0.4..0.4f64, s1 in 0.0..1.0f64, s2 in -0.5..0.5f64) {
        let t = build_block(&trig(c1, c2, 1.0), s1, s2, &lat(), &grid(), AdjointMode::ExactWeighted).unwrap();
        prop_assert!(symmetry_defect(&t, Restriction::FullBox) < 1e-10);
    }
}
