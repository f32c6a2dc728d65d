use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lattice_pdo::adjointness::{deficiency_probe, AdjointMode, Sign};
use lattice_pdo::calculus::adjoint_symbol;
use lattice_pdo::lattice::LatticeBox;
use lattice_pdo::par;
use lattice_pdo::quantization::finite_section;
use lattice_pdo::symbol::{builtin_symbol, Builtin, TrigTerm};
use lattice_pdo::torus::TorusGrid;
use lattice_pdo::Complex64;

fn perturbed() -> lattice_pdo::symbol::Symbol {
    builtin_symbol(
        1,
        &Builtin::Perturbed {
            m: 1.0,
            terms: vec![TrigTerm::new(vec![1], Complex64::new(0.3, 0.0))],
        },
    )
    .unwrap()
}

fn sections(c: &mut Criterion) {
    let a = perturbed();
    let star = adjoint_symbol(&a, 4).unwrap().symbol;
    let g = TorusGrid::new(1, 128).unwrap();
    let mut group = c.benchmark_group("adjoint_section");
    for n in [16usize, 32] {
        let lat = LatticeBox::new(1, n, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", n), &lat, |b, lat| {
            b.iter(|| finite_section(&star, lat, &g, 0.0, 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &lat, |b, lat| {
            b.iter(|| par::sequential(|| finite_section(&star, lat, &g, 0.0, 0.0).unwrap()))
        });
    }
    group.finish();

    let sym2 = builtin_symbol(2, &Builtin::EllipticDemo { m: 1.0 }).unwrap();
    let lat2 = LatticeBox::new(2, 8, 0).unwrap();
    let g2 = TorusGrid::new(2, 64).unwrap();
    let mut group = c.benchmark_group("section_2d");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| finite_section(&sym2, &lat2, &g2, 0.0, 0.0).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| finite_section(&sym2, &lat2, &g2, 0.0, 0.0).unwrap()))
    });
    group.finish();
}

fn deficiency(c: &mut Criterion) {
    let a = perturbed();
    let g = TorusGrid::new(1, 128).unwrap();
    let radii = [8, 16, 24, 32];
    let signs = [Sign::Plus, Sign::Minus];
    let mut group = c.benchmark_group("deficiency_scan");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            deficiency_probe(&a, 0.5, 0.0, AdjointMode::ExactWeighted, &radii, &g, &signs).unwrap()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::sequential(|| {
                deficiency_probe(&a, 0.5, 0.0, AdjointMode::ExactWeighted, &radii, &g, &signs)
                    .unwrap()
            })
        })
    });
    group.finish();
}

criterion_group!(benches, sections, deficiency);
criterion_main!(benches);
