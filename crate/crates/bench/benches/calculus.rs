use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use squatcalc_core::calculus::funcalc_intrinsic;
use squatcalc_core::frac_power::{frac_power_balakrishnan, frac_power_komatsu, frac_power_spectral};
use squatcalc_core::random::{random_matrix, random_sectorial, seeded};
use squatcalc_core::slice_fn::IntrinsicSliceFunction;
use squatcalc_core::{KomatsuForm, QuadSpec};

fn s_spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("s_spectrum");
    for n in [4, 16, 64] {
        let t = random_matrix(&mut seeded(n as u64), n, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| t.s_spectrum()));
    }
    group.finish();
}

fn funcalc(c: &mut Criterion) {
    let f = IntrinsicSliceFunction::polynomial(vec![1.0, 0.0, 1.0]);
    let mut group = c.benchmark_group("funcalc");
    group.sample_size(10);
    for n in [4, 8] {
        let t = random_matrix(&mut seeded(10 + n as u64), n, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| funcalc_intrinsic(&f, t, None).unwrap())
        });
    }
    group.finish();
}

fn frac_power(c: &mut Criterion) {
    let t = random_sectorial(&mut seeded(7), 6, std::f64::consts::FRAC_PI_3, 0.5, 3.0).matrix;
    let quad = QuadSpec::default();
    let mut group = c.benchmark_group("frac_power_n6");
    group.sample_size(10);
    group.bench_function("spectral", |b| b.iter(|| frac_power_spectral(&t, 0.5).unwrap()));
    group.bench_function("balakrishnan", |b| b.iter(|| frac_power_balakrishnan(&t, 0.5, &quad).unwrap()));
    group.bench_function("komatsu", |b| {
        b.iter(|| frac_power_komatsu(&t, 0.5, KomatsuForm::First, &quad).unwrap())
    });
    group.finish();
}

criterion_group!(benches, s_spectrum, funcalc, frac_power);
criterion_main!(benches);
