use criterion::{black_box, criterion_group, criterion_main, Criterion};
use minimax_core::certify::{classify_point, verify, CertifyConfig, ClassifyConfig, VerifyOptions};
use minimax_core::deriv::{generalized_second, subderivative, QuotientScheme};
use minimax_core::gan::{GanConfig, GanSaaInstance};
use minimax_core::{build_example, ExampleId, Point};

fn stationarity(c: &mut Criterion) {
    let quad = build_example(ExampleId::Quadratic5xy, None).unwrap();
    let nonsmooth = build_example(ExampleId::Nonsmooth935, None).unwrap();
    let origin = Point::new(vec![0.0], vec![0.0]);
    let cfg = CertifyConfig::default();
    c.bench_function("verify smooth order 2", |b| {
        b.iter(|| verify(&quad, black_box(&origin), &VerifyOptions::default(), &cfg).unwrap())
    });
    let nonsmooth_opts = VerifyOptions { order: 2, nonsmooth: true, assume_smooth: false };
    c.bench_function("verify nonsmooth order 2", |b| {
        b.iter(|| verify(&nonsmooth, black_box(&origin), &nonsmooth_opts, &cfg).unwrap())
    });
}

fn classification(c: &mut Criterion) {
    let xy_cos = build_example(ExampleId::XyCos, None).unwrap();
    let point = Point::new(vec![0.0], vec![std::f64::consts::PI]);
    let cfg = ClassifyConfig::default();
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    group.bench_function("xy-cos at (0, pi)", |b| b.iter(|| classify_point(&xy_cos, black_box(&point), &cfg).unwrap()));
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let scheme = QuotientScheme::default();
    let g = |z: &[f64]| z.iter().map(|v| v.abs().powi(3) - v.cos()).sum::<f64>();
    let x = [0.3, -0.2, 0.0, 0.7];
    let v = [1.0, 0.5, -1.0, 0.25];
    c.bench_function("subderivative dim 4", |b| b.iter(|| subderivative(&g, black_box(&x), &v, &scheme).unwrap()));
    c.bench_function("generalized second dim 4", |b| {
        b.iter(|| generalized_second(&g, black_box(&x), &v, &v, &scheme).unwrap())
    });
}

fn gan(c: &mut Criterion) {
    let inst = GanSaaInstance::build(&GanConfig::desk(1, 256)).unwrap();
    let x = inst.x_ref.clone();
    let y = vec![0.3; inst.m()];
    c.bench_function("gan gradients N=256", |b| b.iter(|| inst.gradients(black_box(&x), &y).unwrap()));
    c.bench_function("gan hessian blocks N=256", |b| b.iter(|| inst.hessian_blocks(black_box(&x), &y).unwrap()));
}

criterion_group!(benches, stationarity, classification, estimators, gan);
criterion_main!(benches);
