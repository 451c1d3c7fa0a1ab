use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wavefield::autodiff::{make_circle_bank, CircleSampling};
use wavefield::dataset::{generate_test_grid, generate_training_set};
use wavefield::par;
use wavefield::scene::{sample_random_scene, Extent, SceneConfig};
use wavefield::{build_model, ModelSpec};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn run<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    if parallel {
        f()
    } else {
        par::sequential(f)
    }
}

fn bench_dataset(c: &mut Criterion) {
    let scene = sample_random_scene(7, &SceneConfig::new(6, Extent::square(2.5), 3.5e9)).unwrap();
    let spacing = scene.wavelength() / 4.0;
    let mut group = c.benchmark_group("test_grid_2.5m");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(parallel, || generate_test_grid(&scene, spacing).unwrap()))
        });
    }
    group.finish();
}

fn bench_batch_eval(c: &mut Criterion) {
    let scene = sample_random_scene(7, &SceneConfig::new(4, Extent::square(2.5), 3.5e9)).unwrap();
    let points = generate_training_set(&scene, 1024, 1).unwrap().locations();
    let bank = make_circle_bank(500, scene.wavelength(), CircleSampling::Equiangular).unwrap();
    let model = build_model(&ModelSpec::mb().with_dictionary(500), Some(&bank), 3).unwrap();
    let targets = vec![num_complex::Complex64::new(0.0, 0.0); 256];
    let mut group = c.benchmark_group("mb_d500");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new("forward_1024", name), |b| {
            b.iter(|| run(parallel, || model.forward_batch(&points).unwrap()))
        });
        group.bench_function(BenchmarkId::new("loss_backward_256", name), |b| {
            let mut params = model.params().clone();
            b.iter(|| {
                run(parallel, || {
                    let (g, loss) = model.loss_graph(&points[..256], &targets).unwrap();
                    params.zero_grads();
                    g.backward(loss, &mut params).unwrap();
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_dataset, bench_batch_eval);
criterion_main!(benches);
