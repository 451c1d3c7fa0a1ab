use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefield::autodiff::{
    grad_check, make_circle_bank, CTensor, CircleSampling, GateMode, GradCheckOptions, Graph, ParamStore,
};
use wavefield::scene::Point;
use wavefield::{build_model, ModelKind, ModelSpec};

const LAMBDA: f64 = 0.085_654_988;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> CTensor {
    let n = shape.iter().product();
    let values = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
        .collect();
    CTensor::from_vec(shape, values).unwrap()
}

fn targets(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| Point::new(rng.gen_range(0.0..2.5), rng.gen_range(0.0..2.5))).collect()
}

fn assert_passes(name: &str, report: wavefield::autodiff::GradCheckReport) {
    assert!(report.checked > 0, "{name}: nothing checked");
    assert!(
        report.passed,
        "{name}: max rel error {:.3e} at {:?}",
        report.max_rel_error, report.worst
    );
}

#[test]
fn linear_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = ParamStore::new();
    let w = params.insert("w", random_tensor(&mut rng, &[3, 5], 1.0)).unwrap();
    let b = params.insert("b", random_tensor(&mut rng, &[3], 1.0)).unwrap();
    let x = random_tensor(&mut rng, &[4, 5], 1.0);
    let t = targets(&mut rng, 4);
    let v = params.insert("v", random_tensor(&mut rng, &[1, 3], 1.0)).unwrap();
    let report = grad_check(
        &mut params,
        |p| {
            let mut g = Graph::new();
            let xi = g.input(x.clone());
            let h = g.linear(p, xi, w, Some(b))?;
            let y = g.linear(p, h, v, None)?;
            let loss = g.l2_loss(y, &t)?;
            Ok((g, loss))
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert_passes("linear", report);
}

#[test]
fn relu_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut params = ParamStore::new();
    let w = params.insert("w", random_tensor(&mut rng, &[6, 3], 1.0)).unwrap();
    let v = params.insert("v", random_tensor(&mut rng, &[1, 6], 1.0)).unwrap();
    let x = random_tensor(&mut rng, &[5, 3], 1.0);
    let t = targets(&mut rng, 5);
    let report = grad_check(
        &mut params,
        |p| {
            let mut g = Graph::new();
            let xi = g.input(x.clone());
            let h = g.linear(p, xi, w, None)?;
            let h = g.relu_c(h);
            let y = g.linear(p, h, v, None)?;
            let loss = g.l2_loss(y, &t)?;
            Ok((g, loss))
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert_passes("relu", report);
}

fn gate_graph_check(mode: GateMode, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let d = 7;
    let w = params.insert("w", random_tensor(&mut rng, &[d, 3], 1.5)).unwrap();
    let a = params.insert("a", random_tensor(&mut rng, &[d, 2], 1.0)).unwrap();
    let x = random_tensor(&mut rng, &[4, 3], 1.0);
    let psi_in = random_tensor(&mut rng, &[4, 2], 1.0);
    let t = targets(&mut rng, 4);
    let report = grad_check(
        &mut params,
        |p| {
            let mut g = Graph::new();
            let xi = g.input(x.clone());
            let z = g.linear(p, xi, w, None)?;
            let coeffs = g.gate(z, mode)?;
            let pi = g.input(psi_in.clone());
            let atoms = g.linear(p, pi, a, None)?;
            let y = g.dict_combine(coeffs, atoms)?;
            let loss = g.l2_loss(y, &t)?;
            Ok((g, loss))
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert_passes(mode.name(), report);
}

#[test]
fn gate_and_dictionary_layers() {
    for (i, mode) in [GateMode::PhasePreserving, GateMode::Scaled, GateMode::Magnitude].into_iter().enumerate() {
        gate_graph_check(mode, 10 + i as u64);
    }
}

#[test]
fn fourier_features_and_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bank = make_circle_bank(16, LAMBDA, CircleSampling::Equiangular).unwrap();
    let pts = points(&mut rng, 6);
    let t = targets(&mut rng, 6);
    let mut params = ParamStore::new();
    let w = params.insert("w", random_tensor(&mut rng, &[1, 16], 0.5)).unwrap();
    let s = params.insert("s", random_tensor(&mut rng, &[1], 1.0)).unwrap();
    let report = grad_check(
        &mut params,
        |p| {
            let mut g = Graph::new();
            let psi = g.fourier_features(&pts, &bank);
            let y = g.linear(p, psi, w, None)?;
            let y = g.scale(p, y, s)?;
            let loss = g.l2_loss(y, &t)?;
            Ok((g, loss))
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert_passes("fourier+scale", report);
}

#[test]
fn full_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bank = make_circle_bank(24, LAMBDA, CircleSampling::Equiangular).unwrap();
    let pts = points(&mut rng, 5);
    let t = targets(&mut rng, 5);
    for kind in ModelKind::ALL {
        let spec = ModelSpec::paper(kind).with_widths(12, 8).with_dictionary(24);
        let mut model = build_model(&spec, Some(&bank), 9).unwrap();
        let template = model.clone();
        let opts = GradCheckOptions {
            max_components: Some(400),
            ..Default::default()
        };
        let report = grad_check(
            model.params_mut(),
            |p| {
                let mut m = template.clone();
                *m.params_mut() = p.clone();
                m.loss_graph(&pts, &t)
            },
            &opts,
        )
        .unwrap();
        assert_passes(kind.name(), report);
    }
}
