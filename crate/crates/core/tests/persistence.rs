use std::io::Write;

use wavefield::autodiff::{adam_step, make_circle_bank, AdamState, Checkpoint, CircleSampling};
use wavefield::dataset::{generate_test_grid, generate_training_set, import_csv};
use wavefield::scene::{sample_random_scene, Extent, SceneConfig};
use wavefield::{build_model, ChannelDataset, DatasetKind, Error, Model, ModelKind, ModelSpec, Scene};

fn scene() -> Scene {
    sample_random_scene(5, &SceneConfig::new(4, Extent::square(1.0), 3.5e9)).unwrap()
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene();
    for ds in [
        generate_training_set(&scene, 300, 1).unwrap(),
        generate_test_grid(&scene, scene.wavelength() / 4.0).unwrap(),
    ] {
        let path = dir.path().join(format!("{}.chds", ds.kind.name()));
        ds.write(&path).unwrap();
        let back = ChannelDataset::read(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.encode(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn csv_export_reimports_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene();
    let ds = generate_training_set(&scene, 120, 2).unwrap();
    let path = dir.path().join("train.csv");
    ds.export_csv(&path).unwrap();
    let back = import_csv(&path, scene.frequency_hz(), scene.extent()).unwrap();
    assert_eq!(back.kind, DatasetKind::Imported);
    assert_eq!(back.samples, ds.samples);
}

#[test]
fn corrupted_dataset_is_rejected() {
    let scene = scene();
    let bytes = generate_training_set(&scene, 50, 3).unwrap().encode();

    let mut flipped = bytes.clone();
    flipped[40] ^= 0x10;
    assert!(matches!(ChannelDataset::decode(&flipped), Err(Error::Checksum { .. })));

    assert!(matches!(ChannelDataset::decode(&bytes[..bytes.len() - 9]), Err(Error::Format(_))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(ChannelDataset::decode(&magic), Err(Error::Format(_))));

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(ChannelDataset::decode(&trailing).is_err());

    let missing = std::path::Path::new("/nonexistent/dir/train.chds");
    match ChannelDataset::read(missing) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("/nonexistent/dir/train.chds")),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

fn trained_model(kind: ModelKind) -> (Model, AdamState) {
    let scene = scene();
    let bank = make_circle_bank(24, scene.wavelength(), CircleSampling::Equiangular).unwrap();
    let spec = ModelSpec::paper(kind).with_widths(10, 6).with_dictionary(24);
    let mut model = build_model(&spec, Some(&bank), 4).unwrap();
    let ds = generate_training_set(&scene, 16, 5).unwrap();
    let mut adam = AdamState::new(1e-3);
    for _ in 0..3 {
        let (g, loss) = model.loss_graph(&ds.locations(), &ds.channels()).unwrap();
        let params = model.params_mut();
        params.zero_grads();
        g.backward(loss, params).unwrap();
        adam_step(params, &mut adam).unwrap();
    }
    (model, adam)
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let (model, adam) = trained_model(kind);
        let ckpt = model.to_checkpoint(Some(adam.clone()));
        let path = dir.path().join(format!("{kind}.ckpt"));
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.encode(), std::fs::read(&path).unwrap());
        assert_eq!(back.adam, Some(adam));

        let restored = Model::from_checkpoint(&back).unwrap();
        assert_eq!(restored.spec(), model.spec());
        for (a, b) in restored.params().iter().zip(model.params().iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.tensor.values(), b.tensor.values());
        }
        let x = scene().extent().center();
        assert_eq!(restored.forward(x).unwrap(), model.forward(x).unwrap());
    }
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(ModelKind::Mb);
    let path = dir.path().join("m.ckpt");
    model.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x01;
    assert!(matches!(Checkpoint::decode(&flipped), Err(Error::Checksum { .. })));
    assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() / 3]), Err(Error::Format(_))));
    assert!(matches!(Checkpoint::decode(b""), Err(Error::Format(_))));

    let wrong = dir.path().join("dataset-not-ckpt");
    generate_training_set(&scene(), 4, 1).unwrap().write(&wrong).unwrap();
    assert!(matches!(Model::load(&wrong), Err(Error::Format(_))));
}

#[test]
fn malformed_csv_is_rejected_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let ext = Extent::square(1.0);
    let write = |name: &str, body: &str| {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    };

    let nan = write("nan.csv", "x_m,y_m,h_re,h_im\n0.1,0.2,0.3,0.4\n0.5,0.5,NaN,0.0\n");
    match import_csv(&nan, 3.5e9, ext) {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column.as_str()), (3, "h_re")),
        other => panic!("{other:?}"),
    }
    let outside = write("out.csv", "x_m,y_m,h_re,h_im\n0.1,0.2,0.3,0.4\n1.5,0.5,0.1,0.0\n");
    assert!(matches!(import_csv(&outside, 3.5e9, ext), Err(Error::OutOfExtent { lines }) if lines == vec![3]));
    let empty = write("empty.csv", "");
    assert!(matches!(import_csv(&empty, 3.5e9, ext), Err(Error::EmptyFile(_))));
    let header_only = write("header.csv", "x_m,y_m,h_re,h_im\n");
    assert!(matches!(import_csv(&header_only, 3.5e9, ext), Err(Error::EmptyFile(_))));
}
