use sinco::codec::{decompress, CompressedContainer};
use sinco::imageio::{make_coordinate_grid, synth_phantom, ImagePlane};
use sinco::metrics::psnr;
use sinco::nets::{registry, InrConfig, InrModel, SegNet, SegNetConfig};
use sinco::training::{train_compress, TrainConfig};

fn cfg(lambda: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        lambda,
        epochs,
        log_every: 50,
        ..TrainConfig::compression()
    }
}

#[test]
fn constant_image_fit_siren() {
    let x = ImagePlane::filled(16, 16, 0.3).unwrap();
    for seed in 0..4 {
        let m = InrModel::init(registry().get("siren").unwrap(), InrConfig::siren(2, 16), seed).unwrap();
        let (_, trace) = train_compress(&x, None, None, m, &cfg(0.0, 500)).unwrap();
        let last = trace.last().unwrap();
        assert!(last.compress < 1e-4, "seed {seed}: {last:?}");
    }
}

// Under He-uniform init the random Fourier response decays slowly; 500 steps
// clears 1e-4 for only some seeds, 1000 clears it for all.
#[test]
fn constant_image_fit_pemlp() {
    let x = ImagePlane::filled(16, 16, 0.3).unwrap();
    for seed in 0..4 {
        let m = InrModel::init(registry().get("pemlp").unwrap(), InrConfig::pemlp(2, 16, 12), seed).unwrap();
        let (_, trace) = train_compress(&x, None, None, m, &cfg(0.0, 1000)).unwrap();
        let last = trace.last().unwrap();
        assert!(last.compress < 1e-4, "seed {seed}: {last:?}");
    }
}

#[test]
fn phantom_fit_improves_and_survives_the_codec() {
    let (x, _) = synth_phantom(2, 32, 32).unwrap();
    let m = InrModel::init(registry().get("siren").unwrap(), InrConfig::siren(2, 32), 0).unwrap();
    let start = m.render(&make_coordinate_grid(32, 32)).unwrap();
    let (m, trace) = train_compress(&x, None, None, m, &cfg(0.0, 300)).unwrap();
    assert!(trace.last().unwrap().compress < trace.first().unwrap().compress);
    let fitted = m.render(&make_coordinate_grid(32, 32)).unwrap();
    let before = psnr(&x, &start, 1.0).unwrap();
    let after = psnr(&x, &fitted, 1.0).unwrap();
    assert!(after > before + 10.0, "{before} -> {after}");

    let c = CompressedContainer::from_model(&m, 32, 32).unwrap();
    let decoded = decompress(&c).unwrap();
    assert!(psnr(&fitted, &decoded, 1.0).unwrap() > 40.0);
}

#[test]
fn structural_term_is_traced_and_optional_at_zero_lambda() {
    let (x, s) = synth_phantom(5, 32, 32).unwrap();
    let g = SegNet::init(
        SegNetConfig {
            levels: 2,
            base_channels: 4,
        },
        0,
    )
    .unwrap()
    .freeze();
    let m = InrModel::init(registry().get("siren").unwrap(), InrConfig::siren(2, 8), 0).unwrap();
    let (_, with) = train_compress(&x, Some(&s), Some(&g), m.clone(), &cfg(1.0, 20)).unwrap();
    for r in with.rows() {
        let reg = r.regularize.unwrap();
        assert!((r.total - (r.compress + reg)).abs() < 1e-6, "{r:?}");
    }
    // At λ = 0 the prior only feeds the log; the fit itself is unchanged.
    let (a, t0) = train_compress(&x, Some(&s), Some(&g), m.clone(), &cfg(0.0, 20)).unwrap();
    let (b, _) = train_compress(&x, None, None, m, &cfg(0.0, 20)).unwrap();
    assert_eq!(a.params(), b.params());
    assert!(t0.rows().iter().all(|r| r.regularize.is_some() && r.total == r.compress));
}

#[test]
fn unfrozen_segmenter_is_rejected() {
    let (x, s) = synth_phantom(5, 32, 32).unwrap();
    let g = SegNet::init(SegNetConfig::default(), 0).unwrap();
    let m = InrModel::init(registry().get("siren").unwrap(), InrConfig::siren(2, 8), 0).unwrap();
    assert!(train_compress(&x, Some(&s), Some(&g), m, &cfg(1.0, 2)).is_err());
}
