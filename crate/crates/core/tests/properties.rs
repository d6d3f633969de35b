use std::collections::BTreeMap;

use proptest::prelude::*;

use hsrecon::autodiff::Tensor;
use hsrecon::classify::stratified_kfold;
use hsrecon::dataset::{manifest_csv, parse_manifest, ManifestEntry, Split};
use hsrecon::hypercube::envi::{decode, encode, CubeFormat, CubeHeader, DataType, Interleave};
use hsrecon::hypercube::{ppm, Hypercube, RgbImage};
use hsrecon::metrics;
use hsrecon::models::{build_model, decode_checkpoint, encode_checkpoint, Arch, ModelConfig};
use hsrecon::segmentation::{largest_component, Mask, SpectraTable, Spectrum};

fn cube_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<f32>)> {
    (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(h, w, b)| {
        (Just(h), Just(w), Just(b), prop::collection::vec(0u16..=u16::MAX, h * w * b))
            .prop_map(|(h, w, b, raw)| (h, w, b, raw.into_iter().map(f32::from).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envi_round_trip_is_bit_exact((h, w, b, ints) in cube_strategy(), il in 0usize..3, scaled in any::<bool>()) {
        let wl: Vec<f64> = (0..b).map(|i| 400.0 + 12.5 * i as f64).collect();
        let (data, dt) = if scaled {
            (ints.iter().map(|v| v / 65535.0).collect(), DataType::Float32)
        } else {
            (ints, DataType::Uint16)
        };
        let cube = Hypercube::new(h, w, wl, data).unwrap();
        let (hdr, raw) = encode(&cube, CubeFormat { interleave: Interleave::ALL[il], data_type: dt }).unwrap();
        let back = decode(&CubeHeader::parse(&hdr.render()).unwrap(), &raw).unwrap();
        prop_assert_eq!(back.wavelengths(), cube.wavelengths());
        prop_assert!(back.data().iter().zip(cube.data()).all(|(a, c)| a.to_bits() == c.to_bits()));
    }

    #[test]
    fn ppm_round_trip_on_the_16_bit_grid(
        (h, w, q) in (1usize..6, 1usize..6).prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(any::<u16>(), h * w * 3)))
    ) {
        let img = RgbImage::new(h, w, q.iter().map(|&v| f32::from(v) / 65535.0).collect()).unwrap();
        prop_assert_eq!(ppm::decode(&ppm::encode(&img)).unwrap(), img);
    }

    #[test]
    fn checkpoint_decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_checkpoint(&bytes);
    }

    #[test]
    fn metric_identities(pairs in prop::collection::vec((0.0f32..1.0, 0.001f32..1.0), 1..200)) {
        let (pred, gt): (Vec<f32>, Vec<f32>) = pairs.into_iter().unzip();
        prop_assert_eq!(metrics::mrae(&gt, &gt).unwrap(), 0.0);
        prop_assert!(metrics::psnr(&gt, &gt, 1.0).unwrap().is_infinite());
        let (rmse, mae) = (metrics::rmse(&pred, &gt).unwrap(), metrics::mae(&pred, &gt).unwrap());
        prop_assert!(rmse + 1e-12 >= mae);
        prop_assert!((rmse - metrics::rmse(&gt, &pred).unwrap()).abs() < 1e-15);
        if rmse > 0.0 {
            let psnr = metrics::psnr(&pred, &gt, 1.0).unwrap();
            prop_assert!((psnr + 20.0 * rmse.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn shuffle_then_unshuffle_is_identity(c in 1usize..4, h in 1usize..5, w in 1usize..5, r in 1usize..4) {
        let n = c * r * r * h * w;
        let t = Tensor::new((0..n).map(|i| i as f64).collect(), &[c * r * r, h, w]).unwrap();
        let back = t.pixel_shuffle(r).unwrap().pixel_unshuffle(r).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.data(), t.data());
    }

    #[test]
    fn largest_component_is_a_subset(h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let bits: Vec<bool> = (0..h * w).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let mask = Mask::new(h, w, bits);
        let big = largest_component(&mask);
        prop_assert!(big.bits().iter().zip(mask.bits()).all(|(&b, &m)| !b || m));
        prop_assert_eq!(mask.iou(&big), big.iou(&mask));
        prop_assert!(mask.iou(&big) <= 1.0);
        prop_assert_eq!(mask.count() == 0, big.count() == 0);
    }

    #[test]
    fn stratified_folds_partition_and_balance(labels in prop::collection::vec(0u8..2, 10..60), k in 2usize..6, seed in any::<u64>()) {
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; labels.len()];
        for (train, test) in &folds {
            prop_assert_eq!(train.len() + test.len(), labels.len());
            for &i in test {
                seen[i] += 1;
            }
            for class in 0..2u8 {
                let total = labels.iter().filter(|&&l| l == class).count();
                let in_test = test.iter().filter(|&&i| labels[i] == class).count();
                prop_assert!(in_test == total / k || in_test == total.div_ceil(k));
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn spectra_csv_round_trip(values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..8)) {
        let wl = vec![520.0, 583.0, 640.0, 903.0];
        let rows: Vec<Spectrum> = values
            .iter()
            .enumerate()
            .map(|(i, v)| Spectrum { sample_id: format!("s{i}"), label: Some((i % 2) as u8), wavelengths: wl.clone(), values: v.clone() })
            .collect();
        let table = SpectraTable::new(rows).unwrap();
        let back = SpectraTable::parse_csv(&table.to_csv(None)).unwrap();
        prop_assert_eq!(&back.wavelengths, &table.wavelengths);
        for (a, b) in back.rows.iter().zip(&table.rows) {
            prop_assert_eq!(&a.sample_id, &b.sample_id);
            prop_assert_eq!(a.label, b.label);
            prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= 1e-8 * y.abs().max(1e-300)));
        }
    }

    #[test]
    fn manifest_round_trip(labels in prop::collection::vec((0u8..2, 0usize..3), 1..30)) {
        let entries: Vec<ManifestEntry> = labels
            .iter()
            .enumerate()
            .map(|(i, &(label, s))| ManifestEntry { sample_id: format!("egg_{i:03}"), label, split: [Split::Train, Split::Val, Split::Test][s] })
            .collect();
        prop_assert_eq!(parse_manifest(&manifest_csv(&entries, None)).unwrap(), entries);
    }
}

#[test]
fn every_single_byte_flip_in_a_checkpoint_is_caught() {
    let m = build_model(&ModelConfig::micro(Arch::Restormer, 3)).unwrap();
    let bytes = encode_checkpoint(&m, &BTreeMap::new()).unwrap();
    for i in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0xA5;
        assert!(decode_checkpoint(&bad).is_err(), "flip at {i} went unnoticed");
    }
}
