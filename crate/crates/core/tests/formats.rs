use proptest::prelude::*;
use pseudolabel::colormap::{colorize, voc_color};
use pseudolabel::grunit::{GrParams, Mat};
use pseudolabel::io::{self, fmap, grpm, manifest, pnm, RawFmap};
use pseudolabel::maps::{AttentionStack, ImageRecord, LabelMap, SaliencyMap};
use pseudolabel::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fmap_bytes(c: u32, h: u32, w: u32, values: &[f32]) -> Vec<u8> {
    let mut b = b"FMAP".to_vec();
    for v in [1, c, h, w] {
        b.extend(v.to_le_bytes());
    }
    for v in values {
        b.extend(v.to_le_bytes());
    }
    b
}

#[test]
fn fmap_layout() {
    let stack = AttentionStack::new(1, 2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.fmap");
    io::save_fmap(&stack, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 20 + 16);
    assert_eq!(bytes, fmap_bytes(1, 2, 2, &[0.0, 0.25, 0.5, 1.0]));
    assert_eq!(io::load_fmap(&path).unwrap(), stack);

    let one = fmap::decode(&fmap_bytes(1, 1, 1, &[0.5])).unwrap();
    assert_eq!((one.channels, one.height, one.width, one.values), (1, 1, 1, vec![0.5]));
}

fn format_field(r: pseudolabel::Result<RawFmap>) -> (&'static str, String) {
    match r {
        Err(Error::Format { field, detail }) => (field, detail),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn fmap_errors_name_the_field() {
    assert_eq!(format_field(fmap::decode(b"FMAX\x01\0\0\0")).0, "magic");
    assert_eq!(format_field(fmap::decode(b"FMAP\x01\0\0")).0, "header");
    let mut b = fmap_bytes(1, 1, 1, &[0.5]);
    b[4] = 2;
    assert_eq!(format_field(fmap::decode(&b)).0, "version");
    assert_eq!(format_field(fmap::decode(&fmap_bytes(0, 1, 1, &[]))).0, "C");
    assert_eq!(format_field(fmap::decode(&fmap_bytes(1, 0, 1, &[]))).0, "H");
    assert_eq!(format_field(fmap::decode(&fmap_bytes(1, 1, 0, &[]))).0, "W");
    let (field, detail) = format_field(fmap::decode(&fmap_bytes(1, 2, 2, &[])));
    assert_eq!(field, "payload");
    assert!(detail.contains("truncated payload"));
    assert_eq!(format_field(fmap::decode(&fmap_bytes(u32::MAX, u32::MAX, u32::MAX, &[]))).0, "dimensions");
    assert_eq!(format_field(fmap::decode(&fmap_bytes(1, 1, 1, &[0.5, 0.5]))).0, "payload");
}

#[test]
fn attention_rejects_bad_values() {
    let raw = fmap::decode(&fmap_bytes(1, 1, 2, &[f32::NAN, 0.0])).unwrap();
    assert!(AttentionStack::try_from(raw).is_err());
    let raw = fmap::decode(&fmap_bytes(1, 1, 2, &[-1.0, 0.0])).unwrap();
    assert!(AttentionStack::try_from(raw).is_err());
    assert!(fmap::encode(&RawFmap {
        channels: 0,
        height: 1,
        width: 1,
        values: vec![]
    })
    .is_err());
}

proptest! {
    #[test]
    fn fmap_round_trip(c in 1usize..4, h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f32> = (0..c * h * w).map(|_| f32::from_bits(rng.gen_range(0..0x3f80_0001))).collect();
        let raw = RawFmap { channels: c, height: h, width: w, values };
        let bytes = fmap::encode(&raw).unwrap();
        let back = fmap::decode(&bytes).unwrap();
        prop_assert_eq!(fmap::encode(&back).unwrap(), bytes);
        let stack = AttentionStack::try_from(back).unwrap();
        prop_assert_eq!(fmap::encode(&RawFmap::from(stack)).unwrap(), fmap::encode(&raw).unwrap());
    }

    #[test]
    fn pgm_round_trip(h in 1usize..20, w in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = pnm::Pnm { width: w, height: h, channels: 1, data: (0..h * w).map(|_| rng.gen()).collect() };
        let bytes = pnm::encode(&img).unwrap();
        prop_assert_eq!(pnm::decode(&bytes).unwrap(), img);
    }
}

#[test]
fn pgm_header() {
    let img = pnm::Pnm {
        width: 3,
        height: 2,
        channels: 1,
        data: vec![0, 1, 2, 3, 4, 255],
    };
    let bytes = pnm::encode(&img).unwrap();
    assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
    assert_eq!(bytes.len(), 11 + 6);
    let commented = b"P5 # label map\n3\t2\n# max\n255\n\x00\x01\x02\x03\x04\xff";
    assert_eq!(pnm::decode(commented).unwrap(), img);
}

#[test]
fn pgm_errors() {
    assert!(pnm::decode(b"P2\n1 1\n255\n\0").is_err());
    assert!(pnm::decode(b"P5\n1 1\n65535\n\0\0").is_err());
    assert!(pnm::decode(b"P5\n2 1\n255\n\0").is_err());
    assert!(pnm::decode(b"P5\n1 1\n255\n\0\0").is_err());
    assert!(pnm::decode(b"P5\n0 1\n255\n").is_err());
    assert!(pnm::decode(b"P5\n1 1\n255").is_err());
}

#[test]
fn label_and_saliency_files() {
    let dir = tempfile::tempdir().unwrap();
    let labels = LabelMap::new(2, 2, vec![0, 3, 255, 1]).unwrap();
    let p = dir.path().join("l.pgm");
    io::save_label_map(&labels, &p).unwrap();
    assert_eq!(io::load_label_map(&p).unwrap(), labels);

    let sal = SaliencyMap::from_bytes(1, 3, &[0, 128, 255]).unwrap();
    assert_eq!(sal.values(), &[0.0, 128.0 / 255.0, 1.0]);
    let p = dir.path().join("s.pgm");
    io::save_saliency(&sal, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap()[11..], [0, 128, 255]);
    assert_eq!(io::load_saliency(&p).unwrap(), sal);
    assert!(matches!(io::load_label_map(dir.path().join("missing.pgm")), Err(Error::IoAt { .. })));
}

#[test]
fn manifest_round_trip() {
    let text = "img_0000;4\n\nimg_0001;1,4,12\n";
    let records = manifest::parse(text).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records[1].is_complex() && !records[0].is_complex());
    assert_eq!(manifest::format(&records), "img_0000;4\nimg_0001;1,4,12\n");
    assert_eq!(records[1], ImageRecord::new("img_0001", [12, 1, 4]).unwrap());
}

#[test]
fn manifest_errors_carry_line() {
    for (text, line) in [
        ("a;1\nb\n", 2),
        ("a;1\na;2\n", 2),
        ("a;x\n", 1),
        ("a;0\n", 1),
        ("a;255\n", 1),
        ("a;\n", 1),
        ("a;1,1\n", 1),
    ] {
        match manifest::parse(text) {
            Err(Error::Manifest { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn grpm_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = GrParams::init(3, 4, 2, 5, &mut rng).unwrap();
    let bytes = grpm::encode(&p).unwrap();
    assert_eq!(&bytes[..4], b"GRPM");
    // Values are stored as binary32.
    let back = grpm::decode(&bytes).unwrap();
    for (a, b) in back.projection.as_slice().iter().zip(p.projection.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert_eq!(grpm::encode(&back).unwrap(), bytes);
    assert_eq!(grpm::decode(&grpm::encode(&back).unwrap()).unwrap(), back);
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(grpm::decode(&longer).is_err());
    assert!(grpm::decode(&bytes[..bytes.len() - 1]).is_err());
    let bad = GrParams {
        bias: vec![0.0; 4],
        ..p
    };
    assert!(GrParams::new(bad.projection, bad.adjacency, bad.state_update, bad.classifier, bad.bias).is_err());
    assert!(Mat::from_vec(2, 2, vec![0.0; 3]).is_err());
    let mut huge = back.clone();
    huge.bias[0] = 1e300;
    assert!(grpm::encode(&huge).is_err());
}

#[test]
fn colormap_image() {
    let m = LabelMap::new(1, 3, vec![0, 1, 255]).unwrap();
    let img = colorize(&m);
    assert_eq!(img.channels, 3);
    let bytes = pnm::encode(&img).unwrap();
    assert!(bytes.starts_with(b"P6\n3 1\n255\n"));
    assert_eq!(&bytes[11..], &[0, 0, 0, 128, 0, 0, 224, 224, 192]);
    // Every class gets a distinct colour.
    let colors: std::collections::HashSet<[u8; 3]> = (0..=255).map(voc_color).collect();
    assert_eq!(colors.len(), 256);
}
