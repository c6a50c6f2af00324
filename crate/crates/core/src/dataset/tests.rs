use super::*;
use proptest::prelude::*;

const CHANNELS: [&str; 7] = ["AN3", "AN4", "AN5", "AN6", "AN7", "AN9", "AN10"];

fn ramp_record(source: &str, channel: &str, condition: Condition, n: usize) -> RawRecord {
    let offset = fnv1a(source.as_bytes()) as f64 / u64::MAX as f64;
    let samples = (0..n).map(|i| offset + i as f64).collect();
    RawRecord {
        source: source.into(),
        channel_id: channel.into(),
        condition,
        signal: Signal::new(samples, DEFAULT_SAMPLE_RATE).unwrap(),
    }
}

fn nrel_layout(window_len: usize) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for (cond, tag) in [(Condition::Healthy, "H"), (Condition::Damaged, "D")] {
        for file in 0..10 {
            for ch in CHANNELS {
                out.push(ramp_record(&format!("{tag}{file}"), ch, cond, window_len * 10));
            }
        }
    }
    out
}

#[test]
fn csv_channel_parses() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    std::fs::write(&p, "1.0\n2.0\n3.0\n").unwrap();
    let s = load_channel(&p, ChannelFormat::Csv, 40_000.0).unwrap();
    assert_eq!(s.samples(), &[1.0, 2.0, 3.0]);
    assert_eq!(s.sample_rate_hz(), 40_000.0);
}

#[test]
fn csv_channel_errors_carry_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    std::fs::write(&p, "1.0\nabc\n").unwrap();
    let err = load_channel(&p, ChannelFormat::Csv, 40_000.0).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    std::fs::write(&p, "1.0\n2.0\nNaN\n").unwrap();
    let err = load_channel(&p, ChannelFormat::Csv, 40_000.0).unwrap_err();
    assert!(matches!(err.root(), Error::NonFinite { index: 2 }), "{err}");
}

#[test]
fn f64le_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.f64");
    let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 1e-3 + 1e300 * (i % 2) as f64).collect();
    let s = Signal::new(samples.clone(), 40_000.0).unwrap();
    write_f64le(&p, &s).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 8 * 1000);
    let back = load_channel(&p, ChannelFormat::F64Le, 1.0).unwrap();
    assert_eq!(back.sample_rate_hz(), 40_000.0);
    assert!(back.samples().iter().zip(&samples).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn f64le_rejects_corruption() {
    let s = Signal::new(vec![1.0, 2.0], 100.0).unwrap();
    let mut bytes = encode_f64le(&s).unwrap();
    assert!(decode_f64le(&bytes[..20], Path::new("x")).unwrap_err().to_string().contains("offset 16"));
    bytes[0] = b'X';
    assert!(decode_f64le(&bytes, Path::new("x")).is_err());
    let mut bytes = encode_f64le(&s).unwrap();
    bytes[16..24].copy_from_slice(&f64::INFINITY.to_le_bytes());
    assert!(matches!(decode_f64le(&bytes, Path::new("x")).unwrap_err().root(), Error::NonFinite { index: 0 }));
}

#[test]
fn full_length_channel_windows() {
    let x: Vec<f64> = (0..2_400_000).map(|i| i as f64).collect();
    let w = window(&x, 20_000, 10).unwrap();
    assert_eq!(w.len(), 10);
    assert_eq!(w[0][0], 0.0);
    assert_eq!(*w[9].last().unwrap(), 199_999.0);
}

#[test]
fn small_windows() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let w = window(&x, 5, 2).unwrap();
    assert_eq!(w, vec![&x[..5], &x[5..]]);
    assert!(window(&x, 5, 3).is_err());
}

#[test]
fn nrel_layout_gives_balanced_1400() {
    let ds = build_dataset(&nrel_layout(20), 20, 10, 3).unwrap();
    assert_eq!(ds.len(), 1400);
    assert_eq!(ds.class_counts(), [700, 700]);
}

#[test]
fn single_record_single_window() {
    let rec = ramp_record("D0", "AN3", Condition::Damaged, 50);
    let ds = build_dataset(&[rec], 50, 1, 0).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds.labels(), vec![1]);
}

#[test]
fn shuffle_is_seeded() {
    let recs = nrel_layout(4);
    let a = build_dataset(&recs, 4, 10, 9).unwrap();
    let b = build_dataset(&recs, 4, 10, 9).unwrap();
    let c = build_dataset(&recs, 4, 10, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn build_reports_short_record() {
    let recs = vec![ramp_record("H0", "AN3", Condition::Healthy, 40), ramp_record("H1", "AN4", Condition::Healthy, 10)];
    let err = build_dataset(&recs, 20, 2, 0).unwrap_err();
    assert!(err.to_string().contains("H1"), "{err}");
}

#[test]
fn split_sizes() {
    let ds = build_dataset(&nrel_layout(4), 4, 10, 1).unwrap();
    let s = split(&ds, 0.7, 0.1).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (980, 140, 280));

    let small = build_dataset(&[ramp_record("H0", "AN3", Condition::Healthy, 10)], 1, 10, 0).unwrap();
    let s = split(&small, 0.8, 0.1).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
    assert!(split(&small, 0.8, 0.3).is_err());
    assert!(split(&small, 0.5, 0.05).is_err());
}

#[test]
fn decompose_all_preserves_order_and_labels() {
    let recs: Vec<RawRecord> = (0..2)
        .map(|i| {
            let samples = (0..400).map(|t| ((t as f64) * (0.2 + 0.1 * i as f64)).sin()).collect();
            RawRecord {
                source: format!("F{i}"),
                channel_id: "AN3".into(),
                condition: if i == 0 { Condition::Healthy } else { Condition::Damaged },
                signal: Signal::new(samples, DEFAULT_SAMPLE_RATE).unwrap(),
            }
        })
        .collect();
    let ds = build_dataset(&recs, 200, 1, 4).unwrap();
    let cfg = CeemdanConfig { nr: 4, seed: 8, ..Default::default() };
    let serial = decompose_all(&ds, &cfg, &SiftConfig::default(), Exec::Serial).unwrap();
    let parallel = decompose_all(&ds, &cfg, &SiftConfig::default(), Exec::Parallel).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.labels(), ds.labels());
    assert!(serial.decomposed());
    for (a, b) in serial.samples.iter().zip(&ds.samples) {
        assert_eq!(a.provenance, b.provenance);
        let set = a.imfs().unwrap();
        assert_eq!((set.k(), set.source_length()), (10, 200));
    }
    // order independence: decomposing a reversed dataset gives the same per-window sets
    let mut rev = ds.clone();
    rev.samples.reverse();
    let rev_out = decompose_all(&rev, &cfg, &SiftConfig::default(), Exec::Serial).unwrap();
    assert_eq!(rev_out.samples[0], serial.samples[1]);
    assert!(decompose_all(&serial, &cfg, &SiftConfig::default(), Exec::Serial).is_err());
}

#[test]
fn manifest_parsing() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "# comment\npath,channel_id,condition\nh.csv,AN3,healthy\n/abs/d.f64,AN4,damaged\n\n").unwrap();
    let e = read_manifest(&m).unwrap();
    assert_eq!(e.len(), 2);
    assert_eq!(e[0].path, dir.path().join("h.csv"));
    assert_eq!(e[1].condition, Condition::Damaged);
    std::fs::write(&m, "h.csv,AN3,broken\n").unwrap();
    assert!(read_manifest(&m).unwrap_err().to_string().contains("line 1"));
}

#[test]
fn cache_round_trip_keeps_order() {
    let recs: Vec<RawRecord> = ["my_file", "other"]
        .iter()
        .enumerate()
        .map(|(i, src)| RawRecord {
            source: src.to_string(),
            channel_id: "AN10".into(),
            condition: if i == 0 { Condition::Healthy } else { Condition::Damaged },
            signal: Signal::new((0..300).map(|t| (t as f64 * 0.3).sin() + (t as f64 * 0.05).cos()).collect(), 40_000.0).unwrap(),
        })
        .collect();
    let ds = build_dataset(&recs, 150, 2, 2).unwrap();
    let dec = decompose_all(&ds, &CeemdanConfig { nr: 2, ..Default::default() }, &SiftConfig::default(), Exec::Serial).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_cache(&dec, dir.path()).unwrap();
    assert!(dir.path().join("my_file_AN10_1_0.csv").exists());
    let back = read_cache(dir.path()).unwrap();
    assert_eq!(back, dec);
}

#[test]
fn cache_name_parses_from_right() {
    let p = Provenance { source: "a_b_c".into(), channel_id: "AN3".into(), window_index: 7 };
    let name = p.cache_name(1);
    assert_eq!(name, "a_b_c_AN3_7_1.csv");
    assert_eq!(Provenance::parse_cache_name(&name), Some((p, 1)));
}

proptest! {
    #[test]
    fn shuffle_is_a_permutation(seed in any::<u64>(), n_rec in 1usize..6, windows in 1usize..5) {
        let recs: Vec<RawRecord> = (0..n_rec)
            .map(|i| ramp_record(&format!("R{i}"), "AN3", if i % 2 == 0 { Condition::Healthy } else { Condition::Damaged }, 3 * windows))
            .collect();
        let ds = build_dataset(&recs, 3, windows, seed).unwrap();
        let mut got: Vec<(Provenance, u8, u64)> = ds.samples.iter().map(|s| match &s.data {
            SampleData::Raw(w) => (s.provenance.clone(), s.label, w[0].to_bits()),
            _ => unreachable!(),
        }).collect();
        let mut want = Vec::new();
        for r in &recs {
            for (wi, w) in window(r.signal.samples(), 3, windows).unwrap().into_iter().enumerate() {
                want.push((Provenance { source: r.source.clone(), channel_id: r.channel_id.clone(), window_index: wi }, r.condition.label(), w[0].to_bits()));
            }
        }
        let key = |t: &(Provenance, u8, u64)| (t.0.source.clone(), t.0.window_index);
        got.sort_by_key(key);
        want.sort_by_key(key);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(n in 20usize..300, tf in 0.3f64..0.8, vf in 0.05f64..0.15) {
        let ds = build_dataset(&[ramp_record("H", "AN3", Condition::Healthy, n)], 1, n, 0).unwrap();
        let s = split(&ds, tf, vf).unwrap();
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        let mut all: Vec<usize> = s.train.samples.iter().chain(&s.val.samples).chain(&s.test.samples)
            .map(|x| x.provenance.window_index).collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
