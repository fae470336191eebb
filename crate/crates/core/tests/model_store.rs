use spectral_piano::audio::dct2;
use spectral_piano::harmonic::{DampingCoeffs, PolarizationParams};
use spectral_piano::model::{key_frequency, NoteModel, VelocityBank};
use spectral_piano::noise::{NoiseModel, NOISE_BINS};
use spectral_piano::transient::TransientModel;
use spectral_piano::Error;

fn entry(velocity: u8, alpha: f64) -> NoteModel {
    let h = 5;
    let params = PolarizationParams {
        f0: key_frequency(60),
        inharmonicity: 3e-4 + velocity as f64 * 1e-7,
        delta_f: 0.2,
        alpha_v: vec![alpha; h],
        alpha_h: vec![alpha / 2.0; h],
    };
    let mut m = NoteModel::new(
        60,
        velocity,
        params,
        DampingCoeffs::new(0.5, 1e-2, 1e-9, 1e-4),
    )
    .unwrap();
    m.damping_h = DampingCoeffs::new(0.1, 2e-3, 0.0, 1e-5);
    let rows = 3;
    m.noise = NoiseModel {
        frame_size: 2048,
        filter_magnitudes: (0..rows)
            .map(|r| {
                (0..NOISE_BINS)
                    .map(|k| 1.0 / (1.0 + k as f64 + r as f64) + 0.1 / 3.0)
                    .collect()
            })
            .collect(),
        means: vec![0.0, 0.01, -0.02],
        amplitudes: vec![0.1 * alpha, 0.05, 0.01],
        seed: 9,
        stream: 60 * 128 + velocity as u64,
    };
    let burst: Vec<f64> = (0..1300)
        .map(|n| (n as f64 * 0.37).sin() * (-(n as f64) / 200.0).exp() / 3.0)
        .collect();
    m.transient = TransientModel::new(dct2(&burst).unwrap(), 1.0).unwrap();
    m.metadata.fit_config_hash = "abc123".into();
    m
}

fn bank() -> VelocityBank {
    VelocityBank::new(60, vec![entry(56, 0.4), entry(45, 0.2), entry(67, 0.6)]).unwrap()
}

#[test]
fn save_load_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("60.stn.json");
    let b = bank();
    b.save(&path).unwrap();
    let loaded = VelocityBank::load(&path).unwrap();
    assert_eq!(loaded, b);
    for (x, y) in loaded.entries.iter().zip(&b.entries) {
        assert_eq!(x.inharmonicity.to_bits(), y.inharmonicity.to_bits());
        for (p, q) in x.transient.dct_vector.iter().zip(&y.transient.dct_vector) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }
}

#[test]
fn entries_are_sorted_on_construction() {
    let v: Vec<u8> = bank().entries.iter().map(|e| e.velocity).collect();
    assert_eq!(v, vec![45, 56, 67]);
}

fn reload_with(edit: impl FnOnce(&mut serde_json::Value)) -> Error {
    let mut doc: serde_json::Value = serde_json::from_str(&bank().to_json().unwrap()).unwrap();
    edit(&mut doc);
    VelocityBank::from_json(&doc.to_string()).unwrap_err()
}

#[test]
fn unsorted_entries_are_rejected() {
    let err = reload_with(|d| d["entries"].as_array_mut().unwrap().swap(0, 1));
    assert!(err.to_string().contains("entries not sorted"), "{err}");
}

#[test]
fn amplitude_count_mismatch_names_alpha_v() {
    let err = reload_with(|d| {
        let e = &mut d["entries"][0];
        e["partials"] = 3.into();
        e["alpha_v"] = serde_json::json!([0.1, 0.1, 0.1, 0.1]);
        e["alpha_h"] = serde_json::json!([0.1, 0.1, 0.1]);
    });
    match err {
        Error::Load { field, message } => {
            assert_eq!(field, "alpha_v");
            assert!(message.contains("alpha_v length 4"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn missing_field_and_version_errors_name_the_field() {
    let err = reload_with(|d| {
        d["entries"][1].as_object_mut().unwrap().remove("damping");
    });
    assert!(
        matches!(&err, Error::Load { field, .. } if field == "damping"),
        "{err}"
    );
    let err = reload_with(|d| d["schema_version"] = 99.into());
    assert!(
        matches!(&err, Error::Load { field, .. } if field == "schema_version"),
        "{err}"
    );
}

#[test]
fn interpolation_policy() {
    let b = bank();
    assert_eq!(b.interpolate(56), b.entries[1]);
    assert_eq!(b.interpolate(30), b.entries[0]);
    assert_eq!(b.interpolate(120), b.entries[2]);
    let mid = VelocityBank::new(60, vec![entry(45, 0.2), entry(67, 0.4)])
        .unwrap()
        .interpolate(56);
    assert_eq!(mid.velocity, 56);
    for a in &mid.alpha_v {
        assert!((a - 0.3).abs() < 1e-15);
    }
    mid.validate().unwrap();
}

#[test]
fn interpolation_pads_shorter_noise() {
    let mut short = entry(45, 0.2);
    short.noise.filter_magnitudes.truncate(1);
    short.noise.means.truncate(1);
    short.noise.amplitudes.truncate(1);
    let b = VelocityBank::new(60, vec![short, entry(67, 0.4)]).unwrap();
    let m = b.interpolate(56);
    assert_eq!(m.noise.frames(), 3);
    assert!((m.noise.amplitudes[2] - 0.5 * 0.01).abs() < 1e-15);
    m.validate().unwrap();
}

#[test]
fn footprint_of_a_four_second_default_note() {
    // 4 s at the model rate spans 47 control frames of 2048 samples.
    let mut m = entry(80, 0.3);
    let frames = 96_000usize.div_ceil(2048);
    m.noise = NoiseModel::silent(frames, 2048);
    m.partials = 31;
    m.alpha_v = vec![0.1; 31];
    m.alpha_h = vec![0.1; 31];
    m.validate().unwrap();
    assert!(m.footprint_bytes() <= 64 * 1024, "{}", m.footprint_bytes());
}

#[test]
fn invalid_entries_are_rejected() {
    let mut m = entry(45, 0.2);
    m.alpha_v[0] = 1.5;
    assert!(VelocityBank::new(60, vec![m]).is_err());
    let mut m = entry(45, 0.2);
    m.delta_f = 3.0;
    assert!(m.validate().is_err());
    assert!(VelocityBank::new(60, vec![]).is_err());
    assert!(VelocityBank::new(61, vec![entry(45, 0.2)]).is_err());
    assert!(VelocityBank::new(60, vec![entry(45, 0.2), entry(45, 0.3)]).is_err());
}

#[test]
fn key_frequencies() {
    assert_eq!(key_frequency(69), 440.0);
    assert!((key_frequency(60) - 261.625_565_300_598_6).abs() < 1e-9);
    assert!((key_frequency(21) - 27.5).abs() < 1e-12);
}
