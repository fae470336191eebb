use spectral_piano::model::VelocityBank;
use spectral_piano::synth::{render_note, RenderOptions};

const GOLDEN: &str = include_str!("../../../data/60.stn.json");

#[test]
fn golden_bank_loads_and_resaves_byte_identically() {
    let bank = VelocityBank::from_json(GOLDEN).unwrap();
    assert_eq!(bank.key_id, 60);
    let velocities: Vec<u8> = bank.entries.iter().map(|e| e.velocity).collect();
    assert_eq!(velocities, [40, 80, 110]);
    assert_eq!(bank.to_json().unwrap(), GOLDEN.trim_end());
}

#[test]
fn golden_bank_renders_every_velocity() {
    let bank = VelocityBank::from_json(GOLDEN).unwrap();
    for v in [1, 40, 60, 110, 127] {
        let note = bank.interpolate(v);
        let audio = render_note(&note, 24_000, &RenderOptions::default()).unwrap();
        let peak = audio.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!(peak > 1e-3 && peak < 1.0, "velocity {v}: peak {peak}");
    }
}

#[test]
fn golden_parameters_are_near_the_rendered_truth() {
    let bank = VelocityBank::from_json(GOLDEN).unwrap();
    for e in &bank.entries {
        assert!((e.inharmonicity / 3e-4 - 1.0).abs() < 0.01);
        assert!((e.delta_f - 0.2).abs() < 0.01);
    }
}
