//! Fitted note models, per-key velocity banks, their JSON storage and
//! velocity interpolation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::HpssConfig;
use crate::audio::MODEL_RATE;
use crate::error::{Error, Result};
use crate::harmonic::{DampingCoeffs, PolarizationParams, MAX_DETUNING};
use crate::noise::{NoiseModel, DEFAULT_NOISE_FRAME, NOISE_BINS};
use crate::transient::TransientModel;

/// Version written to and required from stored banks.
pub const SCHEMA_VERSION: u32 = 1;
/// File extension of stored banks.
pub const MODEL_EXTENSION: &str = "stn.json";

/// Equal-tempered frequency of a MIDI key (A4 = 69 = 440 Hz).
pub fn key_frequency(key: u8) -> f64 {
    440.0 * 2f64.powf((key as f64 - 69.0) / 12.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteMetadata {
    pub sample_rate: u32,
    pub hpss: HpssConfig,
    pub fit_config_hash: String,
}

impl Default for NoteMetadata {
    fn default() -> Self {
        Self {
            sample_rate: MODEL_RATE,
            hpss: HpssConfig::default(),
            fit_config_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteModel {
    pub key_id: u8,
    pub velocity: u8,
    pub f0: f64,
    pub inharmonicity: f64,
    pub delta_f: f64,
    pub partials: usize,
    pub alpha_v: Vec<f64>,
    pub alpha_h: Vec<f64>,
    pub damping: DampingCoeffs,
    pub damping_h: DampingCoeffs,
    pub noise: NoiseModel,
    pub transient: TransientModel,
    pub metadata: NoteMetadata,
}

/// Invariant violation: offending field and description.
type Violation = (&'static str, String);

fn check(ok: bool, field: &'static str, message: impl FnOnce() -> String) -> Result<(), Violation> {
    if ok {
        Ok(())
    } else {
        Err((field, message()))
    }
}

impl NoteModel {
    /// A harmonic-only model: both polarizations share `damping`, noise and
    /// transient are silent.
    pub fn new(
        key_id: u8,
        velocity: u8,
        params: PolarizationParams,
        damping: DampingCoeffs,
    ) -> Result<Self> {
        let model = Self {
            key_id,
            velocity,
            f0: params.f0,
            inharmonicity: params.inharmonicity,
            delta_f: params.delta_f,
            partials: params.alpha_v.len(),
            alpha_v: params.alpha_v,
            alpha_h: params.alpha_h,
            damping,
            damping_h: damping,
            noise: NoiseModel::silent(0, DEFAULT_NOISE_FRAME),
            transient: TransientModel::silent(),
            metadata: NoteMetadata::default(),
        };
        model.validate()?;
        Ok(model)
    }

    fn violations(&self) -> Result<(), Violation> {
        check(self.key_id <= 127, "key_id", || {
            format!("{} is not a MIDI key", self.key_id)
        })?;
        check((1..=127).contains(&self.velocity), "velocity", || {
            format!("{} is outside 1..=127", self.velocity)
        })?;
        check(self.f0 > 0.0 && self.f0.is_finite(), "f0", || {
            format!("{} is not a positive frequency", self.f0)
        })?;
        check(
            self.inharmonicity >= 0.0 && self.inharmonicity.is_finite(),
            "inharmonicity",
            || format!("{} is negative or non-finite", self.inharmonicity),
        )?;
        check(self.delta_f.abs() <= MAX_DETUNING, "delta_f", || {
            format!("{} exceeds +/-{MAX_DETUNING} Hz", self.delta_f)
        })?;
        check(self.partials >= 1, "partials", || {
            "at least one partial is required".into()
        })?;
        for (field, alpha) in [("alpha_v", &self.alpha_v), ("alpha_h", &self.alpha_h)] {
            check(alpha.len() == self.partials, field, || {
                format!(
                    "{field} length {} does not match H = {}",
                    alpha.len(),
                    self.partials
                )
            })?;
            check(alpha.iter().all(|a| a.abs() <= 1.0), field, || {
                "amplitudes must lie in [-1, 1]".into()
            })?;
        }
        for (field, d) in [("damping", &self.damping), ("damping_h", &self.damping_h)] {
            check(d.is_valid(), field, || {
                format!("{d:?} has a negative or non-finite coefficient")
            })?;
        }
        self.noise
            .validate()
            .map_err(|e| ("noise", e.to_string()))?;
        self.transient
            .validate()
            .map_err(|e| ("transient", e.to_string()))?;
        check(
            self.metadata.sample_rate == MODEL_RATE,
            "metadata.sample_rate",
            || {
                format!(
                    "{} differs from the model rate {MODEL_RATE}",
                    self.metadata.sample_rate
                )
            },
        )?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.violations()
            .map_err(|(field, message)| Error::invalid(format!("{field}: {message}")))
    }

    pub fn polarization_params(&self) -> PolarizationParams {
        PolarizationParams {
            f0: self.f0,
            inharmonicity: self.inharmonicity,
            delta_f: self.delta_f,
            alpha_v: self.alpha_v.clone(),
            alpha_h: self.alpha_h.clone(),
        }
    }

    /// Number of stored real parameters.
    pub fn parameter_count(&self) -> usize {
        let harmonic = 3 + 2 * self.partials + 8;
        let noise = self.noise.frames() * (NOISE_BINS + 2);
        let transient = self.transient.dct_vector.len() + 1;
        harmonic + noise + transient
    }

    /// Stored parameters at 8 bytes each.
    pub fn footprint_bytes(&self) -> usize {
        8 * self.parameter_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityBank {
    pub key_id: u8,
    pub entries: Vec<NoteModel>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema_version: u32,
    #[serde(flatten)]
    bank: VelocityBank,
}

impl VelocityBank {
    /// Builds a bank, sorting entries by velocity.
    pub fn new(key_id: u8, mut entries: Vec<NoteModel>) -> Result<Self> {
        entries.sort_by_key(|e| e.velocity);
        let bank = Self { key_id, entries };
        bank.validate()?;
        Ok(bank)
    }

    fn violations(&self) -> Result<(), Violation> {
        check(!self.entries.is_empty(), "entries", || {
            "bank holds no entries".into()
        })?;
        check(
            self.entries
                .windows(2)
                .all(|w| w[0].velocity < w[1].velocity),
            "entries",
            || "entries not sorted by strictly increasing velocity".into(),
        )?;
        let first = &self.entries[0];
        for e in &self.entries {
            check(e.key_id == self.key_id, "key_id", || {
                format!(
                    "entry at velocity {} has key {} in bank {}",
                    e.velocity, e.key_id, self.key_id
                )
            })?;
            check(e.partials == first.partials, "partials", || {
                format!(
                    "entry at velocity {} has H = {}, expected {}",
                    e.velocity, e.partials, first.partials
                )
            })?;
            check(
                e.noise.frame_size == first.noise.frame_size,
                "noise.frame_size",
                || format!("entry at velocity {} differs from the bank", e.velocity),
            )?;
            e.violations()?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.violations()
            .map_err(|(field, message)| Error::invalid(format!("{field}: {message}")))
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            bank: self.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Load {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Load {
                    field: "schema_version".into(),
                    message: format!("version {v} is not supported (expected {SCHEMA_VERSION})"),
                })
            }
            None => {
                return Err(Error::Load {
                    field: "schema_version".into(),
                    message: "missing or not an integer".into(),
                })
            }
        }
        let doc: Document = serde_json::from_value(value).map_err(|e| {
            let message = e.to_string();
            let field = message
                .split('`')
                .nth(1)
                .unwrap_or("<document>")
                .to_string();
            Error::Load { field, message }
        })?;
        doc.bank
            .violations()
            .map_err(|(field, message)| Error::Load {
                field: field.into(),
                message,
            })?;
        Ok(doc.bank)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Model at `velocity`: a stored entry when one matches, a linear blend
    /// of the two nearest entries in between, the nearest entry outside.
    pub fn interpolate(&self, velocity: u8) -> NoteModel {
        let entries = &self.entries;
        let pos = entries.partition_point(|e| e.velocity < velocity);
        if pos < entries.len() && entries[pos].velocity == velocity {
            return entries[pos].clone();
        }
        if pos == 0 {
            return entries[0].clone();
        }
        if pos == entries.len() {
            return entries[pos - 1].clone();
        }
        let (a, b) = (&entries[pos - 1], &entries[pos]);
        let t = (velocity - a.velocity) as f64 / (b.velocity - a.velocity) as f64;
        let mut model = lerp_model(a, b, t);
        model.velocity = velocity;
        model
    }

    pub fn footprint_bytes(&self) -> usize {
        self.entries.iter().map(NoteModel::footprint_bytes).sum()
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

fn lerp_vec(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            lerp(
                a.get(i).copied().unwrap_or(0.0),
                b.get(i).copied().unwrap_or(0.0),
                t,
            )
        })
        .collect()
}

fn lerp_damping(a: &DampingCoeffs, b: &DampingCoeffs, t: f64) -> DampingCoeffs {
    let (a, b) = (a.to_array(), b.to_array());
    DampingCoeffs::from_array(std::array::from_fn(|i| lerp(a[i], b[i], t)))
}

fn lerp_noise(a: &NoiseModel, b: &NoiseModel, t: f64) -> NoiseModel {
    let frames = a.frames().max(b.frames());
    let silent = vec![0.0; NOISE_BINS];
    let nearest = if t < 0.5 { a } else { b };
    NoiseModel {
        frame_size: a.frame_size,
        filter_magnitudes: (0..frames)
            .map(|i| {
                lerp_vec(
                    a.filter_magnitudes.get(i).unwrap_or(&silent),
                    b.filter_magnitudes.get(i).unwrap_or(&silent),
                    t,
                )
            })
            .collect(),
        means: lerp_vec(&a.means, &b.means, t),
        amplitudes: lerp_vec(&a.amplitudes, &b.amplitudes, t),
        seed: nearest.seed,
        stream: nearest.stream,
    }
}

fn lerp_model(a: &NoteModel, b: &NoteModel, t: f64) -> NoteModel {
    NoteModel {
        key_id: a.key_id,
        velocity: a.velocity,
        f0: lerp(a.f0, b.f0, t),
        inharmonicity: lerp(a.inharmonicity, b.inharmonicity, t),
        delta_f: lerp(a.delta_f, b.delta_f, t),
        partials: a.partials,
        alpha_v: lerp_vec(&a.alpha_v, &b.alpha_v, t),
        alpha_h: lerp_vec(&a.alpha_h, &b.alpha_h, t),
        damping: lerp_damping(&a.damping, &b.damping, t),
        damping_h: lerp_damping(&a.damping_h, &b.damping_h, t),
        noise: lerp_noise(&a.noise, &b.noise, t),
        transient: TransientModel {
            dct_vector: lerp_vec(&a.transient.dct_vector, &b.transient.dct_vector, t),
            gain: lerp(a.transient.gain, b.transient.gain, t),
        },
        metadata: if t < 0.5 {
            a.metadata.clone()
        } else {
            b.metadata.clone()
        },
    }
}
