//! The quantized eight-slider voice control space.
//!
//! Sliders 0..5 steer latent timbre, slider 5 the speaking rate, slider 6 picks
//! one effect slot of the active [`EffectProfile`] and slider 7 sets that
//! effect's normalized amount. Every slider has 16 linearly spaced positions.
//! The effect selector is categorical: its 16 positions are split evenly over
//! the registered slots.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::params::{bounds, EffectParams};
use crate::error::{Error, Result};

pub const GRID_RESOLUTION: usize = 16;
pub const LATENT_DIMS: usize = 5;
pub const SLIDER_COUNT: usize = 8;
pub const SPEED_DIM: usize = 5;
pub const EFFECT_DIM: usize = 6;
pub const AMOUNT_DIM: usize = 7;
pub const SPEED_RANGE: (f64, f64) = (0.46, 1.53);

/// Slider positions of a config, one per dimension.
pub type Positions = [usize; SLIDER_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliderKind {
    Latent,
    Speed,
    EffectSelect,
    EffectAmount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderSpec {
    pub index: usize,
    pub kind: SliderKind,
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

impl SliderSpec {
    pub fn continuous(index: usize, kind: SliderKind, lo: f64, hi: f64) -> Self {
        Self {
            index,
            kind,
            lo,
            hi,
            resolution: GRID_RESOLUTION,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == SliderKind::EffectSelect
    }

    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn step(&self) -> f64 {
        self.range() / (self.resolution - 1) as f64
    }

    /// Value at grid position `pos`. Endpoints are exact.
    pub fn grid_value(&self, pos: usize) -> f64 {
        let last = self.resolution - 1;
        if pos == 0 {
            self.lo
        } else if pos >= last {
            self.hi
        } else {
            self.lo + self.range() * pos as f64 / last as f64
        }
    }

    /// Nearest grid position after clamping; exact ties go toward `lo`.
    pub fn nearest_position(&self, value: f64) -> usize {
        let v = value.clamp(self.lo, self.hi);
        let t = (v - self.lo) / self.step();
        let pos = (t - 0.5).ceil().max(0.0) as usize;
        pos.min(self.resolution - 1)
    }

    pub fn snap(&self, value: f64) -> f64 {
        self.grid_value(self.nearest_position(value))
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.resolution).map(|p| self.grid_value(p)).collect()
    }
}

/// Slider specs of the default space for a profile with `n_slots` effects.
pub fn default_specs(n_slots: usize) -> [SliderSpec; SLIDER_COUNT] {
    let mut specs = [SliderSpec::continuous(0, SliderKind::Latent, -1.0, 1.0); SLIDER_COUNT];
    for (i, s) in specs.iter_mut().enumerate().take(LATENT_DIMS) {
        s.index = i;
    }
    specs[SPEED_DIM] =
        SliderSpec::continuous(SPEED_DIM, SliderKind::Speed, SPEED_RANGE.0, SPEED_RANGE.1);
    specs[EFFECT_DIM] = SliderSpec {
        index: EFFECT_DIM,
        kind: SliderKind::EffectSelect,
        lo: 0.0,
        hi: n_slots.saturating_sub(1) as f64,
        resolution: GRID_RESOLUTION,
    };
    specs[AMOUNT_DIM] = SliderSpec::continuous(AMOUNT_DIM, SliderKind::EffectAmount, 0.0, 1.0);
    specs
}

/// Effect slot selected by effect-slider position `pos`.
pub fn slot_for_position(pos: usize, n_slots: usize) -> usize {
    (pos.min(GRID_RESOLUTION - 1) * n_slots) / GRID_RESOLUTION
}

/// Lowest effect-slider position that selects `slot`.
pub fn position_for_slot(slot: usize, n_slots: usize) -> usize {
    (slot * GRID_RESOLUTION).div_ceil(n_slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "variant", rename_all = "snake_case")]
pub enum EffectKind {
    Pitch,
    Quality,
    Timeshift,
    Vocoder,
    /// Flanger type 1..=5.
    Flanger(u8),
    Tremolo,
}

impl EffectKind {
    pub fn default_bound(&self) -> f64 {
        match self {
            EffectKind::Pitch => bounds::PITCH,
            EffectKind::Quality => bounds::QUALITY,
            EffectKind::Timeshift => bounds::TIMESHIFT_MS,
            EffectKind::Vocoder => bounds::VOCODER,
            EffectKind::Flanger(_) => bounds::FLANGER,
            EffectKind::Tremolo => bounds::TREMOLO,
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectKind::Pitch => write!(f, "pitch"),
            EffectKind::Quality => write!(f, "quality"),
            EffectKind::Timeshift => write!(f, "timeshift"),
            EffectKind::Vocoder => write!(f, "vocoder"),
            EffectKind::Flanger(t) => write!(f, "flanger-{t}"),
            EffectKind::Tremolo => write!(f, "tremolo"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSlot {
    pub kind: EffectKind,
    pub upper_bound: f64,
}

impl EffectSlot {
    pub fn new(kind: EffectKind) -> Self {
        Self {
            kind,
            upper_bound: kind.default_bound(),
        }
    }
}

/// Ordered effect slots plus their fixed parameters. This is also the JSON
/// layout of an effect profile file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectProfile {
    pub name: String,
    pub slots: Vec<EffectSlot>,
    #[serde(default)]
    pub params: EffectParams,
}

impl Default for EffectProfile {
    fn default() -> Self {
        Self::standard()
    }
}

impl EffectProfile {
    /// The eight effects: pitch, synthesis quality, timeshift, vocoder and
    /// flanger types 1-4.
    pub fn standard() -> Self {
        use EffectKind::*;
        let kinds = [
            Pitch,
            Quality,
            Timeshift,
            Vocoder,
            Flanger(1),
            Flanger(2),
            Flanger(3),
            Flanger(4),
        ];
        Self {
            name: "default".into(),
            slots: kinds.into_iter().map(EffectSlot::new).collect(),
            params: EffectParams::default(),
        }
    }

    /// Standard slots plus tremolo and flanger type 5.
    pub fn extended() -> Self {
        let mut p = Self::standard();
        p.name = "extended".into();
        p.slots.push(EffectSlot::new(EffectKind::Tremolo));
        p.slots.push(EffectSlot::new(EffectKind::Flanger(5)));
        p
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::standard()),
            "extended" => Some(Self::extended()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.slots.is_empty() {
            return Err(Error::Invalid("effect profile has no slots".into()));
        }
        for s in &p.slots {
            if let EffectKind::Flanger(t) = s.kind {
                if !(1..=5).contains(&t) {
                    return Err(Error::UnknownFlanger(t));
                }
            }
            if !(s.upper_bound > 0.0 && s.upper_bound.is_finite()) {
                return Err(Error::Invalid(format!("bad upper bound for {}", s.kind)));
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, id: usize) -> Result<&EffectSlot> {
        self.slots.get(id).ok_or(Error::UnknownEffectSlot(id))
    }

    pub fn specs(&self) -> [SliderSpec; SLIDER_COUNT] {
        default_specs(self.len())
    }
}

/// A point of the slider space. Serialized flat:
/// `{latent, speed, effect_id, effect_amount, profile}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceConfig {
    pub latent: [f64; LATENT_DIMS],
    pub speed: f64,
    pub effect_id: usize,
    pub effect_amount: f64,
    #[serde(default = "default_profile_name")]
    pub profile: String,
}

fn default_profile_name() -> String {
    "default".into()
}

impl Default for VoiceConfig {
    fn default() -> Self {
        Self {
            latent: [0.0; LATENT_DIMS],
            speed: 1.0,
            effect_id: 0,
            effect_amount: 0.0,
            profile: default_profile_name(),
        }
    }
}

impl VoiceConfig {
    /// Continuous value of slider `dim`; the effect slider reports its slot.
    pub fn value(&self, dim: usize) -> f64 {
        match dim {
            d if d < LATENT_DIMS => self.latent[d],
            SPEED_DIM => self.speed,
            EFFECT_DIM => self.effect_id as f64,
            AMOUNT_DIM => self.effect_amount,
            _ => f64::NAN,
        }
    }

    fn set_value(&mut self, dim: usize, v: f64) {
        match dim {
            d if d < LATENT_DIMS => self.latent[d] = v,
            SPEED_DIM => self.speed = v,
            EFFECT_DIM => self.effect_id = v as usize,
            AMOUNT_DIM => self.effect_amount = v,
            _ => {}
        }
    }

    /// Grid position of every slider.
    pub fn positions(&self, specs: &[SliderSpec; SLIDER_COUNT]) -> Positions {
        let n_slots = specs[EFFECT_DIM].hi as usize + 1;
        let mut out = [0; SLIDER_COUNT];
        for (d, spec) in specs.iter().enumerate() {
            out[d] = if spec.is_categorical() {
                position_for_slot(self.effect_id, n_slots)
            } else {
                spec.nearest_position(self.value(d))
            };
        }
        out
    }

    pub fn position(&self, specs: &[SliderSpec; SLIDER_COUNT], dim: usize) -> usize {
        self.positions(specs)[dim]
    }

    /// Copy with slider `dim` moved to grid position `pos`.
    pub fn with_position(
        &self,
        specs: &[SliderSpec; SLIDER_COUNT],
        dim: usize,
        pos: usize,
    ) -> Result<Self> {
        let spec = specs.get(dim).ok_or(Error::UnknownSlider(dim))?;
        if pos >= spec.resolution {
            return Err(Error::OffGrid(pos as f64));
        }
        let mut out = self.clone();
        if spec.is_categorical() {
            out.effect_id = slot_for_position(pos, spec.hi as usize + 1);
        } else {
            out.set_value(dim, spec.grid_value(pos));
        }
        Ok(out)
    }

    pub fn from_positions(
        specs: &[SliderSpec; SLIDER_COUNT],
        positions: &Positions,
        profile: &str,
    ) -> Self {
        let mut cfg = VoiceConfig {
            profile: profile.to_string(),
            ..Default::default()
        };
        for (d, &p) in positions.iter().enumerate() {
            // positions are clamped so this cannot fail
            cfg = cfg
                .with_position(specs, d, p.min(specs[d].resolution - 1))
                .expect("valid dimension");
        }
        cfg
    }

    /// Physical amount of the selected effect: normalized amount times the
    /// slot's upper bound.
    pub fn physical_amount(&self, profile: &EffectProfile) -> Result<f64> {
        Ok(self.effect_amount.clamp(0.0, 1.0) * profile.slot(self.effect_id)?.upper_bound)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Clamp every continuous field into its range and snap it to the nearest of
/// its grid points. The effect slot is clamped to the registered slots.
pub fn quantize(config: &VoiceConfig, specs: &[SliderSpec; SLIDER_COUNT]) -> VoiceConfig {
    let mut out = config.clone();
    for (d, spec) in specs.iter().enumerate() {
        if spec.is_categorical() {
            out.effect_id = config.effect_id.min(spec.hi as usize);
        } else {
            out.set_value(d, spec.snap(config.value(d)));
        }
    }
    out
}

/// Uniform draw over the grid: each continuous slider over its 16 positions,
/// the effect uniformly over slots. Deterministic given `seed`.
pub fn random_config(seed: u64) -> VoiceConfig {
    random_config_in(&EffectProfile::standard(), seed)
}

pub fn random_config_in(profile: &EffectProfile, seed: u64) -> VoiceConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_config_with(profile, &mut rng)
}

pub fn random_config_with<R: Rng + ?Sized>(profile: &EffectProfile, rng: &mut R) -> VoiceConfig {
    let specs = profile.specs();
    let mut cfg = VoiceConfig {
        profile: profile.name.clone(),
        ..Default::default()
    };
    for (d, spec) in specs.iter().enumerate() {
        if spec.is_categorical() {
            cfg.effect_id = rng.random_range(0..profile.len());
        } else {
            let pos = rng.random_range(0..spec.resolution);
            cfg.set_value(d, spec.grid_value(pos));
        }
    }
    cfg
}

/// Controls of the built-in parametric voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub f0_hz: f64,
    pub formant_scale: f64,
    pub tilt_db_per_octave: f64,
    pub breathiness: f64,
    pub vibrato_cents: f64,
}

pub const F0_RANGE: (f64, f64) = (75.0, 300.0);
pub const FORMANT_SCALE_RANGE: (f64, f64) = (0.8, 1.25);
pub const TILT_RANGE: (f64, f64) = (-12.0, 0.0);
pub const BREATHINESS_RANGE: (f64, f64) = (0.0, 0.5);
pub const VIBRATO_RANGE: (f64, f64) = (0.0, 300.0);

fn unit(x: f64) -> f64 {
    ((x.clamp(-1.0, 1.0)) + 1.0) / 2.0
}

fn lin(range: (f64, f64), t: f64) -> f64 {
    range.0 + (range.1 - range.0) * t
}

fn log_interp(range: (f64, f64), t: f64) -> f64 {
    range.0 * (range.1 / range.0).powf(t)
}

/// Map the five latent sliders to stub synthesizer controls. The first two
/// interpolate geometrically, the others linearly.
pub fn to_synth_params(config: &VoiceConfig) -> SynthParams {
    let l = &config.latent;
    SynthParams {
        f0_hz: log_interp(F0_RANGE, unit(l[0])),
        formant_scale: log_interp(FORMANT_SCALE_RANGE, unit(l[1])),
        tilt_db_per_octave: lin(TILT_RANGE, unit(l[2])),
        breathiness: lin(BREATHINESS_RANGE, unit(l[3])),
        vibrato_cents: lin(VIBRATO_RANGE, unit(l[4])),
    }
}

/// Convenience bundle of a profile and its slider specs.
#[derive(Debug, Clone)]
pub struct VoiceSpace {
    pub profile: EffectProfile,
    pub specs: [SliderSpec; SLIDER_COUNT],
}

impl Default for VoiceSpace {
    fn default() -> Self {
        Self::new(EffectProfile::standard())
    }
}

impl VoiceSpace {
    pub fn new(profile: EffectProfile) -> Self {
        let specs = profile.specs();
        Self { profile, specs }
    }

    pub fn quantize(&self, config: &VoiceConfig) -> VoiceConfig {
        quantize(config, &self.specs)
    }

    pub fn random(&self, seed: u64) -> VoiceConfig {
        random_config_in(&self.profile, seed)
    }

    pub fn n_slots(&self) -> usize {
        self.profile.len()
    }

    pub fn from_positions(&self, positions: &Positions) -> VoiceConfig {
        VoiceConfig::from_positions(&self.specs, positions, &self.profile.name)
    }

    pub fn positions(&self, config: &VoiceConfig) -> Positions {
        config.positions(&self.specs)
    }

    /// Range-normalized coordinate in [0, 1] for continuous sliders.
    pub fn normalized(&self, config: &VoiceConfig, dim: usize) -> f64 {
        let s = &self.specs[dim];
        (config.value(dim) - s.lo) / s.range()
    }

    /// True when every continuous field sits on its grid and the slot exists.
    pub fn is_on_grid(&self, config: &VoiceConfig) -> bool {
        self.specs.iter().enumerate().all(|(d, s)| {
            if s.is_categorical() {
                config.effect_id < self.n_slots()
            } else {
                let v = config.value(d);
                v.is_finite() && s.grid_value(s.nearest_position(v)) == v
            }
        })
    }
}
