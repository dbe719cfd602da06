//! Render a voice with the stub backend, run it through each effect at full
//! strength and write the results as WAV files.
//!
//! `cargo run -p robovoice --example effect_rack -- [out_dir]`

use std::path::PathBuf;

use robovoice::dsp::{apply_rack, render_voice, StubBackend, DEFAULT_SAMPLE_RATE};
use robovoice::labels::harvard_sentences;
use robovoice::{EffectProfile, VoiceConfig};

fn main() -> robovoice::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("robovoice-rack"));
    std::fs::create_dir_all(&out)?;
    let profile = EffectProfile::extended();
    let text = harvard_sentences()[0];
    let cfg = VoiceConfig { latent: [0.4, -0.2, 0.1, 0.0, 0.3], ..VoiceConfig::default() };

    let dry = render_voice(&StubBackend, &cfg, text, &profile, DEFAULT_SAMPLE_RATE, 1)?;
    dry.write_wav(out.join("dry.wav"))?;
    println!("dry: {:.2}s rms {:.3}", dry.duration(), dry.rms());

    for (id, slot) in profile.slots.iter().enumerate() {
        let wet_cfg = VoiceConfig { effect_id: id, effect_amount: 1.0, ..cfg.clone() };
        let wet = apply_rack(&dry, &wet_cfg, &profile, 1)?;
        let name = format!("{id:02}-{:?}.wav", slot.kind).to_lowercase().replace(['(', ')'], "");
        wet.write_wav(out.join(&name))?;
        println!("{name}: {:.2}s peak {:.3} rms {:.3}", wet.duration(), wet.peak(), wet.rms());
    }
    println!("wrote {}", out.display());
    Ok(())
}
