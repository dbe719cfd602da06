//! The quantized slider space: sweep each dimension of a voice across its 16
//! detents and print the physical value behind every position.

use robovoice::voice_space::{quantize, GRID_RESOLUTION, SLIDER_COUNT};
use robovoice::{EffectProfile, VoiceConfig};

fn main() -> robovoice::Result<()> {
    let profile = EffectProfile::standard();
    let specs = profile.specs();
    let base = quantize(
        &VoiceConfig {
            latent: [0.31, -0.5, 0.0, 0.9, -0.12],
            speed: 1.07,
            effect_id: 3,
            effect_amount: 0.41,
            ..VoiceConfig::default()
        },
        &specs,
    );
    println!("base {}", base.to_json());
    println!("positions {:?}", base.positions(&specs));

    for dim in 0..SLIDER_COUNT {
        let values: Vec<String> = (0..GRID_RESOLUTION)
            .map(|p| {
                let v = base.with_position(&specs, dim, p)?;
                Ok(format!("{:.3}", v.value(dim)))
            })
            .collect::<robovoice::Result<_>>()?;
        println!("dim {dim} ({:?}): {}", specs[dim].kind, values.join(" "));
    }

    for (id, slot) in profile.slots.iter().enumerate() {
        let full = VoiceConfig { effect_id: id, effect_amount: 1.0, ..base.clone() };
        println!("slot {id} {:?}: max amount {}", slot.kind, full.physical_amount(&profile)?);
    }
    Ok(())
}
