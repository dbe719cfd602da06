//! JSON trial payloads for the web UI.

use robovoice::hitl::dense::DenseReply;
use robovoice::hitl::gsp::GspReply;
use robovoice::hitl::step::StepReply;
use robovoice::hitl::validation::ValidationReply;
use robovoice::voice_space::SliderKind;
use robovoice::{EffectKind, VoiceConfig};
use serde_json::{json, Value};

use crate::engine::Reply;
use crate::error::{ApiError, ApiResult};
use crate::manifest::{Manifest, StimulusRef};
use crate::render::{RenderCache, RenderJob};
use crate::store::IssuedTrial;

pub fn stimulus_url(hash: &str) -> String {
    format!("/v1/stimuli/{hash}.wav")
}

fn stimulus_view(experiment: &str, s: &StimulusRef) -> Value {
    let image_url = s.image.as_ref().map(|img| {
        if img.starts_with("http://") || img.starts_with("https://") {
            img.clone()
        } else {
            format!("/v1/experiments/{experiment}/images/{}", s.id)
        }
    });
    json!({ "id": s.id, "image_url": image_url, "sentence": s.sentence })
}

fn voice_url(cache: &RenderCache, m: &Manifest, s: &StimulusRef, config: &VoiceConfig) -> ApiResult<String> {
    let job = RenderJob {
        config: config.clone(),
        text: s.sentence.clone().unwrap_or_default(),
        profile: m.effect_profile()?,
        sample_rate: m.sample_rate,
    };
    Ok(stimulus_url(&cache.register(job)))
}

/// "pitch", "flanger5", ...
pub fn effect_label(k: EffectKind) -> String {
    match k {
        EffectKind::Flanger(n) => format!("flanger{n}"),
        other => serde_json::to_value(other).expect("kind")["type"].as_str().unwrap_or_default().to_string(),
    }
}

fn lookup<'a>(m: &'a Manifest, id: &str) -> ApiResult<&'a StimulusRef> {
    m.stimulus(id).ok_or_else(|| ApiError::Internal(format!("stimulus {id} missing from manifest")))
}

/// Payload of a claimed trial. GSP trials list one audio URL per detent of
/// the active slider; renders happen when a URL is first fetched.
pub fn trial_payload(t: &IssuedTrial, cache: &RenderCache) -> ApiResult<Value> {
    let m = &t.manifest;
    let mut out = json!({
        "trial_id": t.trial_id,
        "experiment": t.experiment,
        "participant": t.participant,
    });
    let extra = match &t.reply {
        Reply::Gsp(GspReply::Trial(g)) => {
            let s = lookup(m, &g.stimulus_id)?;
            let profile = m.effect_profile()?;
            let specs = profile.specs();
            let spec = specs[g.active_dim];
            let audio = (0..spec.resolution)
                .map(|p| voice_url(cache, m, s, &g.base_config.with_position(&specs, g.active_dim, p)?))
                .collect::<ApiResult<Vec<_>>>()?;
            let (values, labels): (Vec<f64>, Option<Vec<String>>) = if spec.kind == SliderKind::EffectSelect {
                let slots: Vec<usize> = (0..spec.resolution)
                    .map(|p| robovoice::voice_space::slot_for_position(p, profile.len()))
                    .collect();
                let labels = slots
                    .iter()
                    .map(|&i| effect_label(profile.slots[i].kind))
                    .collect();
                (slots.into_iter().map(|i| i as f64).collect(), Some(labels))
            } else {
                (spec.grid(), None)
            };
            json!({
                "kind": "gsp",
                "stimulus": stimulus_view(&t.experiment, s),
                "iteration": g.iteration,
                "base_config": g.base_config,
                "slider": {
                    "index": spec.index,
                    "kind": spec.kind,
                    "lo": spec.lo,
                    "hi": spec.hi,
                    "resolution": spec.resolution,
                    "current_position": g.current_position,
                    "values": values,
                    "labels": labels,
                },
                "audio": audio,
            })
        }
        Reply::Step(StepReply::Trial(st)) => {
            let s = lookup(m, &st.stimulus_id)?;
            let audio = s.voice.as_ref().map(|v| voice_url(cache, m, s, v)).transpose()?;
            let tags: Vec<Value> = st
                .visible_tags
                .iter()
                .map(|r| json!({ "text": r.text, "mean_stars": r.mean_stars(), "ratings": r.stars.len(), "flags": r.flags }))
                .collect();
            json!({
                "kind": "step",
                "stimulus": stimulus_view(&t.experiment, s),
                "position": st.position,
                "visible_tags": tags,
                "audio": audio,
            })
        }
        Reply::Dense(DenseReply::Trial(d)) => {
            let s = lookup(m, &d.stimulus_id)?;
            let audio = match d.modality {
                robovoice::hitl::Modality::Voice => s.voice.as_ref().map(|v| voice_url(cache, m, s, v)).transpose()?,
                robovoice::hitl::Modality::Image => None,
            };
            json!({
                "kind": "dense",
                "stimulus": stimulus_view(&t.experiment, s),
                "modality": d.modality,
                "dimensions": d.dimensions,
                "scale": { "min": 1, "max": 5 },
                "audio": audio,
            })
        }
        Reply::Validation(ValidationReply::Trial(v)) => {
            let s = lookup(m, &v.stimulus_id)?;
            json!({
                "kind": "validation",
                "stimulus": stimulus_view(&t.experiment, s),
                "scale": { "min": 1, "max": 5 },
                "audio": voice_url(cache, m, s, &v.config)?,
            })
        }
        _ => return Err(ApiError::Internal("not a trial".into())),
    };
    let (Value::Object(o), Value::Object(e)) = (&mut out, extra) else {
        unreachable!("both are objects")
    };
    o.extend(e);
    Ok(out)
}
