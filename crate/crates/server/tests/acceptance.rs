//! Acceptance run: one PASS/FAIL line per criterion with its runtime.
//! `cargo test -p robovoice-server --test acceptance`

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use robovoice::analysis::cooccurrence_graph;
use robovoice::analysis::predict::Condition;
use robovoice::analysis::wilcoxon::wilcoxon_diffs;
use robovoice::analysis::{factor_analysis, pca, varimax, wilcoxon_signed_rank, FaOptions, Standardize, WilcoxonMode};
use robovoice::dsp::{apply_effect, fx_flanger, fx_pitch, render_voice, time_stretch, AudioBuffer, EffectParams, StubBackend};
use robovoice::hitl::step::{autocomplete, StepParams, StepTag, TagAction};
use robovoice::labels::LITERATURE_TERMS;
use robovoice::sim::{run_gsp_sim, run_pipeline, OracleWorld, PipelineParams, WorldParams};
use robovoice::voice_space::{GRID_RESOLUTION, SPEED_DIM};
use robovoice::{EffectKind, EffectProfile, VoiceConfig};
use robovoice_server::agents::{run_study, StudyConfig};
use robovoice_server::{replay_log, router, RenderCache, RenderJob, Store, StoreOptions, SystemClock};
use serde_json::json;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SR: u32 = 22_050;
const SRF: f64 = 22_050.0;

fn world(n: usize, sigma: f64, seed: u64) -> OracleWorld {
    OracleWorld::new(
        WorldParams {
            n_stimuli: n,
            sigma,
            ..WorldParams::default()
        },
        seed,
    )
}

// ---------------------------------------------------------------- DSP

fn dsp_analytic() -> Result<String, String> {
    let p = EffectParams::default();
    let x = AudioBuffer::sine(440.0, 0.5, SR as usize, SR);
    let y = fx_pitch(&x, 0.5, &p).map_err(|e| e.to_string())?;
    let n = 1 << 14;
    let seg = &y.samples[(y.len() - n) / 2..(y.len() + n) / 2];
    let mags = magnitude_spectrum(seg, n);
    let (f0, _) = peak_in_band(&mags, SRF, n, 420.0, 460.0);
    let (up, _) = peak_in_band(&mags, SRF, n, 560.0, 610.0);
    let (down, _) = peak_in_band(&mags, SRF, n, 310.0, 350.0);
    for (got, want) in [(f0, 440.0), (up, 587.3), (down, 329.6)] {
        ensure!((got - want).abs() <= 2.0, "pitch peak {got:.2} Hz, want {want} +- 2");
    }
    let top: Vec<f64> = peaks(&mags, SRF, n, 0.05).iter().take(3).map(|p| p.0).collect();
    ensure!(
        [f0, up, down].iter().all(|f| top.iter().any(|t| (t - f).abs() < 1.0)),
        "three strongest peaks {top:?}"
    );
    let ratio = up / down;
    let want = 2f64.powf(10.0 / 12.0);
    ensure!((ratio / want - 1.0).abs() <= 0.005, "shifted ratio {ratio:.5} vs {want:.5}");

    let mut worst_notch: f64 = 0.0;
    for amount in [0.3, 0.78] {
        let mut imp = vec![0.0; 2048];
        imp[0] = 1.0;
        let h = fx_flanger(&AudioBuffer::new(imp, SR), 5, amount, &p).map_err(|e| e.to_string())?.samples;
        let nf = 1 << 16;
        let mags: Vec<f64> = fft(&h, nf)[..nf / 2 + 1].iter().map(|c| c.norm()).collect();
        let found = notches(&mags, SRF, nf, 2000.0);
        ensure!(found.len() >= 10, "flanger5 found {} notches", found.len());
        for w in found.windows(2) {
            let gap = w[1] - w[0];
            // notches sit at odd multiples of 50 Hz; neighbours are 100 Hz apart
            worst_notch = worst_notch.max((gap - 100.0).abs() / 2.0);
        }
        for (k, f) in found.iter().enumerate() {
            let want = (2 * k + 1) as f64 * 50.0;
            ensure!((f - want).abs() <= 2.0, "flanger5 notch {k} at {f:.2} Hz, want {want}");
        }
    }
    ensure!(worst_notch <= 2.0, "flanger5 spacing off by {worst_notch:.2} Hz");

    let spec = EffectProfile::standard().specs()[SPEED_DIM];
    let mut worst_len: f64 = 0.0;
    for pos in 0..GRID_RESOLUTION {
        let speed = spec.grid_value(pos);
        let y = time_stretch(&x, speed).map_err(|e| e.to_string())?;
        let want = SR as f64 / speed;
        worst_len = worst_len.max((y.len() as f64 - want).abs() / want);
    }
    ensure!(worst_len <= 0.02, "time_stretch length error {worst_len:.4}");

    let voice = render_voice(
        &StubBackend,
        &VoiceConfig {
            latent: [0.2, -0.3, 0.1, 0.0, 0.4],
            ..VoiceConfig::default()
        },
        "Rice is often served in round bowls.",
        &EffectProfile::standard(),
        SR,
        1,
    )
    .map_err(|e| e.to_string())?;
    let mut worst_id: f64 = 0.0;
    for kind in EffectProfile::extended().slots.iter().map(|s| s.kind) {
        let y = apply_effect(&voice, kind, 0.0, &p, 1).map_err(|e| e.to_string())?;
        let e = rel_rms_after_gain(&voice.samples, &y.samples);
        ensure!(e < 1e-3, "{kind:?} at amount 0: rel rms {e:.2e}");
        worst_id = worst_id.max(e);
    }
    Ok(format!(
        "peaks {f0:.2}/{up:.2}/{down:.2} Hz, ratio err {:.3}%, notch err {worst_notch:.2} Hz, stretch err {:.2}%, identity err {worst_id:.1e}",
        (ratio / want - 1.0).abs() * 100.0,
        worst_len * 100.0
    ))
}

fn effect_bounds() -> Result<String, String> {
    let profile = EffectProfile::standard();
    let table = [
        (EffectKind::Pitch, 0.5),
        (EffectKind::Quality, 1.0),
        (EffectKind::Timeshift, 45.0),
        (EffectKind::Vocoder, 0.35),
        (EffectKind::Flanger(1), 0.78),
        (EffectKind::Flanger(2), 0.78),
        (EffectKind::Flanger(3), 0.78),
        (EffectKind::Flanger(4), 0.78),
    ];
    ensure!(profile.len() == 8, "default profile has {} slots", profile.len());
    for (slot, (kind, cap)) in profile.slots.iter().zip(table) {
        ensure!(slot.kind == kind, "slot {:?} where {kind:?} expected", slot.kind);
        ensure!(slot.upper_bound == cap, "{kind:?} cap {} != {cap}", slot.upper_bound);
    }
    for id in 0..profile.len() {
        let full = VoiceConfig {
            effect_id: id,
            effect_amount: 1.0,
            ..VoiceConfig::default()
        };
        let amt = full.physical_amount(&profile).map_err(|e| e.to_string())?;
        ensure!(amt == table[id].1, "slot {id}: physical amount at slider max {amt}");
    }
    let text = "The juice of lemons makes fine punch.";
    let mut max_peak: f64 = 0.0;
    for id in 0..profile.len() {
        for pos in 0..GRID_RESOLUTION {
            let cfg = VoiceConfig {
                effect_id: id,
                effect_amount: pos as f64 / (GRID_RESOLUTION - 1) as f64,
                ..VoiceConfig::default()
            };
            let y = render_voice(&StubBackend, &cfg, text, &profile, SR, 9).map_err(|e| e.to_string())?;
            ensure!(y.is_finite(), "slot {id} pos {pos}: non-finite samples");
            ensure!(y.peak() <= 1.0, "slot {id} pos {pos}: peak {}", y.peak());
            max_peak = max_peak.max(y.peak());
        }
    }
    Ok(format!("caps match for 8 slots; 128 renders finite, max peak {max_peak:.4}"))
}

// ---------------------------------------------------------------- GSP

/// Average ranks, computed here without the crate's helper.
fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact signed-rank p-value by counting sign patterns with
/// integer arithmetic over doubled ranks.
fn enumeration_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let ranks = oracle_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let obs: usize = d.iter().zip(&doubled).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u128; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all: u128 = 1u128 << d.len();
    let le: u128 = counts[..=obs].iter().sum();
    let ge: u128 = counts[obs..].iter().sum();
    (2.0 * le.min(ge) as f64 / all as f64).min(1.0)
}

fn gsp_convergence() -> Result<String, String> {
    let w = world(50, 1.0, 4);
    let all: Vec<usize> = (0..50).collect();
    let r = run_gsp_sim(&w, &all, 5, 16, 11).map_err(|e| e.to_string())?.report;
    let diffs = &r.mean_standardized_diff;
    let first3 = diffs[..3].iter().sum::<f64>() / 3.0;
    let last3 = diffs[diffs.len() - 3..].iter().sum::<f64>() / 3.0;
    ensure!(last3 < 0.5 * first3, "standardized diff first3 {first3:.4} last3 {last3:.4}");

    let mean3 = |v: &[u8]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    let early: Vec<f64> = r.chains.iter().map(|c| mean3(&c.ratings[..3])).collect();
    let late: Vec<f64> = r.chains.iter().map(|c| mean3(&c.ratings[c.ratings.len() - 3..])).collect();
    let (me, ml) = (early.iter().sum::<f64>() / 50.0, late.iter().sum::<f64>() / 50.0);
    ensure!(ml > me, "mean rating last3 {ml:.3} <= first3 {me:.3}");
    let module = wilcoxon_signed_rank(&late, &early, WilcoxonMode::Auto).map_err(|e| e.to_string())?;
    let module_exact = wilcoxon_signed_rank(&late, &early, WilcoxonMode::Exact).map_err(|e| e.to_string())?;
    let d: Vec<f64> = late.iter().zip(&early).map(|(a, b)| a - b).collect();
    let oracle = enumeration_p(&d);
    ensure!(module.p < 0.01, "module p {}", module.p);
    ensure!(oracle < 0.01, "enumeration p {oracle}");
    ensure!(
        (module_exact.p - oracle).abs() <= 1e-12 + 1e-9 * oracle,
        "module exact p {} vs enumeration {oracle}",
        module_exact.p
    );

    let w0 = world(50, 0.0, 3);
    let r0 = run_gsp_sim(&w0, &all, 5, 16, 9).map_err(|e| e.to_string())?;
    let within = r0.report.all_converged_within().ok_or("a noiseless chain never reached its ideal")?;
    ensure!(within <= 8, "noiseless chains converged within {within} iterations");
    for (c, s) in r0.experiment.chains.iter().zip(&all) {
        ensure!(c.final_config() == &w0.ideal_config(*s), "noiseless chain {s} left its ideal");
    }
    Ok(format!(
        "diff {first3:.3} -> {last3:.3}; rating {me:.2} -> {ml:.2}, p {:.2e} (exact {:.2e}, enumeration {oracle:.2e}); noiseless within {within}",
        module.p, module_exact.p
    ))
}

fn median_benefit() -> Result<String, String> {
    let (mut five, mut one) = (0.0, 0.0);
    let mut wins = 0;
    for seed in 0..50 {
        let w = world(10, 1.0, 100 + seed);
        let all: Vec<usize> = (0..10).collect();
        let a = run_gsp_sim(&w, &all, 5, 16, seed).map_err(|e| e.to_string())?.report.mean_final_distance();
        let b = run_gsp_sim(&w, &all, 1, 16, seed).map_err(|e| e.to_string())?.report.mean_final_distance();
        five += a / 50.0;
        one += b / 50.0;
        wins += (a < b) as usize;
    }
    ensure!(five < one, "5-rater {five:.4} not below 1-rater {one:.4}");
    Ok(format!("mean final distance 5 raters {five:.4} < 1 rater {one:.4} ({wins}/50 seeds lower)"))
}

// ---------------------------------------------------------------- STEP-Tag

const VOCAB: [&str; 3] = ["shiny", "Shiny ", "loud"];

#[derive(Debug, Clone, Default, PartialEq)]
struct ModelTag {
    visible: bool,
    flaggers: BTreeSet<String>,
    stars: Vec<u8>,
    generation: usize,
}

/// Reference model of one stimulus' tags, written from the protocol rules.
fn model_apply(tags: &mut BTreeMap<String, ModelTag>, who: &str, actions: &[TagAction]) -> bool {
    let mut draft = tags.clone();
    for a in actions {
        let (_, ok) = match a {
            TagAction::Create { text } => {
                let t = text.trim().to_lowercase();
                let e = draft.entry(t.clone()).or_default();
                if e.visible {
                    (t, false)
                } else {
                    *e = ModelTag {
                        visible: true,
                        generation: e.generation + 1,
                        ..ModelTag::default()
                    };
                    (t, true)
                }
            }
            TagAction::Rate { text, stars } => {
                let t = text.trim().to_lowercase();
                match draft.get_mut(&t) {
                    Some(e) if e.visible && (1..=5).contains(stars) => {
                        e.stars.push(*stars);
                        (t, true)
                    }
                    _ => (t, false),
                }
            }
            TagAction::Flag { text } => {
                let t = text.trim().to_lowercase();
                match draft.get_mut(&t) {
                    Some(e) if e.visible && !e.flaggers.contains(who) => {
                        e.flaggers.insert(who.to_string());
                        if e.flaggers.len() >= 2 {
                            e.visible = false;
                        }
                        (t, true)
                    }
                    _ => (t, false),
                }
            }
        };
        if !ok {
            return false;
        }
    }
    *tags = draft;
    true
}

fn action() -> impl Strategy<Value = TagAction> {
    let text = (0usize..VOCAB.len()).prop_map(|i| VOCAB[i].to_string());
    prop_oneof![
        text.clone().prop_map(|text| TagAction::Create { text }),
        (text.clone(), 0u8..7).prop_map(|(text, stars)| TagAction::Rate { text, stars }),
        text.prop_map(|text| TagAction::Flag { text }),
    ]
}

fn step_tag() -> Result<String, String> {
    let mut runner = TestRunner::new(Config {
        cases: 400,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = prop::collection::vec(prop::collection::vec(action(), 0..4), 1..25);
    let removals = std::cell::Cell::new(0usize);
    let recreations = std::cell::Cell::new(0usize);
    runner
        .run(&strategy, |batches| {
            let params = StepParams {
                participants_per_stimulus: 1000,
                ..StepParams::default()
            };
            let ids = vec!["r1".to_string()];
            let mut live = StepTag::new(&ids, params.clone());
            let mut log = Vec::new();
            let mut model: BTreeMap<String, ModelTag> = BTreeMap::new();
            for (i, actions) in batches.iter().enumerate() {
                let who = format!("p{i}");
                let cmd = robovoice::hitl::StepCommand::NextTrial { participant: who.clone(), at_ms: 0 };
                let trial = match live.apply(&cmd) {
                    Ok(robovoice::hitl::step::StepReply::Trial(t)) => t.trial_id,
                    other => return Err(TestCaseError::fail(format!("claim failed: {other:?}"))),
                };
                log.push(cmd);
                let sub = robovoice::hitl::StepCommand::Submit { trial, actions: actions.clone() };
                let accepted = live.apply(&sub).is_ok();
                log.push(sub);
                prop_assert_eq!(accepted, model_apply(&mut model, &who, actions));
                if !accepted {
                    // a rejected batch leaves the claim open; the participant resubmits nothing
                    let retry = robovoice::hitl::StepCommand::Submit { trial, actions: vec![] };
                    prop_assert!(live.apply(&retry).is_ok());
                    log.push(retry);
                }
                let s = &live.stimuli[0];
                for (text, m) in &model {
                    let Some(t) = s.tags.get(text) else {
                        prop_assert!(m.generation == 0);
                        continue;
                    };
                    prop_assert_eq!(t.is_visible(), m.visible);
                    prop_assert_eq!(&t.flagged_by, &m.flaggers);
                    prop_assert_eq!(t.flags, m.flaggers.len());
                    prop_assert_eq!(&t.stars, &m.stars);
                    prop_assert_eq!(t.generation, m.generation);
                    if !m.visible {
                        removals.set(removals.get() + 1);
                    }
                    if m.generation > 1 {
                        recreations.set(recreations.get() + 1);
                    }
                }
            }
            let replayed = StepTag::replay(&ids, params, &log);
            let a = serde_json::to_vec(&replayed).unwrap();
            let b = serde_json::to_vec(&live).unwrap();
            prop_assert!(a == b, "replayed state differs");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure!(removals.get() > 0 && recreations.get() > 0, "property run never removed and re-created a tag");

    // the same through the orchestrator's log
    let store = Store::in_memory();
    let id = store
        .create(serde_json::from_value(json!({"kind": "step", "stimuli": [{"id": "r1"}], "step": {"participants_per_stimulus": 5}})).unwrap())
        .map_err(|e| e.to_string())?;
    let batches = [
        json!([{"action": "create", "text": "tinny"}]),
        json!([{"action": "flag", "text": "tinny"}]),
        json!([{"action": "flag", "text": "tinny"}]),
        json!([{"action": "create", "text": "tinny"}, {"action": "rate", "text": "tinny", "stars": 5}]),
    ];
    for (i, b) in batches.iter().enumerate() {
        let t = store.next_trial(&id, &format!("p{i}")).map_err(|e| e.to_string())?;
        store.respond(&t.trial_id, &json!({ "actions": b }), None).map_err(|e| e.to_string())?;
    }
    let state = store.state(&id).map_err(|e| e.to_string())?;
    let robovoice_server::engine::Engine::Step(s) = &state.engine else { return Err("not step".into()) };
    let tag = &s.stimuli[0].tags["tinny"];
    ensure!(tag.is_visible() && tag.flags == 0 && tag.generation == 2 && tag.stars == [5], "{tag:?}");
    let replayed = replay_log(&store.export(&id).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(replayed.hash() == state.hash(), "store replay hash differs");

    let usage = BTreeMap::new();
    for term in LITERATURE_TERMS {
        let hits = autocomplete(&usage, term);
        ensure!(hits.first().map(String::as_str) == Some(term), "autocomplete({term:?}) = {hits:?}");
    }
    Ok(format!(
        "400 random sessions match the reference model and replay byte-exactly ({} removals, {} re-creations seen); {} terms self-complete",
        removals.get(),
        recreations.get(),
        LITERATURE_TERMS.len()
    ))
}

// ---------------------------------------------------------------- statistics

fn statistics() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut cases = 0;
    for n in 1..=12 {
        for trial in 0..30 {
            let span = if trial % 2 == 0 { 4 } else { 1000 };
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let v = rng.random_range(1..=span) as f64;
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            // plain enumeration of all 2^n sign patterns
            let ranks = oracle_ranks(&diffs.iter().map(|v| v.abs()).collect::<Vec<_>>());
            let obs: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
            let (mut le, mut ge) = (0u64, 0u64);
            for mask in 0u64..(1 << n) {
                let v: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
                le += (v <= obs + 1e-9) as u64;
                ge += (v >= obs - 1e-9) as u64;
            }
            let brute = (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0);
            let got = wilcoxon_diffs(&diffs, WilcoxonMode::Exact).map_err(|e| e.to_string())?.p;
            ensure!((got - brute).abs() < 1e-12, "n={n} {diffs:?}: {got} vs {brute}");
            cases += 1;
        }
    }

    let z = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<Vec<f64>> = (0..4000)
        .map(|_| {
            let (a, b): (f64, f64) = (z.sample(&mut rng), z.sample(&mut rng));
            vec![3.0 * a + 1.0, 0.5 * (0.9 * a + (1.0f64 - 0.81).sqrt() * b) - 2.0]
        })
        .collect();
    let p = pca(&data, None, Standardize::ZScore).map_err(|e| e.to_string())?;
    let evr: f64 = p.explained_variance_ratio.iter().sum();
    ensure!((evr - 1.0).abs() <= 1e-9, "explained variance sums to {evr}");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let cos = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    let c1 = cos(&p.components[0], &[s, s]).abs();
    let c2 = cos(&p.components[1], &[s, -s]).abs();
    ensure!(c1 > 0.99 && c2 > 0.99, "planted eigenvectors cos {c1:.4} {c2:.4}");

    let mut worst_comm: f64 = 0.0;
    for _ in 0..20 {
        let l = random_loadings(&mut rng, 15, 4);
        for normalize in [false, true] {
            let (rot, _, _) = varimax(&l, normalize, 1e-6, 500);
            for i in 0..15 {
                let a: f64 = l.row(i).iter().map(|v| v * v).sum();
                let b: f64 = rot.row(i).iter().map(|v| v * v).sum();
                worst_comm = worst_comm.max((a - b).abs());
            }
        }
    }
    ensure!(worst_comm < 1e-8, "varimax communality drift {worst_comm:.2e}");

    let labels: Vec<String> = (0..12).map(|i| format!("v{i}")).collect();
    let rows: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            let f: Vec<f64> = (0..3).map(|_| z.sample(&mut rng)).collect();
            (0..12).map(|v| 0.95 * f[v / 4] + (1.0f64 - 0.9025).sqrt() * z.sample(&mut rng)).collect()
        })
        .collect();
    let fa = factor_analysis(&rows, &labels, &FaOptions::default()).map_err(|e| e.to_string())?;
    ensure!(fa.k == 3, "factor analysis k = {}", fa.k);
    let mut min_block: f64 = 1.0;
    let mut factor_of_block = [usize::MAX; 3];
    for v in 0..12 {
        let (best, val) = (0..3)
            .map(|j| (j, fa.loadings.get(v, j).unwrap_or(0.0).abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        min_block = min_block.min(val);
        let slot = &mut factor_of_block[v / 4];
        if *slot == usize::MAX {
            *slot = best;
        }
        ensure!(*slot == best, "v{v} loads on factor {best}, its block on {slot}");
    }
    ensure!(min_block > 0.9, "weakest block loading {min_block:.3}");
    ensure!(factor_of_block.iter().collect::<BTreeSet<_>>().len() == 3, "blocks share a factor");

    let set = |t: &[&str]| t.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let mut sets = vec![set(&["a", "b"]); 4];
    sets.extend(vec![set(&["c", "d"]); 3]);
    let g = cooccurrence_graph(&sets, 4);
    ensure!(
        g.edges.len() == 1 && g.edges[0].weight == 4 && g.edges[0].a == "a" && g.edges[0].b == "b",
        "boundary edges {:?}",
        g.edges
    );
    let g3 = cooccurrence_graph(&sets, 3);
    ensure!(g3.edges.len() == 2, "threshold 3 keeps {} edges", g3.edges.len());
    Ok(format!(
        "{cases} exact Wilcoxon cases equal enumeration; PCA sum err {:.1e}, cos {c1:.4}/{c2:.4}; varimax drift {worst_comm:.1e}; FA k=3 min loading {min_block:.3}; pruning at 4 exact",
        (evr - 1.0).abs()
    ))
}

fn random_loadings(rng: &mut ChaCha8Rng, r: usize, c: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(r, c, |_, _| rng.random_range(-0.9..0.9))
}

// ---------------------------------------------------------------- prediction

fn end_to_end_prediction() -> Result<String, String> {
    let w = world(30, 1.0, 2024);
    let r = run_pipeline(&w, &PipelineParams::default(), 7).map_err(|e| e.to_string())?;
    let m = |c| r.mean(c);
    let (mat, clo, sel, wor, ran) = (
        m(Condition::Matched),
        m(Condition::Closest),
        m(Condition::Selected),
        m(Condition::Worst),
        m(Condition::Random),
    );
    let middle = [clo, sel].into_iter().filter(|&x| mat > x && x > wor).fold(f64::NAN, f64::max);
    ensure!(!middle.is_nan(), "ordering: matched {mat:.2} closest {clo:.2} selected {sel:.2} worst {wor:.2}");
    let f = |c: Condition| -> Vec<f64> { r.ratings[&c].iter().map(|&x| x as f64).collect() };
    let rw = wilcoxon_signed_rank(&f(Condition::Random), &f(Condition::Worst), WilcoxonMode::Auto).map_err(|e| e.to_string())?;
    ensure!(ran <= wor || rw.p >= 0.01, "random {ran:.2} above worst {wor:.2} (p {:.3})", rw.p);
    ensure!(mat - ran > 0.5, "matched - random = {:.3}", mat - ran);
    ensure!(r.matched_vs_random.p < 0.01, "matched vs random p {}", r.matched_vs_random.p);
    Ok(format!(
        "means matched {mat:.2} closest {clo:.2} selected {sel:.2} worst {wor:.2} random {ran:.2}; matched-random {:.2}, p {:.1e}",
        mat - ran,
        r.matched_vs_random.p
    ))
}

// ---------------------------------------------------------------- orchestrator

fn orchestrator() -> Result<String, String> {
    let e = |x: robovoice_server::ApiError| x.to_string();
    let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    let opts = StoreOptions {
        snapshot_every: 64,
        ..StoreOptions::in_dir(dir.path())
    };
    let store = Store::new(opts.clone(), Arc::new(SystemClock), Arc::new(StubBackend)).map_err(e)?;
    let cfg = StudyConfig {
        world: WorldParams {
            n_stimuli: 10,
            ..WorldParams::default()
        },
        max_iterations: 8,
        raters_per_node: 3,
        ratings_per_cell: 3,
        raters_per_item: 2,
        ..StudyConfig::default()
    };
    run_study(&store, &cfg).map_err(e)?;
    let ids = store.ids();
    let hashes: Vec<_> = ids.iter().map(|id| store.snapshot_hash(id)).collect::<Result<_, _>>().map_err(e)?;
    let mut commands = 0;
    for (id, h) in ids.iter().zip(&hashes) {
        let log = store.export(id).map_err(e)?;
        commands += log.lines().count() - 1;
        ensure!(replay_log(&log).map_err(e)?.hash() == h.1, "{id}: replay hash differs");
        let other = Store::in_memory();
        other.import(&log).map_err(e)?;
        ensure!(&other.snapshot_hash(id).map_err(e)? == h, "{id}: import hash differs");
    }
    drop(store);
    let reopened = Store::new(opts, Arc::new(SystemClock), Arc::new(StubBackend)).map_err(e)?;
    for (id, h) in ids.iter().zip(&hashes) {
        ensure!(&reopened.snapshot_hash(id).map_err(e)? == h, "{id}: restart hash differs");
    }

    // 100 clients race for one open slot over TCP
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(8).enable_all().build().map_err(|x| x.to_string())?;
    let (winners, losers) = rt.block_on(async {
        let store = Arc::new(Store::in_memory());
        let id = store
            .create(serde_json::from_value(json!({"kind": "gsp", "stimuli": [{"id": "r1"}], "gsp": {"raters_per_node": 1}})).unwrap())
            .unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router(store)).await.unwrap() });
        let client = reqwest::Client::new();
        let barrier = Arc::new(tokio::sync::Barrier::new(100));
        let tasks: Vec<_> = (0..100)
            .map(|i| {
                let (client, barrier, id) = (client.clone(), barrier.clone(), id.clone());
                tokio::spawn(async move {
                    barrier.wait().await;
                    let r = client
                        .get(format!("http://{addr}/v1/experiments/{id}/next-trial?participant=p{i}"))
                        .send()
                        .await
                        .unwrap();
                    r.status().as_u16()
                })
            })
            .collect();
        let mut codes = Vec::new();
        for t in tasks {
            codes.push(t.await.unwrap());
        }
        (codes.iter().filter(|&&c| c == 200).count(), codes.iter().filter(|&&c| c == 409).count())
    });
    ensure!(winners == 1 && losers == 99, "{winners} claims succeeded, {losers} got 409");

    let job = RenderJob {
        config: VoiceConfig {
            effect_id: 2,
            effect_amount: 0.7,
            speed: 1.1,
            ..VoiceConfig::default()
        },
        text: "The boy was there when the sun rose.".into(),
        profile: EffectProfile::standard(),
        sample_rate: 16_000,
    };
    let fresh = job.render(&StubBackend).map_err(e)?;
    let cache_dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    let cache = RenderCache::new(Some(cache_dir.path().to_path_buf()), Arc::new(StubBackend)).map_err(|x| x.to_string())?;
    let key = cache.register(job.clone());
    ensure!(key == job.key(), "registration changed the key");
    let first = cache.get(&key).map_err(e)?.ok_or("cache miss")?;
    let cold = RenderCache::new(Some(cache_dir.path().to_path_buf()), Arc::new(StubBackend)).map_err(|x| x.to_string())?;
    let second = cold.get(&key).map_err(e)?.ok_or("disk miss")?;
    ensure!(first.as_slice() == fresh.as_slice() && second.as_slice() == fresh.as_slice(), "cached audio differs");
    Ok(format!(
        "{} experiments / {commands} commands replay, import and restart hash-equal; 1 of 100 racing claims won; cache key {}.. stable",
        ids.len(),
        &key[..12]
    ))
}

fn main() {
    let checks: [(&str, Check, Option<Duration>); 8] = [
        ("dsp analytic checks", dsp_analytic, Some(Duration::from_secs(30))),
        ("effect-bound enforcement", effect_bounds, Some(Duration::from_secs(120))),
        ("gsp convergence", gsp_convergence, Some(Duration::from_secs(300))),
        ("median vs single rater", median_benefit, None),
        ("step-tag protocol", step_tag, None),
        ("statistics oracles", statistics, None),
        ("end-to-end prediction ordering", end_to_end_prediction, Some(Duration::from_secs(600))),
        ("orchestrator", orchestrator, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let total = Instant::now();
    for (name, check, limit) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let out = match (out, limit) {
            (Ok(_), Some(l)) if took > l => Err(format!("took {took:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        failed += out.is_err() as usize;
        println!("{tag}  {name:<32} {:>8.2}s  {detail}", took.as_secs_f64());
    }
    println!("acceptance: {} failed, total {:.1}s", failed, total.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
