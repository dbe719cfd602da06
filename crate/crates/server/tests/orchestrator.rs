use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;

use proptest::prelude::*;
use robovoice::dsp::StubBackend;
use robovoice::sim::{OracleWorld, WorldParams};
use robovoice::{EffectProfile, VoiceConfig};
use robovoice_server::agents::{gsp_manifest, run_gsp_agents, run_study, StudyConfig};
use robovoice_server::{replay_log, router, Manifest, RenderCache, RenderJob, Store, StoreOptions, SystemClock};
use serde_json::{json, Value};

fn small_world(n: usize) -> OracleWorld {
    OracleWorld::new(
        WorldParams {
            n_stimuli: n,
            ..WorldParams::default()
        },
        5,
    )
}

async fn spawn(store: Arc<Store>) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(store)).await.unwrap() });
    addr
}

fn one_slot(kind: &str) -> Manifest {
    let v = match kind {
        "gsp" => json!({"kind": "gsp", "stimuli": [{"id": "r1"}], "gsp": {"raters_per_node": 1, "max_iterations": 3}}),
        "step" => json!({"kind": "step", "stimuli": [{"id": "r1"}], "step": {"participants_per_stimulus": 2}}),
        _ => json!({
            "kind": "validation",
            "stimuli": [{"id": "r1"}],
            "validation": {"items": [{"stimulus_id": "r1", "condition": "matched", "config": VoiceConfig::default()}], "raters_per_item": 1},
        }),
    };
    serde_json::from_value(v).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn hundred_racing_clients_claim_one_slot_once() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let addr = spawn(store.clone()).await;
    let client = reqwest::Client::new();
    for kind in ["gsp", "step", "validation"] {
        let id = store.create(one_slot(kind)).unwrap();
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
                    let status = r.status().as_u16();
                    (status, r.json::<Value>().await.unwrap())
                })
            })
            .collect();
        let mut won = Vec::new();
        for t in tasks {
            let (status, body) = t.await.unwrap();
            match status {
                200 => won.push(body),
                409 => {}
                s => panic!("{kind}: unexpected {s}: {body}"),
            }
        }
        assert_eq!(won.len(), 1, "{kind}");
        let trial = won[0]["trial_id"].as_str().unwrap().to_string();

        // the winner's answer is recorded exactly once under racing submits
        let body = match kind {
            "gsp" => json!({"position": 3}),
            "step" => json!({"actions": [{"action": "create", "text": "shiny"}]}),
            _ => json!({"rating": 4}),
        };
        let barrier = Arc::new(tokio::sync::Barrier::new(100));
        let tasks: Vec<_> = (0..100)
            .map(|_| {
                let (client, barrier, trial, body) = (client.clone(), barrier.clone(), trial.clone(), body.clone());
                tokio::spawn(async move {
                    barrier.wait().await;
                    client
                        .post(format!("http://{addr}/v1/trials/{trial}/response"))
                        .json(&body)
                        .send()
                        .await
                        .unwrap()
                        .status()
                        .as_u16()
                })
            })
            .collect();
        let mut codes = Vec::new();
        for t in tasks {
            codes.push(t.await.unwrap());
        }
        assert_eq!(codes.iter().filter(|&&c| c == 200).count(), 1, "{kind}: {codes:?}");
        assert!(codes.iter().all(|&c| c == 200 || c == 409), "{kind}: {codes:?}");
        // 1 create + 1 claim + 1 response; the 99 losers and 99 duplicates were never logged
        assert_eq!(store.export(&id).unwrap().lines().count(), 3, "{kind}");
        assert_eq!(store.snapshot_hash(&id).unwrap().0, 2);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn racing_idempotent_submits_share_one_reply() {
    let store = Arc::new(Store::in_memory());
    let addr = spawn(store.clone()).await;
    let id = store.create(one_slot("gsp")).unwrap();
    let t = store.next_trial(&id, "p").unwrap();
    let client = reqwest::Client::new();
    let tasks: Vec<_> = (0..50)
        .map(|_| {
            let (client, trial) = (client.clone(), t.trial_id.clone());
            tokio::spawn(async move {
                let r = client
                    .post(format!("http://{addr}/v1/trials/{trial}/response"))
                    .header("Idempotency-Key", "same")
                    .json(&json!({"position": 9}))
                    .send()
                    .await
                    .unwrap();
                (r.status().as_u16(), r.json::<Value>().await.unwrap())
            })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        let (s, b) = t.await.unwrap();
        assert_eq!(s, 200);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(store.snapshot_hash(&id).unwrap().0, 2);
}

#[test]
fn replay_restart_and_import_are_hash_equal() {
    let dir = tempfile::tempdir().unwrap();
    let opts = StoreOptions {
        snapshot_every: 50,
        ..StoreOptions::in_dir(dir.path())
    };
    let store = Store::new(opts.clone(), Arc::new(SystemClock), Arc::new(StubBackend)).unwrap();
    let cfg = StudyConfig {
        world: WorldParams {
            n_stimuli: 8,
            ..WorldParams::default()
        },
        max_iterations: 6,
        raters_per_node: 3,
        ratings_per_cell: 2,
        raters_per_item: 1,
        ..StudyConfig::default()
    };
    run_study(&store, &cfg).unwrap();
    let ids = store.ids();
    assert_eq!(ids.len(), 3);
    let hashes: Vec<(u64, String)> = ids.iter().map(|id| store.snapshot_hash(id).unwrap()).collect();
    for (id, h) in ids.iter().zip(&hashes) {
        assert!(dir.path().join("experiments").join(id).join("snapshot.json").is_file() || h.0 < 50);
        // exported log replays to the same state
        let log = store.export(id).unwrap();
        assert_eq!(replay_log(&log).unwrap().hash(), h.1);
        let other = Store::in_memory();
        other.import(&log).unwrap();
        assert_eq!(&other.snapshot_hash(id).unwrap(), h);
    }
    drop(store);

    // restart from disk, with and without snapshots
    let reopened = Store::new(opts.clone(), Arc::new(SystemClock), Arc::new(StubBackend)).unwrap();
    let again: Vec<_> = ids.iter().map(|id| reopened.snapshot_hash(id).unwrap()).collect();
    assert_eq!(again, hashes);
    drop(reopened);
    for id in &ids {
        let _ = std::fs::remove_file(dir.path().join("experiments").join(id).join("snapshot.json"));
    }
    let cold = Store::new(opts, Arc::new(SystemClock), Arc::new(StubBackend)).unwrap();
    let again: Vec<_> = ids.iter().map(|id| cold.snapshot_hash(id).unwrap()).collect();
    assert_eq!(again, hashes);
}

#[test]
fn torn_tail_is_dropped_and_log_continues() {
    let dir = tempfile::tempdir().unwrap();
    let world = small_world(3);
    let id = {
        let store = Store::open(dir.path()).unwrap();
        let id = store.create(gsp_manifest(&world, 2, 3, 1)).unwrap();
        for p in ["a", "b"] {
            let t = store.next_trial(&id, p).unwrap();
            store.respond(&t.trial_id, &json!({"position": 5}), None).unwrap();
        }
        id
    };
    let log_path = dir.path().join("experiments").join(&id).join("events.jsonl");
    let clean_len = std::fs::metadata(&log_path).unwrap().len();
    let before = Store::open(dir.path()).unwrap().snapshot_hash(&id).unwrap();
    std::fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .unwrap()
        .write_all(br#"{"command":{"seq":6,"at_ms":1,"comm"#)
        .unwrap();

    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.snapshot_hash(&id).unwrap(), before);
    assert_eq!(std::fs::metadata(&log_path).unwrap().len(), clean_len);
    let t = store.next_trial(&id, "c").unwrap();
    store.respond(&t.trial_id, &json!({"position": 6}), None).unwrap();
    let after = store.snapshot_hash(&id).unwrap();
    drop(store);
    assert_eq!(Store::open(dir.path()).unwrap().snapshot_hash(&id).unwrap(), after);
    assert_eq!(after.0, before.0 + 2);
}

#[test]
fn stale_or_corrupt_snapshot_falls_back_to_log() {
    let dir = tempfile::tempdir().unwrap();
    let world = small_world(4);
    let opts = StoreOptions {
        snapshot_every: 3,
        ..StoreOptions::in_dir(dir.path())
    };
    let store = Store::new(opts.clone(), Arc::new(SystemClock), Arc::new(StubBackend)).unwrap();
    let id = store.create(gsp_manifest(&world, 2, 4, 9)).unwrap();
    run_gsp_agents(&store, &id, &world, 2).unwrap();
    let want = store.snapshot_hash(&id).unwrap();
    drop(store);
    let snap = dir.path().join("experiments").join(&id).join("snapshot.json");
    std::fs::write(&snap, b"{ torn").unwrap();
    let s = Store::new(opts, Arc::new(SystemClock), Arc::new(StubBackend)).unwrap();
    assert_eq!(s.snapshot_hash(&id).unwrap(), want);
}

#[test]
fn idempotency_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let world = small_world(2);
    let store = Store::open(dir.path()).unwrap();
    let id = store.create(gsp_manifest(&world, 2, 2, 1)).unwrap();
    let t = store.next_trial(&id, "a").unwrap();
    let first = store.respond(&t.trial_id, &json!({"position": 1}), Some("key-a")).unwrap();
    drop(store);
    let store = Store::open(dir.path()).unwrap();
    let seq = store.snapshot_hash(&id).unwrap().0;
    assert_eq!(store.respond(&t.trial_id, &json!({"position": 1}), Some("key-a")).unwrap(), first);
    assert_eq!(store.snapshot_hash(&id).unwrap().0, seq);
}

#[test]
fn audio_cache_is_hash_stable() {
    let dir = tempfile::tempdir().unwrap();
    let job = RenderJob {
        config: VoiceConfig {
            speed: 1.2,
            effect_id: 4,
            effect_amount: 0.6,
            ..VoiceConfig::default()
        },
        text: "The birch canoe slid on the smooth planks.".into(),
        profile: EffectProfile::standard(),
        sample_rate: 16_000,
    };
    let key = job.key();
    assert_eq!(key.len(), 64);
    assert_eq!(key, job.clone().key());
    let fresh = job.render(&StubBackend).unwrap();
    assert_eq!(fresh, job.render(&StubBackend).unwrap());

    let cache = RenderCache::new(Some(dir.path().to_path_buf()), Arc::new(StubBackend)).unwrap();
    assert_eq!(cache.register(job.clone()), key);
    let a = cache.get(&key).unwrap().unwrap();
    assert_eq!(a.as_slice(), fresh.as_slice());
    let file = dir.path().join(format!("{key}.wav"));
    assert_eq!(std::fs::read(&file).unwrap(), fresh);

    // a new cache on the same directory serves the file without a registration
    let again = RenderCache::new(Some(dir.path().to_path_buf()), Arc::new(StubBackend)).unwrap();
    assert_eq!(again.get(&key).unwrap().unwrap().as_slice(), fresh.as_slice());
    // in-memory caches agree too
    let mem = RenderCache::new(None, Arc::new(StubBackend)).unwrap();
    mem.register(job.clone());
    assert_eq!(mem.get(&key).unwrap().unwrap().as_slice(), fresh.as_slice());

    // any change to the job changes the key
    let mut other = job.clone();
    other.text.push('!');
    assert_ne!(other.key(), key);
    let mut other = job;
    other.sample_rate = 22_050;
    assert_ne!(other.key(), key);
    assert!(mem.get(&"f".repeat(64)).unwrap().is_none());
    assert!(mem.get("../../etc/passwd").unwrap().is_none());
}

#[test]
fn concurrent_cache_fetches_render_once_and_agree() {
    let cache = Arc::new(RenderCache::new(None, Arc::new(StubBackend)).unwrap());
    let job = RenderJob {
        config: VoiceConfig::default(),
        text: "Glue the sheet to the dark blue background.".into(),
        profile: EffectProfile::standard(),
        sample_rate: 16_000,
    };
    let key = cache.register(job);
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let (cache, key) = (cache.clone(), key.clone());
            std::thread::spawn(move || cache.get(&key).unwrap().unwrap())
        })
        .collect();
    let outs: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[derive(Debug, Clone)]
enum Op {
    Claim(u8),
    Answer { which: u8, position: i64 },
    Replay { which: u8 },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u8..6).prop_map(Op::Claim),
        (0u8..8, -2i64..20).prop_map(|(which, position)| Op::Answer { which, position }),
        (0u8..8).prop_map(|which| Op::Replay { which }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any interleaving of claims, valid and invalid answers and retries
    /// exports a log that replays to the live state.
    #[test]
    fn any_command_sequence_replays_exactly(ops in prop::collection::vec(op(), 1..60)) {
        let world = small_world(3);
        let store = Store::in_memory();
        let id = store.create(gsp_manifest(&world, 2, 3, 4)).unwrap();
        let mut trials: Vec<String> = Vec::new();
        for o in ops {
            match o {
                Op::Claim(p) => {
                    if let Ok(t) = store.next_trial(&id, &format!("p{p}")) {
                        trials.push(t.trial_id);
                    }
                }
                Op::Answer { which, position } if !trials.is_empty() => {
                    let t = &trials[which as usize % trials.len()];
                    let _ = store.respond(t, &json!({ "position": position }), None);
                }
                Op::Replay { which } if !trials.is_empty() => {
                    let t = &trials[which as usize % trials.len()];
                    let _ = store.respond(t, &json!({ "position": 1 }), Some(&format!("k{which}")));
                }
                _ => {}
            }
            let (seq, hash) = store.snapshot_hash(&id).unwrap();
            let log = store.export(&id).unwrap();
            prop_assert_eq!(log.lines().count() as u64, seq + 1);
            prop_assert_eq!(replay_log(&log).unwrap().hash(), hash);
        }
    }
}
