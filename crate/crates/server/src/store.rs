//! Append-only JSON-lines event log per experiment, periodic snapshots and
//! replay. Each experiment sits behind its own mutex: every mutation is
//! applied to a copy, appended to the log, and only then made visible.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use robovoice::dsp::{StubBackend, SynthBackend};
use robovoice::hitl::TrialId;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::engine::{Command, Engine, Reply};
use crate::error::{ApiError, ApiResult};
use crate::manifest::{ExperimentKind, Manifest};
use crate::prediction::{build_setup, PredictionSetup};
use crate::render::RenderCache;

pub const STORE_ENV: &str = "ROBOVOICE_STORE";
const IDEMPOTENCY_KEYS: usize = 4096;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Settable clock for tests and simulations.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(ms: u64) -> Self {
        Self(AtomicU64::new(ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub id: String,
    pub kind: ExperimentKind,
    pub manifest: Manifest,
    pub created_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<PredictionSetup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub meta: ExperimentMeta,
    pub engine: Engine,
    /// Sequence number of the last applied log event.
    pub seq: u64,
}

impl ExperimentState {
    /// sha256 of the canonical JSON of the state. All maps are ordered, so
    /// equal states hash equal.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("state serializes")))
    }

    pub fn is_complete(&self) -> bool {
        self.engine.is_complete(&self.meta.manifest)
    }

    pub fn status(&self) -> &'static str {
        if self.is_complete() {
            "complete"
        } else {
            "active"
        }
    }

    pub fn summary(&self) -> Value {
        json!({
            "id": self.meta.id,
            "kind": self.meta.kind,
            "status": self.status(),
            "seq": self.seq,
            "created_at_ms": self.meta.created_at_ms,
            "progress": self.engine.progress(&self.meta.manifest),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    Create {
        seq: u64,
        at_ms: u64,
        meta: ExperimentMeta,
    },
    Command {
        seq: u64,
        at_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
        command: Command,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    state: ExperimentState,
    idempotency: BTreeMap<String, (u64, Value)>,
}

/// Public trial id: `{experiment}-t{n}`.
pub fn trial_ref(experiment: &str, trial: TrialId) -> String {
    format!("{experiment}-t{trial}")
}

pub fn parse_trial_ref(s: &str) -> ApiResult<(String, TrialId)> {
    let (exp, n) = s
        .rsplit_once("-t")
        .ok_or_else(|| ApiError::NotFound(format!("unknown trial {s:?}")))?;
    let n = n.parse().map_err(|_| ApiError::NotFound(format!("unknown trial {s:?}")))?;
    Ok((exp.to_string(), n))
}

fn respond_body(state: &ExperimentState, trial: &str, reply: &Reply) -> Value {
    json!({
        "trial_id": trial,
        "experiment": state.meta.id,
        "recorded": true,
        "outcome": reply.to_json(),
        "status": state.status(),
        "progress": state.engine.progress(&state.meta.manifest),
    })
}

struct Hosted {
    state: ExperimentState,
    lines: Vec<String>,
    log: Option<File>,
    /// Bytes of complete lines in the log file.
    log_len: u64,
    dir: Option<PathBuf>,
    idempotency: BTreeMap<String, (u64, Value)>,
    since_snapshot: u64,
}

fn remember(map: &mut BTreeMap<String, (u64, Value)>, key: String, seq: u64, body: Value) {
    map.insert(key, (seq, body));
    if map.len() > IDEMPOTENCY_KEYS {
        let oldest = map.iter().min_by_key(|(_, v)| v.0).map(|(k, _)| k.clone()).expect("non-empty");
        map.remove(&oldest);
    }
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// Directory for logs, snapshots and rendered audio; `None` keeps
    /// everything in memory.
    pub root: Option<PathBuf>,
    /// Base directory for manifest image paths.
    pub assets: Option<PathBuf>,
    /// Commands between snapshots.
    pub snapshot_every: u64,
    /// fsync every appended line.
    pub fsync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            root: None,
            assets: None,
            snapshot_every: 200,
            fsync: true,
        }
    }
}

impl StoreOptions {
    pub fn in_dir(root: impl Into<PathBuf>) -> Self {
        Self {
            root: Some(root.into()),
            ..Self::default()
        }
    }
}

/// Outcome of a next-trial call.
pub struct IssuedTrial {
    pub trial_id: String,
    pub participant: String,
    pub reply: Reply,
    pub manifest: Manifest,
    pub experiment: String,
}

pub struct Store {
    opts: StoreOptions,
    clock: Arc<dyn Clock>,
    experiments: RwLock<BTreeMap<String, Arc<Mutex<Hosted>>>>,
    create_lock: Mutex<()>,
    pub cache: RenderCache,
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

/// Complete lines of a log file. A trailing line without its newline is a
/// torn write; it is cut off the file and ignored.
fn read_log(path: &Path) -> ApiResult<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    if complete < text.len() {
        tracing::warn!(path = %path.display(), "dropping partial trailing log line");
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    Ok(text[..complete].lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
}

/// Rebuild an experiment from its log lines, optionally starting from a
/// snapshot. Returns the state and the idempotency replies.
fn replay(lines: &[String], snapshot: Option<Snapshot>) -> ApiResult<(ExperimentState, BTreeMap<String, (u64, Value)>)> {
    let mut events = lines.iter().map(|l| serde_json::from_str::<LogEvent>(l).map_err(internal));
    let first = events.next().ok_or_else(|| internal("empty log"))??;
    let LogEvent::Create { seq: 0, meta, .. } = first else {
        return Err(internal("log does not start with a create event"));
    };
    let (mut state, mut idem) = match snapshot {
        Some(s) if s.state.meta == meta => (s.state, s.idempotency),
        _ => (
            ExperimentState {
                engine: Engine::create(&meta.manifest, meta.setup.as_ref())?,
                meta,
                seq: 0,
            },
            BTreeMap::new(),
        ),
    };
    for ev in events {
        let LogEvent::Command {
            seq,
            idempotency_key,
            command,
            ..
        } = ev?
        else {
            return Err(internal("second create event in log"));
        };
        if seq <= state.seq {
            continue;
        }
        if seq != state.seq + 1 {
            return Err(internal(format!("log gap: expected seq {}, found {seq}", state.seq + 1)));
        }
        let reply = state
            .engine
            .apply(&command)
            .map_err(|e| internal(format!("event {seq} does not replay: {e}")))?;
        state.seq = seq;
        if let (Some(k), Some(t)) = (idempotency_key, response_trial(&command)) {
            let body = respond_body(&state, &trial_ref(&state.meta.id, t), &reply);
            remember(&mut idem, k, seq, body);
        }
    }
    Ok((state, idem))
}

/// State reconstructed from an exported log.
pub fn replay_log(log: &str) -> ApiResult<ExperimentState> {
    let lines: Vec<String> = log.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
    Ok(replay(&lines, None)?.0)
}

fn response_trial(cmd: &Command) -> Option<TrialId> {
    use robovoice::hitl::{DenseCommand, GspCommand, StepCommand, ValidationCommand};
    match cmd {
        Command::Gsp(GspCommand::Respond { trial, .. })
        | Command::Step(StepCommand::Submit { trial, .. })
        | Command::Dense(DenseCommand::Submit { trial, .. })
        | Command::Validation(ValidationCommand::Respond { trial, .. }) => Some(*trial),
        _ => None,
    }
}

impl Store {
    pub fn new(opts: StoreOptions, clock: Arc<dyn Clock>, backend: Arc<dyn SynthBackend>) -> ApiResult<Self> {
        let cache = RenderCache::new(opts.root.as_ref().map(|r| r.join("cache")), backend)?;
        let store = Self {
            opts,
            clock,
            experiments: RwLock::new(BTreeMap::new()),
            create_lock: Mutex::new(()),
            cache,
        };
        store.load()?;
        Ok(store)
    }

    /// In-memory store with the stub backend and the system clock.
    pub fn in_memory() -> Self {
        Self::new(StoreOptions::default(), Arc::new(SystemClock), Arc::new(StubBackend)).expect("no i/o")
    }

    /// Store under `root` with the stub backend and the system clock.
    pub fn open(root: impl Into<PathBuf>) -> ApiResult<Self> {
        Self::new(StoreOptions::in_dir(root), Arc::new(SystemClock), Arc::new(StubBackend))
    }

    pub fn options(&self) -> &StoreOptions {
        &self.opts
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    fn exp_dir(&self, id: &str) -> Option<PathBuf> {
        self.opts.root.as_ref().map(|r| r.join("experiments").join(id))
    }

    fn load(&self) -> ApiResult<()> {
        let Some(root) = &self.opts.root else {
            return Ok(());
        };
        let dir = root.join("experiments");
        std::fs::create_dir_all(&dir)?;
        let mut ids: Vec<String> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("events.jsonl").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();
        let mut map = self.experiments.write();
        for id in ids {
            let d = dir.join(&id);
            let lines = read_log(&d.join("events.jsonl"))?;
            if lines.is_empty() {
                continue;
            }
            let snap = std::fs::read(d.join("snapshot.json"))
                .ok()
                .and_then(|b| serde_json::from_slice::<Snapshot>(&b).ok());
            let (state, idempotency) = replay(&lines, snap)?;
            let log = OpenOptions::new().append(true).open(d.join("events.jsonl"))?;
            let log_len = log.metadata()?.len();
            map.insert(
                id,
                Arc::new(Mutex::new(Hosted {
                    state,
                    lines,
                    log: Some(log),
                    log_len,
                    dir: Some(d),
                    idempotency,
                    since_snapshot: 0,
                })),
            );
        }
        Ok(())
    }

    fn hosted(&self, id: &str) -> ApiResult<Arc<Mutex<Hosted>>> {
        self.experiments
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown experiment {id:?}")))
    }

    pub fn ids(&self) -> Vec<String> {
        self.experiments.read().keys().cloned().collect()
    }

    pub fn state(&self, id: &str) -> ApiResult<ExperimentState> {
        Ok(self.hosted(id)?.lock().state.clone())
    }

    /// Run `f` on the current state without copying it.
    pub fn with_state<T>(&self, id: &str, f: impl FnOnce(&ExperimentState) -> T) -> ApiResult<T> {
        Ok(f(&self.hosted(id)?.lock().state))
    }

    pub fn snapshot_hash(&self, id: &str) -> ApiResult<(u64, String)> {
        self.with_state(id, |s| (s.seq, s.hash()))
    }

    /// The full event log as JSON lines.
    pub fn export(&self, id: &str) -> ApiResult<String> {
        let h = self.hosted(id)?;
        let h = h.lock();
        let mut out = h.lines.join("\n");
        out.push('\n');
        Ok(out)
    }

    fn install(&self, state: ExperimentState, lines: Vec<String>, idempotency: BTreeMap<String, (u64, Value)>) -> ApiResult<()> {
        let id = state.meta.id.clone();
        let mut map = self.experiments.write();
        if map.contains_key(&id) {
            return Err(ApiError::Conflict(format!("experiment {id} already exists")));
        }
        let (log, log_len, dir) = match self.exp_dir(&id) {
            Some(d) => {
                std::fs::create_dir_all(&d)?;
                let mut f = OpenOptions::new().create_new(true).append(true).open(d.join("events.jsonl"))?;
                let mut text = lines.join("\n");
                text.push('\n');
                f.write_all(text.as_bytes())?;
                f.sync_all()?;
                (Some(f), text.len() as u64, Some(d))
            }
            None => (None, 0, None),
        };
        map.insert(
            id,
            Arc::new(Mutex::new(Hosted {
                state,
                lines,
                log,
                log_len,
                dir,
                idempotency,
                since_snapshot: 0,
            })),
        );
        Ok(())
    }

    /// Validate and launch an experiment. Returns its id.
    pub fn create(&self, manifest: Manifest) -> ApiResult<String> {
        let manifest = manifest.normalize(self.opts.assets.as_deref())?;
        let setup = match manifest.kind {
            ExperimentKind::Prediction => Some(self.resolve_prediction(&manifest)?),
            _ => None,
        };
        let _guard = self.create_lock.lock();
        let id = {
            let map = self.experiments.read();
            (map.len() + 1..)
                .map(|n| format!("exp-{n:04}"))
                .find(|id| !map.contains_key(id))
                .expect("unbounded range")
        };
        let meta = ExperimentMeta {
            id: id.clone(),
            kind: manifest.kind,
            manifest,
            created_at_ms: self.clock.now_ms(),
            setup,
        };
        let engine = Engine::create(&meta.manifest, meta.setup.as_ref())?;
        let line = serde_json::to_string(&LogEvent::Create {
            seq: 0,
            at_ms: meta.created_at_ms,
            meta: meta.clone(),
        })
        .map_err(internal)?;
        self.install(ExperimentState { meta, engine, seq: 0 }, vec![line], BTreeMap::new())?;
        tracing::info!(%id, "experiment created");
        Ok(id)
    }

    fn resolve_prediction(&self, m: &Manifest) -> ApiResult<PredictionSetup> {
        let req = m.prediction.clone().unwrap_or_default();
        let gsp = match self.state(&req.gsp_experiment)?.engine {
            Engine::Gsp(g) => g,
            _ => return Err(ApiError::BadRequest(format!("{} is not a gsp experiment", req.gsp_experiment))),
        };
        let dense = match self.state(&req.dense_experiment)?.engine {
            Engine::Dense(d) => d,
            _ => return Err(ApiError::BadRequest(format!("{} is not a dense experiment", req.dense_experiment))),
        };
        build_setup(&gsp, &dense, &m.stimulus_ids(), &m.effect_profile()?, req.n_factors, m.seed)
    }

    /// Load an exported log into this store under its original id.
    pub fn import(&self, log: &str) -> ApiResult<String> {
        let lines: Vec<String> = log.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
        let (state, idem) = replay(&lines, None).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let id = state.meta.id.clone();
        let _guard = self.create_lock.lock();
        self.install(state, lines, idem)?;
        Ok(id)
    }

    /// Apply `cmd` to a copy of the engine, append it, then swap the copy in.
    /// A failed command leaves neither state nor log changed.
    fn commit(&self, h: &mut Hosted, cmd: Command, key: Option<String>) -> ApiResult<Reply> {
        let mut engine = h.state.engine.clone();
        let reply = engine.apply(&cmd)?;
        let seq = h.state.seq + 1;
        let line = serde_json::to_string(&LogEvent::Command {
            seq,
            at_ms: self.clock.now_ms(),
            idempotency_key: key,
            command: cmd,
        })
        .map_err(internal)?;
        if let Some(f) = h.log.as_mut() {
            let mut buf = line.clone().into_bytes();
            buf.push(b'\n');
            let written = f.write_all(&buf).and_then(|_| if self.opts.fsync { f.sync_data() } else { Ok(()) });
            if let Err(e) = written {
                // cut any torn tail so the next append starts on a line boundary
                let _ = f.set_len(h.log_len);
                return Err(e.into());
            }
            h.log_len += buf.len() as u64;
        }
        h.state.engine = engine;
        h.state.seq = seq;
        h.lines.push(line);
        h.since_snapshot += 1;
        if h.since_snapshot >= self.opts.snapshot_every {
            self.write_snapshot(h)?;
        }
        Ok(reply)
    }

    fn write_snapshot(&self, h: &mut Hosted) -> ApiResult<()> {
        h.since_snapshot = 0;
        let Some(d) = &h.dir else {
            return Ok(());
        };
        let snap = Snapshot {
            state: h.state.clone(),
            idempotency: h.idempotency.clone(),
        };
        let tmp = d.join("snapshot.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&snap).map_err(internal)?)?;
        std::fs::rename(tmp, d.join("snapshot.json"))?;
        Ok(())
    }

    /// Claim the next trial for `participant`. 410 once complete, 409 when
    /// nothing is open.
    pub fn next_trial(&self, id: &str, participant: &str) -> ApiResult<IssuedTrial> {
        let participant = participant.trim();
        if participant.is_empty() || participant.len() > 200 {
            return Err(ApiError::BadRequest("participant must be 1..=200 characters".into()));
        }
        let hosted = self.hosted(id)?;
        let mut h = hosted.lock();
        if h.state.is_complete() {
            return Err(ApiError::Gone(format!("experiment {id} is complete")));
        }
        let cmd = h.state.engine.next_trial_command(participant, self.clock.now_ms());
        let reply = self.commit(&mut h, cmd, None)?;
        let trial = match &reply {
            Reply::Gsp(robovoice::hitl::gsp::GspReply::Trial(t)) => t.trial_id,
            Reply::Step(robovoice::hitl::step::StepReply::Trial(t)) => t.trial_id,
            Reply::Dense(robovoice::hitl::dense::DenseReply::Trial(t)) => t.trial_id,
            Reply::Validation(robovoice::hitl::validation::ValidationReply::Trial(t)) => t.trial_id,
            _ => return Err(internal("next-trial produced no trial")),
        };
        Ok(IssuedTrial {
            trial_id: trial_ref(id, trial),
            participant: participant.to_string(),
            reply,
            manifest: h.state.meta.manifest.clone(),
            experiment: id.to_string(),
        })
    }

    /// Record a response. With an idempotency key, a repeated request gets
    /// the first reply back instead of a 409.
    pub fn respond(&self, trial_id: &str, body: &Value, key: Option<&str>) -> ApiResult<Value> {
        let (id, trial) = parse_trial_ref(trial_id)?;
        let hosted = self.hosted(&id).map_err(|_| ApiError::NotFound(format!("unknown trial {trial_id:?}")))?;
        let mut h = hosted.lock();
        if let Some(k) = key {
            if let Some((_, body)) = h.idempotency.get(k) {
                return Ok(body.clone());
            }
        }
        let cmd = h.state.engine.response_command(trial, body)?;
        let reply = self.commit(&mut h, cmd, key.map(str::to_string))?;
        let out = respond_body(&h.state, trial_id, &reply);
        if let Some(k) = key {
            let seq = h.state.seq;
            remember(&mut h.idempotency, k.to_string(), seq, out.clone());
        }
        Ok(out)
    }

    /// Force a snapshot of every experiment (e.g. on shutdown).
    pub fn snapshot_all(&self) -> ApiResult<()> {
        for h in self.experiments.read().values() {
            self.write_snapshot(&mut h.lock())?;
        }
        Ok(())
    }
}
