//! Lazily rendered, content-addressed WAV stimuli.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::Mutex;
use robovoice::dsp::{render_voice, SynthBackend};
use robovoice::{EffectProfile, VoiceConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ApiResult};

const RENDER_VERSION: &str = "robovoice-render-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub config: VoiceConfig,
    pub text: String,
    pub profile: EffectProfile,
    pub sample_rate: u32,
}

impl RenderJob {
    fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(RENDER_VERSION.as_bytes());
        h.update(serde_json::to_vec(self).expect("job serializes"));
        h.finalize().into()
    }

    /// Hex sha256 of the job; the `{hash}` in `/v1/stimuli/{hash}.wav`.
    pub fn key(&self) -> String {
        hex::encode(self.digest())
    }

    /// Seed for the stochastic effects, fixed by the job content.
    pub fn seed(&self) -> u64 {
        let d = self.digest();
        u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
    }

    pub fn render(&self, backend: &dyn SynthBackend) -> ApiResult<Vec<u8>> {
        let audio = render_voice(backend, &self.config, &self.text, &self.profile, self.sample_rate, self.seed())?;
        Ok(audio.to_wav_bytes()?)
    }
}

struct Entry {
    job: Option<RenderJob>,
    bytes: Option<Arc<Vec<u8>>>,
}

/// Jobs are registered when a trial payload is built and rendered on first
/// request. With a directory the bytes live on disk; otherwise in memory.
pub struct RenderCache {
    dir: Option<PathBuf>,
    backend: Arc<dyn SynthBackend>,
    entries: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl RenderCache {
    pub fn new(dir: Option<PathBuf>, backend: Arc<dyn SynthBackend>) -> std::io::Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir,
            backend,
            entries: Mutex::new(HashMap::new()),
        })
    }

    pub fn backend(&self) -> &dyn SynthBackend {
        self.backend.as_ref()
    }

    pub fn register(&self, job: RenderJob) -> String {
        let key = job.key();
        let mut map = self.entries.lock();
        let e = map.entry(key.clone()).or_insert_with(|| {
            Arc::new(Mutex::new(Entry {
                job: None,
                bytes: None,
            }))
        });
        let mut e = e.lock();
        if e.job.is_none() {
            e.job = Some(job);
        }
        key
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.wav")))
    }

    /// WAV bytes for `key`, rendering on a miss. `None` when the key was
    /// never registered and is not on disk.
    pub fn get(&self, key: &str) -> ApiResult<Option<Arc<Vec<u8>>>> {
        if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Ok(None);
        }
        if let Some(p) = self.path(key) {
            if p.is_file() {
                return Ok(Some(Arc::new(std::fs::read(p)?)));
            }
        }
        let Some(entry) = self.entries.lock().get(key).cloned() else {
            return Ok(None);
        };
        // per-key lock: concurrent requests for one variant render it once
        let mut e = entry.lock();
        if let Some(b) = &e.bytes {
            return Ok(Some(b.clone()));
        }
        let job = e.job.as_ref().ok_or_else(|| ApiError::Internal("render job missing".into()))?;
        let bytes = Arc::new(job.render(self.backend.as_ref())?);
        match self.path(key) {
            Some(p) => {
                let tmp = p.with_extension(format!("wav.tmp-{}", std::process::id()));
                std::fs::write(&tmp, bytes.as_slice())?;
                std::fs::rename(&tmp, &p)?;
            }
            None => e.bytes = Some(bytes.clone()),
        }
        Ok(Some(bytes))
    }
}
