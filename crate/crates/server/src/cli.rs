//! The `robovoice` command line. Each subcommand is a plain function so
//! tests and examples can call it directly.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use robovoice::analysis::reliability::cells_from_ratings;
use robovoice::analysis::{
    cooccurrence_graph, corr_matrix, cross_modal_corr, factor_analysis, pca, predict_conditions, spearman_brown,
    split_half_reliability, FaOptions, PredictionSet, Standardize,
};
use robovoice::dsp::{StubBackend, SubprocessBackend, SynthBackend, DEFAULT_SAMPLE_RATE};
use robovoice::hitl::{profiles, Modality};
use robovoice::labels::sentence_for;
use robovoice::sim::{run_scenario, Scenario, ScenarioReport};
use robovoice::voice_space::SLIDER_COUNT;
use robovoice::{EffectProfile, VoiceConfig};
use serde_json::json;

use crate::engine::Engine;
use crate::inputs::{load_ratings, load_table, load_tag_sets, load_target, profile_table};
use crate::prediction::build_corpus;
use crate::render::RenderJob;
use crate::store::{Store, StoreOptions, SystemClock, STORE_ENV};
use crate::views::effect_label;

#[derive(Debug, Parser)]
#[command(name = "robovoice", version, about = "Robot voice design: synthesis, experiments and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Render one voice to a WAV file.
    Synth(SynthArgs),
    /// Render the 16 variants of one slider.
    Sweep(SweepArgs),
    /// Run simulated participants on an oracle world.
    Simulate(SimulateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Statistics over ratings, profiles, slider positions or tags.
    Analyze(AnalyzeArgs),
    /// Predict voices for a target profile from a stored corpus.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// External synthesis program (JSON request on stdin, WAV on stdout).
    /// The built-in stub voice is used when absent.
    #[arg(long)]
    pub backend_cmd: Option<String>,
    /// Extra arguments for the backend program.
    #[arg(long, allow_hyphen_values = true)]
    pub backend_arg: Vec<String>,
}

impl BackendArgs {
    pub fn backend(&self) -> Arc<dyn SynthBackend> {
        match &self.backend_cmd {
            Some(p) => Arc::new(SubprocessBackend {
                program: p.clone(),
                args: self.backend_arg.clone(),
            }),
            None => Arc::new(StubBackend),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// VoiceConfig JSON; the neutral voice when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Effect profile name or JSON file; defaults to the config's profile.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    pub sample_rate: u32,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Stimulus id; with --store its chain's current voice is the base.
    #[arg(long)]
    pub stimulus: String,
    /// Slider index 0..=7.
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = STORE_ENV)]
    pub store: Option<PathBuf>,
    /// GSP experiment id; the first one hosting the stimulus by default.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Base VoiceConfig JSON when no store is given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    pub sample_rate: u32,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON; every field is optional.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Store directory; in-memory when absent.
    #[arg(long, env = STORE_ENV)]
    pub store: Option<PathBuf>,
    /// Base directory for manifest image paths.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub snapshot_every: u64,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    Pca,
    Corr,
    Reliability,
    Cooccur,
    Fa,
    Crossmodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StandardizeArg {
    Zscore,
    Range,
    Center,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub analysis: Analysis,
    /// Input files: CSV tables, exports, rating records or tag maps.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long, value_enum, default_value_t = StandardizeArg::Zscore)]
    pub standardize: StandardizeArg,
    /// Factor count; eigenvalues > 1 when absent.
    #[arg(long)]
    pub factors: Option<usize>,
    /// Co-occurrence edge weight threshold.
    #[arg(long, default_value_t = 4)]
    pub threshold: usize,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Target profile JSON.
    #[arg(long)]
    pub target: PathBuf,
    /// Store directory holding a GSP and a dense experiment.
    #[arg(long, env = STORE_ENV)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gsp: Option<String>,
    #[arg(long)]
    pub dense: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn load_profile(name_or_path: &str) -> Result<EffectProfile> {
    if let Some(p) = EffectProfile::by_name(name_or_path) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(name_or_path)
        .with_context(|| format!("{name_or_path:?} is neither a profile name nor a readable file"))?;
    Ok(EffectProfile::from_json(&text)?)
}

pub fn load_config(path: &Path) -> Result<VoiceConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a VoiceConfig", path.display()))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(a: &SynthArgs) -> Result<String> {
    let config = match &a.config {
        Some(p) => load_config(p)?,
        None => VoiceConfig::default(),
    };
    let profile = load_profile(a.profile.as_deref().unwrap_or(&config.profile))?;
    let job = RenderJob {
        config,
        text: a.text.clone(),
        profile,
        sample_rate: a.sample_rate,
    };
    let bytes = job.render(a.backend.backend().as_ref())?;
    std::fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(job.key())
}

pub fn sweep(a: &SweepArgs) -> Result<Vec<serde_json::Value>> {
    if a.dim >= SLIDER_COUNT {
        bail!("--dim must be below {SLIDER_COUNT}");
    }
    let (base, text, profile, sample_rate) = match &a.store {
        Some(root) => {
            if !root.is_dir() {
                bail!("store {} does not exist", root.display());
            }
            let store = Store::open(root)?;
            let mut found = None;
            for id in store.ids() {
                if a.experiment.as_ref().is_some_and(|e| e != &id) {
                    continue;
                }
                let st = store.state(&id)?;
                if let Engine::Gsp(g) = &st.engine {
                    if let Some(c) = g.chains.iter().find(|c| c.stimulus_id == a.stimulus) {
                        let s = st.meta.manifest.stimulus(&a.stimulus).expect("stimulus in manifest");
                        found = Some((
                            c.current().base_config.clone(),
                            s.sentence.clone().unwrap_or_default(),
                            g.profile.clone(),
                            st.meta.manifest.sample_rate,
                        ));
                        break;
                    }
                }
            }
            found.ok_or_else(|| anyhow!("no gsp experiment hosts stimulus {:?}", a.stimulus))?
        }
        None => {
            let base = match &a.config {
                Some(p) => load_config(p)?,
                None => VoiceConfig::default(),
            };
            let profile = load_profile(a.profile.as_deref().unwrap_or(&base.profile))?;
            let text = a.text.clone().unwrap_or_else(|| sentence_for(0, 0).to_string());
            (base, text, profile, a.sample_rate)
        }
    };
    std::fs::create_dir_all(&a.out)?;
    let specs = profile.specs();
    let spec = specs[a.dim];
    let backend = a.backend.backend();
    let mut index = Vec::new();
    for p in 0..spec.resolution {
        let job = RenderJob {
            config: base.with_position(&specs, a.dim, p)?,
            text: text.clone(),
            profile: profile.clone(),
            sample_rate,
        };
        let file = format!("variant-{p:02}.wav");
        std::fs::write(a.out.join(&file), job.render(backend.as_ref())?)?;
        let value = if spec.is_categorical() {
            json!(effect_label(profile.slots[job.config.effect_id].kind))
        } else {
            json!(job.config.value(a.dim))
        };
        index.push(json!({ "position": p, "value": value, "hash": job.key(), "file": file, "config": job.config }));
    }
    write_json(&a.out.join("index.json"), &index)?;
    Ok(index)
}

pub fn simulate(a: &SimulateArgs) -> Result<ScenarioReport> {
    let text = std::fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let scenario: Scenario = serde_json::from_str(&text).context("scenario")?;
    let report = run_scenario(&scenario)?;
    std::fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("report.json"), &report)?;
    std::fs::write(a.out.join("gsp.csv"), report.gsp.to_csv())?;
    if let Some(p) = &report.pipeline {
        std::fs::write(a.out.join("pipeline.csv"), p.to_csv())?;
    }
    Ok(report)
}

pub async fn serve(a: &ServeArgs) -> Result<()> {
    let opts = StoreOptions {
        root: a.store.clone(),
        assets: a.assets.clone(),
        snapshot_every: a.snapshot_every.max(1),
        ..StoreOptions::default()
    };
    let store = Arc::new(Store::new(opts, Arc::new(SystemClock), a.backend.backend())?);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("--host/--port")?;
    crate::serve(store, addr).await
}

fn standardize(s: StandardizeArg) -> Standardize {
    match s {
        StandardizeArg::Zscore => Standardize::ZScore,
        StandardizeArg::Range => Standardize::Range,
        StandardizeArg::Center => Standardize::Center,
    }
}

fn modality_vectors(ratings: &[robovoice::hitl::RatingRecord], m: Modality) -> Result<BTreeMap<String, Vec<f64>>> {
    let t = profile_table(&profiles(ratings, m)?);
    Ok(t.ids.into_iter().zip(t.rows).collect())
}

/// Run one analysis and write `result.json` (plus CSVs) into `--out`.
/// Returns the JSON written.
pub fn analyze(a: &AnalyzeArgs) -> Result<serde_json::Value> {
    std::fs::create_dir_all(&a.out)?;
    let first = &a.inputs[0];
    let result = match a.analysis {
        Analysis::Pca => {
            let t = load_table(first)?;
            let p = pca(&t.rows, a.components, standardize(a.standardize))?;
            json!({ "ids": t.ids, "labels": t.labels, "pca": p })
        }
        Analysis::Corr => {
            let t = load_table(first)?;
            let c = corr_matrix(&t.rows, &t.labels)?;
            std::fs::write(a.out.join("matrix.csv"), c.ordered().to_csv())?;
            json!({ "ids": t.ids, "corr": c })
        }
        Analysis::Fa => {
            let t = load_table(first)?;
            let opts = FaOptions {
                n_factors: a.factors,
                ..FaOptions::default()
            };
            let fa = factor_analysis(&t.rows, &t.labels, &opts)?;
            std::fs::write(a.out.join("loadings.csv"), fa.loadings.to_csv())?;
            let scores: Vec<Vec<f64>> = t
                .rows
                .iter()
                .map(|r| fa.scores_for(&t.labels, r))
                .collect::<std::result::Result<_, _>>()?;
            json!({ "k": fa.k, "ids": t.ids, "scores": scores, "fa": fa })
        }
        Analysis::Reliability => {
            let ratings = load_ratings(&a.inputs)?;
            let mut out = serde_json::Map::new();
            for m in [Modality::Image, Modality::Voice] {
                let cells = cells_from_ratings(&ratings, m);
                if cells.iter().all(|c| c.is_empty()) {
                    continue;
                }
                let r = split_half_reliability(&cells, a.splits, a.seed)?;
                let name = serde_json::to_value(m)?.as_str().unwrap_or_default().to_string();
                out.insert(name, json!({ "split_half": r, "spearman_brown": spearman_brown(r, 2.0) }));
            }
            if out.is_empty() {
                bail!("no ratings found");
            }
            serde_json::Value::Object(out)
        }
        Analysis::Cooccur => {
            let sets = load_tag_sets(first)?;
            let g = cooccurrence_graph(&sets.values().cloned().collect::<Vec<_>>(), a.threshold);
            std::fs::write(a.out.join("edges.csv"), g.edges_csv())?;
            std::fs::write(a.out.join("nodes.csv"), g.nodes_csv())?;
            json!({ "graph": g })
        }
        Analysis::Crossmodal => {
            let ratings = load_ratings(&a.inputs)?;
            let mut img = modality_vectors(&ratings, Modality::Image)?;
            let mut voc = modality_vectors(&ratings, Modality::Voice)?;
            img.retain(|k, _| voc.contains_key(k));
            voc.retain(|k, _| img.contains_key(k));
            let dims: Vec<String> = robovoice::labels::DENSE_DIMENSIONS.iter().map(|s| s.to_string()).collect();
            let c = cross_modal_corr(&img, &voc, &dims)?;
            std::fs::write(a.out.join("matrix.csv"), c.matrix.to_csv())?;
            json!({ "stimuli": img.keys().collect::<Vec<_>>(), "crossmodal": c })
        }
    };
    write_json(&a.out.join("result.json"), &result)?;
    Ok(result)
}

pub fn predict(a: &PredictArgs) -> Result<PredictionSet> {
    if !a.corpus.is_dir() {
        bail!("corpus store {} does not exist", a.corpus.display());
    }
    let target = load_target(&a.target)?;
    let store = Store::open(&a.corpus)?;
    let mut gsp = None;
    let mut dense = None;
    for id in store.ids() {
        let st = store.state(&id)?;
        match st.engine {
            Engine::Gsp(g) if a.gsp.as_ref().is_none_or(|x| x == &id) => gsp = Some(g),
            Engine::Dense(d) if a.dense.as_ref().is_none_or(|x| x == &id) && d.modality == target.modality => {
                dense = Some(d)
            }
            _ => {}
        }
    }
    let gsp = gsp.ok_or_else(|| anyhow!("no gsp experiment in {}", a.corpus.display()))?;
    let dense = dense.ok_or_else(|| anyhow!("no matching dense experiment in {}", a.corpus.display()))?;
    let (corpus, _) = build_corpus(&gsp, &dense)?;
    let set = predict_conditions(&target, &corpus, &gsp.profile, a.seed)?;
    write_json(&a.out, &set)?;
    Ok(set)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Synth(a) => {
            let key = synth(&a)?;
            println!("{} {key}", a.out.display());
        }
        Cmd::Sweep(a) => {
            let idx = sweep(&a)?;
            println!("wrote {} variants to {}", idx.len(), a.out.display());
        }
        Cmd::Simulate(a) => {
            let r = simulate(&a)?;
            println!(
                "chains {} mean final distance {:.4} converged within {}",
                r.gsp.chains.len(),
                r.gsp.mean_final_distance(),
                r.converged_within.map_or("-".into(), |n| n.to_string())
            );
            if let Some(p) = &r.pipeline {
                println!("condition means {}", serde_json::to_string(&p.means)?);
            }
        }
        Cmd::Serve(a) => {
            tokio::runtime::Runtime::new()?.block_on(serve(&a))?;
        }
        Cmd::Analyze(a) => {
            analyze(&a)?;
            println!("wrote {}", a.out.join("result.json").display());
        }
        Cmd::Predict(a) => {
            let set = predict(&a)?;
            println!("closest stimulus {} -> {}", set.closest_stimulus, a.out.display());
        }
    }
    Ok(())
}
