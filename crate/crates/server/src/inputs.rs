//! Input files for `analyze` and `predict`: CSV tables, rating records and
//! exported experiment logs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use robovoice::hitl::{profiles, Modality, PerceptualProfile, RatingRecord};
use robovoice::labels::DENSE_DIMENSIONS;
use robovoice::voice_space::SLIDER_COUNT;
use serde::Deserialize;

use crate::engine::Engine;
use crate::store::{replay_log, ExperimentState};

pub const SLIDER_NAMES: [&str; SLIDER_COUNT] =
    ["latent1", "latent2", "latent3", "latent4", "latent5", "speed", "effect", "amount"];

/// Rows of numbers with row ids and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// An exported log, recognised by its first line.
pub fn as_export(text: &str) -> Option<ExperimentState> {
    let first = text.lines().next()?;
    if !first.trim_start().starts_with("{\"create\"") {
        return None;
    }
    replay_log(text).ok()
}

/// `id,label1,label2,...` header, then one numeric row per id.
pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("empty CSV"))?;
    let labels: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut cells = line.split(',');
        ids.push(cells.next().unwrap_or_default().trim().to_string());
        let row: Vec<f64> = cells
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("CSV row {}", n + 2))?;
        if row.len() != labels.len() {
            bail!("CSV row {} has {} values, header has {}", n + 2, row.len(), labels.len());
        }
        rows.push(row);
    }
    Ok(Table { ids, labels, rows })
}

/// Complete perceptual profiles as a stimulus x dimension table.
pub fn profile_table(profs: &BTreeMap<String, PerceptualProfile>) -> Table {
    let mut t = Table {
        ids: Vec::new(),
        labels: DENSE_DIMENSIONS.iter().map(|s| s.to_string()).collect(),
        rows: Vec::new(),
    };
    for (id, p) in profs {
        if let Ok(v) = p.vector() {
            t.ids.push(id.clone());
            t.rows.push(v);
        }
    }
    t
}

/// Table from a CSV file or an export: dense logs give profile means, GSP
/// logs give the final slider positions of each chain.
pub fn load_table(path: &Path) -> Result<Table> {
    let text = read(path)?;
    let Some(state) = as_export(&text) else {
        return parse_csv(&text);
    };
    match &state.engine {
        Engine::Dense(d) => Ok(profile_table(&profiles(&d.ratings, d.modality)?)),
        Engine::Gsp(g) => {
            let specs = g.specs();
            Ok(Table {
                ids: g.chains.iter().map(|c| c.stimulus_id.clone()).collect(),
                labels: SLIDER_NAMES.iter().map(|s| s.to_string()).collect(),
                rows: g
                    .chains
                    .iter()
                    .map(|c| c.final_config().positions(&specs).iter().map(|&p| p as f64).collect())
                    .collect(),
            })
        }
        _ => bail!("{}: export is not a dense or gsp experiment", path.display()),
    }
}

/// Rating records from dense exports, JSON arrays or JSON lines.
pub fn load_ratings(paths: &[impl AsRef<Path>]) -> Result<Vec<RatingRecord>> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = read(p)?;
        if let Some(state) = as_export(&text) {
            match state.engine {
                Engine::Dense(d) => out.extend(d.ratings),
                _ => bail!("{}: export is not a dense experiment", p.display()),
            }
        } else if text.trim_start().starts_with('[') {
            out.extend(serde_json::from_str::<Vec<RatingRecord>>(&text)?);
        } else {
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                out.push(serde_json::from_str(line).with_context(|| format!("{} line {}", p.display(), n + 1))?);
            }
        }
    }
    Ok(out)
}

/// Visible tags per stimulus from a STEP-Tag export, or a JSON object
/// mapping stimulus id to tag list.
pub fn load_tag_sets(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let text = read(path)?;
    if let Some(state) = as_export(&text) {
        let Engine::Step(s) = state.engine else {
            bail!("{}: export is not a step experiment", path.display());
        };
        return Ok(s
            .stimuli
            .iter()
            .map(|st| (st.id.clone(), st.visible_tags().map(|t| t.text.clone()).collect()))
            .collect());
    }
    Ok(serde_json::from_str(&text)?)
}

#[derive(Deserialize)]
struct TargetFile {
    #[serde(default)]
    stimulus_id: Option<String>,
    #[serde(default = "image")]
    modality: Modality,
    values: BTreeMap<String, f64>,
}

fn image() -> Modality {
    Modality::Image
}

/// A target profile: either a full `PerceptualProfile` or
/// `{"stimulus_id": .., "values": {dimension: mean}}` covering all 40
/// dimensions.
pub fn load_target(path: &Path) -> Result<PerceptualProfile> {
    let text = read(path)?;
    if let Ok(p) = serde_json::from_str::<PerceptualProfile>(&text) {
        return Ok(p);
    }
    let t: TargetFile = serde_json::from_str(&text).context("target profile")?;
    let id = t
        .stimulus_id
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    for k in t.values.keys() {
        if !DENSE_DIMENSIONS.contains(&k.as_str()) {
            bail!("unknown dimension {k:?} in target");
        }
    }
    let mean: Vec<Option<f64>> = DENSE_DIMENSIONS.iter().map(|d| t.values.get(*d).copied()).collect();
    let count = mean.iter().map(|m| m.is_some() as u32).collect();
    Ok(PerceptualProfile {
        stimulus_id: id,
        modality: t.modality,
        mean,
        count,
    })
}
