//! WAV directories and the corpus manifest.
//!
//! A manifest lists every file of a corpus relative to the manifest's own
//! directory:
//!
//! ```json
//! {"domain_tag": "a", "kind": "paired",
//!  "items": [{"file": "00000_speech.wav", "role": "speech", "index": 0, "snr_db": 3.1}, ...]}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusItem, CorpusKind};
use crate::error::{Error, Result};
use crate::metrics::si_sdr;
use crate::signal::wav::{read_wav, write_wav, WavFormat};
use crate::signal::Waveform;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavRole {
    Speech,
    Noise,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestItem {
    pub file: String,
    pub role: WavRole,
    /// Groups the files of one corpus item.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub domain_tag: String,
    pub kind: CorpusKind,
    pub items: Vec<ManifestItem>,
}

/// Reads every `*.wav` in `dir`, sorted by file name, as mixtures or noises.
pub fn load_wav_dir(dir: impl AsRef<Path>, role: WavRole) -> Result<Corpus> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
    });
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (kind, wrap): (CorpusKind, fn(Waveform) -> CorpusItem) = match role {
        WavRole::Mixture => (CorpusKind::MixtureOnly, CorpusItem::mixture_only),
        WavRole::Noise => (CorpusKind::NoiseOnly, CorpusItem::noise_only),
        WavRole::Speech => {
            return Err(Error::InvalidConfig(
                "a wav directory holds mixtures or noises, not isolated speech".into(),
            ))
        }
    };
    let items = files
        .iter()
        .map(|p| read_wav(p).map(wrap))
        .collect::<Result<Vec<_>>>()?;
    let tag = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(kind, tag, items)
}

/// Writes the corpus as float32 WAVs plus `manifest.json` into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (index, item) in corpus.items().iter().enumerate() {
        let roles: Vec<(WavRole, &Waveform)> = match corpus.kind() {
            CorpusKind::Paired => vec![
                (WavRole::Speech, item.speech.as_ref().ok_or(Error::UnpairedCorpus)?),
                (WavRole::Noise, item.noise.as_ref().ok_or(Error::UnpairedCorpus)?),
                (WavRole::Mixture, &item.mixture),
            ],
            CorpusKind::NoiseOnly => vec![(WavRole::Noise, &item.mixture)],
            CorpusKind::MixtureOnly => vec![(WavRole::Mixture, &item.mixture)],
        };
        for (role, wave) in roles {
            let file = format!("{index:05}_{}.wav", role_name(role));
            write_wav(dir.join(&file), wave, WavFormat::Float32)?;
            entries.push(ManifestItem {
                file,
                role,
                index,
                snr_db: item.snr_db,
            });
        }
    }
    let manifest = Manifest {
        domain_tag: corpus.domain_tag().to_string(),
        kind: corpus.kind(),
        items: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

fn role_name(role: WavRole) -> &'static str {
    match role {
        WavRole::Speech => "speech",
        WavRole::Noise => "noise",
        WavRole::Mixture => "mixture",
    }
}

/// Loads a corpus from a manifest file, or from `manifest.json` inside a
/// directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest: Manifest = serde_json::from_slice(&fs::read(&path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut grouped: BTreeMap<usize, BTreeMap<WavRole, &ManifestItem>> = BTreeMap::new();
    for entry in &manifest.items {
        if grouped
            .entry(entry.index)
            .or_default()
            .insert(entry.role, entry)
            .is_some()
        {
            return Err(Error::InvalidConfig(format!(
                "manifest lists role {:?} twice for item {}",
                entry.role, entry.index
            )));
        }
    }
    let mut items = Vec::with_capacity(grouped.len());
    for (index, roles) in grouped {
        let load = |role: WavRole| -> Result<Option<Waveform>> {
            roles.get(&role).map(|e| read_wav(base.join(&e.file))).transpose()
        };
        let missing = |what: &str| Error::MissingRole(format!("item {index} has no {what} file"));
        let snr_db = roles.values().find_map(|e| e.snr_db);
        let mut item = match manifest.kind {
            CorpusKind::Paired => {
                let s = load(WavRole::Speech)?.ok_or_else(|| missing("speech"))?;
                let n = load(WavRole::Noise)?.ok_or_else(|| missing("noise"))?;
                let m = load(WavRole::Mixture)?.ok_or_else(|| missing("mixture"))?;
                let mut item = CorpusItem::paired(s, n, m);
                item.input_si_sdr_db = Some(si_sdr(
                    item.mixture.samples(),
                    item.speech.as_ref().expect("paired").samples(),
                )?);
                item
            }
            CorpusKind::NoiseOnly => CorpusItem::noise_only(load(WavRole::Noise)?.ok_or_else(|| missing("noise"))?),
            CorpusKind::MixtureOnly => {
                CorpusItem::mixture_only(load(WavRole::Mixture)?.ok_or_else(|| missing("mixture"))?)
            }
        };
        item.snr_db = snr_db;
        items.push(item);
    }
    if items.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Corpus::new(manifest.kind, manifest.domain_tag, items)
}
