//! Translation models and ensembles.
//!
//! A model file holds the decoder settings, the lexical table and the content
//! hash of its target LM, which lives next to it as `<hash>.lm`. Table rows
//! are tab-separated:
//!
//! ```text
//! lomt-model v1 direction=forward beam=5 window=1 lm_weight=0.5 max_options=8 length_norm=false lm=<sha256> entries=3
//! bias <tag> <word> <value>
//! <null> t001 0.25
//! s001 t001 0.75
//! ```
//!
//! An ensemble file lists its members in order, each by hash and path
//! relative to the ensemble file:
//!
//! ```text
//! lomt-ensemble v1 lm=first members=2
//! <sha256> <path>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lomt_core::ensemble::EnsembleLm;
use lomt_core::{DecoderSettings, Direction, Ensemble, LexModel, NGramLM, Translator};

use super::{field, header, lm, read_text, read_verified, sha256_hex, write_text};
use crate::error::{Error, Result};

const MODEL_MAGIC: &str = "lomt-model";
const ENSEMBLE_MAGIC: &str = "lomt-ensemble";

pub fn format(model: &LexModel, lm_hash: &str) -> String {
    let s = model.settings();
    let max_options = s.max_options.map_or_else(|| "none".to_string(), |m| m.to_string());
    let entries: Vec<(&str, &str, f64)> = model.entries().collect();
    let mut out = format!(
        "{MODEL_MAGIC} v1 direction={} beam={} window={} lm_weight={:?} max_options={max_options} length_norm={} lm={lm_hash} entries={}\n",
        model.direction().as_str(),
        s.beam,
        s.window,
        s.lm_weight,
        s.length_norm,
        entries.len()
    );
    for (tag, row) in model.tag_bias() {
        for (w, b) in row {
            let _ = writeln!(out, "bias {tag} {w} {b:?}");
        }
    }
    for (src, tgt, p) in entries {
        let _ = writeln!(out, "{src}\t{tgt}\t{p:?}");
    }
    out
}

/// Hash of a model's serialized form, which covers its LM by hash.
pub fn hash(model: &LexModel) -> String {
    sha256_hex(format(model, &lm::hash(model.lm())).as_bytes())
}

fn parse_direction(path: &Path, s: &str) -> Result<Direction> {
    match s {
        "forward" => Ok(Direction::Forward),
        "backward" => Ok(Direction::Backward),
        _ => Err(Error::format(path, 1, format!("unknown direction {s:?}"))),
    }
}

/// Parses a model whose LM is supplied by `lm_for(hash)`.
pub fn parse(path: &Path, text: &str, lm_for: impl FnOnce(&str) -> Result<Arc<NGramLM>>) -> Result<LexModel> {
    let mut lines = text.lines().enumerate();
    let fields = header(path, lines.next().map(|l| l.1), MODEL_MAGIC)?;
    let direction = parse_direction(path, &field::<String>(path, 1, &fields, "direction")?)?;
    let max_options: String = field(path, 1, &fields, "max_options")?;
    let settings = DecoderSettings {
        beam: field(path, 1, &fields, "beam")?,
        window: field(path, 1, &fields, "window")?,
        lm_weight: field(path, 1, &fields, "lm_weight")?,
        max_options: if max_options == "none" {
            None
        } else {
            Some(max_options.parse().map_err(|_| Error::format(path, 1, "bad max_options"))?)
        },
        length_norm: field(path, 1, &fields, "length_norm")?,
    };
    let lm_hash: String = field(path, 1, &fields, "lm")?;
    let n: usize = field(path, 1, &fields, "entries")?;
    let mut bias: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut entries = Vec::with_capacity(n);
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix("bias ") {
            let parts: Vec<&str> = rest.split(' ').collect();
            let [tag, word, value] = parts[..] else {
                return Err(Error::format(path, i + 1, "expected \"bias tag word value\""));
            };
            let value: f64 = value.parse().map_err(|_| Error::format(path, i + 1, "bad bias value"))?;
            bias.entry(tag.to_string()).or_default().insert(word.to_string(), value);
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [s, t, p] = parts[..] else {
            return Err(Error::format(path, i + 1, "expected \"source<TAB>target<TAB>probability\""));
        };
        let p: f64 = p.parse().map_err(|_| Error::format(path, i + 1, "bad probability"))?;
        entries.push((s.to_string(), t.to_string(), p));
    }
    if entries.len() != n {
        return Err(Error::invalid(path, format!("header announces {n} entries, found {}", entries.len())));
    }
    let lm = lm_for(&lm_hash)?;
    let model = LexModel::from_entries(direction, entries, lm, settings)?;
    Ok(if bias.is_empty() { model } else { model.with_tag_bias(bias) })
}

fn lm_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.lm"))
}

fn dir_of(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

/// Writes the model and its LM; returns the model hash.
pub fn save(path: &Path, model: &LexModel) -> Result<String> {
    let lm_text = lm::format(model.lm());
    let lm_hash = sha256_hex(lm_text.as_bytes());
    let lp = lm_path(dir_of(path), &lm_hash);
    if !lp.exists() {
        write_text(&lp, &lm_text)?;
    }
    let text = format(model, &lm_hash);
    write_text(path, &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn load(path: &Path) -> Result<LexModel> {
    let text = read_text(path)?;
    load_text(path, &text)
}

fn load_text(path: &Path, text: &str) -> Result<LexModel> {
    parse(path, text, |h| {
        let lp = lm_path(dir_of(path), h);
        Ok(Arc::new(lm::parse(&lp, &read_verified(&lp, h)?)?))
    })
}

/// Loads a model and checks that its file has the expected hash.
pub fn load_verified(path: &Path, expected: &str) -> Result<LexModel> {
    let text = read_verified(path, expected)?;
    load_text(path, &text)
}

pub fn format_ensemble(lm_mode: EnsembleLm, members: &[(String, String)]) -> String {
    let mode = match lm_mode {
        EnsembleLm::First => "first",
        EnsembleLm::Average => "average",
    };
    let mut out = format!("{ENSEMBLE_MAGIC} v1 lm={mode} members={}\n", members.len());
    for (hash, rel) in members {
        let _ = writeln!(out, "{hash} {rel}");
    }
    out
}

/// Writes every member as `<hash>.model` in `dir` and the ensemble file at
/// `path`; returns the ensemble hash and the member hashes.
pub fn save_ensemble(path: &Path, dir: &Path, ensemble: &Ensemble) -> Result<(String, Vec<String>)> {
    let mut members = Vec::with_capacity(ensemble.k());
    for m in ensemble.members() {
        let h = hash(m);
        let mp = dir.join(format!("{h}.model"));
        if !mp.exists() {
            save(&mp, m)?;
        }
        members.push((h, relative(dir_of(path), &mp)));
    }
    let text = format_ensemble(ensemble.lm_mode(), &members);
    write_text(path, &text)?;
    Ok((sha256_hex(text.as_bytes()), members.into_iter().map(|m| m.0).collect()))
}

/// `target` relative to `base` when both share a prefix, else as given.
fn relative(base: &Path, target: &Path) -> String {
    let b: Vec<_> = base.components().collect();
    let t: Vec<_> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    if common == 0 && (base.is_absolute() != target.is_absolute()) {
        return target.to_string_lossy().into_owned();
    }
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out.to_string_lossy().into_owned()
}

pub fn parse_ensemble(path: &Path, text: &str) -> Result<Ensemble> {
    let mut lines = text.lines().enumerate();
    let fields = header(path, lines.next().map(|l| l.1), ENSEMBLE_MAGIC)?;
    let mode = match field::<String>(path, 1, &fields, "lm")?.as_str() {
        "first" => EnsembleLm::First,
        "average" => EnsembleLm::Average,
        other => return Err(Error::format(path, 1, format!("unknown lm mode {other:?}"))),
    };
    let n: usize = field(path, 1, &fields, "members")?;
    let mut members = Vec::with_capacity(n);
    for (i, line) in lines {
        let (h, rel) = line.split_once(' ').ok_or_else(|| Error::format(path, i + 1, "expected \"hash path\""))?;
        members.push(load_verified(&dir_of(path).join(rel), h)?);
    }
    if members.len() != n {
        return Err(Error::invalid(path, format!("header announces {n} members, found {}", members.len())));
    }
    Ok(Ensemble::with_lm(members, mode)?)
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    parse_ensemble(path, &read_text(path)?)
}

pub fn load_ensemble_verified(path: &Path, expected: &str) -> Result<Ensemble> {
    parse_ensemble(path, &read_verified(path, expected)?)
}

/// A model or an ensemble, whichever the file holds.
pub fn load_translator(path: &Path) -> Result<Box<dyn Translator>> {
    let text = read_text(path)?;
    if text.starts_with(ENSEMBLE_MAGIC) {
        Ok(Box::new(parse_ensemble(path, &text)?))
    } else {
        Ok(Box::new(load_text(path, &text)?))
    }
}
