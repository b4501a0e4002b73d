//! Iterative back-translation / self-training pipeline with a persistent,
//! resumable run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json          versioned record of every completed stage
//! artifacts/models/      <hash>.model, <hash>.lm, <hash>.ens
//! artifacts/datasets/    iter<t>-st.tsv, iter<t>-bt.tsv and JSON sidecars
//! artifacts/nbest/       reranked dev n-best lists per stage and direction
//! logs/trials.jsonl      one record per search trial
//! logs/pipeline.log      stage log
//! ```
//!
//! Every artifact named in the manifest is content-addressed or carries its
//! SHA-256, and is verified when a run is resumed. Stage 0 trains one model
//! per direction with the default configuration on the bitext; each
//! iteration then generates synthetic data with the previous ensembles under
//! noisy-channel reranking, searches both directions, optionally fine-tunes
//! and ensembles the top-k models.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lomt_core::augment::{back_translate, self_train};
use lomt_core::corpus::{tags, Side};
use lomt_core::ensemble::EnsembleLm;
use lomt_core::metrics;
use lomt_core::rerank::{rerank, translate_corpus, tune_lambdas, DecodeMode, Reranker};
use lomt_core::search::{
    dev_bleu, finetune, run_configs, run_search, top_k_indices, FinetuneOptions, SearchData, SearchSpace, TrialConfig,
    TrialOptions, TrialResult,
};
use lomt_core::{seed, Direction, Ensemble, LexModel, NGramLM, NoisyChannelWeights, Pair, Sentence, Tag, TaggedDataset, Translator};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::config::{ConfigRecord, SpaceFile};
use crate::io::{self, corpus, lm as lm_io, model as model_io, nbest as nbest_io, sha256_hex};

pub const FORMAT: &str = "lomt-run/1";
pub const MANIFEST: &str = "manifest.json";
/// Largest supported number of iterations.
pub const MAX_ITERATIONS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub iterations: usize,
    pub trials: usize,
    pub topk: usize,
    pub seed: u64,
    /// N-best size for reranked generation, lambda tuning and dev scoring.
    pub nbest: usize,
    pub lambda_trials: usize,
    pub finetune_steps: usize,
    /// Fine-tune at every iteration instead of the last one only.
    pub finetune_every: bool,
    pub patience: Option<usize>,
    pub parallel_only: bool,
    pub space: SpaceFile,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            iterations: 1,
            trials: 30,
            topk: 5,
            seed: 1,
            nbest: 8,
            lambda_trials: 20,
            finetune_steps: 3,
            finetune_every: false,
            patience: TrialOptions::default().patience,
            parallel_only: false,
            space: SpaceFile::from(&SearchSpace::default()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineInputs {
    pub bitext: TaggedDataset,
    pub mono_source: Option<TaggedDataset>,
    pub mono_target: Option<TaggedDataset>,
    /// Monolingual datasets replacing the defaults at one iteration.
    pub overrides: Vec<(usize, TaggedDataset)>,
    pub dev: Vec<Pair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub name: String,
    pub side: String,
    pub tag: String,
    pub sentences: usize,
    pub sha256: String,
}

impl DataRef {
    fn of(d: &TaggedDataset) -> Self {
        DataRef {
            name: d.name.clone(),
            side: d.side().as_str().to_string(),
            tag: d.tag.to_string(),
            sentences: d.len(),
            sha256: sha256_hex(corpus::format_data(d.data()).as_bytes()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverrideRef {
    pub iteration: usize,
    pub data: DataRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecords {
    pub bitext: DataRef,
    pub mono_source: Option<DataRef>,
    pub mono_target: Option<DataRef>,
    pub overrides: Vec<OverrideRef>,
    pub dev: DataRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Both<T> {
    pub forward: T,
    pub backward: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub config: ConfigRecord,
    pub bleu: f64,
    pub best_iteration: usize,
    pub ppl_trace: Vec<f64>,
    pub model: String,
}

impl TrialRecord {
    fn of(r: &TrialResult) -> Self {
        TrialRecord {
            index: r.index,
            config: ConfigRecord::from(&r.config),
            bleu: r.bleu,
            best_iteration: r.best_iteration,
            ppl_trace: r.ppl_trace.clone(),
            model: model_io::hash(&r.model),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    /// Trial indices of the top-k models, best first.
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub input: String,
    pub output: String,
    pub step: usize,
    pub bleu_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub artifact: ArtifactRef,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRecord {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tuning_bleu: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuRecord {
    pub beam: f64,
    pub reranked: f64,
}

/// An ensemble with its tuned reranking weights and dev scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStage {
    pub ensemble: EnsembleRecord,
    pub lambdas: LambdaRecord,
    pub dev_bleu: BleuRecord,
    pub nbest: ArtifactRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialRecord {
    pub config: ConfigRecord,
    pub trials: Both<TrialRecord>,
    pub stage: Both<EnsembleStage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub dataset: ArtifactRef,
    pub sidecar: ArtifactRef,
    pub name: String,
    pub tag: String,
    /// Hash of the generating ensemble file.
    pub generator: String,
    pub input: DataRef,
    pub kept: usize,
    pub dropped: usize,
}

/// Provenance written next to every generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub generator: String,
    pub channel: String,
    pub decode_mode: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nbest: usize,
    pub seed: u64,
    pub input: DataRef,
    pub dropped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Synthetic {
    pub st: Option<SyntheticRecord>,
    pub bt: Option<SyntheticRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub generators: Both<String>,
    pub synthetic: Option<Synthetic>,
    pub search_forward: Option<SearchRecord>,
    pub search_backward: Option<SearchRecord>,
    pub finetune: Option<Both<Vec<FinetuneRecord>>>,
    pub stage: Option<Both<EnsembleStage>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub ensembles: Both<String>,
    pub dev_bleu: Both<BleuRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub run_id: String,
    pub seed: u64,
    pub options: PipelineOptions,
    pub inputs: InputRecords,
    /// Hashes of the LMs used for reranking when they are not the ensembles'
    /// own (parallel-only runs).
    pub rerank_lms: Option<Both<ArtifactRef>>,
    pub initial: Option<InitialRecord>,
    pub iterations: Vec<IterationRecord>,
    #[serde(rename = "final")]
    pub final_record: Option<FinalRecord>,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Manifest> {
        let m: Manifest = io::read_json(&run_dir.join(MANIFEST))?;
        if m.format != FORMAT {
            return Err(Error::invalid(&run_dir.join(MANIFEST), format!("unsupported format {:?}", m.format)));
        }
        Ok(m)
    }

    /// Checks that every referenced artifact exists and hash-matches.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        let check = |a: &ArtifactRef| io::read_verified(&run_dir.join(&a.path), &a.sha256).map(|_| ());
        let stage = |s: &Both<EnsembleStage>| -> Result<()> {
            for e in [&s.forward, &s.backward] {
                check(&e.ensemble.artifact)?;
                check(&e.nbest)?;
                for m in &e.ensemble.members {
                    io::read_verified(&run_dir.join(model_path(m)), m)?;
                }
            }
            Ok(())
        };
        if let Some(l) = &self.rerank_lms {
            check(&l.forward)?;
            check(&l.backward)?;
        }
        if let Some(i) = &self.initial {
            stage(&i.stage)?;
        }
        for it in &self.iterations {
            if let Some(s) = &it.synthetic {
                for r in [&s.st, &s.bt].into_iter().flatten() {
                    check(&r.dataset)?;
                    check(&r.sidecar)?;
                }
            }
            if let Some(s) = &it.stage {
                stage(s)?;
            }
        }
        Ok(())
    }
}

fn model_path(hash: &str) -> String {
    format!("artifacts/models/{hash}.model")
}

struct Run<'a> {
    dir: PathBuf,
    opts: &'a PipelineOptions,
    inputs: PipelineInputs,
    manifest: Manifest,
    space: SearchSpace,
    rerank_lms: Option<Both<Arc<NGramLM>>>,
}

/// Runs (or resumes) the pipeline in `run_dir`.
pub fn run_pipeline(run_dir: &Path, inputs: PipelineInputs, options: &PipelineOptions) -> Result<Manifest> {
    validate(options, &inputs)?;
    let no_mono = inputs.mono_source.as_ref().is_none_or(TaggedDataset::is_empty)
        && inputs.mono_target.as_ref().is_none_or(TaggedDataset::is_empty)
        && inputs.overrides.is_empty();
    let mut opts = options.clone();
    let inputs = if opts.parallel_only || no_mono {
        opts.parallel_only = true;
        parallel_only_inputs(inputs)?
    } else {
        inputs
    };
    let records = InputRecords {
        bitext: DataRef::of(&inputs.bitext),
        mono_source: inputs.mono_source.as_ref().map(DataRef::of),
        mono_target: inputs.mono_target.as_ref().map(DataRef::of),
        overrides: inputs.overrides.iter().map(|(t, d)| OverrideRef { iteration: *t, data: DataRef::of(d) }).collect(),
        dev: DataRef {
            name: "dev".into(),
            side: Side::Parallel.as_str().into(),
            tag: String::new(),
            sentences: inputs.dev.len(),
            sha256: sha256_hex(corpus::format_pairs(&inputs.dev).as_bytes()),
        },
    };
    let id_source = serde_json::to_string(&(&opts, &records)).map_err(|e| Error::Internal(e.to_string()))?;
    let run_id = sha256_hex(id_source.as_bytes())[..16].to_string();
    let manifest = if run_dir.join(MANIFEST).exists() {
        let m = Manifest::load(run_dir)?;
        if m.run_id != run_id || m.options != opts || m.inputs != records {
            return Err(Error::Usage(format!(
                "{} holds a different run ({}); use a fresh directory",
                run_dir.display(),
                m.run_id
            )));
        }
        m.verify(run_dir)?;
        m
    } else {
        Manifest {
            format: FORMAT.into(),
            run_id,
            seed: opts.seed,
            options: opts.clone(),
            inputs: records,
            rerank_lms: None,
            initial: None,
            iterations: Vec::new(),
            final_record: None,
        }
    };
    let space: SearchSpace = opts.space.clone().into();
    let mut run = Run { dir: run_dir.to_path_buf(), opts: &opts, inputs, manifest, space, rerank_lms: None };
    run.execute()?;
    Ok(run.manifest)
}

/// Self-training on the bitext sources and back-translation of its targets,
/// for one iteration unless more are requested.
pub fn run_parallel_only(run_dir: &Path, bitext: TaggedDataset, dev: Vec<Pair>, options: &PipelineOptions) -> Result<Manifest> {
    let opts = PipelineOptions { parallel_only: true, ..options.clone() };
    let inputs = PipelineInputs { bitext, mono_source: None, mono_target: None, overrides: Vec::new(), dev };
    run_pipeline(run_dir, inputs, &opts)
}

fn validate(o: &PipelineOptions, inputs: &PipelineInputs) -> Result<()> {
    if o.iterations == 0 || o.iterations > MAX_ITERATIONS {
        return Err(Error::Usage(format!("iterations must be between 1 and {MAX_ITERATIONS}")));
    }
    if o.topk == 0 || o.topk > o.trials {
        return Err(Error::Usage("need trials >= topk >= 1".into()));
    }
    if o.nbest == 0 || o.lambda_trials == 0 {
        return Err(Error::Usage("nbest and lambda trials must be at least 1".into()));
    }
    if inputs.dev.is_empty() {
        return Err(Error::Usage("the dev set is empty".into()));
    }
    if inputs.bitext.side() != Side::Parallel || inputs.bitext.is_empty() {
        return Err(Error::Usage("the bitext must be a non-empty parallel dataset".into()));
    }
    if let Some((t, _)) = inputs.overrides.iter().find(|(t, _)| *t == 0 || *t > o.iterations) {
        return Err(Error::Usage(format!("dataset override for iteration {t} is outside 1..={}", o.iterations)));
    }
    let space: SearchSpace = o.space.clone().into();
    space.validate()?;
    Ok(())
}

fn parallel_only_inputs(inputs: PipelineInputs) -> Result<PipelineInputs> {
    let b = &inputs.bitext;
    let src: Vec<Sentence> = b.source_side().iter().map(Sentence::untagged).collect();
    let tgt: Vec<Sentence> = b.target_side().iter().map(Sentence::untagged).collect();
    let mono_source = TaggedDataset::mono(&format!("{}-source", b.name), Side::MonoSource, b.tag.clone(), src)?;
    let mono_target = TaggedDataset::mono(&format!("{}-target", b.name), Side::MonoTarget, b.tag.clone(), tgt)?;
    Ok(PipelineInputs { mono_source: Some(mono_source), mono_target: Some(mono_target), overrides: Vec::new(), ..inputs })
}

fn reversed(dev: &[Pair]) -> Vec<Pair> {
    dev.iter().map(|p| Pair::new(p.target.untagged(), p.source.untagged())).collect()
}

impl Run<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn save_manifest(&self) -> Result<()> {
        io::write_json(&self.path(MANIFEST), &self.manifest)
    }

    fn log(&self, line: &str) -> Result<()> {
        let p = self.path("logs/pipeline.log");
        append(&p, line)
    }

    fn put(&self, rel: String, text: &str) -> Result<ArtifactRef> {
        io::write_text(&self.path(&rel), text)?;
        Ok(ArtifactRef { path: rel, sha256: sha256_hex(text.as_bytes()) })
    }

    fn put_model(&self, m: &LexModel) -> Result<String> {
        let h = model_io::hash(m);
        let p = self.path(&model_path(&h));
        if !p.exists() {
            model_io::save(&p, m)?;
        }
        Ok(h)
    }

    fn load_model(&self, hash: &str) -> Result<LexModel> {
        model_io::load_verified(&self.path(&model_path(hash)), hash)
    }

    fn put_ensemble(&self, members: &[LexModel]) -> Result<EnsembleRecord> {
        let hashes = members.iter().map(|m| self.put_model(m)).collect::<Result<Vec<_>>>()?;
        let listed: Vec<(String, String)> = hashes.iter().map(|h| (h.clone(), format!("{h}.model"))).collect();
        let text = model_io::format_ensemble(EnsembleLm::First, &listed);
        let h = sha256_hex(text.as_bytes());
        let artifact = self.put(format!("artifacts/models/{h}.ens"), &text)?;
        Ok(EnsembleRecord { artifact, members: hashes })
    }

    fn load_ensemble(&self, r: &EnsembleRecord) -> Result<Ensemble> {
        model_io::load_ensemble_verified(&self.path(&r.artifact.path), &r.artifact.sha256)
    }

    fn execute(&mut self) -> Result<()> {
        self.prepare_rerank_lms()?;
        self.initial()?;
        for t in 1..=self.opts.iterations {
            self.iteration(t)?;
        }
        let last = self.last_stage().clone();
        self.manifest.final_record = Some(FinalRecord {
            ensembles: Both {
                forward: last.forward.ensemble.artifact.sha256.clone(),
                backward: last.backward.ensemble.artifact.sha256.clone(),
            },
            dev_bleu: Both { forward: last.forward.dev_bleu.clone(), backward: last.backward.dev_bleu.clone() },
        });
        self.save_manifest()?;
        self.log("done")
    }

    fn last_stage(&self) -> &Both<EnsembleStage> {
        match self.manifest.iterations.last().and_then(|i| i.stage.as_ref()) {
            Some(s) => s,
            None => &self.manifest.initial.as_ref().expect("initial stage ran").stage,
        }
    }

    /// Parallel-only runs rerank with LMs trained on the bitext sides only.
    fn prepare_rerank_lms(&mut self) -> Result<()> {
        if !self.opts.parallel_only {
            return Ok(());
        }
        if let Some(r) = &self.manifest.rerank_lms {
            let load = |a: &ArtifactRef| -> Result<Arc<NGramLM>> {
                let p = self.path(&a.path);
                Ok(Arc::new(lm_io::parse(&p, &io::read_verified(&p, &a.sha256)?)?))
            };
            self.rerank_lms = Some(Both { forward: load(&r.forward)?, backward: load(&r.backward)? });
            return Ok(());
        }
        let c = TrialConfig::default();
        let side = |s: Vec<Sentence>| -> Vec<Sentence> { s.iter().map(Sentence::untagged).collect() };
        let fwd = NGramLM::train(&side(self.inputs.bitext.target_side()), c.lm_order, c.lm_k)?;
        let bwd = NGramLM::train(&side(self.inputs.bitext.source_side()), c.lm_order, c.lm_k)?;
        let put = |lm: &NGramLM| {
            let text = lm_io::format(lm);
            self.put(format!("artifacts/models/{}.lm", sha256_hex(text.as_bytes())), &text)
        };
        self.manifest.rerank_lms = Some(Both { forward: put(&fwd)?, backward: put(&bwd)? });
        self.save_manifest()?;
        self.prepare_rerank_lms()
    }

    fn rerank_lm<'b>(&'b self, direction: Direction, model: &'b Ensemble) -> &'b NGramLM {
        match (&self.rerank_lms, direction) {
            (Some(l), Direction::Forward) => &l.forward,
            (Some(l), Direction::Backward) => &l.backward,
            (None, _) => model.lm(),
        }
    }

    fn search_data<'b>(&'b self, direction: Direction, st: Option<&'b TaggedDataset>, bt: Option<&'b TaggedDataset>) -> SearchData<'b> {
        SearchData { bitext: &self.inputs.bitext, st, bt, dev: &self.inputs.dev, direction }
    }

    fn initial(&mut self) -> Result<()> {
        if self.manifest.initial.is_some() {
            return self.log("stage 0: recorded, skipped");
        }
        let config = TrialConfig::default();
        let opts = TrialOptions { patience: self.opts.patience };
        let mut trials = Vec::new();
        for d in [Direction::Forward, Direction::Backward] {
            let data = self.search_data(d, None, None);
            let r = run_configs(std::slice::from_ref(&config), &data, &opts)?.remove(0);
            self.put_model(&r.model)?;
            trials.push((TrialRecord::of(&r), r.model));
        }
        let (b, f) = (trials.pop().expect("two"), trials.pop().expect("two"));
        let fe = self.put_ensemble(std::slice::from_ref(&f.1))?;
        let be = self.put_ensemble(std::slice::from_ref(&b.1))?;
        let stage = self.tune_stage(0, fe, be)?;
        self.manifest.initial = Some(InitialRecord {
            config: ConfigRecord::from(&config),
            trials: Both { forward: f.0, backward: b.0 },
            stage,
        });
        self.save_manifest()?;
        self.log("stage 0: initial models trained")
    }

    /// Tunes reranking weights for a pair of ensembles and scores them on dev.
    fn tune_stage(&self, t: usize, fwd: EnsembleRecord, bwd: EnsembleRecord) -> Result<Both<EnsembleStage>> {
        let f = self.load_ensemble(&fwd)?;
        let g = self.load_ensemble(&bwd)?;
        let dev = self.inputs.dev.clone();
        let rdev = reversed(&dev);
        let forward = self.score(t, Direction::Forward, &f, &g, &dev, fwd)?;
        let backward = self.score(t, Direction::Backward, &g, &f, &rdev, bwd)?;
        Ok(Both { forward, backward })
    }

    fn score(&self, t: usize, d: Direction, model: &Ensemble, channel: &Ensemble, dev: &[Pair], record: EnsembleRecord) -> Result<EnsembleStage> {
        let lm = self.rerank_lm(d, model);
        let lseed = seed::derive(self.opts.seed, &format!("lambda-{}", d.as_str()), t as u64);
        let tuned = tune_lambdas(dev, model, channel, lm, self.opts.nbest, self.opts.lambda_trials, lseed)?;
        let r = Reranker { backward: channel, lm, weights: tuned.weights, nbest: self.opts.nbest };
        let sources: Vec<Sentence> = dev.iter().map(|p| p.source.clone()).collect();
        let refs: Vec<Sentence> = dev.iter().map(|p| p.target.untagged()).collect();
        let reranked = metrics::bleu(&translate_corpus(model, &sources, &DecodeMode::Rerank(r))?, &refs)?;
        let beam = dev_bleu(model, dev)?;
        let lists = sources
            .iter()
            .map(|x| rerank(model.nbest(x, self.opts.nbest)?, channel, lm, tuned.weights))
            .collect::<lomt_core::Result<Vec<_>>>()?;
        let nbest = self.put(format!("artifacts/nbest/stage{t}-{}.nbest", d.as_str()), &nbest_io::format(&lists))?;
        Ok(EnsembleStage {
            ensemble: record,
            lambdas: LambdaRecord {
                lambda1: tuned.weights.lambda1(),
                lambda2: tuned.weights.lambda2(),
                tuning_bleu: tuned.bleu,
                seed: lseed,
            },
            dev_bleu: BleuRecord { beam, reranked },
            nbest,
        })
    }

    fn mono_for(&self, t: usize, side: Side) -> Option<TaggedDataset> {
        self.inputs
            .overrides
            .iter()
            .find(|(i, d)| *i == t && d.side() == side)
            .map(|(_, d)| d.clone())
            .or_else(|| match side {
                Side::MonoSource => self.inputs.mono_source.clone(),
                _ => self.inputs.mono_target.clone(),
            })
            .filter(|d| !d.is_empty())
    }

    fn iteration(&mut self, t: usize) -> Result<()> {
        let prev = self.last_stage().clone();
        if self.manifest.iterations.len() < t {
            self.manifest.iterations.push(IterationRecord {
                iteration: t,
                generators: Both {
                    forward: prev.forward.ensemble.artifact.sha256.clone(),
                    backward: prev.backward.ensemble.artifact.sha256.clone(),
                },
                synthetic: None,
                search_forward: None,
                search_backward: None,
                finetune: None,
                stage: None,
            });
        }
        self.generate(t, &prev)?;
        let (st, bt) = self.load_synthetic(t)?;
        for d in [Direction::Forward, Direction::Backward] {
            self.search(t, d, st.as_ref(), bt.as_ref())?;
        }
        let last = t == self.opts.iterations;
        if (last || self.opts.finetune_every) && self.opts.finetune_steps > 0 {
            self.finetune(t)?;
        }
        if self.record(t).stage.is_some() {
            return self.log(&format!("iteration {t}: ensembles recorded, skipped"));
        }
        let rec = self.record(t).clone();
        let members = |d: Direction| -> Result<Vec<LexModel>> {
            let hashes: Vec<String> = match (&rec.finetune, d) {
                (Some(f), Direction::Forward) => f.forward.iter().map(|r| r.output.clone()).collect(),
                (Some(f), Direction::Backward) => f.backward.iter().map(|r| r.output.clone()).collect(),
                (None, _) => self.selected_hashes(&rec, d),
            };
            hashes.iter().map(|h| self.load_model(h)).collect()
        };
        let fe = self.put_ensemble(&members(Direction::Forward)?)?;
        let be = self.put_ensemble(&members(Direction::Backward)?)?;
        let stage = self.tune_stage(t, fe, be)?;
        self.record_mut(t).stage = Some(stage);
        self.save_manifest()?;
        self.log(&format!("iteration {t}: ensembles built and scored"))
    }

    fn record(&self, t: usize) -> &IterationRecord {
        &self.manifest.iterations[t - 1]
    }

    fn record_mut(&mut self, t: usize) -> &mut IterationRecord {
        &mut self.manifest.iterations[t - 1]
    }

    fn selected_hashes(&self, rec: &IterationRecord, d: Direction) -> Vec<String> {
        let s = match d {
            Direction::Forward => rec.search_forward.as_ref(),
            Direction::Backward => rec.search_backward.as_ref(),
        }
        .expect("search ran");
        s.selected.iter().map(|&i| s.trials[i].model.clone()).collect()
    }

    fn generate(&mut self, t: usize, prev: &Both<EnsembleStage>) -> Result<()> {
        if self.record(t).synthetic.is_some() {
            return self.log(&format!("iteration {t}: synthetic data recorded, skipped"));
        }
        let f = self.load_ensemble(&prev.forward.ensemble)?;
        let g = self.load_ensemble(&prev.backward.ensemble)?;
        let weights = |l: &LambdaRecord| NoisyChannelWeights::new(l.lambda1, l.lambda2);
        let mut out = Synthetic::default();
        if let Some(ms) = self.mono_for(t, Side::MonoSource) {
            let r = Reranker {
                backward: &g,
                lm: self.rerank_lm(Direction::Forward, &f),
                weights: weights(&prev.forward.lambdas)?,
                nbest: self.opts.nbest,
            };
            let gen = self_train(&f, &ms, &DecodeMode::Rerank(r))?;
            out.st = Some(self.put_synthetic(t, "st", &gen.dataset, gen.dropped, &ms, &prev.forward, &prev.backward, &r)?);
        }
        if let Some(mt) = self.mono_for(t, Side::MonoTarget) {
            let r = Reranker {
                backward: &f,
                lm: self.rerank_lm(Direction::Backward, &g),
                weights: weights(&prev.backward.lambdas)?,
                nbest: self.opts.nbest,
            };
            let gen = back_translate(&g, &mt, &DecodeMode::Rerank(r))?;
            out.bt = Some(self.put_synthetic(t, "bt", &gen.dataset, gen.dropped, &mt, &prev.backward, &prev.forward, &r)?);
        }
        self.record_mut(t).synthetic = Some(out);
        self.save_manifest()?;
        self.log(&format!("iteration {t}: synthetic data generated"))
    }

    #[allow(clippy::too_many_arguments)]
    fn put_synthetic(
        &self,
        t: usize,
        kind: &str,
        data: &TaggedDataset,
        dropped: usize,
        input: &TaggedDataset,
        generator: &EnsembleStage,
        channel: &EnsembleStage,
        r: &Reranker<'_>,
    ) -> Result<SyntheticRecord> {
        let dataset = self.put(format!("artifacts/datasets/iter{t}-{kind}.tsv"), &corpus::format_pairs(data.pairs()))?;
        let sidecar = Sidecar {
            generator: generator.ensemble.artifact.sha256.clone(),
            channel: channel.ensemble.artifact.sha256.clone(),
            decode_mode: "rerank".into(),
            lambda1: r.weights.lambda1(),
            lambda2: r.weights.lambda2(),
            nbest: r.nbest,
            seed: self.opts.seed,
            input: DataRef::of(input),
            dropped,
        };
        let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        let sidecar_ref = self.put(format!("artifacts/datasets/iter{t}-{kind}.json"), &text)?;
        Ok(SyntheticRecord {
            dataset,
            sidecar: sidecar_ref,
            name: data.name.clone(),
            tag: data.tag.to_string(),
            generator: sidecar.generator,
            input: sidecar.input,
            kept: data.len(),
            dropped,
        })
    }

    fn load_synthetic(&self, t: usize) -> Result<(Option<TaggedDataset>, Option<TaggedDataset>)> {
        let s = self.record(t).synthetic.clone().unwrap_or_default();
        let load = |r: &SyntheticRecord| -> Result<TaggedDataset> {
            let p = self.path(&r.dataset.path);
            let text = io::read_verified(&p, &r.dataset.sha256)?;
            let (data, _) = lomt_core::corpus::parse_corpus(&text, Side::Parallel)?;
            Ok(TaggedDataset::new(&r.name, Tag::new(&r.tag)?, 1, data)?.apply_tag())
        };
        Ok((s.st.as_ref().map(load).transpose()?, s.bt.as_ref().map(load).transpose()?))
    }

    fn search(&mut self, t: usize, d: Direction, st: Option<&TaggedDataset>, bt: Option<&TaggedDataset>) -> Result<()> {
        let done = match d {
            Direction::Forward => self.record(t).search_forward.is_some(),
            Direction::Backward => self.record(t).search_backward.is_some(),
        };
        if done {
            return self.log(&format!("iteration {t}: {} search recorded, skipped", d.as_str()));
        }
        let sseed = seed::derive(self.opts.seed, &format!("search-{}", d.as_str()), t as u64);
        let data = self.search_data(d, st, bt);
        let opts = TrialOptions { patience: self.opts.patience };
        let results = run_search(&self.space, self.opts.trials, sseed, &data, &opts)?;
        let selected = top_k_indices(&results, self.opts.topk)?;
        for &i in &selected {
            self.put_model(&results[i].model)?;
        }
        let trials: Vec<TrialRecord> = results.iter().map(TrialRecord::of).collect();
        let log = self.path("logs/trials.jsonl");
        for r in &trials {
            let line = serde_json::json!({"iteration": t, "direction": d.as_str(), "trial": r});
            append(&log, &line.to_string())?;
        }
        let record = SearchRecord { seed: sseed, trials, selected };
        match d {
            Direction::Forward => self.record_mut(t).search_forward = Some(record),
            Direction::Backward => self.record_mut(t).search_backward = Some(record),
        }
        self.save_manifest()?;
        self.log(&format!("iteration {t}: {} search finished", d.as_str()))
    }

    fn finetune(&mut self, t: usize) -> Result<()> {
        if self.record(t).finetune.is_some() {
            return self.log(&format!("iteration {t}: fine-tuning recorded, skipped"));
        }
        let rec = self.record(t).clone();
        let swapped = self.inputs.bitext.swapped()?;
        let rdev = reversed(&self.inputs.dev);
        let mut both = Vec::new();
        for (d, data, dev) in [
            (Direction::Forward, &self.inputs.bitext, &self.inputs.dev),
            (Direction::Backward, &swapped, &rdev),
        ] {
            let mut out = Vec::new();
            for h in self.selected_hashes(&rec, d) {
                let m = self.load_model(&h)?;
                let r = finetune(&m, data, dev, self.opts.finetune_steps, &FinetuneOptions::default())?;
                let output = self.put_model(&r.model)?;
                out.push(FinetuneRecord { input: h, output, step: r.step, bleu_trace: r.bleu_trace });
            }
            both.push(out);
        }
        let backward = both.pop().expect("two");
        let forward = both.pop().expect("two");
        self.record_mut(t).finetune = Some(Both { forward, backward });
        self.save_manifest()?;
        self.log(&format!("iteration {t}: fine-tuning finished"))
    }
}

fn append(path: &Path, line: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Tag used for the synthetic datasets of one kind.
pub fn synthetic_tag(kind: &str) -> &'static str {
    if kind == "st" {
        tags::SELF_TRAINED
    } else {
        tags::BACK_TRANSLATED
    }
}
