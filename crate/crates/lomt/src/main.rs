use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lomt::io::config::{load_space, load_synth};
use lomt::io::{self, bpe as bpe_io, corpus, datasets, lm as lm_io, model as model_io, nbest as nbest_io, report};
use lomt::pipeline::{run_pipeline, PipelineInputs, PipelineOptions, MAX_ITERATIONS};
use lomt::{bundle, mining, Error};
use lomt_core::augment::{back_translate, self_train, Upsamples};
use lomt_core::metrics::{evaluate_system, Postprocess};
use lomt_core::rerank::{rerank, translate_corpus, tune_lambdas, DecodeMode, Reranker};
use lomt_core::search::{describe, finetune, run_configs, run_search, top_k_indices, FinetuneOptions, SearchData, SearchSpace, TrialConfig, TrialOptions};
use lomt_core::subword::{learn_bpe, BpeOptions, DetokPolicy};
use lomt_core::synth::{gen_corpora, SynthSpec};
use lomt_core::{Direction, Ensemble, NGramLM, NoisyChannelWeights, Pair, Sentence, TaggedDataset, Translator};

#[derive(Parser)]
#[command(name = "lomt", version, about = "Low-resource MT experiments with lexical translation models")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Forward => Direction::Forward,
            Dir::Backward => Direction::Backward,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Detok {
    Spaced,
    Unspaced,
}

#[derive(Args)]
struct RerankArgs {
    /// Channel model (opposite direction); enables noisy-channel reranking.
    #[arg(long)]
    backward: Option<PathBuf>,
    /// Channel model weight, in [0, 3].
    #[arg(long, requires = "backward", allow_negative_numbers = true)]
    lambda1: Option<f64>,
    /// Language model weight, in [0, 3].
    #[arg(long, requires = "backward", allow_negative_numbers = true)]
    lambda2: Option<f64>,
    /// Reranking LM file; defaults to the model's own LM.
    #[arg(long, requires = "backward")]
    lm: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// EM iterations (upper bound with early stopping).
    #[arg(long, default_value_t = 8)]
    em_iterations: usize,
    /// Target LM n-gram order.
    #[arg(long, default_value_t = 3)]
    lm_order: usize,
    /// Add-k smoothing constant of the target LM.
    #[arg(long, default_value_t = 0.01)]
    lm_k: f64,
    /// Weight of the in-domain LM component when synthetic data is mixed in.
    #[arg(long, default_value_t = 0.5)]
    lm_adapt: f64,
    /// LM weight in the decoder score.
    #[arg(long, default_value_t = 0.5)]
    lm_weight: f64,
    /// Reordering window.
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Beam width.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Upsampling ratio of the bitext.
    #[arg(long, default_value_t = 3)]
    bitext_upsample: u32,
    /// Upsampling ratio of self-training data.
    #[arg(long, default_value_t = 1)]
    st_upsample: u32,
    /// Upsampling ratio of back-translated data.
    #[arg(long, default_value_t = 1)]
    bt_upsample: u32,
    /// Trial seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl From<&TrainArgs> for TrialConfig {
    fn from(a: &TrainArgs) -> Self {
        TrialConfig {
            em_iterations: a.em_iterations,
            lm_order: a.lm_order,
            lm_k: a.lm_k,
            lm_adapt: a.lm_adapt,
            lm_weight: a.lm_weight,
            window: a.window,
            beam: a.beam,
            upsamples: Upsamples { bitext: a.bitext_upsample, st: a.st_upsample, bt: a.bt_upsample },
            seed: a.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic language pair and its dataset manifest.
    SynthGen {
        /// Spec file; missing keys use the defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a BPE model.
    LearnBpe {
        /// Training text files, one sentence per line; parallel files contribute both sides.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Target inventory size.
        #[arg(long)]
        vocab_size: usize,
        /// Continuation marker prefixed to non-initial pieces.
        #[arg(long, default_value = lomt_core::subword::DEFAULT_JOINER)]
        joiner: String,
        /// Output BPE model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a BPE model to a file.
    ApplyBpe {
        /// BPE model file.
        #[arg(long)]
        bpe: PathBuf,
        /// Text to process.
        #[arg(long)]
        input: PathBuf,
        /// Output file.
        #[arg(long)]
        output: PathBuf,
        /// Decode instead of encode.
        #[arg(long)]
        decode: bool,
        /// How decoded words are joined.
        #[arg(long, value_enum, default_value_t = Detok::Spaced)]
        detok: Detok,
    },
    /// Train an n-gram LM on one sentence per line.
    TrainLm {
        /// Training text.
        #[arg(long)]
        input: PathBuf,
        /// N-gram order.
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Add-k smoothing constant.
        #[arg(long, default_value_t = 0.01)]
        k: f64,
        /// Output LM file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model with a fixed configuration.
    Train {
        /// Dataset manifest (TOML); must name a dev set.
        #[arg(long)]
        datasets: PathBuf,
        /// Translation direction.
        #[arg(long, value_enum, default_value_t = Dir::Forward)]
        direction: Dir,
        #[command(flatten)]
        config: TrainArgs,
        /// Run every EM iteration regardless of dev perplexity.
        #[arg(long)]
        no_early_stop: bool,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyper-parameter search; writes the top-k models and their ensemble.
    Search {
        /// Dataset manifest (TOML); must name a dev set.
        #[arg(long)]
        datasets: PathBuf,
        /// Translation direction.
        #[arg(long, value_enum, default_value_t = Dir::Forward)]
        direction: Dir,
        /// Number of sampled configurations.
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Models kept for the ensemble.
        #[arg(long, default_value_t = 5)]
        topk: usize,
        /// Search seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Search space file (TOML); defaults to the built-in space.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Translate one sentence per line with a model or ensemble.
    Translate {
        /// Model or ensemble file.
        #[arg(long)]
        model: PathBuf,
        /// Source sentences, one per line.
        #[arg(long)]
        input: PathBuf,
        /// Output translations.
        #[arg(long)]
        output: PathBuf,
        /// N-best size used for reranking.
        #[arg(long, default_value_t = 50)]
        nbest: usize,
        #[command(flatten)]
        rerank: RerankArgs,
        /// Also write the (reranked) n-best lists.
        #[arg(long)]
        nbest_out: Option<PathBuf>,
        /// BPE model: encode the input and decode the output.
        #[arg(long)]
        bpe: Option<PathBuf>,
        /// How decoded words are joined.
        #[arg(long, value_enum, default_value_t = Detok::Spaced)]
        detok: Detok,
    },
    /// Rerank an existing n-best file.
    Rerank {
        /// N-best file to rerank.
        #[arg(long)]
        nbest_in: PathBuf,
        /// Source sentences the lists belong to.
        #[arg(long)]
        sources: PathBuf,
        /// Channel model (opposite direction).
        #[arg(long)]
        backward: PathBuf,
        /// Target LM file.
        #[arg(long)]
        lm: PathBuf,
        /// Channel model weight, in [0, 3].
        #[arg(long, allow_negative_numbers = true)]
        lambda1: f64,
        /// Language model weight, in [0, 3].
        #[arg(long, allow_negative_numbers = true)]
        lambda2: f64,
        /// Output translations (top entry per list).
        #[arg(long)]
        output: PathBuf,
        /// Also write the reranked lists.
        #[arg(long)]
        nbest_out: Option<PathBuf>,
    },
    /// Random search over the reranking weights on a dev set.
    TuneLambdas {
        /// Forward model or ensemble.
        #[arg(long)]
        model: PathBuf,
        /// Channel model (opposite direction).
        #[arg(long)]
        backward: PathBuf,
        /// Tuning set, one tab-separated pair per line.
        #[arg(long)]
        dev: PathBuf,
        /// Reranking LM file; defaults to the model's own LM.
        #[arg(long)]
        lm: Option<PathBuf>,
        /// N-best size.
        #[arg(long, default_value_t = 50)]
        nbest: usize,
        /// Number of weight pairs tried; the first is (0, 0).
        #[arg(long, default_value_t = 20)]
        tune_trials: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the result and every trial as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Back-translate target-side monolingual text with a backward model.
    AugmentBt {
        /// Backward model or ensemble.
        #[arg(long)]
        model: PathBuf,
        /// Target-side monolingual text.
        #[arg(long)]
        input: PathBuf,
        /// Synthetic bitext (source, target) output.
        #[arg(long)]
        output: PathBuf,
        /// N-best size used for reranking.
        #[arg(long, default_value_t = 8)]
        nbest: usize,
        #[command(flatten)]
        rerank: RerankArgs,
    },
    /// Self-train on source-side monolingual text with a forward model.
    AugmentSt {
        /// Forward model or ensemble.
        #[arg(long)]
        model: PathBuf,
        /// Source-side monolingual text.
        #[arg(long)]
        input: PathBuf,
        /// Synthetic bitext (source, target) output.
        #[arg(long)]
        output: PathBuf,
        /// N-best size used for reranking.
        #[arg(long, default_value_t = 8)]
        nbest: usize,
        #[command(flatten)]
        rerank: RerankArgs,
    },
    /// Run the iterative back-translation / self-training pipeline.
    Pipeline {
        /// Dataset manifest (TOML); must name a dev set.
        #[arg(long)]
        datasets: PathBuf,
        /// Run directory; an existing run there is resumed.
        #[arg(long)]
        run_dir: PathBuf,
        /// Iterations, at most 3.
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        /// Search trials per direction and iteration.
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Ensemble size.
        #[arg(long, default_value_t = 5)]
        topk: usize,
        /// Run seed; every stage seed is derived from it.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// N-best size for reranked generation and tuning.
        #[arg(long, default_value_t = 8)]
        nbest: usize,
        /// Reranking weight pairs tried per tuning.
        #[arg(long, default_value_t = 20)]
        tune_trials: usize,
        /// Search space file (TOML); defaults to the built-in space.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Fine-tuning steps for each selected model.
        #[arg(long, default_value_t = 3)]
        finetune_steps: usize,
        /// Fine-tune after every iteration, not only the last.
        #[arg(long)]
        finetune_every: bool,
        /// Run every EM iteration regardless of dev perplexity.
        #[arg(long)]
        no_early_stop: bool,
        /// Use only the bitext: its two sides stand in for monolingual data.
        #[arg(long)]
        parallel_only: bool,
    },
    /// Mine sentence pairs from a document collection.
    Mine {
        /// Collection index: one "lang<TAB>url<TAB>file" line per document.
        #[arg(long)]
        index: PathBuf,
        /// Language code of the source documents.
        #[arg(long)]
        source_lang: String,
        /// Language code of the target documents.
        #[arg(long)]
        target_lang: String,
        /// Forward model (not an ensemble).
        #[arg(long)]
        model: PathBuf,
        /// Minimum document similarity for a document pair.
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        threshold: f64,
        /// Minimum sentence pair score.
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        floor: f64,
        /// Mined bitext; scores go to <output>.scores.tsv.
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a model on a test set and write a JSON report.
    Evaluate {
        /// Model or ensemble file.
        #[arg(long)]
        model: PathBuf,
        /// Test set, one tab-separated pair per line.
        #[arg(long)]
        test: PathBuf,
        /// N-best size used for reranking.
        #[arg(long, default_value_t = 50)]
        nbest: usize,
        #[command(flatten)]
        rerank: RerankArgs,
        /// BPE model: encode sources and decode outputs before scoring.
        #[arg(long)]
        bpe: Option<PathBuf>,
        /// How decoded words are joined.
        #[arg(long, value_enum, default_value_t = Detok::Spaced)]
        detok: Detok,
        /// Write a JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Continue training a model on in-domain bitext.
    Finetune {
        /// Model to fine-tune.
        #[arg(long)]
        model: PathBuf,
        /// Dataset manifest; its bitext and dev set are used.
        #[arg(long)]
        datasets: PathBuf,
        /// Fine-tuning steps.
        #[arg(long, default_value_t = 3)]
        steps: usize,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or_else(
                || e.downcast_ref::<lomt_core::Error>().map_or(3, |c| Error::Core(c.clone()).exit_code()),
                Error::exit_code,
            );
            ExitCode::from(code as u8)
        }
    }
}

fn policy(d: Detok) -> DetokPolicy {
    match d {
        Detok::Spaced => DetokPolicy::SpaceJoined,
        Detok::Unspaced => DetokPolicy::Unspaced,
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

/// A channel model, LM and weights resolved from the command line.
struct Channel {
    backward: Box<dyn Translator>,
    lm: Option<NGramLM>,
    weights: NoisyChannelWeights,
}

impl Channel {
    fn load(args: &RerankArgs) -> anyhow::Result<Option<Channel>> {
        let Some(b) = &args.backward else { return Ok(None) };
        let (Some(l1), Some(l2)) = (args.lambda1, args.lambda2) else {
            return Err(usage("--backward needs --lambda1 and --lambda2"));
        };
        Ok(Some(Channel {
            backward: model_io::load_translator(b)?,
            lm: args.lm.as_deref().map(lm_io::load).transpose()?,
            weights: NoisyChannelWeights::new(l1, l2)?,
        }))
    }

    fn mode<'a>(&'a self, model: &'a dyn Translator, nbest: usize) -> DecodeMode<'a> {
        DecodeMode::Rerank(Reranker {
            backward: self.backward.as_ref(),
            lm: self.lm.as_ref().unwrap_or_else(|| model.lm()),
            weights: self.weights,
            nbest,
        })
    }
}

fn load_datasets(path: &Path) -> anyhow::Result<datasets::Datasets> {
    datasets::load(path).with_context(|| format!("loading dataset manifest {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow!(Error::Internal(e.to_string())))?;
    }
    match cli.command {
        Command::SynthGen { spec, seed, out } => {
            let mut spec = match spec {
                Some(p) => load_synth(&p)?,
                None => SynthSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let b = gen_corpora(&spec)?;
            bundle::write_bundle(&out, &spec, &b)?;
            println!(
                "wrote {}: {} parallel, {} mono-source, {} mono-target, {} dev, {} test",
                out.display(),
                b.parallel.len(),
                b.mono_src.len(),
                b.mono_tgt.len(),
                b.dev.len(),
                b.test.len()
            );
        }
        Command::LearnBpe { input, vocab_size, joiner, out } => {
            let mut corpus_text = Vec::new();
            for p in &input {
                corpus_text.extend(corpus::read_any(p)?);
            }
            let opts = BpeOptions { joiner, ..BpeOptions::default() };
            let model = learn_bpe(&corpus_text, vocab_size, &opts)?;
            bpe_io::save(&out, &model)?;
            println!("learned {} merges", model.merges().len());
        }
        Command::ApplyBpe { bpe, input, output, decode, detok } => {
            let model = bpe_io::load(&bpe)?;
            let lines = corpus::read_sentences(&input)?;
            let out: Vec<Sentence> = if decode {
                lines.iter().map(|s| Sentence::parse(&model.decode(s, policy(detok)))).collect()
            } else {
                lines.iter().map(|s| model.encode(s)).collect()
            };
            corpus::write_sentences(&output, &out)?;
        }
        Command::TrainLm { input, order, k, out } => {
            let lm = NGramLM::train(&corpus::read_sentences(&input)?, order, k)?;
            let h = lm_io::save(&out, &lm)?;
            println!("{h}");
        }
        Command::Train { datasets, direction, config, no_early_stop, out } => {
            let d = load_datasets(&datasets)?;
            let data = SearchData {
                bitext: d.bitext()?,
                st: d.st.as_ref(),
                bt: d.bt.as_ref(),
                dev: d.dev()?,
                direction: direction.into(),
            };
            let opts = if no_early_stop { TrialOptions { patience: None } } else { TrialOptions::default() };
            let r = run_configs(&[TrialConfig::from(&config)], &data, &opts)?.remove(0);
            let h = model_io::save(&out, &r.model)?;
            println!("{} model={h}", describe(&r));
        }
        Command::Search { datasets, direction, trials, topk, seed, space, out_dir } => {
            let d = load_datasets(&datasets)?;
            let space = match space {
                Some(p) => load_space(&p)?,
                None => SearchSpace::default(),
            };
            if topk == 0 || topk > trials {
                return Err(usage("need trials >= topk >= 1"));
            }
            let data = SearchData {
                bitext: d.bitext()?,
                st: d.st.as_ref(),
                bt: d.bt.as_ref(),
                dev: d.dev()?,
                direction: direction.into(),
            };
            let results = run_search(&space, trials, seed, &data, &TrialOptions::default())?;
            let models_dir = out_dir.join("models");
            let mut log = String::new();
            for r in &results {
                let rec = serde_json::json!({
                    "trial": r.index,
                    "config": lomt::io::config::ConfigRecord::from(&r.config),
                    "bleu": r.bleu,
                    "best_iteration": r.best_iteration,
                    "ppl_trace": r.ppl_trace,
                });
                log.push_str(&rec.to_string());
                log.push('\n');
                println!("{}", describe(r));
            }
            io::write_text(&out_dir.join("trials.jsonl"), &log)?;
            let idx = top_k_indices(&results, topk)?;
            let ens = Ensemble::new(idx.iter().map(|&i| results[i].model.clone()).collect())?;
            let (h, _) = model_io::save_ensemble(&out_dir.join("ensemble.ens"), &models_dir, &ens)?;
            println!("ensemble of trials {idx:?}: {h}");
        }
        Command::Translate { model, input, output, nbest, rerank: ra, nbest_out, bpe, detok } => {
            let m = model_io::load_translator(&model)?;
            let channel = Channel::load(&ra)?;
            let bpe = bpe.as_deref().map(bpe_io::load).transpose()?;
            let post = Postprocess { bpe: bpe.as_ref(), policy: policy(detok) };
            let sources: Vec<Sentence> = corpus::read_sentences(&input)?.iter().map(|s| post.prepare(s)).collect();
            let mode = match &channel {
                Some(c) => c.mode(m.as_ref(), nbest),
                None => DecodeMode::Beam,
            };
            let hyps = translate_corpus(m.as_ref(), &sources, &mode)?;
            corpus::write_sentences(&output, &hyps.iter().map(|y| post.finish(y)).collect::<Vec<_>>())?;
            if let Some(p) = nbest_out {
                let lists = sources
                    .iter()
                    .map(|x| {
                        let list = m.nbest(x, nbest)?;
                        match &mode {
                            DecodeMode::Rerank(r) => rerank(list, r.backward, r.lm, r.weights),
                            DecodeMode::Beam => Ok(list),
                        }
                    })
                    .collect::<lomt_core::Result<Vec<_>>>()?;
                nbest_io::save(&p, &lists)?;
            }
        }
        Command::Rerank { nbest_in, sources, backward, lm, lambda1, lambda2, output, nbest_out } => {
            let sources = corpus::read_sentences(&sources)?;
            let lists = nbest_io::load(&nbest_in, &sources)?;
            let g = model_io::load_translator(&backward)?;
            let lm = lm_io::load(&lm)?;
            let w = NoisyChannelWeights::new(lambda1, lambda2)?;
            let lists = lists.into_iter().map(|l| rerank(l, g.as_ref(), &lm, w)).collect::<lomt_core::Result<Vec<_>>>()?;
            let best: Vec<Sentence> =
                lists.iter().map(|l| l.top().map(|e| e.hypothesis.clone()).unwrap_or_default()).collect();
            corpus::write_sentences(&output, &best)?;
            if let Some(p) = nbest_out {
                nbest_io::save(&p, &lists)?;
            }
        }
        Command::TuneLambdas { model, backward, dev, lm, nbest, tune_trials, seed, out } => {
            let f = model_io::load_translator(&model)?;
            let g = model_io::load_translator(&backward)?;
            let dev = corpus::read_pairs(&dev)?;
            let lm = lm.as_deref().map(lm_io::load).transpose()?;
            let lm = lm.as_ref().unwrap_or_else(|| f.lm());
            let t = tune_lambdas(&dev, f.as_ref(), g.as_ref(), lm, nbest, tune_trials, seed)?;
            println!("lambda1={} lambda2={} bleu={:.2}", t.weights.lambda1(), t.weights.lambda2(), t.bleu);
            if let Some(p) = out {
                let trials: Vec<_> = t
                    .trials
                    .iter()
                    .map(|(w, b)| serde_json::json!({"lambda1": w.lambda1(), "lambda2": w.lambda2(), "bleu": b}))
                    .collect();
                let rec = serde_json::json!({
                    "lambda1": t.weights.lambda1(),
                    "lambda2": t.weights.lambda2(),
                    "bleu": t.bleu,
                    "nbest": nbest,
                    "seed": seed,
                    "trials": trials,
                });
                io::write_json(&p, &rec)?;
            }
        }
        Command::AugmentBt { model, input, output, nbest, rerank: ra } => {
            augment(&model, &input, &output, nbest, &ra, Direction::Backward)?;
        }
        Command::AugmentSt { model, input, output, nbest, rerank: ra } => {
            augment(&model, &input, &output, nbest, &ra, Direction::Forward)?;
        }
        Command::Pipeline {
            datasets,
            run_dir,
            iterations,
            trials,
            topk,
            seed,
            nbest,
            tune_trials,
            space,
            finetune_steps,
            finetune_every,
            no_early_stop,
            parallel_only,
        } => {
            if iterations == 0 || iterations > MAX_ITERATIONS {
                return Err(usage(format!("--iterations must be between 1 and {MAX_ITERATIONS}")));
            }
            let d = load_datasets(&datasets)?;
            let space = match space {
                Some(p) => load_space(&p)?,
                None => SearchSpace::default(),
            };
            let opts = PipelineOptions {
                iterations,
                trials,
                topk,
                seed,
                nbest,
                lambda_trials: tune_trials,
                finetune_steps,
                finetune_every,
                patience: if no_early_stop { None } else { TrialOptions::default().patience },
                parallel_only,
                space: (&space).into(),
            };
            let inputs = PipelineInputs {
                bitext: d.bitext()?.clone(),
                mono_source: if parallel_only { None } else { d.mono_source.clone() },
                mono_target: if parallel_only { None } else { d.mono_target.clone() },
                overrides: if parallel_only { Vec::new() } else { d.overrides.clone() },
                dev: d.dev()?.to_vec(),
            };
            let m = run_pipeline(&run_dir, inputs, &opts)?;
            let fin = m.final_record.as_ref().ok_or_else(|| anyhow!(Error::Internal("run ended without a final record".into())))?;
            println!("run {} finished", m.run_id);
            println!(
                "forward  dev BLEU beam={:.2} reranked={:.2} ensemble={}",
                fin.dev_bleu.forward.beam, fin.dev_bleu.forward.reranked, fin.ensembles.forward
            );
            println!(
                "backward dev BLEU beam={:.2} reranked={:.2} ensemble={}",
                fin.dev_bleu.backward.beam, fin.dev_bleu.backward.reranked, fin.ensembles.backward
            );
        }
        Command::Mine { index, source_lang, target_lang, model, threshold, floor, output } => {
            let docs = mining::read_collection(&index)?;
            let m = model_io::load(&model)?;
            if m.direction() != Direction::Forward {
                return Err(usage("mining needs a forward model"));
            }
            let mined = mining::mine(&docs, &source_lang, &target_lang, &m, threshold, floor);
            let pairs: Vec<Pair> = mined.iter().map(|x| x.pair.clone()).collect();
            corpus::write_pairs(&output, &pairs)?;
            let mut scores = output.clone().into_os_string();
            scores.push(".scores.tsv");
            io::write_text(Path::new(&scores), &mining::format_scores(&mined))?;
            println!("mined {} pairs", pairs.len());
        }
        Command::Evaluate { model, test, nbest, rerank: ra, bpe, detok, report: out } => {
            let m = model_io::load_translator(&model)?;
            let hash = io::sha256_hex(io::read_text(&model)?.as_bytes());
            let channel = Channel::load(&ra)?;
            let bpe = bpe.as_deref().map(bpe_io::load).transpose()?;
            let test = corpus::read_pairs(&test)?;
            let mode = match &channel {
                Some(c) => c.mode(m.as_ref(), nbest),
                None => DecodeMode::Beam,
            };
            let r = evaluate_system(m.as_ref(), &test, &mode, Postprocess { bpe: bpe.as_ref(), policy: policy(detok) })?;
            let rec = report::ReportRecord::new(&r, &hash);
            println!("{}", rec.summary());
            if let Some(p) = out {
                report::save(&p, &rec)?;
            }
        }
        Command::Finetune { model, datasets, steps, out } => {
            let m = model_io::load(&model)?;
            let d = load_datasets(&datasets)?;
            let (data, dev): (TaggedDataset, Vec<Pair>) = match m.direction() {
                Direction::Forward => (d.bitext()?.clone(), d.dev()?.to_vec()),
                Direction::Backward => (
                    d.bitext()?.swapped()?,
                    d.dev()?.iter().map(|p| Pair::new(p.target.untagged(), p.source.untagged())).collect(),
                ),
            };
            let r = finetune(&m, &data, &dev, steps, &FinetuneOptions::default())?;
            let h = model_io::save(&out, &r.model)?;
            println!("step {} dev BLEU {:.2} (trace {:?}) model={h}", r.step, r.bleu(), r.bleu_trace);
        }
    }
    Ok(())
}

fn augment(model: &Path, input: &Path, output: &Path, nbest: usize, ra: &RerankArgs, d: Direction) -> anyhow::Result<()> {
    let m = model_io::load_translator(model)?;
    let channel = Channel::load(ra)?;
    let mode = match &channel {
        Some(c) => c.mode(m.as_ref(), nbest),
        None => DecodeMode::Beam,
    };
    let name = input.file_stem().map_or_else(|| "mono".to_string(), |s| s.to_string_lossy().into_owned());
    let sents = corpus::read_sentences(input)?;
    let tag = lomt_core::Tag::new(lomt_core::corpus::tags::IN_DOMAIN)?;
    let generated = match d {
        Direction::Backward => {
            let mono = TaggedDataset::mono(&name, lomt_core::Side::MonoTarget, tag, sents)?;
            back_translate(m.as_ref(), &mono, &mode)?
        }
        Direction::Forward => {
            let mono = TaggedDataset::mono(&name, lomt_core::Side::MonoSource, tag, sents)?;
            self_train(m.as_ref(), &mono, &mode)?
        }
    };
    corpus::write_pairs(output, generated.dataset.pairs())?;
    println!("kept {} pairs, dropped {}", generated.dataset.len(), generated.dropped);
    Ok(())
}
