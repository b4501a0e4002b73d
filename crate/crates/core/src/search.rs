//! Random hyper-parameter search with perplexity-based early stopping,
//! top-k selection and in-domain fine-tuning.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::augment::{assemble_backward_mix, assemble_training_mix, Upsamples};
use crate::corpus::{DataMix, Direction, Pair, Sentence, TaggedDataset};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::lm::NGramLM;
use crate::math::exp;
use crate::metrics;
use crate::par;
use crate::rerank::{translate_corpus, DecodeMode};
use crate::seed;
use crate::tm::{DecoderSettings, Ibm1, LexModel};

/// Finite value lists for every tunable knob.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub em_iterations: Vec<usize>,
    pub lm_order: Vec<usize>,
    pub lm_k: Vec<f64>,
    /// Interpolation weight of the in-domain component of the target LM.
    pub lm_adapt: Vec<f64>,
    pub lm_weight: Vec<f64>,
    pub window: Vec<usize>,
    pub beam: Vec<usize>,
    pub bitext_upsample: Vec<u32>,
    pub st_upsample: Vec<u32>,
    pub bt_upsample: Vec<u32>,
    pub seed: Vec<u64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            em_iterations: alloc::vec![4, 6, 8, 10],
            lm_order: alloc::vec![2, 3],
            lm_k: alloc::vec![0.005, 0.01, 0.05, 0.1],
            lm_adapt: alloc::vec![0.3, 0.5, 0.7],
            lm_weight: alloc::vec![0.2, 0.3, 0.5, 0.8, 1.0],
            window: alloc::vec![0, 1, 2],
            beam: alloc::vec![4, 8],
            bitext_upsample: alloc::vec![1, 2, 3, 4, 6, 8, 12, 16, 20, 32, 40, 64],
            st_upsample: alloc::vec![1, 2, 3, 4, 6, 8, 9],
            bt_upsample: alloc::vec![1, 2, 3, 4, 6, 8, 9],
            seed: (1..=30).collect(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let dims: [(&'static str, usize); 11] = [
            ("em_iterations", self.em_iterations.len()),
            ("lm_order", self.lm_order.len()),
            ("lm_k", self.lm_k.len()),
            ("lm_adapt", self.lm_adapt.len()),
            ("lm_weight", self.lm_weight.len()),
            ("window", self.window.len()),
            ("beam", self.beam.len()),
            ("bitext_upsample", self.bitext_upsample.len()),
            ("st_upsample", self.st_upsample.len()),
            ("bt_upsample", self.bt_upsample.len()),
            ("seed", self.seed.len()),
        ];
        for (name, len) in dims {
            if len == 0 {
                return Err(Error::EmptyDimension(name));
            }
        }
        if let Some(a) = self.lm_adapt.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidAlpha(*a));
        }
        Ok(())
    }
}

/// One point of the search space.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig {
    pub em_iterations: usize,
    pub lm_order: usize,
    pub lm_k: f64,
    pub lm_adapt: f64,
    pub lm_weight: f64,
    pub window: usize,
    pub beam: usize,
    pub upsamples: Upsamples,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            em_iterations: 8,
            lm_order: 3,
            lm_k: 0.01,
            lm_adapt: 0.5,
            lm_weight: 0.5,
            window: 1,
            beam: 5,
            upsamples: Upsamples { bitext: 3, st: 1, bt: 1 },
            seed: 1,
        }
    }
}

impl TrialConfig {
    pub fn decoder(&self) -> DecoderSettings {
        DecoderSettings { beam: self.beam, window: self.window, lm_weight: self.lm_weight, ..Default::default() }
    }
}

impl fmt::Display for TrialConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iters={} order={} k={} adapt={} lm_weight={} window={} beam={} up={}/{}/{} seed={}",
            self.em_iterations,
            self.lm_order,
            self.lm_k,
            self.lm_adapt,
            self.lm_weight,
            self.window,
            self.beam,
            self.upsamples.bitext,
            self.upsamples.st,
            self.upsamples.bt,
            self.seed
        )
    }
}

fn pick<T: Clone, R: Rng>(rng: &mut R, values: &[T]) -> T {
    values[rng.gen_range(0..values.len())].clone()
}

/// `n` configurations drawn uniformly per dimension. Config `i` depends only
/// on `(seed, i)`.
pub fn sample_configs(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<TrialConfig>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("number of configurations must be at least 1".into()));
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = seed::rng(seed, "config", i as u64);
            TrialConfig {
                em_iterations: pick(&mut rng, &space.em_iterations),
                lm_order: pick(&mut rng, &space.lm_order),
                lm_k: pick(&mut rng, &space.lm_k),
                lm_adapt: pick(&mut rng, &space.lm_adapt),
                lm_weight: pick(&mut rng, &space.lm_weight),
                window: pick(&mut rng, &space.window),
                beam: pick(&mut rng, &space.beam),
                upsamples: Upsamples {
                    bitext: pick(&mut rng, &space.bitext_upsample),
                    st: pick(&mut rng, &space.st_upsample),
                    bt: pick(&mut rng, &space.bt_upsample),
                },
                seed: pick(&mut rng, &space.seed),
            }
        })
        .collect())
}

/// Stops after `patience` consecutive checks without a new minimum.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: Option<usize>,
    best: f64,
    bad: usize,
}

impl EarlyStopper {
    /// `None` never stops.
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopper { patience, best: f64::INFINITY, bad: 0 }
    }

    /// Records a value; returns true when training should stop.
    pub fn observe(&mut self, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.bad = 0;
        } else {
            self.bad += 1;
        }
        self.patience.is_some_and(|p| self.bad >= p)
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug)]
pub struct TrialOptions {
    /// Early-stopping patience in perplexity checks; `None` disables stopping.
    pub patience: Option<usize>,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions { patience: Some(2) }
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub index: usize,
    pub config: TrialConfig,
    pub model: LexModel,
    /// Dev perplexity after each EM iteration.
    pub ppl_trace: Vec<f64>,
    /// 1-based iteration of the returned checkpoint.
    pub best_iteration: usize,
    pub bleu: f64,
}

/// `exp(-Σ [ln P_tm(y|x) + ln P_lm(y)] / Σ (|y| + 1))`, with the IBM Model 1
/// marginal as the translation term.
pub fn dev_perplexity(model: &LexModel, dev: &[Pair]) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let parts = par::map(dev, |p| {
        let y = p.target.untagged();
        let lp = model.log_marginal(&p.source, &y) + model.lm().logprob(&y);
        (lp, y.len() + 1)
    });
    let lp: f64 = parts.iter().map(|p| p.0).sum();
    let n: usize = parts.iter().map(|p| p.1).sum();
    Ok(exp(-lp / n as f64))
}

/// Dev BLEU of beam top-1 outputs.
pub fn dev_bleu(model: &dyn crate::tm::Translator, dev: &[Pair]) -> Result<f64> {
    let sources: Vec<Sentence> = dev.iter().map(|p| p.source.clone()).collect();
    let refs: Vec<Sentence> = dev.iter().map(|p| p.target.untagged()).collect();
    let hyps = translate_corpus(model, &sources, &DecodeMode::Beam)?;
    metrics::bleu(&hyps, &refs)
}

/// Untagged targets of a mix, each distinct pair once.
pub fn mix_targets(mix: &DataMix) -> Vec<Sentence> {
    mix.weighted_pairs().map(|(p, _)| p.target.untagged()).collect()
}

/// Trains one model on `mix` with the given target LM.
pub fn run_trial(
    index: usize,
    config: &TrialConfig,
    mix: &DataMix,
    lm: Arc<NGramLM>,
    dev: &[Pair],
    opts: &TrialOptions,
) -> Result<TrialResult> {
    let wrap = |e: Error| Error::Trial { index, config: format!("{config}"), source: alloc::boxed::Box::new(e) };
    if config.em_iterations == 0 {
        return Err(wrap(Error::InvalidIterations));
    }
    let settings = config.decoder();
    settings.validate().map_err(wrap)?;
    let mut em = Ibm1::new(mix.weighted_pairs()).map_err(wrap)?;
    let mut stopper = EarlyStopper::new(opts.patience);
    let mut trace = Vec::new();
    let mut best: Option<(usize, LexModel)> = None;
    for it in 1..=config.em_iterations {
        em.step();
        let model = em.to_model(mix.direction(), lm.clone(), settings.clone()).map_err(wrap)?;
        let ppl = dev_perplexity(&model, dev).map_err(wrap)?;
        let improved = ppl < stopper.best();
        trace.push(ppl);
        if improved || best.is_none() {
            best = Some((it, model));
        }
        if stopper.observe(ppl) {
            break;
        }
    }
    let (best_iteration, model) = best.ok_or_else(|| wrap(Error::InvalidIterations))?;
    let bleu = dev_bleu(&model, dev).map_err(wrap)?;
    Ok(TrialResult { index, config: config.clone(), model, ppl_trace: trace, best_iteration, bleu })
}

/// Training data for one search direction, given in the forward orientation.
#[derive(Clone, Copy)]
pub struct SearchData<'a> {
    pub bitext: &'a TaggedDataset,
    pub st: Option<&'a TaggedDataset>,
    pub bt: Option<&'a TaggedDataset>,
    /// Forward-orientation dev pairs.
    pub dev: &'a [Pair],
    pub direction: Direction,
}

impl SearchData<'_> {
    pub fn mix(&self, up: Upsamples) -> Result<DataMix> {
        match self.direction {
            Direction::Forward => assemble_training_mix(self.bitext, self.st, self.bt, up),
            Direction::Backward => assemble_backward_mix(self.bitext, self.st, self.bt, up),
        }
    }

    /// Untagged sentences on the output side of the models being trained.
    fn output_side(&self, d: &TaggedDataset) -> Vec<Sentence> {
        match self.direction {
            Direction::Forward => d.target_side(),
            Direction::Backward => d.source_side(),
        }
        .iter()
        .map(Sentence::untagged)
        .collect()
    }

    fn has_synthetic(&self) -> bool {
        self.st.is_some_and(|d| !d.is_empty()) || self.bt.is_some_and(|d| !d.is_empty())
    }

    /// Dev pairs oriented like the models being trained.
    pub fn oriented_dev(&self) -> Vec<Pair> {
        match self.direction {
            Direction::Forward => self.dev.to_vec(),
            Direction::Backward => {
                self.dev.iter().map(|p| Pair::new(p.target.untagged(), p.source.untagged())).collect()
            }
        }
    }
}

/// Target LM of one trial: trained on the mix's output side with upsampling
/// weights and, when synthetic data is present, interpolated with weight
/// `lm_adapt` towards the weighted in-domain part (bitext and self-training).
pub fn trial_lm(data: &SearchData<'_>, mix: &DataMix, config: &TrialConfig) -> Result<NGramLM> {
    let targets: Vec<(Sentence, u32)> = mix.weighted_pairs().map(|(p, w)| (p.target.untagged(), w)).collect();
    let lm = NGramLM::train_weighted(targets.iter().map(|(s, w)| (s, *w)), config.lm_order, config.lm_k)?;
    if !data.has_synthetic() {
        return Ok(lm);
    }
    let up = config.upsamples;
    let mut in_domain: Vec<(Sentence, u32)> =
        data.output_side(data.bitext).into_iter().map(|s| (s, up.bitext)).collect();
    if let Some(st) = data.st {
        in_domain.extend(data.output_side(st).into_iter().map(|s| (s, up.st)));
    }
    lm.finetune_weighted(in_domain.iter().map(|(s, w)| (s, *w)), config.lm_adapt)
}

/// Samples `n` configurations and runs them. Results are in trial order and
/// do not depend on scheduling.
pub fn run_search(
    space: &SearchSpace,
    n: usize,
    seed: u64,
    data: &SearchData<'_>,
    opts: &TrialOptions,
) -> Result<Vec<TrialResult>> {
    let configs = sample_configs(space, n, seed)?;
    run_configs(&configs, data, opts)
}

pub fn run_configs(configs: &[TrialConfig], data: &SearchData<'_>, opts: &TrialOptions) -> Result<Vec<TrialResult>> {
    let dev = data.oriented_dev();
    par::map_range(configs.len(), |i| {
        let c = &configs[i];
        let mix = data.mix(c.upsamples)?;
        let lm = trial_lm(data, &mix, c)?;
        run_trial(i, c, &mix, Arc::new(lm), &dev, opts)
    })
    .into_iter()
    .collect()
}

/// Indices of the `k` best results by BLEU; ties go to the lower index.
pub fn top_k_indices(results: &[TrialResult], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > results.len() {
        return Err(Error::TopKTooLarge { k, available: results.len() });
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].bleu.total_cmp(&results[a].bleu).then(results[a].index.cmp(&results[b].index)));
    order.truncate(k);
    Ok(order)
}

pub fn select_top_k(results: &[TrialResult], k: usize) -> Result<Ensemble> {
    let idx = top_k_indices(results, k)?;
    Ensemble::new(idx.into_iter().map(|i| results[i].model.clone()).collect())
}

#[derive(Clone, Debug)]
pub struct FinetuneOptions {
    /// Strength of the prior pulling the table towards the input model.
    pub prior: f64,
    /// Per-step LM interpolation weight towards in-domain counts; after `s`
    /// steps the weight is `1 - (1 - alpha)^s`.
    pub lm_alpha: f64,
}

impl Default for FinetuneOptions {
    fn default() -> Self {
        FinetuneOptions { prior: 5.0, lm_alpha: 0.2 }
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneResult {
    pub model: LexModel,
    /// Selected step; 0 is the input model.
    pub step: usize,
    /// Dev BLEU of every checkpoint, starting with step 0.
    pub bleu_trace: Vec<f64>,
}

impl FinetuneResult {
    pub fn bleu(&self) -> f64 {
        self.bleu_trace[self.step]
    }
}

/// Continues EM on in-domain data and returns the checkpoint with the
/// highest dev BLEU (the input model competes as step 0).
pub fn finetune(
    model: &LexModel,
    in_domain: &TaggedDataset,
    dev: &[Pair],
    max_steps: usize,
    opts: &FinetuneOptions,
) -> Result<FinetuneResult> {
    if in_domain.pairs().is_empty() {
        return Err(Error::NoParallelData);
    }
    let mut best = (0usize, model.clone());
    let mut trace = alloc::vec![dev_bleu(model, dev)?];
    if max_steps == 0 {
        return Ok(FinetuneResult { model: best.1, step: 0, bleu_trace: trace });
    }
    let tagged = in_domain.apply_tag();
    let weighted = tagged.pairs().iter().map(|p| (p, in_domain.upsample()));
    let mut em = Ibm1::with_prior(weighted, model, opts.prior)?;
    let in_targets: Vec<Sentence> = tagged.pairs().iter().map(|p| p.target.untagged()).collect();
    for step in 1..=max_steps {
        em.step();
        let alpha = 1.0 - libm::pow(1.0 - opts.lm_alpha, step as f64);
        let lm = Arc::new(model.lm().finetune(&in_targets, alpha)?);
        let candidate = em
            .to_model(model.direction(), lm, model.settings().clone())?
            .with_tag_bias(model.tag_bias().clone());
        let b = dev_bleu(&candidate, dev)?;
        if b > trace[best.0] {
            best = (step, candidate);
        }
        trace.push(b);
    }
    Ok(FinetuneResult { model: best.1, step: best.0, bleu_trace: trace })
}

/// Short label for logs.
pub fn describe(result: &TrialResult) -> String {
    format!("trial {} bleu={:.2} best_iter={} [{}]", result.index, result.bleu, result.best_iteration, result.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopper_traces() {
        let mut s = EarlyStopper::new(Some(1));
        assert!(!s.observe(10.0));
        assert!(s.observe(11.0));
        let mut s = EarlyStopper::new(Some(2));
        assert!(!s.observe(10.0));
        assert!(!s.observe(9.0));
        assert!(!s.observe(9.5));
        assert!(!s.observe(8.0));
        assert!(!s.observe(8.0));
        assert!(s.observe(8.5));
        let mut s = EarlyStopper::new(None);
        for i in 0..100 {
            assert!(!s.observe(i as f64));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_validated() {
        let space = SearchSpace::default();
        assert_eq!(sample_configs(&space, 30, 5).unwrap(), sample_configs(&space, 30, 5).unwrap());
        assert_ne!(sample_configs(&space, 30, 5).unwrap(), sample_configs(&space, 30, 6).unwrap());
        let mut bad = space.clone();
        bad.window.clear();
        assert_eq!(sample_configs(&bad, 1, 0), Err(Error::EmptyDimension("window")));
    }

    #[test]
    fn singleton_space_gives_unique_config() {
        let space = SearchSpace {
            em_iterations: alloc::vec![3],
            lm_order: alloc::vec![2],
            lm_k: alloc::vec![0.1],
            lm_adapt: alloc::vec![0.5],
            lm_weight: alloc::vec![0.5],
            window: alloc::vec![0],
            beam: alloc::vec![2],
            bitext_upsample: alloc::vec![3],
            st_upsample: alloc::vec![1],
            bt_upsample: alloc::vec![2],
            seed: alloc::vec![7],
        };
        let c = sample_configs(&space, 1, 99).unwrap();
        assert_eq!(c[0].upsamples, Upsamples { bitext: 3, st: 1, bt: 2 });
        assert_eq!((c[0].em_iterations, c[0].seed), (3, 7));
    }

    #[test]
    fn prefix_of_sample_is_stable() {
        let space = SearchSpace::default();
        let long = sample_configs(&space, 10, 3).unwrap();
        let short = sample_configs(&space, 4, 3).unwrap();
        assert_eq!(&long[..4], &short[..]);
    }
}
