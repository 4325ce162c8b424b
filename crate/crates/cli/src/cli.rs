//! Command line definitions and the file-level pipelines behind them.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use verbspace::annotations::{
    aggregate_scores, bundle_from_soft, convert_score_table, load_annotations, relevant_set,
    save_annotations, DEFAULT_ALPHA,
};
use verbspace::dataset::{parse_manifest, resolve_bundles, synthesize, SynthSpec};
use verbspace::metrics::{alpha_sweep, default_alpha_grid, multilabel_accuracy, rmse_by_verb_type};
use verbspace::model::{train, Checkpoint, Scheme, TrainConfig};
use verbspace::retrieval::{
    text_to_video_lemmas, text_to_video_sweep, video_to_text, video_to_text_ap, video_to_video,
    IndexEntry, QueryScoring, RetrievalResult, MAX_QUERY_VERBS,
};
use verbspace::{Dataset, LabelBundle, VerbSpaceIndex, VerbVocabulary, VnClassList};

use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "verbspace", version, about = "Multi-verb labels: aggregation, training, evaluation and retrieval")]
pub struct Cli {
    /// Root for relative paths.
    #[arg(long, env = "VERBSPACE_DATA_DIR", global = true)]
    pub data_dir: Option<PathBuf>,
    /// Vocabulary file (`lemma,Manner|Result` per line); defaults to the built-in 90 verbs.
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a per-video score table into an annotation file.
    Convert(ConvertArgs),
    /// Aggregate annotations into label bundles.
    Aggregate(AggregateArgs),
    /// Write a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train a verb-score network and write a checkpoint.
    Train(TrainArgs),
    /// Score recognition and retrieval on a dataset.
    Eval(EvalArgs),
    /// Predict scores for one or more datasets and write an index.
    BuildIndex(BuildIndexArgs),
    /// Write an index as a score table.
    ExportScores(ExportArgs),
    /// Query an index.
    #[command(subcommand)]
    Retrieve(RetrieveCommand),
    /// Multi-label accuracy over a grid of relevance thresholds.
    SweepAlpha(SweepArgs),
    /// Serve an index over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Table with header `video_id,annotators,<lemma>...` and normalised scores.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Annotation file (.csv or .json).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Maps videos to annotated actions; one bundle per annotation set without it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub vn_classes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub verbs: usize,
    #[arg(long, default_value_t = 200)]
    pub videos: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic")]
    pub dataset_id: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Which videos a command trains or evaluates on.
#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Hold out this fold of a stratified split; uses every video when absent.
    #[arg(long)]
    pub holdout_fold: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with manifest.csv, annotations.csv and features.csv.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_scheme, default_value = "SAMV")]
    pub scheme: Scheme,
    /// JSON training configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub vn_classes: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-epoch loss table.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Where predicted scores come from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScoreSource {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub source: ScoreSource,
    /// Label scheme of the ground truth; defaults to the checkpoint's, or SAMV.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub vn_classes: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// Dataset directory; repeat to index several datasets together.
    #[arg(long, required = true)]
    pub dataset: Vec<PathBuf>,
    #[arg(long, required_unless_present = "oracle_scores", conflicts_with = "oracle_scores")]
    pub checkpoint: Option<PathBuf>,
    /// Use the ground-truth soft labels as scores (a perfect predictor).
    #[arg(long)]
    pub oracle_scores: bool,
    /// Leave ground-truth bundles out of the index.
    #[arg(long)]
    pub no_gt: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scoring {
    Min,
    Mean,
}

impl From<Scoring> for QueryScoring {
    fn from(s: Scoring) -> Self {
        match s {
            Scoring::Min => QueryScoring::Min,
            Scoring::Mean => QueryScoring::Mean,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum RetrieveCommand {
    /// Rank verbs for one video.
    V2t {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank videos for a verb query.
    T2v {
        #[arg(long)]
        index: PathBuf,
        /// Comma-separated lemmas; hyphens stand for spaces (`turn-off`).
        #[arg(long, value_delimiter = ',', required = true)]
        verbs: Vec<String>,
        #[arg(long, value_enum, default_value = "min")]
        scoring: Scoring,
        #[arg(long, default_value_t = service::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank videos by similarity to one video.
    V2v {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        video: String,
        /// Only rank videos from other datasets.
        #[arg(long)]
        cross_dataset: bool,
        #[arg(long, default_value_t = service::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub source: ScoreSource,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Two-column `alpha,accuracy` table.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Allowed CORS origin; repeatable.
    #[arg(long = "cors-origin")]
    pub cors_origins: Vec<String>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: verbspace::Error| e.to_string())
}

/// Label bundles with the vocabulary they index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    pub format: String,
    pub version: u32,
    pub vocab_fingerprint: String,
    pub bundles: Vec<LabelBundle>,
}

impl BundleFile {
    pub const FORMAT: &'static str = "verbspace-bundles";

    pub fn new(vocab: &VerbVocabulary, bundles: Vec<LabelBundle>) -> Self {
        Self {
            format: Self::FORMAT.into(),
            version: 1,
            vocab_fingerprint: vocab.fingerprint(),
            bundles,
        }
    }
}

struct Env {
    root: Option<PathBuf>,
    vocab: Option<PathBuf>,
}

impl Env {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// The `--vocab` file, else `<dir>/vocab.csv` when present, else the built-in list.
    fn vocab_for(&self, dir: Option<&Path>) -> anyhow::Result<VerbVocabulary> {
        if let Some(p) = &self.vocab {
            return Ok(VerbVocabulary::load(self.path(p))?);
        }
        if let Some(local) = dir.map(|d| d.join("vocab.csv")).filter(|p| p.exists()) {
            return Ok(VerbVocabulary::load(local)?);
        }
        Ok(VerbVocabulary::default_verbs())
    }

    fn vn_classes(&self, p: Option<&PathBuf>) -> anyhow::Result<Option<VnClassList>> {
        p.map(|p| VnClassList::load(self.path(p)).map_err(Into::into)).transpose()
    }

    fn dataset(&self, dir: &Path, vn: Option<&VnClassList>) -> anyhow::Result<(VerbVocabulary, Dataset)> {
        let dir = self.path(dir);
        let vocab = self.vocab_for(Some(&dir))?;
        let ds = Dataset::load_dir(&dir, &vocab, vn)
            .with_context(|| format!("loading dataset {}", dir.display()))?;
        Ok((vocab, ds))
    }

    /// An index, checked against `--vocab` when one is given.
    fn index(&self, p: &Path) -> anyhow::Result<VerbSpaceIndex> {
        let p = self.path(p);
        let index = match &self.vocab {
            Some(v) => VerbSpaceIndex::load_for(&p, &VerbVocabulary::load(self.path(v))?)?,
            None => VerbSpaceIndex::load(&p)?,
        };
        Ok(index)
    }

    fn write(&self, p: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let p = self.path(p);
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}

fn split_rows(ds: &Dataset, split: &SplitArgs, holdout: bool) -> anyhow::Result<Vec<usize>> {
    let Some(fold) = split.holdout_fold else {
        return Ok((0..ds.len()).collect());
    };
    let folds = ds.stratified_kfold(split.folds, split.split_seed)?;
    for w in &folds.warnings {
        log::warn!("{w}");
    }
    if fold >= folds.k() {
        bail!("holdout fold {fold} outside 0..{}", folds.k());
    }
    Ok(if holdout { folds.test_indices(fold) } else { folds.train_indices(fold) })
}

/// Predicted scores for `rows`, from a checkpoint or an index.
fn predictions(
    env: &Env,
    source: &ScoreSource,
    vocab: &VerbVocabulary,
    ds: &Dataset,
    rows: &[usize],
) -> anyhow::Result<(Vec<Vec<f64>>, Option<Scheme>)> {
    if let Some(p) = &source.checkpoint {
        let ckpt = Checkpoint::load(env.path(p), vocab)?;
        let model = ckpt.model::<f64>();
        let preds = rows
            .iter()
            .map(|&i| model.predict(&ds.features[i]).map(|p| p.scores))
            .collect::<verbspace::Result<Vec<_>>>()?;
        return Ok((preds, Some(ckpt.scheme)));
    }
    let p = source.index.as_ref().expect("clap requires one source");
    let index = VerbSpaceIndex::load_for(env.path(p), vocab)?;
    let preds = rows
        .iter()
        .map(|&i| {
            let id = &ds.records[i].video_id;
            index
                .get(id)
                .map(|e| e.scores.clone())
                .ok_or_else(|| anyhow!("video `{id}` is not in the index"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((preds, None))
}

/// Ground-truth sets for `scheme`; SAMV uses the relevant set at `alpha`.
fn ground_truth(bundle: &LabelBundle, scheme: Scheme, alpha: f64) -> anyhow::Result<BTreeSet<usize>> {
    Ok(match scheme {
        Scheme::SV => BTreeSet::from([bundle.sv]),
        Scheme::VN => BTreeSet::from([bundle
            .vn
            .ok_or_else(|| anyhow!("video `{}` has no VN class", bundle.video_id))?]),
        Scheme::MV => bundle.mv.ones(),
        Scheme::SAMV => relevant_set(&bundle.samv, alpha),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

/// Runs one command and returns its one-line summary.
pub fn run(cli: Cli) -> anyhow::Result<String> {
    let env = Env { root: cli.data_dir, vocab: cli.vocab };
    match cli.command {
        Command::Convert(a) => convert(&env, a),
        Command::Aggregate(a) => aggregate(&env, a),
        Command::Synth(a) => synth(&env, a),
        Command::Train(a) => train_cmd(&env, a),
        Command::Eval(a) => eval(&env, a),
        Command::BuildIndex(a) => build_index(&env, a),
        Command::ExportScores(a) => {
            let index = env.index(&a.index)?;
            let out = env.write(&a.out, index.to_score_csv())?;
            Ok(format!("exported {} score vectors to {}", index.len(), out.display()))
        }
        Command::Retrieve(r) => retrieve(&env, r),
        Command::SweepAlpha(a) => sweep(&env, a),
        Command::Serve(a) => serve(&env, a),
    }
}

fn convert(env: &Env, a: ConvertArgs) -> anyhow::Result<String> {
    let vocab = env.vocab_for(None)?;
    let path = env.path(&a.scores);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let sets = convert_score_table(&text, &vocab)?;
    let responses: usize = sets.iter().map(|s| s.annotator_count()).sum();
    let out = env.path(&a.out);
    save_annotations(&out, &sets, &vocab)?;
    Ok(format!(
        "converted {} videos ({responses} responses) to {}",
        sets.len(),
        out.display()
    ))
}

fn aggregate(env: &Env, a: AggregateArgs) -> anyhow::Result<String> {
    let vocab = env.vocab_for(None)?;
    let sets = load_annotations(env.path(&a.annotations), &vocab)?;
    if sets.is_empty() {
        bail!("no annotations in {}", env.path(&a.annotations).display());
    }
    let vn = env.vn_classes(a.vn_classes.as_ref())?;
    let bundles = match &a.manifest {
        Some(m) => {
            let p = env.path(m);
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            resolve_bundles(&parse_manifest(&text)?, &sets, &vocab, vn.as_ref())?
        }
        None => sets
            .iter()
            .map(|s| bundle_from_soft(s.video_id.clone(), aggregate_scores(s, &vocab)?, None))
            .collect::<verbspace::Result<Vec<_>>>()?,
    };
    let n = bundles.len();
    let file = BundleFile::new(&vocab, bundles);
    let out = env.write(&a.out, serde_json::to_string_pretty(&file)?)?;
    Ok(format!(
        "aggregated {n} bundles from {} annotation sets to {}",
        sets.len(),
        out.display()
    ))
}

fn synth(env: &Env, a: SynthArgs) -> anyhow::Result<String> {
    let spec = SynthSpec {
        verbs: a.verbs,
        videos: a.videos,
        noise: a.noise,
        seed: a.seed,
        ..Default::default()
    };
    let corpus = synthesize::<f64>(&spec)?;
    let dir = env.path(&a.out);
    corpus.to_dataset(&a.dataset_id).save(&dir, &corpus.vocab)?;
    corpus.vocab.save(dir.join("vocab.csv"))?;
    Ok(format!(
        "synthesized {} videos over {} verbs ({} actions) in {}",
        a.videos,
        a.verbs,
        corpus.actions.len(),
        dir.display()
    ))
}

fn train_cmd(env: &Env, a: TrainArgs) -> anyhow::Result<String> {
    let vn = env.vn_classes(a.vn_classes.as_ref())?;
    let (vocab, ds) = env.dataset(&a.dataset, vn.as_ref())?;
    let mut cfg = match &a.config {
        Some(p) => {
            let p = env.path(p);
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(h) = a.hidden {
        cfg.hidden = h;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.momentum {
        cfg.momentum = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(list) = &vn {
        cfg.vn_classes = Some(list.len());
    }
    let rows = split_rows(&ds, &a.split, false)?;
    let outcome = train(&ds.pairs(&rows), a.scheme, &cfg)?;
    let final_loss = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    if let Some(r) = &a.report {
        let mut table = String::from("epoch,loss\n");
        for (e, l) in outcome.epoch_losses.iter().enumerate() {
            table.push_str(&format!("{},{l}\n", e + 1));
        }
        env.write(r, table)?;
    }
    let ckpt = Checkpoint::new(&outcome.model, a.scheme, &vocab, cfg.clone());
    let out = env.write(&a.out, ckpt.to_json()?)?;
    Ok(format!(
        "trained {} on {} videos for {} epochs, final loss {final_loss:.6}, checkpoint {}",
        a.scheme,
        rows.len(),
        cfg.epochs,
        out.display()
    ))
}

fn eval(env: &Env, a: EvalArgs) -> anyhow::Result<String> {
    let vn = env.vn_classes(a.vn_classes.as_ref())?;
    let (vocab, ds) = env.dataset(&a.dataset, vn.as_ref())?;
    let rows = split_rows(&ds, &a.split, true)?;
    let (preds, ckpt_scheme) = predictions(env, &a.source, &vocab, &ds, &rows)?;
    let scheme = a.scheme.or(ckpt_scheme).unwrap_or(Scheme::SAMV);

    let mut kept_preds = Vec::new();
    let mut kept_gts = Vec::new();
    for (&i, p) in rows.iter().zip(&preds) {
        let gt = ground_truth(&ds.bundles[i], scheme, a.alpha)?;
        if !gt.is_empty() {
            kept_preds.push(p.clone());
            kept_gts.push(gt);
        }
    }
    if kept_gts.is_empty() {
        bail!("no evaluated video has a nonempty ground-truth set");
    }
    let excluded = rows.len() - kept_gts.len();
    let accuracy = multilabel_accuracy(&kept_preds, &kept_gts)?.with_scheme(scheme);
    let mut report = json!({
        "scheme": scheme,
        "alpha": a.alpha,
        "videos": rows.len(),
        "excluded": excluded,
        "accuracy": accuracy,
    });

    // Verb-space metrics only apply when the outputs are per-verb scores.
    if preds.first().map(Vec::len) == Some(vocab.len()) {
        let softs: Vec<_> = rows.iter().map(|&i| ds.bundles[i].samv.clone()).collect();
        let (manner, result): (f64, f64) = rmse_by_verb_type(&preds, &softs, &vocab)?;
        let relevant: Vec<BTreeSet<usize>> = softs.iter().map(|s| relevant_set(s, a.alpha)).collect();
        let v2t = verbspace::retrieval::video_to_text_map(&preds, &relevant)?;
        let entries = rows
            .iter()
            .zip(&preds)
            .map(|(&i, p)| IndexEntry {
                video_id: ds.records[i].video_id.clone(),
                dataset_id: ds.records[i].dataset_id.clone(),
                scores: p.clone(),
                gt: None,
            })
            .collect();
        let index = VerbSpaceIndex::new(vocab.clone(), entries)?;
        let sizes: Vec<usize> = (1..=MAX_QUERY_VERBS).collect();
        let t2v = text_to_video_sweep(&index, &relevant, &sizes, QueryScoring::Min)?;
        report["rmse"] = json!({ "manner": manner, "result": result });
        report["video_to_text"] = serde_json::to_value(&v2t)?;
        report["text_to_video"] = serde_json::to_value(&t2v)?;
    }
    let out = env.write(&a.out, serde_json::to_string_pretty(&report)?)?;
    Ok(format!(
        "{scheme} accuracy {:.4} over {} videos ({excluded} excluded, alpha {}), report {}",
        accuracy.mean,
        accuracy.counted,
        a.alpha,
        out.display()
    ))
}

fn build_index(env: &Env, a: BuildIndexArgs) -> anyhow::Result<String> {
    let mut vocab: Option<VerbVocabulary> = None;
    let mut entries = Vec::new();
    let mut model = None;
    for dir in &a.dataset {
        let (v, ds) = env.dataset(dir, None)?;
        match &vocab {
            Some(existing) if existing != &v => {
                bail!("dataset {} uses a different vocabulary", dir.display())
            }
            Some(_) => {}
            None => {
                if let Some(p) = &a.checkpoint {
                    model = Some(Checkpoint::load(env.path(p), &v)?.model::<f64>());
                }
                vocab = Some(v);
            }
        }
        for (i, r) in ds.records.iter().enumerate() {
            let bundle = &ds.bundles[i];
            let scores = match &model {
                Some(m) => m.predict(&ds.features[i])?.scores,
                None => bundle.samv.scores(),
            };
            entries.push(IndexEntry {
                video_id: r.video_id.clone(),
                dataset_id: r.dataset_id.clone(),
                scores,
                gt: (!a.no_gt).then(|| bundle.clone()),
            });
        }
    }
    let vocab = vocab.expect("at least one dataset");
    let index = VerbSpaceIndex::new(vocab, entries)?;
    let out = env.path(&a.out);
    index.save(&out)?;
    Ok(format!(
        "indexed {} videos from {} datasets ({} scores) to {}",
        index.len(),
        index.datasets().len(),
        if a.oracle_scores { "ground-truth" } else { "predicted" },
        out.display()
    ))
}

fn write_result(env: &Env, out: Option<&PathBuf>, value: &impl Serialize) -> anyhow::Result<()> {
    if let Some(p) = out {
        env.write(p, serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn summarize(result: &RetrievalResult<f64>, offset: usize, limit: usize) -> String {
    let page = result.page(offset, limit);
    let shown: Vec<String> = page.iter().take(5).map(|r| format!("{} ({:.4})", r.id, r.score)).collect();
    format!("{} of {} results: {}", page.len(), result.items.len(), shown.join(", "))
}

fn retrieve(env: &Env, cmd: RetrieveCommand) -> anyhow::Result<String> {
    match cmd {
        RetrieveCommand::V2t { index, video, alpha, out } => {
            let index = env.index(&index)?;
            let entry = index.get(&video).ok_or_else(|| anyhow!("unknown video `{video}`"))?;
            let order = video_to_text(&entry.scores);
            let ranked: Vec<_> = order
                .iter()
                .map(|&j| json!({ "verb": index.vocab().verb(j), "score": entry.scores[j] }))
                .collect();
            let ap = match &entry.gt {
                Some(gt) => {
                    let rel = relevant_set(&gt.samv, alpha);
                    (!rel.is_empty()).then(|| video_to_text_ap(&entry.scores, &rel)).transpose()?
                }
                None => None,
            };
            write_result(env, out.as_ref(), &json!({ "video_id": video, "verbs": ranked, "ap": ap }))?;
            let top: Vec<&str> = order.iter().take(3).filter_map(|&j| index.vocab().verb(j)).collect();
            Ok(format!("v2t {video}: top verbs {}; AP {}", top.join(", "), fmt_opt(ap)))
        }
        RetrieveCommand::T2v { index, verbs, scoring, limit, offset, out } => {
            let index = env.index(&index)?;
            let result = text_to_video_lemmas(&index, &verbs, scoring.into())?;
            write_page(env, out.as_ref(), &result, offset, limit)?;
            Ok(format!("t2v [{}]: {}", verbs.join(", "), summarize(&result, offset, limit)))
        }
        RetrieveCommand::V2v { index, video, cross_dataset, limit, offset, out } => {
            let index = env.index(&index)?;
            let result = video_to_video(&index, &video, cross_dataset)?;
            write_page(env, out.as_ref(), &result, offset, limit)?;
            Ok(format!("v2v {video}: {}", summarize(&result, offset, limit)))
        }
    }
}

fn write_page(
    env: &Env,
    out: Option<&PathBuf>,
    result: &RetrievalResult<f64>,
    offset: usize,
    limit: usize,
) -> anyhow::Result<()> {
    let page = RetrievalResult {
        query: result.query.clone(),
        items: result.page(offset, limit).to_vec(),
    };
    write_result(env, out, &page)
}

fn sweep(env: &Env, a: SweepArgs) -> anyhow::Result<String> {
    let (vocab, ds) = env.dataset(&a.dataset, None)?;
    let rows = split_rows(&ds, &a.split, true)?;
    let (preds, _) = predictions(env, &a.source, &vocab, &ds, &rows)?;
    let softs: Vec<_> = rows.iter().map(|&i| ds.bundles[i].samv.clone()).collect();
    let curve = alpha_sweep::<f64, _>(&preds, &softs, &default_alpha_grid())?;
    let empty = curve.points.iter().filter(|p| p.is_empty()).count();
    let out = env.write(&a.out, curve.to_plot_table())?;
    let at: HashMap<String, Option<f64>> = curve
        .points
        .iter()
        .map(|p| (format!("{:.2}", p.alpha), p.accuracy))
        .collect();
    Ok(format!(
        "alpha sweep over {} videos: {} points ({empty} empty), accuracy at 0.30 {}, table {}",
        rows.len(),
        curve.points.len(),
        fmt_opt(at.get("0.30").copied().flatten()),
        out.display()
    ))
}

fn serve(env: &Env, a: ServeArgs) -> anyhow::Result<String> {
    let index = VerbSpaceIndex::load(env.path(&a.index))?;
    let vocab = env.vocab_for(None)?;
    service::check_fingerprint(&index, &vocab)?;
    let cfg = ServiceConfig { bind: a.bind, cors_origins: a.cors_origins };
    let videos = index.len();
    tokio::runtime::Runtime::new()?.block_on(service::serve(index, &vocab, &cfg))?;
    Ok(format!("served {videos} videos"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_tree_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn verbs_split_on_commas() {
        let cli = Cli::try_parse_from(["verbspace", "retrieve", "t2v", "--index", "i.json", "--verbs", "turn-off,rotate"])
            .unwrap();
        match cli.command {
            Command::Retrieve(RetrieveCommand::T2v { verbs, limit, .. }) => {
                assert_eq!(verbs, ["turn-off", "rotate"]);
                assert_eq!(limit, service::DEFAULT_LIMIT);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn eval_needs_exactly_one_score_source() {
        let base = ["verbspace", "eval", "--dataset", "d", "--out", "r.json"];
        assert!(Cli::try_parse_from(base).is_err());
        let both = [&base[..], &["--checkpoint", "c", "--index", "i"]].concat();
        assert!(Cli::try_parse_from(both).is_err());
    }

    #[test]
    fn scheme_names_are_case_insensitive() {
        assert_eq!(parse_scheme("samv").unwrap(), Scheme::SAMV);
        assert!(parse_scheme("nope").is_err());
    }

    #[test]
    fn relative_paths_resolve_under_data_dir() {
        let env = Env { root: Some("/data".into()), vocab: None };
        assert_eq!(env.path(Path::new("beoid/x.csv")), PathBuf::from("/data/beoid/x.csv"));
        assert_eq!(env.path(Path::new("/abs.csv")), PathBuf::from("/abs.csv"));
    }
}
