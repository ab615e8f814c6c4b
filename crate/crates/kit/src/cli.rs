//! The `bright-kit` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use bright_core::augment::mock::{MockPorts, MockTextVerifier};
use bright_core::augment::{crawl_query, generate_valid_images, GenerationBudget, RunStatus};
use bright_core::balancer::{build_splits, fill_deficits, Audit, BalanceConfig, Deficits};
use bright_core::eval::{
    evaluate, perturb_tp_flip, ranking_shift, EvalReport, FlipOutcome, FlipTarget, MatchConfig, RankShift,
};
use bright_core::rng::derive_seed;
use bright_core::stats::{self, RatioRow, SplitMedians};
use bright_core::synth::{self, PredictionSpec, RandomPoolSpec};
use bright_core::zeroshot::{self, ZeroShotPlan, ZeroShotWarning};
use bright_core::{ClassId, Dataset, HoiClass, Provenance, Vocabulary};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, required, RunConfig};
use crate::error::{KitError, KitResult};
use crate::http_ports::HttpPorts;
use crate::io::{self, Artifacts, DatasetFile, Meta, VocabArtifact};

#[derive(Debug, Parser)]
#[command(
    name = "bright-kit",
    version,
    about = "Class-balanced HOI splits and per-class evaluation"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random decision (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-class instance counts, head-to-tail order, split ratios.
    Stats(StatsArgs),
    /// Test-first balanced train/test splits.
    Balance(BalanceArgs),
    /// Merge augmented images into a train split to close its deficits.
    Fill(FillArgs),
    /// Balanced split of unseen verb-object compositions.
    Zeroshot(ZeroShotArgs),
    /// Generate and verify images for deficit classes.
    Augment(AugmentArgs),
    /// Web search queries for classes.
    CrawlQueries(CrawlArgs),
    /// Per-class AP and mAP of a prediction dump.
    Evaluate(EvaluateArgs),
    /// AP change when one true positive turns into a false positive.
    Perturb(PerturbArgs),
    /// Ranking shift between two sets of model scores.
    Compare(CompareArgs),
    /// Seeded synthetic vocabulary, pool and predictions.
    Synth(SynthArgs),
    /// Convert HICO-DET JSON annotations to the toolkit schema.
    ImportHico(ImportArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Without a vocabulary only classes present in the pool are reported.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    /// Count zero-instance classes in min and median.
    #[arg(long)]
    include_zero: bool,
    /// Print the report instead when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Balance the K classes with the most instances.
    #[arg(long)]
    top_k: Option<usize>,
    /// Balance exactly these classes instead of the top K.
    #[arg(long, conflicts_with = "top_k")]
    classes: Option<PathBuf>,
    #[arg(long)]
    l_test: Option<usize>,
    #[arg(long)]
    l_train: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FillArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    deficits: PathBuf,
    #[arg(long)]
    augmented: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ZeroShotArgs {
    /// Classes of the balanced splits.
    #[arg(long)]
    seen: PathBuf,
    /// Full class list the pool is annotated with.
    #[arg(long)]
    universe: PathBuf,
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Datasets whose images may not be reused (e.g. test.json train.json).
    #[arg(long, num_args = 1..)]
    exclude: Vec<PathBuf>,
    #[arg(long)]
    instances_per_class: Option<usize>,
    #[arg(long)]
    class_budget: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PortsKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    deficits: PathBuf,
    /// Real images to draw reference images from.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Generation attempts per class.
    #[arg(long)]
    budget: Option<usize>,
    /// `per-deficit` or a fixed count of valid images per class.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum)]
    ports: Option<PortsKind>,
    /// Base URL of the HTTP services.
    #[arg(long)]
    endpoint: Option<String>,
    /// Mock text verifier: accept, reject or period:N.
    #[arg(long)]
    mock_verifier: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrawlArgs {
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Only the classes of this deficits file.
    #[arg(long)]
    deficits: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApMethodArg {
    AllPoint,
    ElevenPoint,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    iou: Option<f64>,
    #[arg(long, value_enum)]
    ap_method: Option<ApMethodArg>,
    /// Name recorded in the report; defaults to the prediction file stem.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Classes to perturb; every class with a true positive when absent.
    #[arg(long = "class", num_args = 1..)]
    classes: Vec<ClassId>,
    /// Flip the lowest-scored true positive instead of the highest.
    #[arg(long)]
    lowest: bool,
    #[arg(long)]
    iou: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory of evaluate reports, or a JSON map of model to mAP.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Small long-tailed pool with random co-occurrence.
    Random,
    /// Large pool over a supplied vocabulary, shaped like a full benchmark.
    Benchmark,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "random")]
    kind: SynthKind,
    /// Required for `benchmark`; a grid vocabulary is generated otherwise.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    classes: u32,
    #[arg(long, default_value_t = 120)]
    images: usize,
    #[arg(long, default_value_t = 4)]
    max_classes_per_image: usize,
    #[arg(long, default_value_t = 0.7)]
    recall: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// One or more annotation files (e.g. trainval_hico.json test_hico.json).
    #[arg(long, num_args = 1.., required = true)]
    anno: Vec<PathBuf>,
    /// `hico_list_hoi.txt`.
    #[arg(long)]
    hoi_list: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value = "hico-det")]
    vocabulary_ref: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code. Errors
/// go to stderr as JSON.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{e}");
                return 0;
            }
            let err = KitError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            // A closed pipe on stdout is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{summary}");
            0
        }
        Err(e) => {
            log::debug!("{e}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
}

impl Ctx {
    fn meta<T: Serialize>(&self, command: &str, params: &T) -> Meta {
        Meta::new(self.seed, config_hash(command, &(self.seed, params)))
    }

    fn vocab(&self, flag: Option<PathBuf>) -> KitResult<Vocabulary> {
        io::load_vocabulary(&required(flag, self.cfg.vocab.as_ref(), "vocab")?)
    }

    fn out_dir(&self, flag: Option<PathBuf>) -> KitResult<PathBuf> {
        required(flag, self.cfg.out_dir.as_ref(), "out-dir")
    }
}

/// Runs a parsed command; returns the summary printed on success.
pub fn execute(cli: Cli) -> KitResult<serde_json::Value> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Ctx { cfg, seed };
    match cli.command {
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Balance(a) => cmd_balance(&ctx, a),
        Command::Fill(a) => cmd_fill(&ctx, a),
        Command::Zeroshot(a) => cmd_zeroshot(&ctx, a),
        Command::Augment(a) => cmd_augment(&ctx, a),
        Command::CrawlQueries(a) => cmd_crawl(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Perturb(a) => cmd_perturb(&ctx, a),
        Command::Compare(a) => cmd_compare(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::ImportHico(a) => cmd_import(&ctx, a),
    }
}

fn written(artifacts: Artifacts) -> KitResult<serde_json::Value> {
    let paths = artifacts.commit()?;
    for p in &paths {
        log::info!("wrote {}", p.display());
    }
    Ok(serde_json::json!({ "written": paths }))
}

// ---------------------------------------------------------------- stats

#[derive(Serialize)]
struct DistributionRow<'a> {
    rank: usize,
    class_id: ClassId,
    verb: &'a str,
    object: &'a str,
    count: usize,
}

#[derive(Serialize)]
struct StatsReport {
    meta: Meta,
    images: usize,
    total_instances: usize,
    classes: usize,
    classes_with_instances: usize,
    max_count: usize,
    min_count: usize,
    median: Option<f64>,
    include_zero: bool,
    /// `(class_id, count)`, head to tail.
    sorted: Vec<(ClassId, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_medians: Option<SplitMedians>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratios: Option<Vec<RatioRow>>,
}

/// Vocabulary standing in for a missing one: every class present in `file`,
/// named after its id.
fn placeholder_vocab(files: &[&DatasetFile]) -> KitResult<Vocabulary> {
    let ids: std::collections::BTreeSet<ClassId> = files
        .iter()
        .flat_map(|f| &f.images)
        .flat_map(|i| &i.instances)
        .map(|i| i.class_id)
        .collect();
    Ok(Vocabulary::new(
        ids.into_iter()
            .map(|c| HoiClass::new(c, 0, c, "unknown", &format!("class{c}")))
            .collect(),
    )?)
}

fn cmd_stats(ctx: &Ctx, a: StatsArgs) -> KitResult<serde_json::Value> {
    let pool_path = required(a.pool, ctx.cfg.pool.as_ref(), "pool")?;
    let pool_file: DatasetFile = io::read_json(&pool_path)?;
    let split_files = match (&a.train, &a.test) {
        (Some(tr), Some(te)) => Some((io::read_json::<DatasetFile>(tr)?, io::read_json::<DatasetFile>(te)?)),
        _ => None,
    };
    let vocab = match a.vocab.or_else(|| ctx.cfg.vocab.clone()) {
        Some(p) => io::load_vocabulary(&p)?,
        None => {
            let mut files = vec![&pool_file];
            if let Some((tr, te)) = &split_files {
                files.extend([tr, te]);
            }
            placeholder_vocab(&files)?
        }
    };
    let pool = io::dataset_from_file(pool_file, &vocab, &pool_path)?;
    let dist = stats::distribution_with(&pool, &vocab, a.include_zero);
    let sorted = stats::sorted_classes(&dist);

    let (split_medians, ratios) = match (split_files, &a.train, &a.test) {
        (Some((tr, te)), Some(trp), Some(tep)) => {
            let train = io::dataset_from_file(tr, &vocab, trp)?;
            let test = io::dataset_from_file(te, &vocab, tep)?;
            (
                Some(stats::split_medians(&train, &test, &vocab)),
                Some(stats::ratio_report(&train, &test, &vocab)?),
            )
        }
        _ => (None, None),
    };
    let report = StatsReport {
        meta: ctx.meta("stats", &a.include_zero),
        images: pool.len(),
        total_instances: dist.total_instances,
        classes: vocab.len(),
        classes_with_instances: dist.classes_with_instances(),
        max_count: dist.max_count,
        min_count: dist.min_count,
        median: dist.median(),
        include_zero: a.include_zero,
        sorted: sorted.entries().to_vec(),
        split_medians,
        ratios,
    };
    let Some(out) = a.out_dir.or_else(|| ctx.cfg.out_dir.clone()) else {
        return Ok(serde_json::to_value(&report).expect("report serializes"));
    };
    let rows: Vec<DistributionRow<'_>> = sorted
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &(c, n))| {
            let class = vocab.get(c).expect("sorted classes come from the vocabulary");
            DistributionRow {
                rank: i + 1,
                class_id: c,
                verb: &class.verb_name,
                object: &class.object_name,
                count: n,
            }
        })
        .collect();
    let mut arts = Artifacts::default();
    arts.bytes(out.join("distribution.csv"), io::csv_bytes(&rows)?);
    if let Some(r) = &report.ratios {
        arts.bytes(out.join("ratios.csv"), ratio_csv(r)?);
    }
    arts.json(out.join("stats.json"), &report);
    written(arts)
}

fn ratio_csv(rows: &[RatioRow]) -> KitResult<Vec<u8>> {
    #[derive(Serialize)]
    struct Row {
        class_id: ClassId,
        train_count: usize,
        test_count: usize,
        ratio: String,
    }
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            class_id: r.class_id,
            train_count: r.train_count,
            test_count: r.test_count,
            ratio: r.ratio.map_or_else(|| "undefined".into(), |x| x.to_string()),
        })
        .collect();
    io::csv_bytes(&rows)
}

// -------------------------------------------------------------- balance

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeficitsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    /// The per-class target the deficits are measured against.
    #[serde(default)]
    pub target: Option<usize>,
    pub deficits: Deficits,
}

#[derive(Serialize)]
struct BalanceParamsUsed {
    top_k: usize,
    classes: Vec<ClassId>,
    l_test: usize,
    l_train: usize,
    epochs: usize,
}

#[derive(Serialize)]
struct AuditFile<'a> {
    meta: &'a Meta,
    params: &'a BalanceParamsUsed,
    test_seed: u64,
    train_seed: u64,
    test_instances: usize,
    train_instances: usize,
    train_deficit_total: usize,
    #[serde(flatten)]
    audit: &'a Audit,
}

fn cmd_balance(ctx: &Ctx, a: BalanceArgs) -> KitResult<serde_json::Value> {
    let p = &ctx.cfg.balance;
    let vocab = ctx.vocab(a.vocab)?;
    let pool_path = required(a.pool, ctx.cfg.pool.as_ref(), "pool")?;
    let out = ctx.out_dir(a.out_dir)?;
    let pool = io::load_dataset(&pool_path, &vocab)?;
    let classes = match a.classes {
        Some(path) => {
            let sel = io::load_vocabulary(&path)?;
            if !sel.is_subset_of(&vocab) {
                return Err(bright_core::Error::VocabularyMismatch {
                    left: path.display().to_string(),
                    right: "vocab".into(),
                }
                .into());
            }
            sel
        }
        None => {
            let dist = stats::distribution(&pool, &vocab);
            let k = a.top_k.or(p.top_k).unwrap_or(dist.classes_with_instances());
            stats::top_k(&stats::sorted_classes(&dist), k, &vocab)?
        }
    };
    let params = BalanceParamsUsed {
        top_k: classes.len(),
        classes: classes.class_ids().collect(),
        l_test: a.l_test.unwrap_or(p.l_test),
        l_train: a.l_train.unwrap_or(p.l_train),
        epochs: a.epochs.unwrap_or(p.epochs),
    };
    let (test_seed, train_seed) = (derive_seed(ctx.seed, 1), derive_seed(ctx.seed, 2));
    let test_cfg = BalanceConfig::new(params.l_test, params.top_k, test_seed).with_epochs(params.epochs);
    let train_cfg = BalanceConfig::new(params.l_train, params.top_k, train_seed).with_epochs(params.epochs);
    let s = build_splits(&pool, &vocab, &classes, &test_cfg, &train_cfg)?;

    let meta = ctx.meta("balance", &params);
    let audit = AuditFile {
        meta: &meta,
        params: &params,
        test_seed,
        train_seed,
        test_instances: s.test.total_instances(),
        train_instances: s.train.total_instances(),
        train_deficit_total: s.train_deficits.values().sum(),
        audit: &s.audit,
    };
    let mut arts = Artifacts::default();
    arts.json(out.join("test.json"), &io::dataset_artifact(&s.test, &meta));
    arts.json(out.join("train.json"), &io::dataset_artifact(&s.train, &meta));
    arts.json(out.join("remainder.json"), &io::dataset_artifact(&s.remainder, &meta));
    arts.json(
        out.join("deficits.json"),
        &DeficitsFile {
            meta: Some(meta.clone()),
            target: Some(params.l_train),
            deficits: s.train_deficits.clone(),
        },
    );
    arts.json(out.join("audit.json"), &audit);
    arts.json(
        out.join("classes.json"),
        &VocabArtifact {
            meta: &meta,
            classes: classes.classes(),
        },
    );
    written(arts)
}

// ----------------------------------------------------------------- fill

fn cmd_fill(ctx: &Ctx, a: FillArgs) -> KitResult<serde_json::Value> {
    let vocab = ctx.vocab(a.vocab)?;
    let out = ctx.out_dir(a.out_dir)?;
    let train = io::load_dataset(&a.train, &vocab)?;
    let deficits: DeficitsFile = io::read_json(&a.deficits)?;
    let augmented = io::load_dataset(&a.augmented, &vocab)?;
    let f = fill_deficits(&train, &deficits.deficits, &augmented)?;
    let meta = ctx.meta("fill", &deficits.deficits);
    let mut arts = Artifacts::default();
    arts.json(out.join("train_filled.json"), &io::dataset_artifact(&f.train, &meta));
    arts.json(
        out.join("fill_report.json"),
        &serde_json::json!({
            "meta": meta,
            "accepted_images": f.accepted_images,
            "accepted_instances": f.accepted_instances,
            "rejected_surplus": f.rejected_surplus,
            "train_instances": f.train.total_instances(),
            "train_images": f.train.len(),
        }),
    );
    written(arts)
}

// ------------------------------------------------------------- zeroshot

#[derive(Serialize)]
struct ZeroShotReport<'a> {
    meta: &'a Meta,
    candidates: usize,
    classes: &'a [ClassId],
    instances: usize,
    over_budget: &'a [ClassId],
    warnings: &'a [ZeroShotWarning],
}

fn cmd_zeroshot(ctx: &Ctx, a: ZeroShotArgs) -> KitResult<serde_json::Value> {
    let zp = &ctx.cfg.zeroshot;
    let seen = io::load_vocabulary(&a.seen)?;
    let universe = io::load_vocabulary(&a.universe)?;
    let pool_path = required(a.pool, ctx.cfg.pool.as_ref(), "pool")?;
    let out = ctx.out_dir(a.out_dir)?;
    let pool = io::load_dataset(&pool_path, &universe)?;
    let mut used = std::collections::BTreeSet::new();
    for p in &a.exclude {
        let f: DatasetFile = io::read_json(p)?;
        used.extend(f.images.into_iter().map(|i| i.image_id));
    }
    let source = pool.filter_images(|img| !used.contains(&img.image_id));

    let candidates = zeroshot::enumerate_candidates(&seen, &universe)?;
    let mut plan = ZeroShotPlan::new(candidates, &source);
    plan.instances_per_class = a.instances_per_class.unwrap_or(zp.instances_per_class);
    plan.class_budget = a.class_budget.unwrap_or(zp.class_budget);
    plan.epochs = a.epochs.unwrap_or(ctx.cfg.balance.epochs);
    let z = zeroshot::build_zeroshot_split(&plan, &universe, derive_seed(ctx.seed, 3))?;
    for w in &z.warnings {
        log::warn!("{w:?}");
    }
    let meta = ctx.meta(
        "zeroshot",
        &(
            seen.class_ids().collect::<Vec<_>>(),
            plan.instances_per_class,
            plan.class_budget,
            plan.epochs,
        ),
    );
    let mut arts = Artifacts::default();
    arts.json(out.join("zeroshot.json"), &io::dataset_artifact(&z.dataset, &meta));
    arts.json(
        out.join("zeroshot_report.json"),
        &ZeroShotReport {
            meta: &meta,
            candidates: plan.candidates.len(),
            classes: &z.classes,
            instances: z.dataset.total_instances(),
            over_budget: &z.over_budget,
            warnings: &z.warnings,
        },
    );
    let chosen: Vec<HoiClass> = z.classes.iter().filter_map(|c| universe.get(*c).cloned()).collect();
    arts.json(
        out.join("zeroshot_classes.json"),
        &VocabArtifact {
            meta: &meta,
            classes: &chosen,
        },
    );
    written(arts)
}

// -------------------------------------------------------------- augment

#[derive(Debug, Clone, Serialize)]
struct AugmentParamsUsed {
    max_attempts_per_class: usize,
    target: String,
    ports: PortsKind,
    mock_verifier: Option<String>,
}

#[derive(Serialize)]
struct ClassRun {
    class_id: ClassId,
    target_valid: usize,
    valid_images: usize,
    instances: usize,
    attempts: usize,
    generator_calls: usize,
    paraphrases: usize,
    port_failures: usize,
    status: String,
}

fn mock_verifier(spec: &str) -> KitResult<MockTextVerifier> {
    match spec {
        "accept" => Ok(MockTextVerifier::accept_all()),
        "reject" => Ok(MockTextVerifier::reject_all()),
        s => s
            .strip_prefix("period:")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .map(MockTextVerifier::periodic)
            .ok_or_else(|| KitError::Usage(format!("--mock-verifier must be accept, reject or period:N, got `{s}`"))),
    }
}

fn cmd_augment(ctx: &Ctx, a: AugmentArgs) -> KitResult<serde_json::Value> {
    let ap = &ctx.cfg.augment;
    let vocab = ctx.vocab(a.vocab)?;
    let out = ctx.out_dir(a.out_dir)?;
    let ports_kind = match a.ports {
        Some(k) => k,
        None => PortsKind::from_str(&ap.ports, true).map_err(|e| KitError::Usage(format!("augment.ports: {e}")))?,
    };
    let target = a.target.unwrap_or_else(|| ap.target.clone());
    let fixed_target =
        match target.as_str() {
            "per-deficit" => None,
            n => Some(n.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                KitError::Usage(format!("--target must be per-deficit or a positive count, got `{n}`"))
            })?),
        };
    let verifier_spec = a.mock_verifier.unwrap_or_else(|| ap.mock_verifier.clone());
    let params = AugmentParamsUsed {
        max_attempts_per_class: a.budget.unwrap_or(ap.max_attempts_per_class),
        target,
        ports: ports_kind,
        mock_verifier: (ports_kind == PortsKind::Mock).then(|| verifier_spec.clone()),
    };
    GenerationBudget::new(params.max_attempts_per_class, fixed_target.unwrap_or(1))?;

    let deficits: DeficitsFile = io::read_json(&a.deficits)?;
    let refs = io::load_dataset(&a.refs, &vocab)?;
    for &c in deficits.deficits.keys() {
        if !vocab.contains(c) {
            return Err(bright_core::Error::ClassNotInVocabulary(c).into());
        }
    }

    let mocks;
    let http;
    let ports = match ports_kind {
        PortsKind::Mock => {
            mocks = MockPorts::new(mock_verifier(&verifier_spec)?);
            mocks.ports()
        }
        PortsKind::Http => {
            let endpoint = a
                .endpoint
                .or_else(|| ap.endpoint.clone())
                .ok_or_else(|| KitError::Usage("--ports http needs --endpoint".into()))?;
            http = HttpPorts::new(&endpoint, Duration::from_secs(ap.timeout_secs));
            http.ports()
        }
    };

    let meta = ctx.meta("augment", &params);
    let mut log_lines = Vec::new();
    serde_json::to_writer(&mut log_lines, &serde_json::json!({ "meta": meta })).expect("meta serializes");
    log_lines.push(b'\n');
    let mut images = Vec::new();
    let mut runs = Vec::new();
    for (&class_id, &deficit) in &deficits.deficits {
        if deficit == 0 {
            continue;
        }
        let class = vocab.get(class_id).expect("checked above");
        let budget = GenerationBudget::new(params.max_attempts_per_class, fixed_target.unwrap_or(deficit))?;
        let run = match generate_valid_images(
            class,
            &refs,
            &budget,
            &ports,
            derive_seed(ctx.seed, u64::from(class_id)),
        ) {
            Ok(r) => r,
            Err(bright_core::Error::EmptyReferenceSet(c)) => {
                log::warn!("class {c}: no reference images; skipped");
                runs.push(ClassRun {
                    class_id,
                    target_valid: budget.target_valid,
                    valid_images: 0,
                    instances: 0,
                    attempts: 0,
                    generator_calls: 0,
                    paraphrases: 0,
                    port_failures: 0,
                    status: "no_references".into(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for rec in &run.log {
            serde_json::to_writer(&mut log_lines, rec).expect("log records serialize");
            log_lines.push(b'\n');
        }
        let mut instances = 0;
        for (k, img) in run.images.iter().enumerate() {
            let rec = img.to_record(format!("gen-{class_id}-{k:04}"), class_id, Provenance::Generated);
            instances += rec.instances.len();
            images.push(rec);
        }
        runs.push(ClassRun {
            class_id,
            target_valid: budget.target_valid,
            valid_images: run.images.len(),
            instances,
            attempts: run.attempts,
            generator_calls: run.generator_calls,
            paraphrases: run.paraphrase_events(),
            port_failures: run.port_failures(),
            status: match run.status {
                RunStatus::Completed => "completed".into(),
                RunStatus::BudgetExhausted => "budget_exhausted".into(),
            },
        });
    }
    let augmented = Dataset::new(&vocab, refs.vocabulary_ref(), images)?;
    let mut arts = Artifacts::default();
    arts.json(out.join("augmented.json"), &io::dataset_artifact(&augmented, &meta));
    arts.bytes(out.join("attempt_log.jsonl"), log_lines);
    arts.json(
        out.join("augment_report.json"),
        &serde_json::json!({ "meta": meta, "params": params, "classes": runs }),
    );
    written(arts)
}

fn cmd_crawl(ctx: &Ctx, a: CrawlArgs) -> KitResult<serde_json::Value> {
    let vocab = ctx.vocab(a.vocab)?;
    let ids: Vec<ClassId> = match a.deficits {
        Some(p) => io::read_json::<DeficitsFile>(&p)?.deficits.into_keys().collect(),
        None => vocab.class_ids().collect(),
    };
    let mut rows = Vec::new();
    for c in ids {
        let class = vocab.get(c).ok_or(bright_core::Error::ClassNotInVocabulary(c))?;
        rows.push(serde_json::json!({ "class_id": c, "query": crawl_query(class)? }));
    }
    Ok(serde_json::Value::Array(rows))
}

// ----------------------------------------------------------- evaluation

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub meta: Meta,
    pub model: String,
    pub match_config: MatchConfig,
    pub report: EvalReport,
}

fn match_config(ctx: &Ctx, iou: Option<f64>, method: Option<ApMethodArg>) -> KitResult<MatchConfig> {
    let cfg = MatchConfig {
        iou_threshold: iou.unwrap_or(ctx.cfg.eval.iou_threshold),
        ap_method: match method {
            Some(ApMethodArg::AllPoint) => bright_core::eval::ApMethod::AllPoint,
            Some(ApMethodArg::ElevenPoint) => bright_core::eval::ApMethod::ElevenPoint,
            None => ctx.cfg.eval.ap_method,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_evaluate(ctx: &Ctx, a: EvaluateArgs) -> KitResult<serde_json::Value> {
    let mc = match_config(ctx, a.iou, a.ap_method)?;
    let vocab = ctx.vocab(a.vocab)?;
    let out = ctx.out_dir(a.out_dir)?;
    let gt = io::load_dataset(&a.gt, &vocab)?;
    let preds = io::load_predictions(&a.preds, &vocab)?;
    let report = evaluate(&preds, &gt, &vocab, &mc)?;
    let model = a.model.unwrap_or_else(|| {
        a.preds
            .file_stem()
            .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
    });

    #[derive(Serialize)]
    struct Row<'a> {
        class_id: ClassId,
        verb: &'a str,
        object: &'a str,
        num_gt: usize,
        ap: f64,
    }
    let rows: Vec<Row<'_>> = report
        .per_class_ap
        .iter()
        .map(|(&c, &ap)| {
            let class = vocab.get(c).expect("evaluated classes come from the vocabulary");
            Row {
                class_id: c,
                verb: &class.verb_name,
                object: &class.object_name,
                num_gt: report.num_gt.get(&c).copied().unwrap_or(0),
                ap,
            }
        })
        .collect();
    let file = ReportFile {
        meta: ctx.meta("evaluate", &mc),
        model: model.clone(),
        match_config: mc,
        report: report.clone(),
    };
    let mut arts = Artifacts::default();
    arts.bytes(out.join(format!("{model}.per_class_ap.csv")), io::csv_bytes(&rows)?);
    arts.json(out.join(format!("{model}.json")), &file);
    let mut summary = written(arts)?;
    summary["map"] = serde_json::json!(report.map);
    Ok(summary)
}

fn cmd_perturb(ctx: &Ctx, a: PerturbArgs) -> KitResult<serde_json::Value> {
    let mc = match_config(ctx, a.iou, None)?;
    let vocab = ctx.vocab(a.vocab)?;
    let gt = io::load_dataset(&a.gt, &vocab)?;
    let preds = io::load_predictions(&a.preds, &vocab)?;
    let target = if a.lowest {
        FlipTarget::LowestConfidence
    } else {
        FlipTarget::HighestConfidence
    };
    let explicit = !a.classes.is_empty();
    let classes: Vec<ClassId> = if explicit {
        a.classes.clone()
    } else {
        vocab.class_ids().filter(|&c| gt.count(c) > 0).collect()
    };
    let mut outcomes: Vec<FlipOutcome> = Vec::new();
    let mut skipped = Vec::new();
    for c in classes {
        if !vocab.contains(c) {
            return Err(bright_core::Error::ClassNotInVocabulary(c).into());
        }
        match perturb_tp_flip(&preds, &gt, c, &mc, target) {
            Ok(o) => outcomes.push(o),
            Err(e @ (bright_core::Error::NoTruePositive(_) | bright_core::Error::NoGroundTruth(_))) => {
                if explicit {
                    return Err(e.into());
                }
                skipped.push(c);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let body = serde_json::json!({
        "meta": ctx.meta("perturb", &(&mc, a.lowest, &a.classes)),
        "target": target,
        "outcomes": outcomes,
        "skipped_without_true_positive": skipped,
    });
    match a.out_dir.or_else(|| ctx.cfg.out_dir.clone()) {
        None => Ok(body),
        Some(out) => {
            let mut arts = Artifacts::default();
            arts.bytes(out.join("perturb.csv"), io::csv_bytes(&outcomes)?);
            arts.json(out.join("perturb.json"), &body);
            written(arts)
        }
    }
}

/// Model scores from a directory of report files or a JSON map.
pub fn load_scores(path: &Path) -> KitResult<BTreeMap<String, f64>> {
    if !path.is_dir() {
        return io::read_json(path);
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| KitError::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut out = BTreeMap::new();
    for p in entries {
        let r: ReportFile = io::read_json(&p)?;
        if out.insert(r.model.clone(), r.report.map).is_some() {
            return Err(KitError::parse(&p, format!("model `{}` appears twice", r.model)));
        }
    }
    Ok(out)
}

fn cmd_compare(ctx: &Ctx, a: CompareArgs) -> KitResult<serde_json::Value> {
    let sa = load_scores(&a.a)?;
    let sb = load_scores(&a.b)?;
    let rows: Vec<RankShift> = ranking_shift(&sa, &sb)?;
    let body = serde_json::json!({ "meta": ctx.meta("compare", &()), "rows": rows });
    match a.out_dir.or_else(|| ctx.cfg.out_dir.clone()) {
        None => Ok(body),
        Some(out) => {
            let mut arts = Artifacts::default();
            arts.bytes(out.join("ranking.csv"), io::csv_bytes(&rows)?);
            arts.json(out.join("ranking.json"), &body);
            written(arts)
        }
    }
}

// ---------------------------------------------------------------- synth

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> KitResult<serde_json::Value> {
    let out = ctx.out_dir(a.out_dir)?;
    let vocab = match (a.kind, a.vocab) {
        (_, Some(p)) => io::load_vocabulary(&p)?,
        (SynthKind::Random, None) => synth::vocabulary(a.classes),
        (SynthKind::Benchmark, None) => return Err(KitError::Usage("--kind benchmark needs --vocab".into())),
    };
    let pool = match a.kind {
        SynthKind::Random => synth::random_pool(
            &vocab,
            "synthetic",
            &RandomPoolSpec {
                images: a.images,
                max_classes_per_image: a.max_classes_per_image,
                ..Default::default()
            },
            derive_seed(ctx.seed, 10),
        )?,
        SynthKind::Benchmark => synth::benchmark_scale_pool(&vocab, "synthetic", derive_seed(ctx.seed, 10))?,
    };
    let spec = PredictionSpec {
        recall: a.recall,
        ..Default::default()
    };
    let preds = synth::predictions(&pool, &vocab, &spec, derive_seed(ctx.seed, 11))?;
    let meta = ctx.meta(
        "synth",
        &(a.kind, a.classes, a.images, a.max_classes_per_image, a.recall),
    );
    let mut arts = Artifacts::default();
    arts.json(
        out.join("vocab.json"),
        &VocabArtifact {
            meta: &meta,
            classes: vocab.classes(),
        },
    );
    arts.json(out.join("pool.json"), &io::dataset_artifact(&pool, &meta));
    arts.bytes(out.join("preds.jsonl"), io::predictions_jsonl(&preds));
    written(arts)
}

fn cmd_import(ctx: &Ctx, a: ImportArgs) -> KitResult<serde_json::Value> {
    let vocab = ctx.vocab(a.vocab)?;
    let out = ctx.out_dir(a.out_dir)?;
    let paths: Vec<&Path> = a.anno.iter().map(PathBuf::as_path).collect();
    let (pool, report) = crate::hicodet::import(&paths, &a.hoi_list, &vocab, &a.vocabulary_ref)?;
    let meta = ctx.meta("import-hico", &a.vocabulary_ref);
    let mut arts = Artifacts::default();
    arts.json(out.join("pool.json"), &io::dataset_artifact(&pool, &meta));
    arts.json(
        out.join("import_report.json"),
        &serde_json::json!({ "meta": meta, "report": report }),
    );
    written(arts)
}
