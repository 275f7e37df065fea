//! The `capeval` command line.
//!
//! Every subcommand writes its report plus a run manifest (config echo,
//! SHA-256 of inputs and outputs, tool version) to `<out>.manifest.json`
//! unless `--manifest` says otherwise.
//!
//! Exit status: 0 success, 2 bad input, 3 undefined statistic or singular
//! fit, 64 usage error. `CAPEVAL_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{
    load_corpus, read_captions, read_embedding_store, read_metric_table, EmbeddingStore,
};
use crate::diagnostics::{self, PowerSimConfig, REPORTED_BEST_OF_TEN};
use crate::error::{Error, Result};
use crate::harness::{
    self, Aggregation, LikertProtocolConfig, ResampleConfig, StoreScorer, SystemSummary, TiePolicy,
    DEFAULT_TIE_SEED,
};
use crate::rankstats::Statistic;
use crate::report::{percent, write_json, RunManifest};
use crate::scoring::{self, ScoreConfig, ScoreKind};
use crate::selection;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

const SCHEMAS: &str = "\
File formats:
  *.ceb             binary embeddings: \"CEB1\", u32 version=1, u32 dim, u64 count,
                    then per entry u16 id_len, UTF-8 id, dim x f32 (little-endian,
                    ids in byte order). Images are keyed by image_id, candidates
                    by \"<image_id>/<candidate_id>\", references by their text.
  captions.jsonl    {\"image_id\", \"candidate_id\", \"caption\", \"references\": [..]}
  judgments.jsonl   {\"kind\":\"likert\",\"image_id\",\"candidate_id\",\"ratings\":[..]} or
                    {\"kind\":\"pairwise\",\"image_id\",\"candidate_a_id\",\"candidate_b_id\",
                     \"votes_a\",\"votes_b\"}
  metric_table.csv  instance_id,human,<metric1>,...
  systems.csv       system_id,human_m1,human_m2[,metric_mean]
  scores.jsonl      one scored pair per line, then
                    {\"corpus_clip_s\",\"corpus_ref_clip_s\",\"w\",\"n\"}

Environment:
  CAPEVAL_THREADS   maximum worker threads";

#[derive(Debug, Parser)]
#[command(name = "capeval", version, about = "CLIPScore evaluation toolkit", after_help = SCHEMAS)]
pub struct Cli {
    #[command(flatten)]
    pub scoring: ScoringArgs,

    /// Manifest path (default: <out>.manifest.json).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoringArgs {
    /// CLIP-S rescaling weight.
    #[arg(long = "w", global = true, default_value_t = scoring::DEFAULT_W)]
    pub w: f64,

    /// Which texts were embedded with the prompt prefix (recorded, not applied).
    #[arg(long, global = true, value_enum, default_value_t = PromptPolicy::PrefixAll)]
    pub prompt_policy: PromptPolicy,

    #[arg(long, global = true, default_value = "A photo depicts ")]
    pub prompt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptPolicy {
    PrefixCandidates,
    PrefixAll,
    NoPrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum MetricArg {
    #[value(name = "clip-s")]
    #[serde(rename = "clip-s")]
    ClipS,
    #[value(name = "ref-clip-s")]
    #[serde(rename = "ref-clip-s")]
    RefClipS,
}

impl From<MetricArg> for ScoreKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::ClipS => ScoreKind::ClipS,
            MetricArg::RefClipS => ScoreKind::RefClipS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum AggregationArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KendallArg {
    #[value(name = "tau-b")]
    #[serde(rename = "tau-b")]
    TauB,
    #[value(name = "tau-c")]
    #[serde(rename = "tau-c")]
    TauC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieArg {
    /// Seeded coin flip per score tie.
    Random,
    /// Half a point per score tie.
    Half,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TieArgs {
    #[arg(long, value_enum, default_value_t = TieArg::Random)]
    pub tie_policy: TieArg,
    #[arg(long, default_value_t = DEFAULT_TIE_SEED)]
    pub tie_seed: u64,
}

impl TieArgs {
    fn policy(&self) -> TiePolicy {
        match self.tie_policy {
            TieArg::Random => TiePolicy::SeededRandom {
                seed: self.tie_seed,
            },
            TieArg::Half => TiePolicy::HalfCredit,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbeddingArgs {
    #[arg(long)]
    pub cand_emb: PathBuf,
    #[arg(long)]
    pub img_emb: PathBuf,
    #[arg(long)]
    pub ref_emb: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every caption with CLIP-S (and RefCLIP-S when references are given).
    Score {
        #[arg(long)]
        captions: PathBuf,
        #[command(flatten)]
        emb: EmbeddingArgs,
        /// Keep negative cosines instead of clamping CLIP-S at zero.
        #[arg(long)]
        no_clamp: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Caption-level Kendall correlation with Likert judgments.
    EvalLikert {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::ClipS)]
        metric: MetricArg,
        /// A: one point per rating; B: mean rating per pair.
        #[arg(long, value_enum, default_value_t = AggregationArg::A)]
        aggregation: AggregationArg,
        #[arg(long = "stat", value_enum, default_value_t = KendallArg::TauC)]
        stat: KendallArg,
        /// Snap human values to multiples of this width first.
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise preference accuracy against majority votes.
    EvalPairwise {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        /// Precomputed scores; when absent, scores are computed per reference draw.
        #[arg(long, conflicts_with_all = ["cand_emb", "img_emb", "ref_emb"])]
        scores: Option<PathBuf>,
        #[arg(long, requires = "img_emb")]
        cand_emb: Option<PathBuf>,
        #[arg(long, requires = "cand_emb")]
        img_emb: Option<PathBuf>,
        #[arg(long, requires = "cand_emb")]
        ref_emb: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::ClipS)]
        metric: MetricArg,
        #[arg(long, default_value_t = 5)]
        refs_per_draw: usize,
        #[arg(long, default_value_t = 5)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ties: TieArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// FOIL detection accuracy; in each pairwise record the side with more votes is the true caption.
    EvalFoil {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::ClipS)]
        metric: MetricArg,
        #[command(flatten)]
        ties: TieArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// System-level Spearman / Pearson against M1 and M2.
    EvalSystem {
        #[arg(long)]
        systems: PathBuf,
        /// Derive metric_mean per system from scores (system id = candidate_id).
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::ClipS)]
        metric: MetricArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy forward selection by cross-validated R², over bootstrap resamples.
    ForwardSelect {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 10)]
        bootstraps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the mean R² curve (step,mean,std,min,max) as CSV.
        #[arg(long)]
        curve_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best-of-N random-metric simulation over a handful of systems.
    PowerSim {
        #[arg(long, default_value_t = 12)]
        systems: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        sims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated human scores (default: evenly spaced on [0, 1]).
        #[arg(long, value_delimiter = ',')]
        human: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw cosine distributions and their CLIP-S rescaling.
    RescaleStats {
        #[arg(long)]
        captions: PathBuf,
        #[command(flatten)]
        emb: EmbeddingArgs,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Prefix for the histogram CSVs (default: <out> without extension).
        #[arg(long)]
        hist_prefix: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Score { .. } => "score",
            Command::EvalLikert { .. } => "eval-likert",
            Command::EvalPairwise { .. } => "eval-pairwise",
            Command::EvalFoil { .. } => "eval-foil",
            Command::EvalSystem { .. } => "eval-system",
            Command::ForwardSelect { .. } => "forward-select",
            Command::PowerSim { .. } => "power-sim",
            Command::RescaleStats { .. } => "rescale-stats",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::Score { out, .. }
            | Command::EvalLikert { out, .. }
            | Command::EvalPairwise { out, .. }
            | Command::EvalFoil { out, .. }
            | Command::EvalSystem { out, .. }
            | Command::ForwardSelect { out, .. }
            | Command::PowerSim { out, .. }
            | Command::RescaleStats { out, .. } => out,
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn configure_threads() {
    if let Some(n) = std::env::var("CAPEVAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Parses `argv`, runs the subcommand, and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("capeval {}: {e}", cli.command.name());
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn load_store(path: &Path, manifest: &mut RunManifest) -> Result<EmbeddingStore> {
    manifest.input(path)?;
    read_embedding_store(path)
}

fn load_scores(
    path: &Path,
    manifest: &mut RunManifest,
) -> Result<(Vec<scoring::ScoredPair>, scoring::ScoresSummary)> {
    manifest.input(path)?;
    let (pairs, summary) = scoring::read_scores_jsonl(path)?;
    manifest.echo("scores_w", summary.w);
    Ok((pairs, summary))
}

fn score_config(args: &ScoringArgs, clamp: bool) -> Result<ScoreConfig> {
    let mut cfg = ScoreConfig::new(args.w)?;
    cfg.clamp_negative = clamp;
    Ok(cfg)
}

/// Runs an already parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    ScoreConfig::new(cli.scoring.w)?;
    let mut manifest = RunManifest::new(cli.command.name());
    manifest.echo("w", cli.scoring.w);
    manifest.echo("prompt_policy", cli.scoring.prompt_policy);
    manifest.echo("prompt", &cli.scoring.prompt);
    let out = cli.command.out().to_path_buf();
    let mut outputs = vec![out.clone()];

    match &cli.command {
        Command::Score {
            captions,
            emb,
            no_clamp,
            ..
        } => {
            manifest.echo("clamp_negative", !no_clamp);
            manifest.input(captions)?;
            let corpus = read_captions(captions)?;
            let cand = load_store(&emb.cand_emb, &mut manifest)?;
            let img = load_store(&emb.img_emb, &mut manifest)?;
            let refs = emb
                .ref_emb
                .as_deref()
                .map(|p| load_store(p, &mut manifest))
                .transpose()?;
            let cfg = score_config(&cli.scoring, !no_clamp)?;
            let scores = scoring::corpus_scores(&corpus, &cand, &img, refs.as_ref(), &cfg)?;
            scoring::write_scores_jsonl(&scores, &out)?;
        }

        Command::EvalLikert {
            captions,
            judgments,
            scores,
            metric,
            aggregation,
            stat,
            bin_width,
            ..
        } => {
            manifest.input(captions)?;
            manifest.input(judgments)?;
            let (_, judg, _) = load_corpus(captions, judgments, None)?;
            let (pairs, _) = load_scores(scores, &mut manifest)?;
            let cfg = LikertProtocolConfig {
                aggregation: match aggregation {
                    AggregationArg::A => Aggregation::FlattenA,
                    AggregationArg::B => Aggregation::MeanB,
                },
                statistic: match stat {
                    KendallArg::TauB => Statistic::TauB,
                    KendallArg::TauC => Statistic::TauC,
                },
                bin_width: *bin_width,
            };
            manifest.echo("metric", metric);
            manifest.echo("likert", cfg);
            let outcome = harness::likert_correlation(
                &scoring::score_map(&pairs, (*metric).into())?,
                &judg,
                &cfg,
            )?;
            write_json(
                &out,
                &json!({
                    "protocol": "likert",
                    "config": { "metric": metric, "aggregation": aggregation, "statistic": stat, "bin_width": bin_width },
                    "value": percent(outcome.value),
                    "value_raw": outcome.value,
                    "counts": { "pairs": outcome.pairs, "points": outcome.points },
                }),
            )?;
        }

        Command::EvalPairwise {
            captions,
            judgments,
            scores,
            cand_emb,
            img_emb,
            ref_emb,
            metric,
            refs_per_draw,
            draws,
            seed,
            ties,
            ..
        } => {
            manifest.input(captions)?;
            manifest.input(judgments)?;
            let (corpus, judg, _) = load_corpus(captions, judgments, None)?;
            manifest.echo("metric", metric);
            manifest.echo("ties", ties);
            let policy = ties.policy();
            let report = if let Some(scores) = scores {
                let (pairs, _) = load_scores(scores, &mut manifest)?;
                let prefs = harness::preference_pairs(
                    &judg,
                    &scoring::score_map(&pairs, (*metric).into())?,
                )?;
                let o = harness::pairwise_accuracy(&prefs, policy)?;
                json!({
                    "protocol": "pairwise",
                    "config": { "metric": metric, "tie_policy": policy, "source": "scores" },
                    "value": percent(o.accuracy),
                    "value_raw": o.accuracy,
                    "counts": { "evaluated": o.evaluated, "vote_ties_dropped": o.vote_ties_dropped, "score_ties": o.score_ties },
                })
            } else {
                let (Some(cand_path), Some(img_path)) = (cand_emb, img_emb) else {
                    return Err(Error::InvalidInput(
                        "eval-pairwise needs either --scores or --cand-emb and --img-emb".into(),
                    ));
                };
                let cand = load_store(cand_path, &mut manifest)?;
                let img = load_store(img_path, &mut manifest)?;
                let refs = ref_emb
                    .as_deref()
                    .map(|p| load_store(p, &mut manifest))
                    .transpose()?;
                let resample = ResampleConfig {
                    refs_per_draw: *refs_per_draw,
                    draws: *draws,
                    seed: *seed,
                    tie_policy: policy,
                };
                manifest.echo("resample", resample);
                let scorer = StoreScorer {
                    candidates: &cand,
                    images: &img,
                    references: refs.as_ref(),
                    config: score_config(&cli.scoring, true)?,
                    kind: (*metric).into(),
                };
                let pool = corpus.reference_pool();
                let o = harness::resampled_reference_eval(
                    &corpus,
                    &judg,
                    &pool,
                    &resample,
                    |item, r| scorer.score(item, r),
                )?;
                let first = o.per_draw[0];
                json!({
                    "protocol": "pairwise",
                    "config": { "metric": metric, "tie_policy": policy, "source": "embeddings", "refs_per_draw": refs_per_draw, "draws": draws, "seed": seed },
                    "value": percent(o.mean),
                    "value_raw": o.mean,
                    "per_draw": o.per_draw.iter().map(|d| percent(d.accuracy)).collect::<Vec<_>>(),
                    "per_draw_raw": o.per_draw.iter().map(|d| d.accuracy).collect::<Vec<_>>(),
                    "counts": { "evaluated": first.evaluated, "vote_ties_dropped": first.vote_ties_dropped,
                                "score_ties_per_draw": o.per_draw.iter().map(|d| d.score_ties).collect::<Vec<_>>() },
                })
            };
            write_json(&out, &report)?;
        }

        Command::EvalFoil {
            captions,
            judgments,
            scores,
            metric,
            ties,
            ..
        } => {
            manifest.input(captions)?;
            manifest.input(judgments)?;
            let (_, judg, _) = load_corpus(captions, judgments, None)?;
            let (pairs, _) = load_scores(scores, &mut manifest)?;
            manifest.echo("metric", metric);
            manifest.echo("ties", ties);
            let foil = harness::foil_pairs(&judg, &scoring::score_map(&pairs, (*metric).into())?)?;
            let o = harness::foil_accuracy(&foil, ties.policy())?;
            write_json(
                &out,
                &json!({
                    "protocol": "foil",
                    "config": { "metric": metric, "tie_policy": ties.policy() },
                    "value": percent(o.accuracy),
                    "value_raw": o.accuracy,
                    "chance": 50.0,
                    "counts": { "evaluated": o.evaluated, "score_ties": o.score_ties },
                }),
            )?;
        }

        Command::EvalSystem {
            systems,
            scores,
            metric,
            ..
        } => {
            manifest.input(systems)?;
            manifest.echo("metric", metric);
            let means = match scores {
                Some(p) => {
                    let (pairs, _) = load_scores(p, &mut manifest)?;
                    Some(harness::system_means(&pairs, (*metric).into())?)
                }
                None => None,
            };
            let summaries = read_systems(systems, means.as_ref())?;
            let c = harness::system_level_correlation(&summaries)?;
            write_json(
                &out,
                &json!({
                    "protocol": "system",
                    "config": { "metric": metric, "metric_source": if scores.is_some() { "scores" } else { "systems.csv" } },
                    "systems": summaries.len(),
                    "values": {
                        "spearman_m1": percent(c.spearman_m1), "spearman_m2": percent(c.spearman_m2),
                        "pearson_m1": percent(c.pearson_m1), "pearson_m2": percent(c.pearson_m2),
                    },
                    "values_raw": c,
                    "note": "few systems: low statistical power, see power-sim",
                }),
            )?;
        }

        Command::ForwardSelect {
            table,
            folds,
            bootstraps,
            seed,
            curve_csv,
            ..
        } => {
            manifest.input(table)?;
            manifest.echo("folds", folds);
            manifest.echo("bootstraps", bootstraps);
            manifest.echo("seed", seed);
            manifest.echo("resampling", "instance-level");
            let t = read_metric_table(table)?;
            let result = selection::bootstrap_forward_select(&t, *folds, *bootstraps, *seed)?;
            let curve = result.r2_curve();
            let picks: Vec<_> = (0..t.num_metrics().min(3))
                .map(|s| result.pick_counts(s))
                .collect();
            write_json(
                &out,
                &json!({
                    "protocol": "forward-select",
                    "config": { "folds": folds, "bootstraps": bootstraps, "seed": seed, "resampling": "instance-level" },
                    "rows": t.len(),
                    "metrics": t.metric_names().collect::<Vec<_>>(),
                    "traces": result.traces,
                    "pick_histograms": picks,
                    "first_pick_counts": result.first_pick_counts,
                    "r2_curve": curve,
                }),
            )?;
            if let Some(csv_path) = curve_csv {
                let mut text = String::from("step,mean_r2,std_r2,min_r2,max_r2\n");
                for p in &curve {
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        p.step, p.mean, p.std, p.min, p.max
                    ));
                }
                fs::write(csv_path, text).map_err(|e| Error::io(csv_path, e))?;
                outputs.push(csv_path.clone());
            }
        }

        Command::PowerSim {
            systems,
            trials,
            sims,
            seed,
            human,
            ..
        } => {
            let mut cfg = PowerSimConfig::evenly_spaced(*systems, *trials, *sims, *seed);
            if let Some(h) = human {
                cfg.human_scores = h.clone();
            }
            manifest.echo("power_sim", &cfg);
            let o = diagnostics::power_simulation(&cfg)?;
            write_json(
                &out,
                &json!({
                    "protocol": "power-sim",
                    "config": cfg,
                    "result": o,
                    "inflation_spearman": o.mean_best_spearman - o.mean_single_spearman,
                    "inflation_pearson": o.mean_best_pearson - o.mean_single_pearson,
                    "reported_best_of_ten": REPORTED_BEST_OF_TEN,
                    "discrepancy_spearman": REPORTED_BEST_OF_TEN - o.mean_best_spearman,
                }),
            )?;
        }

        Command::RescaleStats {
            captions,
            emb,
            bins,
            hist_prefix,
            ..
        } => {
            manifest.input(captions)?;
            manifest.echo("bins", bins);
            let corpus = read_captions(captions)?;
            let cand = load_store(&emb.cand_emb, &mut manifest)?;
            let img = load_store(&emb.img_emb, &mut manifest)?;
            let refs = emb
                .ref_emb
                .as_deref()
                .map(|p| load_store(p, &mut manifest))
                .transpose()?;
            let w = ScoreConfig::new(cli.scoring.w)?.w();
            let d = diagnostics::similarity_distributions(
                &cand,
                &img,
                refs.as_ref(),
                &corpus,
                *bins,
                w,
            )?;
            let prefix = hist_prefix
                .clone()
                .unwrap_or_else(|| out.with_extension(""));
            let img_csv = with_suffix(&prefix, ".candidate-image.csv");
            d.candidate_image.write_csv(&img_csv)?;
            outputs.push(img_csv);
            if let Some(h) = &d.candidate_reference {
                let ref_csv = with_suffix(&prefix, ".candidate-reference.csv");
                h.write_csv(&ref_csv)?;
                outputs.push(ref_csv);
            }
            let summary = |h: &diagnostics::SimilarityHistogram| json!({ "raw": h.summary, "rescaled": h.rescaled });
            write_json(
                &out,
                &json!({
                    "protocol": "rescale-stats",
                    "config": { "w": w, "bins": bins },
                    "candidate_image": summary(&d.candidate_image),
                    "candidate_reference": d.candidate_reference.as_ref().map(summary),
                }),
            )?;
        }
    }

    for p in &outputs {
        manifest.output(p)?;
    }
    let manifest_path = cli
        .manifest
        .clone()
        .unwrap_or_else(|| with_suffix(&out, ".manifest.json"));
    write_json(&manifest_path, &manifest)
}

#[derive(Debug, Deserialize)]
struct SystemRow {
    system_id: String,
    human_m1: f64,
    human_m2: f64,
    metric_mean: Option<f64>,
}

/// Reads `systems.csv`. When `means` is given it supplies `metric_mean` and
/// must cover every listed system.
fn read_systems(
    path: &Path,
    means: Option<&indexmap::IndexMap<String, f64>>,
) -> Result<Vec<SystemSummary>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in reader.deserialize::<SystemRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::load(path, line, e.to_string())
        })?;
        let metric_mean = match means {
            Some(m) => *m
                .get(&row.system_id)
                .ok_or_else(|| Error::MissingIds(vec![format!("system:{}", row.system_id)]))?,
            None => row.metric_mean.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "system {} has no metric_mean and no --scores were given",
                    row.system_id
                ))
            })?,
        };
        out.push(SystemSummary {
            system_id: row.system_id,
            metric_mean,
            human_m1: row.human_m1,
            human_m2: row.human_m2,
        });
    }
    Ok(out)
}
