use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchorlex::config::{
    parse_classes, parse_frequency_mode, parse_retrieval, parse_scheme, PipelineConfig, RefineMode,
};
use anchorlex::error::{AppError, Result};
use anchorlex::report::{self, Table};
use anchorlex::{corpus, formats, pipeline, synthetic, with_threads};
use anchorlex_core::evalkit::{eval_probe, precision_at_k, train_probe, MajorityBaseline, OovPolicy, ProbeConfig};
use anchorlex_core::lexicon::{build_identical_dictionary, filter_by_class, sample_seed};
use anchorlex_core::mapper::{fit, map_spaces, MapperConfig, SelfLearnConfig};
use anchorlex_core::refine::{average_plain, average_weighted, meemi_transform, CrossLingualSpace, FrequencyMode};
use anchorlex_core::space::NormStep;
use anchorlex_core::token::TokenizerConfig;
use anchorlex_core::vocab::build_vocabulary;
use anchorlex_core::{EmbeddingSpace, Retrieval};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "anchorlex",
    version,
    about = "Cross-lingual embedding alignment with identical-token anchors"
)]
struct Cli {
    /// Worker threads; defaults to ANCHORLEX_THREADS, then all CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tweet, token and unique-token counts of corpora.
    Stats(StatsArgs),
    /// Build a vocabulary TSV from corpora.
    Vocab(VocabArgs),
    /// Build or sample a seed dictionary.
    Dict(DictArgs),
    /// Learn the mapping and write the model and aligned spaces.
    Align(AlignArgs),
    /// Post-process an aligned pair of spaces.
    Refine(RefineArgs),
    /// Word translation precision at k.
    EvalTranslate(EvalTranslateArgs),
    /// Sentiment transfer with a frozen-embedding probe.
    EvalSentiment(EvalSentimentArgs),
    /// Ablation over identical-token classes from a config file.
    Ablation(RunArgs),
    /// Full pipeline from a config file.
    Pipeline(RunArgs),
    /// Write a synthetic fixture with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TokenizerArgs {
    /// Keep the original case of words.
    #[arg(long)]
    no_lowercase: bool,
}

impl TokenizerArgs {
    fn config(&self) -> TokenizerConfig {
        TokenizerConfig {
            lowercase: !self.no_lowercase,
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[arg(required = true)]
    corpora: Vec<PathBuf>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(required = true)]
    corpora: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct DictArgs {
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    /// Sample this many pairs from an external dictionary instead of
    /// building the identical-token dictionary.
    #[arg(long, requires = "sample_from")]
    sample: Option<usize>,
    #[arg(long)]
    sample_from: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Keep only these token classes (numeral, emoji, emoticon, word).
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// Report coverage of this test dictionary.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    exclude_identical_test_pairs: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Frequency sidecar for the source embeddings.
    #[arg(long)]
    src_vocab: Option<PathBuf>,
    #[arg(long)]
    tgt_vocab: Option<PathBuf>,
}

impl SpaceArgs {
    fn load(&self) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
        let s = formats::load_embeddings(&self.src, None, self.src_vocab.as_deref())?;
        let t = formats::load_embeddings(&self.tgt, Some(s.dim()), self.tgt_vocab.as_deref())?;
        Ok((s, t))
    }
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Seed dictionary; the identical-token dictionary when absent.
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Normalization steps applied before mapping.
    #[arg(long, value_delimiter = ',', default_value = "unit,center,unit")]
    normalize: Vec<String>,
    #[arg(long)]
    no_self_learning: bool,
    /// CSLS for dictionary induction.
    #[arg(long)]
    csls: bool,
    #[arg(long, default_value_t = 20_000)]
    cutoff: usize,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Re-weighting exponent in [0, 1].
    #[arg(long)]
    reweight: Option<f64>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    src_out: PathBuf,
    #[arg(long)]
    tgt_out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    Plain,
    Weighted,
    Meemi,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, value_enum, default_value = "weighted")]
    mode: RefineArg,
    /// Relative instead of absolute frequencies.
    #[arg(long)]
    relative: bool,
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    #[arg(long)]
    src_out: PathBuf,
    #[arg(long)]
    tgt_out: PathBuf,
}

#[derive(Args)]
struct EvalTranslateArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    ks: Vec<usize>,
    #[arg(long)]
    csls: bool,
    #[arg(long)]
    oov_as_wrong: bool,
    #[arg(long)]
    exclude_identical_test_pairs: bool,
    /// Write ranked candidates per query to this TSV.
    #[arg(long)]
    per_query: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSentimentArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// two-class or three-class; inferred from the labels when absent.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output parent directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csls: bool,
    #[arg(long)]
    oov_as_wrong: bool,
    #[arg(long)]
    exclude_identical_test_pairs: bool,
    #[arg(long)]
    relative: bool,
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    ablation: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Translation,
    Sentiment,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vocabulary size of the translation fixture; other counts scale with it.
    #[arg(long)]
    n: Option<usize>,
}

fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| AppError::io("<stdout>", e))
}

fn norm_steps(names: &[String]) -> Result<Vec<NormStep>> {
    names
        .iter()
        .map(|s| match s.as_str() {
            "unit" => Ok(NormStep::UnitRows),
            "center" => Ok(NormStep::CenterColumns),
            o => Err(AppError::Config(format!("unknown normalization step {o:?}"))),
        })
        .collect()
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let mut t = Table::new(["corpus", "tweets", "tokens", "unique"]);
    for p in &a.corpora {
        let c = corpus::count_files(&[p.as_path()], &a.tokenizer.config())?;
        let s = c.stats();
        t.push([
            p.display().to_string(),
            s.tweets.to_string(),
            s.tokens.to_string(),
            s.unique.to_string(),
        ]);
    }
    print(&t.markdown())
}

fn cmd_vocab(a: &VocabArgs) -> Result<()> {
    let paths: Vec<&Path> = a.corpora.iter().map(PathBuf::as_path).collect();
    let counts = corpus::count_files(&paths, &a.tokenizer.config())?;
    let (v, r) = build_vocabulary(&counts, a.min_count)?;
    formats::save_vocab(&a.out, &v)?;
    let mut t = Table::new(["tweets", "tokens", "unique", "retained_types", "dropped_types"]);
    t.push([
        r.corpus.tweets.to_string(),
        r.corpus.tokens.to_string(),
        r.corpus.unique.to_string(),
        r.retained_types.to_string(),
        r.dropped_types.to_string(),
    ]);
    print(&t.markdown())
}

fn cmd_dict(a: &DictArgs) -> Result<()> {
    let sv = formats::load_vocab(&a.src_vocab)?;
    let tv = formats::load_vocab(&a.tgt_vocab)?;
    let mut dict = match (a.sample, &a.sample_from) {
        (Some(k), Some(from)) => sample_seed(&formats::load_test_dictionary(from)?, &sv, &tv, k, a.seed)?,
        _ => build_identical_dictionary(&sv, &tv),
    };
    let keep = parse_classes(&a.classes)?;
    if !keep.is_empty() {
        dict = filter_by_class(&dict, &keep);
    }
    formats::save_dictionary(&a.out, &dict, &sv, &tv)?;
    let mut t = Table::new(["class", "pairs"]);
    for (c, n) in dict.class_counts() {
        t.push([c.to_string(), n.to_string()]);
    }
    t.push(["all".to_string(), dict.len().to_string()]);
    let mut out = t.markdown();
    if let Some(p) = &a.test {
        let mut test = formats::load_test_dictionary(p)?;
        if a.exclude_identical_test_pairs {
            test = test.without_identical();
        }
        let c = test.coverage(&sv, &tv, Some(&dict));
        let mut ct = Table::new(["entries", "src_in_vocab_%", "identical_%", "in_dictionary_%"]);
        ct.push([
            c.entries.to_string(),
            format!("{:.2}", 100.0 * c.src_in_vocab_rate()),
            format!("{:.2}", 100.0 * c.identical_rate()),
            format!("{:.2}", 100.0 * c.in_dictionary_rate()),
        ]);
        out.push('\n');
        out.push_str(&ct.markdown());
    }
    print(&out)
}

fn cmd_align(a: &AlignArgs) -> Result<()> {
    let (s, t) = a.spaces.load()?;
    let steps = norm_steps(&a.normalize)?;
    let (s, t) = (s.normalize(&steps)?, t.normalize(&steps)?);
    let dict = match &a.dict {
        Some(p) => formats::load_dictionary(p, s.vocab(), t.vocab())?,
        None => build_identical_dictionary(s.vocab(), t.vocab()),
    };
    let config = MapperConfig {
        self_learn: (!a.no_self_learning).then_some(SelfLearnConfig {
            induce_vocab_cutoff: a.cutoff,
            retrieval: if a.csls { Retrieval::csls() } else { Retrieval::Cosine },
            max_iters: a.max_iters,
            tol: a.tol,
        }),
        reweight: a.reweight,
    };
    let model = fit(&s, &t, &dict, &config)?;
    formats::save_model(&a.model, &model)?;
    let (ms, mt) = map_spaces(&model, &s, &t)?;
    formats::save_embeddings(&a.src_out, &ms)?;
    formats::save_embeddings(&a.tgt_out, &mt)?;
    let mut tab = Table::new(["iteration", "objective", "pairs", "accepted"]);
    for h in &model.diagnostics.history {
        tab.push([
            h.iteration.to_string(),
            format!("{:.6}", h.objective),
            h.dict_size.to_string(),
            h.accepted.to_string(),
        ]);
    }
    print(&tab.markdown())
}

fn cmd_refine(a: &RefineArgs) -> Result<()> {
    let (s, t) = a.spaces.load()?;
    let mut dict = formats::load_dictionary(&a.dict, s.vocab(), t.vocab())?;
    let keep = parse_classes(&a.classes)?;
    if !keep.is_empty() {
        dict = filter_by_class(&dict, &keep);
    }
    let space = CrossLingualSpace::new(s, t)?;
    let mode = if a.relative {
        FrequencyMode::Relative
    } else {
        FrequencyMode::Absolute
    };
    let out = match a.mode {
        RefineArg::Plain => average_plain(&space, &dict)?,
        RefineArg::Weighted => average_weighted(&space, &dict, mode)?,
        RefineArg::Meemi => meemi_transform(&space, &dict)?,
    };
    formats::save_embeddings(&a.src_out, &out.src)?;
    formats::save_embeddings(&a.tgt_out, &out.tgt)?;
    log::info!("refined with {} pairs", dict.len());
    Ok(())
}

fn cmd_eval_translate(a: &EvalTranslateArgs) -> Result<()> {
    let (s, t) = a.spaces.load()?;
    let space = CrossLingualSpace::new(s, t)?;
    let mut test = formats::load_test_dictionary(&a.test)?;
    if a.exclude_identical_test_pairs {
        test = test.without_identical();
    }
    let retrieval = if a.csls { Retrieval::csls() } else { Retrieval::Cosine };
    let oov = if a.oov_as_wrong {
        OovPolicy::CountWrong
    } else {
        OovPolicy::Skip
    };
    let rep = precision_at_k(&space, &test, &a.ks, retrieval, oov, a.per_query.is_some())?;
    if let Some(p) = &a.per_query {
        std::fs::write(p, report::per_query_table(&rep).tsv()).map_err(|e| AppError::io(p, e))?;
    }
    let coverage = test.coverage(space.src.vocab(), space.tgt.vocab(), None);
    print(&report::translation_table(&rep, Some(&coverage)).markdown())
}

fn cmd_eval_sentiment(a: &EvalSentimentArgs) -> Result<()> {
    let (s, t) = a.spaces.load()?;
    let scheme = a.scheme.as_deref().map(parse_scheme).transpose()?;
    let tok = a.tokenizer.config();
    let train = formats::load_sentiment(&a.train, scheme, &tok)?;
    let test = formats::load_sentiment(&a.test, Some(train.scheme()), &tok)?;
    let probe = ProbeConfig {
        epochs: a.epochs,
        lr: a.lr,
        l2: a.l2,
    };
    let model = train_probe(&train, &s, &probe)?;
    let r = eval_probe(&model, &test, &t)?;
    let m = MajorityBaseline::fit(&train)?.evaluate(&test)?;
    let mut out = report::sentiment_table(&[("probe", &r), ("majority", &m)]).markdown();
    out.push('\n');
    out.push_str(&report::confusion_table(&r).markdown());
    print(&out)
}

fn run_config(a: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    let base_hash = cfg.hash();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output.dir = o.clone();
    }
    if a.csls {
        cfg.eval.retrieval = "csls".into();
    }
    cfg.eval.oov_as_wrong |= a.oov_as_wrong;
    cfg.eval.exclude_identical_test_pairs |= a.exclude_identical_test_pairs;
    cfg.eval.ablation |= a.ablation;
    if a.relative {
        cfg.refine.frequencies = "relative".into();
    }
    if let Some(m) = &a.refine {
        cfg.refine.mode = match m.as_str() {
            "none" => RefineMode::None,
            "plain" => RefineMode::Plain,
            "weighted" => RefineMode::Weighted,
            "meemi" => RefineMode::Meemi,
            o => return Err(AppError::Config(format!("unknown refine mode {o:?}"))),
        };
    }
    parse_frequency_mode(&cfg.refine.frequencies)?;
    parse_retrieval(&cfg.eval.retrieval, cfg.eval.csls_k)?;
    // Overrides change the run, so they change the hash; the output
    // location does not.
    let mut probe = cfg.clone();
    probe.source_hash = None;
    probe.paths = Default::default();
    probe.output = Default::default();
    let overrides = probe.hash();
    cfg.source_hash = Some(pipeline::sha256_hex(format!("{base_hash}{overrides}").as_bytes()));
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    match a.kind {
        SynthKind::Translation => {
            let c = synthetic::TranslationConfig {
                seed: a.seed,
                ..a.n.map_or_else(Default::default, synthetic::TranslationConfig::scaled)
            };
            synthetic::write_translation_fixture(&a.out, &c)
        }
        SynthKind::Sentiment => synthetic::write_sentiment_fixture(
            &a.out,
            &synthetic::SentimentConfig {
                seed: a.seed,
                ..Default::default()
            },
        ),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Vocab(a) => cmd_vocab(a),
        Command::Dict(a) => cmd_dict(a),
        Command::Align(a) => cmd_align(a),
        Command::Refine(a) => cmd_refine(a),
        Command::EvalTranslate(a) => cmd_eval_translate(a),
        Command::EvalSentiment(a) => cmd_eval_sentiment(a),
        Command::Ablation(a) => {
            let o = anchorlex::cmd_ablation(&run_config(a)?)?;
            print(&format!("{}\n", o.dir.display()))
        }
        Command::Pipeline(a) => {
            let o = anchorlex::cmd_pipeline(&run_config(a)?)?;
            print(&format!("{}\n", o.dir.display()))
        }
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = with_threads(cli.threads, || run(&cli)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
