//! End-to-end runs driven by a [`PipelineConfig`], writing an immutable run
//! directory with reports, artifacts, a provenance log and a manifest.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anchorlex_core::evalkit::{
    eval_probe, precision_at_k, run_ablation, train_probe, MajorityBaseline, SentimentDataset, SentimentTask,
};
use anchorlex_core::lexicon::{build_identical_dictionary, filter_by_class, sample_seed};
use anchorlex_core::mapper::{fit, map_spaces};
use anchorlex_core::refine::{average_plain, average_weighted, meemi_transform, CrossLingualSpace};
use anchorlex_core::vocab::build_vocabulary;
use anchorlex_core::{BilingualDictionary, EmbeddingSpace, TestDictionary, Vocabulary};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{parse_classes, parse_frequency_mode, DictionaryMode, PipelineConfig, RefineMode};
use crate::error::{AppError, Result};
use crate::report::{self, Provenance, Table};
use crate::{corpus, formats};

/// Runs `f` on a dedicated thread pool. `None` or `Some(0)` uses the
/// `ANCHORLEX_THREADS` variable, falling back to the number of CPUs.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let n = threads
        .filter(|&n| n > 0)
        .or_else(|| std::env::var("ANCHORLEX_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> Result<String> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| AppError::io(path, e))
}

/// Creates `<parent>/run-<UTC time>-<hash8>`, adding a numeric suffix if
/// that name is taken.
fn create_run_dir(parent: &Path, hash: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("run-{stamp}-{}", &hash[..8]);
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(AppError::io(&dir, e)),
        }
    }
    unreachable!()
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    /// Report file names relative to `dir`.
    pub reports: Vec<String>,
}

struct Run {
    dir: PathBuf,
    prov: Provenance,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<(String, String)>,
    reports: Vec<String>,
    events: Vec<Value>,
    completed: Vec<String>,
}

impl Run {
    fn start(cfg: &PipelineConfig) -> Result<Run> {
        let hash = cfg.hash();
        let dir = create_run_dir(&cfg.output.dir, &hash)?;
        log::info!("run directory {}", dir.display());
        let mut run = Run {
            dir,
            prov: Provenance {
                config_hash: hash,
                seed: cfg.seed,
            },
            inputs: Vec::new(),
            outputs: Vec::new(),
            reports: Vec::new(),
            events: Vec::new(),
            completed: Vec::new(),
        };
        let json = serde_json::to_string_pretty(cfg).expect("config is serializable");
        run.write("config.json", format!("{json}\n").as_bytes())?;
        Ok(run)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| AppError::io(&path, e))?;
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    fn report(&mut self, name: &str, body: String) -> Result<()> {
        self.write(name, body.as_bytes())?;
        self.reports.push(name.to_string());
        Ok(())
    }

    /// A data file in a format without comment syntax; its provenance goes
    /// to `<name>.provenance.json`.
    fn artifact(&mut self, name: &str, bytes: &[u8], extra: Value) -> Result<()> {
        self.write(name, bytes)?;
        let mut meta = self.prov.to_json();
        meta["artifact"] = json!(name);
        meta["sha256"] = json!(sha256_hex(bytes));
        if !extra.is_null() {
            meta["detail"] = extra;
        }
        let body = serde_json::to_string_pretty(&meta).expect("json");
        self.write(&format!("{name}.provenance.json"), format!("{body}\n").as_bytes())
    }

    fn tables(&mut self, stem: &str, title: &str, tsv: &Table, md: &[&Table], notes: &[String]) -> Result<()> {
        self.report(&format!("{stem}.tsv"), report::render_tsv(&self.prov, tsv))?;
        self.report(
            &format!("{stem}.md"),
            report::render_markdown(&self.prov, title, md, notes),
        )
    }

    fn event(&mut self, stage: &str, detail: Value) {
        self.events.push(json!({ "stage": stage, "detail": detail }));
    }

    /// Writes the provenance log and the manifest. With `failed`, the
    /// manifest lists what was produced before the failure.
    fn finish(&mut self, failed: Option<(&str, &AppError)>) -> Result<PathBuf> {
        let mut log = String::new();
        for e in &self.events {
            log.push_str(&serde_json::to_string(e).expect("json"));
            log.push('\n');
        }
        self.write("provenance.jsonl", log.as_bytes())?;
        let manifest = json!({
            "status": if failed.is_some() { "failed" } else { "ok" },
            "failed_stage": failed.map(|f| f.0),
            "error": failed.map(|f| f.1.to_string()),
            "provenance": self.prov.to_json(),
            "stages_completed": self.completed,
            "inputs": self.inputs.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<_>>(),
            "outputs": self.outputs.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<_>>(),
        });
        let path = self.dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest).expect("json");
        let mut f = formats::create(&path)?;
        writeln!(f, "{body}")
            .and_then(|_| f.flush())
            .map_err(|e| AppError::io(&path, e))?;
        Ok(path)
    }

    /// Runs one stage; on failure the partial manifest is written and the
    /// error is wrapped with the stage name.
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        match f(self) {
            Ok(v) => {
                self.completed.push(name.to_string());
                Ok(v)
            }
            Err(e) => {
                let manifest = self.finish(Some((name, &e))).ok();
                Err(AppError::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                    manifest,
                })
            }
        }
    }

    fn outcome(mut self) -> Result<RunOutcome> {
        let manifest = self.finish(None)?;
        Ok(RunOutcome {
            dir: self.dir,
            manifest,
            reports: self.reports,
        })
    }
}

fn bytes_of(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// Frequencies for one side: the vocabulary file if given, else counted
/// from the corpora (and saved), else none.
fn side_frequencies(
    run: &mut Run,
    cfg: &PipelineConfig,
    side: &str,
    vocab: Option<&PathBuf>,
    corpora: &[PathBuf],
) -> Result<Option<HashMap<String, u64>>> {
    if let Some(v) = vocab {
        return formats::load_frequencies(v).map(Some);
    }
    if corpora.is_empty() {
        return Ok(None);
    }
    let paths: Vec<&Path> = corpora.iter().map(PathBuf::as_path).collect();
    let counts = corpus::count_files(&paths, &cfg.tokenizer.tokenizer())?;
    let (v, rep) = build_vocabulary(&counts, cfg.tokenizer.min_count)?;
    let mut t = Table::new(["tweets", "tokens", "unique", "retained_types", "retained_tokens"]);
    t.push([
        rep.corpus.tweets.to_string(),
        rep.corpus.tokens.to_string(),
        rep.corpus.unique.to_string(),
        rep.retained_types.to_string(),
        rep.retained_tokens.to_string(),
    ]);
    run.tables(&format!("{side}.stats"), &format!("{side} corpus"), &t, &[&t], &[])?;
    run.artifact(
        &format!("{side}.vocab.tsv"),
        &bytes_of(|b| formats::write_vocab(b, &v)),
        Value::Null,
    )?;
    run.event(
        "corpus",
        json!({"side": side, "tweets": rep.corpus.tweets, "tokens": rep.corpus.tokens, "unique": rep.corpus.unique}),
    );
    Ok(Some(v.iter().map(|(t, f, _)| (t.to_string(), f)).collect()))
}

struct Loaded {
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
}

fn load_stage(run: &mut Run, cfg: &PipelineConfig) -> Result<Loaded> {
    for p in cfg.inputs() {
        let h = sha256_file(p)?;
        run.inputs.push((p.to_path_buf(), h));
    }
    let p = &cfg.paths;
    let fs = side_frequencies(run, cfg, "src", p.src_vocab.as_ref(), &p.src_corpus)?;
    let ft = side_frequencies(run, cfg, "tgt", p.tgt_vocab.as_ref(), &p.tgt_corpus)?;
    let src = formats::read_embeddings(formats::open(&p.src_embeddings)?, &p.src_embeddings, None, fs.as_ref())?;
    let tgt = formats::read_embeddings(
        formats::open(&p.tgt_embeddings)?,
        &p.tgt_embeddings,
        Some(src.dim()),
        ft.as_ref(),
    )?;
    run.event(
        "embed_store",
        json!({"src_rows": src.len(), "tgt_rows": tgt.len(), "dim": src.dim()}),
    );
    let steps = cfg.norm_steps()?;
    let src = src.normalize(&steps)?;
    let tgt = tgt.normalize(&steps)?;
    run.event("normalize", json!({"steps": cfg.normalize.steps}));
    Ok(Loaded { src, tgt })
}

fn class_counts(dict: &BilingualDictionary) -> Value {
    json!(dict
        .class_counts()
        .into_iter()
        .map(|(c, n)| (c.as_str().to_string(), n))
        .collect::<std::collections::BTreeMap<_, _>>())
}

fn dictionary_stage(run: &mut Run, cfg: &PipelineConfig, l: &Loaded) -> Result<BilingualDictionary> {
    let (sv, tv) = (l.src.vocab(), l.tgt.vocab());
    let dict = match cfg.dictionary.mode {
        DictionaryMode::Identical => {
            let all = build_identical_dictionary(sv, tv);
            let keep = parse_classes(&cfg.dictionary.classes)?;
            if keep.is_empty() {
                all
            } else {
                filter_by_class(&all, &keep)
            }
        }
        DictionaryMode::ExternalSeed => {
            let path = cfg.paths.seed_dictionary.as_ref().expect("validated");
            let source = formats::load_test_dictionary(path)?;
            sample_seed(&source, sv, tv, cfg.dictionary.k, cfg.seed)?
        }
        DictionaryMode::File => {
            let path = cfg.paths.seed_dictionary.as_ref().expect("validated");
            formats::load_dictionary(path, sv, tv)?
        }
    };
    if dict.is_empty() {
        log::warn!("the seed dictionary is empty");
    }
    log::info!("seed dictionary: {} pairs", dict.len());
    run.event(
        "lexicon",
        json!({"mode": cfg.dictionary.mode, "pairs": dict.len(), "classes": class_counts(&dict)}),
    );
    run.artifact(
        "dictionary.tsv",
        &bytes_of(|b| formats::write_dictionary(b, &dict, sv, tv)),
        json!({"pairs": dict.len()}),
    )?;
    Ok(dict)
}

fn align_stage(
    run: &mut Run,
    cfg: &PipelineConfig,
    l: &Loaded,
    dict: &BilingualDictionary,
) -> Result<CrossLingualSpace> {
    let model = fit(&l.src, &l.tgt, dict, &cfg.mapper_config()?)?;
    let d = &model.diagnostics;
    run.event(
        "mapper",
        json!({
            "iterations": d.iterations,
            "best_iteration": d.best_iteration,
            "history": d.history.iter().map(|h| json!({
                "iteration": h.iteration, "objective": h.objective, "pairs": h.dict_size, "accepted": h.accepted
            })).collect::<Vec<_>>(),
            "reweight": model.reweight.as_ref().map(|r| r.s),
        }),
    );
    run.artifact(
        "model.txt",
        &bytes_of(|b| formats::write_model(b, &model)),
        json!({"iterations": d.iterations, "final_objective": d.final_objective()}),
    )?;
    let (s, t) = map_spaces(&model, &l.src, &l.tgt)?;
    let mut space = CrossLingualSpace::new(s, t)?;
    space.record(
        "map",
        format!("iterations={} reweight={:?}", d.iterations, cfg.mapper.reweight),
    );
    Ok(space)
}

fn refine_stage(
    run: &mut Run,
    cfg: &PipelineConfig,
    space: CrossLingualSpace,
    dict: &BilingualDictionary,
) -> Result<CrossLingualSpace> {
    let keep = parse_classes(&cfg.refine.classes)?;
    let used = if keep.is_empty() {
        dict.clone()
    } else {
        filter_by_class(dict, &keep)
    };
    let mode = parse_frequency_mode(&cfg.refine.frequencies)?;
    let out = match cfg.refine.mode {
        RefineMode::None => space,
        RefineMode::Plain => average_plain(&space, &used)?,
        RefineMode::Weighted => average_weighted(&space, &used, mode)?,
        RefineMode::Meemi => meemi_transform(&space, &used)?,
    };
    run.event(
        "refine",
        json!({"mode": cfg.refine.mode.as_str(), "pairs": used.len(), "frequencies": cfg.refine.frequencies}),
    );
    let transforms: Vec<Value> = out
        .provenance()
        .iter()
        .map(|t| json!({"name": t.name, "detail": t.detail}))
        .collect();
    run.artifact(
        "src.aligned.vec",
        &bytes_of(|b| formats::write_embeddings(b, &out.src)),
        json!({"transforms": transforms}),
    )?;
    run.artifact(
        "tgt.aligned.vec",
        &bytes_of(|b| formats::write_embeddings(b, &out.tgt)),
        json!({"transforms": transforms}),
    )?;
    Ok(out)
}

fn load_test(cfg: &PipelineConfig) -> Result<Option<TestDictionary>> {
    let Some(path) = &cfg.paths.test_dictionary else {
        return Ok(None);
    };
    let test = formats::load_test_dictionary(path)?;
    Ok(Some(if cfg.eval.exclude_identical_test_pairs {
        test.without_identical()
    } else {
        test
    }))
}

fn translate_stage(
    run: &mut Run,
    cfg: &PipelineConfig,
    space: &CrossLingualSpace,
    dict: &BilingualDictionary,
    test: &TestDictionary,
) -> Result<()> {
    let coverage = test.coverage(space.src.vocab(), space.tgt.vocab(), Some(dict));
    let rep = precision_at_k(
        space,
        test,
        &cfg.eval.ks,
        cfg.eval_retrieval()?,
        cfg.oov(),
        cfg.eval.per_query,
    )?;
    let t = report::translation_table(&rep, Some(&coverage));
    run.tables("translation", "Word translation", &t, &[&t], &[])?;
    if cfg.eval.per_query {
        let q = report::per_query_table(&rep);
        run.report("per_query.tsv", report::render_tsv(&run.prov.clone(), &q))?;
    }
    run.event(
        "evalkit.translation",
        json!({
            "p_at": rep.p_at.iter().map(|(k, p)| json!({"k": k, "p": p})).collect::<Vec<_>>(),
            "covered": rep.covered, "skipped": rep.skipped, "total": rep.total,
        }),
    );
    Ok(())
}

fn load_sentiment(cfg: &PipelineConfig) -> Result<Option<(SentimentDataset, SentimentDataset)>> {
    let (Some(tr), Some(te)) = (&cfg.paths.sentiment_train, &cfg.paths.sentiment_test) else {
        return Ok(None);
    };
    let tok = cfg.tokenizer.tokenizer();
    let train = formats::load_sentiment(tr, cfg.scheme()?, &tok)?;
    let test = formats::load_sentiment(te, Some(train.scheme()), &tok)?;
    Ok(Some((train, test)))
}

fn sentiment_stage(
    run: &mut Run,
    cfg: &PipelineConfig,
    space: &CrossLingualSpace,
    train: &SentimentDataset,
    test: &SentimentDataset,
) -> Result<()> {
    let model = train_probe(train, &space.src, &cfg.probe_config())?;
    let probe = eval_probe(&model, test, &space.tgt)?;
    let majority = match &cfg.paths.sentiment_majority {
        Some(p) => {
            let d = formats::load_sentiment(p, Some(train.scheme()), &cfg.tokenizer.tokenizer())?;
            MajorityBaseline::fit(&d)?
        }
        None => MajorityBaseline::fit(train)?,
    };
    let base = majority.evaluate(test)?;
    let t = report::sentiment_table(&[("probe", &probe), ("majority", &base)]);
    let c = report::confusion_table(&probe);
    run.tables("sentiment", "Sentiment transfer", &t, &[&t, &c], &[])?;
    run.event(
        "evalkit.sentiment",
        json!({
            "scheme": train.scheme().name(),
            "accuracy": probe.accuracy, "macro_f1": probe.macro_f1,
            "majority_label": majority.label.as_str(), "majority_accuracy": base.accuracy,
            "loss_first": model.loss_log.first(), "loss_last": model.loss_log.last(),
        }),
    );
    Ok(())
}

fn ablation_stage(
    run: &mut Run,
    cfg: &PipelineConfig,
    l: &Loaded,
    dict: &BilingualDictionary,
    test: Option<&TestDictionary>,
    sentiment: Option<&(SentimentDataset, SentimentDataset)>,
) -> Result<()> {
    let empty = TestDictionary::from_pairs(Vec::<(String, String)>::new());
    let test = test.unwrap_or(&empty);
    let task = sentiment.map(|(a, b)| SentimentTask { train: a, test: b });
    let table = run_ablation(&l.src, &l.tgt, dict, test, task, &cfg.ablation_config()?)?;
    let (t, notes) = report::ablation_table(&table);
    run.tables("ablation", "Ablation over identical-token classes", &t, &[&t], &notes)?;
    run.event(
        "evalkit.ablation",
        json!({"rows": table.rows.iter().map(|r| json!({"dictionary": r.group.label(), "pairs": r.pairs})).collect::<Vec<_>>()}),
    );
    Ok(())
}

/// Full pipeline: load, dictionary, align, refine, evaluate and, when
/// configured, the ablation grid.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let mut run = Run::start(cfg)?;
    let loaded = run.stage("load", |r| load_stage(r, cfg))?;
    let dict = run.stage("dictionary", |r| dictionary_stage(r, cfg, &loaded))?;
    let space = run.stage("align", |r| align_stage(r, cfg, &loaded, &dict))?;
    let space = run.stage("refine", |r| refine_stage(r, cfg, space, &dict))?;
    let test = run.stage("load-test", |_| load_test(cfg))?;
    if let Some(test) = &test {
        run.stage("eval-translate", |r| translate_stage(r, cfg, &space, &dict, test))?;
    }
    let sentiment = run.stage("load-sentiment", |_| load_sentiment(cfg))?;
    if let Some((train, test)) = &sentiment {
        run.stage("eval-sentiment", |r| sentiment_stage(r, cfg, &space, train, test))?;
    }
    if cfg.eval.ablation {
        run.stage("ablation", |r| {
            ablation_stage(r, cfg, &loaded, &dict, test.as_ref(), sentiment.as_ref())
        })?;
    }
    run.outcome()
}

/// Ablation grid only: every identical-token class subset of the seed
/// dictionary, with and without weighted averaging.
pub fn cmd_ablation(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let mut run = Run::start(cfg)?;
    let loaded = run.stage("load", |r| load_stage(r, cfg))?;
    let dict = run.stage("dictionary", |r| dictionary_stage(r, cfg, &loaded))?;
    let test = run.stage("load-test", |_| load_test(cfg))?;
    let sentiment = run.stage("load-sentiment", |_| load_sentiment(cfg))?;
    run.stage("ablation", |r| {
        ablation_stage(r, cfg, &loaded, &dict, test.as_ref(), sentiment.as_ref())
    })?;
    run.outcome()
}

/// Vocabulary helper shared with the CLI: counts corpora and applies the cutoff.
pub fn vocabulary_from_corpora(
    paths: &[&Path],
    cfg: &crate::config::TokenizerSection,
) -> Result<(Vocabulary, anchorlex_core::vocab::VocabReport)> {
    let counts = corpus::count_files(paths, &cfg.tokenizer())?;
    Ok(build_vocabulary(&counts, cfg.min_count)?)
}
