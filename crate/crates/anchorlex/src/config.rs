//! Declarative pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use anchorlex_core::evalkit::{AblationConfig, OovPolicy, ProbeConfig, Scheme};
use anchorlex_core::mapper::{MapperConfig, SelfLearnConfig};
use anchorlex_core::refine::FrequencyMode;
use anchorlex_core::space::NormStep;
use anchorlex_core::token::{TokenClass, TokenizerConfig};
use anchorlex_core::Retrieval;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    #[serde(default)]
    pub dictionary: DictionarySection,
    #[serde(default)]
    pub normalize: NormalizeSection,
    #[serde(default)]
    pub mapper: MapperSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Hash of the file as written, before path resolution.
    #[serde(skip)]
    pub source_hash: Option<String>,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Raw tweet corpora; used to build the frequency sidecars when no
    /// vocabulary file is given.
    #[serde(default)]
    pub src_corpus: Vec<PathBuf>,
    #[serde(default)]
    pub tgt_corpus: Vec<PathBuf>,
    pub src_embeddings: PathBuf,
    pub tgt_embeddings: PathBuf,
    pub src_vocab: Option<PathBuf>,
    pub tgt_vocab: Option<PathBuf>,
    pub test_dictionary: Option<PathBuf>,
    pub seed_dictionary: Option<PathBuf>,
    pub sentiment_train: Option<PathBuf>,
    pub sentiment_test: Option<PathBuf>,
    /// Training split in the target language, used only for the majority baseline.
    pub sentiment_majority: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizerSection {
    pub lowercase: bool,
    pub min_count: u64,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        TokenizerSection {
            lowercase: true,
            min_count: 5,
        }
    }
}

impl TokenizerSection {
    pub fn tokenizer(&self) -> TokenizerConfig {
        TokenizerConfig {
            lowercase: self.lowercase,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryMode {
    /// Identical tokens of both vocabularies.
    #[default]
    Identical,
    /// `k` pairs sampled from `paths.seed_dictionary`.
    ExternalSeed,
    /// `paths.seed_dictionary` used as is.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionarySection {
    pub mode: DictionaryMode,
    pub k: usize,
    /// Token classes kept in an identical dictionary; empty keeps all.
    pub classes: Vec<String>,
}

impl Default for DictionarySection {
    fn default() -> Self {
        DictionarySection {
            mode: DictionaryMode::Identical,
            k: 100,
            classes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizeSection {
    /// Any of `unit`, `center`.
    pub steps: Vec<String>,
}

impl Default for NormalizeSection {
    fn default() -> Self {
        NormalizeSection {
            steps: vec!["unit".into(), "center".into(), "unit".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapperSection {
    pub self_learning: bool,
    pub induce_vocab_cutoff: usize,
    pub retrieval: String,
    pub csls_k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub reweight: Option<f64>,
}

impl Default for MapperSection {
    fn default() -> Self {
        let s = SelfLearnConfig::default();
        MapperSection {
            self_learning: true,
            induce_vocab_cutoff: s.induce_vocab_cutoff,
            retrieval: "cosine".into(),
            csls_k: Retrieval::DEFAULT_CSLS_K,
            max_iters: s.max_iters,
            tol: s.tol,
            reweight: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineMode {
    None,
    Plain,
    #[default]
    Weighted,
    Meemi,
}

impl RefineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RefineMode::None => "none",
            RefineMode::Plain => "plain",
            RefineMode::Weighted => "weighted",
            RefineMode::Meemi => "meemi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    pub mode: RefineMode,
    /// `absolute` or `relative`.
    pub frequencies: String,
    /// Token classes of the dictionary pairs used for refinement; empty uses all.
    pub classes: Vec<String>,
}

impl Default for RefineSection {
    fn default() -> Self {
        RefineSection {
            mode: RefineMode::Weighted,
            frequencies: "absolute".into(),
            classes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub retrieval: String,
    pub csls_k: usize,
    pub oov_as_wrong: bool,
    pub exclude_identical_test_pairs: bool,
    pub per_query: bool,
    pub ablation: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ks: vec![1, 5, 10],
            retrieval: "cosine".into(),
            csls_k: Retrieval::DEFAULT_CSLS_K,
            oov_as_wrong: false,
            exclude_identical_test_pairs: false,
            per_query: false,
            ablation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    /// `two-class`, `three-class`, or absent to infer from the labels.
    pub scheme: Option<String>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = ProbeConfig::default();
        ProbeSection {
            epochs: p.epochs,
            lr: p.lr,
            l2: p.l2,
            scheme: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into() }
    }
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

pub fn parse_retrieval(name: &str, k: usize) -> Result<Retrieval> {
    match name {
        "cosine" => Ok(Retrieval::Cosine),
        "csls" if k >= 1 => Ok(Retrieval::Csls { k }),
        "csls" => Err(bad("csls_k must be at least 1")),
        other => Err(bad(format!("unknown retrieval {other:?} (expected cosine or csls)"))),
    }
}

pub fn parse_classes(names: &[String]) -> Result<Vec<TokenClass>> {
    names
        .iter()
        .map(|n| TokenClass::parse(n).ok_or_else(|| bad(format!("unknown token class {n:?}"))))
        .collect()
}

pub fn parse_frequency_mode(name: &str) -> Result<FrequencyMode> {
    match name {
        "absolute" => Ok(FrequencyMode::Absolute),
        "relative" => Ok(FrequencyMode::Relative),
        other => Err(bad(format!("unknown frequency mode {other:?}"))),
    }
}

pub fn parse_scheme(name: &str) -> Result<Scheme> {
    match name {
        "two-class" | "2" => Ok(Scheme::TwoClass),
        "three-class" | "3" => Ok(Scheme::ThreeClass),
        other => Err(bad(format!("unknown sentiment scheme {other:?}"))),
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.source_hash = Some(cfg.hash());
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON encoding. For a loaded file this is
    /// taken before relative paths are resolved, so it does not depend on
    /// where the fixture lives.
    pub fn hash(&self) -> String {
        if let Some(h) = &self.source_hash {
            return h.clone();
        }
        let json = serde_json::to_string(self).expect("config is serializable");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        p.src_corpus.iter_mut().for_each(fix);
        p.tgt_corpus.iter_mut().for_each(fix);
        fix(&mut p.src_embeddings);
        fix(&mut p.tgt_embeddings);
        for o in [
            &mut p.src_vocab,
            &mut p.tgt_vocab,
            &mut p.test_dictionary,
            &mut p.seed_dictionary,
            &mut p.sentiment_train,
            &mut p.sentiment_test,
            &mut p.sentiment_majority,
        ] {
            if let Some(x) = o.as_mut() {
                fix(x);
            }
        }
        fix(&mut self.output.dir);
    }

    /// Every input path that the configuration references.
    pub fn inputs(&self) -> Vec<&Path> {
        let p = &self.paths;
        let mut out: Vec<&Path> = p.src_corpus.iter().chain(&p.tgt_corpus).map(PathBuf::as_path).collect();
        out.push(&p.src_embeddings);
        out.push(&p.tgt_embeddings);
        out.extend(
            [
                &p.src_vocab,
                &p.tgt_vocab,
                &p.test_dictionary,
                &p.seed_dictionary,
                &p.sentiment_train,
                &p.sentiment_test,
                &p.sentiment_majority,
            ]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.inputs() {
            if !p.exists() {
                return Err(bad(format!("{} does not exist", p.display())));
            }
        }
        if self.tokenizer.min_count == 0 {
            return Err(bad("tokenizer.min_count must be at least 1"));
        }
        match self.dictionary.mode {
            DictionaryMode::Identical => {}
            DictionaryMode::ExternalSeed | DictionaryMode::File if self.paths.seed_dictionary.is_none() => {
                return Err(bad("dictionary mode requires paths.seed_dictionary"));
            }
            _ => {}
        }
        if self.paths.sentiment_train.is_some() != self.paths.sentiment_test.is_some() {
            return Err(bad("sentiment_train and sentiment_test must be given together"));
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(bad("eval.ks must be non-empty and positive"));
        }
        if let Some(s) = self.mapper.reweight {
            if !(0.0..=1.0).contains(&s) {
                return Err(bad(format!("mapper.reweight must be in [0, 1], got {s}")));
            }
        }
        if self.mapper.max_iters == 0 {
            return Err(bad("mapper.max_iters must be at least 1"));
        }
        self.norm_steps()?;
        self.mapper_config()?;
        self.ablation_config()?;
        parse_classes(&self.dictionary.classes)?;
        parse_classes(&self.refine.classes)?;
        self.scheme()?;
        Ok(())
    }

    pub fn norm_steps(&self) -> Result<Vec<NormStep>> {
        self.normalize
            .steps
            .iter()
            .map(|s| match s.as_str() {
                "unit" => Ok(NormStep::UnitRows),
                "center" => Ok(NormStep::CenterColumns),
                other => Err(bad(format!("unknown normalization step {other:?}"))),
            })
            .collect()
    }

    pub fn mapper_config(&self) -> Result<MapperConfig> {
        let m = &self.mapper;
        Ok(MapperConfig {
            self_learn: if m.self_learning {
                Some(SelfLearnConfig {
                    induce_vocab_cutoff: m.induce_vocab_cutoff,
                    retrieval: parse_retrieval(&m.retrieval, m.csls_k)?,
                    max_iters: m.max_iters,
                    tol: m.tol,
                })
            } else {
                None
            },
            reweight: m.reweight,
        })
    }

    pub fn eval_retrieval(&self) -> Result<Retrieval> {
        parse_retrieval(&self.eval.retrieval, self.eval.csls_k)
    }

    pub fn oov(&self) -> OovPolicy {
        if self.eval.oov_as_wrong {
            OovPolicy::CountWrong
        } else {
            OovPolicy::Skip
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe.epochs,
            lr: self.probe.lr,
            l2: self.probe.l2,
        }
    }

    pub fn scheme(&self) -> Result<Option<Scheme>> {
        self.probe.scheme.as_deref().map(parse_scheme).transpose()
    }

    pub fn ablation_config(&self) -> Result<AblationConfig> {
        Ok(AblationConfig {
            mapper: self.mapper_config()?,
            retrieval: self.eval_retrieval()?,
            ks: self.eval.ks.clone(),
            oov: self.oov(),
            frequency_mode: parse_frequency_mode(&self.refine.frequencies)?,
            probe: self.probe_config(),
        })
    }
}
