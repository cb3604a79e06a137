//! Ablation over identical-token classes: every dictionary variant is run
//! through the base mapper with and without weighted averaging.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::sentiment::{eval_probe, train_probe, ClassificationReport, ProbeConfig, SentimentDataset};
use super::translation::{precision_at_k, OovPolicy, TranslationReport};
use crate::error::{Error, Result};
use crate::lexicon::{AblationGroup, BilingualDictionary, TestDictionary};
use crate::mapper::{fit, map_spaces, MapperConfig};
use crate::refine::{average_weighted, CrossLingualSpace, FrequencyMode};
use crate::retrieval::Retrieval;
use crate::space::EmbeddingSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum System {
    Base,
    Weighted,
}

impl System {
    pub const ALL: [System; 2] = [System::Base, System::Weighted];

    pub fn label(self) -> &'static str {
        match self {
            System::Base => "base",
            System::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub mapper: MapperConfig,
    pub retrieval: Retrieval,
    pub ks: Vec<usize>,
    pub oov: OovPolicy,
    pub frequency_mode: FrequencyMode,
    pub probe: ProbeConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            mapper: MapperConfig::default(),
            retrieval: Retrieval::Cosine,
            ks: alloc::vec![1, 5, 10],
            oov: OovPolicy::Skip,
            frequency_mode: FrequencyMode::Absolute,
            probe: ProbeConfig::default(),
        }
    }
}

/// Sentiment train (source language) and test (target language) sets.
#[derive(Debug, Clone, Copy)]
pub struct SentimentTask<'a> {
    pub train: &'a SentimentDataset,
    pub test: &'a SentimentDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub translation: TranslationReport,
    pub sentiment: Option<ClassificationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AblationCell {
    /// The dictionary variant is empty.
    NotApplicable,
    Failed(String),
    Done(CellMetrics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub group: AblationGroup,
    pub pairs: usize,
    pub cells: Vec<(System, AblationCell)>,
}

impl AblationRow {
    pub fn cell(&self, system: System) -> &AblationCell {
        &self
            .cells
            .iter()
            .find(|c| c.0 == system)
            .expect("every system has a cell")
            .1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub ks: Vec<usize>,
    pub with_sentiment: bool,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, group: AblationGroup) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.group == group)
    }
}

/// Translation (and optionally sentiment) metrics for one aligned space.
pub fn evaluate_space(
    space: &CrossLingualSpace,
    test: &TestDictionary,
    sentiment: Option<SentimentTask<'_>>,
    config: &AblationConfig,
) -> Result<CellMetrics> {
    let translation = precision_at_k(space, test, &config.ks, config.retrieval, config.oov, false)?;
    let sentiment = match sentiment {
        None => None,
        Some(task) => {
            let model = train_probe(task.train, &space.src, &config.probe)?;
            Some(eval_probe(&model, task.test, &space.tgt)?)
        }
    };
    Ok(CellMetrics { translation, sentiment })
}

fn run_group(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &BilingualDictionary,
    test: &TestDictionary,
    sentiment: Option<SentimentTask<'_>>,
    config: &AblationConfig,
) -> Vec<(System, AblationCell)> {
    let fail = |e: Error| AblationCell::Failed(e.to_string());
    let base = fit(src, tgt, dict, &config.mapper)
        .and_then(|m| map_spaces(&m, src, tgt))
        .and_then(|(s, t)| CrossLingualSpace::new(s, t));
    let base = match base {
        Ok(b) => b,
        Err(e) => {
            let msg = format!("mapping failed: {e}");
            return System::ALL
                .iter()
                .map(|&s| (s, AblationCell::Failed(msg.clone())))
                .collect();
        }
    };
    let base_cell = evaluate_space(&base, test, sentiment, config).map_or_else(fail, AblationCell::Done);
    let weighted_cell = average_weighted(&base, dict, config.frequency_mode)
        .and_then(|w| evaluate_space(&w, test, sentiment, config))
        .map_or_else(fail, AblationCell::Done);
    alloc::vec![(System::Base, base_cell), (System::Weighted, weighted_cell)]
}

/// Runs every dictionary class variant. Cell failures are recorded in the
/// table; only an empty full dictionary is an error.
pub fn run_ablation(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    all: &BilingualDictionary,
    test: &TestDictionary,
    sentiment: Option<SentimentTask<'_>>,
    config: &AblationConfig,
) -> Result<AblationTable> {
    if all.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let mut rows = Vec::with_capacity(AblationGroup::ROWS.len());
    for group in AblationGroup::ROWS {
        let dict = group.filter(all);
        let cells = if dict.is_empty() {
            System::ALL.iter().map(|&s| (s, AblationCell::NotApplicable)).collect()
        } else {
            log::info!("ablation row {}: {} pairs", group.label(), dict.len());
            run_group(src, tgt, &dict, test, sentiment, config)
        };
        rows.push(AblationRow {
            group,
            pairs: dict.len(),
            cells,
        });
    }
    Ok(AblationTable {
        ks: config.ks.clone(),
        with_sentiment: sentiment.is_some(),
        rows,
    })
}
