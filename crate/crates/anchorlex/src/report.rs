//! Report rendering: TSV and aligned markdown tables with a provenance header.

use anchorlex_core::evalkit::{AblationCell, AblationTable, ClassificationReport, System, TranslationReport};
use anchorlex_core::lexicon::CoverageStats;

/// Version of each pipeline stage's algorithm; bumped when outputs change.
pub const STAGE_VERSIONS: &[(&str, u32)] = &[
    ("corpus", 1),
    ("embed_store", 1),
    ("lexicon", 1),
    ("mapper", 1),
    ("refine", 1),
    ("evalkit", 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn stages() -> String {
        STAGE_VERSIONS
            .iter()
            .map(|(s, v)| format!("{s}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// `# key value` lines. Nothing run-specific (time, threads) is included,
    /// so equal inputs give equal headers.
    pub fn header(&self) -> String {
        format!(
            "# anchorlex {}\n# config_sha256 {}\n# seed {}\n# stages {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed,
            Self::stages()
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "anchorlex",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "stages": STAGE_VERSIONS.iter().map(|(s, v)| (s.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
        })
    }
}

/// A rectangular table rendered as TSV or markdown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn tsv(&self) -> String {
        let mut out = self.headers.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn markdown(&self) -> String {
        let width = |s: &str| s.chars().count();
        let mut w: Vec<usize> = self.headers.iter().map(|h| width(h).max(3)).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                w[i] = w[i].max(width(c));
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{c}{}", " ".repeat(w[i] - width(c))))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&self.headers);
        let sep: Vec<String> = w.iter().map(|&n| "-".repeat(n)).collect();
        out.push_str(&format!("|-{}-|\n", sep.join("-|-")));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

pub fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

fn p_headers(ks: &[usize]) -> Vec<String> {
    ks.iter().map(|k| format!("P@{k}")).collect()
}

/// One row per k plus coverage counts.
pub fn translation_table(report: &TranslationReport, coverage: Option<&CoverageStats>) -> Table {
    let mut t = Table::new(["metric", "value"]);
    for &(k, p) in &report.p_at {
        t.push([format!("P@{k}"), pct(p)]);
    }
    t.push(["total".to_string(), report.total.to_string()]);
    t.push(["covered".to_string(), report.covered.to_string()]);
    t.push(["skipped".to_string(), report.skipped.to_string()]);
    t.push([
        "oov_policy".to_string(),
        format!("{:?}", report.oov_policy).to_lowercase(),
    ]);
    if let Some(c) = coverage {
        t.push([
            "src_in_vocab_rate".to_string(),
            format!("{:.2}", 100.0 * c.src_in_vocab_rate()),
        ]);
        t.push([
            "identical_rate".to_string(),
            format!("{:.2}", 100.0 * c.identical_rate()),
        ]);
        t.push([
            "in_dictionary_rate".to_string(),
            format!("{:.2}", 100.0 * c.in_dictionary_rate()),
        ]);
    }
    t
}

/// Ranked candidates per test query.
pub fn per_query_table(report: &TranslationReport) -> Table {
    let mut t = Table::new(["src", "gold", "hit_rank", "candidates"]);
    for q in report.per_query.iter().flatten() {
        let cands: Vec<String> = q.candidates.iter().map(|(tok, s)| format!("{tok}:{s:.6}")).collect();
        t.push([
            q.src.clone(),
            q.gold.join(","),
            q.hit_rank.map_or_else(|| "-".to_string(), |r| r.to_string()),
            cands.join(" "),
        ]);
    }
    t
}

/// Accuracy, macro-F1 and per-class scores for each named system.
pub fn sentiment_table(rows: &[(&str, &ClassificationReport)]) -> Table {
    let classes = rows.first().map_or(&[][..], |r| r.1.scheme.classes());
    let mut headers = vec!["system".to_string(), "n".into(), "accuracy".into(), "macro_f1".into()];
    for c in classes {
        headers.push(format!("f1_{c}"));
    }
    let mut t = Table::new(headers);
    for (name, r) in rows {
        let mut row = vec![
            name.to_string(),
            r.n.to_string(),
            format!("{:.2}", r.accuracy),
            format!("{:.2}", r.macro_f1),
        ];
        for m in &r.per_class {
            row.push(format!("{:.2}", m.f1));
        }
        t.push(row);
    }
    t
}

/// Confusion matrix: rows are gold labels, columns predictions.
pub fn confusion_table(report: &ClassificationReport) -> Table {
    let classes = report.scheme.classes();
    let mut t = Table::new(std::iter::once("gold\\pred".to_string()).chain(classes.iter().map(|c| c.to_string())));
    for (i, c) in classes.iter().enumerate() {
        t.push(std::iter::once(c.to_string()).chain(report.confusion[i].iter().map(|v| v.to_string())));
    }
    t
}

/// Dictionary variant × system grid. Returns the table and any failure
/// messages, which are listed below it.
pub fn ablation_table(table: &AblationTable) -> (Table, Vec<String>) {
    let mut headers = vec!["dictionary".to_string(), "pairs".into(), "system".into()];
    headers.extend(p_headers(&table.ks));
    if table.with_sentiment {
        headers.push("accuracy".into());
        headers.push("macro_f1".into());
    }
    let width = headers.len() - 3;
    let mut t = Table::new(headers);
    let mut notes = Vec::new();
    for row in &table.rows {
        for &system in &System::ALL {
            let mut cells = vec![
                row.group.label().to_string(),
                row.pairs.to_string(),
                system.label().to_string(),
            ];
            match row.cell(system) {
                AblationCell::NotApplicable => cells.extend(std::iter::repeat_n("n/a".to_string(), width)),
                AblationCell::Failed(msg) => {
                    cells.extend(std::iter::repeat_n("FAILED".to_string(), width));
                    notes.push(format!("{} / {}: {msg}", row.group.label(), system.label()));
                }
                AblationCell::Done(m) => {
                    cells.extend(table.ks.iter().map(|&k| pct(m.translation.p(k))));
                    if table.with_sentiment {
                        match &m.sentiment {
                            Some(s) => {
                                cells.push(format!("{:.2}", s.accuracy));
                                cells.push(format!("{:.2}", s.macro_f1));
                            }
                            None => cells.extend(["n/a".to_string(), "n/a".to_string()]),
                        }
                    }
                }
            }
            t.push(cells);
        }
    }
    (t, notes)
}

/// Report file body: provenance header, optional title, table, notes.
pub fn render_tsv(prov: &Provenance, table: &Table) -> String {
    format!("{}{}", prov.header(), table.tsv())
}

pub fn render_markdown(prov: &Provenance, title: &str, tables: &[&Table], notes: &[String]) -> String {
    let mut out = prov.header();
    out.push_str(&format!("\n## {title}\n"));
    for t in tables {
        out.push('\n');
        out.push_str(&t.markdown());
    }
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&format!("- {n}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_columns_align() {
        let mut t = Table::new(["a", "long header"]);
        t.push(["xyz", "1"]);
        t.push(["🎉", "22"]);
        let md = t.markdown();
        let widths: Vec<usize> = md.lines().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{md}");
    }

    #[test]
    fn tsv_layout() {
        let mut t = Table::new(["k", "v"]);
        t.push(["P@1", "50.00"]);
        assert_eq!(t.tsv(), "k\tv\nP@1\t50.00\n");
    }

    #[test]
    fn header_has_no_run_specific_fields() {
        let p = Provenance {
            config_hash: "ab".into(),
            seed: 3,
        };
        let h = p.header();
        assert!(h.lines().all(|l| l.starts_with("# ")));
        assert!(h.contains("config_sha256 ab"));
        assert!(h.contains("seed 3"));
    }

    #[test]
    fn undefined_precision_prints_marker() {
        assert_eq!(pct(None), "n/a");
        assert_eq!(pct(Some(12.345)), "12.35");
    }
}
