//! Metrics tables and plot-ready data files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{EquityCurve, PortfolioSeries};
use crate::domain::{EventLabel, Horizon, Taxonomy};
use crate::error::{Error, Result};
use crate::stats::{significance_stars, MetricsRow};

pub const NA: &str = "NA";

pub const COLUMNS: [&str; 8] = [
    "Label", "Samples", "MeanRet", "StdRet", "IC", "Sharpe", "p-value", "Sig",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

/// Sharpe descending; equal Sharpe ordered by label.
fn sorted(rows: &[MetricsRow]) -> Vec<&MetricsRow> {
    let mut rows: Vec<&MetricsRow> = rows.iter().collect();
    rows.sort_by(|a, b| b.sharpe.total_cmp(&a.sharpe).then_with(|| a.label.cmp(&b.label)));
    rows
}

fn cells(row: &MetricsRow) -> [String; 8] {
    [
        row.label.to_string(),
        row.n.to_string(),
        format!("{:.4}", row.mean_ret),
        format!("{:.4}", row.std_ret),
        row.ic.map_or_else(|| NA.to_string(), |v| format!("{v:.4}")),
        format!("{:.4}", row.sharpe),
        format!("{:.4}", row.p_value),
        row.stars.to_string(),
    ]
}

pub fn render_metrics_table(rows: &[MetricsRow], format: TableFormat) -> String {
    match format {
        TableFormat::Markdown => {
            let mut out = COLUMNS.join(" | ");
            out.push('\n');
            out.push_str("--- | ---: | ---: | ---: | ---: | ---: | ---: | ---\n");
            for row in sorted(rows) {
                let line = cells(row).join(" | ");
                out.push_str(line.trim_end());
                out.push('\n');
            }
            out
        }
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .quote_style(csv::QuoteStyle::NonNumeric)
                .from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for row in sorted(rows) {
                w.write_record(cells(row)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
        }
    }
}

/// Full-precision metrics for one (label, horizon); `row` is `None` when
/// the label had too few samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelResult {
    pub label: EventLabel,
    pub horizon: Horizon,
    pub row: Option<MetricsRow>,
}

/// On-disk form of [`LabelResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub label: String,
    pub horizon: Horizon,
    pub n: Option<usize>,
    pub mean_ret: Option<f64>,
    pub std_ret: Option<f64>,
    pub ic: Option<f64>,
    pub sharpe: Option<f64>,
    pub p_value: Option<f64>,
}

impl From<&LabelResult> for MetricsRecord {
    fn from(r: &LabelResult) -> Self {
        let row = r.row.as_ref();
        MetricsRecord {
            label: r.label.to_string(),
            horizon: r.horizon,
            n: row.map(|x| x.n),
            mean_ret: row.map(|x| x.mean_ret),
            std_ret: row.map(|x| x.std_ret),
            ic: row.and_then(|x| x.ic),
            sharpe: row.map(|x| x.sharpe),
            p_value: row.map(|x| x.p_value),
        }
    }
}

impl MetricsRecord {
    pub fn into_result(self, taxonomy: &Taxonomy) -> Result<LabelResult> {
        let label = taxonomy.label(&self.label)?;
        let row = match (self.n, self.mean_ret, self.std_ret, self.sharpe, self.p_value) {
            (Some(n), Some(mean_ret), Some(std_ret), Some(sharpe), Some(p_value)) => Some(MetricsRow {
                label: label.clone(),
                n,
                mean_ret,
                std_ret,
                ic: self.ic,
                sharpe,
                p_value,
                stars: significance_stars(p_value),
            }),
            _ => None,
        };
        Ok(LabelResult {
            label,
            horizon: self.horizon,
            row,
        })
    }
}

pub fn write_metrics_json(path: &Path, results: &[LabelResult]) -> Result<()> {
    let records: Vec<MetricsRecord> = results.iter().map(MetricsRecord::from).collect();
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_metrics_json(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<LabelResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<MetricsRecord> = serde_json::from_str(&text)?;
    records.into_iter().map(|r| r.into_result(taxonomy)).collect()
}

/// Everything the plot-data writer needs from a backtest.
#[derive(Debug, Clone, Default)]
pub struct PlotData {
    pub results: Vec<LabelResult>,
    /// Named equity curves; the name becomes `equity_<name>.csv`.
    pub curves: BTreeMap<String, EquityCurve>,
    pub portfolios: Vec<PortfolioSeries>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

/// Write `sharpe_by_horizon.csv`, `ic_by_horizon.csv` and one
/// `equity_<name>.csv` per curve. Returns the written paths.
pub fn emit_plot_data(data: &PlotData, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let sharpe_path = dir.join("sharpe_by_horizon.csv");
    let mut w = csv::Writer::from_path(&sharpe_path).map_err(|e| Error::csv(&sharpe_path, e))?;
    w.write_record(["label", "horizon", "sharpe", "p_value"])
        .map_err(|e| Error::csv(&sharpe_path, e))?;
    for r in &data.results {
        let row = r.row.as_ref();
        w.write_record([
            r.label.to_string(),
            r.horizon.days().to_string(),
            opt(row.map(|x| x.sharpe)),
            opt(row.map(|x| x.p_value)),
        ])
        .map_err(|e| Error::csv(&sharpe_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&sharpe_path, e))?;
    written.push(sharpe_path);

    let ic_path = dir.join("ic_by_horizon.csv");
    let mut w = csv::Writer::from_path(&ic_path).map_err(|e| Error::csv(&ic_path, e))?;
    w.write_record(["label", "horizon", "ic"])
        .map_err(|e| Error::csv(&ic_path, e))?;
    for r in &data.results {
        w.write_record([
            r.label.to_string(),
            r.horizon.days().to_string(),
            opt(r.row.as_ref().and_then(|x| x.ic)),
        ])
        .map_err(|e| Error::csv(&ic_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&ic_path, e))?;
    written.push(ic_path);

    for (name, curve) in &data.curves {
        let p = dir.join(format!("equity_{name}.csv"));
        let mut buf = Vec::new();
        crate::backtest::write_series(&mut buf, &curve.points)?;
        std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    for series in &data.portfolios {
        let p = dir.join(format!("portfolio_{}.csv", series.spec.descriptor()));
        let mut buf = Vec::new();
        crate::backtest::write_series(&mut buf, &series.points)?;
        std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// Markdown report: one metrics table per horizon.
pub fn render_report(results: &[LabelResult]) -> String {
    let mut by_h: BTreeMap<Horizon, Vec<MetricsRow>> = BTreeMap::new();
    let mut missing: BTreeMap<Horizon, Vec<&EventLabel>> = BTreeMap::new();
    for r in results {
        match &r.row {
            Some(row) => by_h.entry(r.horizon).or_default().push(row.clone()),
            None => missing.entry(r.horizon).or_default().push(&r.label),
        }
    }
    let mut horizons: Vec<Horizon> = by_h.keys().chain(missing.keys()).copied().collect();
    horizons.sort();
    horizons.dedup();

    let mut out = String::from("# Performance metrics by event label\n");
    for h in horizons {
        out.push_str(&format!("\n## {}-day horizon\n\n", h.days()));
        match by_h.get(&h) {
            Some(rows) => out.push_str(&render_metrics_table(rows, TableFormat::Markdown)),
            None => out.push_str("No label had enough samples.\n"),
        }
        if let Some(labels) = missing.get(&h) {
            let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
            out.push_str(&format!("\nInsufficient samples: {}\n", names.join(", ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, n: usize, m: f64, sd: f64, ic: Option<f64>, sharpe: f64, p: f64) -> MetricsRow {
        let tax = Taxonomy::default_labels();
        MetricsRow {
            label: tax.label(label).unwrap(),
            n,
            mean_ret: m,
            std_ret: sd,
            ic,
            sharpe,
            p_value: p,
            stars: significance_stars(p),
        }
    }

    #[test]
    fn markdown_row_layout() {
        let rows = [row("Speculation/Rumor", 130, -0.0046, 0.0137, Some(-0.0389), -0.3370, 0.0002)];
        let t = render_metrics_table(&rows, TableFormat::Markdown);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Label | Samples | MeanRet | StdRet | IC | Sharpe | p-value | Sig");
        assert_eq!(
            lines[2],
            "Speculation/Rumor | 130 | -0.0046 | 0.0137 | -0.0389 | -0.3370 | 0.0002 | ***"
        );
        assert!(lines[2].ends_with("***"));
    }

    #[test]
    fn csv_quotes_labels() {
        let rows = [row("Speculation/Rumor", 130, -0.0046, 0.0137, None, -0.3370, 0.0002)];
        let t = render_metrics_table(&rows, TableFormat::Csv);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("\"Speculation/Rumor\",130,"));
        assert!(lines[1].contains("\"NA\""));
    }

    #[test]
    fn sorted_by_sharpe_then_label() {
        let rows = [
            row("Negative Press", 10, 0.0, 0.01, None, -0.1, 0.5),
            row("Brand Boycott", 10, 0.0, 0.01, None, -0.1, 0.5),
            row("Social Media Backlash", 10, 0.0, 0.01, None, 0.2, 0.5),
        ];
        let t = render_metrics_table(&rows, TableFormat::Markdown);
        let labels: Vec<&str> = t.lines().skip(2).map(|l| l.split(" | ").next().unwrap()).collect();
        assert_eq!(labels, ["Social Media Backlash", "Brand Boycott", "Negative Press"]);
    }

    #[test]
    fn plot_data_cardinality() {
        let tax = Taxonomy::default_labels();
        let mut results = Vec::new();
        for l in tax.labels() {
            for h in Horizon::DEFAULTS {
                let r = (l.as_str() != "Brand Boycott")
                    .then(|| row(l.as_str(), 20, 0.001, 0.01, Some(0.1), 0.1, 0.66));
                results.push(LabelResult { label: l.clone(), horizon: h, row: r });
            }
        }
        let dir = tempfile::tempdir().unwrap();
        emit_plot_data(&PlotData { results, ..Default::default() }, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("sharpe_by_horizon.csv")).unwrap();
        assert_eq!(text.lines().count(), 29);
        assert_eq!(text.lines().filter(|l| l.ends_with("NA,NA")).count(), 4);

        let empty = tempfile::tempdir().unwrap();
        emit_plot_data(&PlotData::default(), empty.path()).unwrap();
        let text = std::fs::read_to_string(empty.path().join("ic_by_horizon.csv")).unwrap();
        assert_eq!(text, "label,horizon,ic\n");
    }

    #[test]
    fn metrics_json_round_trip() {
        let tax = Taxonomy::default_labels();
        let results = vec![
            LabelResult {
                label: tax.label("Negative Press").unwrap(),
                horizon: Horizon::new(2).unwrap(),
                row: Some(row("Negative Press", 42, 0.0007, 0.0214, Some(0.0205), 0.0308, 0.8430)),
            },
            LabelResult {
                label: tax.label("Brand Boycott").unwrap(),
                horizon: Horizon::new(2).unwrap(),
                row: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_metrics_json(&p, &results).unwrap();
        assert_eq!(read_metrics_json(&p, &tax).unwrap(), results);
    }
}
