use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BenchManifest, ComplexityLevel};
use crate::error::{Error, Result};

pub const FSCORE_SCALE: f64 = 100.0;
pub const CHAMFER_SCALE: f64 = 10_000.0;
pub const SNE_SCALE: f64 = 100.0;

/// Unscaled metrics for one mesh; `failed` rows are kept but not aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub fscore_001: f64,
    pub fscore_0005: f64,
    pub chamfer: f64,
    pub sne: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

impl MetricRow {
    pub fn failed(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            fscore_001: f64::NAN,
            fscore_0005: f64::NAN,
            chamfer: f64::NAN,
            sne: None,
            failed: Some(reason.into()),
        }
    }
}

/// A row in the report's display units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledRow {
    pub id: String,
    pub level: ComplexityLevel,
    pub fscore_001_x100: Option<f64>,
    pub fscore_0005_x100: Option<f64>,
    pub cd_x10000: Option<f64>,
    pub sne_x100: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub level: ComplexityLevel,
    pub count: usize,
    pub fscore_001_x100: Option<f64>,
    pub fscore_0005_x100: Option<f64>,
    pub cd_x10000: Option<f64>,
    pub sne_x100: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub levels: Vec<LevelAggregate>,
    pub rows: Vec<ScaledRow>,
    pub target_per_level: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-level means of the per-mesh rows, in display units.
///
/// Unclassified meshes and failed rows are listed but not aggregated.
/// Sums run in mesh-id order, so the result does not depend on row order.
pub fn aggregate_report(manifest: &BenchManifest, rows: &[MetricRow]) -> Result<BenchReport> {
    let mut seen = HashSet::new();
    let mut by_level: BTreeMap<ComplexityLevel, Vec<&MetricRow>> = BTreeMap::new();
    let mut scaled = Vec::with_capacity(rows.len());
    for row in rows {
        let entry = manifest
            .entry(&row.id)
            .ok_or_else(|| Error::UnknownMeshId(row.id.clone()))?;
        if !seen.insert(row.id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate metric row for {}", row.id)));
        }
        let ok = row.failed.is_none();
        scaled.push(ScaledRow {
            id: row.id.clone(),
            level: entry.level,
            fscore_001_x100: ok.then(|| row.fscore_001 * FSCORE_SCALE),
            fscore_0005_x100: ok.then(|| row.fscore_0005 * FSCORE_SCALE),
            cd_x10000: ok.then(|| row.chamfer * CHAMFER_SCALE),
            sne_x100: if ok { row.sne.map(|s| s * SNE_SCALE) } else { None },
            failed: row.failed.clone(),
        });
        if ok && entry.level != ComplexityLevel::Unclassified {
            by_level.entry(entry.level).or_default().push(row);
        }
    }
    let levels = ComplexityLevel::RANKED
        .iter()
        .map(|&level| {
            let mut members = by_level.remove(&level).unwrap_or_default();
            members.sort_by(|a, b| a.id.cmp(&b.id));
            LevelAggregate {
                level,
                count: members.len(),
                fscore_001_x100: mean(members.iter().map(|r| r.fscore_001 * FSCORE_SCALE)),
                fscore_0005_x100: mean(members.iter().map(|r| r.fscore_0005 * FSCORE_SCALE)),
                cd_x10000: mean(members.iter().map(|r| r.chamfer * CHAMFER_SCALE)),
                sne_x100: mean(members.iter().filter_map(|r| r.sne).map(|s| s * SNE_SCALE)),
            }
        })
        .collect();
    Ok(BenchReport {
        dataset: manifest.dataset.clone(),
        levels,
        rows: scaled,
        target_per_level: super::TARGET_PER_LEVEL,
    })
}

impl BenchReport {
    /// Aligned text table: one group of L1..L4 columns per metric.
    pub fn render_table(&self, label: &str) -> String {
        let groups: [(&str, fn(&LevelAggregate) -> Option<f64>); 4] = [
            ("F-score(0.01) x100 ↑", |l| l.fscore_001_x100),
            ("F-score(0.005) x100 ↑", |l| l.fscore_0005_x100),
            ("CD x10000 ↓", |l| l.cd_x10000),
            ("SNE x100 ↓", |l| l.sne_x100),
        ];
        const CELL: usize = 9;
        let label_w = label.chars().count().max(6);
        let group_w = 4 * CELL + 3;
        let mut out = String::new();
        let _ = write!(out, "{:label_w$}", "");
        for (name, _) in &groups {
            let _ = write!(out, " | {:^group_w$}", name);
        }
        out.push('\n');
        let _ = write!(out, "{:label_w$}", "method");
        for _ in &groups {
            out.push_str(" | ");
            let cells: Vec<String> = ComplexityLevel::RANKED.iter().map(|l| format!("{:>CELL$}", l.to_string())).collect();
            out.push_str(&cells.join(" "));
        }
        out.push('\n');
        out.push_str(&"-".repeat(label_w + groups.len() * (group_w + 3)));
        out.push('\n');
        let _ = write!(out, "{:label_w$}", label);
        for (_, get) in &groups {
            out.push_str(" | ");
            let cells: Vec<String> = self
                .levels
                .iter()
                .map(|l| match get(l) {
                    Some(v) => format!("{v:>CELL$.3}"),
                    None => format!("{:>CELL$}", "-"),
                })
                .collect();
            out.push_str(&cells.join(" "));
        }
        out.push('\n');
        let counts: Vec<String> = self.levels.iter().map(|l| format!("{}={}", l.level, l.count)).collect();
        let _ = writeln!(out, "meshes per level: {} (target {})", counts.join(" "), self.target_per_level);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ManifestEntry;

    fn manifest(levels: &[(&str, usize)]) -> BenchManifest {
        BenchManifest {
            dataset: "t".into(),
            tau_deg: 30.0,
            entries: levels
                .iter()
                .map(|&(id, n)| ManifestEntry {
                    id: id.into(),
                    path: format!("{id}.obj").into(),
                    n_gamma: n,
                    level: ComplexityLevel::classify(n),
                })
                .collect(),
            rejects: vec![],
            warnings: vec![],
        }
    }

    fn row(id: &str, f: f64, cd: f64) -> MetricRow {
        MetricRow {
            id: id.into(),
            fscore_001: f,
            fscore_0005: f,
            chamfer: cd,
            sne: Some(0.01),
            failed: None,
        }
    }

    #[test]
    fn scale_factors_and_means() {
        let m = manifest(&[("a", 10), ("b", 20)]);
        let r = aggregate_report(&m, &[row("a", 1.0, 0.0002), row("b", 0.9, 0.0002)]).unwrap();
        let l1 = &r.levels[0];
        assert_eq!(l1.count, 2);
        assert!((l1.fscore_001_x100.unwrap() - 95.0).abs() < 1e-12);
        assert!((l1.cd_x10000.unwrap() - 2.0).abs() < 1e-12);
        assert!((l1.sne_x100.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.levels[1..].iter().all(|l| l.count == 0 && l.cd_x10000.is_none()));
    }

    #[test]
    fn four_levels_and_unclassified_excluded() {
        let m = manifest(&[("a", 1), ("b", 6000), ("c", 20000), ("d", 60000), ("e", 0)]);
        let rows: Vec<_> = ["a", "b", "c", "d", "e"].iter().map(|id| row(id, 0.5, 0.001)).collect();
        let r = aggregate_report(&m, &rows).unwrap();
        assert!(r.levels.iter().all(|l| l.count == 1));
        assert_eq!(r.rows.len(), 5);
        let table = r.render_table("ours");
        assert!(table.contains("F-score(0.01) x100"));
        assert_eq!(table.matches("50.000").count(), 8);
    }

    #[test]
    fn unknown_id_and_failed_rows() {
        let m = manifest(&[("a", 10)]);
        assert!(matches!(aggregate_report(&m, &[row("zzz", 1.0, 0.0)]), Err(Error::UnknownMeshId(_))));
        let r = aggregate_report(&m, &[MetricRow::failed("a", "missing pred")]).unwrap();
        assert_eq!(r.levels[0].count, 0);
        assert_eq!(r.rows[0].failed.as_deref(), Some("missing pred"));
    }

    #[test]
    fn permutation_invariant() {
        let m = manifest(&[("a", 10), ("b", 20), ("c", 30)]);
        let rows = vec![row("a", 0.1, 0.3), row("b", 0.7, 0.11), row("c", 0.33, 0.07)];
        let mut rev = rows.clone();
        rev.reverse();
        assert_eq!(
            aggregate_report(&m, &rows).unwrap().levels,
            aggregate_report(&m, &rev).unwrap().levels
        );
    }
}
