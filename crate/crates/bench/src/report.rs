//! Per-category aggregation and report rendering (JSON, CSV, text).

use std::fmt::Write;

use serde::Serialize;

use crate::question::{Category, Tier};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionResult {
    pub id: String,
    pub tier: Tier,
    pub category: Category,
    /// 0 or 1 for TG, 0 to 5 for ARA; 0 when unscored.
    pub score: u8,
    pub max_score: u8,
    /// False when the question failed or the judge gave no score.
    pub scored: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retriever_used: Option<String>,
    pub attempts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge_transcript: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    pub category: Category,
    pub tier: Tier,
    /// Questions in the category; also its weight within the tier.
    pub count: usize,
    pub points: u64,
    pub max_points: u64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunInfo {
    pub retriever: String,
    pub client: String,
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub run: RunInfo,
    pub results: Vec<QuestionResult>,
    pub categories: Vec<CategoryScore>,
    pub tg_total: f64,
    pub ara_total: f64,
    /// Count-weighted over every category of both tiers.
    pub grand_total: f64,
    pub warnings: Vec<String>,
}

/// Σ(accuracy × count) / Σcount; 0 for no questions.
pub fn weighted_total(categories: &[(f64, usize)]) -> f64 {
    let n: usize = categories.iter().map(|c| c.1).sum();
    if n == 0 {
        return 0.0;
    }
    categories.iter().map(|(acc, c)| acc * *c as f64).sum::<f64>() / n as f64
}

impl BenchReport {
    pub fn from_results(run: RunInfo, results: Vec<QuestionResult>, warnings: Vec<String>) -> Self {
        let categories: Vec<CategoryScore> = Category::ALL
            .iter()
            .filter_map(|&category| {
                let rs: Vec<&QuestionResult> = results.iter().filter(|r| r.category == category).collect();
                if rs.is_empty() {
                    return None;
                }
                let points: u64 = rs.iter().map(|r| u64::from(r.score)).sum();
                // the denominator is fixed by the question count, so unscored answers count as zero
                let max_points: u64 = rs.iter().map(|r| u64::from(r.max_score)).sum();
                Some(CategoryScore {
                    category,
                    tier: category.tier(),
                    count: rs.len(),
                    points,
                    max_points,
                    accuracy_pct: 100.0 * points as f64 / max_points as f64,
                })
            })
            .collect();
        let total = |tier: Option<Tier>| {
            let v: Vec<(f64, usize)> = categories
                .iter()
                .filter(|c| tier.is_none_or(|t| c.tier == t))
                .map(|c| (c.accuracy_pct, c.count))
                .collect();
            weighted_total(&v)
        };
        BenchReport {
            tg_total: total(Some(Tier::TG)),
            ara_total: total(Some(Tier::ARA)),
            grand_total: total(None),
            run,
            results,
            categories,
            warnings,
        }
    }

    pub fn category(&self, c: Category) -> Option<&CategoryScore> {
        self.categories.iter().find(|s| s.category == c)
    }

    fn weight_line(&self, tier: Tier) -> String {
        let cats: Vec<&CategoryScore> = self.categories.iter().filter(|c| c.tier == tier).collect();
        let n: usize = cats.iter().map(|c| c.count).sum();
        let parts: Vec<String> = cats.iter().map(|c| format!("{} {}", c.category, c.count)).collect();
        format!("{tier:?} weights (count/{n}): {}", if parts.is_empty() { "none".into() } else { parts.join(", ") })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["weights"] = serde_json::json!({
            "TG": self.categories.iter().filter(|c| c.tier == Tier::TG).map(|c| (c.category.to_string(), serde_json::Value::from(c.count))).collect::<serde_json::Map<_, _>>(),
            "ARA": self.categories.iter().filter(|c| c.tier == Tier::ARA).map(|c| (c.category.to_string(), serde_json::Value::from(c.count))).collect::<serde_json::Map<_, _>>(),
        });
        v
    }

    /// One row per category followed by the tier and grand totals.
    pub fn categories_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tier", "category", "count", "points", "max_points", "accuracy_pct"]).unwrap();
        for c in &self.categories {
            w.write_record([
                format!("{:?}", c.tier),
                c.category.to_string(),
                c.count.to_string(),
                c.points.to_string(),
                c.max_points.to_string(),
                format!("{:.2}", c.accuracy_pct),
            ])
            .unwrap();
        }
        for (name, v) in [("TG", self.tg_total), ("ARA", self.ara_total), ("ALL", self.grand_total)] {
            let n: usize = self.categories.iter().filter(|c| name == "ALL" || format!("{:?}", c.tier) == name).map(|c| c.count).sum();
            w.write_record([name.to_string(), "Total".into(), n.to_string(), String::new(), String::new(), format!("{v:.2}")]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn results_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "tier", "category", "score", "max_score", "scored", "retriever", "attempts", "answer", "error"]).unwrap();
        for r in &self.results {
            w.write_record([
                r.id.clone(),
                format!("{:?}", r.tier),
                r.category.to_string(),
                r.score.to_string(),
                r.max_score.to_string(),
                r.scored.to_string(),
                r.retriever_used.clone().unwrap_or_default(),
                r.attempts.to_string(),
                r.answer.clone().unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "retriever={} client={} shots={}", self.run.retriever, self.run.client, self.run.shots).unwrap();
        writeln!(out, "{:<4} {:<20} {:>5} {:>7} {:>9}", "Tier", "Category", "Count", "Points", "Accuracy").unwrap();
        for c in &self.categories {
            writeln!(
                out,
                "{:<4} {:<20} {:>5} {:>7} {:>8.2}%",
                format!("{:?}", c.tier),
                c.category.to_string(),
                c.count,
                format!("{}/{}", c.points, c.max_points),
                c.accuracy_pct
            )
            .unwrap();
        }
        writeln!(out, "{:<25} {:>26.2}%", "TG total", self.tg_total).unwrap();
        writeln!(out, "{:<25} {:>26.2}%", "ARA total", self.ara_total).unwrap();
        writeln!(out, "{:<25} {:>26.2}%", "Grand total", self.grand_total).unwrap();
        writeln!(out, "{}", self.weight_line(Tier::TG)).unwrap();
        writeln!(out, "{}", self.weight_line(Tier::ARA)).unwrap();
        let failed = self.results.iter().filter(|r| !r.scored).count();
        if failed > 0 {
            writeln!(out, "{failed} question(s) unscored or failed").unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTS: [usize; 6] = [30, 10, 15, 5, 10, 5];

    fn weighted(acc: [f64; 6]) -> f64 {
        weighted_total(&acc.iter().copied().zip(COUNTS).collect::<Vec<_>>())
    }

    #[test]
    fn reference_totals() {
        // 83.3*30 + 90*10 + 60*15 + 0*5 + 30*10 + 80*5 = 4999
        assert!((weighted([83.3, 90.0, 60.0, 0.0, 30.0, 80.0]) - 4999.0 / 75.0).abs() < 1e-9);
        // 100*30 + 100*10 + 66.67*15 + 100*5 + 70*10 + 100*5 = 6700.05
        assert!((weighted([100.0, 100.0, 66.67, 100.0, 70.0, 100.0]) - 89.33).abs() < 0.1);
    }

    #[test]
    fn empty_report_renders() {
        let r = BenchReport::from_results(RunInfo::default(), vec![], vec!["empty".into()]);
        assert_eq!((r.tg_total, r.ara_total, r.grand_total), (0.0, 0.0, 0.0));
        assert!(r.to_text().contains("TG weights (count/0): none"));
        assert_eq!(r.categories_csv().lines().count(), 4);
    }
}
