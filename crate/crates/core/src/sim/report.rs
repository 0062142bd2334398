//! Experiment reports: machine-readable JSON and an aligned text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{lift, two_sample_z_p_value, MeanVar, Significance};
use crate::sim::diversity::{tuple_diversity, SlotGroup};
use crate::sim::treatment::{ArmResult, ImpressionOutcome, Treatment};
use crate::error::Result;
use crate::tuner::UtopiaPoint;
use crate::types::Impression;

/// A mean with its standard error and, against a reference arm, the lift in
/// percent and its significance marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<Significance>,
}

impl MetricStat {
    pub fn new(values: &MeanVar, reference: Option<&MeanVar>) -> MetricStat {
        let mut s = MetricStat {
            mean: values.mean,
            std_error: values.std_error(),
            lift_pct: None,
            p_value: None,
            significance: None,
        };
        if let Some(r) = reference {
            if let Ok(l) = lift(values.mean, r.mean) {
                let p = two_sample_z_p_value(values, r);
                s.lift_pct = Some(l);
                s.p_value = Some(p);
                s.significance = Some(Significance::from_p_value(p));
            }
        }
        s
    }

    fn lift_cell(&self) -> String {
        match (self.lift_pct, self.significance) {
            (Some(l), Some(s)) => format!("{l:+.2}%{}", s.marker()),
            _ => "-".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMetrics {
    pub ad_ctr: MetricStat,
    pub ad_value: MetricStat,
    pub revenue: MetricStat,
    pub org_ctr: MetricStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedMetrics {
    pub ad_ctr: MetricStat,
    pub revenue: MetricStat,
    pub org_ctr: MetricStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentRow {
    pub epoch: String,
    /// What the arm stands for in its scenario: `control`, `tuned`,
    /// `tuned_minus_1`, `tuned_plus_1`, `constant`, `stale`, `retuned`,
    /// `shuffle` or `random_top_x`.
    pub role: String,
    pub label: String,
    pub treatment: Treatment,
    pub sample_size: usize,
    /// Model-computed metrics under the ground truth.
    pub expected: ExpectedMetrics,
    /// Click-sampled metrics.
    pub realized: RealizedMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub epoch: String,
    pub role: String,
    pub label: String,
    pub group: SlotGroup,
    pub multi_subcat_rate: MetricStat,
    pub mean_subcat_count: MetricStat,
    pub herfindahl: MetricStat,
}

/// Second-epoch metrics of an arm with lifts over the same arm in the first epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub role: String,
    pub label: String,
    pub ad_ctr: MetricStat,
    pub revenue: MetricStat,
    pub ad_value: MetricStat,
    pub org_ctr: MetricStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub epoch: String,
    pub role: String,
    pub v_a: f64,
    pub mean_ctr: f64,
    pub mean_rev: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub epoch: String,
    /// `golden`, `spsa` or `fixed` (supplied by the caller).
    pub method: String,
    pub v_a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utopia: Option<UtopiaPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    pub evaluations: usize,
    pub n_impressions: usize,
}

impl TuningSummary {
    pub fn fixed(v_a: f64) -> TuningSummary {
        TuningSummary {
            epoch: "T1".into(),
            method: "fixed".into(),
            v_a,
            distance: None,
            utopia: None,
            bracket: None,
            evaluations: 0,
            n_impressions: 0,
        }
    }
}

/// Per page-subcategory means of one arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub epoch: String,
    pub role: String,
    pub subcategory: String,
    pub impressions: usize,
    pub ad_ctr: f64,
    pub revenue: f64,
    pub ad_value: f64,
    pub mean_shown_bid: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub seed: u64,
    pub assignment: String,
    pub payment_scheme: String,
    pub n_impressions: usize,
    pub tuning: Vec<TuningSummary>,
    pub treatments: Vec<TreatmentRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diversity: Vec<DiversityRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shift: Vec<ShiftRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<DistanceRow>,
    pub categories: Vec<CategoryRow>,
}

/// Accumulated per-impression metrics of one arm.
#[derive(Clone, Debug, Default)]
pub(crate) struct ArmStats {
    pub ad_ctr: MeanVar,
    pub ad_value: MeanVar,
    pub revenue: MeanVar,
    pub org_ctr: MeanVar,
    pub ad_clicks: MeanVar,
    pub realized_revenue: MeanVar,
    pub org_clicks: MeanVar,
}

impl ArmStats {
    pub fn from_arm(arm: &ArmResult) -> ArmStats {
        let mut s = ArmStats::default();
        for (_, o) in &arm.served {
            s.ad_ctr.push(o.ad_ctr);
            s.ad_value.push(o.ad_value);
            s.revenue.push(o.revenue);
            s.org_ctr.push(o.org_ctr);
            s.ad_clicks.push(o.ad_clicks);
            s.realized_revenue.push(o.realized_revenue);
            s.org_clicks.push(o.org_clicks);
        }
        s
    }
}

pub(crate) fn treatment_row(
    epoch: &str,
    role: &str,
    arm: &ArmResult,
    stats: &ArmStats,
    control: Option<&ArmStats>,
) -> TreatmentRow {
    let m = |f: fn(&ArmStats) -> &MeanVar| MetricStat::new(f(stats), control.map(f));
    TreatmentRow {
        epoch: epoch.into(),
        role: role.into(),
        label: arm.treatment.label(),
        treatment: arm.treatment.clone(),
        sample_size: arm.served.len(),
        expected: ExpectedMetrics {
            ad_ctr: m(|s| &s.ad_ctr),
            ad_value: m(|s| &s.ad_value),
            revenue: m(|s| &s.revenue),
            org_ctr: m(|s| &s.org_ctr),
        },
        realized: RealizedMetrics {
            ad_ctr: m(|s| &s.ad_clicks),
            revenue: m(|s| &s.realized_revenue),
            org_ctr: m(|s| &s.org_clicks),
        },
    }
}

pub(crate) fn shift_row(role: &str, arm: &ArmResult, t2: &ArmStats, t1: &ArmStats) -> ShiftRow {
    let m = |f: fn(&ArmStats) -> &MeanVar| MetricStat::new(f(t2), Some(f(t1)));
    ShiftRow {
        role: role.into(),
        label: arm.treatment.label(),
        ad_ctr: m(|s| &s.ad_ctr),
        revenue: m(|s| &s.revenue),
        ad_value: m(|s| &s.ad_value),
        org_ctr: m(|s| &s.org_ctr),
    }
}

pub(crate) type GroupStats = [MeanVar; 3];

/// Diversity accumulators per slot group for the impressions an arm served.
pub(crate) fn arm_diversity(log: &[Impression], arm: &ArmResult) -> Result<Vec<GroupStats>> {
    SlotGroup::ALL
        .iter()
        .map(|&g| {
            let mut acc: GroupStats = Default::default();
            for (i, o) in &arm.served {
                let d = tuple_diversity(&log[*i], &o.tuple, g)?;
                acc[0].push(d.multi_subcat);
                acc[1].push(d.subcat_count);
                acc[2].push(d.herfindahl);
            }
            Ok(acc)
        })
        .collect()
}

pub(crate) fn diversity_rows(
    epoch: &str,
    role: &str,
    arm: &ArmResult,
    stats: &[GroupStats],
    control: Option<&[GroupStats]>,
) -> Vec<DiversityRow> {
    SlotGroup::ALL
        .iter()
        .enumerate()
        .map(|(g, &group)| {
            let m = |k: usize| MetricStat::new(&stats[g][k], control.map(|c| &c[g][k]));
            DiversityRow {
                epoch: epoch.into(),
                role: role.into(),
                label: arm.treatment.label(),
                group,
                multi_subcat_rate: m(0),
                mean_subcat_count: m(1),
                herfindahl: m(2),
            }
        })
        .collect()
}

pub(crate) fn category_rows(
    epoch: &str,
    role: &str,
    log: &[Impression],
    arm: &ArmResult,
) -> Vec<CategoryRow> {
    #[derive(Default)]
    struct Acc {
        n: usize,
        ctr: f64,
        rev: f64,
        value: f64,
        bid: f64,
        shown: usize,
    }
    let mut by: BTreeMap<&str, Acc> = BTreeMap::new();
    for (i, o) in &arm.served {
        let imp = &log[*i];
        let key = imp.page_subcategory.as_deref().unwrap_or("");
        let a = by.entry(key).or_default();
        a.n += 1;
        a.ctr += o.ad_ctr;
        a.rev += o.revenue;
        a.value += o.ad_value;
        for (_, c) in o.tuple.ads() {
            a.bid += imp.ads[c].bid_cpc;
            a.shown += 1;
        }
    }
    by.into_iter()
        .map(|(sub, a)| CategoryRow {
            epoch: epoch.into(),
            role: role.into(),
            subcategory: sub.into(),
            impressions: a.n,
            ad_ctr: a.ctr / a.n as f64,
            revenue: a.rev / a.n as f64,
            ad_value: a.value / a.n as f64,
            mean_shown_bid: if a.shown > 0 { a.bid / a.shown as f64 } else { 0.0 },
        })
        .collect()
}

/// Left-aligned first column, right-aligned others.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let mut first = true;
        for (w, c) in widths.iter().zip(cells) {
            if first {
                let _ = write!(out, "{c:<w$}");
                first = false;
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(out, &mut header.iter().copied());
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(out, &mut r.iter().map(String::as_str));
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned text rendering. Lifts are in percent over the control arm of
    /// the same epoch; `*` marks p < 1%, `**` p < 0.1%.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {}  seed {}  impressions {}  assignment {}  payments {}",
            self.scenario, self.seed, self.n_impressions, self.assignment, self.payment_scheme
        );
        for t in &self.tuning {
            let _ = write!(out, "tuned v_a [{} {}] = {:.6}", t.epoch, t.method, t.v_a);
            if let Some(d) = t.distance {
                let _ = write!(out, "  distance {d:.6}");
            }
            if let Some(u) = &t.utopia {
                let _ = write!(out, "  utopia ({:.6}, {:.6})", u.u_ctr, u.u_rev);
            }
            out.push('\n');
        }
        out.push('\n');

        let rows: Vec<Vec<String>> = self
            .treatments
            .iter()
            .map(|r| {
                vec![
                    format!("{} {}", r.epoch, r.role),
                    r.label.clone(),
                    r.sample_size.to_string(),
                    format!("{:.5}", r.expected.ad_ctr.mean),
                    r.expected.ad_ctr.lift_cell(),
                    format!("{:.5}", r.expected.revenue.mean),
                    r.expected.revenue.lift_cell(),
                    r.expected.ad_value.lift_cell(),
                    format!("{:.5}", r.expected.org_ctr.mean),
                    r.expected.org_ctr.lift_cell(),
                    r.realized.ad_ctr.lift_cell(),
                    r.realized.revenue.lift_cell(),
                    r.realized.org_ctr.lift_cell(),
                ]
            })
            .collect();
        out.push_str("treatments (expected metrics, then realized-click lifts)\n");
        table(
            &mut out,
            &[
                "arm", "treatment", "n", "ad_ctr", "lift", "revenue", "lift", "value lift",
                "org_ctr", "lift", "real ad_ctr", "real revenue", "real org_ctr",
            ],
            &rows,
        );

        if !self.diversity.is_empty() {
            let rows: Vec<Vec<String>> = self
                .diversity
                .iter()
                .map(|d| {
                    vec![
                        format!("{} {}", d.epoch, d.role),
                        d.group.name().into(),
                        format!("{:.5}", d.multi_subcat_rate.mean),
                        d.multi_subcat_rate.lift_cell(),
                        format!("{:.5}", d.mean_subcat_count.mean),
                        d.mean_subcat_count.lift_cell(),
                        format!("{:.5}", d.herfindahl.mean),
                        d.herfindahl.lift_cell(),
                    ]
                })
                .collect();
            out.push_str("\ndiversity\n");
            table(
                &mut out,
                &["arm", "slots", ">1 subcat", "lift", "subcats", "lift", "herfindahl", "lift"],
                &rows,
            );
        }

        if !self.shift.is_empty() {
            let rows: Vec<Vec<String>> = self
                .shift
                .iter()
                .map(|s| {
                    vec![
                        s.role.clone(),
                        s.label.clone(),
                        s.ad_ctr.lift_cell(),
                        s.revenue.lift_cell(),
                        s.ad_value.lift_cell(),
                        s.org_ctr.lift_cell(),
                    ]
                })
                .collect();
            out.push_str("\nT2 over T1, same arm\n");
            table(
                &mut out,
                &["arm", "treatment", "ad_ctr", "revenue", "value", "org_ctr"],
                &rows,
            );
        }

        if !self.distances.is_empty() {
            let rows: Vec<Vec<String>> = self
                .distances
                .iter()
                .map(|d| {
                    vec![
                        format!("{} {}", d.epoch, d.role),
                        format!("{:.6}", d.v_a),
                        format!("{:.6}", d.mean_ctr),
                        format!("{:.6}", d.mean_rev),
                        format!("{:.6}", d.distance),
                    ]
                })
                .collect();
            out.push_str("\ndistance to utopia\n");
            table(&mut out, &["arm", "v_a", "ad_ctr", "revenue", "distance"], &rows);
        }
        out
    }

    /// Per page-subcategory metrics of every arm as CSV.
    pub fn category_csv(&self) -> String {
        let mut out =
            String::from("epoch,role,subcategory,impressions,ad_ctr,revenue,ad_value,mean_shown_bid\n");
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.epoch, c.role, c.subcategory, c.impressions, c.ad_ctr, c.revenue, c.ad_value,
                c.mean_shown_bid
            );
        }
        out
    }

    pub fn row(&self, epoch: &str, role: &str) -> Option<&TreatmentRow> {
        self.treatments
            .iter()
            .find(|r| r.epoch == epoch && r.role == role)
    }

    pub fn diversity_row(&self, role: &str, group: SlotGroup) -> Option<&DiversityRow> {
        self.diversity
            .iter()
            .find(|d| d.role == role && d.group == group)
    }

    pub fn distance(&self, epoch: &str, role: &str) -> Option<&DistanceRow> {
        self.distances
            .iter()
            .find(|d| d.epoch == epoch && d.role == role)
    }
}

/// Outcomes of the impressions an arm served, for callers that want raw rows.
pub fn outcomes(arm: &ArmResult) -> impl Iterator<Item = &ImpressionOutcome> {
    arm.served.iter().map(|(_, o)| o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_and_marker() {
        let c = MeanVar::from_values((0..1000).map(|i| (i % 10) as f64));
        let t = MeanVar::from_values((0..1000).map(|i| (i % 10) as f64 + 1.0));
        let s = MetricStat::new(&t, Some(&c));
        assert!((s.lift_pct.unwrap() - 100.0 / 4.5).abs() < 1e-9);
        assert_eq!(s.significance, Some(Significance::PointOnePercent));
        assert_eq!(MetricStat::new(&c, Some(&c)).significance, Some(Significance::None));
        let zero = MeanVar::from_values([0.0, 0.0]);
        assert_eq!(MetricStat::new(&c, Some(&zero)).lift_pct, None);
    }

    #[test]
    fn table_is_aligned() {
        let mut s = String::new();
        table(
            &mut s,
            &["a", "bb"],
            &[vec!["xxx".into(), "1".into()], vec!["y".into(), "22".into()]],
        );
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
    }
}
