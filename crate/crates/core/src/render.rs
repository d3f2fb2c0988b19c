//! Markdown and CSV renderings of reports and comparisons.
//!
//! OLR cells are rounded to 3 decimals, pass rates to 1 decimal percent, and
//! deltas carry an explicit sign (`+77.2%`, `-5.6 pp`). Output is a pure
//! function of the inputs.

use std::fmt::Write as _;

use crate::aggregate::{AggregateReport, Comparison, ComparisonRow};

pub fn fmt_olr(v: f64) -> String {
    format!("{v:.3}")
}

/// Fraction in [0, 1] as a percentage.
pub fn fmt_pct(frac: f64) -> String {
    format!("{:.1}%", 100.0 * frac)
}

fn signed(v: f64) -> String {
    let s = format!("{v:+.1}");
    if s == "-0.0" {
        "+0.0".to_string()
    } else {
        s
    }
}

pub fn fmt_reduction(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{}%", signed(v)),
        None => "n/a".to_string(),
    }
}

pub fn fmt_pp(v: f64) -> String {
    format!("{} pp", signed(v))
}

fn provenance_lines(reports: &[&AggregateReport]) -> Vec<String> {
    reports
        .iter()
        .map(|r| {
            format!(
                "{} (run {}): policy preset `{}`, decoding preset `{}`",
                r.model_id, r.run_id, r.policy_preset, r.decoding_preset
            )
        })
        .collect()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn evaluation_table(reports: &[&AggregateReport]) -> Table {
    let mut header = vec!["Task".to_string(), "N".to_string()];
    for r in reports {
        header.push(format!("{} OLR", r.model_id));
        header.push(format!("{} Pass", r.model_id));
    }
    let mut rows = Vec::new();
    let Some(first) = reports.first() else {
        return Table { header, rows };
    };
    for fam in &first.per_family {
        let mut row = vec![fam.display_name.clone(), fam.n.to_string()];
        for r in reports {
            match r.per_family.iter().find(|f| f.family == fam.family) {
                Some(f) => {
                    row.push(fmt_olr(f.mean_olr));
                    row.push(fmt_pct(f.pass_rate));
                }
                None => {
                    row.push("—".into());
                    row.push("—".into());
                }
            }
        }
        rows.push(row);
    }
    let mut macro_row = vec!["Macro-Avg".to_string(), "—".to_string()];
    let total: usize = first.per_family.iter().map(|f| f.n).sum();
    let mut micro_row = vec!["Micro-Avg".to_string(), total.to_string()];
    for r in reports {
        macro_row.push(fmt_olr(r.macro_olr));
        macro_row.push(fmt_pct(r.macro_pass));
        micro_row.push(fmt_olr(r.micro_olr));
        micro_row.push(fmt_pct(r.micro_pass));
    }
    rows.push(macro_row);
    rows.push(micro_row);
    Table { header, rows }
}

fn comparison_table(comparisons: &[&Comparison]) -> Table {
    let mut header = vec!["Task".to_string()];
    for c in comparisons {
        header.push(format!("OLR vs. {} (%↓)", c.baseline_model_id));
        header.push(format!("Pass vs. {} (pp)", c.baseline_model_id));
    }
    let mut rows = Vec::new();
    let Some(first) = comparisons.first() else {
        return Table { header, rows };
    };
    let push_row = |rows: &mut Vec<Vec<String>>, label: &str, pick: &dyn Fn(&Comparison) -> Option<ComparisonRow>| {
        let mut row = vec![label.to_string()];
        for c in comparisons {
            match pick(c) {
                Some(r) => {
                    row.push(fmt_reduction(r.olr_rel_reduction_pct));
                    row.push(fmt_pp(r.pass_pp_delta));
                }
                None => {
                    row.push("—".into());
                    row.push("—".into());
                }
            }
        }
        rows.push(row);
    };
    for fam in &first.per_family {
        push_row(&mut rows, &fam.display_name, &|c| {
            c.per_family.iter().find(|r| r.family == fam.family).cloned()
        });
    }
    push_row(&mut rows, "Macro-Avg", &|c| Some(c.macro_avg.clone()));
    push_row(&mut rows, "Micro-Avg", &|c| Some(c.micro_avg.clone()));
    Table { header, rows }
}

fn markdown_table(out: &mut String, t: &Table) {
    let _ = writeln!(out, "| {} |", t.header.join(" | "));
    let align: Vec<&str> = t
        .header
        .iter()
        .enumerate()
        .map(|(i, _)| if i == 0 { "---" } else { "---:" })
        .collect();
    let _ = writeln!(out, "| {} |", align.join(" | "));
    for row in &t.rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
}

fn csv_table(t: &Table) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header).expect("in-memory write");
    for row in &t.rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Evaluation results (per-family OLR and Pass@TC, plus averages) and, when
/// given, comparisons against baselines.
pub fn render_markdown(reports: &[&AggregateReport], comparisons: &[&Comparison]) -> String {
    let mut out = String::new();
    if !reports.is_empty() {
        out.push_str("## Evaluation results\n\n");
        for line in provenance_lines(reports) {
            let _ = writeln!(out, "- {line}");
        }
        out.push('\n');
        markdown_table(&mut out, &evaluation_table(reports));
    }
    if !comparisons.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        let ours = &comparisons[0].ours_model_id;
        let _ = writeln!(out, "## {ours} vs. baselines\n");
        for c in comparisons {
            let _ = writeln!(
                out,
                "- {} vs. {}: policy preset `{}`",
                c.ours_model_id, c.baseline_model_id, c.policy_preset
            );
        }
        out.push('\n');
        markdown_table(&mut out, &comparison_table(comparisons));
    }
    out
}

pub fn render_evaluation_csv(reports: &[&AggregateReport]) -> String {
    csv_table(&evaluation_table(reports))
}

pub fn render_comparison_csv(comparisons: &[&Comparison]) -> String {
    csv_table(&comparison_table(comparisons))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{compare, FamilyStats};

    fn report(model: &str, olr: f64, pass: f64) -> AggregateReport {
        let fam = FamilyStats {
            family: "named_entity_translation".into(),
            display_name: "Named Entity Translation".into(),
            n: 100,
            mean_olr: olr,
            pass_rate: pass,
            degenerate_count: 0,
        };
        AggregateReport::new(model, "r1", "paper-strict", "paper-fixed", vec![fam]).unwrap()
    }

    #[test]
    fn signed_formatting() {
        assert_eq!(fmt_reduction(Some(77.2)), "+77.2%");
        assert_eq!(fmt_reduction(Some(-20.0514)), "-20.1%");
        assert_eq!(fmt_reduction(None), "n/a");
        assert_eq!(fmt_pp(10.700000000000001), "+10.7 pp");
        assert_eq!(fmt_pp(-0.0), "+0.0 pp");
        assert_eq!(fmt_pp(-0.01), "+0.0 pp");
        assert_eq!(fmt_pp(-5.6), "-5.6 pp");
        assert_eq!(fmt_olr(0.11264), "0.113");
        assert_eq!(fmt_pct(0.287), "28.7%");
    }

    #[test]
    fn markdown_rows() {
        let r = report("PureTC-1B", 0.057, 0.287);
        let md = render_markdown(&[&r], &[]);
        assert!(
            md.contains("| Named Entity Translation | 100 | 0.057 | 28.7% |"),
            "{md}"
        );
        assert!(md.contains("paper-strict") && md.contains("paper-fixed"));
    }

    #[test]
    fn comparison_markdown_and_csv() {
        let ours = report("PureTC-1B", 0.057, 0.287);
        let base = report("Llama-3B", 0.250, 0.064);
        let c = compare(&ours, &base).unwrap();
        let md = render_markdown(&[], &[&c]);
        assert!(md.contains("| Named Entity Translation | +77.2% | +22.3 pp |"), "{md}");
        let csv = render_comparison_csv(&[&c]);
        assert!(
            csv.lines()
                .nth(1)
                .unwrap()
                .starts_with("Named Entity Translation,+77.2%,+22.3 pp"),
            "{csv}"
        );
    }

    #[test]
    fn csv_quotes_commas() {
        let mut r = report("m,1", 0.1, 0.5);
        r.per_family[0].display_name = "A, B".into();
        let csv = render_evaluation_csv(&[&r]);
        assert!(csv.contains("\"A, B\",100,0.100,50.0%"), "{csv}");
        assert!(csv.starts_with("Task,N,\"m,1 OLR\""), "{csv}");
    }
}
