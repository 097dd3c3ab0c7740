//! Loss traces and evaluation reports.

use std::fmt::Write as _;

use evontology_core::eval::MetricReport;
use evontology_core::learn::TraceRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Top1,
    Top3,
    Top5,
    Jsc,
    Cs,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Top1, Metric::Top3, Metric::Top5, Metric::Jsc, Metric::Cs];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Top1 => "top1",
            Metric::Top3 => "top3",
            Metric::Top5 => "top5",
            Metric::Jsc => "jsc",
            Metric::Cs => "cs",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Metric>, String> {
        s.split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                Self::ALL
                    .into_iter()
                    .find(|k| k.as_str() == m)
                    .ok_or_else(|| format!("unknown metric {m:?} (expected top1,top3,top5,jsc,cs)"))
            })
            .collect()
    }

    pub fn value(self, r: &MetricReport) -> Option<f64> {
        match self {
            Metric::Top1 => Some(r.top1),
            Metric::Top3 => r.top3,
            Metric::Top5 => r.top5,
            Metric::Jsc => Some(r.jsc),
            Metric::Cs => Some(r.cs),
        }
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing csv to memory");
    String::from_utf8(w.into_inner().expect("flushing csv to memory")).expect("csv is utf-8")
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    csv_string(|w| {
        w.write_record(["iter", "lr", "train_loss", "val_loss"])?;
        for r in trace {
            w.write_record([r.iter.to_string(), r.lr.to_string(), r.train_loss.to_string(), r.val_loss.to_string()])?;
        }
        Ok(())
    })
}

pub fn report_text(r: &MetricReport, metrics: &[Metric], ontology_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ontology {ontology_hash}");
    let _ = writeln!(out, "samples  {}", r.samples);
    for m in metrics {
        match m.value(r) {
            Some(v) => writeln!(out, "{:<8} {:.4}", m.as_str(), v),
            None => writeln!(out, "{:<8} n/a (too few leaves)", m.as_str()),
        }
        .expect("writing to a string");
    }
    let _ = writeln!(out, "\nper leaf (top-1)");
    let _ = writeln!(out, "{:<16} {:>7} {:>7}  label", "id", "support", "top1");
    for c in &r.per_leaf {
        let _ = writeln!(out, "{:<16} {:>7} {:>7.4}  {}", c.id, c.support, c.top1, c.label);
    }
    let _ = writeln!(out, "\nper branch (mean top-1 of its leaves)");
    let _ = writeln!(out, "{:<16} {:>7} {:>7}  label", "id", "leaves", "top1");
    for b in &r.per_branch {
        let _ = writeln!(out, "{:<16} {:>7} {:>7.4}  {}", b.id, b.leaves, b.top1, b.label);
    }
    out
}

/// Columns `scope,id,label,support,value`; aggregate rows name the metric
/// in `id`.
pub fn report_csv(r: &MetricReport, metrics: &[Metric]) -> String {
    csv_string(|w| {
        w.write_record(["scope", "id", "label", "support", "value"])?;
        for m in metrics {
            if let Some(v) = m.value(r) {
                w.write_record(["aggregate", m.as_str(), "", &r.samples.to_string(), &v.to_string()])?;
            }
        }
        for c in &r.per_leaf {
            w.write_record(["leaf", &c.id, &c.label, &c.support.to_string(), &c.top1.to_string()])?;
        }
        for b in &r.per_branch {
            w.write_record(["branch", &b.id, &b.label, &b.leaves.to_string(), &b.top1.to_string()])?;
        }
        Ok(())
    })
}
