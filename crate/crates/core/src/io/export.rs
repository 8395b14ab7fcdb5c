use std::path::Path;

use super::write_bytes;
use crate::error::Result;
use crate::photometrics::{DepthMetrics, SparsificationResult};

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

/// Columns `fraction,sparsification,oracle,random`.
pub fn sparsification_csv(result: &SparsificationResult) -> Result<String> {
    let mut w = writer();
    w.write_record(["fraction", "sparsification", "oracle", "random"])?;
    for i in 0..result.fractions.len() {
        w.write_record(
            [
                result.fractions[i],
                result.sparsification[i],
                result.oracle[i],
                result.random[i],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    finish(w)
}

/// One labelled row per metrics record: `label,abs_rel,...,d3,count`.
pub fn metrics_csv(rows: &[(String, DepthMetrics)]) -> Result<String> {
    let mut w = writer();
    let mut header = vec!["label"];
    header.extend(DepthMetrics::FIELDS);
    header.push("count");
    w.write_record(&header)?;
    for (label, m) in rows {
        let mut record = vec![label.clone()];
        record.extend(m.values().map(|v| v.to_string()));
        record.push(m.count.to_string());
        w.write_record(&record)?;
    }
    finish(w)
}

pub fn write_sparsification_csv(path: impl AsRef<Path>, result: &SparsificationResult) -> Result<()> {
    write_bytes(path.as_ref(), sparsification_csv(result)?.as_bytes())
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[(String, DepthMetrics)]) -> Result<()> {
    write_bytes(path.as_ref(), metrics_csv(rows)?.as_bytes())
}
