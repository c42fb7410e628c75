//! CSV writers for run records and summaries. Floats are written with
//! the shortest round-trip formatting, so identical runs produce byte
//! identical files.

use anyhow::{Context, Result};
use kdopt::run::RunRecord;
use std::fmt::Write as _;
use std::path::Path;

pub fn run_record_csv(run_id: usize, record: &RunRecord) -> String {
    let dims = record.dims;
    let mut out = String::new();
    out.push_str("run_id,seed,iteration,eval_index");
    for i in 0..dims {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",f,best_so_far\n");
    for row in &record.rows {
        let _ = write!(
            out,
            "{run_id},{},{},{}",
            record.seed, row.iteration, row.eval_index
        );
        for v in &row.x_user {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", row.value, row.best_so_far);
    }
    out
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Parse the `best_so_far` column back out of a run CSV.
pub fn read_best_trace(content: &str) -> Vec<(usize, f64)> {
    content
        .lines()
        .skip(1)
        .filter_map(|line| {
            let mut fields = line.split(',');
            let eval_index: usize = fields.nth(3)?.parse().ok()?;
            let best: f64 = fields.next_back()?.parse().ok()?;
            Some((eval_index, best))
        })
        .collect()
}
