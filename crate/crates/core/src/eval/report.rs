//! Text outputs of model evaluation.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use super::cv::CvResult;
use super::metrics::MetricReport;
use super::selection::{FfsStep, TuneResult};
use crate::error::{Error, Result};

fn fmt_level(p: f64) -> String {
    format!("{p:.2}")
}

/// `key = value` lines for the pooled report: one line per QCP level and
/// three per interval.
pub fn metric_lines(r: &MetricReport) -> Vec<(String, String)> {
    let mut out = vec![
        ("n".to_string(), r.n.to_string()),
        ("rmse".to_string(), r.rmse.to_string()),
        ("r2".to_string(), r.r2.to_string()),
    ];
    for (p, c) in r.levels.iter().zip(&r.qcp) {
        out.push((format!("qcp_{}", fmt_level(*p)), c.to_string()));
    }
    for pi in &r.intervals {
        let band = format!("pi_{}_{}", fmt_level(pi.lower), fmt_level(pi.upper));
        out.push((format!("{band}_inside"), pi.inside.to_string()));
        out.push((format!("{band}_below"), pi.below.to_string()));
        out.push((format!("{band}_above"), pi.above.to_string()));
    }
    out
}

pub fn write_key_values(lines: &[(String, String)], path: &Path) -> Result<()> {
    let mut text = String::new();
    for (k, v) in lines {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `key = value` lines back, skipping blanks and `#` comments.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (k, v) = l.split_once('=').ok_or_else(|| Error::parse(path, format!("bad line `{l}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// One row per fold plus a final `pooled` row.
pub fn write_metric_table(result: &CvResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["scope".to_string(), "n".into(), "rmse".into(), "r2".into()];
    let pooled = &result.pooled;
    header.extend(pooled.levels.iter().map(|p| format!("qcp_{}", fmt_level(*p))));
    for pi in &pooled.intervals {
        let band = format!("pi_{}_{}", fmt_level(pi.lower), fmt_level(pi.upper));
        header.extend(["inside", "below", "above"].map(|s| format!("{band}_{s}")));
    }
    w.write_record(&header)?;
    let scopes = result
        .per_fold
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("fold_{i}"), r))
        .chain(std::iter::once(("pooled".to_string(), pooled)));
    for (scope, r) in scopes {
        let mut row = vec![scope, r.n.to_string(), r.rmse.to_string(), r.r2.to_string()];
        row.extend(r.qcp.iter().map(|c| c.to_string()));
        for pi in &r.intervals {
            row.extend([pi.inside, pi.below, pi.above].map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Held-out predictions, one row per training row.
pub fn write_predictions(result: &CvResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["row".to_string(), "fold".into(), "observed".into(), "mean".into()];
    header.extend(result.pooled.levels.iter().map(|p| format!("q_{}", fmt_level(*p))));
    w.write_record(&header)?;
    for p in &result.predictions {
        let mut row = vec![p.row.to_string(), p.fold.to_string(), p.observed.to_string(), p.mean.to_string()];
        row.extend(p.quantiles.iter().map(|q| q.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Appends one tab-separated line per evaluated subset.
pub struct FfsLog {
    file: File,
}

impl FfsLog {
    pub const HEADER: &'static str = "step\tsubset\trmse\taccepted";

    pub fn open(path: &Path) -> Result<Self> {
        let fresh = !path.exists();
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        if fresh {
            writeln!(file, "{}", Self::HEADER).map_err(|e| Error::io(path, e))?;
        }
        Ok(FfsLog { file })
    }

    pub fn append(&mut self, step: &FfsStep) -> Result<()> {
        writeln!(self.file, "{}\t{}\t{}\t{}", step.step, step.names.join(","), step.rmse, step.accepted)
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io("<ffs log>", e))
    }
}

pub fn write_tune_table(result: &TuneResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["mtry", "rmse", "best"])?;
    for &(m, r) in &result.table {
        w.write_record([m.to_string(), r.to_string(), (m == result.best).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::pi_coverage;

    fn report() -> MetricReport {
        let levels = crate::qrf::DEFAULT_LEVELS.to_vec();
        let q = vec![levels.iter().map(|p| p * 100.0).collect::<Vec<_>>(); 2];
        let obs = [30.0, 95.0];
        MetricReport {
            n: 2,
            rmse: 1.5,
            r2: 0.25,
            qcp: crate::eval::qcp(&levels, &q, &obs).unwrap(),
            intervals: vec![pi_coverage(0.1, 0.9, &levels, &q, &obs).unwrap()],
            levels,
        }
    }

    #[test]
    fn key_value_round_trip_has_nine_qcp_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.txt");
        write_key_values(&metric_lines(&report()), &path).unwrap();
        let back = read_key_values(&path).unwrap();
        assert_eq!(back.iter().filter(|(k, _)| k.starts_with("qcp_")).count(), 9);
        assert!(back.contains(&("qcp_0.90".into(), "0.5".into())));
        assert!(back.contains(&("pi_0.10_0.90_above".into(), "0.5".into())));
    }

    #[test]
    fn ffs_log_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ffs.log");
        let step = FfsStep { step: 0, subset: vec![0, 1], names: vec!["a".into(), "b".into()], rmse: 2.0, accepted: true };
        FfsLog::open(&path).unwrap().append(&step).unwrap();
        FfsLog::open(&path).unwrap().append(&step).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().nth(2), Some("0\ta,b\t2\ttrue"));
    }
}
