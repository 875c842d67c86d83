//! Per-iteration measurements, derived statistics and CSV export.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::TransferLedger;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run has no iterations")]
    EmptyRun,
    #[error("skipping the first iteration needs at least 2 iterations")]
    TooFewIterations,
    #[error("linear fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("linear fit needs at least two distinct x values")]
    DegenerateX,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub wall_ms: f64,
    pub msg_count: u64,
    pub msg_bytes: u64,
    pub structure_bytes: u64,
    pub dfs_read_bytes: u64,
    pub dfs_write_bytes: u64,
    pub active_vertices: u64,
}

impl IterationMetrics {
    pub fn ledger(&self) -> TransferLedger {
        TransferLedger {
            msg_count: self.msg_count,
            msg_bytes: self.msg_bytes,
            structure_bytes: self.structure_bytes,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub engine: String,
    pub algorithm: String,
    pub dataset: String,
    pub num_workers: usize,
    pub iterations: Vec<IterationMetrics>,
    pub total_wall_ms: f64,
}

impl RunMetrics {
    pub fn totals(&self) -> TransferLedger {
        self.iterations.iter().map(IterationMetrics::ledger).sum()
    }

    pub fn iteration_wall_ms(&self) -> f64 {
        self.iterations.iter().map(|i| i.wall_ms).sum()
    }
}

/// Arithmetic mean of per-iteration wall time, optionally without iteration 0.
pub fn mean_iteration_time(run: &RunMetrics, skip_first: bool) -> Result<f64, MetricsError> {
    let times: Vec<f64> = run.iterations.iter().map(|i| i.wall_ms).collect();
    let slice = match (times.len(), skip_first) {
        (0, _) => return Err(MetricsError::EmptyRun),
        (1, true) => return Err(MetricsError::TooFewIterations),
        (_, true) => &times[1..],
        (_, false) => &times[..],
    };
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Ordinary least squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit<S> {
    pub slope: S,
    pub intercept: S,
    pub r_squared: S,
    /// The y values have zero variance; `r_squared` is reported as 1.
    pub zero_variance: bool,
}

pub fn fit_linear<S: Scalar>(points: &[(S, S)]) -> Result<LinearFit<S>, MetricsError> {
    if points.len() < 3 {
        return Err(MetricsError::TooFewPoints(points.len()));
    }
    let n = S::from_usize_lossy(points.len());
    let mean_x = points.iter().fold(S::zero(), |a, p| a + p.0) / n;
    let mean_y = points.iter().fold(S::zero(), |a, p| a + p.1) / n;
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    let mut syy = S::zero();
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == S::zero() {
        return Err(MetricsError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if syy == S::zero() {
        return Ok(LinearFit {
            slope,
            intercept,
            r_squared: S::one(),
            zero_variance: true,
        });
    }
    let ss_res = points.iter().fold(S::zero(), |acc, &(x, y)| {
        let r = y - (slope * x + intercept);
        acc + r * r
    });
    let r_squared = (S::one() - ss_res / syy).max(S::zero()).min(S::one());
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        zero_variance: false,
    })
}

/// One CSV row; field order is the file's column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub engine: String,
    pub algorithm: String,
    pub dataset: String,
    pub workers: usize,
    pub iteration: usize,
    pub wall_ms: f64,
    pub msg_count: u64,
    pub msg_bytes: u64,
    pub structure_bytes: u64,
    pub dfs_read_bytes: u64,
    pub dfs_write_bytes: u64,
    pub active_vertices: u64,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "run_id",
    "engine",
    "algorithm",
    "dataset",
    "workers",
    "iteration",
    "wall_ms",
    "msg_count",
    "msg_bytes",
    "structure_bytes",
    "dfs_read_bytes",
    "dfs_write_bytes",
    "active_vertices",
];

pub fn csv_rows(run: &RunMetrics) -> impl Iterator<Item = CsvRow> + '_ {
    run.iterations.iter().map(move |it| CsvRow {
        run_id: run.run_id.clone(),
        engine: run.engine.clone(),
        algorithm: run.algorithm.clone(),
        dataset: run.dataset.clone(),
        workers: run.num_workers,
        iteration: it.iteration,
        wall_ms: it.wall_ms,
        msg_count: it.msg_count,
        msg_bytes: it.msg_bytes,
        structure_bytes: it.structure_bytes,
        dfs_read_bytes: it.dfs_read_bytes,
        dfs_write_bytes: it.dfs_write_bytes,
        active_vertices: it.active_vertices,
    })
}

struct CountingWriter<W> {
    inner: W,
    count: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }
    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes a header and one row per (run, iteration); returns bytes written.
pub fn export_csv<W: Write>(runs: &[RunMetrics], sink: W) -> Result<u64, MetricsError> {
    let mut counting = CountingWriter { inner: sink, count: 0 };
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut counting);
        w.write_record(CSV_COLUMNS)?;
        for run in runs {
            for row in csv_rows(run) {
                w.serialize(row)?;
            }
        }
        w.flush()?;
    }
    Ok(counting.count)
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<CsvRow>, MetricsError> {
    let mut r = csv::Reader::from_reader(source);
    let rows = r.deserialize().collect::<Result<Vec<CsvRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_with_times(times: &[f64]) -> RunMetrics {
        RunMetrics {
            run_id: "r".into(),
            engine: "bsp".into(),
            algorithm: "rip".into(),
            dataset: "d, \"quoted\"".into(),
            num_workers: 2,
            iterations: times
                .iter()
                .enumerate()
                .map(|(i, &t)| IterationMetrics {
                    iteration: i,
                    wall_ms: t,
                    msg_count: 10 + i as u64,
                    msg_bytes: 1000 * i as u64,
                    structure_bytes: if i == 0 { 77 } else { 0 },
                    dfs_read_bytes: 3,
                    dfs_write_bytes: 4,
                    active_vertices: 5,
                })
                .collect(),
            total_wall_ms: times.iter().sum(),
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_iteration_time(&run_with_times(&[100.0; 3]), false).unwrap(), 100.0);
        assert_eq!(
            mean_iteration_time(&run_with_times(&[300.0, 100.0, 100.0]), true).unwrap(),
            100.0
        );
        assert!(matches!(
            mean_iteration_time(&run_with_times(&[]), false),
            Err(MetricsError::EmptyRun)
        ));
        assert!(matches!(
            mean_iteration_time(&run_with_times(&[5.0]), true),
            Err(MetricsError::TooFewIterations)
        ));
    }

    #[test]
    fn exact_line() {
        let fit = fit_linear(&[(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)]).unwrap();
        assert!((fit.slope - 10.0f64).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
        assert!(!fit.zero_variance);
    }

    #[test]
    fn constant_series_is_flagged() {
        let fit = fit_linear(&[(1.0f32, 10.0), (2.0, 10.0), (3.0, 10.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.zero_variance);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_linear(&[(1.0, 1.0), (2.0, 2.0)]), Err(MetricsError::TooFewPoints(2))));
        assert!(matches!(
            fit_linear(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(MetricsError::DegenerateX)
        ));
    }

    #[test]
    fn noisy_line_r_squared_in_range() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 + [0.3, -0.2][i % 2])).collect();
        let fit = fit_linear(&pts).unwrap();
        assert!(fit.r_squared > 0.99 && fit.r_squared < 1.0);
        // Independent check of the definition.
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        let ss_res: f64 = pts
            .iter()
            .map(|p| (p.1 - fit.slope * p.0 - fit.intercept).powi(2))
            .sum();
        assert!((fit.r_squared - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let run = run_with_times(&[1.5, 2.25, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.125]);
        let mut out = Vec::new();
        let n = export_csv(std::slice::from_ref(&run), &mut out).unwrap();
        assert_eq!(n as usize, out.len());
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert!(text.contains("\"d, \"\"quoted\"\"\""));

        let mut again = Vec::new();
        export_csv(std::slice::from_ref(&run), &mut again).unwrap();
        assert_eq!(again, out);

        let rows = read_csv(out.as_slice()).unwrap();
        let expected: Vec<CsvRow> = csv_rows(&run).collect();
        assert_eq!(rows, expected);
        // Mean recomputed from the parsed file matches the in-memory value.
        let mean = rows.iter().map(|r| r.wall_ms).sum::<f64>() / rows.len() as f64;
        assert_eq!(mean, mean_iteration_time(&run, false).unwrap());
    }
}
