use std::io::{Read, Write};

use rayon::prelude::*;

use crate::engine::{EngineError, Environment};

pub const SWEEP_HEADER: [&str; 5] = ["probability", "mean_added", "mean_removed", "stddev_added", "stddev_removed"];

/// Aggregated churn counts for one probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub probability: f64,
    pub mean_added: f64,
    pub mean_removed: f64,
    pub stddev_added: f64,
    pub stddev_removed: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("no seeds given")]
    NoSeeds,
    #[error("run p={probability} seed={seed} failed: {source}")]
    Run { probability: f64, seed: u64, source: EngineError },
    #[error("sweep csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("sweep csv: {0}")]
    Format(String),
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `make(p, seed)` for exactly `cycles` cycles per probability and
/// seed, and averages the churn counts over seeds. Runs are independent and
/// execute in parallel; the table is in input order.
pub fn churn_sweep<F>(make: F, probabilities: &[f64], cycles: u64, seeds: &[u64]) -> Result<Vec<SweepRow>, SweepError>
where
    F: Fn(f64, u64) -> Result<Environment, EngineError> + Sync,
{
    if let Some(&p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SweepError::BadProbability(p));
    }
    if seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    let jobs: Vec<(f64, u64)> = probabilities.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let counts = jobs
        .par_iter()
        .map(|&(probability, seed)| {
            let wrap = |source| SweepError::Run { probability, seed, source };
            let mut env = make(probability, seed).map_err(wrap)?;
            env.run_cycles(cycles).map_err(wrap)?;
            let h = env.churn_history();
            Ok((h.total_added as f64, h.total_removed as f64))
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(probabilities
        .iter()
        .zip(counts.chunks(seeds.len()))
        .map(|(&probability, runs)| {
            let added: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let removed: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let (mean_added, stddev_added) = mean_std(&added);
            let (mean_removed, stddev_removed) = mean_std(&removed);
            SweepRow { probability, mean_added, mean_removed, stddev_added, stddev_removed }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.probability.to_string(),
            r.mean_added.to_string(),
            r.mean_removed.to_string(),
            r.stddev_added.to_string(),
            r.stddev_removed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, SweepError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(SweepError::Format(format!("expected header `{}`", SWEEP_HEADER.join(","))));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| {
                rec[i].parse::<f64>().map_err(|e| SweepError::Format(format!("`{}`: {e}", &rec[i])))
            };
            Ok(SweepRow {
                probability: f(0)?,
                mean_added: f(1)?,
                mean_removed: f(2)?,
                stddev_added: f(3)?,
                stddev_removed: f(4)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            SweepRow { probability: 0.0, mean_added: 0.0, mean_removed: 0.0, stddev_added: 0.0, stddev_removed: 0.0 },
            SweepRow { probability: 0.15, mean_added: 375.5, mean_removed: 374.25, stddev_added: 3.5, stddev_removed: 2.0 },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("probability,mean_added,mean_removed,stddev_added,stddev_removed\n"));
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn bad_probability_is_rejected_up_front() {
        let make = |_: f64, _: u64| -> Result<Environment, EngineError> { unreachable!() };
        assert!(matches!(churn_sweep(make, &[0.1, 1.5], 10, &[1]), Err(SweepError::BadProbability(p)) if p == 1.5));
        assert!(matches!(churn_sweep(make, &[0.1], 10, &[]), Err(SweepError::NoSeeds)));
    }
}
