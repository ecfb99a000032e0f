use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub env_steps: u64,
    pub eval_mean: f64,
    pub eval_std: f64,
    /// Mean weighted intrinsic reward `β·r_int` per env step since the previous point.
    pub intrinsic_mean: f64,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<EvalRecord>,
}

impl RunLog {
    pub const HEADER: &'static str = "env_steps,eval_mean,eval_std,intrinsic_mean,wall_clock_s";

    pub fn row(r: &EvalRecord) -> String {
        format!(
            "{},{:?},{:?},{:?},{:.6}",
            r.env_steps, r.eval_mean, r.eval_std, r.intrinsic_mean, r.wall_clock
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.records {
            let _ = writeln!(s, "{}", Self::row(r));
        }
        s
    }

    /// The CSV with the wall-clock column dropped.
    pub fn to_csv_without_clock(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn from_csv(text: &str, seed: u64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::HEADER => {}
            other => {
                return Err(Error::Config(format!(
                    "run log header mismatch: expected '{}', found '{}'",
                    Self::HEADER,
                    other.unwrap_or("")
                )))
            }
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("run log line {}: '{line}'", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            records.push(EvalRecord {
                env_steps: f[0].trim().parse().map_err(|_| bad())?,
                eval_mean: num(f[1])?,
                eval_std: num(f[2])?,
                intrinsic_mean: num(f[3])?,
                wall_clock: num(f[4])?,
            });
        }
        Ok(Self { seed, records })
    }

    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, seed)
    }

    pub fn final_return(&self) -> Option<f64> {
        self.records.last().map(|r| r.eval_mean)
    }
}
