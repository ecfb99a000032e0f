use std::io::Write;

use super::StepSignals;

/// Per-step CSV of intrinsic signals: `step,rnd,llec,b,eec,r_int,r_ext,r_total`.
///
/// With one module per agent the module columns hold the agent mean.
pub struct IntrinsicLogWriter<W: Write> {
    out: W,
}

impl<W: Write> IntrinsicLogWriter<W> {
    pub const HEADER: &'static str = "step,rnd,llec,b,eec,r_int,r_ext,r_total";

    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, step: u64, signals: &StepSignals, r_ext: f64, r_total: f64) -> std::io::Result<()> {
        let n = signals.modules.len().max(1) as f64;
        let mean = |f: fn(&super::Signals) -> f64| signals.modules.iter().map(f).sum::<f64>() / n;
        writeln!(
            self.out,
            "{step},{},{},{},{},{},{r_ext},{r_total}",
            mean(|s| s.rnd),
            mean(|s| s.llec),
            mean(|s| s.bonus),
            mean(|s| s.eec),
            signals.r_int,
        )
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
