//! File writers. CSV rows use Rust's `Display` for floats, which is
//! locale-independent and round-trips exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use trustnet_core::analysis::{alpha_histogram, Histogram};
use trustnet_core::meanfield::AlphaDistribution;
use trustnet_core::trust::TrustRecord;
use trustnet_core::{Recorder, SimState, SnapshotMode, StepMetrics};

pub const TIMESERIES_HEADER: &str =
    "t,C,I,E,accepted,refused,e_false_accept,e_false_reject,C_frac,I_frac,E_frac";

/// Bins of the α histograms written by runs, over `[0, 2 v_alpha]`.
pub const HIST_BINS: usize = 100;

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new)
}

/// Streams `timeseries.csv` and writes `alpha_hist_<t>.csv` on snapshots.
pub struct CsvRecorder {
    out: BufWriter<File>,
    dir: PathBuf,
    n: usize,
    messages: usize,
    v_alpha: f64,
}

impl CsvRecorder {
    pub fn create(dir: &Path, n: usize, messages: usize, v_alpha: f64) -> io::Result<Self> {
        let mut out = create(&dir.join("timeseries.csv"))?;
        writeln!(out, "{TIMESERIES_HEADER}")?;
        Ok(CsvRecorder {
            out,
            dir: dir.to_owned(),
            n,
            messages,
            v_alpha,
        })
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

impl Recorder for CsvRecorder {
    fn record(&mut self, m: &StepMetrics) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.t,
            m.C,
            m.I,
            m.E,
            m.accepted,
            m.refused,
            m.e_false_accept,
            m.e_false_reject,
            m.c_frac(self.messages),
            m.i_frac(self.n),
            m.e_frac(self.messages),
        )
    }

    fn snapshot(&mut self, state: &SimState) -> io::Result<()> {
        let values = state.alpha_values(SnapshotMode::TouchedPairs);
        let path = self.dir.join(format!("alpha_hist_{}.csv", state.t()));
        match alpha_histogram(&values, HIST_BINS, (0.0, 2.0 * self.v_alpha)) {
            Ok(h) => write_histogram(&path, &h, self.v_alpha),
            // Nothing touched yet: an empty histogram file keeps the schedule visible.
            Err(_) => writeln!(create(&path)?, "bin_center,density,branch"),
        }
    }
}

fn branch_label(center: f64, v: f64) -> &'static str {
    if center < v {
        "P1"
    } else {
        "P2"
    }
}

pub fn write_histogram(path: &Path, h: &Histogram, v: f64) -> io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "bin_center,density,branch")?;
    for (c, d) in h.centers().into_iter().zip(h.density()) {
        writeln!(out, "{c},{d},{}", branch_label(c, v))?;
    }
    out.flush()
}

pub fn write_distribution(path: &Path, p: &AlphaDistribution) -> io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "bin_center,density,branch")?;
    for (b, (c, d)) in p.centers().into_iter().zip(p.density()).enumerate() {
        writeln!(out, "{c},{d},{}", p.branch_of(b).label())?;
    }
    out.flush()
}

pub fn write_trust_dump(path: &Path, records: &[TrustRecord]) -> io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "i,j,effective_alpha")?;
    for r in records {
        writeln!(out, "{},{},{}", r.receiver, r.sender, r.alpha)?;
    }
    out.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()
}
