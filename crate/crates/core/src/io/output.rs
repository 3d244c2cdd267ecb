//! Output directory: lock file, diagnostics CSV, event log and snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{
    biharmonic_residual, energy_e2, max_local_energy, AnalysisConfig, ConcentrationEvent,
};
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::manifold::TargetManifold;

use super::snapshot::write_snapshot;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const EVENTS_FILE: &str = "events.log";
pub const LOCK_FILE: &str = ".lock";
pub const CSV_HEADER: &str = "t,F2,E2,dissipation,max_local_energy,biharmonic_residual,dt,step";

/// One row of the diagnostics table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub f2: f64,
    pub e2: f64,
    pub dissipation: f64,
    pub max_local_energy: f64,
    pub biharmonic_residual: f64,
    pub dt: f64,
    pub step: u64,
}

impl DiagnosticsRow {
    pub fn of_state(state: &FlowState, m: &TargetManifold, cfg: &AnalysisConfig) -> Result<Self> {
        let last_dt = state.ledger.history.last().map_or(0.0, |e| e.dt);
        Ok(Self {
            t: state.t,
            f2: state.ledger.f2_current(),
            e2: energy_e2(&state.u, m)?,
            dissipation: state.ledger.dissipation,
            max_local_energy: max_local_energy(&state.u, cfg)?,
            biharmonic_residual: biharmonic_residual(&state.u, m)?,
            dt: last_dt,
            step: state.step_index,
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.t,
            self.f2,
            self.e2,
            self.dissipation,
            self.max_local_energy,
            self.biharmonic_residual,
            self.dt,
            self.step
        )
    }
}

/// One event-log record. `status` tells whether blow-up extraction will be
/// attempted for the event (`pending`) or not (`not_requested`); outcomes
/// are logged separately once known.
pub fn format_event(e: &ConcentrationEvent, status: &str) -> String {
    let center: Vec<String> = e.center.iter().map(|x| format!("{x:.6}")).collect();
    format!(
        "concentration t={:e} step={} node={:?} center=({}) energy={:e} extraction={status}",
        e.t,
        e.step,
        e.node,
        center.join(","),
        e.energy
    )
}

/// Exclusive handle on an output directory. The lock file is removed on drop.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
    diagnostics: BufWriter<File>,
    events: BufWriter<File>,
}

impl OutputDir {
    /// Creates `root` if needed and takes its lock. With `append` the
    /// existing tables are extended (a resumed run); otherwise they are
    /// truncated.
    pub fn open(root: &Path, append: bool) -> Result<Self> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => writeln!(f, "{}", std::process::id())?,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Locked(root.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        }
        let opened = (|| -> Result<(BufWriter<File>, BufWriter<File>)> {
            let diag_path = root.join(DIAGNOSTICS_FILE);
            let fresh = !append || !diag_path.exists();
            let mut diagnostics = BufWriter::new(open_table(&diag_path, append)?);
            if fresh {
                writeln!(diagnostics, "{CSV_HEADER}")?;
            }
            let events = BufWriter::new(open_table(&root.join(EVENTS_FILE), append)?);
            Ok((diagnostics, events))
        })();
        match opened {
            Ok((diagnostics, events)) => Ok(Self {
                root: root.to_path_buf(),
                lock,
                diagnostics,
                events,
            }),
            Err(e) => {
                let _ = fs::remove_file(&lock);
                Err(e)
            }
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        writeln!(self.diagnostics, "{}", row.to_csv())?;
        self.diagnostics.flush()?;
        Ok(())
    }

    pub fn log(&mut self, line: &str) -> Result<()> {
        writeln!(self.events, "{line}")?;
        self.events.flush()?;
        Ok(())
    }

    pub fn log_events(&mut self, events: &[ConcentrationEvent], status: &str) -> Result<()> {
        for e in events {
            writeln!(self.events, "{}", format_event(e, status))?;
        }
        self.events.flush()?;
        Ok(())
    }

    pub fn snapshot_path(&self, step: u64) -> PathBuf {
        self.root.join(format!("snapshot_{step:010}.bin"))
    }

    pub fn write_snapshot(&self, state: &FlowState) -> Result<PathBuf> {
        let path = self.snapshot_path(state.step_index);
        write_snapshot(&path, state)?;
        Ok(path)
    }

    /// Writes a small text artifact (configuration copy, report) into the
    /// directory.
    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = self.diagnostics.flush();
        let _ = self.events.flush();
        let _ = fs::remove_file(&self.lock);
    }
}

fn open_table(path: &Path, append: bool) -> Result<File> {
    let mut o = OpenOptions::new();
    o.create(true);
    if append {
        o.append(true);
    } else {
        o.write(true).truncate(true);
    }
    Ok(o.open(path)?)
}
