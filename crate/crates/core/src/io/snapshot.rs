//! Binary snapshots for restart.
//!
//! A snapshot is a UTF-8 header of `key = value` lines closed by an empty
//! line, followed by the node values in canonical order as little-endian
//! f64. Floats are written in shortest round-trip form, so a restored state
//! continues bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{EnergyLedger, FlowState, LedgerEntry, Stepper};
use crate::grid::{Field, Grid, Topology};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Decoded snapshot contents. `u` carries stale ghosts until closed.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotData {
    pub u: Field,
    pub t: f64,
    pub step: u64,
    /// Nominal step for the next attempt.
    pub dt: f64,
    pub dissipation: f64,
    pub f2: f64,
    pub f2_initial: f64,
}

impl SnapshotData {
    pub fn of_state(state: &FlowState) -> Self {
        Self {
            u: state.u.clone(),
            t: state.t,
            step: state.step_index,
            dt: state.dt,
            dissipation: state.ledger.dissipation,
            f2: state.ledger.f2_current(),
            f2_initial: state.ledger.f2_initial,
        }
    }

    /// Rebuilds a flow state under `stepper`. The ledger restarts with a
    /// single entry carrying the saved F₂ and dissipation; its tolerance is
    /// infinite so it never counts as a violation.
    pub fn into_state(self, stepper: &Stepper) -> Result<FlowState> {
        let u = stepper.close(&self.u)?;
        let mut ledger = EnergyLedger::new(self.f2_initial);
        ledger.dissipation = self.dissipation;
        ledger.history.push(LedgerEntry {
            t: self.t,
            step: self.step,
            dt: self.dt,
            f2: self.f2,
            dissipation: self.dissipation,
            tolerance: f64::INFINITY,
            halvings: 0,
            cg_iterations: 0,
        });
        Ok(FlowState {
            u,
            t: self.t,
            dt: self.dt,
            step_index: self.step,
            ledger,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let g = self.u.grid();
        let mut out = format!(
            "version = {SNAPSHOT_VERSION}\nd = {}\nn_per_axis = {}\nL = {}\ntopology = {}\n\
             t = {:?}\nstep = {}\ndt = {:?}\ndissipation = {:?}\nf2 = {:?}\nf2_initial = {:?}\n\n",
            g.dim(),
            g.n(),
            self.u.ncomp(),
            g.topology().as_str(),
            self.t,
            self.step,
            self.dt,
            self.dissipation,
            self.f2,
            self.f2_initial,
        )
        .into_bytes();
        let values = self.u.node_values();
        out.reserve(values.len() * 8);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::CorruptHeader("no blank line ends the header".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| Error::CorruptHeader("header is not UTF-8".into()))?;
        let payload = &bytes[split + 2..];

        let mut fields = std::collections::HashMap::new();
        for line in header.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::CorruptHeader(format!("malformed line `{line}`")))?;
            fields.insert(k.trim(), v.trim());
        }
        let version = fields
            .get("version")
            .ok_or_else(|| Error::CorruptHeader("missing version".into()))?;
        if *version != SNAPSHOT_VERSION.to_string() {
            return Err(Error::VersionMismatch {
                found: version.to_string(),
                expected: SNAPSHOT_VERSION,
            });
        }
        fn get<T: std::str::FromStr>(
            fields: &std::collections::HashMap<&str, &str>,
            key: &str,
        ) -> Result<T> {
            let v = fields
                .get(key)
                .ok_or_else(|| Error::CorruptHeader(format!("missing `{key}`")))?;
            v.parse()
                .map_err(|_| Error::CorruptHeader(format!("invalid `{key}` value `{v}`")))
        }
        let topology = match get::<String>(&fields, "topology")?.as_str() {
            "box" => Topology::BoxClamped,
            "periodic" => Topology::Periodic,
            other => return Err(Error::CorruptHeader(format!("unknown topology `{other}`"))),
        };
        let grid = Grid::new(get(&fields, "d")?, get(&fields, "n_per_axis")?, topology)
            .map_err(|e| Error::CorruptHeader(e.to_string()))?;
        let ncomp: usize = get(&fields, "L")?;
        if ncomp == 0 {
            return Err(Error::CorruptHeader("L must be positive".into()));
        }
        let expected = grid.node_count() * ncomp * 8;
        if payload.len() != expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            u: Field::from_node_values(grid, ncomp, &values)?,
            t: get(&fields, "t")?,
            step: get(&fields, "step")?,
            dt: get(&fields, "dt")?,
            dissipation: get(&fields, "dissipation")?,
            f2: get(&fields, "f2")?,
            f2_initial: get(&fields, "f2_initial")?,
        })
    }
}

/// Writes `state` to `path` through a temporary sibling and a rename.
pub fn write_snapshot(path: &Path, state: &FlowState) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&SnapshotData::of_state(state).encode())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData> {
    SnapshotData::decode(&fs::read(path)?)
}
