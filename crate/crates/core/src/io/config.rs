//! `key = value` run configuration.
//!
//! Lines are trimmed; blank lines and lines starting with `#` are ignored,
//! as is anything after a `#` on a value line. Unknown and repeated keys
//! are errors. Validation reports every violated field at once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};
use crate::flow::{FlowOptions, SolverOptions};
use crate::grid::{Grid, Topology};
use crate::io::random::RandomFieldSpec;
use crate::manifold::TargetManifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    Run,
    Gap,
    LinearValidate,
    ProbeInequalities,
    Blowup,
    Stability,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Run,
        Experiment::Gap,
        Experiment::LinearValidate,
        Experiment::ProbeInequalities,
        Experiment::Blowup,
        Experiment::Stability,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Gap => "gap",
            Experiment::LinearValidate => "linear_validate",
            Experiment::ProbeInequalities => "probe_inequalities",
            Experiment::Blowup => "blowup",
            Experiment::Stability => "stability",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s || e.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetChoice {
    Sphere,
    Flat,
}

/// A fully validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub target_kind: TargetChoice,
    /// Ambient dimension L.
    pub target_l: usize,
    /// Dimension of a flat target; ignored for the sphere.
    pub target_n: usize,
    pub grid_d: usize,
    pub grid_n: usize,
    pub topology: Topology,
    pub t_final: f64,
    /// `None` starts at dt_max.
    pub dt_init: Option<f64>,
    pub c_cfl: f64,
    pub tol_cg: f64,
    pub tol_energy: f64,
    pub max_steps: Option<u64>,
    pub epsilon1: f64,
    pub epsilon0: f64,
    pub c0: u32,
    pub r_detect: Option<f64>,
    pub probe_count: usize,
    pub snapshot_stride: u64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub amplitude: f64,
    pub band_limit: usize,
    pub decay_order: u32,
    pub init_kind: InitKind,
    /// Scale of the planted bubble for `init.kind = bubble`.
    pub bubble_scale: f64,
    /// Size of the initial difference in the stability experiment.
    pub perturbation: f64,
}

/// Initial data family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// Seeded band-limited perturbation of a constant.
    Random,
    /// Sphere bubble centred in the domain.
    Bubble,
}

/// Every recognised key, in serialization order.
pub const KEYS: &[&str] = &[
    "experiment",
    "target.kind",
    "target.L",
    "target.n",
    "grid.d",
    "grid.n",
    "grid.topology",
    "flow.T_final",
    "flow.dt_init",
    "flow.c_cfl",
    "flow.tol_cg",
    "flow.tol_energy",
    "flow.max_steps",
    "analysis.epsilon1",
    "analysis.epsilon0",
    "analysis.C0",
    "analysis.R_detect",
    "analysis.probe_count",
    "io.snapshot_stride",
    "io.out_dir",
    "seed",
    "init.amplitude",
    "init.band_limit",
    "init.decay_order",
    "init.kind",
    "init.bubble_scale",
    "stability.perturbation",
];

const MANDATORY: &[&str] = &["target.kind", "target.L", "grid.d", "grid.n"];

struct Raw {
    values: BTreeMap<&'static str, (usize, String)>,
}

impl Raw {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::Parse {
                line: *line,
                message: format!("invalid value `{v}` for `{key}`"),
            }),
        }
    }
}

fn lex(text: &str) -> Result<Raw> {
    let mut values = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty key or value".into(),
            });
        }
        let key = KEYS
            .iter()
            .find(|&&known| known == k)
            .ok_or_else(|| Error::UnknownKey(k.to_string()))?;
        if values.insert(*key, (line_no, v.to_string())).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(Raw { values })
}

/// Parses and validates a configuration; omitted optional keys take their
/// defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw = lex(text)?;
    let mut fields: Vec<String> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let missing: Vec<&str> = MANDATORY
        .iter()
        .copied()
        .filter(|k| !raw.values.contains_key(k))
        .collect();
    if !missing.is_empty() {
        fields.extend(missing.iter().map(|s| s.to_string()));
        notes.push(format!("missing mandatory keys {}", missing.join(", ")));
    }
    let experiment = parse_with(&raw, "experiment", Experiment::Run, |s| s.parse())?;
    let target_kind = parse_with(&raw, "target.kind", TargetChoice::Sphere, |s| match s {
        "sphere" => Ok(TargetChoice::Sphere),
        "flat" => Ok(TargetChoice::Flat),
        _ => Err(format!("unknown target kind `{s}`")),
    })?;
    let topology = parse_with(&raw, "grid.topology", Topology::BoxClamped, |s| match s {
        "box" => Ok(Topology::BoxClamped),
        "periodic" => Ok(Topology::Periodic),
        _ => Err(format!("unknown topology `{s}`")),
    })?;
    let target_l: usize = raw.get("target.L", 3)?;
    let cfg = RunConfig {
        experiment,
        target_kind,
        target_l,
        target_n: raw.get("target.n", target_l)?,
        grid_d: raw.get("grid.d", 2)?,
        grid_n: raw.get("grid.n", 32)?,
        topology,
        t_final: raw.get("flow.T_final", 1e-3)?,
        dt_init: optional(&raw, "flow.dt_init")?,
        c_cfl: raw.get("flow.c_cfl", 0.5)?,
        tol_cg: raw.get("flow.tol_cg", 1e-12)?,
        tol_energy: raw.get("flow.tol_energy", 1e-8)?,
        max_steps: optional(&raw, "flow.max_steps")?,
        epsilon1: raw.get("analysis.epsilon1", 0.05)?,
        epsilon0: raw.get("analysis.epsilon0", 0.02)?,
        c0: raw.get("analysis.C0", 16)?,
        r_detect: optional(&raw, "analysis.R_detect")?,
        probe_count: raw.get("analysis.probe_count", 100)?,
        snapshot_stride: raw.get("io.snapshot_stride", 100)?,
        out_dir: PathBuf::from(raw.get("io.out_dir", "out".to_string())?),
        seed: raw.get("seed", 0)?,
        amplitude: raw.get("init.amplitude", 0.1)?,
        band_limit: raw.get("init.band_limit", 4)?,
        decay_order: raw.get("init.decay_order", 2)?,
        init_kind: parse_with(&raw, "init.kind", InitKind::Random, |s| match s {
            "random" => Ok(InitKind::Random),
            "bubble" => Ok(InitKind::Bubble),
            _ => Err(format!("unknown initial data kind `{s}`")),
        })?,
        bubble_scale: raw.get("init.bubble_scale", 0.1)?,
        perturbation: raw.get("stability.perturbation", 1e-6)?,
    };
    cfg.check(&mut fields, &mut notes);
    if fields.is_empty() {
        Ok(cfg)
    } else {
        fields.dedup();
        Err(Error::ConstraintViolation {
            fields,
            message: notes.join("; "),
        })
    }
}

fn parse_with<T>(
    raw: &Raw,
    key: &str,
    default: T,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<T> {
    match raw.values.get(key) {
        None => Ok(default),
        Some((line, v)) => f(v).map_err(|message| Error::Parse {
            line: *line,
            message,
        }),
    }
}

fn optional<T: FromStr>(raw: &Raw, key: &str) -> Result<Option<T>> {
    match raw.values.get(key) {
        None => Ok(None),
        Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
            line: *line,
            message: format!("invalid value `{v}` for `{key}`"),
        }),
    }
}

impl RunConfig {
    fn check(&self, fields: &mut Vec<String>, notes: &mut Vec<String>) {
        let mut fail = |f: &[&str], note: &str| {
            fields.extend(f.iter().map(|s| s.to_string()));
            notes.push(note.to_string());
        };
        if !(1..=4).contains(&self.grid_d) {
            fail(&["grid.d"], "grid.d must be in 1..=4");
        }
        if self.grid_n < 8 {
            fail(&["grid.n"], "grid.n must be at least 8");
        }
        match self.target_kind {
            TargetChoice::Sphere if self.target_l < 2 => {
                fail(&["target.L"], "a sphere needs L >= 2")
            }
            TargetChoice::Flat if self.target_n < 1 || self.target_n > self.target_l => {
                fail(&["target.n"], "a flat target needs 1 <= n <= L")
            }
            _ => {}
        }
        let positive = [
            ("flow.c_cfl", self.c_cfl),
            ("flow.tol_cg", self.tol_cg),
            ("analysis.epsilon1", self.epsilon1),
            ("analysis.epsilon0", self.epsilon0),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                fail(&[k], &format!("{k} must be positive"));
            }
        }
        let nonnegative = [
            ("flow.T_final", self.t_final),
            ("flow.tol_energy", self.tol_energy),
            ("init.amplitude", self.amplitude),
            ("stability.perturbation", self.perturbation),
        ];
        for (k, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                fail(&[k], &format!("{k} must be nonnegative"));
            }
        }
        if let Some(dt) = self.dt_init {
            if !(dt > 0.0 && dt.is_finite()) {
                fail(&["flow.dt_init"], "flow.dt_init must be positive");
            }
        }
        if self.epsilon0 > self.epsilon1 {
            fail(
                &["analysis.epsilon0", "analysis.epsilon1"],
                "need epsilon0 <= epsilon1",
            );
        }
        if self.c0 < 1 {
            fail(&["analysis.C0"], "C0 must be at least 1");
        }
        if let (Some(r), Ok(g)) = (self.r_detect, self.grid()) {
            if !(r >= 2.0 * g.h() * (1.0 - 1e-12)) {
                fail(&["analysis.R_detect"], "R_detect must be at least 2h");
            }
        }
        if self.probe_count < 1 {
            fail(&["analysis.probe_count"], "probe_count must be at least 1");
        }
        if self.band_limit < 1 {
            fail(&["init.band_limit"], "band_limit must be at least 1");
        }
        if self.decay_order < 2 {
            fail(&["init.decay_order"], "decay_order must be at least 2");
        }
        if !(self.bubble_scale > 0.0 && self.bubble_scale.is_finite()) {
            fail(&["init.bubble_scale"], "init.bubble_scale must be positive");
        }
        if self.init_kind == InitKind::Bubble && self.target_kind != TargetChoice::Sphere {
            fail(
                &["init.kind", "target.kind"],
                "bubble initial data needs a sphere target",
            );
        }
        if self.out_dir.as_os_str().is_empty() {
            fail(&["io.out_dir"], "io.out_dir must be a path");
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_d, self.grid_n, self.topology)
    }

    pub fn target(&self) -> TargetManifold {
        match self.target_kind {
            TargetChoice::Sphere => TargetManifold::unit_sphere(self.target_l),
            TargetChoice::Flat => TargetManifold::flat_subspace(self.target_l, self.target_n),
        }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            epsilon1: self.epsilon1,
            epsilon0: self.epsilon0,
            c0: self.c0,
            r_detect: self.r_detect,
            probe_count: self.probe_count,
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            t_final: self.t_final,
            dt_init: self.dt_init.unwrap_or(f64::INFINITY),
            c_cfl: self.c_cfl,
            solver: SolverOptions {
                tol: self.tol_cg,
                max_iterations: None,
            },
            tol_energy: self.tol_energy,
            max_steps: self.max_steps,
            ..FlowOptions::default()
        }
    }

    pub fn random_spec(&self) -> RandomFieldSpec {
        RandomFieldSpec {
            seed: self.seed,
            band_limit: self.band_limit,
            amplitude: self.amplitude,
            boundary_decay_order: self.decay_order,
            offset: None,
        }
    }

    /// Every key with its value; [`parse_config`] reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("experiment", self.experiment.as_str().into());
        put(
            "target.kind",
            match self.target_kind {
                TargetChoice::Sphere => "sphere",
                TargetChoice::Flat => "flat",
            }
            .into(),
        );
        put("target.L", self.target_l.to_string());
        put("target.n", self.target_n.to_string());
        put("grid.d", self.grid_d.to_string());
        put("grid.n", self.grid_n.to_string());
        put("grid.topology", self.topology.as_str().into());
        put("flow.T_final", format!("{:?}", self.t_final));
        if let Some(dt) = self.dt_init {
            put("flow.dt_init", format!("{dt:?}"));
        }
        put("flow.c_cfl", format!("{:?}", self.c_cfl));
        put("flow.tol_cg", format!("{:?}", self.tol_cg));
        put("flow.tol_energy", format!("{:?}", self.tol_energy));
        if let Some(n) = self.max_steps {
            put("flow.max_steps", n.to_string());
        }
        put("analysis.epsilon1", format!("{:?}", self.epsilon1));
        put("analysis.epsilon0", format!("{:?}", self.epsilon0));
        put("analysis.C0", self.c0.to_string());
        if let Some(r) = self.r_detect {
            put("analysis.R_detect", format!("{r:?}"));
        }
        put("analysis.probe_count", self.probe_count.to_string());
        put("io.snapshot_stride", self.snapshot_stride.to_string());
        put("io.out_dir", self.out_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("init.amplitude", format!("{:?}", self.amplitude));
        put("init.band_limit", self.band_limit.to_string());
        put("init.decay_order", self.decay_order.to_string());
        put(
            "init.kind",
            match self.init_kind {
                InitKind::Random => "random",
                InitKind::Bubble => "bubble",
            }
            .into(),
        );
        put("init.bubble_scale", format!("{:?}", self.bubble_scale));
        put("stability.perturbation", format!("{:?}", self.perturbation));
        s
    }
}
