//! Persistence: diagnostics CSV series, legacy-format unstructured-grid
//! snapshots, and line-oriented run configuration files.
//!
//! The CSV schema is `t,E,Mx,My,Mang,divnorm` followed by whichever optional
//! columns (`cd,cl,dp,enstrophy,totvort,newton_iters`, in that order) every
//! record of the series carries. Floats are written with 17 significant
//! digits, so a read of a written file reproduces the values bit-exactly.
//!
//! Snapshots use the legacy ASCII unstructured-grid format with each
//! quadratic triangle split into the four linear corner and center
//! sub-triangles; every viewer understands linear triangles, few render
//! quadratic ones. Point data: velocity vectors, vertex-interpolated
//! pressure, speed.
//!
//! Config files are `key = value` lines with `#` comments. Unknown keys are
//! rejected by name; parse errors carry their line number. Serialization is
//! canonical (benchmark defaults filled in), so parse after serialize is the
//! identity on canonical configs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bench::{BenchmarkName, MeshSource, RunSpec};
use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSeries};
use crate::forms::FormulationKind;
use crate::scalar::Real;
use crate::space::{MixedSpace, State};
use crate::system::{Scheme, StepHook};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("refusing to write an empty series")]
    EmptySeries,
}

fn fmt_full<T: Real>(v: T) -> String {
    // 16 digits after the point in scientific notation: 17 significant
    // digits, enough to round-trip a double exactly.
    format!("{:.16e}", v)
}

/// Render a diagnostics series as CSV text; the file writer wraps this.
pub fn csv_string<T: Real>(series: &DiagnosticsSeries<T>) -> Result<String, IoError> {
    if series.records.is_empty() {
        return Err(IoError::EmptySeries);
    }
    let all = |f: &dyn Fn(&DiagnosticsRecord<T>) -> bool| series.records.iter().all(f);
    let with_cd = all(&|r| r.cd.is_some());
    let with_cl = all(&|r| r.cl.is_some());
    let with_dp = all(&|r| r.dp.is_some());
    let with_ens = all(&|r| r.enstrophy.is_some());
    let with_tot = all(&|r| r.total_vorticity.is_some());
    let with_iters = all(&|r| r.newton_iters.is_some());

    let mut out = String::new();
    out.push_str("t,E,Mx,My,Mang,divnorm");
    for (on, name) in [
        (with_cd, "cd"),
        (with_cl, "cl"),
        (with_dp, "dp"),
        (with_ens, "enstrophy"),
        (with_tot, "totvort"),
        (with_iters, "newton_iters"),
    ] {
        if on {
            out.push(',');
            out.push_str(name);
        }
    }
    out.push('\n');

    for r in &series.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            fmt_full(r.t),
            fmt_full(r.energy),
            fmt_full(r.momentum[0]),
            fmt_full(r.momentum[1]),
            fmt_full(r.angular),
            fmt_full(r.div_norm),
        );
        for (on, v) in [
            (with_cd, r.cd),
            (with_cl, r.cl),
            (with_dp, r.dp),
            (with_ens, r.enstrophy),
            (with_tot, r.total_vorticity),
        ] {
            if on {
                let _ = write!(out, ",{}", fmt_full(v.expect("column presence checked")));
            }
        }
        if with_iters {
            let _ = write!(out, ",{}", r.newton_iters.expect("column presence checked"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Write a diagnostics series to a CSV file. The series must be nonempty.
pub fn write_csv<T: Real>(series: &DiagnosticsSeries<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let text = csv_string(series)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parse CSV text in the [`csv_string`] schema.
pub fn csv_parse<T: Real>(text: &str) -> Result<DiagnosticsSeries<T>, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(IoError::Parse { line: 1, msg: "empty file".into() })?;
    let names: Vec<&str> = header.split(',').collect();
    let base = ["t", "E", "Mx", "My", "Mang", "divnorm"];
    if names.len() < base.len() || names[..base.len()] != base {
        return Err(IoError::Parse {
            line: 1,
            msg: format!("header must start with {}", base.join(",")),
        });
    }
    let optional = ["cd", "cl", "dp", "enstrophy", "totvort", "newton_iters"];
    let mut opt_cols: Vec<&str> = Vec::new();
    let mut cursor = 0usize;
    for &name in &names[base.len()..] {
        let pos = optional[cursor..]
            .iter()
            .position(|&o| o == name)
            .ok_or_else(|| IoError::Parse {
                line: 1,
                msg: format!("unexpected column `{name}`"),
            })?;
        cursor += pos + 1;
        opt_cols.push(name);
    }

    let mut series = DiagnosticsSeries::default();
    for (ix, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = ix + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(IoError::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let num = |s: &str| -> Result<T, IoError> {
            s.parse::<f64>().map(T::of).map_err(|_| IoError::Parse {
                line: lineno,
                msg: format!("bad number `{s}`"),
            })
        };
        let mut rec = DiagnosticsRecord {
            t: num(fields[0])?,
            energy: num(fields[1])?,
            momentum: [num(fields[2])?, num(fields[3])?],
            angular: num(fields[4])?,
            div_norm: num(fields[5])?,
            cd: None,
            cl: None,
            dp: None,
            enstrophy: None,
            total_vorticity: None,
            newton_iters: None,
        };
        for (k, &name) in opt_cols.iter().enumerate() {
            let s = fields[base.len() + k];
            match name {
                "cd" => rec.cd = Some(num(s)?),
                "cl" => rec.cl = Some(num(s)?),
                "dp" => rec.dp = Some(num(s)?),
                "enstrophy" => rec.enstrophy = Some(num(s)?),
                "totvort" => rec.total_vorticity = Some(num(s)?),
                "newton_iters" => {
                    rec.newton_iters = Some(s.parse::<usize>().map_err(|_| IoError::Parse {
                        line: lineno,
                        msg: format!("bad iteration count `{s}`"),
                    })?)
                }
                _ => unreachable!("validated against the optional list"),
            }
        }
        series.push(rec);
    }
    Ok(series)
}

/// Read a diagnostics CSV written by [`write_csv`].
pub fn read_csv<T: Real>(path: impl AsRef<Path>) -> Result<DiagnosticsSeries<T>, IoError> {
    csv_parse(&std::fs::read_to_string(path)?)
}

/// Render a solution snapshot in the legacy ASCII unstructured-grid format.
/// Points are the quadratic nodes; each triangle appears as its four linear
/// sub-triangles (three corners plus the midpoint triangle).
pub fn vtk_string<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> String {
    let n = space.n_nodes();
    let nv = space.mesh().vertex_count();
    let nc = space.mesh().cell_count();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("velocity-pressure snapshot\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    let _ = writeln!(out, "POINTS {n} double");
    for node in 0..n {
        let x = space.node_coord(node);
        let _ = writeln!(out, "{:.9e} {:.9e} 0", x[0], x[1]);
    }

    let _ = writeln!(out, "CELLS {} {}", 4 * nc, 16 * nc);
    for cell in 0..nc {
        let [v0, v1, v2, m0, m1, m2] = space.cell_nodes(cell);
        // Midpoint node m_k sits opposite vertex k; the corner and center
        // sub-triangles below inherit the parent orientation.
        for tri in [[v0, m2, m1], [v1, m0, m2], [v2, m1, m0], [m0, m1, m2]] {
            let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
        }
    }
    let _ = writeln!(out, "CELL_TYPES {}", 4 * nc);
    for _ in 0..4 * nc {
        out.push_str("5\n");
    }

    let _ = writeln!(out, "POINT_DATA {n}");
    out.push_str("VECTORS velocity double\n");
    for node in 0..n {
        let u = [state.coeffs[2 * node], state.coeffs[2 * node + 1]];
        let _ = writeln!(out, "{:.9e} {:.9e} 0", u[0], u[1]);
    }

    // Pressure lives at the vertices; an edge node inherits the mean of its
    // endpoints, which is the exact linear value at the midpoint.
    let pressure_at = |node: usize| -> T {
        if node < nv {
            state.coeffs[space.n_u() + node]
        } else {
            let [a, b] = space.mesh().edges()[node - nv];
            T::half() * (state.coeffs[space.n_u() + a] + state.coeffs[space.n_u() + b])
        }
    };
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for node in 0..n {
        let _ = writeln!(out, "{:.9e}", pressure_at(node));
    }
    out.push_str("SCALARS speed double 1\nLOOKUP_TABLE default\n");
    for node in 0..n {
        let u = [state.coeffs[2 * node], state.coeffs[2 * node + 1]];
        let _ = writeln!(out, "{:.9e}", (u[0] * u[0] + u[1] * u[1]).sqrt());
    }
    out
}

/// Write a snapshot file; see [`vtk_string`].
pub fn write_vtk<T: Real>(
    space: &MixedSpace<T>,
    state: &State<T>,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    std::fs::write(path, vtk_string(space, state))?;
    Ok(())
}

/// Step observer writing solution snapshots at a fixed cadence: the initial
/// state is step zero, then every `every`-th accepted step. Files are
/// numbered from the path stem as `{stem}_{step:04}.vtk`. A write failure
/// does not interrupt the run; the first one is kept and handed back by
/// [`SnapshotWriter::finish`].
pub struct SnapshotWriter {
    stem: PathBuf,
    every: usize,
    steps: usize,
    written: usize,
    error: Option<IoError>,
}

impl SnapshotWriter {
    /// `stem` names the snapshot family (an extension, if any, is dropped);
    /// `every` must be positive.
    pub fn new(stem: impl Into<PathBuf>, every: usize) -> Self {
        assert!(every > 0, "snapshot cadence must be positive");
        let mut stem = stem.into();
        stem.set_extension("");
        SnapshotWriter {
            stem,
            every,
            steps: 0,
            written: 0,
            error: None,
        }
    }

    fn emit<T: Real>(&mut self, space: &MixedSpace<T>, state: &State<T>) {
        if self.error.is_some() {
            return;
        }
        let mut name = self
            .stem
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snapshot".into());
        name.push_str(&format!("_{:04}.vtk", self.steps));
        match write_vtk(space, state, self.stem.with_file_name(name)) {
            Ok(()) => self.written += 1,
            Err(e) => self.error = Some(e),
        }
    }

    /// Number of files written so far.
    pub fn written(&self) -> usize {
        self.written
    }

    /// The write count, or the first failure if one occurred.
    pub fn finish(self) -> Result<usize, IoError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.written),
        }
    }
}

impl<T: Real> StepHook<T> for SnapshotWriter {
    fn on_start(&mut self, space: &MixedSpace<T>, state: &State<T>, _rec: &mut DiagnosticsRecord<T>) {
        self.emit(space, state);
    }

    fn on_step(
        &mut self,
        space: &MixedSpace<T>,
        _old: &State<T>,
        new: &State<T>,
        _rec: &mut DiagnosticsRecord<T>,
    ) {
        self.steps += 1;
        if self.steps % self.every == 0 {
            self.emit(space, new);
        }
    }
}

/// A benchmark run description as plain data: what the config file holds and
/// what command-line flags override. Unset options fall back to the named
/// benchmark's defaults when the config is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: BenchmarkName,
    pub formulation: Option<FormulationKind>,
    pub stepper: Option<Scheme>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
    pub mesh_n: Option<usize>,
    pub mesh: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(benchmark: BenchmarkName) -> Self {
        RunConfig {
            benchmark,
            formulation: None,
            stepper: None,
            dt: None,
            t_end: None,
            nu: None,
            gamma: None,
            mesh_n: None,
            mesh: None,
            out: None,
            snapshot_every: None,
            seed: None,
            trials: None,
            jobs: None,
        }
    }

    /// Benchmark defaults for every unset field that has one. `mesh`, `out`,
    /// and `snapshot_every` have no default and stay as they are.
    pub fn canonical(&self) -> RunConfig {
        let mut c = self.clone();
        c.formulation = Some(self.formulation.unwrap_or(FormulationKind::Emac));
        let (scheme, dt, t_end, nu, mesh_n) = match self.benchmark {
            BenchmarkName::Gresho => (Scheme::CrankNicolson, 0.02, 1.0, 0.0, Some(24)),
            BenchmarkName::TaylorGreen => (Scheme::CrankNicolson, 1e-3, 0.25, 1e-2, Some(16)),
            BenchmarkName::Cylinder => (Scheme::Bdf3, 0.005, 8.0, 1e-3, None),
        };
        c.stepper = Some(self.stepper.unwrap_or(scheme));
        c.dt = Some(self.dt.unwrap_or(dt));
        c.t_end = Some(self.t_end.unwrap_or(t_end));
        c.nu = Some(self.nu.unwrap_or(nu));
        c.gamma = Some(self.gamma.unwrap_or(0.0));
        if c.mesh_n.is_none() {
            c.mesh_n = mesh_n;
        }
        c.seed = Some(self.seed.unwrap_or(0));
        c.trials = Some(self.trials.unwrap_or(100));
        c.jobs = Some(self.jobs.unwrap_or(1));
        c
    }

    /// Resolve into a runnable benchmark description.
    pub fn to_run_spec(&self) -> Result<RunSpec<f64>, IoError> {
        let c = self.canonical();
        let kind = c.formulation.expect("canonical fills formulation");
        let mut spec = match c.benchmark {
            BenchmarkName::Gresho => RunSpec::gresho(kind),
            BenchmarkName::TaylorGreen => RunSpec::taylor_green(
                kind,
                c.nu.expect("canonical fills nu"),
                c.t_end.expect("canonical fills t_end"),
            ),
            BenchmarkName::Cylinder => {
                let path = c.mesh.clone().ok_or(IoError::MissingKey("mesh"))?;
                RunSpec::cylinder(kind, path)
            }
        };
        spec.kind = kind;
        spec.form.nu = c.nu.expect("canonical fills nu");
        spec.form = spec.form.with_gamma(c.gamma.expect("canonical fills gamma"));
        spec.stepper.scheme = c.stepper.expect("canonical fills stepper");
        spec.stepper.dt = c.dt.expect("canonical fills dt");
        spec.stepper.t_end = c.t_end.expect("canonical fills t_end");
        spec.stepper.validate();
        match (&c.mesh, c.mesh_n) {
            (Some(_), _) if c.benchmark != BenchmarkName::Cylinder => {
                return Err(IoError::Parse {
                    line: 0,
                    msg: format!("{} runs on a generated mesh; drop `mesh`", c.benchmark),
                })
            }
            (None, Some(n)) => spec.mesh = MeshSource::Generated { n },
            _ => {}
        }
        Ok(spec)
    }

    /// Canonical text form: every defaulted key spelled out, one per line.
    pub fn serialize(&self) -> String {
        let c = self.canonical();
        let mut out = String::new();
        let _ = writeln!(out, "benchmark = {}", c.benchmark);
        let _ = writeln!(out, "formulation = {}", c.formulation.unwrap());
        let _ = writeln!(out, "stepper = {}", c.stepper.unwrap().as_str());
        let _ = writeln!(out, "dt = {}", c.dt.unwrap());
        let _ = writeln!(out, "t_end = {}", c.t_end.unwrap());
        let _ = writeln!(out, "nu = {}", c.nu.unwrap());
        let _ = writeln!(out, "gamma = {}", c.gamma.unwrap());
        if let Some(n) = c.mesh_n {
            let _ = writeln!(out, "mesh_n = {n}");
        }
        if let Some(p) = &c.mesh {
            let _ = writeln!(out, "mesh = {}", p.display());
        }
        if let Some(p) = &c.out {
            let _ = writeln!(out, "out = {}", p.display());
        }
        if let Some(k) = c.snapshot_every {
            let _ = writeln!(out, "snapshot_every = {k}");
        }
        let _ = writeln!(out, "seed = {}", c.seed.unwrap());
        let _ = writeln!(out, "trials = {}", c.trials.unwrap());
        let _ = writeln!(out, "jobs = {}", c.jobs.unwrap());
        out
    }

    /// Parse `key = value` text. Unknown keys are errors naming the key;
    /// malformed lines and values are errors naming the line.
    pub fn parse_str(text: &str) -> Result<RunConfig, IoError> {
        let mut benchmark: Option<BenchmarkName> = None;
        let mut cfg = RunConfig::new(BenchmarkName::Gresho);
        for (ix, raw) in text.lines().enumerate() {
            let lineno = ix + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IoError::Parse {
                line: lineno,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| IoError::Parse {
                line: lineno,
                msg: format!("bad {what} `{value}`"),
            };
            match key {
                "benchmark" => {
                    benchmark =
                        Some(BenchmarkName::parse(value).ok_or_else(|| bad("benchmark"))?)
                }
                "formulation" => {
                    cfg.formulation =
                        Some(FormulationKind::parse(value).ok_or_else(|| bad("formulation"))?)
                }
                "stepper" => {
                    cfg.stepper = Some(Scheme::parse(value).ok_or_else(|| bad("stepper"))?)
                }
                "dt" => cfg.dt = Some(value.parse().map_err(|_| bad("number"))?),
                "t_end" => cfg.t_end = Some(value.parse().map_err(|_| bad("number"))?),
                "nu" => cfg.nu = Some(value.parse().map_err(|_| bad("number"))?),
                "gamma" => cfg.gamma = Some(value.parse().map_err(|_| bad("number"))?),
                "mesh_n" => cfg.mesh_n = Some(value.parse().map_err(|_| bad("count"))?),
                "mesh" => cfg.mesh = Some(PathBuf::from(value)),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "snapshot_every" => {
                    cfg.snapshot_every = Some(value.parse().map_err(|_| bad("count"))?)
                }
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "trials" => cfg.trials = Some(value.parse().map_err(|_| bad("count"))?),
                "jobs" => cfg.jobs = Some(value.parse().map_err(|_| bad("count"))?),
                other => {
                    return Err(IoError::UnknownKey {
                        line: lineno,
                        key: other.to_string(),
                    })
                }
            }
        }
        cfg.benchmark = benchmark.ok_or(IoError::MissingKey("benchmark"))?;
        Ok(cfg)
    }
}

/// Read a config file; see [`RunConfig::parse_str`].
pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig, IoError> {
    RunConfig::parse_str(&std::fs::read_to_string(path)?)
}

/// Write the canonical form of a config; see [`RunConfig::serialize`].
pub fn write_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<(), IoError> {
    std::fs::write(path, cfg.serialize())?;
    Ok(())
}
