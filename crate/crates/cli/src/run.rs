//! Subcommand dispatch and CSV output.

use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use snse_core::cost::{estimate_j, CostSpec};
use snse_core::harness::{
    calibrate_stop_m, continuity_experiment, gronwall_experiment, log_moment_experiment,
    solution_convergence_experiment, subadditivity_experiment, tail_experiment, Check, Report,
};
use snse_core::integrator::{simulate_path, SimConfig, Trajectory};
use snse_core::optimizer::minimize;
use snse_core::table::{format_float, Cell, Table};
use thiserror::Error;

use crate::config::{ConfigError, RunSpec};

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Cost,
    Continuity,
    Convergence,
    Tail,
    Logmoment,
    Subadd,
    Gronwall,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Cost => "cost",
            Self::Continuity => "continuity",
            Self::Convergence => "convergence",
            Self::Tail => "tail",
            Self::Logmoment => "logmoment",
            Self::Subadd => "subadd",
            Self::Gronwall => "gronwall",
            Self::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("`{command}` needs {what}")]
    Mismatch { command: &'static str, what: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("existing {path} has columns `{found}`, expected `{expected}`")]
    ColumnMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error(transparent)]
    Core(#[from] snse_core::Error),
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run(command: Command, spec: &RunSpec, out_dir: &Path) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let name = command.name();
    let need = |what: &str| RunError::Mismatch {
        command: name,
        what: what.to_string(),
    };
    let sim = || spec.sim.as_ref().ok_or_else(|| need("the sim block (sim.grid_n, sim.nu, sim.dt, sim.t_final)"));
    let ex = &spec.experiment;
    let (paths, seed) = (spec.mc.paths, spec.mc.seed);
    let (phi, g) = (&spec.control, &spec.noise);

    let mut summary = Vec::new();
    let mut append = false;
    let report = match command {
        Command::Simulate => {
            let (table, lines) = simulate_table(sim()?, spec)?;
            summary = lines;
            Report {
                table,
                checks: Vec::new(),
            }
        }
        Command::Cost => {
            let est = estimate_j(sim()?, phi, g, &spec.cost, paths, seed)?;
            let mut table = Table::new(["label", "n_paths", "seed", "mean", "ci_half", "blowups"]);
            table.meta("experiment", "cost");
            describe_cost(&mut table, &spec.cost);
            table.push(vec![
                format!("{}/eps={}", spec.cost.kind().name(), spec.cost.eps()).into(),
                Cell::from(paths),
                Cell::Int(seed as i64),
                est.mean.into(),
                est.ci_half.into(),
                Cell::from(est.blowups),
            ]);
            summary.push(format!("J = {} +/- {} ({} blowups)", est.mean, est.ci_half, est.blowups));
            append = true;
            Report {
                table,
                checks: Vec::new(),
            }
        }
        Command::Continuity => {
            let n_list = ex.n_list.as_deref().ok_or_else(|| need("experiment.n_list"))?;
            continuity_experiment(sim()?, phi, g, &spec.cost, ex.scheme, n_list, paths, seed)?
        }
        Command::Convergence => {
            let n_list = ex.n_list.as_deref().ok_or_else(|| need("experiment.n_list"))?;
            solution_convergence_experiment(sim()?, phi, g, ex.scheme, n_list, paths, ex.delta, seed)?
        }
        Command::Tail => {
            let s_list = ex.s_list.as_deref().ok_or_else(|| need("experiment.s_list"))?;
            let mut cfg = sim()?.clone();
            let mut calibration = None;
            if let Some(cands) = &ex.m_candidates {
                match calibrate_stop_m(&cfg, phi, g, s_list[0], cands, ex.calibrate_range, paths, seed)? {
                    Some((m, p)) => {
                        summary.push(format!("calibrated stop_m = {m} (P = {p} at S = {})", s_list[0]));
                        cfg.stop_m = m;
                        calibration = Some(Check::new("calibration", true, format!("stop_m = {m}")));
                    }
                    None => {
                        calibration = Some(Check::new(
                            "calibration",
                            false,
                            format!("no candidate puts P(S = {}) inside {:?}", s_list[0], ex.calibrate_range),
                        ))
                    }
                }
            }
            match calibration {
                Some(c) if !c.passed => Report {
                    table: Table::new(["s", "prob", "ci_half", "exceed_count"]),
                    checks: vec![c],
                },
                c => {
                    let mut r = tail_experiment(&cfg, phi, g, s_list, paths, seed)?;
                    r.checks.extend(c);
                    r
                }
            }
        }
        Command::Logmoment => {
            let dt_list = ex.dt_list.as_deref().ok_or_else(|| need("experiment.dt_list"))?;
            let t_list = ex.t_list.as_deref().ok_or_else(|| need("experiment.t_list"))?;
            log_moment_experiment(sim()?, phi, g, dt_list, t_list, paths, seed)?
        }
        Command::Subadd => subadditivity_experiment(spec.cost.eps(), ex.samples, seed)?,
        Command::Gronwall => gronwall_experiment(ex.instances, seed)?,
        Command::Optimize => {
            let bx = ex
                .param_box
                .as_ref()
                .ok_or_else(|| need("experiment.lower, experiment.upper and experiment.slots"))?;
            let budget = ex.budget.ok_or_else(|| need("experiment.budget"))?;
            let res = minimize(bx, sim()?, g, &spec.cost, paths, seed, budget)?;
            let theta: Vec<String> = res.theta_star.iter().map(|v| format_float(*v)).collect();
            summary.push(format!("theta* = [{}], J = {} after {} evaluations", theta.join(", "), res.j_star, res.evals));
            let mut table = res.to_table(bx);
            describe_cost(&mut table, &spec.cost);
            Report {
                table,
                checks: Vec::new(),
            }
        }
    };

    let path = out_dir.join(format!("{name}.csv"));
    let extra = header_extra(command, spec, start.elapsed().as_secs_f64());
    write_table(&report.table, &path, &extra, append)?;
    Ok(Outcome {
        command,
        files: vec![path],
        checks: report.checks,
        summary,
    })
}

fn describe_cost(table: &mut Table, spec: &CostSpec) {
    table
        .meta("cost", spec.kind().name())
        .meta("eps", spec.eps())
        .meta("lip_l", spec.lip_l());
}

/// Per-path trajectories, paths in order. Columns:
/// `path, step, t, vnorm2, anorm2_int, cost_raw`.
fn simulate_table(cfg: &SimConfig, spec: &RunSpec) -> Result<(Table, Vec<String>), RunError> {
    let trajs: Vec<Trajectory> = (0..spec.mc.paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(cfg, &spec.control, &spec.noise, &spec.cost, spec.mc.seed, p))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(["path", "step", "t", "vnorm2", "anorm2_int", "cost_raw"]);
    let exits = trajs.iter().filter(|t| t.exit_index.is_some() && !t.blowup).count();
    let blowups = trajs.iter().filter(|t| t.blowup).count();
    table
        .meta("experiment", "simulate")
        .meta("exits", exits)
        .meta("blowups", blowups);
    for (p, tr) in trajs.iter().enumerate() {
        for i in 0..tr.len() {
            table.push(vec![
                Cell::from(p),
                Cell::from(i),
                tr.times[i].into(),
                tr.vnorm2[i].into(),
                tr.anorm2_int[i].into(),
                tr.cost_raw[i].into(),
            ]);
        }
    }
    let mut lines = vec![format!("{} paths, {exits} exits, {blowups} blowups", trajs.len())];
    if let Some(tr) = trajs.first() {
        lines.push(format!("path 0: final vnorm2 = {}", tr.vnorm2.last().copied().unwrap_or(f64::NAN)));
    }
    Ok((table, lines))
}

fn header_extra(command: Command, spec: &RunSpec, wall: f64) -> Vec<(String, String)> {
    let mut extra = vec![
        ("command".to_string(), command.name().to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("run.seed".to_string(), spec.mc.seed.to_string()),
        ("run.paths".to_string(), spec.mc.paths.to_string()),
    ];
    extra.extend(spec.echo().iter().map(|(k, v)| (format!("config.{k}"), v.clone())));
    extra.push(("wall_time_s".to_string(), format!("{wall:.3}")));
    extra
}

fn write_table(table: &Table, path: &Path, extra: &[(String, String)], append: bool) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    if append && path.exists() {
        let text = fs::read_to_string(path).map_err(io)?;
        let expected = table.columns().join(",");
        let found = text.lines().find(|l| !l.starts_with('#') && !l.trim().is_empty()).unwrap_or("");
        if found != expected {
            return Err(RunError::ColumnMismatch {
                path: path.to_path_buf(),
                found: found.to_string(),
                expected,
            });
        }
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        table.write_rows(&mut w).map_err(io)?;
        return w.flush().map_err(io);
    }
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    table.write_csv(&mut w, extra).map_err(io)?;
    w.flush().map_err(io)
}
