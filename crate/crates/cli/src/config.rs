//! Line-oriented run configuration: `key = value`, dotted section prefixes,
//! comma-separated lists, `#` comments. Unknown keys are errors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use snse_core::control::{FeedbackControl, Profile, SequenceScheme};
use snse_core::cost::{CostKind, CostSpec};
use snse_core::integrator::{NonlinearMethod, SimConfig};
use snse_core::noise::{NoiseKind, NoiseModel};
use snse_core::optimizer::{ParamBox, Slot};
use snse_core::{Mode, SpectralField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {line}: `{key}` expects {expected}, got {value:?}")]
    Type {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("line {line}: `{key}`: {message}")]
    Constraint {
        line: usize,
        key: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const KEYS: &[&str] = &[
    "sim.grid_n",
    "sim.nu",
    "sim.dt",
    "sim.t_final",
    "sim.stop_m",
    "sim.stop_mtilde",
    "sim.advection",
    "sim.method",
    "sim.refine",
    "u0.modes",
    "noise.kind",
    "noise.sigma",
    "noise.alpha",
    "noise.modes",
    "control.horizon",
    "control.cap_k",
    "control.state_radius",
    "control.gains",
    "control.base",
    "cost.kind",
    "cost.eps",
    "cost.lip_l",
    "cost.target",
    "mc.paths",
    "mc.seed",
    "experiment.scheme",
    "experiment.n_list",
    "experiment.s_list",
    "experiment.dt_list",
    "experiment.t_list",
    "experiment.delta",
    "experiment.samples",
    "experiment.instances",
    "experiment.lower",
    "experiment.upper",
    "experiment.slots",
    "experiment.budget",
    "experiment.m_candidates",
    "experiment.calibrate_range",
];

const SIM_REQUIRED: &[&str] = &["sim.grid_n", "sim.nu", "sim.dt", "sim.t_final"];
const GAIN_PROFILE: &str = "control.gain_profile.";
const BASE_PROFILE: &str = "control.base_profile.";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mc {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    pub scheme: SequenceScheme,
    pub n_list: Option<Vec<u32>>,
    pub s_list: Option<Vec<f64>>,
    pub dt_list: Option<Vec<f64>>,
    pub t_list: Option<Vec<f64>>,
    pub delta: f64,
    pub samples: usize,
    pub instances: usize,
    pub param_box: Option<ParamBox>,
    pub budget: Option<usize>,
    /// Descending `M` candidates scanned before the tail experiment.
    pub m_candidates: Option<Vec<f64>>,
    pub calibrate_range: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub sim: Option<SimConfig>,
    pub noise: NoiseModel,
    pub control: FeedbackControl,
    pub cost: CostSpec,
    pub mc: Mc,
    pub experiment: ExperimentParams,
    echo: Vec<(String, String)>,
}

impl RunSpec {
    /// Keys and values as written, in file order.
    pub fn echo(&self) -> &[(String, String)] {
        &self.echo
    }

    pub fn with_overrides(mut self, seed: Option<u64>, paths: Option<usize>) -> Result<Self> {
        if let Some(s) = seed {
            self.mc.seed = s;
        }
        if let Some(p) = paths {
            if p == 0 {
                return Err(ConfigError::Constraint {
                    line: 0,
                    key: "--paths".into(),
                    message: "must be >= 1".into(),
                });
            }
            self.mc.paths = p;
        }
        Ok(self)
    }
}

pub fn parse_config(path: &Path) -> Result<RunSpec> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    entries: HashMap<String, Entry>,
    order: Vec<String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw {
            entries: HashMap::new(),
            order: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    text: content.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    text: content.to_string(),
                });
            }
            if !KEYS.contains(&key) && profile_mode(key).is_none() {
                return Err(ConfigError::UnknownKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            if let Some(prev) = raw.entries.get(key) {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: key.to_string(),
                    first: prev.line,
                });
            }
            raw.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
            raw.order.push(key.to_string());
        }
        Ok(raw)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn constraint(&self, key: &str, message: impl ToString) -> ConfigError {
        ConfigError::Constraint {
            line: self.line(key),
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    fn get<T>(&self, key: &str, expected: &'static str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        f(&e.value).map(Some).ok_or_else(|| ConfigError::Type {
            line: e.line,
            key: key.to_string(),
            expected,
            value: e.value.clone(),
        })
    }

    fn require<T>(&self, key: &str, expected: &'static str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
        self.get(key, expected, f)?
            .ok_or_else(|| ConfigError::Missing { key: key.to_string() })
    }

    fn list<T>(&self, key: &str, expected: &'static str, f: impl Fn(&str) -> Option<T>) -> Result<Option<Vec<T>>> {
        self.get(key, expected, |s| items(s).map(&f).collect())
    }
}

fn items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn float(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "infinity" => Some(f64::INFINITY),
        t => t.parse().ok().filter(|x: &f64| x.is_finite()),
    }
}

fn boolean(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "on" | "yes" => Some(true),
        "false" | "off" | "no" => Some(false),
        _ => None,
    }
}

fn fields(s: &str, lo: usize, hi: usize) -> Option<Vec<&str>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    (lo..=hi).contains(&parts.len()).then_some(parts)
}

fn mode(kx: &str, ky: &str) -> Option<Mode> {
    Mode::new(kx.parse().ok()?, ky.parse().ok()?).ok()
}

/// `kx:ky`
fn mode_item(s: &str) -> Option<Mode> {
    let p = fields(s, 2, 2)?;
    mode(p[0], p[1])
}

/// `kx:ky:re[:im]`
fn amp_item(s: &str) -> Option<(Mode, Complex64)> {
    let p = fields(s, 3, 4)?;
    let im = p.get(3).map_or(Some(0.0), |v| float(v))?;
    Some((mode(p[0], p[1])?, Complex64::new(float(p[2])?, im)))
}

/// `kx:ky:gain`
fn gain_item(s: &str) -> Option<(Mode, f64)> {
    let p = fields(s, 3, 3)?;
    Some((mode(p[0], p[1])?, float(p[2])?))
}

/// `t:value`
fn gain_knot(s: &str) -> Option<(f64, f64)> {
    let p = fields(s, 2, 2)?;
    Some((float(p[0])?, float(p[1])?))
}

/// `t:re[:im]`
fn base_knot(s: &str) -> Option<(f64, Complex64)> {
    let p = fields(s, 2, 3)?;
    let im = p.get(2).map_or(Some(0.0), |v| float(v))?;
    Some((float(p[0])?, Complex64::new(float(p[1])?, im)))
}

/// Mode encoded in a profile key such as `control.gain_profile.1_-2`.
fn profile_mode(key: &str) -> Option<(bool, Mode)> {
    let (is_gain, rest) = if let Some(r) = key.strip_prefix(GAIN_PROFILE) {
        (true, r)
    } else {
        (false, key.strip_prefix(BASE_PROFILE)?)
    };
    let (kx, ky) = rest.split_once('_')?;
    Some((is_gain, mode(kx, ky)?))
}

const MODE_LIST: &str = "a list of kx:ky";
const AMP_LIST: &str = "a list of kx:ky:re[:im]";

pub fn parse_str(text: &str) -> Result<RunSpec> {
    let raw = Raw::parse(text)?;
    let sim = parse_sim(&raw)?;
    let trunc = sim.as_ref().map(|c| c.trunc);

    let noise = parse_noise(&raw, trunc)?;
    let control = parse_control(&raw, sim.as_ref())?;
    let cost = parse_cost(&raw, trunc)?;
    let mc = Mc {
        paths: raw.require("mc.paths", "a positive integer", |s| s.parse().ok().filter(|&n: &usize| n > 0))?,
        seed: raw.require("mc.seed", "an unsigned integer", |s| s.parse().ok())?,
    };
    let experiment = parse_experiment(&raw, sim.as_ref(), &control)?;
    let echo = raw
        .order
        .iter()
        .map(|k| (k.clone(), raw.entries[k].value.clone()))
        .collect();
    Ok(RunSpec {
        sim,
        noise,
        control,
        cost,
        mc,
        experiment,
        echo,
    })
}

fn parse_sim(raw: &Raw) -> Result<Option<SimConfig>> {
    let any = raw.order.iter().any(|k| k.starts_with("sim.") || k.starts_with("u0."));
    if !any {
        return Ok(None);
    }
    let trunc: usize = raw.require("sim.grid_n", "a positive integer", |s| s.parse().ok())?;
    let positive = "a positive number";
    let nu = raw.require("sim.nu", positive, float)?;
    let dt = raw.require("sim.dt", positive, float)?;
    let t_final = raw.require("sim.t_final", positive, float)?;
    for (key, v) in [("sim.grid_n", trunc as f64), ("sim.nu", nu), ("sim.dt", dt), ("sim.t_final", t_final)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(raw.constraint(key, "must be positive and finite"));
        }
    }
    if dt > t_final {
        return Err(raw.constraint("sim.dt", format!("dt {dt} exceeds t_final {t_final}")));
    }
    let u0_entries = raw.list("u0.modes", AMP_LIST, amp_item)?.unwrap_or_default();
    let u0 = SpectralField::from_modes(trunc, u0_entries).map_err(|e| raw.constraint("u0.modes", e))?;
    let mut cfg = SimConfig::new(trunc, nu, dt, t_final, u0).map_err(|e| raw.constraint(SIM_REQUIRED[0], e))?;
    if let Some(m) = raw.get("sim.stop_m", "a number > 1 or inf", float)? {
        if !(m > 1.0) {
            return Err(raw.constraint("sim.stop_m", format!("must exceed 1, got {m}")));
        }
        cfg.stop_m = m;
    }
    if let Some(m) = raw.get("sim.stop_mtilde", positive, float)? {
        if !(m > 0.0 && m.is_finite()) {
            return Err(raw.constraint("sim.stop_mtilde", format!("must be positive, got {m}")));
        }
        cfg.stop_mtilde = m;
    }
    if let Some(a) = raw.get("sim.advection", "true or false", boolean)? {
        cfg.advection = a;
    }
    if let Some(m) = raw.get("sim.method", "convolution or pseudospectral", |s| match s {
        "convolution" => Some(NonlinearMethod::Convolution),
        "pseudospectral" => Some(NonlinearMethod::PseudoSpectral),
        _ => None,
    })? {
        cfg.method = m;
    }
    if let Some(r) = raw.get("sim.refine", "a positive integer", |s| s.parse().ok().filter(|&r: &u32| r > 0))? {
        cfg.refine = r;
    }
    cfg.validate().map_err(|e| raw.constraint(SIM_REQUIRED[0], e))?;
    Ok(Some(cfg))
}

fn parse_noise(raw: &Raw, trunc: Option<usize>) -> Result<NoiseModel> {
    let kind = raw
        .get("noise.kind", "off, additive or diagonal-multiplicative", |s| match s {
            "off" => Some(NoiseKind::Off),
            "additive" => Some(NoiseKind::Additive),
            "diagonal-multiplicative" | "multiplicative" => Some(NoiseKind::DiagonalMultiplicative),
            _ => None,
        })?
        .unwrap_or(NoiseKind::Off);
    let sigma = raw.get("noise.sigma", "a nonnegative number", float)?.unwrap_or(0.0);
    let alpha = raw.get("noise.alpha", "a number > 1", float)?.unwrap_or(2.0);
    let forced = raw.list("noise.modes", MODE_LIST, mode_item)?.unwrap_or_default();
    if kind != NoiseKind::Off && forced.is_empty() {
        return Err(ConfigError::Missing {
            key: "noise.modes".into(),
        });
    }
    let key = if raw.has("noise.sigma") { "noise.sigma" } else { "noise.kind" };
    let g = NoiseModel::new(kind, sigma, alpha, forced).map_err(|e| raw.constraint(key, e))?;
    if let Some(n) = trunc {
        g.indices(n).map_err(|e| raw.constraint("noise.modes", e))?;
    }
    Ok(g)
}

fn parse_control(raw: &Raw, sim: Option<&SimConfig>) -> Result<FeedbackControl> {
    let horizon = raw
        .get("control.horizon", "a positive number", float)?
        .or(sim.map(|c| c.t_final))
        .unwrap_or(1.0);
    if let Some(c) = sim {
        if horizon + 1e-12 < c.t_final {
            return Err(raw.constraint("control.horizon", "must cover sim.t_final"));
        }
    }
    let cap = raw.get("control.cap_k", "a positive number or inf", float)?.unwrap_or(f64::INFINITY);
    let radius = match raw.get("control.state_radius", "a nonnegative number", float)? {
        Some(r) => r,
        None => sim.map_or(1.0, |c| {
            let r = c.stop_radius();
            if r.is_finite() {
                r
            } else {
                c.stop_mtilde
            }
        }),
    };
    let key = if raw.has("control.cap_k") { "control.cap_k" } else { "control.horizon" };
    let mut phi = FeedbackControl::new(horizon, cap, radius).map_err(|e| raw.constraint(key, e))?;

    let check_mode = |key: &str, m: Mode| -> Result<()> {
        match sim {
            Some(c) if m.linf() > c.trunc => Err(raw.constraint(
                key,
                format!("mode ({}, {}) lies outside sim.grid_n = {}", m.kx(), m.ky(), c.trunc),
            )),
            _ => Ok(()),
        }
    };
    for (m, gain) in raw.list("control.gains", "a list of kx:ky:gain", gain_item)?.unwrap_or_default() {
        check_mode("control.gains", m)?;
        phi = phi
            .with_gain(m, Profile::constant(gain))
            .map_err(|e| raw.constraint("control.gains", e))?;
    }
    for (m, b) in raw.list("control.base", AMP_LIST, amp_item)?.unwrap_or_default() {
        check_mode("control.base", m)?;
        phi = phi
            .with_base(m, Profile::constant(b))
            .map_err(|e| raw.constraint("control.base", e))?;
    }
    for key in &raw.order {
        let Some((is_gain, m)) = profile_mode(key) else {
            continue;
        };
        check_mode(key, m)?;
        phi = if is_gain {
            let knots = raw.list(key, "a list of t:gain", gain_knot)?.unwrap_or_default();
            let p = Profile::new(knots).map_err(|e| raw.constraint(key, e))?;
            phi.with_gain(m, p)
        } else {
            let knots = raw.list(key, "a list of t:re[:im]", base_knot)?.unwrap_or_default();
            let p = Profile::new(knots).map_err(|e| raw.constraint(key, e))?;
            phi.with_base(m, p)
        }
        .map_err(|e| raw.constraint(key, e))?;
    }
    Ok(phi)
}

fn parse_cost(raw: &Raw, trunc: Option<usize>) -> Result<CostSpec> {
    let kind = raw
        .get("cost.kind", "vorticity or v-tracking", CostKind::parse)?
        .unwrap_or(CostKind::Vorticity);
    let eps = raw.get("cost.eps", "a number", float)?.unwrap_or(0.5);
    let lip_l = raw.get("cost.lip_l", "a positive number", float)?;
    let target = match (kind, raw.list("cost.target", AMP_LIST, amp_item)?) {
        (CostKind::Vorticity, Some(_)) => return Err(raw.constraint("cost.target", "vorticity cost takes no target")),
        (CostKind::Vorticity, None) => None,
        (CostKind::VTracking, entries) => {
            let Some(n) = trunc else {
                return Err(raw.constraint("cost.kind", "v-tracking needs the sim block for its target"));
            };
            let f = SpectralField::from_modes(n, entries.unwrap_or_default())
                .map_err(|e| raw.constraint("cost.target", e))?;
            Some(f)
        }
    };
    let key = if raw.has("cost.eps") { "cost.eps" } else { "cost.kind" };
    CostSpec::new(kind, eps, lip_l, target).map_err(|e| {
        let key = if raw.has("cost.lip_l") && e.to_string().contains("lip_l") { "cost.lip_l" } else { key };
        raw.constraint(key, e)
    })
}

fn parse_experiment(raw: &Raw, sim: Option<&SimConfig>, control: &FeedbackControl) -> Result<ExperimentParams> {
    let scheme = raw
        .get("experiment.scheme", "gain-scale, mode-truncate or time-mollify", |s| {
            SequenceScheme::parse(&s.replace('_', "-"))
        })?
        .unwrap_or(SequenceScheme::GainScale);
    let n_list = raw.list("experiment.n_list", "a list of positive integers", |s| {
        s.parse().ok().filter(|&n: &u32| n > 0)
    })?;
    if let Some(l) = &n_list {
        if l.is_empty() || l.windows(2).any(|w| w[0] >= w[1]) {
            return Err(raw.constraint("experiment.n_list", "must be nonempty and strictly increasing"));
        }
    }
    let floats = "a list of positive numbers";
    let positive = |s: &str| float(s).filter(|&x| x > 0.0 && x.is_finite());
    let s_list = raw.list("experiment.s_list", floats, positive)?;
    if let Some(l) = &s_list {
        if l.is_empty() || l.windows(2).any(|w| w[0] <= w[1]) {
            return Err(raw.constraint("experiment.s_list", "must be nonempty and strictly decreasing"));
        }
        if let Some(c) = sim {
            if l[0] > c.t_final {
                return Err(raw.constraint("experiment.s_list", "entries must not exceed sim.t_final"));
            }
        }
    }
    let dt_list = raw.list("experiment.dt_list", floats, positive)?;
    let t_list = raw.list("experiment.t_list", floats, positive)?;
    if let Some(l) = &t_list {
        if l.iter().any(|&t| t > control.horizon() + 1e-12) {
            return Err(raw.constraint("experiment.t_list", "entries must not exceed the control horizon"));
        }
    }
    let delta = raw.get("experiment.delta", "a positive number", positive)?.unwrap_or(0.01);
    let count = "a positive integer";
    let samples = raw
        .get("experiment.samples", count, |s| s.parse().ok().filter(|&n: &usize| n > 0))?
        .unwrap_or(1_000_000);
    let instances = raw
        .get("experiment.instances", count, |s| s.parse().ok())?
        .unwrap_or(100);
    let budget = raw.get("experiment.budget", count, |s| s.parse().ok().filter(|&n: &usize| n > 0))?;

    let lower = raw.list("experiment.lower", "a list of numbers", float)?;
    let upper = raw.list("experiment.upper", "a list of numbers", float)?;
    let slots = raw.list("experiment.slots", "a list of gain|base_re|base_im:kx:ky", Slot::parse)?;
    let param_box = match (lower, upper, slots) {
        (None, None, None) => None,
        (Some(lo), Some(hi), Some(sl)) => {
            let bx = ParamBox::new(lo, hi, sl, control.clone()).map_err(|e| raw.constraint("experiment.slots", e))?;
            if let Some(b) = budget {
                if b < 3 * (bx.dims() + 1) {
                    return Err(raw.constraint(
                        "experiment.budget",
                        format!("must be at least {} for {} parameters", 3 * (bx.dims() + 1), bx.dims()),
                    ));
                }
            }
            Some(bx)
        }
        _ => {
            let missing = ["experiment.lower", "experiment.upper", "experiment.slots"]
                .into_iter()
                .find(|k| !raw.has(k))
                .unwrap_or("experiment.slots");
            return Err(ConfigError::Missing { key: missing.into() });
        }
    };

    let m_candidates = raw.list("experiment.m_candidates", "a list of numbers > 1", |s| {
        float(s).filter(|&m| m > 1.0 && m.is_finite())
    })?;
    let calibrate_range = match raw.list("experiment.calibrate_range", "two probabilities lo, hi", float)? {
        None => (0.1, 0.3),
        Some(v) if v.len() == 2 && 0.0 <= v[0] && v[0] < v[1] && v[1] <= 1.0 => (v[0], v[1]),
        Some(_) => {
            return Err(raw.constraint("experiment.calibrate_range", "must be lo, hi with 0 <= lo < hi <= 1"));
        }
    };
    Ok(ExperimentParams {
        scheme,
        n_list,
        s_list,
        dt_list,
        t_list,
        delta,
        samples,
        instances,
        param_box,
        budget,
        m_candidates,
        calibrate_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "sim.grid_n = 2\nsim.nu = 0.1\nsim.dt = 0.01\nsim.t_final = 0.5\nmc.paths = 4\nmc.seed = 9\n";

    #[test]
    fn minimal_round_trip() {
        let spec = parse_str(MINIMAL).unwrap();
        let sim = spec.sim.as_ref().unwrap();
        assert_eq!((sim.trunc, sim.nu, sim.dt, sim.t_final), (2, 0.1, 0.01, 0.5));
        assert_eq!(spec.mc, Mc { paths: 4, seed: 9 });
        assert_eq!(spec.echo().len(), 6);
        for (k, v) in spec.echo() {
            assert!(MINIMAL.contains(&format!("{k} = {v}")));
        }
    }

    #[test]
    fn comments_and_lists() {
        let text = format!(
            "{MINIMAL}# heading\nu0.modes = 1:0:0.5, 1:1:0:0.2  # two modes\nnoise.kind = additive\nnoise.sigma = 0.3\nnoise.modes = 1:0, 0:1\ncontrol.gain_profile.1_-1 = 0:-0.1, 0.5:-0.2\ncontrol.base_profile.0_1 = 0:0.1:0.2\n"
        );
        let spec = parse_str(&text).unwrap();
        let u0 = &spec.sim.unwrap().u0;
        assert_eq!(u0.get(Mode::new(1, 1).unwrap()).unwrap(), Complex64::new(0.0, 0.2));
        assert_eq!(spec.noise.directions(), 2);
        assert_eq!(spec.control.gains().len(), 1);
        assert_eq!(spec.control.base().len(), 1);
    }

    #[test]
    fn strict_keys() {
        let err = parse_str(&format!("{MINIMAL}noise.sgima = 0.1\n")).unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey { line: 7, key } if key == "noise.sgima"));
        assert!(err.to_string().contains("noise.sgima") && err.to_string().contains("line 7"));
        let err = parse_str(&format!("{MINIMAL}mc.seed = 3\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { line: 7, first: 6, .. }));
        assert!(matches!(parse_str("sim.nu 0.1"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn type_and_constraint_errors() {
        let err = parse_str(&format!("{MINIMAL}cost.eps = 1.5\n")).unwrap_err();
        assert!(err.to_string().contains("cost.eps must be in (0,1)"), "{err}");
        assert!(matches!(err, ConfigError::Constraint { line: 7, .. }));
        let err = parse_str(&MINIMAL.replace("0.01", "fast")).unwrap_err();
        assert!(matches!(err, ConfigError::Type { line: 3, .. }));
        let err = parse_str(&MINIMAL.replace("sim.nu = 0.1\n", "")).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { key } if key == "sim.nu"));
        let err = parse_str(&format!("{MINIMAL}control.gains = 5:0:1\n")).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
        let err = parse_str(&format!("{MINIMAL}experiment.n_list = 4, 2\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Constraint { line: 7, .. }));
    }

    #[test]
    fn overrides() {
        let spec = parse_str(MINIMAL).unwrap().with_overrides(Some(1), Some(7)).unwrap();
        assert_eq!(spec.mc, Mc { paths: 7, seed: 1 });
        assert!(parse_str(MINIMAL).unwrap().with_overrides(None, Some(0)).is_err());
    }

    #[test]
    fn sim_block_is_optional() {
        let spec = parse_str("mc.paths = 1\nmc.seed = 0\ncost.eps = 0.25\n").unwrap();
        assert!(spec.sim.is_none());
        assert_eq!(spec.cost.eps(), 0.25);
    }
}
