//! Bounded affine feedback laws
//! `φ(t, u) = Σ_k [γ_k(t) ⟨u, e_k⟩ + f_k(t)] e_k`, capped in V-norm.

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{mode_index, Mode, SpectralField};

const TIME_SLACK: f64 = 1e-12;

/// Piecewise-linear function of time, constant before the first and after
/// the last knot.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile<T> {
    knots: Vec<(f64, T)>,
}

impl<T> Profile<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    pub fn constant(value: T) -> Self {
        Self {
            knots: vec![(0.0, value)],
        }
    }

    pub fn new(knots: Vec<(f64, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("profile needs a knot".into()));
        }
        if knots.iter().any(|(t, _)| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite knot time".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter(
                "profile knot times must increase strictly".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, T)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> T {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let j = k.partition_point(|(s, _)| *s <= t);
        let (t0, v0) = k[j - 1];
        let (t1, v1) = k[j];
        let w = (t - t0) / (t1 - t0);
        v0 + (v1 - v0) * w
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            knots: self.knots.iter().map(|&(t, v)| (t, f(v))).collect(),
        }
    }

    /// Largest `|Δv|/Δt` over consecutive knots under `size`.
    pub fn max_slope(&self, size: impl Fn(T) -> f64) -> f64 {
        self.knots
            .windows(2)
            .map(|w| size(w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(0.0, f64::max)
    }

    /// Exact mean over `[a, b]` (trapezoid rule is exact for piecewise-linear).
    pub fn average(&self, a: f64, b: f64) -> T {
        let mut pts = vec![a];
        pts.extend(self.knots.iter().map(|k| k.0).filter(|&t| t > a && t < b));
        pts.push(b);
        let mut acc = self.eval(a) * 0.0;
        for w in pts.windows(2) {
            acc = acc + (self.eval(w[0]) + self.eval(w[1])) * (0.5 * (w[1] - w[0]));
        }
        acc * (1.0 / (b - a))
    }
}

/// Output of a control evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlValue {
    pub field: SpectralField,
    /// The V-norm cap rescaled the output, so the affine law was not applied verbatim.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackControl {
    horizon: f64,
    cap: f64,
    state_radius: f64,
    gains: Vec<(Mode, Profile<f64>)>,
    base: Vec<(Mode, Profile<Complex64>)>,
    c1: f64,
    c2: f64,
}

impl FeedbackControl {
    /// Null control on `[0, horizon]`. `state_radius` bounds `‖x‖_V` over the
    /// states where the time-Lipschitz constant is asserted (the stopping ball).
    pub fn new(horizon: f64, cap: f64, state_radius: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "control horizon must be positive, got {horizon}"
            )));
        }
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "control cap must be positive, got {cap}"
            )));
        }
        if !(state_radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "state radius must be nonnegative, got {state_radius}"
            )));
        }
        Ok(Self {
            horizon,
            cap,
            state_radius,
            gains: Vec::new(),
            base: Vec::new(),
            c1: 0.0,
            c2: 0.0,
        })
    }

    pub fn with_gain(mut self, mode: Mode, profile: Profile<f64>) -> Result<Self> {
        let mode = mode.canonical();
        if self.gains.iter().any(|(m, _)| *m == mode) {
            return Err(Error::DuplicateMode(mode));
        }
        self.gains.push((mode, profile));
        self.gains.sort_by_key(|(m, _)| *m);
        self.refresh();
        Ok(self)
    }

    /// Base forcing on `mode`; amplitudes given on `-k` follow the conjugate rule.
    pub fn with_base(mut self, mode: Mode, profile: Profile<Complex64>) -> Result<Self> {
        let (mode, profile) = if mode.is_canonical() {
            (mode, profile)
        } else {
            (mode.neg(), profile.map(|z| -z.conj()))
        };
        if self.base.iter().any(|(m, _)| *m == mode) {
            return Err(Error::DuplicateMode(mode));
        }
        self.base.push((mode, profile));
        self.base.sort_by_key(|(m, _)| *m);
        self.refresh();
        Ok(self)
    }

    /// Inserts or replaces the gain on `mode`.
    pub fn set_gain(&mut self, mode: Mode, profile: Profile<f64>) {
        let mode = mode.canonical();
        self.gains.retain(|(m, _)| *m != mode);
        self.gains.push((mode, profile));
        self.gains.sort_by_key(|(m, _)| *m);
        self.refresh();
    }

    /// Inserts or replaces the base forcing on `mode` (conjugate rule as in
    /// [`Self::with_base`]).
    pub fn set_base(&mut self, mode: Mode, profile: Profile<Complex64>) {
        let (mode, profile) = if mode.is_canonical() {
            (mode, profile)
        } else {
            (mode.neg(), profile.map(|z| -z.conj()))
        };
        self.base.retain(|(m, _)| *m != mode);
        self.base.push((mode, profile));
        self.base.sort_by_key(|(m, _)| *m);
        self.refresh();
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn state_radius(&self) -> f64 {
        self.state_radius
    }

    pub fn gains(&self) -> &[(Mode, Profile<f64>)] {
        &self.gains
    }

    pub fn base(&self) -> &[(Mode, Profile<Complex64>)] {
        &self.base
    }

    /// Time-Lipschitz constant `C₁` (valid for `‖x₂‖_V <= state_radius`).
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// State-Lipschitz constant `C₂`.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Largest `|k|∞` carrying a gain or base term.
    pub fn support_radius(&self) -> usize {
        self.gains
            .iter()
            .map(|(m, _)| m.linf())
            .chain(self.base.iter().map(|(m, _)| m.linf()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_null(&self) -> bool {
        self.gains.is_empty() && self.base.is_empty()
    }

    // ‖φ(t₁,x₁) − φ(t₂,x₂)‖² ≤ 2‖γ(t₁)(x₁−x₂)‖² + 2‖(γ(t₁)−γ(t₂))x₂ + f(t₁)−f(t₂)‖²
    fn refresh(&mut self) {
        let max_gain = self
            .gains
            .iter()
            .flat_map(|(_, p)| p.knots().iter().map(|k| k.1.abs()))
            .fold(0.0, f64::max);
        let gain_slope = self
            .gains
            .iter()
            .map(|(_, p)| p.max_slope(f64::abs))
            .fold(0.0, f64::max);
        let base_slope = self
            .base
            .iter()
            .map(|(m, p)| m.lambda() * p.max_slope(|z| z.norm()).powi(2))
            .sum::<f64>()
            .sqrt();
        self.c2 = 2.0 * max_gain * max_gain;
        self.c1 = 2.0 * (gain_slope * self.state_radius + base_slope).powi(2);
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -TIME_SLACK && t <= self.horizon * (1.0 + TIME_SLACK) + TIME_SLACK) {
            return Err(Error::OutsideHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Uncapped affine law written into `out`; returns its V-norm squared.
    pub(crate) fn eval_raw_into(&self, t: f64, u: &SpectralField, out: &mut SpectralField) -> Result<f64> {
        self.check_time(t)?;
        let trunc = u.trunc();
        let ua = u.amps();
        let oa = out.amps_mut();
        oa.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (m, p) in &self.gains {
            let i = index(trunc, *m)?;
            oa[i] += ua[i] * p.eval(t);
        }
        for (m, p) in &self.base {
            let i = index(trunc, *m)?;
            oa[i] += p.eval(t);
        }
        Ok(out.norm_v2())
    }

    /// Evaluates the law and applies the V-norm cap; returns whether it fired.
    pub(crate) fn eval_into(&self, t: f64, u: &SpectralField, out: &mut SpectralField) -> Result<bool> {
        let v2 = self.eval_raw_into(t, u, out)?;
        let v = v2.sqrt();
        if v > self.cap {
            let s = self.cap / v;
            out.amps_mut().iter_mut().for_each(|z| *z *= s);
            return Ok(true);
        }
        Ok(false)
    }

    /// Value of the state-independent part `f(t)`.
    pub fn base_at(&self, t: f64, trunc: usize) -> Result<SpectralField> {
        let mut out = SpectralField::zeros(trunc);
        self.eval_raw_into(t, &SpectralField::zeros(trunc), &mut out)?;
        Ok(out)
    }

    fn knot_times(&self) -> BTreeSet<OrderedTime> {
        let mut times: BTreeSet<OrderedTime> = [0.0, self.horizon].into_iter().map(OrderedTime).collect();
        for (_, p) in &self.gains {
            times.extend(p.knots().iter().map(|k| OrderedTime(k.0)));
        }
        for (_, p) in &self.base {
            times.extend(p.knots().iter().map(|k| OrderedTime(k.0)));
        }
        times
    }
}

fn index(trunc: usize, m: Mode) -> Result<usize> {
    mode_index(trunc, m).ok_or(Error::ModeOutOfRange {
        kx: m.kx(),
        ky: m.ky(),
        trunc,
    })
}

#[derive(Copy, Clone, Debug, PartialEq)]
struct OrderedTime(f64);

impl Eq for OrderedTime {}

impl PartialOrd for OrderedTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn eval_control(phi: &FeedbackControl, t: f64, u: &SpectralField) -> Result<ControlValue> {
    let mut field = SpectralField::zeros(u.trunc());
    let capped = phi.eval_into(t, u, &mut field)?;
    Ok(ControlValue { field, capped })
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ControlDistance {
    /// `sup_t ‖γ^a(t) − γ^b(t)‖_{L(V)}`
    pub operator: f64,
    /// `sup_t ‖f^a(t) − f^b(t)‖_V`
    pub base: f64,
}

/// Distance between two controls. Both parts are piecewise linear in `t`
/// (or convex per segment), so the supremum is attained on the union of knots.
pub fn lv_operator_distance(a: &FeedbackControl, b: &FeedbackControl) -> Result<ControlDistance> {
    if (a.horizon - b.horizon).abs() > TIME_SLACK * a.horizon.max(b.horizon) {
        return Err(Error::HorizonMismatch(a.horizon, b.horizon));
    }
    let mut times = a.knot_times();
    times.extend(b.knot_times());
    let gain_modes: BTreeSet<Mode> = a.gains.iter().chain(&b.gains).map(|(m, _)| *m).collect();
    let base_modes: BTreeSet<Mode> = a.base.iter().chain(&b.base).map(|(m, _)| *m).collect();
    let gain_at = |c: &FeedbackControl, m: Mode, t: f64| {
        c.gains
            .iter()
            .find(|(k, _)| *k == m)
            .map_or(0.0, |(_, p)| p.eval(t))
    };
    let base_at = |c: &FeedbackControl, m: Mode, t: f64| {
        c.base
            .iter()
            .find(|(k, _)| *k == m)
            .map_or(Complex64::new(0.0, 0.0), |(_, p)| p.eval(t))
    };
    let mut out = ControlDistance {
        operator: 0.0,
        base: 0.0,
    };
    for OrderedTime(t) in times.into_iter().filter(|t| t.0 >= 0.0 && t.0 <= a.horizon) {
        let op = gain_modes
            .iter()
            .map(|&m| (gain_at(a, m, t) - gain_at(b, m, t)).abs())
            .fold(0.0, f64::max);
        let base = base_modes
            .iter()
            .map(|&m| m.lambda() * (base_at(a, m, t) - base_at(b, m, t)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        out.operator = out.operator.max(op);
        out.base = out.base.max(base);
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SequenceScheme {
    /// Gains and base multiplied by `1 + 1/n`.
    GainScale,
    /// Entries with `|k|∞ > n` removed.
    ModeTruncate,
    /// Profiles replaced by the linear interpolant of their `n` segment
    /// averages, placed at segment midpoints.
    TimeMollify,
}

impl SequenceScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::GainScale => "gain-scale",
            Self::ModeTruncate => "mode-truncate",
            Self::TimeMollify => "time-mollify",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gain-scale" => Some(Self::GainScale),
            "mode-truncate" => Some(Self::ModeTruncate),
            "time-mollify" => Some(Self::TimeMollify),
            _ => None,
        }
    }
}

/// `n`-th member of a control sequence converging to `phi` in `L(V)`.
pub fn control_sequence(phi: &FeedbackControl, n: u32, scheme: SequenceScheme) -> Result<FeedbackControl> {
    if n == 0 {
        return Err(Error::InvalidParameter("sequence index must be >= 1".into()));
    }
    let mut out = phi.clone();
    match scheme {
        SequenceScheme::GainScale => {
            let s = 1.0 + 1.0 / f64::from(n);
            out.gains = phi.gains.iter().map(|(m, p)| (*m, p.map(|g| g * s))).collect();
            out.base = phi.base.iter().map(|(m, p)| (*m, p.map(|f| f * s))).collect();
        }
        SequenceScheme::ModeTruncate => {
            let n = n as usize;
            out.gains.retain(|(m, _)| m.linf() <= n);
            out.base.retain(|(m, _)| m.linf() <= n);
        }
        SequenceScheme::TimeMollify => {
            let horizon = phi.horizon;
            out.gains = phi
                .gains
                .iter()
                .map(|(m, p)| Ok((*m, mollify(p, horizon, n)?)))
                .collect::<Result<_>>()?;
            out.base = phi
                .base
                .iter()
                .map(|(m, p)| Ok((*m, mollify(p, horizon, n)?)))
                .collect::<Result<_>>()?;
        }
    }
    out.refresh();
    Ok(out)
}

fn mollify<T>(p: &Profile<T>, horizon: f64, n: u32) -> Result<Profile<T>>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let h = horizon / f64::from(n);
    let knots = (0..n)
        .map(|i| {
            let a = f64::from(i) * h;
            (a + 0.5 * h, p.average(a, a + h))
        })
        .collect();
    Profile::new(knots)
}
