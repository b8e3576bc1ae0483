//! Typed run configuration built from a parsed config file.

use std::path::PathBuf;
use std::str::FromStr;

use gbeam::beam::Mode;
use gbeam::field::CutoffSpec;
use gbeam::model::{PhaseKind1d, PhaseKind2d};
use gbeam::qoi::{QoIKind, MAX_SPACING_FRACTION};
use gbeam::quad::QuadRule;
use gbeam::sweep::FdMode;

use crate::config::{ConfigError, RawConfig, Reader};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Snapshot,
    Qoi,
    Sweep,
    Fit,
    ReproduceFigure,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "validate" => Command::Validate,
            "snapshot" => Command::Snapshot,
            "qoi" => Command::Qoi,
            "sweep" => Command::Sweep,
            "fit" => Command::Fit,
            "reproduce-figure" => Command::ReproduceFigure,
            _ => return Err(format!("unknown command `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fig1" => Figure::Fig1,
            "fig2" => Figure::Fig2,
            "fig3" => Figure::Fig3,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            _ => return Err(format!("unknown figure `{s}` (expected fig1 to fig5)")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioSel {
    OneD { phase: PhaseKind1d, s: f64 },
    TwoD { phase: PhaseKind2d },
}

impl ScenarioSel {
    pub fn default_eps(&self) -> Vec<f64> {
        match self {
            ScenarioSel::OneD { .. } => vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0],
            ScenarioSel::TwoD { .. } => vec![1.0 / 30.0, 1.0 / 60.0, 1.0 / 120.0],
        }
    }
}

/// Derivative step in the parameter: fixed, or proportional to epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    PerEpsilon(f64),
}

impl StepRule {
    pub fn at(self, eps: f64) -> f64 {
        match self {
            StepRule::Fixed(h) => h,
            StepRule::PerEpsilon(f) => f * eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Diagonal sweep when the scenario has one and no axis bounds are given.
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub points: usize,
    pub sigmas: Vec<usize>,
    pub h_y: StepRule,
    pub fd: FdMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub figure: Option<Figure>,
    pub scenario: ScenarioSel,
    pub eps: Vec<f64>,
    /// Whether `run.eps` was given; figures have their own defaults.
    pub eps_explicit: bool,
    pub modes: Vec<Mode>,
    /// h_x = h_t = epsilon * h_fraction.
    pub h_fraction: f64,
    /// Launch spacing as a multiple of sqrt(epsilon).
    pub z_spacing: f64,
    pub cutoff: CutoffSpec,
    pub rule: QuadRule,
    pub richardson: bool,
    /// Parameter points for snapshot and qoi, given directly or as diagonal coordinates.
    pub y: Option<Vec<Vec<f64>>>,
    pub r: Option<Vec<f64>>,
    pub qoi_kind: QoIKind,
    pub qoi_p: usize,
    pub qoi_alpha: Option<Vec<usize>>,
    pub qoi_t: Option<f64>,
    pub snapshot_t: Vec<f64>,
    pub snapshot_h: Option<f64>,
    pub snapshot_lo: Option<Vec<f64>>,
    pub snapshot_hi: Option<Vec<f64>>,
    pub validate_samples: usize,
    pub sweep: SweepSettings,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn eps_or(&self, default: &[f64]) -> Vec<f64> {
        if self.eps_explicit {
            self.eps.clone()
        } else {
            default.to_vec()
        }
    }
}

fn parsed<T: FromStr<Err = String>>(r: &Reader, key: &str) -> Result<Option<T>, ConfigError> {
    r.str(key)?.map(|s| s.parse().map_err(|e: String| r.invalid(key, e))).transpose()
}

fn check_eps(r: &Reader, key: &str, eps: &[f64]) -> Result<(), ConfigError> {
    if eps.is_empty() {
        return Err(r.invalid(key, "epsilon list is empty"));
    }
    match eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        Some(e) => Err(r.invalid(key, format!("epsilon {e} outside (0, 1]"))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader::new(raw);
        let command: Command = r.require("command", parsed(&r, "command")?)?;
        let figure: Option<Figure> = parsed(&r, "figure")?;
        if command == Command::ReproduceFigure && figure.is_none() {
            return Err(ConfigError::Missing("figure".into()));
        }

        let name = r.str("scenario.name")?;
        let phase = r.str("scenario.phase")?;
        let s = r.positive("scenario.s")?;
        let scenario = match (name.as_deref(), phase.as_deref()) {
            (None | Some("preset_1d"), p) => {
                let phase = match p.unwrap_or("linear") {
                    "linear" => PhaseKind1d::Linear,
                    "quadratic" => PhaseKind1d::Quadratic,
                    other => return Err(r.invalid("scenario.phase", format!("unknown 1D phase `{other}`"))),
                };
                ScenarioSel::OneD { phase, s: s.unwrap_or(3.0) }
            }
            (Some("preset_2d"), p) => {
                if s.is_some() {
                    return Err(r.invalid("scenario.s", "the 2D preset has no pulse offset"));
                }
                let phase = match p.unwrap_or("abs") {
                    "abs" => PhaseKind2d::Abs,
                    "linear" => PhaseKind2d::Linear,
                    other => return Err(r.invalid("scenario.phase", format!("unknown 2D phase `{other}`"))),
                };
                ScenarioSel::TwoD { phase }
            }
            (Some(other), _) => {
                return Err(r.invalid("scenario.name", format!("unknown preset `{other}` (expected preset_1d or preset_2d)")))
            }
        };
        let dim = match scenario {
            ScenarioSel::OneD { .. } => 1,
            ScenarioSel::TwoD { .. } => 2,
        };

        let eps_given = r.nums("run.eps")?;
        let eps_explicit = eps_given.is_some();
        let eps = match eps_given {
            Some(e) => {
                check_eps(&r, "run.eps", &e)?;
                e
            }
            None => scenario.default_eps(),
        };
        let modes = match r.str("run.modes")?.as_deref() {
            None | Some("both") => Mode::BOTH.to_vec(),
            Some("plus") => vec![Mode::Plus],
            Some("minus") => vec![Mode::Minus],
            Some(other) => return Err(r.invalid("run.modes", format!("expected both, plus or minus, got `{other}`"))),
        };
        let h_fraction = r.positive("grid.h_fraction")?.unwrap_or(MAX_SPACING_FRACTION);
        if h_fraction > MAX_SPACING_FRACTION {
            return Err(r.invalid("grid.h_fraction", format!("must be at most {MAX_SPACING_FRACTION}")));
        }
        let z_spacing = r.positive("grid.z_spacing")?.unwrap_or(0.5);
        let cutoff = match r.str("grid.cutoff")?.as_deref() {
            None | Some("none") => CutoffSpec::NONE,
            Some(v) => {
                let eta: f64 = v.parse().map_err(|_| r.invalid("grid.cutoff", format!("expected none or a radius, got `{v}`")))?;
                CutoffSpec::finite(eta).map_err(|e| r.invalid("grid.cutoff", e.to_string()))?
            }
        };
        let rule = match r.str("grid.rule")?.as_deref() {
            None | Some("trapezoid") => QuadRule::Trapezoid,
            Some("simpson") => QuadRule::Simpson,
            Some(other) => return Err(r.invalid("grid.rule", format!("expected trapezoid or simpson, got `{other}`"))),
        };
        let richardson = r.flag("grid.richardson")?.unwrap_or(false);

        let y = r.points("scenario.y", dim)?;
        let rr = r.nums("scenario.r")?;
        if y.is_some() && rr.is_some() {
            return Err(r.invalid("scenario.r", "give either scenario.y or scenario.r, not both"));
        }

        let qoi_kind: QoIKind = match r.str("qoi.kind")? {
            None => QoIKind::Space,
            Some(k) => k.parse().map_err(|_| r.invalid("qoi.kind", format!("unknown QoI kind `{k}`")))?,
        };
        let qoi_p = r.count("qoi.p")?.unwrap_or(0);
        let qoi_alpha = match r.nums("qoi.alpha")? {
            None => None,
            Some(a) => {
                if a.len() != dim || a.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(r.invalid("qoi.alpha", format!("expected {dim} non-negative integer(s)")));
                }
                Some(a.iter().map(|v| *v as usize).collect())
            }
        };
        let qoi_t = r.num("qoi.t")?;
        if let Some(t) = qoi_t {
            if !(t >= 0.0) {
                return Err(r.invalid("qoi.t", "time must be non-negative"));
            }
        }

        let snapshot_t = r.nums("snapshot.t")?.unwrap_or_else(|| vec![1.0]);
        if snapshot_t.iter().any(|t| !(*t >= 0.0)) {
            return Err(r.invalid("snapshot.t", "times must be non-negative"));
        }
        let snapshot_h = r.positive("snapshot.h")?;
        let snapshot_lo = r.nums("snapshot.lo")?;
        let snapshot_hi = r.nums("snapshot.hi")?;
        for (k, v) in [("snapshot.lo", &snapshot_lo), ("snapshot.hi", &snapshot_hi)] {
            if v.as_ref().is_some_and(|v| v.len() != dim) {
                return Err(r.invalid(k, format!("expected {dim} coordinate(s)")));
            }
        }
        let validate_samples = r.count("validate.samples")?.unwrap_or(200).max(1);

        let h_y = match (r.positive("sweep.h_y")?, r.positive("sweep.h_y_per_eps")?) {
            (Some(_), Some(_)) => return Err(r.invalid("sweep.h_y_per_eps", "give either sweep.h_y or sweep.h_y_per_eps")),
            (Some(h), None) => StepRule::Fixed(h),
            (None, Some(f)) => StepRule::PerEpsilon(f),
            (None, None) => StepRule::PerEpsilon(1.0 / 50.0),
        };
        let sigmas = match r.nums("sweep.sigma")? {
            None => vec![0, 1, 2],
            Some(v) => {
                if v.iter().any(|s| !matches!(*s, x if x == 0.0 || x == 1.0 || x == 2.0)) {
                    return Err(r.invalid("sweep.sigma", "derivative orders must be 0, 1 or 2"));
                }
                v.iter().map(|s| *s as usize).collect()
            }
        };
        let sweep = SweepSettings {
            lo: r.nums("sweep.lo")?,
            hi: r.nums("sweep.hi")?,
            points: r.count("sweep.points")?.unwrap_or(101),
            sigmas,
            h_y,
            fd: match r.str("sweep.fd")?.as_deref() {
                None | Some("stencil") => FdMode::Stencil,
                Some("grid") => FdMode::Grid,
                Some(other) => return Err(r.invalid("sweep.fd", format!("expected stencil or grid, got `{other}`"))),
            },
        };
        if sweep.points < 2 {
            return Err(r.invalid("sweep.points", "need at least 2 points"));
        }
        let workers = r.count("run.workers")?;
        if workers == Some(0) {
            return Err(r.invalid("run.workers", "must be at least 1"));
        }
        let out = r.str("run.out")?.map(PathBuf::from);

        r.reject_unknown()?;
        Ok(RunConfig {
            command,
            figure,
            scenario,
            eps,
            eps_explicit,
            modes,
            h_fraction,
            z_spacing,
            cutoff,
            rule,
            richardson,
            y,
            r: rr,
            qoi_kind,
            qoi_p,
            qoi_alpha,
            qoi_t,
            snapshot_t,
            snapshot_h,
            snapshot_lo,
            snapshot_hi,
            validate_samples,
            sweep,
            workers,
            out,
        })
    }
}
