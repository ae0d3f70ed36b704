//! Run configuration: presets, the mesh-coupled parameter schedule, and the
//! flat `key = value` configuration format.
//!
//! Unless overridden, all regularization parameters follow the mesh size
//! h = L/N: tau = h/10, eps1 = h, eps2 = sqrt(h), delta = sqrt(h), with the
//! fixed pseudo-time horizon T = 10.

use std::path::{Path, PathBuf};

use crate::energy::RegParams;
use crate::error::{Error, Result};
use crate::flow::{FlowParams, MonotonicityGuard, StepBudget};
use crate::frames::{helix_initial, moebius_initial, CurveSampler, DirectorSampler};

pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_WIDTH: f64 = 0.2;
/// Default stopping tolerance when stopping-criterion mode is selected.
pub const DEFAULT_EPS_STOP: f64 = 1e-8;

/// Default snapshot iteration indices per preset.
pub const MOEBIUS_SNAPSHOTS: [usize; 8] = [0, 102, 204, 306, 408, 510, 2448, 5092];
pub const HELIX_SNAPSHOTS: [usize; 8] = [0, 408, 816, 1224, 1632, 2040, 2448, 5092];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Moebius,
    Helix,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "moebius" | "mobius" => Ok(Preset::Moebius),
            "helix" => Ok(Preset::Helix),
            other => Err(Error::InvalidConfigValue {
                key: "preset".into(),
                reason: format!("unknown preset `{other}` (expected moebius or helix)"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Moebius => "moebius",
            Preset::Helix => "helix",
        }
    }

    pub fn length(&self) -> f64 {
        2.0 * std::f64::consts::PI
    }

    pub fn samplers(&self) -> (CurveSampler<'static>, DirectorSampler<'static>) {
        match self {
            Preset::Moebius => moebius_initial(),
            Preset::Helix => helix_initial(),
        }
    }

    pub fn figure_snapshots(&self) -> &'static [usize] {
        match self {
            Preset::Moebius => &MOEBIUS_SNAPSHOTS,
            Preset::Helix => &HELIX_SNAPSHOTS,
        }
    }
}

/// A fully specified run: preset, resolution, optional overrides of the
/// schedule, and output options.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Preset,
    pub n: usize,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    /// Pseudo-time horizon T; mutually exclusive with `steps`.
    pub horizon: Option<f64>,
    /// Explicit step count K; mutually exclusive with `horizon`.
    pub steps: Option<usize>,
    pub eps_stop: Option<f64>,
    /// Extra snapshots every `stride` steps; the preset figure indices plus
    /// the initial and final states are always written.
    pub snapshot_stride: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub w_vis: f64,
    pub guard: MonotonicityGuard,
}

impl RunConfig {
    pub fn new(preset: Preset, n: usize) -> Self {
        RunConfig {
            preset,
            n,
            tau: None,
            delta: None,
            eps1: None,
            eps2: None,
            horizon: None,
            steps: None,
            eps_stop: None,
            snapshot_stride: None,
            out_dir: None,
            w_vis: DEFAULT_WIDTH,
            guard: MonotonicityGuard::Off,
        }
    }

    /// Mesh size h = L/N of this run.
    pub fn h(&self) -> f64 {
        self.preset.length() / self.n as f64
    }

    /// Effective flow parameters after applying the schedule defaults.
    pub fn flow_params(&self) -> Result<FlowParams> {
        if self.n < 2 {
            return Err(Error::InvalidConfigValue {
                key: "n".into(),
                reason: format!("need at least 2 elements, got {}", self.n),
            });
        }
        if self.horizon.is_some() && self.steps.is_some() {
            return Err(Error::InvalidConfigValue {
                key: "steps".into(),
                reason: "horizon and steps are mutually exclusive".into(),
            });
        }
        let h = self.h();
        let tau = self.tau.unwrap_or(h / 10.0);
        let reg = RegParams::new(
            self.delta.unwrap_or_else(|| h.sqrt()),
            self.eps1.unwrap_or(h),
            self.eps2.unwrap_or_else(|| h.sqrt()),
        )?;
        let budget = match self.steps {
            Some(k) => StepBudget::Count(k),
            None => StepBudget::Horizon(self.horizon.unwrap_or(DEFAULT_HORIZON)),
        };
        let mut params = FlowParams::new(tau, reg, budget)?;
        params.eps_stop = self.eps_stop;
        params.guard = self.guard;
        Ok(params)
    }

    /// Iteration indices at which frame snapshots are written (sorted,
    /// deduplicated, capped at the final step).
    pub fn snapshot_indices(&self, total_steps: usize) -> Vec<usize> {
        let mut set: Vec<usize> = Vec::new();
        set.push(0);
        set.push(total_steps);
        for &k in self.preset.figure_snapshots() {
            if k <= total_steps {
                set.push(k);
            }
        }
        if let Some(stride) = self.snapshot_stride {
            if stride > 0 {
                let mut k = stride;
                while k <= total_steps {
                    set.push(k);
                    k += stride;
                }
            }
        }
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Output directory: explicit setting, or `<preset>-n<N>` under the
    /// root given by the RIBBONFLOW_OUT_ROOT environment variable (default
    /// `./out`).
    pub fn resolved_out_dir(&self) -> PathBuf {
        let root = std::env::var_os("RIBBONFLOW_OUT_ROOT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        match &self.out_dir {
            Some(dir) if dir.is_absolute() => dir.clone(),
            Some(dir) => root.join(dir),
            None => root.join(format!("{}-n{}", self.preset.name(), self.n)),
        }
    }

    /// Apply one `key = value` assignment; unknown keys are errors.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse_f64(key: &str, value: &str) -> Result<f64> {
            value.parse().map_err(|_| Error::InvalidConfigValue {
                key: key.into(),
                reason: format!("`{value}` is not a number"),
            })
        }
        fn parse_usize(key: &str, value: &str) -> Result<usize> {
            value.parse().map_err(|_| Error::InvalidConfigValue {
                key: key.into(),
                reason: format!("`{value}` is not a nonnegative integer"),
            })
        }
        match key {
            "preset" => self.preset = Preset::parse(value)?,
            "n" => self.n = parse_usize(key, value)?,
            "tau" => self.tau = Some(parse_f64(key, value)?),
            "delta" => self.delta = Some(parse_f64(key, value)?),
            "eps1" => self.eps1 = Some(parse_f64(key, value)?),
            "eps2" => self.eps2 = Some(parse_f64(key, value)?),
            "horizon" => self.horizon = Some(parse_f64(key, value)?),
            "steps" => self.steps = Some(parse_usize(key, value)?),
            "eps_stop" => self.eps_stop = Some(parse_f64(key, value)?),
            "snapshot_stride" => self.snapshot_stride = Some(parse_usize(key, value)?),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "w_vis" => self.w_vis = parse_f64(key, value)?,
            "guard" => {
                self.guard = match value {
                    "off" => MonotonicityGuard::Off,
                    "halve-tau" => MonotonicityGuard::HalveTau,
                    other => {
                        return Err(Error::InvalidConfigValue {
                            key: key.into(),
                            reason: format!("`{other}` is not a guard mode (off | halve-tau)"),
                        })
                    }
                }
            }
            unknown => return Err(Error::UnknownConfigKey(unknown.into())),
        }
        Ok(())
    }

    /// Parse a flat `key = value` configuration file ('#' starts a comment).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfigValue {
                    key: format!("line {}", lineno + 1),
                    reason: format!("`{line}` is not a key = value assignment"),
                });
            };
            self.apply_key_value(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Human-readable echo of every effective parameter.
    pub fn echo(&self) -> Result<String> {
        let params = self.flow_params()?;
        let h = self.h();
        let mut s = String::new();
        s.push_str(&format!("preset = {}\n", self.preset.name()));
        s.push_str(&format!("n = {}\n", self.n));
        s.push_str(&format!("L = {}\n", self.preset.length()));
        s.push_str(&format!("h = {h}\n"));
        s.push_str(&format!("tau = {}\n", params.tau));
        s.push_str(&format!("delta = {}\n", params.reg.delta));
        s.push_str(&format!("eps1 = {}\n", params.reg.eps1));
        s.push_str(&format!("eps2 = {}\n", params.reg.eps2));
        match params.budget {
            StepBudget::Horizon(t) => s.push_str(&format!("horizon = {t}\n")),
            StepBudget::Count(k) => s.push_str(&format!("steps = {k}\n")),
        }
        s.push_str(&format!("planned_steps = {}\n", params.step_count()));
        match params.eps_stop {
            Some(eps) => s.push_str(&format!("eps_stop = {eps}\n")),
            None => s.push_str("eps_stop = none\n"),
        }
        s.push_str(&format!(
            "guard = {}\n",
            match self.guard {
                MonotonicityGuard::Off => "off",
                MonotonicityGuard::HalveTau => "halve-tau",
            }
        ));
        s.push_str(&format!("w_vis = {}\n", self.w_vis));
        Ok(s)
    }
}
