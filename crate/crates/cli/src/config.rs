//! Run configuration: a TOML file, optionally patched by `--set key=value`
//! overrides, resolved into frame rates and a truncated space.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mech_sim_core::fock::coherent_state;
use mech_sim_core::model::{preset, solve_frame, DerivedFrame, FrameRates, PhysicalParams};
use mech_sim_core::{Complex64, ModeSpace, PureState};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemSection>,
    pub frame: Option<FrameTarget>,
    pub rates: Option<RatesSection>,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub wigner: WignerSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `preset` alone or explicit physical fields (rad/s, kg, K).
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub preset: Option<String>,
    pub omega_c: Option<f64>,
    pub omega_m: Option<f64>,
    pub mass: Option<f64>,
    pub g_quad: Option<f64>,
    pub drive: Option<ComplexValue>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma_m: Option<f64>,
    pub temperature: Option<f64>,
}

/// Chooses drive and detuning so the mean field sits at `alpha` with the
/// requested effective cavity frequency, given either directly or as a
/// multiple of the resulting `g_0`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FrameTarget {
    pub alpha: f64,
    pub omega_c: Option<f64>,
    pub omega_c_per_g0: Option<f64>,
}

/// Transformed-frame rates given directly, bypassing the mean-field solve.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub omega_c: f64,
    pub omega_m: f64,
    pub g0: f64,
    #[serde(default)]
    pub g: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub n_a: usize,
    pub n_b: usize,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self { n_a: 20, n_b: 20 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Seconds,
    InverseOmegaC,
}

impl TimeUnit {
    pub fn label(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::InverseOmegaC => "1/Omega_c",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_max: Option<f64>,
    pub n_steps: Option<usize>,
    #[serde(default = "yes")]
    pub include_small: bool,
    #[serde(default)]
    pub time_unit: TimeUnit,
    #[serde(default)]
    pub initial: InitialState,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_max: None,
            n_steps: None,
            include_small: true,
            time_unit: TimeUnit::Seconds,
            initial: InitialState::Vacuum,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Vacuum,
    Fock { j: usize, k: usize },
    Coherent { alpha_a: ComplexValue, alpha_b: ComplexValue },
}

/// A real number or an `[re, im]` pair.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub squeezing_db: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    A,
    #[default]
    B,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    #[serde(default)]
    pub mode: ModeChoice,
    /// Snapshot times in the run's time unit; defaults to `0, π/Ω_c, 2π/Ω_c`.
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    pub half_width: Option<f64>,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self {
            mode: ModeChoice::B,
            times: None,
            grid_points: default_grid_points(),
            half_width: None,
        }
    }
}

fn default_grid_points() -> usize {
    101
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub n_max: usize,
    pub l_max: usize,
    #[serde(default = "yes")]
    pub diagonalize: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            n_max: 4,
            l_max: 4,
            diagonalize: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Rates in the run's time unit together with the physical frame they came
/// from, when there is one.
#[derive(Clone, Debug)]
pub struct ResolvedFrame {
    pub rates: FrameRates,
    pub params: Option<PhysicalParams>,
    pub frame: Option<DerivedFrame>,
    /// Angular frequency in rad/s corresponding to one run rate unit.
    pub rate_unit: f64,
    pub time_unit: TimeUnit,
}

impl ResolvedFrame {
    pub fn default_t_max(&self) -> f64 {
        if self.rates.omega_c != 0.0 {
            TAU / self.rates.omega_c.abs()
        } else {
            TAU / self.rates.omega_m
        }
    }

    pub fn default_snapshots(&self) -> Vec<f64> {
        let period = self.default_t_max();
        vec![0.0, 0.5 * period, period]
    }
}

impl RunConfig {
    /// Reads `path` and applies the dotted overrides before validating.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text, overrides)
            .with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(text)?
        } else {
            let mut doc: toml::Table = toml::from_str(text)?;
            for entry in overrides {
                apply_override(&mut doc, entry)?;
            }
            let merged = toml::to_string(&doc)?;
            toml::from_str(&merged).context("after applying --set overrides")?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sys) = &self.system {
            let explicit = [
                sys.omega_c,
                sys.omega_m,
                sys.mass,
                sys.g_quad,
                sys.delta,
                sys.kappa,
                sys.gamma_m,
                sys.temperature,
            ]
            .iter()
            .any(Option::is_some)
                || sys.drive.is_some();
            match (&sys.preset, explicit) {
                (Some(_), true) => bail!(
                    "field `system`: give either `preset` or explicit parameters, not both"
                ),
                (None, false) => bail!("field `system`: needs `preset` or explicit parameters"),
                (None, true) if sys.omega_m.is_none() || sys.g_quad.is_none() => {
                    bail!("field `system`: explicit parameters need `omega_m` and `g_quad`")
                }
                _ => {}
            }
        }
        if let Some(target) = &self.frame {
            if self.system.is_none() {
                bail!("field `frame`: needs a `system` section");
            }
            if target.omega_c.is_some() == target.omega_c_per_g0.is_some() {
                bail!("field `frame`: give exactly one of `omega_c` and `omega_c_per_g0`");
            }
        }
        if self.rates.is_some() && (self.frame.is_some() || self.has_drive()) {
            bail!("field `rates`: direct rates exclude a physical frame (`frame` or `system.drive`)");
        }
        if self.space.n_a < 2 || self.space.n_b < 2 {
            bail!("field `space`: truncations must be at least 2");
        }
        if let Some(t) = self.run.t_max {
            if !(t.is_finite() && t > 0.0) {
                bail!("field `run.t_max`: must be positive");
            }
        }
        if self.run.n_steps == Some(0) {
            bail!("field `run.n_steps`: must be at least 1");
        }
        if self.wigner.grid_points < 2 {
            bail!("field `wigner.grid_points`: must be at least 2");
        }
        Ok(())
    }

    fn has_drive(&self) -> bool {
        self.system.as_ref().is_some_and(|s| s.drive.is_some())
    }

    /// Physical parameters from `system`, with `frame` applied.
    pub fn physical_params(&self) -> Result<Option<PhysicalParams>> {
        let Some(sys) = &self.system else {
            return Ok(None);
        };
        let mut p = match &sys.preset {
            Some(name) => preset(name).map_err(|e| anyhow!("field `system.preset`: {e}"))?,
            None => {
                let mut p = PhysicalParams::new(sys.omega_m.unwrap_or(0.0), sys.g_quad.unwrap_or(0.0))
                    .map_err(|e| anyhow!("field `system`: {e}"))?;
                p.omega_c = sys.omega_c;
                p.mass = sys.mass;
                p.drive = sys.drive.map(ComplexValue::value).unwrap_or_default();
                p.delta = sys.delta.unwrap_or(0.0);
                p.kappa = sys.kappa.unwrap_or(0.0);
                p.gamma_m = sys.gamma_m.unwrap_or(0.0);
                p.temperature = sys.temperature.unwrap_or(0.0);
                p
            }
        };
        if let Some(target) = &self.frame {
            let alpha_sq = target.alpha * target.alpha;
            let omega_c = match (target.omega_c, target.omega_c_per_g0) {
                (Some(w), _) => w,
                (None, Some(k)) => {
                    let g_eff =
                        mech_sim_core::model::effective_coupling(p.omega_m, p.g_quad, alpha_sq);
                    k * g_eff * target.alpha
                }
                (None, None) => unreachable!("validated"),
            };
            let mut t = PhysicalParams::for_target_frame(p.omega_m, p.g_quad, target.alpha, omega_c, p.kappa)
                .map_err(|e| anyhow!("field `frame`: {e}"))?;
            t.omega_c = p.omega_c;
            t.mass = p.mass;
            t.gamma_m = p.gamma_m;
            t.temperature = p.temperature;
            p = t;
        }
        p.validate().map_err(|e| anyhow!("field `system`: {e}"))?;
        Ok(Some(p))
    }

    /// Frame rates in the configured time unit.
    pub fn resolve_frame(&self) -> Result<ResolvedFrame> {
        let params = self.physical_params()?;
        let (rates, frame) = match (&self.rates, &params) {
            (Some(r), _) => (
                FrameRates::new(r.omega_c, r.omega_m, r.g0, r.g)
                    .map_err(|e| anyhow!("field `rates`: {e}"))?,
                None,
            ),
            (None, Some(p)) => {
                let f = solve_frame(p).map_err(|e| anyhow!("mean-field solve: {e}"))?;
                if let Some(target) = &self.frame {
                    if (f.alpha_abs() - target.alpha).abs() > 1e-9 * target.alpha.max(1.0) {
                        bail!(
                            "field `frame`: mean field converged to |alpha| = {} instead of the target {}",
                            f.alpha_abs(),
                            target.alpha
                        );
                    }
                }
                (f.rates(), Some(f))
            }
            (None, None) => bail!("config needs either `rates` or `system`"),
        };
        let (rates, rate_unit) = match self.run.time_unit {
            TimeUnit::Seconds => (rates, 1.0),
            TimeUnit::InverseOmegaC => {
                if rates.omega_c == 0.0 {
                    bail!("field `run.time_unit`: Omega_c is zero, cannot scale by it");
                }
                let unit = rates.omega_c.abs();
                (
                    rates.in_units_of(unit).map_err(|e| anyhow!("{e}"))?,
                    unit,
                )
            }
        };
        Ok(ResolvedFrame {
            rates,
            params,
            frame,
            rate_unit,
            time_unit: self.run.time_unit,
        })
    }

    pub fn space(&self) -> Result<ModeSpace> {
        ModeSpace::new(self.space.n_a, self.space.n_b).map_err(|e| anyhow!("field `space`: {e}"))
    }

    pub fn initial_state(&self, space: &ModeSpace) -> Result<PureState> {
        let psi = match &self.run.initial {
            InitialState::Vacuum => PureState::fock(space, 0, 0),
            InitialState::Fock { j, k } => PureState::fock(space, *j, *k),
            InitialState::Coherent { alpha_a, alpha_b } => {
                coherent_state(alpha_a.value(), space.n_a).and_then(|a| {
                    coherent_state(alpha_b.value(), space.n_b).map(|b| PureState::product(&a, &b))
                })
            }
        };
        psi.map_err(|e| anyhow!("field `run.initial`: {e}"))
    }

    pub fn t_max(&self, frame: &ResolvedFrame) -> f64 {
        self.run.t_max.unwrap_or_else(|| frame.default_t_max())
    }

    pub fn snapshot_times(&self, frame: &ResolvedFrame) -> Vec<f64> {
        self.wigner
            .times
            .clone()
            .unwrap_or_else(|| frame.default_snapshots())
    }
}

/// Sets `a.b.c = value` in `doc`, creating intermediate tables. The value is
/// parsed as a TOML literal and kept as a string when that fails.
pub fn apply_override(doc: &mut toml::Table, entry: &str) -> Result<()> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{entry}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty segment");
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for part in path {
        let slot = table
            .entry((*part).to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = slot
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
    }
    if matches!(table.get(*last), Some(toml::Value::Table(_))) {
        bail!("override `{key}` targets a table, not a scalar");
    }
    table.insert((*last).to_owned(), value);
    Ok(())
}
