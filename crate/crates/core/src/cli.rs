//! Command-line front end: TOML run files, simulations, stability charts,
//! resonance search and figure data.
//!
//! Every command accepts `--config PATH` plus repeated `--set section.key=value`
//! overrides, applied to the parsed file before validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{integrate_moments, uniform_samples, Sample};
use crate::error::{config, Error, Result};
use crate::floquet::{
    growth_rate, optimize_resonance, stability_chart, Axis, Bound, ChartFamily, OptimizeFamily,
    OptimizeOptions,
};
use crate::gaussian::{bath_occupation, thermal_state, BathParams};
use crate::modulation::{
    first_resonance_period, resonant_sinusoidal, Profile, RectangularModulation, SampledModulation,
    SinusoidalModulation,
};
use crate::observables::{
    logneg_closed_at, occurrence_time, photon_number_closed_at, scenario_occupation,
    ClosedFormParams,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "parametric-ring", version, about = "Entangled photon pairs from a modulated ring resonator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the moment equations and write observables over time.
    Simulate(CommonArgs),
    /// Scan the growth rate over a two-parameter grid.
    Chart(CommonArgs),
    /// Write the data behind one of the standard figures.
    Figures {
        which: Figure,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Search for the strongest parametric resonance within bounds.
    Optimize(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (directory for `figures`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Override a config value, e.g. `--set bath.gamma=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    fn name(&self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration.

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub modulation: Option<ModulationConfig>,
    #[serde(default)]
    pub bath: BathConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
    pub chart: Option<ChartConfig>,
    pub optimize: Option<OptimizeConfig>,
    #[serde(default)]
    pub figures: FiguresConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModulationConfig {
    /// Either explicit `f1, f2, t1, t2`, or `ratio` and `period` with
    /// segment phase `phase` (default π/2, the strongest resonance).
    Rectangular {
        f1: Option<f64>,
        f2: Option<f64>,
        t1: Option<f64>,
        t2: Option<f64>,
        ratio: Option<f64>,
        period: Option<f64>,
        phase: Option<f64>,
    },
    /// `f² = f0²(1 − h sin(2πt/period))`; `period` defaults to `π/f0`.
    Sinusoidal { f0: f64, h: f64, period: Option<f64> },
    Sampled { period: f64, samples: Vec<f64> },
}

impl ModulationConfig {
    pub fn profile(&self) -> Result<Profile> {
        Ok(match self {
            ModulationConfig::Rectangular {
                f1,
                f2,
                t1,
                t2,
                ratio,
                period,
                phase,
            } => match (f1, f2, t1, t2, ratio, period) {
                (Some(f1), Some(f2), Some(t1), Some(t2), None, None) => {
                    RectangularModulation::new(*f1, *f2, *t1, *t2)?.into()
                }
                (None, None, None, None, Some(r), Some(p)) => {
                    RectangularModulation::with_segment_phase(*r, phase.unwrap_or(PI / 2.0), *p)?.into()
                }
                _ => {
                    return config(
                        "rectangular modulation needs either f1, f2, t1, t2 or ratio and period",
                    )
                }
            },
            ModulationConfig::Sinusoidal { f0, h, period } => {
                let period = period.unwrap_or_else(|| first_resonance_period(*f0));
                if !(period > 0.0) {
                    return config(format!("period must be > 0, got {period}"));
                }
                SinusoidalModulation::new(*f0, *h, 2.0 * PI / period)?.into()
            }
            ModulationConfig::Sampled { period, samples } => {
                SampledModulation::new(*period, samples.clone())?.into()
            }
        })
    }
}

/// Either `nbar` directly or the `radius`/`index`/`temperature` triple.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(default)]
    pub gamma: f64,
    pub nbar: Option<f64>,
    pub radius: Option<f64>,
    pub index: Option<f64>,
    pub temperature: Option<f64>,
}

impl BathConfig {
    pub fn params(&self) -> Result<BathParams> {
        let nbar = match (self.nbar, self.radius, self.index, self.temperature) {
            (Some(n), None, None, None) => n,
            (None, Some(r), Some(i), Some(t)) => scenario_occupation(r, i, t)?.nbar,
            (None, None, None, None) => 0.0,
            _ => return config("bath needs either nbar or all of radius, index, temperature"),
        };
        BathParams::new(self.gamma, nbar).map_err(as_config)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Thermal occupation of the initial state; defaults to the bath's.
    pub nbar: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_periods: usize,
    pub samples_per_period: usize,
    /// Largest integrator step; defaults to one radian of the fastest rotation.
    pub dt_max: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_periods: 100,
            samples_per_period: 1,
            dt_max: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub family: String,
    pub f0: Option<f64>,
    pub period: Option<f64>,
    pub axis1: RangeConfig,
    pub axis2: RangeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BoundConfig {
    Fixed(f64),
    Range([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub family: OptimizeFamily,
    #[serde(default = "default_budget")]
    pub budget: usize,
    pub grid_per_axis: Option<usize>,
    pub bounds: toml::Table,
}

fn default_budget() -> usize {
    OptimizeOptions::default().budget
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiguresConfig {
    pub f0: f64,
    pub h: f64,
    pub gammas: Vec<f64>,
    /// Fig. 2 occupation (bath and initial state).
    pub nbar: f64,
    pub n_periods: usize,
    /// Fig. 3 temperatures in units of `ħw/k_B`.
    pub thetas: Vec<f64>,
    /// Fig. 4 horizon in units of `1/ν`.
    pub nu_t_max: f64,
    pub fig4_stride: usize,
}

impl Default for FiguresConfig {
    fn default() -> Self {
        Self {
            f0: PI,
            h: 0.01,
            gammas: vec![0.0, 0.02, 0.05],
            nbar: 1.0,
            n_periods: 2000,
            thetas: (1..=40).map(|k| 0.125 * k as f64).collect(),
            nu_t_max: 30.0,
            fig4_stride: 10,
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

/// Parses `text` (empty for no file), applies `overrides` and validates.
pub fn load_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not KEY=VALUE")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty key in {item:?}")))?;
    let mut node = table;
    for part in parts {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{part} in {key} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

// ---------------------------------------------------------------------------
// Output helpers.

/// Round-trippable (17 significant digits) decimal; `NaN` for NaN.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn json_num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
}

fn json_opt(v: Option<f64>) -> serde_json::Value {
    v.map(json_num).unwrap_or(serde_json::Value::Null)
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

/// One output row of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    pub sample: Sample,
    /// Closed-form total photon number `⟨N+1⟩ − 1`, stroboscopic rows only.
    pub n_closed: Option<f64>,
    pub en_closed: Option<f64>,
}

/// Closed forms apply to resonant rectangular and sinusoidal profiles started
/// in equilibrium with the bath.
fn closed_form_params(profile: &Profile, bath: &BathParams, initial_nbar: f64) -> Option<ClosedFormParams> {
    if initial_nbar != bath.nbar {
        return None;
    }
    ClosedFormParams::for_profile(profile, bath).ok()
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<SimulationRow>> {
    let modulation = cfg.modulation.as_ref().ok_or_else(|| Error::Config("missing [modulation] section".into()))?;
    let profile = modulation.profile().map_err(as_config)?;
    let bath = cfg.bath.params()?;
    let initial_nbar = cfg.initial.nbar.unwrap_or(bath.nbar);
    let state0 = thermal_state(initial_nbar).map_err(as_config)?;
    let run = &cfg.run;
    if run.samples_per_period == 0 {
        return config("samples_per_period must be >= 1");
    }
    let period = profile.period();
    let dt_max = run.dt_max.unwrap_or(1.0 / profile.max_frequency());
    if !(dt_max > 0.0) {
        return config(format!("dt_max must be > 0, got {dt_max}"));
    }
    let times = uniform_samples(period, run.n_periods, run.samples_per_period);
    let t_end = run.n_periods as f64 * period;
    let result = integrate_moments(&state0, &profile, &bath, t_end, dt_max, &times)?;
    let closed = closed_form_params(&profile, &bath, initial_nbar);
    Ok(result
        .samples
        .into_iter()
        .enumerate()
        .map(|(k, sample)| {
            let stroboscopic = k % run.samples_per_period == 0;
            let (n_closed, en_closed) = match (&closed, stroboscopic) {
                (Some(p), true) => (
                    Some(photon_number_closed_at(p, sample.t) - 1.0),
                    logneg_closed_at(p, sample.t).ok(),
                ),
                _ => (None, None),
            };
            SimulationRow {
                sample,
                n_closed,
                en_closed,
            }
        })
        .collect())
}

pub const SIMULATE_COLUMNS: [&str; 8] = [
    "t",
    "N_total",
    "E_N",
    "E_max",
    "purity",
    "E_N_over_E_max",
    "N_closed",
    "EN_closed",
];

pub fn simulation_csv(rows: &[SimulationRow]) -> String {
    csv_table(
        &SIMULATE_COLUMNS,
        rows.iter().map(|r| {
            let o = &r.sample.observables;
            vec![
                fmt_num(r.sample.t),
                fmt_num(o.photon_number),
                fmt_num(o.log_negativity),
                fmt_num(o.max_entanglement),
                fmt_num(o.purity),
                fmt_num(o.entanglement_ratio()),
                fmt_opt(r.n_closed),
                fmt_opt(r.en_closed),
            ]
        }),
    )
}

pub fn simulation_json(rows: &[SimulationRow]) -> String {
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let o = &r.sample.observables;
            let s = &r.sample.state;
            let cov: Vec<Vec<serde_json::Value>> = (0..4)
                .map(|i| (0..4).map(|j| json_num(s.cov[(i, j)])).collect())
                .collect();
            json!({
                "t": json_num(r.sample.t),
                "N_total": json_num(o.photon_number),
                "E_N": json_num(o.log_negativity),
                "E_max": json_num(o.max_entanglement),
                "purity": json_num(o.purity),
                "E_N_over_E_max": json_num(o.entanglement_ratio()),
                "N_closed": json_opt(r.n_closed),
                "EN_closed": json_opt(r.en_closed),
                "state": {
                    "mean": s.mean.iter().map(|v| json_num(*v)).collect::<Vec<_>>(),
                    "cov": cov,
                },
            })
        })
        .collect();
    json_text(&json!({ "schema_version": SCHEMA_VERSION, "rows": rows }))
}

// ---------------------------------------------------------------------------
// chart

pub fn chart(cfg: &RunConfig) -> Result<crate::floquet::StabilityChart> {
    let c = cfg.chart.as_ref().ok_or_else(|| Error::Config("missing [chart] section".into()))?;
    let family = match c.family.as_str() {
        "sinusoidal" => ChartFamily::Sinusoidal {
            f0: c.f0.ok_or_else(|| Error::Config("sinusoidal chart needs f0".into()))?,
        },
        "rectangular" => ChartFamily::Rectangular {
            period: c.period.unwrap_or(1.0),
        },
        other => return config(format!("unknown chart family {other:?}")),
    };
    let (n1, n2) = family.axis_names();
    let axis = |name: &str, r: &RangeConfig| {
        if r.n >= 2 && !(r.lo < r.hi) {
            return config(format!("axis {name} needs lo < hi"));
        }
        Axis::linspace(name, r.lo, r.hi, r.n)
    };
    stability_chart(family, axis(n1, &c.axis1)?, axis(n2, &c.axis2)?).map_err(as_config)
}

pub fn chart_csv(chart: &crate::floquet::StabilityChart) -> String {
    csv_table(
        &[&chart.axis1.name, &chart.axis2.name, "re_nu"],
        chart.rows().map(|(a, b, v)| vec![fmt_num(a), fmt_num(b), fmt_num(v)]),
    )
}

pub fn chart_json(chart: &crate::floquet::StabilityChart) -> String {
    let rows: Vec<serde_json::Value> = chart
        .rows()
        .map(|(a, b, v)| json!([json_num(a), json_num(b), json_num(v)]))
        .collect();
    json_text(&json!({
        "schema_version": SCHEMA_VERSION,
        "family": chart.family,
        "columns": [chart.axis1.name, chart.axis2.name, "re_nu"],
        "rows": rows,
    }))
}

// ---------------------------------------------------------------------------
// optimize

pub fn optimize(cfg: &RunConfig) -> Result<crate::floquet::OptimizationResult> {
    let o = cfg.optimize.as_ref().ok_or_else(|| Error::Config("missing [optimize] section".into()))?;
    let bounds = o
        .bounds
        .iter()
        .map(|(name, v)| {
            let b: BoundConfig = v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("bound {name}: {e}")))?;
            Ok(match b {
                BoundConfig::Fixed(x) => Bound::fixed(name.clone(), x),
                BoundConfig::Range([lo, hi]) => Bound::new(name.clone(), lo, hi),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let options = OptimizeOptions {
        budget: o.budget,
        grid_per_axis: o.grid_per_axis,
    };
    optimize_resonance(o.family, &bounds, options).map_err(as_config)
}

pub fn optimization_json(r: &crate::floquet::OptimizationResult) -> String {
    let params: serde_json::Map<String, serde_json::Value> =
        r.params.iter().map(|(k, v)| (k.clone(), json_num(*v))).collect();
    json_text(&json!({
        "schema_version": SCHEMA_VERSION,
        "family": r.family,
        "best_params": params,
        "nu": json_num(r.nu),
        "evaluations": r.evaluations,
    }))
}

pub fn optimization_csv(r: &crate::floquet::OptimizationResult) -> String {
    let mut rows: Vec<Vec<String>> = r.params.iter().map(|(k, v)| vec![k.clone(), fmt_num(*v)]).collect();
    rows.push(vec!["nu".into(), fmt_num(r.nu)]);
    rows.push(vec!["evaluations".into(), r.evaluations.to_string()]);
    csv_table(&["name", "value"], rows)
}

// ---------------------------------------------------------------------------
// figures

/// Tidy table: column names plus rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn csv(&self) -> String {
        csv_table(&self.columns, self.rows.iter().map(|r| r.iter().map(|v| fmt_num(*v)).collect()))
    }

    pub fn json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| serde_json::Value::Array(r.iter().map(|v| json_num(*v)).collect()))
            .collect();
        json_text(&json!({ "schema_version": SCHEMA_VERSION, "columns": self.columns, "rows": rows }))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn figure_profile(f: &FiguresConfig) -> Result<Profile> {
    Ok(resonant_sinusoidal(f.f0, f.h).map_err(as_config)?.into())
}

/// `⟨N+1⟩/(2n̄+1)` against time per γ, simulated and closed form.
pub fn figure2(f: &FiguresConfig) -> Result<Table> {
    let profile = figure_profile(f)?;
    let dt_max = 1.0 / profile.max_frequency();
    let times = uniform_samples(profile.period(), f.n_periods, 1);
    let t_end = f.n_periods as f64 * profile.period();
    let series = f
        .gammas
        .par_iter()
        .map(|&gamma| -> Result<Vec<Vec<f64>>> {
            let bath = BathParams::new(gamma, f.nbar).map_err(as_config)?;
            let res = integrate_moments(&thermal_state(f.nbar)?, &profile, &bath, t_end, dt_max, &times)?;
            let closed = ClosedFormParams::for_profile(&profile, &bath)?;
            let norm = 2.0 * f.nbar + 1.0;
            Ok(res
                .samples
                .iter()
                .map(|s| {
                    vec![
                        gamma,
                        s.t,
                        (s.observables.photon_number + 1.0) / norm,
                        photon_number_closed_at(&closed, s.t) / norm,
                    ]
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        columns: vec!["gamma", "t", "N_plus_1_normalized", "N_plus_1_normalized_closed"],
        rows: series.into_iter().flatten().collect(),
    })
}

/// Onset time of entanglement against temperature `θ = k_B𝒯/(ħw)` per γ.
pub fn figure3(f: &FiguresConfig) -> Result<Table> {
    let profile = figure_profile(f)?;
    let nu = growth_rate(&profile)?;
    let points: Vec<(f64, f64)> = f
        .gammas
        .iter()
        .flat_map(|&g| f.thetas.iter().map(move |&th| (g, th)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(gamma, theta)| -> Result<Vec<f64>> {
            if !(theta > 0.0) {
                return config(format!("temperatures must be > 0, got {theta}"));
            }
            let nbar = bath_occupation(1.0 / theta).map_err(as_config)?;
            let params = ClosedFormParams::new(nu, gamma, nbar, profile.period(), shape_of(&profile)?)?;
            Ok(vec![gamma, theta, nbar, occurrence_time(&params)?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        columns: vec!["gamma", "theta", "nbar", "t_occurrence"],
        rows,
    })
}

fn shape_of(profile: &Profile) -> Result<crate::observables::Shape> {
    Ok(ClosedFormParams::for_profile(profile, &BathParams::new(0.0, 0.0)?)?.shape)
}

/// `E_N/E_max` against `νt` per γ at fixed occupation.
pub fn figure4(f: &FiguresConfig) -> Result<Table> {
    let profile = figure_profile(f)?;
    let nu = growth_rate(&profile)?;
    let period = profile.period();
    let n_periods = (f.nu_t_max / (nu * period)).ceil() as usize;
    let stride = f.fig4_stride.max(1);
    let times: Vec<f64> = (0..=n_periods)
        .filter(|k| k % stride == 0 || *k == n_periods)
        .map(|k| k as f64 * period)
        .collect();
    let t_end = n_periods as f64 * period;
    let dt_max = 1.0 / profile.max_frequency();
    let series = f
        .gammas
        .par_iter()
        .map(|&gamma| -> Result<Vec<Vec<f64>>> {
            let bath = BathParams::new(gamma, f.nbar).map_err(as_config)?;
            let res = integrate_moments(&thermal_state(f.nbar)?, &profile, &bath, t_end, dt_max, &times)?;
            let closed = ClosedFormParams::for_profile(&profile, &bath)?;
            res.samples
                .iter()
                .map(|s| {
                    let o = &s.observables;
                    let en_closed = logneg_closed_at(&closed, s.t)?;
                    let emax_closed = photon_number_closed_at(&closed, s.t).log2();
                    Ok(vec![
                        gamma,
                        s.t,
                        nu * s.t,
                        o.log_negativity,
                        o.max_entanglement,
                        o.entanglement_ratio(),
                        if emax_closed > 0.0 { en_closed / emax_closed } else { f64::NAN },
                    ])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        columns: vec!["gamma", "t", "nu_t", "E_N", "E_max", "ratio", "ratio_closed"],
        rows: series.into_iter().flatten().collect(),
    })
}

pub fn figure(which: Figure, f: &FiguresConfig) -> Result<Table> {
    match which {
        Figure::Fig2 => figure2(f),
        Figure::Fig3 => figure3(f),
        Figure::Fig4 => figure4(f),
    }
}

// ---------------------------------------------------------------------------
// Entry point.

fn read_config(args: &CommonArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    load_config(&text, &args.overrides)
}

fn resolve_output(args: &CommonArgs, cfg: &RunConfig, default: Format) -> (Option<PathBuf>, Format) {
    let path = args.out.clone().or_else(|| cfg.output.path.clone());
    let format = args.format.or(cfg.output.format).unwrap_or(default);
    (path, format)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    pool.install(f)
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = read_config(&args)?;
            let (path, format) = resolve_output(&args, &cfg, Format::Csv);
            let rows = with_threads(args.threads, || simulate(&cfg))?;
            let text = match format {
                Format::Csv => simulation_csv(&rows),
                Format::Json => simulation_json(&rows),
            };
            write_output(path.as_deref(), &text)
        }
        Command::Chart(args) => {
            let cfg = read_config(&args)?;
            let (path, format) = resolve_output(&args, &cfg, Format::Csv);
            let chart = with_threads(args.threads, || chart(&cfg))?;
            let text = match format {
                Format::Csv => chart_csv(&chart),
                Format::Json => chart_json(&chart),
            };
            write_output(path.as_deref(), &text)
        }
        Command::Optimize(args) => {
            let cfg = read_config(&args)?;
            let (path, format) = resolve_output(&args, &cfg, Format::Json);
            let result = with_threads(args.threads, || optimize(&cfg))?;
            let text = match format {
                Format::Json => optimization_json(&result),
                Format::Csv => optimization_csv(&result),
            };
            write_output(path.as_deref(), &text)
        }
        Command::Figures { which, common } => {
            let cfg = read_config(&common)?;
            let (dir, format) = resolve_output(&common, &cfg, Format::Csv);
            let table = with_threads(common.threads, || figure(which, &cfg.figures))?;
            let (text, ext) = match format {
                Format::Csv => (table.csv(), "csv"),
                Format::Json => (table.json(), "json"),
            };
            match dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)
                        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
                    write_output(Some(&dir.join(format!("{}.{ext}", which.name()))), &text)
                }
                None => write_output(None, &text),
            }
        }
    }
}
