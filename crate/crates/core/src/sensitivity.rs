//! Parameter sweeps and Monte Carlo NPV forecasting under water-volume
//! uncertainty.
//!
//! Sweep cells and Monte Carlo samples are computed in parallel but merged by
//! index, and each sample draws from its own ChaCha stream, so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Triangular, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ledger::{cash_flow_schedule, cumulative_npv, aggregate};
use crate::monetize::{Drivers, Monetization};
use crate::money::{self, Money};
use crate::scenario::{Case, ComparisonReport, EvaluationMode, EvaluationOptions, Scenario, ScenarioError, WaterVolume};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("unknown parameter path {0:?}")]
    UnknownParameter(String),
    #[error("value {value} is invalid for {target}: {reason}")]
    InvalidValue { target: String, value: f64, reason: String },
    #[error("parameter spec for {0} has no values")]
    EmptySpec(String),
    #[error("invalid uncertainty spec: {0}")]
    InvalidUncertainty(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// A parameter that can be overridden in a case.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParameterTarget {
    DiscountRate,
    CarbonPrice,
    /// Operating annual water volume (m3/yr) of every scenario that declares one.
    WaterVolume,
    /// Base-currency amount of a named item.
    ItemAmount(String),
    /// Unit-rate value inside a named item's monetization chain, in the rate's own currency.
    UnitRateValue(String),
}

impl fmt::Display for ParameterTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterTarget::DiscountRate => f.write_str("discount_rate"),
            ParameterTarget::CarbonPrice => f.write_str("carbon_price"),
            ParameterTarget::WaterVolume => f.write_str("water"),
            ParameterTarget::ItemAmount(id) => write!(f, "item:{id}"),
            ParameterTarget::UnitRateValue(id) => write!(f, "unit_rate:{id}"),
        }
    }
}

impl FromStr for ParameterTarget {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || SensitivityError::UnknownParameter(s.to_string());
        match s {
            "discount_rate" => Ok(ParameterTarget::DiscountRate),
            "carbon_price" => Ok(ParameterTarget::CarbonPrice),
            "water" | "water_volume" => Ok(ParameterTarget::WaterVolume),
            _ => match s.split_once(':') {
                Some(("item", id)) if !id.is_empty() => Ok(ParameterTarget::ItemAmount(id.into())),
                Some(("unit_rate", id)) if !id.is_empty() => Ok(ParameterTarget::UnitRateValue(id.into())),
                _ => Err(unknown()),
            },
        }
    }
}

impl Serialize for ParameterTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParameterTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub target: ParameterTarget,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub low: f64,
    pub high: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub target: ParameterTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<ValueRange>,
}

impl ParameterSpec {
    pub fn list(target: ParameterTarget, values: Vec<f64>) -> Self {
        ParameterSpec { target, values: Some(values), range: None }
    }

    pub fn range(target: ParameterTarget, low: f64, high: f64, steps: u32) -> Self {
        ParameterSpec { target, values: None, range: Some(ValueRange { low, high, steps }) }
    }

    /// Explicit values, or `steps` evenly spaced points from `low` to `high` inclusive.
    pub fn points(&self) -> Result<Vec<f64>, SensitivityError> {
        let empty = || SensitivityError::EmptySpec(self.target.to_string());
        let points = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => match r.steps {
                0 => Vec::new(),
                1 => vec![r.low],
                n => (0..n)
                    .map(|i| r.low + (r.high - r.low) * f64::from(i) / f64::from(n - 1))
                    .collect(),
            },
            _ => {
                return Err(SensitivityError::InvalidValue {
                    target: self.target.to_string(),
                    value: f64::NAN,
                    reason: "give exactly one of values or range".into(),
                })
            }
        };
        if points.is_empty() {
            return Err(empty());
        }
        Ok(points)
    }
}

fn invalid(target: &ParameterTarget, value: f64, reason: &str) -> SensitivityError {
    SensitivityError::InvalidValue {
        target: target.to_string(),
        value,
        reason: reason.into(),
    }
}

/// Applies one override to a case in place.
pub fn apply_override(case: &mut Case, o: &Override) -> Result<(), SensitivityError> {
    let v = o.value;
    if !v.is_finite() {
        return Err(invalid(&o.target, v, "not a finite number"));
    }
    match &o.target {
        ParameterTarget::DiscountRate => {
            case.context.discount = case
                .context
                .discount
                .with_rate(v)
                .map_err(|e| invalid(&o.target, v, &e.to_string()))?;
        }
        ParameterTarget::CarbonPrice => {
            if v < 0.0 {
                return Err(invalid(&o.target, v, "must be >= 0"));
            }
            case.context.carbon_price = Money::new(v);
        }
        ParameterTarget::WaterVolume => {
            if v < 0.0 {
                return Err(invalid(&o.target, v, "must be >= 0"));
            }
            let mut hit = false;
            for s in case.scenarios_mut() {
                if let Some(w) = s.annual_water_m3.as_mut() {
                    w.set_nominal(v);
                    hit = true;
                }
            }
            if !hit {
                return Err(SensitivityError::UnknownParameter(o.target.to_string()));
            }
        }
        ParameterTarget::ItemAmount(id) => {
            if v < 0.0 {
                return Err(invalid(&o.target, v, "must be >= 0"));
            }
            let mut hit = false;
            for item in case.scenarios_mut().into_iter().flat_map(|s| s.items.iter_mut()).filter(|i| &i.id == id) {
                item.raw_amount = Some(Money::new(v));
                item.monetization = None;
                item.currency = None;
                item.price_year = None;
                item.scales_with = None;
                hit = true;
            }
            if !hit {
                return Err(SensitivityError::UnknownParameter(o.target.to_string()));
            }
        }
        ParameterTarget::UnitRateValue(id) => {
            if v < 0.0 {
                return Err(invalid(&o.target, v, "must be >= 0"));
            }
            let mut hit = false;
            for item in case.scenarios_mut().into_iter().flat_map(|s| s.items.iter_mut()).filter(|i| &i.id == id) {
                if let Some(rate) = item.monetization.as_mut().and_then(Monetization::rate_mut) {
                    rate.value = Money::new(v);
                    hit = true;
                }
            }
            if !hit {
                return Err(SensitivityError::UnknownParameter(o.target.to_string()));
            }
        }
    }
    Ok(())
}

pub fn with_overrides(case: &Case, overrides: &[Override]) -> Result<Case, SensitivityError> {
    let mut out = case.clone();
    for o in overrides {
        apply_override(&mut out, o)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub values: Vec<f64>,
    pub comparison: ComparisonReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameters: Vec<ParameterTarget>,
    pub cells: Vec<SweepCell>,
}

/// Evaluates the case over the cross product of the specs (last spec varies fastest).
pub fn sweep(case: &Case, specs: &[ParameterSpec], opts: &EvaluationOptions) -> Result<SweepResult, SensitivityError> {
    let axes = specs.iter().map(ParameterSpec::points).collect::<Result<Vec<_>, _>>()?;
    // Surface unknown paths and out-of-domain values before fanning out.
    for (spec, points) in specs.iter().zip(&axes) {
        for &value in points {
            apply_override(&mut case.clone(), &Override { target: spec.target.clone(), value })?;
        }
    }
    let n: usize = axes.iter().map(Vec::len).product();
    let cells = (0..n)
        .into_par_iter()
        .map(|index| {
            let mut rest = index;
            let mut values = vec![0.0; axes.len()];
            for (k, axis) in axes.iter().enumerate().rev() {
                values[k] = axis[rest % axis.len()];
                rest /= axis.len();
            }
            let overrides: Vec<Override> = specs
                .iter()
                .zip(&values)
                .map(|(s, &value)| Override { target: s.target.clone(), value })
                .collect();
            let comparison = with_overrides(case, &overrides)?.compare(opts)?;
            Ok(SweepCell { values, comparison })
        })
        .collect::<Result<Vec<_>, SensitivityError>>()?;
    Ok(SweepResult {
        parameters: specs.iter().map(|s| s.target.clone()).collect(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over `[min, max]`.
    #[default]
    Uniform,
    /// Triangular over `[min, max]` with mode at the nominal volume.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    #[serde(default)]
    pub distribution: Distribution,
    pub samples: u32,
    pub seed: u64,
    /// Overrides the scenario's declared water bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_range: Option<WaterVolume>,
}

impl UncertaintySpec {
    pub fn validate(&self) -> Result<(), SensitivityError> {
        if self.samples == 0 {
            return Err(SensitivityError::InvalidUncertainty("samples must be >= 1".into()));
        }
        if let Some(w) = &self.water_range {
            if !w.is_valid() {
                return Err(SensitivityError::InvalidUncertainty(
                    "water range needs 0 <= min <= nominal <= max".into(),
                ));
            }
        }
        Ok(())
    }

    fn draw(&self, bounds: &WaterVolume, rng: &mut ChaCha8Rng) -> f64 {
        if bounds.min == bounds.max {
            return bounds.min;
        }
        match self.distribution {
            Distribution::Uniform => Uniform::new_inclusive(bounds.min, bounds.max)
                .expect("bounds checked")
                .sample(rng),
            Distribution::Triangular => Triangular::new(bounds.min, bounds.max, bounds.nominal)
                .expect("bounds checked")
                .sample(rng),
        }
    }

    /// Expected volume under the distribution.
    pub fn mean_volume(&self, bounds: &WaterVolume) -> f64 {
        match self.distribution {
            Distribution::Uniform => 0.5 * (bounds.min + bounds.max),
            Distribution::Triangular => (bounds.min + bounds.nominal + bounds.max) / 3.0,
        }
    }
}

/// Cumulative NPV by year, `0..=horizon`, for fixed driver values.
pub fn npv_path(
    s: &Scenario,
    ctx: &crate::monetize::ConversionContext,
    horizon: u32,
    mode: EvaluationMode,
    drivers: &Drivers,
) -> Result<Vec<Money>, SensitivityError> {
    let items = s.resolve_counted(ctx, drivers)?;
    Ok(match mode {
        EvaluationMode::HorizonDcf => cumulative_npv(&cash_flow_schedule(&items, horizon), &ctx.discount),
        EvaluationMode::Annualized => {
            let npv = aggregate(&items, &ctx.discount).map_err(ScenarioError::from)?.npv();
            (0..=horizon).map(|t| npv * f64::from(t)).collect()
        }
    })
}

/// Raw Monte Carlo output: sampled volumes and one NPV path per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub volumes: Vec<Option<f64>>,
    pub paths: Vec<Vec<Money>>,
}

impl Simulation {
    pub fn terminal(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.last().map_or(0.0, |m| m.value())).collect()
    }
}

pub fn simulate(
    s: &Scenario,
    ctx: &crate::monetize::ConversionContext,
    horizon: u32,
    mode: EvaluationMode,
    u: &UncertaintySpec,
) -> Result<Simulation, SensitivityError> {
    u.validate()?;
    if horizon == 0 {
        return Err(SensitivityError::InvalidUncertainty("horizon must be >= 1".into()));
    }
    s.validate()?;
    let bounds = u.water_range.or(s.annual_water_m3);
    let draws = (0..u.samples)
        .into_par_iter()
        .map(|i| {
            let volume = bounds.map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(u.seed);
                rng.set_stream(u64::from(i));
                u.draw(&b, &mut rng)
            });
            let drivers = Drivers { annual_water: volume.or(s.drivers().annual_water) };
            npv_path(s, ctx, horizon, mode, &drivers).map(|p| (volume, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (volumes, paths) = draws.into_iter().unzip();
    Ok(Simulation { volumes, paths })
}

/// Cumulative NPV per year with its sample mean and empirical 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBand {
    pub scenario_id: String,
    pub mode: EvaluationMode,
    pub samples: u32,
    pub years: Vec<u32>,
    #[serde(with = "money::cents_vec")]
    pub mean: Vec<Money>,
    #[serde(with = "money::cents_vec")]
    pub lower95: Vec<Money>,
    #[serde(with = "money::cents_vec")]
    pub upper95: Vec<Money>,
}

/// 1-based nearest rank for quantile `p` of `n` sorted values.
fn nearest_rank(p: f64, n: usize) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

impl ForecastBand {
    pub fn from_paths(scenario_id: &str, mode: EvaluationMode, paths: &[Vec<Money>]) -> Self {
        let n = paths.len();
        let len = paths.first().map_or(0, Vec::len);
        let mut band = ForecastBand {
            scenario_id: scenario_id.into(),
            mode,
            samples: n as u32,
            years: (0..len as u32).collect(),
            mean: Vec::with_capacity(len),
            lower95: Vec::with_capacity(len),
            upper95: Vec::with_capacity(len),
        };
        if n == 0 {
            return band;
        }
        let lo_rank = nearest_rank(0.025, n);
        let hi_rank = nearest_rank(0.975, n);
        let mut column = vec![0.0; n];
        for t in 0..len {
            for (slot, path) in column.iter_mut().zip(paths) {
                *slot = path[t].value();
            }
            let mut mean = column.iter().sum::<f64>() / n as f64;
            column.sort_by(f64::total_cmp);
            let (min, max) = (column[0], column[n - 1]);
            if min == max {
                mean = min;
            }
            let lower = column[lo_rank - 1].min(mean);
            let upper = column[hi_rank - 1].max(mean);
            band.mean.push(Money::new(mean));
            band.lower95.push(Money::new(lower));
            band.upper95.push(Money::new(upper));
        }
        band
    }

    pub fn terminal_mean(&self) -> Money {
        self.mean.last().copied().unwrap_or_default()
    }
}

/// Forecasts cumulative NPV over `0..=horizon`.
///
/// Without an uncertainty spec the band collapses onto the nominal path.
pub fn forecast_npv(
    s: &Scenario,
    ctx: &crate::monetize::ConversionContext,
    horizon: u32,
    mode: EvaluationMode,
    u: Option<&UncertaintySpec>,
) -> Result<ForecastBand, SensitivityError> {
    match u {
        Some(u) => {
            let sim = simulate(s, ctx, horizon, mode, u)?;
            Ok(ForecastBand::from_paths(&s.id, mode, &sim.paths))
        }
        None => {
            if horizon == 0 {
                return Err(SensitivityError::InvalidUncertainty("horizon must be >= 1".into()));
            }
            s.validate()?;
            let path = npv_path(s, ctx, horizon, mode, &s.drivers())?;
            Ok(ForecastBand::from_paths(&s.id, mode, &[path]))
        }
    }
}
