//! Time-value arithmetic: discount factors, present values, annualization of
//! itemized cash flows and their aggregation into yearly totals.

use std::collections::HashSet;
use std::num::NonZeroU32;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("discount rate must be greater than -1, got {0}")]
    InvalidRate(f64),
    #[error("base year {0} outside [1900, 2200]")]
    InvalidBaseYear(i32),
    #[error("time offset must be a non-negative finite number of years, got {0}")]
    NegativeTime(f64),
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
}

/// Annual discount rate anchored at a base year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountModel {
    rate: f64,
    base_year: i32,
}

impl DiscountModel {
    pub const DEFAULT_RATE: f64 = 0.05;

    pub fn new(rate: f64, base_year: i32) -> Result<Self, LedgerError> {
        let model = DiscountModel { rate, base_year };
        model.validate()?;
        Ok(model)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn base_year(&self) -> i32 {
        self.base_year
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self, LedgerError> {
        DiscountModel::new(rate, self.base_year)
    }

    /// Re-checks invariants on a deserialized model.
    pub fn validate(&self) -> Result<(), LedgerError> {
        if !(self.rate.is_finite() && self.rate > -1.0) {
            return Err(LedgerError::InvalidRate(self.rate));
        }
        if !(1900..=2200).contains(&self.base_year) {
            return Err(LedgerError::InvalidBaseYear(self.base_year));
        }
        Ok(())
    }
}

/// `(1 + r)^-t`.
pub fn discount_factor(model: &DiscountModel, t: f64) -> Result<f64, LedgerError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(LedgerError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 + model.rate).powf(-t))
}

pub fn present_value(amount: Money, model: &DiscountModel, t: f64) -> Result<Money, LedgerError> {
    Ok(amount * discount_factor(model, t)?)
}

/// How a raw amount maps onto a per-year value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TimingProfile {
    /// One-off capital outlay spread straight-line over the asset lifespan.
    OneOffAnnualized { lifespan_years: NonZeroU32 },
    /// Paid every year, starting in the base year.
    RecurringImmediate,
    /// Paid every year, first payment `offset_years` after the base year.
    RecurringDeferred { offset_years: NonZeroU32 },
    /// Paid once every `period_years`, averaged per year.
    PeriodicAveraged { period_years: NonZeroU32 },
}

impl TimingProfile {
    pub fn one_off(lifespan_years: u32) -> Option<Self> {
        NonZeroU32::new(lifespan_years).map(|lifespan_years| Self::OneOffAnnualized { lifespan_years })
    }

    pub fn deferred(offset_years: u32) -> Option<Self> {
        NonZeroU32::new(offset_years).map(|offset_years| Self::RecurringDeferred { offset_years })
    }

    pub fn periodic(period_years: u32) -> Option<Self> {
        NonZeroU32::new(period_years).map(|period_years| Self::PeriodicAveraged { period_years })
    }

    pub fn is_capital(&self) -> bool {
        matches!(self, TimingProfile::OneOffAnnualized { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Cost,
    Benefit,
}

/// One itemized cost or benefit, already expressed in base currency and year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashFlowItem {
    pub id: String,
    pub kind: FlowKind,
    pub category: String,
    pub raw_amount: Money,
    pub timing: TimingProfile,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_value_2019: Option<Money>,
}

/// Per-year value of an item under the table conventions.
pub fn annualized_value(item: &CashFlowItem, model: &DiscountModel) -> Money {
    let raw = item.raw_amount;
    match item.timing {
        TimingProfile::OneOffAnnualized { lifespan_years } => raw / f64::from(lifespan_years.get()),
        TimingProfile::RecurringImmediate => raw,
        TimingProfile::RecurringDeferred { offset_years } => {
            // offset is a positive integer, so the factor cannot fail
            raw * (1.0 + model.rate).powf(-f64::from(offset_years.get()))
        }
        TimingProfile::PeriodicAveraged { period_years } => raw / f64::from(period_years.get()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub pv_costs: Money,
    pub pv_benefits: Money,
}

impl Totals {
    pub fn npv(&self) -> Money {
        self.pv_benefits - self.pv_costs
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), LedgerError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(LedgerError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Sums values after sorting them, so the result does not depend on input order.
fn ordered_sum(mut values: Vec<f64>) -> Money {
    values.sort_by(f64::total_cmp);
    Money::new(values.into_iter().sum())
}

/// Annualized totals of costs and benefits.
pub fn aggregate(items: &[CashFlowItem], model: &DiscountModel) -> Result<Totals, LedgerError> {
    check_unique(items.iter().map(|i| i.id.as_str()))?;
    let side = |kind: FlowKind| {
        ordered_sum(
            items
                .iter()
                .filter(|i| i.kind == kind)
                .map(|i| annualized_value(i, model).value())
                .collect(),
        )
    };
    Ok(Totals {
        pv_costs: side(FlowKind::Cost),
        pv_benefits: side(FlowKind::Benefit),
    })
}

/// Undiscounted flows posted in one year of a horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YearFlows {
    pub costs: Money,
    pub benefits: Money,
}

impl YearFlows {
    pub fn net(&self) -> Money {
        self.benefits - self.costs
    }
}

/// Years (within `0..=horizon`) in which an item posts its raw amount.
fn posting_years(timing: TimingProfile, horizon: u32) -> Box<dyn Iterator<Item = u32>> {
    match timing {
        TimingProfile::OneOffAnnualized { .. } => Box::new(std::iter::once(0)),
        TimingProfile::RecurringImmediate => Box::new(1..=horizon),
        TimingProfile::RecurringDeferred { offset_years } => Box::new(offset_years.get()..=horizon),
        TimingProfile::PeriodicAveraged { period_years } => {
            let p = period_years.get();
            Box::new((1..=horizon / p).map(move |k| k * p))
        }
    }
}

/// Year-by-year undiscounted cash-flow schedule over `0..=horizon`.
///
/// Capital posts at year 0, recurring items in years 1..=horizon (deferred
/// items from their offset), periodic items every `period` years.
pub fn cash_flow_schedule(items: &[CashFlowItem], horizon: u32) -> Vec<YearFlows> {
    let mut years = vec![YearFlows::default(); horizon as usize + 1];
    for item in items {
        for y in posting_years(item.timing, horizon) {
            let slot = &mut years[y as usize];
            match item.kind {
                FlowKind::Cost => slot.costs += item.raw_amount,
                FlowKind::Benefit => slot.benefits += item.raw_amount,
            }
        }
    }
    years
}

/// Present value of the whole schedule, split into costs and benefits.
pub fn discounted_totals(schedule: &[YearFlows], model: &DiscountModel) -> Totals {
    let mut costs = Vec::with_capacity(schedule.len());
    let mut benefits = Vec::with_capacity(schedule.len());
    for (t, flows) in schedule.iter().enumerate() {
        let df = (1.0 + model.rate).powi(-(t as i32));
        costs.push(flows.costs.value() * df);
        benefits.push(flows.benefits.value() * df);
    }
    Totals {
        pv_costs: ordered_sum(costs),
        pv_benefits: ordered_sum(benefits),
    }
}

/// Cumulative discounted net value at the end of each year of the schedule.
pub fn cumulative_npv(schedule: &[YearFlows], model: &DiscountModel) -> Vec<Money> {
    let mut acc = Money::ZERO;
    schedule
        .iter()
        .enumerate()
        .map(|(t, flows)| {
            acc += flows.net() * (1.0 + model.rate).powi(-(t as i32));
            acc
        })
        .collect()
}
