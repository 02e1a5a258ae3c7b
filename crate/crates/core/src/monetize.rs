//! Conversion of source-currency prices and physical quantities into
//! base-year euros: rebasing, unit-rate valuation, excavation carbon costing
//! and pollutant-removal valuation. Also home of [`ItemRecord`], the dataset
//! form of a cash-flow item before its amount is resolved.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{CashFlowItem, DiscountModel, FlowKind, LedgerError, TimingProfile};
use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonetizeError {
    #[error("no rebase factor for {currency} {year}")]
    MissingRebaseFactor { currency: String, year: i32 },
    #[error("unit mismatch: rate is {rate}, quantity is {quantity}")]
    UnitMismatch { rate: RateUnit, quantity: Unit },
    #[error("quantity must be a non-negative finite number, got {0}")]
    NegativeQuantity(f64),
    #[error("item references annual water volume but the scenario declares none")]
    MissingWaterVolume,
    #[error("water scaling needs a positive reference volume, got {0}")]
    InvalidReference(f64),
    #[error("invalid conversion context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m3")]
    CubicMetre,
    #[serde(rename = "ha")]
    Hectare,
    #[serde(rename = "tonne")]
    Tonne,
    #[serde(rename = "kWh")]
    KilowattHour,
    #[serde(rename = "hour")]
    Hour,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::CubicMetre => "m3",
            Unit::Hectare => "ha",
            Unit::Tonne => "tonne",
            Unit::KilowattHour => "kWh",
            Unit::Hour => "hour",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateUnit {
    #[serde(rename = "per_m3")]
    PerCubicMetre,
    #[serde(rename = "per_ha")]
    PerHectare,
    #[serde(rename = "per_tonne")]
    PerTonne,
    #[serde(rename = "per_kWh")]
    PerKilowattHour,
    #[serde(rename = "per_hour")]
    PerHour,
}

impl RateUnit {
    pub fn quantity_unit(self) -> Unit {
        match self {
            RateUnit::PerCubicMetre => Unit::CubicMetre,
            RateUnit::PerHectare => Unit::Hectare,
            RateUnit::PerTonne => Unit::Tonne,
            RateUnit::PerKilowattHour => Unit::KilowattHour,
            RateUnit::PerHour => Unit::Hour,
        }
    }
}

impl fmt::Display for RateUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "per_{}", self.quantity_unit())
    }
}

/// A price per physical unit, stated in some currency and price year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRate {
    pub value: Money,
    pub unit: RateUnit,
    pub currency: String,
    pub price_year: i32,
}

impl UnitRate {
    pub fn new(value: f64, unit: RateUnit, currency: &str, price_year: i32) -> Self {
        UnitRate {
            value: Money::new(value),
            unit,
            currency: currency.to_string(),
            price_year,
        }
    }
}

/// A physical amount with its unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub amount: f64,
    pub unit: Unit,
}

/// Combined inflation + FX multiplier from `(currency, year)` into base money.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebaseFactor {
    pub currency: String,
    pub year: i32,
    pub factor: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
}

fn default_carbon_price() -> Money {
    Money::new(60.0)
}

fn default_emission_factor() -> f64 {
    0.48
}

fn default_lifespan() -> u32 {
    30
}

/// Everything needed to turn source figures into base-year present values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionContext {
    pub base_currency: String,
    pub base_year: i32,
    pub rebase_factors: Vec<RebaseFactor>,
    /// Money per tonne CO2e.
    #[serde(default = "default_carbon_price")]
    pub carbon_price: Money,
    /// kg CO2e per m3 excavated.
    #[serde(default = "default_emission_factor")]
    pub excavation_emission_factor: f64,
    pub discount: DiscountModel,
    #[serde(default = "default_lifespan")]
    pub lifespan: u32,
}

impl ConversionContext {
    /// EUR/2019 context with 5% discounting, 60 EUR/t carbon and 0.48 kg/m3 excavation emissions.
    pub fn euro_2019() -> Self {
        ConversionContext {
            base_currency: "EUR".into(),
            base_year: 2019,
            rebase_factors: vec![RebaseFactor {
                currency: "EUR".into(),
                year: 2019,
                factor: 1.0,
                provenance: String::new(),
            }],
            carbon_price: default_carbon_price(),
            excavation_emission_factor: default_emission_factor(),
            discount: DiscountModel::new(DiscountModel::DEFAULT_RATE, 2019)
                .expect("default discount model is valid"),
            lifespan: default_lifespan(),
        }
    }

    pub fn with_factor(mut self, currency: &str, year: i32, factor: f64) -> Self {
        self.rebase_factors.retain(|f| !(f.currency == currency && f.year == year));
        self.rebase_factors.push(RebaseFactor {
            currency: currency.into(),
            year,
            factor,
            provenance: String::new(),
        });
        self
    }

    pub fn validate(&self) -> Result<(), MonetizeError> {
        let bad = |m: String| Err(MonetizeError::InvalidContext(m));
        self.discount.validate()?;
        if self.discount.base_year() != self.base_year {
            return bad(format!(
                "discount base year {} differs from context base year {}",
                self.discount.base_year(),
                self.base_year
            ));
        }
        let mut seen = BTreeMap::new();
        for f in &self.rebase_factors {
            if !(f.factor.is_finite() && f.factor > 0.0) {
                return bad(format!("factor for {} {} must be > 0", f.currency, f.year));
            }
            if seen.insert((f.currency.as_str(), f.year), f.factor).is_some() {
                return bad(format!("two factors for {} {}", f.currency, f.year));
            }
        }
        match seen.get(&(self.base_currency.as_str(), self.base_year)) {
            Some(1.0) => {}
            Some(&f) => {
                return bad(format!(
                    "base pair {} {} must have factor 1, got {f}",
                    self.base_currency, self.base_year
                ))
            }
            None => {}
        }
        if !(self.carbon_price.is_finite() && self.carbon_price.value() >= 0.0) {
            return bad("carbon price must be >= 0".into());
        }
        if !(self.excavation_emission_factor.is_finite() && self.excavation_emission_factor >= 0.0) {
            return bad("emission factor must be >= 0".into());
        }
        if self.lifespan == 0 {
            return bad("lifespan must be >= 1".into());
        }
        Ok(())
    }

    pub fn factor(&self, currency: &str, year: i32) -> Result<f64, MonetizeError> {
        if currency == self.base_currency && year == self.base_year {
            return Ok(1.0);
        }
        self.rebase_factors
            .iter()
            .find(|f| f.currency == currency && f.year == year)
            .map(|f| f.factor)
            .ok_or_else(|| MonetizeError::MissingRebaseFactor {
                currency: currency.to_string(),
                year,
            })
    }
}

/// Brings an amount stated in `(currency, year)` into base currency and year.
pub fn rebase(amount: Money, currency: &str, year: i32, ctx: &ConversionContext) -> Result<Money, MonetizeError> {
    Ok(amount * ctx.factor(currency, year)?)
}

fn check_quantity(q: f64) -> Result<f64, MonetizeError> {
    if q.is_finite() && q >= 0.0 {
        Ok(q)
    } else {
        Err(MonetizeError::NegativeQuantity(q))
    }
}

pub fn unit_rate_value(rate: &UnitRate, quantity: Measure, ctx: &ConversionContext) -> Result<Money, MonetizeError> {
    if rate.unit.quantity_unit() != quantity.unit {
        return Err(MonetizeError::UnitMismatch {
            rate: rate.unit,
            quantity: quantity.unit,
        });
    }
    let q = check_quantity(quantity.amount)?;
    Ok(rebase(rate.value, &rate.currency, rate.price_year, ctx)? * q)
}

/// Carbon cost of excavating `volume_m3`.
pub fn emission_cost(volume_m3: f64, ctx: &ConversionContext) -> Result<Money, MonetizeError> {
    let v = check_quantity(volume_m3)?;
    Ok(ctx.carbon_price * (v * ctx.excavation_emission_factor / 1000.0))
}

/// Value of removing `mass_kg` of a pollutant at a per-tonne price.
pub fn pollutant_removal_value(mass_kg: f64, price: &UnitRate, ctx: &ConversionContext) -> Result<Money, MonetizeError> {
    unit_rate_value(
        price,
        Measure {
            amount: check_quantity(mass_kg)? / 1000.0,
            unit: Unit::Tonne,
        },
        ctx,
    )
}

/// Scenario-level quantity an item can be tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    AnnualWater,
}

/// Values of the scenario drivers at evaluation time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Drivers {
    /// m3 per year.
    pub annual_water: Option<f64>,
}

impl Drivers {
    fn get(&self, driver: Driver) -> Result<f64, MonetizeError> {
        match driver {
            Driver::AnnualWater => self.annual_water.ok_or(MonetizeError::MissingWaterVolume),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Driven { driver: Driver },
    Measured(Measure),
}

impl Quantity {
    fn measure(&self, drivers: &Drivers) -> Result<Measure, MonetizeError> {
        match *self {
            Quantity::Measured(m) => Ok(m),
            Quantity::Driven { driver: d @ Driver::AnnualWater } => Ok(Measure {
                amount: drivers.get(d)?,
                unit: Unit::CubicMetre,
            }),
        }
    }
}

/// How an item's amount is derived from source figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Monetization {
    UnitRate { rate: UnitRate, quantity: Quantity },
    ExcavationEmission { excavated_volume_m3: f64 },
    PollutantRemoval { mass_kg_per_year: f64, price: UnitRate },
}

impl Monetization {
    pub fn evaluate(&self, ctx: &ConversionContext, drivers: &Drivers) -> Result<Money, MonetizeError> {
        match self {
            Monetization::UnitRate { rate, quantity } => unit_rate_value(rate, quantity.measure(drivers)?, ctx),
            Monetization::ExcavationEmission { excavated_volume_m3 } => emission_cost(*excavated_volume_m3, ctx),
            Monetization::PollutantRemoval { mass_kg_per_year, price } => {
                pollutant_removal_value(*mass_kg_per_year, price, ctx)
            }
        }
    }

    pub fn rate(&self) -> Option<&UnitRate> {
        match self {
            Monetization::UnitRate { rate, .. } => Some(rate),
            Monetization::PollutantRemoval { price, .. } => Some(price),
            Monetization::ExcavationEmission { .. } => None,
        }
    }

    pub fn rate_mut(&mut self) -> Option<&mut UnitRate> {
        match self {
            Monetization::UnitRate { rate, .. } => Some(rate),
            Monetization::PollutantRemoval { price, .. } => Some(price),
            Monetization::ExcavationEmission { .. } => None,
        }
    }

    pub fn uses(&self, driver: Driver) -> bool {
        matches!(self, Monetization::UnitRate { quantity: Quantity::Driven { driver: d }, .. } if *d == driver)
    }
}

/// Linear dependence of a pre-monetized amount on a driver, stated at a reference level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub driver: Driver,
    pub reference: f64,
}

/// A cost or benefit as written in a case-study document.
///
/// The amount is given either directly (`raw_amount` in `currency`/`price_year`,
/// defaulting to the base pair) or through a `monetization` chain. The
/// `reported_*` fields and `cross_check` are assertions only; they never feed
/// the computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    pub kind: FlowKind,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_amount: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monetization: Option<Monetization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales_with: Option<Scaling>,
    pub timing: TimingProfile,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_value_2019: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_raw_amount: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<Monetization>,
    /// Listed in the source table without a present value; excluded from totals.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub memo: bool,
}

impl ItemRecord {
    /// A plain base-currency item.
    pub fn fixed(id: &str, kind: FlowKind, category: &str, raw: f64, timing: TimingProfile) -> Self {
        ItemRecord {
            id: id.into(),
            label: String::new(),
            kind,
            category: category.into(),
            raw_amount: Some(Money::new(raw)),
            currency: None,
            price_year: None,
            monetization: None,
            scales_with: None,
            timing,
            provenance: String::new(),
            reported_value_2019: None,
            reported_raw_amount: None,
            cross_check: None,
            memo: false,
        }
    }

    /// Structural checks that do not depend on a context.
    pub fn check_shape(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("item id must not be empty".into());
        }
        match (&self.raw_amount, &self.monetization) {
            (Some(_), Some(_)) => return Err(format!("item {}: give raw_amount or monetization, not both", self.id)),
            (None, None) => return Err(format!("item {}: needs raw_amount or monetization", self.id)),
            (Some(raw), None) => {
                if !(raw.is_finite() && raw.value() >= 0.0) {
                    return Err(format!("item {}: raw_amount must be >= 0", self.id));
                }
            }
            (None, Some(_)) => {
                if self.currency.is_some() || self.price_year.is_some() || self.scales_with.is_some() {
                    return Err(format!(
                        "item {}: currency, price_year and scales_with apply to raw_amount only",
                        self.id
                    ));
                }
            }
        }
        if let Some(s) = self.scales_with {
            if !(s.reference.is_finite() && s.reference > 0.0) {
                return Err(format!("item {}: scaling reference must be > 0", self.id));
            }
        }
        for r in [self.monetization.as_ref(), self.cross_check.as_ref()].into_iter().flatten() {
            if let Some(rate) = r.rate() {
                if !(rate.value.is_finite() && rate.value.value() >= 0.0) {
                    return Err(format!("item {}: unit rate must be >= 0", self.id));
                }
            }
        }
        Ok(())
    }

    /// Every `(currency, year)` pair this item needs a rebase factor for.
    pub fn currency_pairs(&self, ctx: &ConversionContext) -> Vec<(String, i32)> {
        let mut pairs = Vec::new();
        if self.raw_amount.is_some() {
            pairs.push((
                self.currency.clone().unwrap_or_else(|| ctx.base_currency.clone()),
                self.price_year.unwrap_or(ctx.base_year),
            ));
        }
        for m in [self.monetization.as_ref(), self.cross_check.as_ref()].into_iter().flatten() {
            if let Some(rate) = m.rate() {
                pairs.push((rate.currency.clone(), rate.price_year));
            }
        }
        pairs
    }

    pub fn depends_on(&self, driver: Driver) -> bool {
        self.monetization.as_ref().is_some_and(|m| m.uses(driver))
            || self.scales_with.is_some_and(|s| s.driver == driver)
    }

    /// Base-currency amount before any timing convention is applied.
    pub fn base_amount(&self, ctx: &ConversionContext, drivers: &Drivers) -> Result<Money, MonetizeError> {
        match (&self.raw_amount, &self.monetization) {
            (_, Some(chain)) => chain.evaluate(ctx, drivers),
            (Some(raw), None) => {
                let currency = self.currency.as_deref().unwrap_or(&ctx.base_currency);
                let year = self.price_year.unwrap_or(ctx.base_year);
                let mut amount = rebase(*raw, currency, year, ctx)?;
                if let Some(s) = self.scales_with {
                    amount = amount * (drivers.get(s.driver)? / s.reference);
                }
                Ok(amount)
            }
            (None, None) => Ok(Money::ZERO),
        }
    }

    pub fn resolve(&self, ctx: &ConversionContext, drivers: &Drivers) -> Result<CashFlowItem, MonetizeError> {
        Ok(CashFlowItem {
            id: self.id.clone(),
            kind: self.kind,
            category: self.category.clone(),
            raw_amount: self.base_amount(ctx, drivers)?,
            timing: self.timing,
            provenance: self.provenance.clone(),
            reported_value_2019: self.reported_value_2019,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Factors calibrated from paired table values.
    fn ctx() -> ConversionContext {
        ConversionContext::euro_2019()
            .with_factor("USD", 2018, 0.8774)
            .with_factor("AUD", 2012, 1.3165)
    }

    fn m3(amount: f64) -> Measure {
        Measure { amount, unit: Unit::CubicMetre }
    }

    #[test]
    fn rebase_examples() {
        let c = ctx();
        assert_eq!(rebase(Money::new(1.0), "EUR", 2019, &c).unwrap(), Money::new(1.0));
        let usd = rebase(Money::new(0.18), "USD", 2018, &c).unwrap().value();
        assert!((usd - 0.15793).abs() < 5e-6);
        let aud = rebase(Money::new(24_056.0), "AUD", 2012, &c).unwrap().value();
        assert!((aud - 31_670.0).abs() < 0.5, "{aud}");
        assert_eq!(
            rebase(Money::new(1.0), "GBP", 2019, &c),
            Err(MonetizeError::MissingRebaseFactor { currency: "GBP".into(), year: 2019 })
        );
    }

    #[test]
    fn unit_rate_examples() {
        let c = ctx();
        let reuse = UnitRate::new(0.9, RateUnit::PerCubicMetre, "EUR", 2019);
        assert_eq!(unit_rate_value(&reuse, m3(12_000.0), &c).unwrap().round_cents(), 10_800.0);
        assert_eq!(unit_rate_value(&reuse, m3(0.0), &c).unwrap(), Money::ZERO);
        let flood = UnitRate::new(0.18, RateUnit::PerCubicMetre, "USD", 2018);
        let v = unit_rate_value(&flood, m3(15_000.0), &c).unwrap().value();
        assert!((v - 2369.0).abs() <= 0.5, "{v}");
        let wrong = Measure { amount: 1.0, unit: Unit::Hectare };
        assert!(matches!(unit_rate_value(&reuse, wrong, &c), Err(MonetizeError::UnitMismatch { .. })));
        assert!(matches!(unit_rate_value(&reuse, m3(-1.0), &c), Err(MonetizeError::NegativeQuantity(_))));
    }

    #[test]
    fn emission_examples() {
        let c = ctx();
        assert_eq!(emission_cost(1500.0, &c).unwrap().round_cents(), 43.20);
        assert_eq!(emission_cost(0.0, &c).unwrap(), Money::ZERO);
        let mut dearer = c.clone();
        dearer.carbon_price = Money::new(120.0);
        assert_eq!(emission_cost(1500.0, &dearer).unwrap().round_cents(), 86.40);
    }

    #[test]
    fn pollutant_removal_self_consistent_triples() {
        let c = ctx();
        // 109 kg at 861 AUD/t (2012): 0.109 * 861 * 1.3165 = 123.5522...
        let n = UnitRate::new(861.0, RateUnit::PerTonne, "AUD", 2012);
        assert_eq!(pollutant_removal_value(109.0, &n, &c).unwrap().round_cents(), 123.55);
        // 2000 kg at 50 EUR/t (2019) = 100
        let p = UnitRate::new(50.0, RateUnit::PerTonne, "EUR", 2019);
        assert_eq!(pollutant_removal_value(2000.0, &p, &c).unwrap().value(), 100.0);
        assert_eq!(pollutant_removal_value(0.0, &n, &c).unwrap(), Money::ZERO);
        let per_m3 = UnitRate::new(1.0, RateUnit::PerCubicMetre, "EUR", 2019);
        assert!(pollutant_removal_value(1.0, &per_m3, &c).is_err());
    }

    #[test]
    fn context_validation() {
        assert!(ctx().validate().is_ok());
        let dup = ctx().with_factor("USD", 2018, 0.8774);
        assert!(dup.validate().is_ok());
        let mut bad = ctx();
        bad.rebase_factors.push(RebaseFactor { currency: "USD".into(), year: 2018, factor: 0.9, provenance: String::new() });
        assert!(bad.validate().is_err());
        let base_not_one = ctx().with_factor("EUR", 2019, 1.1);
        assert!(base_not_one.validate().is_err());
        let zero = ctx().with_factor("JPY", 2010, 0.0);
        assert!(zero.validate().is_err());
    }

    #[test]
    fn item_shape_rules() {
        let mut it = ItemRecord::fixed("a", FlowKind::Cost, "CAPEX", 1.0, TimingProfile::RecurringImmediate);
        assert!(it.check_shape().is_ok());
        it.monetization = Some(Monetization::ExcavationEmission { excavated_volume_m3: 1.0 });
        assert!(it.check_shape().is_err());
        it.raw_amount = None;
        assert!(it.check_shape().is_ok());
        it.monetization = None;
        assert!(it.check_shape().is_err());
    }

    #[test]
    fn water_driven_items() {
        let c = ctx();
        let mut it = ItemRecord::fixed("w", FlowKind::Benefit, "water", 0.0, TimingProfile::RecurringImmediate);
        it.raw_amount = None;
        it.monetization = Some(Monetization::UnitRate {
            rate: UnitRate::new(0.9, RateUnit::PerCubicMetre, "EUR", 2019),
            quantity: Quantity::Driven { driver: Driver::AnnualWater },
        });
        assert!(it.depends_on(Driver::AnnualWater));
        assert_eq!(it.base_amount(&c, &Drivers::default()), Err(MonetizeError::MissingWaterVolume));
        let v = it.base_amount(&c, &Drivers { annual_water: Some(6000.0) }).unwrap();
        assert_eq!(v.round_cents(), 5400.0);

        let mut scaled = ItemRecord::fixed("s", FlowKind::Benefit, "ecosystem", 300.0, TimingProfile::RecurringImmediate);
        scaled.scales_with = Some(Scaling { driver: Driver::AnnualWater, reference: 7000.0 });
        let v = scaled.base_amount(&c, &Drivers { annual_water: Some(3500.0) }).unwrap();
        assert_eq!(v.value(), 150.0);
    }

    #[test]
    fn monetization_json_shape() {
        let json = r#"{"type":"unit_rate","rate":{"value":"0.9","unit":"per_m3","currency":"EUR","price_year":2019},"quantity":{"driver":"annual_water"}}"#;
        let m: Monetization = serde_json::from_str(json).unwrap();
        assert!(m.uses(Driver::AnnualWater));
        assert_eq!(serde_json::to_string(&m).unwrap(), json);
        let measured = r#"{"type":"unit_rate","rate":{"value":"18","unit":"per_hour","currency":"EUR","price_year":2019},"quantity":{"amount":60.0,"unit":"hour"}}"#;
        let m: Monetization = serde_json::from_str(measured).unwrap();
        assert_eq!(m.evaluate(&ctx(), &Drivers::default()).unwrap().value(), 1080.0);
    }

    proptest! {
        #[test]
        fn rebase_invertible(amount in 0.0f64..1e9, factor in 1e-3f64..1e3) {
            let c = ConversionContext::euro_2019().with_factor("XYZ", 2000, factor);
            let based = rebase(Money::new(amount), "XYZ", 2000, &c).unwrap().value();
            let back = based * (1.0 / factor);
            prop_assert!((back - amount).abs() <= 1e-9 * amount.max(1e-300));
        }

        #[test]
        fn unit_rate_bilinear(v in 0.0f64..100.0, q in 0.0f64..1e6, lambda in 0.0f64..50.0) {
            let c = ctx();
            let r = UnitRate::new(v, RateUnit::PerCubicMetre, "USD", 2018);
            let rl = UnitRate::new(lambda * v, RateUnit::PerCubicMetre, "USD", 2018);
            let base = unit_rate_value(&r, m3(q), &c).unwrap().value();
            let tol = 1e-9 * (lambda * base).abs().max(1e-9);
            prop_assert!((unit_rate_value(&rl, m3(q), &c).unwrap().value() - lambda * base).abs() <= tol);
            prop_assert!((unit_rate_value(&r, m3(lambda * q), &c).unwrap().value() - lambda * base).abs() <= tol);
        }

        #[test]
        fn emission_homogeneous(v in 0.0f64..1e6, lambda in 0.0f64..100.0) {
            let c = ctx();
            let lhs = emission_cost(lambda * v, &c).unwrap().value();
            let rhs = lambda * emission_cost(v, &c).unwrap().value();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-9));
        }
    }
}
