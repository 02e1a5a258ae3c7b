//! Scenario evaluation: KPI computation, baseline/alternative comparison and
//! the deviation ledger against reported aggregates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    aggregate, annualized_value, cash_flow_schedule, discounted_totals, CashFlowItem, FlowKind, LedgerError,
    Totals,
};
use crate::monetize::{ConversionContext, Driver, Drivers, ItemRecord, MonetizeError};
use crate::money::{self, Money};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario {scenario}: {source}")]
    Monetize {
        scenario: String,
        #[source]
        source: MonetizeError,
    },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("invalid scenario {scenario}: {message}")]
    Invalid { scenario: String, message: String },
}

/// Relative gap above which a deviation is flagged.
pub const DEVIATION_THRESHOLD: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Baseline,
    Alternative,
}

/// Annual water volume bounds, m3 per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterVolume {
    pub min: f64,
    pub nominal: f64,
    pub max: f64,
}

impl WaterVolume {
    pub fn fixed(volume: f64) -> Self {
        WaterVolume { min: volume, nominal: volume, max: volume }
    }

    pub fn is_valid(&self) -> bool {
        [self.min, self.nominal, self.max].iter().all(|v| v.is_finite())
            && 0.0 <= self.min
            && self.min <= self.nominal
            && self.nominal <= self.max
    }

    /// Sets the operating volume, widening the bounds if needed.
    pub fn set_nominal(&mut self, volume: f64) {
        self.nominal = volume;
        self.min = self.min.min(volume);
        self.max = self.max.max(volume);
    }
}

/// Aggregates printed by the source; compared against, never computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportedAggregates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_costs: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_benefits: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npv: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bcr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_m2: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npv_per_m2: Option<Money>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub label: String,
    pub role: Role,
    pub items: Vec<ItemRecord>,
    pub area_m2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annual_water_m3: Option<WaterVolume>,
    pub lifespan_years: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_aggregates: Option<ReportedAggregates>,
}

impl Scenario {
    pub fn new(id: &str, role: Role, area_m2: f64, items: Vec<ItemRecord>) -> Self {
        Scenario {
            id: id.into(),
            label: id.into(),
            role,
            items,
            area_m2,
            annual_water_m3: None,
            lifespan_years: 30,
            reported_aggregates: None,
        }
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid {
            scenario: self.id.clone(),
            message: message.into(),
        }
    }

    /// Checks everything that does not need a conversion context.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.trim().is_empty() {
            return Err(self.invalid("empty scenario id"));
        }
        if !(self.area_m2.is_finite() && self.area_m2 > 0.0) {
            return Err(self.invalid(format!("area_m2 must be > 0, got {}", self.area_m2)));
        }
        if self.lifespan_years == 0 {
            return Err(self.invalid("lifespan_years must be >= 1"));
        }
        if let Some(w) = &self.annual_water_m3 {
            if !w.is_valid() {
                return Err(self.invalid("annual_water_m3 needs 0 <= min <= nominal <= max"));
            }
        }
        let mut ids = HashSet::new();
        for item in &self.items {
            item.check_shape().map_err(|m| self.invalid(m))?;
            if !ids.insert(item.id.as_str()) {
                return Err(ScenarioError::Ledger(LedgerError::DuplicateId(item.id.clone())));
            }
            if item.depends_on(Driver::AnnualWater) && self.annual_water_m3.is_none() {
                return Err(self.invalid(format!(
                    "item {} depends on annual water but the scenario declares no volume",
                    item.id
                )));
            }
        }
        Ok(())
    }

    pub fn drivers(&self) -> Drivers {
        Drivers {
            annual_water: self.annual_water_m3.map(|w| w.nominal),
        }
    }

    pub fn item(&self, id: &str) -> Option<&ItemRecord> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Items that enter the totals, resolved to base money at the given drivers.
    pub fn resolve_counted(&self, ctx: &ConversionContext, drivers: &Drivers) -> Result<Vec<CashFlowItem>, ScenarioError> {
        self.items
            .iter()
            .filter(|i| !i.memo)
            .map(|i| i.resolve(ctx, drivers).map_err(|e| self.monetize_err(e)))
            .collect()
    }

    fn monetize_err(&self, source: MonetizeError) -> ScenarioError {
        ScenarioError::Monetize {
            scenario: self.id.clone(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationMode {
    /// Per-year values under the table conventions.
    #[default]
    Annualized,
    /// Explicit yearly cash flows discounted over a horizon.
    HorizonDcf,
}

/// Investment base of the return on investment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiBase {
    #[default]
    TotalCosts,
    /// Only cost items whose category is `CAPEX`.
    Capex,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOptions {
    #[serde(default)]
    pub mode: EvaluationMode,
    #[serde(default)]
    pub roi_base: RoiBase,
    /// Horizon for `horizon-dcf`; defaults to the scenario lifespan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kpis {
    pub npv: Money,
    pub bcr: Option<f64>,
    pub roi: Option<f64>,
}

/// NPV, BCR and ROI with total costs as the investment base.
pub fn kpis(pv_benefits: Money, pv_costs: Money) -> Kpis {
    Kpis {
        npv: pv_benefits - pv_costs,
        bcr: ratio(pv_benefits, pv_costs),
        roi: roi(pv_benefits, pv_costs),
    }
}

/// `(B - I) / I`, undefined when the investment is zero.
pub fn roi(pv_benefits: Money, investment: Money) -> Option<f64> {
    (investment.value() != 0.0).then(|| (pv_benefits - investment) / investment)
}

fn ratio(num: Money, den: Money) -> Option<f64> {
    (den.value() != 0.0).then(|| num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// Engine result against a reported aggregate.
    ComputedVsReported,
    /// Reported aggregates that disagree with each other.
    ReportedInternal,
    /// Item present value against the reported per-year value.
    ItemValue,
    /// Resolved item amount against the reported raw amount.
    ItemRawAmount,
    /// Independent monetization chain against the stored amount.
    CrossCheck,
}

/// One gap between a recomputed figure and a printed one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub scenario_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    pub metric: String,
    pub kind: DeviationKind,
    #[serde(with = "money::opt_fixed2")]
    pub computed: Option<f64>,
    #[serde(with = "money::fixed2")]
    pub reported: f64,
    #[serde(with = "money::opt_fixed2")]
    pub absolute_gap: Option<f64>,
    #[serde(with = "money::ratio")]
    pub relative_gap: Option<f64>,
    pub flagged: bool,
}

impl Deviation {
    fn new(scenario_id: &str, item_id: Option<&str>, metric: &str, kind: DeviationKind, computed: Option<f64>, reported: f64) -> Self {
        let absolute_gap = computed.map(|c| c - reported);
        let relative_gap = absolute_gap.and_then(|g| (reported != 0.0).then(|| g / reported.abs()));
        let flagged = match (absolute_gap, relative_gap) {
            (None, _) => true,
            (Some(_), Some(r)) => r.abs() > DEVIATION_THRESHOLD,
            (Some(g), None) => g.abs() >= 0.005,
        };
        Deviation {
            scenario_id: scenario_id.into(),
            item_id: item_id.map(Into::into),
            metric: metric.into(),
            kind,
            computed,
            reported,
            absolute_gap,
            relative_gap,
            flagged,
        }
    }

    /// Item-level entries are only kept when the figures differ at cent resolution.
    fn differs_at_cents(&self) -> bool {
        match self.computed {
            Some(c) => ((c * 100.0).round() - (self.reported * 100.0).round()).abs() >= 1.0,
            None => true,
        }
    }
}

/// Value of one item inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemValue {
    pub id: String,
    pub kind: FlowKind,
    pub category: String,
    /// Resolved amount in base money before timing.
    #[serde(with = "money::cents")]
    pub base_amount: Money,
    /// Per-year value (annualized) or horizon present value (horizon-dcf).
    #[serde(with = "money::cents")]
    pub value: Money,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub memo: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub water_linear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario_id: String,
    pub label: String,
    pub role: Role,
    pub mode: EvaluationMode,
    #[serde(with = "money::cents")]
    pub pv_costs: Money,
    #[serde(with = "money::cents")]
    pub pv_benefits: Money,
    #[serde(with = "money::cents")]
    pub npv: Money,
    #[serde(with = "money::ratio")]
    pub bcr: Option<f64>,
    #[serde(with = "money::ratio")]
    pub roi: Option<f64>,
    #[serde(with = "money::fixed4")]
    pub cost_per_m2: f64,
    #[serde(with = "money::fixed4")]
    pub npv_per_m2: f64,
    pub items: Vec<ItemValue>,
    pub deviations: Vec<Deviation>,
}

fn is_capex(item: &CashFlowItem) -> bool {
    item.kind == FlowKind::Cost && item.category.eq_ignore_ascii_case("capex")
}

fn totals_for(items: &[CashFlowItem], ctx: &ConversionContext, mode: EvaluationMode, horizon: u32) -> Result<Totals, LedgerError> {
    match mode {
        EvaluationMode::Annualized => aggregate(items, &ctx.discount),
        EvaluationMode::HorizonDcf => Ok(discounted_totals(&cash_flow_schedule(items, horizon), &ctx.discount)),
    }
}

fn item_value(item: &CashFlowItem, ctx: &ConversionContext, mode: EvaluationMode, horizon: u32) -> Money {
    match mode {
        EvaluationMode::Annualized => annualized_value(item, &ctx.discount),
        EvaluationMode::HorizonDcf => {
            let t = discounted_totals(&cash_flow_schedule(std::slice::from_ref(item), horizon), &ctx.discount);
            t.pv_costs + t.pv_benefits
        }
    }
}

/// Computes totals and KPIs for one scenario at its nominal drivers.
pub fn evaluate_scenario(s: &Scenario, ctx: &ConversionContext, opts: &EvaluationOptions) -> Result<KpiReport, ScenarioError> {
    evaluate_at(s, ctx, opts, &s.drivers())
}

/// Same as [`evaluate_scenario`] with explicit driver values.
pub fn evaluate_at(s: &Scenario, ctx: &ConversionContext, opts: &EvaluationOptions, drivers: &Drivers) -> Result<KpiReport, ScenarioError> {
    s.validate()?;
    let horizon = opts.horizon.unwrap_or(s.lifespan_years);
    if horizon == 0 {
        return Err(s.invalid("horizon must be >= 1"));
    }
    let mut items = Vec::with_capacity(s.items.len());
    let mut resolved = Vec::with_capacity(s.items.len());
    for record in &s.items {
        let flow = record.resolve(ctx, drivers).map_err(|e| s.monetize_err(e))?;
        items.push(ItemValue {
            id: flow.id.clone(),
            kind: flow.kind,
            category: flow.category.clone(),
            base_amount: flow.raw_amount,
            value: item_value(&flow, ctx, opts.mode, horizon),
            memo: record.memo,
            water_linear: record.depends_on(Driver::AnnualWater),
        });
        if !record.memo {
            resolved.push(flow);
        }
    }
    let totals = totals_for(&resolved, ctx, opts.mode, horizon)?;
    let k = kpis(totals.pv_benefits, totals.pv_costs);
    let roi = match opts.roi_base {
        RoiBase::TotalCosts => k.roi,
        RoiBase::Capex => {
            let capex: Vec<_> = resolved.iter().filter(|i| is_capex(i)).cloned().collect();
            roi(totals.pv_benefits, totals_for(&capex, ctx, opts.mode, horizon)?.pv_costs)
        }
    };

    let mut report = KpiReport {
        scenario_id: s.id.clone(),
        label: s.label.clone(),
        role: s.role,
        mode: opts.mode,
        pv_costs: totals.pv_costs,
        pv_benefits: totals.pv_benefits,
        npv: k.npv,
        bcr: k.bcr,
        roi,
        cost_per_m2: totals.pv_costs.value() / s.area_m2,
        npv_per_m2: k.npv.value() / s.area_m2,
        items,
        deviations: Vec::new(),
    };
    report.deviations = item_deviations(s, ctx, drivers, opts.mode)?;
    if opts.mode == EvaluationMode::Annualized {
        if let Some(rep) = &s.reported_aggregates {
            report.deviations.extend(aggregate_deviations(s, rep, &report));
        }
    }
    Ok(report)
}

fn item_deviations(s: &Scenario, ctx: &ConversionContext, drivers: &Drivers, mode: EvaluationMode) -> Result<Vec<Deviation>, ScenarioError> {
    let mut out = Vec::new();
    for record in &s.items {
        let amount = record.base_amount(ctx, drivers).map_err(|e| s.monetize_err(e))?;
        let mut push = |metric: &str, kind, computed: f64, reported: f64| {
            let d = Deviation::new(&s.id, Some(&record.id), metric, kind, Some(computed), reported);
            if d.differs_at_cents() {
                out.push(d);
            }
        };
        if let Some(rep) = record.reported_raw_amount {
            push("raw_amount", DeviationKind::ItemRawAmount, amount.value(), rep.value());
        }
        if let Some(chain) = &record.cross_check {
            let check = chain.evaluate(ctx, drivers).map_err(|e| s.monetize_err(e))?;
            push("cross_check", DeviationKind::CrossCheck, check.value(), amount.value());
        }
        if let (Some(rep), EvaluationMode::Annualized) = (record.reported_value_2019, mode) {
            let flow = record.resolve(ctx, drivers).map_err(|e| s.monetize_err(e))?;
            let v = annualized_value(&flow, &ctx.discount);
            push("value_2019", DeviationKind::ItemValue, v.value(), rep.value());
        }
    }
    Ok(out)
}

fn aggregate_deviations(s: &Scenario, rep: &ReportedAggregates, r: &KpiReport) -> Vec<Deviation> {
    use DeviationKind::{ComputedVsReported as Cvr, ReportedInternal as Int};
    let mut out = Vec::new();
    let mut add = |metric: &str, kind, computed: Option<f64>, reported: Option<f64>| {
        if let Some(reported) = reported {
            out.push(Deviation::new(&s.id, None, metric, kind, computed, reported));
        }
    };
    let m = |x: Option<Money>| x.map(Money::value);

    add("total_costs", Cvr, Some(r.pv_costs.value()), m(rep.total_costs));
    add("total_benefits", Cvr, Some(r.pv_benefits.value()), m(rep.total_benefits));
    add("npv", Cvr, Some(r.npv.value()), m(rep.npv));
    add("bcr", Cvr, r.bcr, rep.bcr);
    add("roi", Cvr, r.roi, rep.roi);
    add("cost_per_m2", Cvr, Some(r.cost_per_m2), m(rep.cost_per_m2));
    add("npv_per_m2", Cvr, Some(r.npv_per_m2), m(rep.npv_per_m2));

    if let (Some(b), Some(c)) = (rep.total_benefits, rep.total_costs) {
        add("npv_vs_reported_totals", Int, Some((b - c).value()), m(rep.npv));
        add("bcr_vs_reported_totals", Int, ratio(b, c), rep.bcr);
        add("total_benefits_vs_reported_bcr", Int, rep.bcr.map(|bcr| c.value() * bcr), Some(b.value()));
    }
    if let (Some(bcr), Some(_)) = (rep.bcr, rep.roi) {
        add("roi_vs_reported_bcr", Int, Some(bcr - 1.0), rep.roi);
    }
    if let Some(c) = rep.total_costs {
        add("cost_per_m2_vs_reported_totals", Int, Some(c.value() / s.area_m2), m(rep.cost_per_m2));
    }
    if let Some(npv) = rep.npv {
        add("npv_per_m2_vs_reported_npv", Int, Some(npv.value() / s.area_m2), m(rep.npv_per_m2));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reports: Vec<KpiReport>,
    pub recommended: String,
    pub notes: Vec<String>,
}

impl ComparisonReport {
    pub fn report(&self, scenario_id: &str) -> Option<&KpiReport> {
        self.reports.iter().find(|r| r.scenario_id == scenario_id)
    }

    pub fn deviations(&self) -> impl Iterator<Item = &Deviation> {
        self.reports.iter().flat_map(|r| r.deviations.iter())
    }
}

/// Picks the higher-NPV scenario; ties go to the baseline.
pub fn recommend<'a>(baseline: &'a KpiReport, alternative: &'a KpiReport) -> &'a KpiReport {
    if alternative.npv > baseline.npv {
        alternative
    } else {
        baseline
    }
}

pub fn compare_case(
    baseline: &Scenario,
    alternative: &Scenario,
    ctx: &ConversionContext,
    opts: &EvaluationOptions,
) -> Result<ComparisonReport, ScenarioError> {
    let b = evaluate_scenario(baseline, ctx, opts)?;
    let a = evaluate_scenario(alternative, ctx, opts)?;
    Ok(comparison_from(b, a))
}

/// Builds the comparison from two already computed reports (baseline first).
pub fn comparison_from(baseline: KpiReport, alternative: KpiReport) -> ComparisonReport {
    let recommended = recommend(&baseline, &alternative).scenario_id.clone();
    let notes = [&baseline, &alternative]
        .into_iter()
        .filter(|r| r.npv.value() < 0.0)
        .map(|r| format!("{}: negative NPV ({}), not recommended", r.scenario_id, r.npv))
        .collect();
    ComparisonReport {
        reports: vec![baseline, alternative],
        recommended,
        notes,
    }
}

/// A baseline/alternative pair evaluated under one conversion context.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub context: ConversionContext,
    pub baseline: Scenario,
    pub alternative: Scenario,
}

impl Case {
    pub fn scenarios(&self) -> [&Scenario; 2] {
        [&self.baseline, &self.alternative]
    }

    pub fn scenarios_mut(&mut self) -> [&mut Scenario; 2] {
        [&mut self.baseline, &mut self.alternative]
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios().into_iter().find(|s| s.id == id)
    }

    pub fn compare(&self, opts: &EvaluationOptions) -> Result<ComparisonReport, ScenarioError> {
        compare_case(&self.baseline, &self.alternative, &self.context, opts)
    }

    pub fn evaluate(&self, opts: &EvaluationOptions) -> Result<Vec<KpiReport>, ScenarioError> {
        self.scenarios()
            .into_iter()
            .map(|s| evaluate_scenario(s, &self.context, opts))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::TimingProfile;
    use proptest::prelude::*;

    fn fixed(id: &str, kind: FlowKind, raw: f64, timing: TimingProfile) -> ItemRecord {
        ItemRecord::fixed(id, kind, if timing.is_capital() { "CAPEX" } else { "operational" }, raw, timing)
    }

    fn ctx() -> ConversionContext {
        ConversionContext::euro_2019()
    }

    #[test]
    fn kpi_examples() {
        let k = kpis(Money::new(10.0), Money::new(4.0));
        assert_eq!(k.npv, Money::new(6.0));
        assert_eq!(k.bcr, Some(2.5));
        assert_eq!(k.roi, Some(1.5));
        let even = kpis(Money::new(7.0), Money::new(7.0));
        assert_eq!((even.bcr, even.roi), (Some(1.0), Some(0.0)));
        let undefined = kpis(Money::new(3.0), Money::ZERO);
        assert_eq!((undefined.bcr, undefined.roi), (None, None));
        // bcr 9.97 implies roi 8.97
        let t11 = kpis(Money::new(997.0), Money::new(100.0));
        assert!((t11.roi.unwrap() - 8.97).abs() < 1e-12);
    }

    #[test]
    fn empty_scenario() {
        let s = Scenario::new("empty", Role::Baseline, 10.0, vec![]);
        let r = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
        assert_eq!((r.pv_costs, r.pv_benefits, r.npv), (Money::ZERO, Money::ZERO, Money::ZERO));
        assert_eq!(r.bcr, None);
        assert_eq!(r.roi, None);
    }

    #[test]
    fn validation_errors() {
        let mut s = Scenario::new("s", Role::Baseline, 0.0, vec![]);
        assert!(s.validate().is_err());
        s.area_m2 = 1.0;
        s.annual_water_m3 = Some(WaterVolume { min: 5.0, nominal: 4.0, max: 6.0 });
        assert!(s.validate().is_err());
        s.annual_water_m3 = None;
        let a = fixed("a", FlowKind::Cost, 1.0, TimingProfile::RecurringImmediate);
        s.items = vec![a.clone(), a];
        assert!(matches!(s.validate(), Err(ScenarioError::Ledger(LedgerError::DuplicateId(_)))));
    }

    #[test]
    fn memo_items_are_listed_but_not_counted() {
        let mut memo = fixed("m", FlowKind::Benefit, 1000.0, TimingProfile::RecurringImmediate);
        memo.memo = true;
        let s = Scenario::new(
            "s",
            Role::Alternative,
            1.0,
            vec![memo, fixed("c", FlowKind::Cost, 10.0, TimingProfile::RecurringImmediate)],
        );
        let r = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
        assert_eq!(r.pv_benefits, Money::ZERO);
        assert_eq!(r.items.len(), 2);
        assert!(r.items[0].memo);
    }

    #[test]
    fn capex_roi_base() {
        let s = Scenario::new(
            "s",
            Role::Alternative,
            1.0,
            vec![
                fixed("cap", FlowKind::Cost, 3000.0, TimingProfile::one_off(30).unwrap()),
                fixed("op", FlowKind::Cost, 100.0, TimingProfile::RecurringImmediate),
                fixed("b", FlowKind::Benefit, 400.0, TimingProfile::RecurringImmediate),
            ],
        );
        let total = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
        assert_eq!(total.roi, Some(1.0));
        let capex = evaluate_scenario(&s, &ctx(), &EvaluationOptions { roi_base: RoiBase::Capex, ..Default::default() }).unwrap();
        assert_eq!(capex.roi, Some(3.0));
    }

    #[test]
    fn horizon_mode_discounts_schedule() {
        let s = Scenario::new(
            "s",
            Role::Alternative,
            1.0,
            vec![
                fixed("cap", FlowKind::Cost, 100.0, TimingProfile::one_off(30).unwrap()),
                fixed("b", FlowKind::Benefit, 10.0, TimingProfile::RecurringImmediate),
            ],
        );
        let opts = EvaluationOptions { mode: EvaluationMode::HorizonDcf, horizon: Some(2), ..Default::default() };
        let r = evaluate_scenario(&s, &ctx(), &opts).unwrap();
        assert_eq!(r.pv_costs, Money::new(100.0));
        let expected = 10.0 / 1.05 + 10.0 / (1.05 * 1.05);
        assert!((r.pv_benefits.value() - expected).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_baseline() {
        let items = vec![fixed("b", FlowKind::Benefit, 5.0, TimingProfile::RecurringImmediate)];
        let b = Scenario::new("base", Role::Baseline, 1.0, items.clone());
        let a = Scenario::new("alt", Role::Alternative, 1.0, items);
        let c = compare_case(&b, &a, &ctx(), &EvaluationOptions::default()).unwrap();
        assert_eq!(c.recommended, "base");
        assert!(c.notes.is_empty());
    }

    #[test]
    fn negative_npv_note() {
        let b = Scenario::new("base", Role::Baseline, 1.0, vec![fixed("c", FlowKind::Cost, 5.0, TimingProfile::RecurringImmediate)]);
        let a = Scenario::new("alt", Role::Alternative, 1.0, vec![]);
        let c = compare_case(&b, &a, &ctx(), &EvaluationOptions::default()).unwrap();
        assert_eq!(c.recommended, "alt");
        assert_eq!(c.notes, vec!["base: negative NPV (-5.00), not recommended".to_string()]);
    }

    #[test]
    fn ledger_has_one_entry_per_reported_field() {
        let mut s = Scenario::new("s", Role::Baseline, 2.0, vec![fixed("b", FlowKind::Benefit, 4.0, TimingProfile::RecurringImmediate), fixed("c", FlowKind::Cost, 2.0, TimingProfile::RecurringImmediate)]);
        s.reported_aggregates = Some(ReportedAggregates {
            total_costs: Some(Money::new(2.0)),
            total_benefits: Some(Money::new(40.0)),
            npv: Some(Money::new(2.0)),
            bcr: Some(2.0),
            ..Default::default()
        });
        let r = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
        for field in ["total_costs", "total_benefits", "npv", "bcr"] {
            let n = r.deviations.iter().filter(|d| d.metric == field && d.kind == DeviationKind::ComputedVsReported).count();
            assert_eq!(n, 1, "{field}");
        }
        let benefits = r.deviations.iter().find(|d| d.metric == "total_benefits").unwrap();
        assert!(benefits.flagged);
        let costs = r.deviations.iter().find(|d| d.metric == "total_costs").unwrap();
        assert!(!costs.flagged);
        assert_eq!(costs.relative_gap, Some(0.0));
        let internal = r.deviations.iter().find(|d| d.metric == "npv_vs_reported_totals").unwrap();
        assert_eq!(internal.computed, Some(38.0));
    }

    fn scenario_strategy() -> impl Strategy<Value = Scenario> {
        let item = (any::<bool>(), 0.0f64..1e5, 0u8..4, 1u32..40);
        prop::collection::vec(item, 1..15).prop_map(|v| {
            let items = v
                .into_iter()
                .enumerate()
                .map(|(i, (cost, raw, t, n))| {
                    let timing = match t {
                        0 => TimingProfile::one_off(n).unwrap(),
                        1 => TimingProfile::RecurringImmediate,
                        2 => TimingProfile::deferred(n % 5 + 1).unwrap(),
                        _ => TimingProfile::periodic(n % 7 + 1).unwrap(),
                    };
                    let kind = if cost { FlowKind::Cost } else { FlowKind::Benefit };
                    fixed(&format!("i{i}"), kind, raw, timing)
                })
                .collect();
            Scenario::new("p", Role::Alternative, 100.0, items)
        })
    }

    proptest! {
        #[test]
        fn roi_is_bcr_minus_one(s in scenario_strategy()) {
            let r = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
            prop_assert_eq!(r.npv, r.pv_benefits - r.pv_costs);
            if r.pv_costs.value() > 0.0 {
                let bcr = r.bcr.unwrap();
                prop_assert!((r.roi.unwrap() - (bcr - 1.0)).abs() <= 1e-9 * bcr.abs().max(1.0));
                let npv = r.npv.value();
                let scale = r.pv_costs.value().max(r.pv_benefits.value());
                if npv.abs() > 1e-9 * scale {
                    prop_assert_eq!(npv > 0.0, bcr > 1.0);
                    prop_assert_eq!(npv > 0.0, r.roi.unwrap() > 0.0);
                }
            }
        }

        #[test]
        fn scaling_items(s in scenario_strategy(), lambda in 0.01f64..100.0) {
            let c = ctx();
            let opts = EvaluationOptions::default();
            let mut scaled = s.clone();
            for it in &mut scaled.items {
                it.raw_amount = it.raw_amount.map(|m| m * lambda);
            }
            let r = evaluate_scenario(&s, &c, &opts).unwrap();
            let q = evaluate_scenario(&scaled, &c, &opts).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-6);
            prop_assert!(close(q.pv_costs.value(), lambda * r.pv_costs.value()));
            prop_assert!(close(q.pv_benefits.value(), lambda * r.pv_benefits.value()));
            prop_assert!(close(q.npv.value(), lambda * r.npv.value()) || r.npv.value().abs() < 1e-6 * r.pv_costs.value().max(1.0));
            if let (Some(a), Some(b)) = (r.bcr, q.bcr) {
                prop_assert!(close(a, b));
            }
        }

        #[test]
        fn evaluation_is_deterministic(s in scenario_strategy()) {
            let a = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
            let b = evaluate_scenario(&s, &ctx(), &EvaluationOptions::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
