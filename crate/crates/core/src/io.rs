//! Case-study documents, bundled datasets and report emission.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ledger::LedgerError;
use crate::monetize::{ConversionContext, ItemRecord, MonetizeError};
use crate::money::fixed;
use crate::scenario::{Case, ComparisonReport, EvaluationMode, KpiReport, Role, RoiBase, Scenario, ScenarioError};
use crate::sensitivity::{apply_override, ForecastBand, Override, ParameterSpec, SweepResult, UncertaintySpec};

pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate item id {item:?} in scenario {scenario:?}")]
    DuplicateItemId { scenario: String, item: String },
    #[error("item {item:?} in scenario {scenario:?} needs a rebase factor for {currency} {year}")]
    MissingRebaseFactor {
        scenario: String,
        item: String,
        currency: String,
        year: i32,
    },
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
}

impl From<serde_json::Error> for LoadError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => LoadError::Schema(e.to_string()),
            Category::Io | Category::Syntax | Category::Eof => LoadError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteContext {
    Urban,
    Rural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub id: String,
    pub name: String,
    pub location: String,
    pub context: SiteContext,
    pub cw_type: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub influent: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub flow_rate: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_notes: Vec<String>,
}

/// An item added to one scenario by a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddedItem {
    pub scenario: String,
    pub item: ItemRecord,
}

/// A named, alternative reading of the source applied on top of the base case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Override>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add_items: Vec<AddedItem>,
}

/// A known gap between a shipped item and the figure printed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixEntry {
    pub scenario: String,
    pub item: String,
    /// `value_2019`, `raw_amount` or `cross_check`.
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyDocument {
    pub schema_version: String,
    pub metadata: Metadata,
    pub conversion_context: ConversionContext,
    pub scenarios: Vec<Scenario>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviation_appendix: Vec<AppendixEntry>,
}

/// Parses and fully validates a case-study document.
pub fn load_case_study(bytes: &[u8]) -> Result<CaseStudyDocument, LoadError> {
    let doc: CaseStudyDocument = serde_json::from_slice(bytes)?;
    doc.validate()?;
    Ok(doc)
}

fn schema(message: impl Into<String>) -> LoadError {
    LoadError::Schema(message.into())
}

fn scenario_error(e: ScenarioError) -> LoadError {
    match e {
        ScenarioError::Ledger(LedgerError::DuplicateId(item)) => LoadError::DuplicateItemId {
            scenario: String::new(),
            item,
        },
        other => schema(other.to_string()),
    }
}

fn check_scenario(s: &Scenario, ctx: &ConversionContext) -> Result<(), LoadError> {
    let mut ids = HashSet::new();
    for item in &s.items {
        if !ids.insert(item.id.as_str()) {
            return Err(LoadError::DuplicateItemId {
                scenario: s.id.clone(),
                item: item.id.clone(),
            });
        }
    }
    s.validate().map_err(scenario_error)?;
    for item in &s.items {
        for (currency, year) in item.currency_pairs(ctx) {
            if let Err(MonetizeError::MissingRebaseFactor { .. }) = ctx.factor(&currency, year) {
                return Err(LoadError::MissingRebaseFactor {
                    scenario: s.id.clone(),
                    item: item.id.clone(),
                    currency,
                    year,
                });
            }
        }
    }
    Ok(())
}

impl CaseStudyDocument {
    pub fn id(&self) -> &str {
        &self.metadata.id
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        if self.metadata.id.trim().is_empty() {
            return Err(schema("metadata.id must not be empty"));
        }
        self.conversion_context.validate().map_err(|e| schema(e.to_string()))?;
        if self.scenarios.len() != 2 {
            return Err(schema(format!("expected exactly two scenarios, found {}", self.scenarios.len())));
        }
        for role in [Role::Baseline, Role::Alternative] {
            let n = self.scenarios.iter().filter(|s| s.role == role).count();
            if n != 1 {
                return Err(schema(format!("expected exactly one {role:?} scenario, found {n}").to_lowercase()));
            }
        }
        if self.scenarios[0].id == self.scenarios[1].id {
            return Err(schema(format!("scenario id {:?} used twice", self.scenarios[0].id)));
        }
        for s in &self.scenarios {
            check_scenario(s, &self.conversion_context)?;
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.id.as_str()) {
                return Err(schema(format!("variant id {:?} used twice", v.id)));
            }
            self.apply_variant(v)?;
        }
        for entry in &self.deviation_appendix {
            let known = self
                .scenarios
                .iter()
                .any(|s| s.id == entry.scenario && s.item(&entry.item).is_some());
            if !known {
                return Err(schema(format!(
                    "deviation appendix names unknown item {}/{}",
                    entry.scenario, entry.item
                )));
            }
        }
        Ok(())
    }

    fn scenario(&self, role: Role) -> &Scenario {
        self.scenarios.iter().find(|s| s.role == role).expect("validated document")
    }

    /// The base case, with scenarios ordered baseline first.
    pub fn case(&self) -> Case {
        Case {
            context: self.conversion_context.clone(),
            baseline: self.scenario(Role::Baseline).clone(),
            alternative: self.scenario(Role::Alternative).clone(),
        }
    }

    fn apply_variant(&self, v: &Variant) -> Result<Case, LoadError> {
        let mut case = self.case();
        for o in &v.overrides {
            apply_override(&mut case, o).map_err(|e| schema(format!("variant {}: {e}", v.id)))?;
        }
        for added in &v.add_items {
            let target = case
                .scenarios_mut()
                .into_iter()
                .find(|s| s.id == added.scenario)
                .ok_or_else(|| schema(format!("variant {}: unknown scenario {:?}", v.id, added.scenario)))?;
            target.items.push(added.item.clone());
        }
        for s in case.scenarios() {
            check_scenario(s, &case.context)?;
        }
        Ok(case)
    }

    pub fn with_variant(&self, id: &str) -> Result<Case, LoadError> {
        let v = self
            .variants
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| LoadError::UnknownVariant(id.into()))?;
        self.apply_variant(v)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("documents always serialize");
        out.push(b'\n');
        out
    }

    /// SHA-256 of the compact serialization, so formatting does not change it.
    pub fn dataset_hash(&self) -> String {
        let compact = serde_json::to_vec(self).expect("documents always serialize");
        hex::encode(Sha256::digest(&compact))
    }
}

const BUNDLED: [(&str, &str); 2] = [
    ("sicily", include_str!("../data/sicily.json")),
    ("emilia-romagna", include_str!("../data/emilia-romagna.json")),
];

pub fn bundled_ids() -> Vec<&'static str> {
    BUNDLED.iter().map(|(id, _)| *id).collect()
}

pub fn bundled_source(id: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(k, _)| *k == id).map(|(_, src)| *src)
}

pub fn bundled(id: &str) -> Option<Result<CaseStudyDocument, LoadError>> {
    bundled_source(id).map(|src| load_case_study(src.as_bytes()))
}

/// Everything needed to rerun a report bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub dataset_id: String,
    pub dataset_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Effective context after overrides.
    pub context: ConversionContext,
    pub mode: EvaluationMode,
    pub roi_base: RoiBase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Override>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParameterSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Evaluation { reports: Vec<KpiReport> },
    Comparison(ComparisonReport),
    Sweep(SweepResult),
    Forecast { bands: Vec<ForecastBand> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub manifest: RunManifest,
    pub report: ReportBody,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}, expected json or csv")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

fn ratio_cell(v: Option<f64>) -> String {
    v.map(|x| fixed(x, 4)).unwrap_or_default()
}

const KPI_COLUMNS: [&str; 10] = [
    "scenario_id",
    "role",
    "mode",
    "pv_costs",
    "pv_benefits",
    "npv",
    "bcr",
    "roi",
    "cost_per_m2",
    "npv_per_m2",
];

fn kpi_cells(r: &KpiReport) -> Vec<String> {
    let role = match r.role {
        Role::Baseline => "baseline",
        Role::Alternative => "alternative",
    };
    let mode = match r.mode {
        EvaluationMode::Annualized => "annualized",
        EvaluationMode::HorizonDcf => "horizon-dcf",
    };
    vec![
        r.scenario_id.clone(),
        role.into(),
        mode.into(),
        r.pv_costs.to_string(),
        r.pv_benefits.to_string(),
        r.npv.to_string(),
        ratio_cell(r.bcr),
        ratio_cell(r.roi),
        fixed(r.cost_per_m2, 4),
        fixed(r.npv_per_m2, 4),
    ]
}

fn csv_rows(report: &ReportBody) -> Vec<Vec<String>> {
    let strings = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    let mut rows = Vec::new();
    match report {
        ReportBody::Evaluation { reports } => {
            rows.push(strings(&KPI_COLUMNS));
            rows.extend(reports.iter().map(kpi_cells));
        }
        ReportBody::Comparison(c) => {
            let mut header = strings(&KPI_COLUMNS);
            header.push("recommended".into());
            rows.push(header);
            for r in &c.reports {
                let mut row = kpi_cells(r);
                row.push((r.scenario_id == c.recommended).to_string());
                rows.push(row);
            }
        }
        ReportBody::Sweep(s) => {
            let mut header: Vec<String> = s.parameters.iter().map(ToString::to_string).collect();
            header.extend(strings(&KPI_COLUMNS));
            header.push("recommended".into());
            rows.push(header);
            for cell in &s.cells {
                for r in &cell.comparison.reports {
                    let mut row: Vec<String> = cell.values.iter().map(|v| v.to_string()).collect();
                    row.extend(kpi_cells(r));
                    row.push((r.scenario_id == cell.comparison.recommended).to_string());
                    rows.push(row);
                }
            }
        }
        ReportBody::Forecast { bands } => {
            rows.push(strings(&["scenario_id", "year", "mean", "lower95", "upper95"]));
            for b in bands {
                for (i, year) in b.years.iter().enumerate() {
                    rows.push(vec![
                        b.scenario_id.clone(),
                        year.to_string(),
                        b.mean[i].to_string(),
                        b.lower95[i].to_string(),
                        b.upper95[i].to_string(),
                    ]);
                }
            }
        }
    }
    rows
}

/// Serializes a report. JSON carries the manifest; CSV carries the report table only.
pub fn emit_report(doc: &ReportDocument, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(doc).expect("reports always serialize");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in csv_rows(&doc.report) {
                w.write_record(&row).expect("writing to memory");
            }
            w.into_inner().expect("writing to memory")
        }
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<ReportDocument, LoadError> {
    Ok(serde_json::from_slice(bytes)?)
}
