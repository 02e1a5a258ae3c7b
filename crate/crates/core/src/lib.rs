//! Cost-benefit valuation of constructed wetlands against conventional
//! alternatives.

pub mod io;
pub mod ledger;
pub mod monetize;
pub mod money;
pub mod scenario;
pub mod sensitivity;

pub use io::{CaseStudyDocument, LoadError, ReportBody, ReportDocument, RunManifest};
pub use ledger::{CashFlowItem, DiscountModel, FlowKind, TimingProfile};
pub use monetize::{ConversionContext, ItemRecord, Monetization, RebaseFactor, UnitRate};
pub use money::Money;
pub use scenario::{Case, ComparisonReport, EvaluationMode, EvaluationOptions, KpiReport, RoiBase, Scenario};
pub use sensitivity::{Distribution, ForecastBand, Override, ParameterSpec, ParameterTarget, UncertaintySpec};
