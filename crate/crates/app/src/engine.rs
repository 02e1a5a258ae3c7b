//! The single evaluation path shared by the CLI and the HTTP service, so both
//! fronts emit identical report bytes for identical parameters.

use greenval_core::io::{
    bundled, bundled_ids, load_case_study, CaseStudyDocument, LoadError, ReportBody, ReportDocument, RunManifest,
    TOOL_VERSION,
};
use greenval_core::scenario::{Case, EvaluationMode, EvaluationOptions, RoiBase, ScenarioError, WaterVolume};
use greenval_core::sensitivity::{
    self, apply_override, Distribution, Override, ParameterSpec, ParameterTarget, SensitivityError, UncertaintySpec,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SAMPLES: u32 = 1000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

/// Operation parameters common to every command. All fields are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub variant: Option<String>,
    pub discount_rate: Option<f64>,
    /// Defaults to `annualized`, or `horizon-dcf` for forecasts.
    pub mode: Option<EvaluationMode>,
    pub roi_base: RoiBase,
    pub horizon: Option<u32>,
    pub overrides: Vec<Override>,
    /// Sweep axes.
    pub parameters: Vec<ParameterSpec>,
    /// Forecast only this scenario; both when absent.
    pub scenario: Option<String>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
    pub distribution: Option<Distribution>,
    pub water_range: Option<WaterVolume>,
}

/// Resolves a bundled id. Accepts an optional `.json` suffix and unique prefixes.
pub fn bundled_by_name(name: &str) -> Option<Result<CaseStudyDocument, LoadError>> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    if let Some(doc) = bundled(stem) {
        return Some(doc);
    }
    let mut hits = bundled_ids().into_iter().filter(|id| id.starts_with(stem));
    match (hits.next(), hits.next()) {
        (Some(id), None) if !stem.is_empty() => bundled(id),
        _ => None,
    }
}

/// Parses an inline dataset given as JSON.
pub fn inline_dataset(value: &serde_json::Value) -> Result<CaseStudyDocument, EngineError> {
    let bytes = serde_json::to_vec(value).expect("values always serialize");
    Ok(load_case_study(&bytes)?)
}

impl RunParams {
    fn mode_or(&self, default: EvaluationMode) -> EvaluationMode {
        self.mode.unwrap_or(default)
    }

    /// Discount rate first, then explicit overrides in order.
    fn all_overrides(&self) -> Vec<Override> {
        let rate = self.discount_rate.map(|value| Override { target: ParameterTarget::DiscountRate, value });
        rate.into_iter().chain(self.overrides.iter().cloned()).collect()
    }

    fn case(&self, doc: &CaseStudyDocument) -> Result<Case, EngineError> {
        let mut case = match &self.variant {
            Some(v) => doc.with_variant(v)?,
            None => doc.case(),
        };
        for o in self.all_overrides() {
            apply_override(&mut case, &o)?;
        }
        Ok(case)
    }

    fn options(&self, default_mode: EvaluationMode) -> EvaluationOptions {
        EvaluationOptions {
            mode: self.mode_or(default_mode),
            roi_base: self.roi_base,
            horizon: self.horizon,
        }
    }

    fn manifest(&self, doc: &CaseStudyDocument, case: &Case, opts: &EvaluationOptions) -> RunManifest {
        RunManifest {
            tool_version: TOOL_VERSION.into(),
            dataset_id: doc.id().into(),
            dataset_hash: doc.dataset_hash(),
            variant: self.variant.clone(),
            context: case.context.clone(),
            mode: opts.mode,
            roi_base: opts.roi_base,
            horizon: opts.horizon,
            overrides: self.all_overrides(),
            parameters: Vec::new(),
            scenarios: Vec::new(),
            uncertainty: None,
        }
    }

    pub fn uncertainty(&self) -> UncertaintySpec {
        UncertaintySpec {
            distribution: self.distribution.unwrap_or_default(),
            samples: self.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            water_range: self.water_range,
        }
    }
}

pub fn evaluate(doc: &CaseStudyDocument, params: &RunParams) -> Result<ReportDocument, EngineError> {
    let case = params.case(doc)?;
    let opts = params.options(EvaluationMode::Annualized);
    let reports = case.evaluate(&opts)?;
    Ok(ReportDocument {
        manifest: params.manifest(doc, &case, &opts),
        report: ReportBody::Evaluation { reports },
    })
}

pub fn compare(doc: &CaseStudyDocument, params: &RunParams) -> Result<ReportDocument, EngineError> {
    let case = params.case(doc)?;
    let opts = params.options(EvaluationMode::Annualized);
    let comparison = case.compare(&opts)?;
    Ok(ReportDocument {
        manifest: params.manifest(doc, &case, &opts),
        report: ReportBody::Comparison(comparison),
    })
}

pub fn sweep(doc: &CaseStudyDocument, params: &RunParams) -> Result<ReportDocument, EngineError> {
    let case = params.case(doc)?;
    let opts = params.options(EvaluationMode::Annualized);
    let result = sensitivity::sweep(&case, &params.parameters, &opts)?;
    let mut manifest = params.manifest(doc, &case, &opts);
    manifest.parameters = params.parameters.clone();
    Ok(ReportDocument {
        manifest,
        report: ReportBody::Sweep(result),
    })
}

pub fn forecast(doc: &CaseStudyDocument, params: &RunParams) -> Result<ReportDocument, EngineError> {
    let case = params.case(doc)?;
    let opts = params.options(EvaluationMode::HorizonDcf);
    let horizon = opts.horizon.unwrap_or(case.context.lifespan);
    let u = params.uncertainty();
    let scenarios = match &params.scenario {
        Some(id) => vec![case.scenario(id).ok_or_else(|| EngineError::UnknownScenario(id.clone()))?],
        None => case.scenarios().to_vec(),
    };
    let bands = scenarios
        .iter()
        .map(|s| sensitivity::forecast_npv(s, &case.context, horizon, opts.mode, Some(&u)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut manifest = params.manifest(doc, &case, &opts);
    manifest.horizon = Some(horizon);
    manifest.scenarios = scenarios.iter().map(|s| s.id.clone()).collect();
    manifest.uncertainty = Some(u);
    Ok(ReportDocument {
        manifest,
        report: ReportBody::Forecast { bands },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Evaluate,
    Compare,
    Sweep,
    Forecast,
}

pub fn run(op: Operation, doc: &CaseStudyDocument, params: &RunParams) -> Result<ReportDocument, EngineError> {
    match op {
        Operation::Evaluate => evaluate(doc, params),
        Operation::Compare => compare(doc, params),
        Operation::Sweep => sweep(doc, params),
        Operation::Forecast => forecast(doc, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn er() -> CaseStudyDocument {
        bundled("emilia-romagna").unwrap().unwrap()
    }

    #[test]
    fn name_resolution() {
        assert!(bundled_by_name("sicily.json").is_some());
        assert!(bundled_by_name("emilia.json").is_some());
        assert!(bundled_by_name("emilia-romagna").is_some());
        assert!(bundled_by_name("").is_none());
        assert!(bundled_by_name("mars").is_none());
    }

    #[test]
    fn discount_rate_goes_into_manifest() {
        let p = RunParams { discount_rate: Some(0.075), ..Default::default() };
        let r = compare(&er(), &p).unwrap();
        assert_eq!(r.manifest.context.discount.rate(), 0.075);
        assert_eq!(r.manifest.overrides, vec![Override { target: ParameterTarget::DiscountRate, value: 0.075 }]);
    }

    #[test]
    fn forecast_defaults() {
        let r = forecast(&er(), &RunParams { samples: Some(10), ..Default::default() }).unwrap();
        assert_eq!(r.manifest.mode, EvaluationMode::HorizonDcf);
        assert_eq!(r.manifest.horizon, Some(30));
        assert_eq!(r.manifest.scenarios.len(), 2);
        let ReportBody::Forecast { bands } = r.report else { panic!() };
        assert_eq!(bands[0].years.len(), 31);
    }

    #[test]
    fn forecast_errors() {
        let zero = RunParams { samples: Some(0), ..Default::default() };
        assert!(matches!(forecast(&er(), &zero), Err(EngineError::Sensitivity(_))));
        let ghost = RunParams { scenario: Some("ghost".into()), ..Default::default() };
        assert!(matches!(forecast(&er(), &ghost), Err(EngineError::UnknownScenario(_))));
    }

    #[test]
    fn manifest_reproduces_run() {
        let p = RunParams {
            overrides: vec![Override { target: ParameterTarget::WaterVolume, value: 9000.0 }],
            samples: Some(50),
            seed: Some(5),
            ..Default::default()
        };
        let first = forecast(&er(), &p).unwrap();
        let m = &first.manifest;
        let replay = RunParams {
            variant: m.variant.clone(),
            mode: Some(m.mode),
            roi_base: m.roi_base,
            horizon: m.horizon,
            overrides: m.overrides.clone(),
            samples: m.uncertainty.map(|u| u.samples),
            seed: m.uncertainty.map(|u| u.seed),
            distribution: m.uncertainty.map(|u| u.distribution),
            water_range: m.uncertainty.and_then(|u| u.water_range),
            ..Default::default()
        };
        assert_eq!(forecast(&er(), &replay).unwrap(), first);
    }
}
