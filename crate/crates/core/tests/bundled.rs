use greenval_core::io::{bundled, bundled_ids, load_case_study, CaseStudyDocument};
use greenval_core::ledger::FlowKind;
use greenval_core::monetize::Drivers;
use greenval_core::scenario::{DeviationKind, EvaluationMode, EvaluationOptions, Role};
use greenval_core::Money;

fn doc(id: &str) -> CaseStudyDocument {
    bundled(id).expect("bundled id").expect("bundled dataset is valid")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn bundled_ids_are_listed() {
    assert_eq!(bundled_ids(), vec!["sicily", "emilia-romagna"]);
    assert!(bundled("atlantis").is_none());
}

#[test]
fn sicily_alternative_row_counts() {
    let d = doc("sicily");
    let alt = d.case().alternative;
    let count = |k| alt.items.iter().filter(|i| i.kind == k).count();
    assert_eq!(count(FlowKind::Cost), 19);
    assert_eq!(count(FlowKind::Benefit), 3);
}

#[test]
fn round_trip_is_value_identical() {
    for id in bundled_ids() {
        let d = doc(id);
        let again = load_case_study(&d.to_json()).unwrap();
        assert_eq!(again, d);
        assert_eq!(again.dataset_hash(), d.dataset_hash());
        assert_eq!(again.to_json(), d.to_json());
    }
}

#[test]
fn sicily_totals() {
    let d = doc("sicily");
    let c = d.case().compare(&EvaluationOptions::default()).unwrap();
    let alt = c.report("sicily-with-cw").unwrap();
    assert!(close(alt.pv_costs.value(), 10_494.59, 0.1), "{}", alt.pv_costs);
    assert!(close(alt.pv_benefits.value(), 10_285.71, 0.01), "{}", alt.pv_benefits);
    assert!(close(alt.cost_per_m2, 7.00, 0.01));
    let base = c.report("sicily-without-cw").unwrap();
    assert!(close(base.pv_costs.value(), 2535.65, 0.05), "{}", base.pv_costs);
    assert!(close(base.pv_benefits.value(), 10_866.51, 0.05), "{}", base.pv_benefits);
    assert_eq!(c.recommended, "sicily-without-cw");
    assert!(c.notes.iter().any(|n| n.starts_with("sicily-with-cw: negative NPV")));
}

#[test]
fn emilia_romagna_totals() {
    let d = doc("emilia-romagna");
    let c = d.case().compare(&EvaluationOptions::default()).unwrap();
    let alt = c.report("emilia-romagna-without-cw").unwrap();
    assert!(close(alt.npv.value(), -74.90, 0.5), "{}", alt.npv);
    assert!(close(alt.bcr.unwrap(), 0.97, 0.01));
    let base = c.report("emilia-romagna-with-cw").unwrap();
    assert!(close(base.pv_costs.value(), 2695.95, 0.05), "{}", base.pv_costs);
    assert!(close(base.pv_benefits.value(), 21_149.07, 0.05), "{}", base.pv_benefits);
    assert_eq!(c.recommended, "emilia-romagna-with-cw");
}

#[test]
fn item_values_match_reported_within_tolerance_except_appendix() {
    for id in bundled_ids() {
        let d = doc(id);
        let opts = EvaluationOptions::default();
        for s in &d.scenarios {
            let r = greenval_core::scenario::evaluate_scenario(s, &d.conversion_context, &opts).unwrap();
            for dev in r.deviations.iter().filter(|x| x.flagged && x.item_id.is_some()) {
                let field = match dev.kind {
                    DeviationKind::ItemValue => "value_2019",
                    DeviationKind::ItemRawAmount => "raw_amount",
                    DeviationKind::CrossCheck => "cross_check",
                    _ => unreachable!(),
                };
                let item = dev.item_id.as_deref().unwrap();
                let listed = d
                    .deviation_appendix
                    .iter()
                    .any(|e| e.scenario == s.id && e.item == item && e.field == field);
                assert!(listed, "{id}/{}/{item} {field}: {dev:?}", s.id);
            }
        }
        // Every appendix row corresponds to a recorded gap.
        for e in &d.deviation_appendix {
            let s = d.scenarios.iter().find(|s| s.id == e.scenario).unwrap();
            let r = greenval_core::scenario::evaluate_scenario(s, &d.conversion_context, &opts).unwrap();
            assert!(
                r.deviations.iter().any(|x| x.item_id.as_deref() == Some(e.item.as_str())),
                "stale appendix entry {e:?}"
            );
        }
    }
}

#[test]
fn sicily_ledger_names_known_inconsistencies() {
    let c = doc("sicily").case().compare(&EvaluationOptions::default()).unwrap();
    let alt_npv = c
        .deviations()
        .find(|x| x.scenario_id == "sicily-with-cw" && x.metric == "npv_vs_reported_totals")
        .unwrap();
    assert!(close(alt_npv.computed.unwrap(), 516.75, 0.005));
    assert!(close(alt_npv.reported, 2.46, 1e-9));
    let base_b = c
        .deviations()
        .find(|x| x.scenario_id == "sicily-without-cw" && x.metric == "total_benefits")
        .unwrap();
    assert!(base_b.flagged);
    assert!(close(base_b.reported, 110_479.80, 1e-6));
    let internal = c
        .deviations()
        .find(|x| x.scenario_id == "sicily-without-cw" && x.metric == "total_benefits_vs_reported_bcr")
        .unwrap();
    assert!(internal.flagged);
    assert!(close(internal.computed.unwrap(), 2.16 * 5027.89, 1e-6));
}

#[test]
fn aesthetic_variant_raises_ratios() {
    let d = doc("sicily");
    let c = d.with_variant("aesthetic").unwrap().compare(&EvaluationOptions::default()).unwrap();
    let alt = c.report("sicily-with-cw").unwrap();
    assert!(alt.bcr.unwrap() > 4.0 && alt.bcr.unwrap() < 4.2, "{:?}", alt.bcr);
    assert_eq!(c.recommended, "sicily-with-cw");
}

#[test]
fn water_linear_items_follow_volume() {
    let d = doc("emilia-romagna");
    let case = d.case();
    let opts = EvaluationOptions::default();
    let at = |w: f64| {
        greenval_core::scenario::evaluate_at(&case.baseline, &case.context, &opts, &Drivers { annual_water: Some(w) }).unwrap()
    };
    let nominal = at(7119.0);
    let double = at(2.0 * 7119.0);
    for (a, b) in nominal.items.iter().zip(&double.items) {
        if a.water_linear {
            assert!(close(b.value.value(), 2.0 * a.value.value(), 1e-9 * a.value.value().abs().max(1.0)));
        } else {
            assert_eq!(a.value, b.value);
        }
    }
}

#[test]
fn horizon_mode_signs() {
    let opts = EvaluationOptions { mode: EvaluationMode::HorizonDcf, ..Default::default() };
    let er = doc("emilia-romagna").case().compare(&opts).unwrap();
    let base = er.reports.iter().find(|r| r.role == Role::Baseline).unwrap();
    assert!(base.npv > Money::ZERO);
}
