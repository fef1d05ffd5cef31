#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use tsem::delays::DelayedModel;
use tsem::doc::{LoadedModel, ModelDocument, ScenarioDocument};
use tsem::engine::Scenario;
use tsem::model::{Assignment, Model};
use tsem::trace::PeriodicSeq;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> LoadedModel {
    let text = std::fs::read_to_string(fixture(&format!("{name}.model.json"))).unwrap();
    ModelDocument::parse(&text).unwrap().load().unwrap()
}

pub fn onestep(name: &str) -> Arc<Model> {
    match load(name) {
        LoadedModel::OneStep(m) => m,
        LoadedModel::Delayed(_) => panic!("{name} is delayed"),
    }
}

pub fn delayed(name: &str) -> Arc<DelayedModel> {
    match load(name) {
        LoadedModel::Delayed(m) => m,
        LoadedModel::OneStep(_) => panic!("{name} is one-step"),
    }
}

pub fn scenario_parts(model: &LoadedModel, name: &str) -> (PeriodicSeq, Assignment) {
    let text = std::fs::read_to_string(fixture(&format!("{name}.scenario.json"))).unwrap();
    ScenarioDocument::parse(&text).unwrap().load(model.signature()).unwrap()
}

pub fn scenario(model: &str, scenario: &str) -> Scenario {
    let m = onestep(model);
    let (ctx, init) = scenario_parts(&LoadedModel::OneStep(m.clone()), scenario);
    Scenario::new(m, ctx, init).unwrap()
}
