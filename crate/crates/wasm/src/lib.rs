//! Browser demo: three operations over the calibcc core, each returning a
//! JSON document with inline SVG charts.
//!
//! The plain functions in [`demo`] hold the logic and are tested natively;
//! the `#[wasm_bindgen]` exports only serialize their results.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_json<T: serde::Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Generates data from a known map, fits a calibrator and returns
/// before/after metrics and reliability diagrams.
#[wasm_bindgen]
pub fn calibrate(slope: f64, intercept: f64, records: usize, bins: usize, seed: u64) -> Result<String, JsError> {
    to_json(demo::calibrate(slope, intercept, records, bins, seed))
}

/// Replays one stream whose map changes a third of the way through and
/// returns per-window ECE of a frozen and an adaptive calibrator.
#[wasm_bindgen]
pub fn replay_shift(slope: f64, intercept: f64, window: usize, seed: u64) -> Result<String, JsError> {
    to_json(demo::replay_shift(slope, intercept, window, seed))
}

/// Edit distance, preserved ratio and binary label for a suggestion pair.
#[wasm_bindgen]
pub fn label(expected: &str, generated: &str) -> Result<String, JsError> {
    to_json(demo::label(expected, generated))
}
