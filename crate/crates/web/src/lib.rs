//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export has a plain-Rust counterpart in [`demo`] so the logic can be
//! tested natively.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: divmix::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Grayscale render of a preset object as RGBA bytes (`side × side × 4`).
#[wasm_bindgen]
pub fn render_view_rgba(
    object: &str,
    azimuth: f64,
    elevation: f64,
    scale: f64,
    side: usize,
) -> Result<Vec<u8>, JsValue> {
    demo::render_rgba(object, azimuth, elevation, scale, side).map_err(js_err)
}

/// Child-like vs parent-like views of one object: summary statistics and a
/// shared 2-D MDS embedding, as JSON.
#[wasm_bindgen]
pub fn simulate_diversity(object: &str, views: usize, seed: u32) -> Result<String, JsValue> {
    let sim = demo::simulate(object, views, seed as u64).map_err(js_err)?;
    serde_json::to_string(&sim).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Transfer function of one filter of the default bank (DC centered) as RGBA.
#[wasm_bindgen]
pub fn gabor_filter_rgba(scale: usize, orientation: usize, side: usize) -> Result<Vec<u8>, JsValue> {
    demo::filter_rgba(scale, orientation, side).map_err(js_err)
}

/// Names accepted by the other exports, comma separated.
#[wasm_bindgen]
pub fn object_names() -> String {
    divmix::synth::ObjectSpec::PRESETS.join(",")
}
