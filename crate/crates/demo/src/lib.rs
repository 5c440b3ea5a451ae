//! Browser bindings. Every entry point takes JSON text and returns JSON text;
//! errors come back as `{"error": "..."}` so the page needs no exception path.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use enlargement_core::bundle::{associated_processes, classify, pseudo_stopping_test};
use enlargement_core::decompose::{thin_thick_decompose, triple_decompose};
use enlargement_core::enlargement::immersion_test;
use enlargement_core::honest::is_honest;
use enlargement_core::{FilteredSpace, RandomTime};

fn load(space_json: &str, tau_json: &str) -> Result<(FilteredSpace, RandomTime), String> {
    let space = FilteredSpace::from_json(space_json).map_err(|e| format!("space: {e}"))?;
    let tau = RandomTime::from_json(&space, tau_json).map_err(|e| format!("tau: {e}"))?;
    Ok((space, tau))
}

fn respond(r: Result<Value, String>) -> String {
    let v = r.unwrap_or_else(|e| json!({ "error": e }));
    serde_json::to_string_pretty(&v).expect("values serialize")
}

/// Classification with the bundle `Z, Z~, A°, A^p, m` as CSV.
#[wasm_bindgen]
pub fn bundle(space_json: &str, tau_json: &str) -> String {
    respond(load(space_json, tau_json).map(|(space, tau)| {
        json!({
            "classification": classify(&tau, &space),
            "csv": associated_processes(&tau, &space).to_csv(&space),
        })
    }))
}

/// Thin/thick split, or accessible/inaccessible/thick when `triple`.
#[wasm_bindgen]
pub fn decompose(space_json: &str, tau_json: &str, triple: bool) -> String {
    respond(load(space_json, tau_json).map(|(space, tau)| {
        if triple {
            let d = triple_decompose(&tau, &space);
            json!({
                "accessible": d.accessible.to_description(&space),
                "inaccessible": d.inaccessible.to_description(&space),
                "thick": d.thick.to_description(&space),
            })
        } else {
            let d = thin_thick_decompose(&tau, &space);
            json!({
                "thin": d.thin.to_description(&space),
                "thick": d.thick.to_description(&space),
            })
        }
    }))
}

/// Honesty certificate, immersion and the pseudo-stopping test.
#[wasm_bindgen]
pub fn properties(space_json: &str, tau_json: &str) -> String {
    respond(load(space_json, tau_json).and_then(|(space, tau)| {
        let immersion = immersion_test(&tau, &space).map_err(|e| e.to_string())?;
        Ok(json!({
            "honest": is_honest(&tau, &space).to_json_value(&space),
            "immersion": immersion,
            "pseudo_stopping": pseudo_stopping_test(&tau, &space),
        }))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPACE: &str = r#"{"grid":["0","1"],"atoms":[{"id":"a","p":"1/2"},{"id":"b","p":"1/2"}],
        "partitions":[[["a","b"]],[["a"],["b"]]]}"#;
    const TAU: &str = r#"{"per_leaf":[{"leaf":["a"],"atoms":[["1","1"]]},{"leaf":["b"],"atoms":[["inf","1"]]}]}"#;

    #[test]
    fn entry_points_answer_in_json() {
        let b: Value = serde_json::from_str(&bundle(SPACE, TAU)).unwrap();
        assert_eq!(b["classification"]["kind"], "thin");
        let d: Value = serde_json::from_str(&decompose(SPACE, TAU, false)).unwrap();
        assert!(d["thin"]["per_leaf"].is_array());
        let p: Value = serde_json::from_str(&properties(SPACE, TAU)).unwrap();
        assert!(p["honest"]["honest"].is_boolean());
    }

    #[test]
    fn bad_input_is_reported_not_thrown() {
        let v: Value = serde_json::from_str(&bundle("{", TAU)).unwrap();
        assert!(v["error"].as_str().unwrap().starts_with("space:"));
    }
}
