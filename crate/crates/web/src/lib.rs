//! Browser bindings: simulate a small cell, decode it, inspect subframes
//! and summarise logs.

use std::cell::RefCell;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ltewatch::cellsim::{generate, GroundTruth, ScenarioConfig};
use ltewatch::dcilog::{parse_log, render_log, DciLogRecord};
use ltewatch::grid::{IqTrace, MemorySource, Ofdm, ResourceGrid, SYMBOLS_PER_SUBFRAME};
use ltewatch::pipeline::{decode_monolithic, stats, stats_csv, PipelineConfig};
use ltewatch::verifier::match_truth;

/// Longest run the page accepts; traces live in memory.
const MAX_FRAMES: usize = 50;

struct Session {
    scenario: ScenarioConfig,
    trace: IqTrace,
    truth: GroundTruth,
    records: Vec<DciLogRecord>,
}

thread_local! {
    static SESSION: RefCell<Option<Session>> = const { RefCell::new(None) };
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

fn record_json(r: &DciLogRecord) -> Value {
    let (sfn, sf) = ltewatch::dcilog::sfn_sf(r.index);
    json!({
        "index": r.index,
        "time": format!("{sfn}.{sf}"),
        "rnti": format!("{:04x}", r.rnti),
        "direction": if r.direction == ltewatch::pdcch::Direction::Downlink { "DL" } else { "UL" },
        "format": r.format.as_str(),
        "mcs": r.mcs,
        "n_rb": r.n_rb,
        "tbs": r.tbs,
        "cce": r.cce_start,
        "aggregation": r.aggregation,
        "path": r.decode_path.map(|p| p.as_str()),
    })
}

/// Runs a scenario (key = value text) through generation and decoding and
/// returns a JSON summary with the decoded log.
pub fn run_scenario(config: &str, finetune: bool) -> Result<String, String> {
    let scenario = ScenarioConfig::parse(config).map_err(fail)?;
    if scenario.frames > MAX_FRAMES {
        return Err(fail(format!("at most {MAX_FRAMES} frames in the browser")));
    }
    let (trace, truth) = generate(&scenario).map_err(fail)?;
    let pcfg = PipelineConfig { finetune, ..PipelineConfig::default() };
    let out = decode_monolithic(&mut MemorySource::new(&trace), &pcfg).map_err(fail)?;
    let first = u64::from(scenario.initial_sfn) * 10;
    let m = match_truth(&out.records, &truth.dcis, first..first + 10 * scenario.frames as u64);
    let summary = json!({
        "frames": scenario.frames,
        "truth": truth.dcis.len(),
        "decoded": out.records.len(),
        "missed": m.missed.len(),
        "spurious": m.spurious.len(),
        "complete_frames": m.complete_frames,
        "frames_with_traffic": m.frames,
        "rb_ratio": m.rb_ratio(),
        "random_accesses": truth.rars.len(),
        "tuner": out.summary.tuner_dcis,
        "uncertain": out.summary.uncertain_locations,
        "events": out.log.render(),
        "log": render_log(&out.records),
        "records": out.records.iter().map(record_json).collect::<Vec<_>>(),
        "first_index": first,
    });
    SESSION.with(|s| {
        *s.borrow_mut() = Some(Session {
            scenario,
            trace,
            truth,
            records: out.records,
        })
    });
    Ok(summary.to_string())
}

/// Received resource-grid magnitudes of one subframe of the last run, with
/// the messages sent and decoded there.
pub fn subframe(index: u32) -> Result<String, String> {
    SESSION.with(|s| {
        let s = s.borrow();
        let s = s.as_ref().ok_or_else(|| fail("run a scenario first"))?;
        let cfg = s.scenario.cfg;
        let first = u64::from(s.scenario.initial_sfn) * 10;
        let index = u64::from(index);
        let local = index.checked_sub(first).filter(|&i| i < 10 * s.scenario.frames as u64).ok_or_else(|| fail("subframe outside the run"))?;
        let mut grid = ResourceGrid::new(&cfg);
        Ofdm::new(&cfg)
            .demodulate_into(&s.trace.samples, local as usize * cfg.samples_per_subframe(), &mut grid)
            .map_err(fail)?;
        let mags: Vec<f32> = (0..SYMBOLS_PER_SUBFRAME)
            .flat_map(|l| grid.symbol(l).iter().map(|v| v.norm() as f32))
            .collect();
        let sent: Vec<Value> = s.truth.dcis.iter().filter(|r| r.index == index).map(record_json).collect();
        let got: Vec<Value> = s.records.iter().filter(|r| r.index == index).map(record_json).collect();
        Ok(json!({
            "symbols": SYMBOLS_PER_SUBFRAME,
            "subcarriers": cfg.n_sc(),
            "cfi": s.truth.subframe(index).map(|t| t.cfi),
            "magnitude": mags,
            "sent": sent,
            "decoded": got,
        })
        .to_string())
    })
}

/// Rate and MCS table (CSV) from log text.
pub fn log_stats(log: &str, bin_s: f64, top: usize) -> Result<String, String> {
    let records = parse_log(log).map_err(fail)?;
    Ok(stats_csv(&stats(&records, bin_s, top).map_err(fail)?))
}

/// Default scenario text for the page.
#[wasm_bindgen(js_name = defaultScenario)]
pub fn default_scenario() -> String {
    let mut s = ScenarioConfig {
        frames: 20,
        initial_ues: 4,
        ..ScenarioConfig::default()
    };
    s.impairments.snr_db = Some(15.0);
    s.render()
}

#[wasm_bindgen(js_name = runScenario)]
pub fn js_run_scenario(config: &str, finetune: bool) -> Result<String, JsValue> {
    js(run_scenario(config, finetune))
}

#[wasm_bindgen(js_name = subframe)]
pub fn js_subframe(index: u32) -> Result<String, JsValue> {
    js(subframe(index))
}

#[wasm_bindgen(js_name = logStats)]
pub fn js_log_stats(log: &str, bin_s: f64, top: usize) -> Result<String, JsValue> {
    js(log_stats(log, bin_s, top))
}
