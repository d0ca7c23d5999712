use ltewatch_web::{default_scenario, log_stats, run_scenario, subframe};
use serde_json::Value;

#[test]
fn scenario_subframe_and_stats() {
    let cfg = default_scenario().replace("frames = 20", "frames = 6");
    let v: Value = serde_json::from_str(&run_scenario(&cfg, true).unwrap()).unwrap();
    assert_eq!(v["missed"], 0);
    assert_eq!(v["spurious"], 0);
    assert_eq!(v["truth"], v["decoded"]);

    let first = v["first_index"].as_u64().unwrap();
    let sf: Value = serde_json::from_str(&subframe(first as u32 + 1).unwrap()).unwrap();
    assert_eq!(sf["magnitude"].as_array().unwrap().len(), 14 * sf["subcarriers"].as_u64().unwrap() as usize);
    let strip = |x: &Value| -> Vec<Value> {
        x.as_array().unwrap().iter().map(|d| {
            let mut d = d.clone();
            d["path"] = Value::Null;
            d
        }).collect()
    };
    assert_eq!(strip(&sf["sent"]), strip(&sf["decoded"]));
    assert!(subframe(first as u32 + 1000).is_err());

    assert!(log_stats("12 not a record", 1.0, 2).is_err());
    assert_eq!(log_stats("", 1.0, 2).unwrap().lines().next().unwrap(), "bin_start_s,scope,rnti,dl_bps,ul_bps,messages,mcs_mean,mcs_std");
}

#[test]
fn long_runs_and_bad_input_are_rejected() {
    let cfg = default_scenario().replace("frames = 20", "frames = 500");
    assert!(run_scenario(&cfg, false).is_err());
    assert!(run_scenario("frames = banana", false).is_err());
    assert!(log_stats("", 0.0, 2).is_err());
}

#[test]
fn summary_log_feeds_stats() {
    let cfg = default_scenario().replace("frames = 20", "frames = 4");
    let v: Value = serde_json::from_str(&run_scenario(&cfg, false).unwrap()).unwrap();
    let csv = log_stats(v["log"].as_str().unwrap(), 0.01, 2).unwrap();
    assert!(csv.lines().count() > 1);
}
