//! Generate a synthetic market with a planted negative drift after one
//! event label, run every pipeline stage on it and compare the recovered
//! effects with the ground truth.

use std::error::Error;

use eventalpha::backtest::read_series;
use eventalpha::pipeline::{Pipeline, RunConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let out = dir.path();

    Pipeline::with_out(RunConfig::default(), out)?.synth()?;
    let config = RunConfig::load(&out.join("synth").join("run.json"))?;
    let pipeline = Pipeline::with_out(config, out)?;
    for report in pipeline.run_all()? {
        println!("{:<9} {:?}", report.stage, report.counts);
    }

    let report = std::fs::read_to_string(out.join("report").join("report.md"))?;
    println!("\n{report}");

    let planted = out.join("backtest").join("equity_event_speculation_rumor_1d.csv");
    let curve = read_series(&planted)?;
    let final_value = curve.last().map_or(1.0, |p| p.1);
    println!("planted label equity after {} event days: {final_value:.4}", curve.len());
    assert!(final_value < 1.0, "negative drift should lose money for a long position");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
