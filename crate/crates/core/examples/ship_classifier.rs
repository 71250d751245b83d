//! Establish-refine over a ship taxonomy with a JSON-lines feed.
use bart::classifier::{parse_feed, Controller, ControllerConfig};
use bart::{compile_source, CompileOptions};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/ships.bart"), &CompileOptions::default())?;
    let mut c = Controller::new(&model, "ships", ControllerConfig::default())?;
    c.push_feed(parse_feed(include_str!("../fixtures/ships_feed.jsonl"))?);
    let report = c.run()?;
    for event in &report.trace {
        println!("{}", serde_json::to_string(event).unwrap());
    }
    println!("established: {:?}", report.established);
    println!("statuses: {:?}", report.statuses);
    let suggestions = c.suggest_evidence("Destroyer")?;
    println!("to settle Destroyer, observe: {:?}", suggestions.ranking);
    Ok(())
}
