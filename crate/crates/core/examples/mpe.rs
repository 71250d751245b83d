//! Most probable explanation with and without evidence.
use bart::{compile_source, CompileOptions, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/gates.bart"), &CompileOptions::default())?;
    let mut s = Session::open(&model, "gates")?;
    let e = s.mpe()?;
    println!("no evidence: p = {:.6}", e.probability);
    for (node, value) in &e.assignment {
        println!("  {node} = {value}");
    }
    s.assert_evidence("Sneeze", Finding::value("present"))?;
    s.assert_evidence("Fatigue", Finding::value("heavy"))?;
    let e = s.mpe()?;
    println!("sneezing and heavy fatigue: p = {:.6}", e.probability);
    for (node, value) in &e.assignment {
        println!("  {node} = {value}");
    }
    Ok(())
}
