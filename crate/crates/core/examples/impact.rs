//! Which observation would move the target's belief the most.
use bart::engine::ImpactMetric;
use bart::{compile_source, CompileOptions, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/gates.bart"), &CompileOptions::default())?;
    let mut s = Session::open(&model, "gates")?;
    s.assert_evidence("Sneeze", Finding::value("present"))?;
    let report = s.impact("Flu")?;
    println!("squared error impact on {}:", report.target);
    for (node, score) in &report.ranking {
        println!("  {node:<9} {score:.6}");
    }
    let l1 = s.impact_with("Flu", ImpactMetric::AbsoluteError)?;
    println!("absolute error ranking: {:?}", l1.ranking.iter().map(|(n, _)| n).collect::<Vec<_>>());
    Ok(())
}
