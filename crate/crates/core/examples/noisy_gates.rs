//! Canonical gates: closed-form messages agree with the expanded tables.
use bart::engine::SessionOptions;
use bart::{compile_source, CompileOptions, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/gates.bart"), &CompileOptions::default())?;
    for node in &model.network("gates")?.nodes {
        let tag = node.fast_path.as_ref().map(|g| g.kind().keyword()).unwrap_or("-");
        println!("{:<9} fast path {:<10} tensor entries {}", node.name, tag, node.tensor.data().len());
    }
    for fast_path in [true, false] {
        let options = SessionOptions { fast_path, ..SessionOptions::default() };
        let mut s = Session::open_with(&model, "gates", options)?;
        s.assert_evidence("Working", Finding::value("absent"))?;
        println!("fast_path={fast_path:<5} P(Flu | not working) = {:?}", s.belief("Flu")?);
    }
    Ok(())
}
