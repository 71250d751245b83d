//! Beliefs on a two-node chain before and after observing the child.
use bart::{compile_source, CompileOptions, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/chain2.bart"), &CompileOptions::default())?;
    let mut session = Session::open(&model, "chain2")?;
    println!("prior      A = {:?}", session.belief("A")?);
    println!("prior      B = {:?}", session.belief("B")?);

    let delta = session.assert_evidence("B", Finding::value("t"))?;
    for change in &delta.changes {
        println!("changed    {} {:?} -> {:?}", change.node, change.old, change.new);
    }
    println!("posterior  A = {:?}", session.belief("A")?);
    Ok(())
}
