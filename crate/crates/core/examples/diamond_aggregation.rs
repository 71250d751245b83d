//! A network with an undirected loop is compiled into a polytree by merging
//! the loop's middle nodes.
use bart::compiler::detect_loops;
use bart::model::joint_marginals;
use bart::{compile_source, CompileOptions, Evidence, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/diamond.bart"), &CompileOptions::default())?;
    let net = model.network("diamond")?;
    println!("loops: {:?}", detect_loops(&net.original));
    for node in &net.nodes {
        println!("compiled node {:<8} states {}", node.name, node.card());
    }
    println!("compounds: {:?}", net.aggregation.compounds);

    let mut session = Session::open(&model, "diamond")?;
    session.assert_evidence("D", Finding::value("t"))?;
    let oracle = joint_marginals(&net.original, &Evidence::new().with("D", Finding::value("t")))?;
    println!("engine A = {:?}", session.belief("A")?);
    println!("oracle A = {:?}", oracle.get("A").unwrap());
    Ok(())
}
