//! Solving a one-decision influence diagram.
use bart::influence::{evaluate_policy, solve, Policy, SolveOptions};
use bart::{compile_source, CompileOptions, Evidence, Finding};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/one_shot.bart"), &CompileOptions::default())?;
    let diagram = model.diagram("one_shot")?;

    let r = solve(diagram, &Evidence::new(), &SolveOptions::default())?;
    println!("best action {:?}, expected utility {}", r.action("D"), r.expected_utility);
    println!("rollout: {:?}", r.stats);

    let known = Evidence::new().with("C", Finding::value("c2"));
    let r = solve(diagram, &known, &SolveOptions::default())?;
    println!("knowing C = c2: {:?}, {}", r.action("D"), r.expected_utility);

    println!("uniform policy: {}", evaluate_policy(diagram, &Policy::Uniform, &Evidence::new())?);
    Ok(())
}
