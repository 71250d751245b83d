//! Hypothetical findings, soft evidence and retraction.
use bart::{compile_source, BoolExpr, CompileOptions, Finding, Session};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/gates.bart"), &CompileOptions::default())?;
    let mut s = Session::open(&model, "gates")?;

    let hypothetical = s.whatif(&[("Rest".into(), Finding::value("yes"))])?;
    println!("if resting, Flu = {:?}", hypothetical.get("Flu").unwrap());
    println!("committed   Flu = {:?} (revision {})", s.belief("Flu")?, s.revision());

    s.assert_evidence("Cold", Finding::likelihood(vec![1.0, 4.0])?)?;
    println!("soft Cold   Flu = {:?}", s.belief("Flu")?);
    let either = BoolExpr::Or(vec![BoolExpr::is("Flu", "present"), BoolExpr::is("Cold", "present")]);
    println!("P(Flu or Cold) = {:.6}", s.probability_of(&either)?);

    s.retract_evidence("Cold")?;
    println!("retracted   Flu = {:?} (revision {})", s.belief("Flu")?, s.revision());
    Ok(())
}
