//! Parsing, template expansion and canonical printing.
use bart::netlang::{expand_templates, parse, serialize};

fn main() -> bart::Result<()> {
    let models = parse(include_str!("../fixtures/library.bart"))?;
    let expanded = expand_templates(&models)?;
    println!("{}", serialize(&expanded));
    assert_eq!(parse(&serialize(&models))?, models);
    Ok(())
}
