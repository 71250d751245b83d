//! Writing and reading the compiled `.bartc` format.
use bart::compiler::{load, save};
use bart::{compile_source, CompileOptions};

fn main() -> bart::Result<()> {
    let model = compile_source(include_str!("../fixtures/diamond.bart"), &CompileOptions::default())?;
    let bytes = save(&model);
    let path = std::env::temp_dir().join("diamond.bartc");
    std::fs::write(&path, &bytes).expect("temp dir is writable");
    let back = load(&std::fs::read(&path).expect("file was just written"))?;
    println!("{} bytes, source hash {}", bytes.len(), back.source_hash);
    println!("round trip equal: {}", back == model);
    Ok(())
}
