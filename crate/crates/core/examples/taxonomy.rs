//! Class evidence on a small hierarchy.
use bart::taxonomy::{ClassEvidence, Taxonomy};

fn main() -> bart::Result<()> {
    let mut t = Taxonomy::new("animals", &["cat", "dog", "trout", "salmon"], None)?;
    t.add_class("Mammal", &["cat", "dog"], None)?;
    t.add_class("Fish", &["trout", "salmon"], None)?;
    t.add_class("Pet", &["cat", "dog", "trout"], None)?;

    t.apply_class_evidence(&ClassEvidence::new("Mammal", 3.0, 1.0)?)?;
    println!("after Mammal (3, 1): {:?}", t.weights());
    t.apply_class_evidence(&ClassEvidence::new("Pet", 1.0, 0.5)?)?;
    for (class, belief) in t.class_beliefs() {
        println!("  {class:<7} {belief:.4}");
    }
    println!("top classes: {:?}", t.top_classes());
    Ok(())
}
