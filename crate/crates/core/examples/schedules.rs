//! The settling schedule does not change the answer.
use std::sync::Arc;

use bart::compiler::aggregate;
use bart::engine::{Schedule, SessionOptions};
use bart::random::{self, NetworkShape};
use bart::Session;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bart::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = random::polytree(&mut rng, &NetworkShape::default());
    let evidence = random::evidence(&mut rng, &net, 3);
    let compiled = Arc::new(aggregate(&net, 4096)?);
    let mut reference = None;
    for schedule in [Schedule::Fifo, Schedule::Lifo, Schedule::Random(7), Schedule::Concurrent] {
        let mut s = Session::new(compiled.clone(), SessionOptions { schedule, fast_path: true });
        for (node, f) in evidence.iter() {
            s.assert_evidence(node, f.clone())?;
        }
        let beliefs = s.beliefs();
        let diff = reference.as_ref().map(|r| beliefs.max_abs_diff(r)).unwrap_or(0.0);
        println!("{schedule:?}: {:?}, max difference {diff:e}", s.settle_stats());
        reference.get_or_insert(beliefs);
    }
    Ok(())
}
