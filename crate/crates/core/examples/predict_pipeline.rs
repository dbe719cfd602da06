//! The full simulated pipeline: GSP chains and dense ratings build a corpus,
//! voices are predicted for every stimulus under five conditions and rated
//! by oracle participants.

use robovoice::analysis::Condition;
use robovoice::sim::{run_pipeline, OracleWorld, PipelineParams, WorldParams};

fn main() -> robovoice::Result<()> {
    let world = OracleWorld::new(WorldParams { n_stimuli: 30, ..WorldParams::default() }, 2024);
    let r = run_pipeline(&world, &PipelineParams::default(), 7)?;
    for c in [Condition::Matched, Condition::Closest, Condition::Selected, Condition::Worst, Condition::Random] {
        println!("{c:?}: mean match rating {:.2}", r.mean(c));
    }
    println!("matched vs random: p = {:.2e}", r.matched_vs_random.p);
    Ok(())
}
