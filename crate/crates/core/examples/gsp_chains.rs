//! Gibbs sampling with simulated people: chains move one slider at a time
//! toward each stimulus' ideal voice. Prints the mean standardized step size
//! per iteration and how far the chains end from their targets.

use robovoice::sim::{run_gsp_sim, OracleWorld, WorldParams};

fn main() -> robovoice::Result<()> {
    let world = OracleWorld::new(WorldParams { n_stimuli: 20, ..WorldParams::default() }, 5);
    let stimuli: Vec<usize> = (0..world.stimuli.len()).collect();
    for raters in [1, 5] {
        let run = run_gsp_sim(&world, &stimuli, raters, 16, 3)?;
        let r = &run.report;
        println!("{raters} rater(s) per node");
        for (i, d) in r.mean_standardized_diff.iter().enumerate() {
            println!("  iter {:>2}  diff {:.3}  {}", i + 1, d, "#".repeat((d * 60.0) as usize));
        }
        println!("  mean final distance {:.4}", r.mean_final_distance());
    }
    Ok(())
}
