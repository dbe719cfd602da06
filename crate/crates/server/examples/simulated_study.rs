//! A complete study run against an in-memory store by oracle agents: GSP
//! chains, dense ratings, then validation of the predicted voices.

use robovoice::sim::WorldParams;
use robovoice_server::agents::{run_study, StudyConfig};
use robovoice_server::Store;

fn main() -> anyhow::Result<()> {
    let store = Store::in_memory();
    let cfg = StudyConfig {
        world: WorldParams { n_stimuli: 12, ..WorldParams::default() },
        ..StudyConfig::default()
    };
    let report = run_study(&store, &cfg)?;
    println!("experiments: {} {} {}", report.gsp_experiment, report.dense_experiment, report.validation_experiment);
    println!("trials answered: {:?}", report.trials);
    for (condition, mean) in &report.means {
        println!("  {condition:<9} {mean:.2}");
    }
    println!("matched vs random p = {:.2e}", report.matched_vs_random.p);
    for id in store.ids() {
        let (_, hash) = store.snapshot_hash(&id)?;
        println!("{id} state hash {hash}");
    }
    Ok(())
}
