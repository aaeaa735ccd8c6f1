//! Analyze a trial table: accuracy and time per condition, confusion matrix
//! and the repeated-measures ANOVA. Without an argument a fresh study is
//! simulated first.
//!
//! cargo run --release -p deixis --example analyze -- [trials.csv]

use deixis::selector::SelectorConfig;
use deixis::sim::{run_experiment, PopulationModel, SceneSpec};
use deixis::stats::{analyze, bootstrap_orderings, read_trials_path, EXPECTED_ORDERINGS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let recs = match std::env::args().nth(1) {
        Some(path) => read_trials_path(path)?,
        None => run_experiment(20, &SceneSpec::desk(), &PopulationModel::default(), &SelectorConfig::default(), 42)?,
    };
    print!("{}", analyze(&recs)?.to_text());
    println!("\nBootstrap support (1000 resamples)");
    for s in bootstrap_orderings(&recs, &EXPECTED_ORDERINGS, 1000, 1)? {
        println!("  {} >= {}: {:.3}", s.better, s.worse, s.frequency);
    }
    Ok(())
}
