//! Run the virtual 2×2 study and write the trial table as CSV.
//!
//! cargo run --release -p deixis --example simulate -- [participants] [seed] [out.csv]

use deixis::selector::SelectorConfig;
use deixis::sim::{run_experiment, PopulationModel, SceneSpec};
use deixis::stats::{accuracy_table, format_accuracy_table, write_trials, write_trials_path};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let participants: u32 = args.next().map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(42), |s| s.parse())?;
    let out = args.next();

    let recs = run_experiment(participants, &SceneSpec::desk(), &PopulationModel::default(), &SelectorConfig::default(), seed)?;
    eprint!("{}", format_accuracy_table(&accuracy_table(&recs)?));
    match out {
        Some(path) => write_trials_path(path, &recs)?,
        None => write_trials(std::io::stdout().lock(), &recs)?,
    }
    Ok(())
}
