//! Sweep the median landmark noise of the default population and report
//! per-condition accuracy, overall accuracy and bootstrap support for the
//! expected orderings.
//!
//! cargo run --release -p deixis --example calibrate -- seed=7 n=20 sigma=4,5,6.5,8 wrist=13 check=0.9

use deixis::selector::SelectorConfig;
use deixis::sim::{run_experiment, PopulationModel, SceneSpec};
use deixis::stats::{accuracy_table, bootstrap_orderings, confusion, EXPECTED_ORDERINGS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut seeds = vec![7u64];
    let mut participants = 20u32;
    let mut sigmas_mm = vec![4.0, 5.0, 6.5, 8.0, 10.0];
    let mut pop = PopulationModel::default();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected key=value, got `{arg}`"))?;
        let list = || v.split(',').map(str::parse::<f64>).collect::<Result<Vec<_>, _>>();
        match k {
            "seed" => seeds = v.split(',').map(str::parse).collect::<Result<_, _>>()?,
            "n" => participants = v.parse()?,
            "sigma" => sigmas_mm = list()?,
            "wrist" => pop.wrist_offset_deg = v.parse()?,
            "wrist_sd" => pop.offset_sd_deg = v.parse()?,
            "azimuth_sd" => pop.azimuth_sd_deg = v.parse()?,
            "check" => pop.check_prob = v.parse()?,
            "corrections" => pop.max_corrections = v.parse()?,
            "log_sd" => pop.sigma_kp_log_sd = v.parse()?,
            _ => return Err(format!("unknown key `{k}`").into()),
        }
    }

    let scene = SceneSpec::desk();
    let cfg = SelectorConfig::default();
    println!("seed sigma_mm  F/On   W/On   F/Off  W/Off  overall  support: F>=W on, F>=W off, On>=Off F, On>=Off W");
    for &seed in &seeds {
        for &s in &sigmas_mm {
            let recs = run_experiment(participants, &scene, &pop.with_sigma(s / 1000.0), &cfg, seed)?;
            let t = accuracy_table(&recs)?;
            let overall = confusion(&recs, None).accuracy().unwrap_or(0.0);
            let support = bootstrap_orderings(&recs, &EXPECTED_ORDERINGS, 1000, seed)?;
            print!("{seed:>4} {s:>8.2}");
            for c in &t {
                print!(" {:>5.1}%", 100.0 * c.stats.mean);
            }
            print!("  {:>5.1}%  ", 100.0 * overall);
            for o in &support {
                print!(" {:.3}", o.frequency);
            }
            println!();
        }
    }
    Ok(())
}
