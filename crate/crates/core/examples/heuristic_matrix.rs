//! Mean final `n_true` for every fixed true-party heuristic against every
//! fixed false-party heuristic, per opinion model.
//!
//! ```text
//! cargo run --release --example heuristic_matrix -- data/urv_standin.edges 10
//! ```

use slcim::harness::load_dataset;
use slcim::propagation::{run_episode, EpisodeConfig, FixedAgent};
use slcim::seeding::derive_seed;
use slcim::{OpinionModel, StrategyKind, TrustModel};

fn main() -> slcim::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/urv_standin.edges".into());
    let runs: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let graph = load_dataset(path.as_ref())?;
    let kinds: Vec<StrategyKind> = StrategyKind::FIXED.into_iter().chain([StrategyKind::Random]).collect();
    for model in OpinionModel::ALL {
        println!("{model}: rows TP, columns FP");
        print!("{:>8}", "");
        for fp in &kinds {
            print!("{:>9}", fp.name());
        }
        println!();
        for &tp in &kinds {
            print!("{:>8}", tp.name());
            for &fp in &kinds {
                let mut total = 0.0;
                for run in 0..runs {
                    let cfg = EpisodeConfig {
                        model: TrustModel::new(model),
                        rng_seed: derive_seed(7, &[run]),
                        ..Default::default()
                    };
                    total += run_episode(&graph, &cfg, &mut FixedAgent(fp), &mut FixedAgent(tp))?.n_true as f64;
                }
                print!("{:>9.1}", total / runs as f64);
            }
            println!();
        }
    }
    Ok(())
}
