//! Optimizes the repeater gains of one drop and compares the result with
//! the initial gains and with repeaters switched off.
//!
//! ```text
//! cargo run --release --example optimize_drop -- [seed] [num_repeaters]
//! ```

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repeater_fd::channel::{sample_realization, RepeaterWeights};
use repeater_fd::performance::{evaluate_weights, Duplex};
use repeater_fd::sca::{optimize, ScaSettings};
use repeater_fd::scenario::{derive_fading, sample_geometry, PathLossModel, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let mut config = ScenarioConfig::default();
    if let Some(l) = args.next() {
        config.num_repeaters = l.parse()?;
    }
    config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = sample_geometry(&config, &mut rng);
    let fading = derive_fading(&geometry, &PathLossModel::default())?;
    let real = sample_realization(&fading, &config, &mut rng)?;

    let off = RepeaterWeights::zeros(config.num_repeaters);
    let (bare, _) = evaluate_weights(&real, &fading, &off, &config, Duplex::Full)?;

    let started = Instant::now();
    let res = optimize(&real, &fading, &config, &ScaSettings::default(), Duplex::Full)?;
    let elapsed = started.elapsed();

    println!("drop seed {seed}, L = {}", config.num_repeaters);
    println!("repeaters off   objective {:8.4}", bare.objective);
    println!("initial gains   objective {:8.4}", res.initial_objective);
    println!(
        "optimized       objective {:8.4}  (min DL SE {:.4}, min UL SE {:.4})",
        res.performance.objective, res.performance.min_dl_se, res.performance.min_ul_se
    );
    println!(
        "iterations {}  converged {}  max slack {:.2e}  time {:.2?}",
        res.iterations, res.converged, res.residual_slack, elapsed
    );
    let newton: usize = res.trace.iter().map(|t| t.newton_iterations).sum();
    println!(
        "Newton steps {newton} ({:.1} per subproblem)",
        newton as f64 / res.trace.len().max(1) as f64
    );
    let gains: Vec<String> = res.alpha_star.as_slice().iter().map(|a| format!("{a:.1}")).collect();
    println!("alpha* = [{}]", gains.join(", "));
    Ok(())
}
