//! Compares the closed-form SINR of every link with a symbol-level Monte
//! Carlo estimate on one drop.
//!
//! ```text
//! cargo run --release --example sinr_oracle -- [seed] [samples]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repeater_fd::beamforming::build_beamformers;
use repeater_fd::channel::{sample_realization, RepeaterWeights};
use repeater_fd::performance::{dl_sinr, empirical_sinr, ul_sinr, LinkTarget};
use repeater_fd::scenario::{derive_fading, sample_geometry, PathLossModel, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let samples: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200_000);

    let config = ScenarioConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = sample_geometry(&config, &mut rng);
    let fading = derive_fading(&geometry, &PathLossModel::default())?;
    let real = sample_realization(&fading, &config, &mut rng)?;
    let alpha = RepeaterWeights(
        (0..config.num_repeaters)
            .map(|_| rng.random::<f64>() * config.repeater_max_gain)
            .collect(),
    );
    let bf = build_beamformers(&real, &alpha, &fading)?;

    println!(
        "{:<6}{:>12}{:>12}{:>10}{:>10}",
        "link", "analytic", "empirical", "rel err", "std err"
    );
    let mut worst: f64 = 0.0;
    let links = (0..real.num_dl())
        .map(LinkTarget::Dl)
        .chain((0..real.num_ul()).map(LinkTarget::Ul));
    for target in links {
        let (name, analytic) = match target {
            LinkTarget::Dl(k) => (format!("DL{k}"), dl_sinr(k, &real, &alpha, &bf, &config)?.sinr),
            LinkTarget::Ul(q) => (format!("UL{q}"), ul_sinr(q, &real, &alpha, &bf, &config)?.sinr),
        };
        let est = empirical_sinr(target, &real, &alpha, &bf, &config, samples, &mut rng)?;
        let rel = (est.sinr - analytic).abs() / analytic;
        worst = worst.max(rel);
        println!(
            "{name:<6}{analytic:>12.4e}{:>12.4e}{rel:>10.2e}{:>10.2e}",
            est.sinr,
            est.std_error / analytic
        );
    }
    println!("worst relative error {worst:.2e} with {samples} samples");
    Ok(())
}
