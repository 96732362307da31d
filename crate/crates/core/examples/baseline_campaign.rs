//! Runs a paired campaign over all four architectures at the default scale
//! and prints medians, means and gain ratios.
//!
//! ```text
//! cargo run --release --example baseline_campaign -- [drops] [seed]
//! ```

use std::time::Instant;

use repeater_fd::harness::{run_campaign, summarize, ArchitectureSpec, CampaignSettings};
use repeater_fd::sca::ScaSettings;
use repeater_fd::scenario::{PathLossModel, ScenarioConfig};

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let drops: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let config = ScenarioConfig {
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    let campaign = CampaignSettings {
        drops,
        archs: ArchitectureSpec::defaults(),
        ..CampaignSettings::default()
    };

    let started = Instant::now();
    let result = run_campaign(&config, &PathLossModel::default(), &ScaSettings::default(), &campaign)?;
    let summary = summarize(&result);
    println!(
        "{drops} drops in {:.1?} ({} redraws)",
        started.elapsed(),
        summary.rejections
    );
    println!(
        "{:<14}{:>10}{:>10}{:>10}{:>10}{:>11}",
        "arch", "med DL", "med UL", "mean DL", "mean UL", "mean obj"
    );
    for a in &summary.architectures {
        println!(
            "{:<14}{:>10}{:>10}{:>10}{:>10}{:>11}",
            a.arch,
            fmt(a.median_dl_se),
            fmt(a.median_ul_se),
            fmt(a.mean_dl_se),
            fmt(a.mean_ul_se),
            fmt(a.mean_objective)
        );
    }
    for g in &summary.gain_ratios {
        println!(
            "{} / {}: median DL x{}  median UL x{}  mean objective x{}",
            g.reference,
            g.baseline,
            fmt(g.median_dl_se),
            fmt(g.median_ul_se),
            fmt(g.mean_objective)
        );
    }
    Ok(())
}
