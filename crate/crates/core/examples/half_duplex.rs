//! Contrasts the half-duplex repeater baseline with full-duplex operation on
//! one drop: the half-duplex BS uses all its antennas in each phase, has no
//! self-interference or cross-link terms, and pays the 1/2 time-sharing factor.
//!
//! ```text
//! cargo run --release --example half_duplex -- [seed]
//! ```

use repeater_fd::harness::{drop_seed, run_architecture, sample_drop, ArchitectureSpec};
use repeater_fd::sca::ScaSettings;
use repeater_fd::scenario::{PathLossModel, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let config = ScenarioConfig::default();
    let ctx = sample_drop(&config, &PathLossModel::default(), drop_seed(seed, 0, 0), true)?;
    let hd = ctx.hd_real.as_ref().expect("half-duplex channels requested");
    println!(
        "full duplex: {} tx + {} rx antennas; half duplex: {} antennas per phase",
        ctx.real.num_tx_antennas(),
        ctx.real.num_rx_antennas(),
        hd.num_tx_antennas()
    );

    for arch in [ArchitectureSpec::RA_FD_RANDOM, ArchitectureSpec::RA_HD] {
        let out = run_architecture(&ctx, arch, &config, &ScaSettings::default(), false)?;
        let p = &out.performance;
        println!("\n{arch}: objective {:.4}", p.objective);
        println!(
            "{:<6}{:>8}{:>10}{:>12}{:>12}{:>12}",
            "link", "prelog", "SE", "inter-user", "SI/cross", "rep. noise"
        );
        let rows = p.dl.iter().map(|b| ("DL", b)).chain(p.ul.iter().map(|b| ("UL", b)));
        let mut idx = [0usize; 2];
        for (side, b) in rows {
            let i = &mut idx[usize::from(side == "UL")];
            println!(
                "{side}{:<4}{:>8.2}{:>10.4}{:>12.3e}{:>12.3e}{:>12.3e}",
                *i, b.prelog, b.se, b.inter_user, b.cross_link_or_si, b.repeater_noise
            );
            *i += 1;
        }
    }
    Ok(())
}
