//! Draws one drop, checks the empirical channel powers against the
//! large-scale fading, and round-trips the realization through the binary
//! dump format.
//!
//! ```text
//! cargo run --release --example channel_realization -- [seed] [dump_path]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repeater_fd::channel::{read_realization, sample_realization, write_realization, RepeaterWeights};
use repeater_fd::scenario::{derive_fading, sample_geometry, PathLossModel, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let path = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("repeater_fd_channel.bin"));

    let config = ScenarioConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = sample_geometry(&config, &mut rng);
    let fading = derive_fading(&geometry, &PathLossModel::default())?;
    let real = sample_realization(&fading, &config, &mut rng)?;

    println!(
        "M_t = {}, M_r = {}, K = {}, Q = {}, L = {}",
        real.num_tx_antennas(),
        real.num_rx_antennas(),
        real.num_dl(),
        real.num_ul(),
        real.num_repeaters()
    );
    // Each direct channel has i.i.d. CN(0, β) entries, so ‖h‖²/(M β) should be near 1.
    println!("{:<6}{:>14}{:>14}", "UE", "DL ‖h‖²/Mβ", "UL ‖h‖²/Mβ");
    for k in 0..real.num_dl().max(real.num_ul()) {
        let dl = real
            .h_bd
            .get(k)
            .map(|h| h.norm_squared() / (real.num_tx_antennas() as f64 * fading.beta_bd[k]));
        let ul = real
            .h_ub
            .get(k)
            .map(|h| h.norm_squared() / (real.num_rx_antennas() as f64 * fading.beta_ub[k]));
        let f = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.3}"));
        println!("{k:<6}{:>14}{:>14}", f(dl), f(ul));
    }

    let alpha = RepeaterWeights(vec![0.5 * config.repeater_max_gain; real.num_repeaters()]);
    let direct = real.h_bd[0].norm();
    let compound = real.compound_dl(&alpha, 0)?.norm();
    println!("DL UE 0: ‖direct‖ = {direct:.3e}, ‖compound at α = α_max/2‖ = {compound:.3e}");

    write_realization(&real, BufWriter::new(File::create(&path)?))?;
    let back = read_realization(BufReader::new(File::open(&path)?))?;
    let bytes = std::fs::metadata(&path)?.len();
    println!(
        "dump {} ({bytes} bytes) round trip {}",
        path.display(),
        if back == real { "exact" } else { "MISMATCH" }
    );
    Ok(())
}
