//! Builds ZF precoders and combiners for the compound channels at random
//! repeater gains and reports the residual inter-user leakage.
//!
//! ```text
//! cargo run --release --example zero_forcing -- [seed]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repeater_fd::beamforming::{build_beamformers, inner};
use repeater_fd::channel::{sample_realization, RepeaterWeights};
use repeater_fd::scenario::{derive_fading, sample_geometry, PathLossModel, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(11);
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
    let dl = real.compound_dl_all(&alpha)?;
    let ul = real.compound_ul_all(&alpha)?;

    println!("DL |h_k^H v_j| (rows k, columns j)");
    let mut leak: f64 = 0.0;
    for (k, h) in dl.iter().enumerate() {
        let row: Vec<String> =
            bf.v.iter()
                .enumerate()
                .map(|(j, v)| {
                    let g = inner(h, v).norm();
                    if j != k {
                        leak = leak.max(g / inner(h, &bf.v[k]).norm());
                    }
                    format!("{g:10.3e}")
                })
                .collect();
        println!("  {}", row.join(" "));
    }
    println!("max relative DL leakage {leak:.2e}");

    let mut leak: f64 = 0.0;
    for (q, w) in bf.w.iter().enumerate() {
        let own = inner(w, &ul[q]).norm();
        for (qp, h) in ul.iter().enumerate() {
            if qp != q {
                leak = leak.max(inner(w, h).norm() / own);
            }
        }
    }
    println!("max relative UL leakage {leak:.2e}");

    // With unit-norm beamformers the effective gain is √γ / ‖v̄‖.
    for k in 0..dl.len() {
        println!(
            "DL UE {k}: γ = {:.3e}, ‖v̄‖ = {:.3e}, |h^H v| = {:.3e}, √γ/‖v̄‖ = {:.3e}",
            bf.gamma_dl[k],
            bf.vbar_norm[k],
            inner(&dl[k], &bf.v[k]).norm(),
            bf.c_dl[k]
        );
    }
    Ok(())
}
