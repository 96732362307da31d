//! Property tests over random drops, programs and samples.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repeater_fd::beamforming::{build_beamformers, inner};
use repeater_fd::channel::{read_realization, sample_realization, write_realization, RepeaterWeights};
use repeater_fd::config::RunConfig;
use repeater_fd::convex::{parse_program, write_program, Constraint, ConvexProgram};
use repeater_fd::harness::{cdf, median};
use repeater_fd::performance::{evaluate_weights, repeater_input_powers, Duplex};
use repeater_fd::sca::enforce_power_bounds;
use repeater_fd::scenario::{derive_fading, sample_geometry, LargeScaleFading, PathLossModel, ScenarioConfig};

fn small(num_repeaters: usize) -> ScenarioConfig {
    ScenarioConfig {
        num_tx_antennas: 6,
        num_rx_antennas: 6,
        num_dl_ues: 2,
        num_ul_ues: 2,
        num_repeaters,
        ..ScenarioConfig::default()
    }
}

fn drop(config: &ScenarioConfig, seed: u64) -> (LargeScaleFading, repeater_fd::channel::ChannelRealization) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = sample_geometry(config, &mut rng);
    let f = derive_fading(&g, &PathLossModel::default()).unwrap();
    let r = sample_realization(&f, config, &mut rng).unwrap();
    (f, r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cdf_probabilities_are_ranks(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let table = cdf(&values).unwrap();
        let n = values.len() as f64;
        for (i, (x, p)) in table.iter().enumerate() {
            prop_assert_eq!(*p, (i + 1) as f64 / n);
            // Fraction of samples at or below x is at least p.
            let below = values.iter().filter(|v| **v <= *x).count() as f64 / n;
            prop_assert!(below >= *p);
        }
        prop_assert!(table.windows(2).all(|w| w[0].0 <= w[1].0));
        let m = median(&values).unwrap();
        let lo = values.iter().filter(|v| **v < m).count();
        let hi = values.iter().filter(|v| **v > m).count();
        prop_assert!(lo <= values.len() / 2 && hi <= values.len() / 2);
    }

    #[test]
    fn zf_nulls_cross_terms(seed in any::<u64>(), scale in 0.0f64..1.0) {
        let config = small(3);
        let (f, r) = drop(&config, seed);
        let w = RepeaterWeights(vec![scale * config.repeater_max_gain; 3]);
        let bf = build_beamformers(&r, &w, &f).unwrap();
        let dl = r.compound_dl_all(&w).unwrap();
        for (k, h) in dl.iter().enumerate() {
            for (j, v) in bf.v.iter().enumerate() {
                if j != k {
                    prop_assert!(inner(h, v).norm() <= 1e-9 * inner(h, &bf.v[k]).norm());
                }
            }
            prop_assert!((bf.v[k].norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn power_projection_is_feasible(seed in any::<u64>(), gains in prop::collection::vec(0.0f64..1.0, 3)) {
        let config = small(3);
        let (f, r) = drop(&config, seed);
        let alpha = RepeaterWeights(gains.iter().map(|u| u * config.repeater_max_gain).collect());
        for duplex in [Duplex::Full, Duplex::Half] {
            let (w, _) = enforce_power_bounds(&r, &f, &config, duplex, alpha.clone()).unwrap();
            let (_, bf) = evaluate_weights(&r, &f, &w, &config, duplex).unwrap();
            let psi = repeater_input_powers(&r, &bf, &config, duplex);
            for (a, p) in w.0.iter().zip(&psi) {
                prop_assert!(*a >= 0.0 && *a <= config.repeater_max_gain);
                prop_assert!(a * a * p <= config.repeater_max_power * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn zero_gains_match_no_repeaters(seed in any::<u64>()) {
        // With α = 0 the repeaters are invisible: the drop evaluates like FD-mMIMO.
        let config = small(3);
        let (f, r) = drop(&config, seed);
        let (with, _) = evaluate_weights(&r, &f, &RepeaterWeights::zeros(3), &config, Duplex::Full).unwrap();
        let (bare, _) = evaluate_weights(
            &r.truncate_repeaters(0), &f.truncate_repeaters(0), &RepeaterWeights::zeros(0), &config, Duplex::Full,
        ).unwrap();
        prop_assert_eq!(with.objective, bare.objective);
    }

    #[test]
    fn channel_dump_round_trips(seed in any::<u64>(), l in 0usize..4) {
        let (_, r) = drop(&small(l), seed);
        let mut bytes = Vec::new();
        write_realization(&r, &mut bytes).unwrap();
        prop_assert_eq!(read_realization(bytes.as_slice()).unwrap(), r);
        prop_assert!(read_realization(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn program_dump_round_trips(
        lower in prop::collection::vec(-10.0f64..0.0, 3),
        width in prop::collection::vec(0.1f64..10.0, 3),
        c in prop::collection::vec(-5.0f64..5.0, 3),
        m in prop::collection::vec(-2.0f64..2.0, 9),
        b in 0.1f64..10.0,
    ) {
        let upper: Vec<f64> = lower.iter().zip(&width).map(|(l, w)| l + w).collect();
        let mut p = ConvexProgram::new(lower, upper);
        p.objective = c.clone();
        let a = DMatrix::from_row_slice(3, 3, &m);
        p.constraints.push(Constraint::Quadratic { q: &a * a.transpose(), g: c.clone(), b });
        p.constraints.push(Constraint::Affine { a: c, b });
        p.constraints.push(Constraint::Exp2 { i: 0, j: 2 });
        prop_assert!(p.validate().is_ok());
        prop_assert_eq!(parse_program(&write_program(&p)).unwrap(), p);
    }

    #[test]
    fn config_overrides_round_trip(l in 0usize..12, side in 5.0f64..200.0, drops in 1usize..500) {
        let overrides = vec![
            format!("scenario.num_repeaters={l}"),
            format!("scenario.area_side={side:?}"),
            format!("campaign.drops={drops}"),
        ];
        let cfg = RunConfig::load(None, &overrides).unwrap();
        prop_assert_eq!(cfg.scenario.num_repeaters, l);
        prop_assert_eq!(cfg.scenario.area_side, side);
        prop_assert_eq!(cfg.campaign.drops, drops);
        prop_assert_eq!(RunConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
