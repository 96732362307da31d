use super::*;
use crate::channel::C64;

fn small() -> ScenarioConfig {
    ScenarioConfig {
        num_tx_antennas: 8,
        num_rx_antennas: 8,
        num_dl_ues: 2,
        num_ul_ues: 2,
        num_repeaters: 4,
        ..ScenarioConfig::default()
    }
}

fn campaign(archs: Vec<ArchitectureSpec>, drops: usize) -> CampaignSettings {
    CampaignSettings {
        drops,
        jobs: 1,
        archs,
        ..CampaignSettings::default()
    }
}

fn run(config: &ScenarioConfig, archs: Vec<ArchitectureSpec>, drops: usize) -> CampaignResult {
    run_campaign(
        config,
        &PathLossModel::default(),
        &ScaSettings::default(),
        &campaign(archs, drops),
    )
    .unwrap()
}

#[test]
fn cdf_examples() {
    assert_eq!(cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
    let c = cdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
    assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.75), (4.0, 1.0)]);
    assert!(cdf(&[]).is_err());
}

#[test]
fn median_and_mean() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
    assert_eq!(median(&[]), None);
}

#[test]
fn architecture_names_round_trip() {
    for a in [
        ArchitectureSpec::RA_FD_OPT,
        ArchitectureSpec::RA_FD_RANDOM,
        ArchitectureSpec::RA_HD,
        ArchitectureSpec::RA_HD_OPT,
        ArchitectureSpec::FD_MMIMO,
    ] {
        assert_eq!(a.slug().parse::<ArchitectureSpec>().unwrap(), a);
        assert_eq!(a.label().parse::<ArchitectureSpec>().unwrap(), a);
    }
    assert!("ra-fd".parse::<ArchitectureSpec>().is_err());
}

#[test]
fn drop_seeds_differ() {
    let a = drop_seed(1, 0, 0);
    assert_ne!(a, drop_seed(1, 1, 0));
    assert_ne!(a, drop_seed(1, 0, 1));
    assert_ne!(a, drop_seed(2, 0, 0));
}

#[test]
fn single_drop_has_one_entry_per_ue() {
    let cfg = small();
    let r = run(
        &cfg,
        vec![ArchitectureSpec::RA_FD_RANDOM, ArchitectureSpec::FD_MMIMO],
        1,
    );
    assert_eq!(r.num_drops(), 1);
    for i in 0..2 {
        let s = r.series(i);
        assert_eq!(s.dl_se.len(), cfg.num_dl_ues);
        assert_eq!(s.ul_se.len(), cfg.num_ul_ues);
        assert_eq!(s.objective.len(), 1);
        assert!(s.dl_se.iter().chain(&s.ul_se).all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn fd_mmimo_ignores_repeaters() {
    let cfg = small();
    let bare = ScenarioConfig {
        num_repeaters: 0,
        ..cfg.clone()
    };
    let with = run(&cfg, vec![ArchitectureSpec::FD_MMIMO], 3);
    let without = run(&bare, vec![ArchitectureSpec::FD_MMIMO], 3);
    for (a, b) in with.drops.iter().zip(&without.drops) {
        assert_eq!(a.outcomes[0].performance, b.outcomes[0].performance);
    }
}

#[test]
fn zero_gain_random_collapses_to_fd_mmimo() {
    let cfg = ScenarioConfig {
        repeater_max_gain: 0.0,
        repeater_max_power: 1e12,
        ..small()
    };
    let r = run(
        &cfg,
        vec![ArchitectureSpec::RA_FD_RANDOM, ArchitectureSpec::FD_MMIMO],
        3,
    );
    for d in &r.drops {
        let (a, b) = (&d.outcomes[0].performance, &d.outcomes[1].performance);
        assert!(d.outcomes[0].alpha.iter().all(|&x| x == 0.0));
        for (x, y) in a.dl.iter().chain(&a.ul).zip(b.dl.iter().chain(&b.ul)) {
            assert!((x.se - y.se).abs() <= 1e-12 * y.se.max(1.0), "{} vs {}", x.se, y.se);
        }
    }
}

#[test]
fn campaign_is_deterministic_across_workers() {
    let cfg = small();
    let archs = vec![
        ArchitectureSpec::RA_FD_RANDOM,
        ArchitectureSpec::RA_HD,
        ArchitectureSpec::FD_MMIMO,
    ];
    let a = run(&cfg, archs.clone(), 4);
    let b = run_campaign(
        &cfg,
        &PathLossModel::default(),
        &ScaSettings::default(),
        &CampaignSettings {
            jobs: 3,
            ..campaign(archs, 4)
        },
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn hd_single_user_matches_textbook() {
    let cfg = ScenarioConfig {
        num_dl_ues: 1,
        num_ul_ues: 1,
        ..small()
    };
    let ctx = sample_drop(&cfg, &PathLossModel::default(), 11, true).unwrap();
    let real = ctx.hd_real.as_ref().unwrap().truncate_repeaters(0);
    let fading = ctx.fading.truncate_repeaters(0);
    let m = cfg.total_antennas();
    assert_eq!(real.h_bd[0].len(), m);
    assert_eq!(real.h_ub[0].len(), m);
    let perf = evaluate_hd(&real, &fading, &hd_config(&cfg), &RepeaterWeights::zeros(0)).unwrap();
    let snr_dl = cfg.dl_power * real.h_bd[0].norm_squared() / cfg.noise_power;
    let snr_ul = cfg.ul_power * real.h_ub[0].norm_squared() / cfg.noise_power;
    let expect_dl = 0.5 * (1.0 + snr_dl).log2();
    let expect_ul = 0.5 * (1.0 + snr_ul).log2();
    assert!((perf.dl[0].se - expect_dl).abs() < 1e-12 * expect_dl);
    assert!((perf.ul[0].se - expect_ul).abs() < 1e-12 * expect_ul);
}

#[test]
fn full_duplex_doubles_half_duplex_without_cross_terms() {
    let cfg = ScenarioConfig {
        si_attenuation: 0.0,
        ..small()
    };
    let mut ctx = sample_drop(&cfg, &PathLossModel::default(), 5, false).unwrap();
    for row in &mut ctx.real.h_uu {
        row.iter_mut().for_each(|h| *h = C64::new(0.0, 0.0));
    }
    let zero = RepeaterWeights::zeros(cfg.num_repeaters);
    let (fd, _) = evaluate_weights(&ctx.real, &ctx.fading, &zero, &cfg, Duplex::Full).unwrap();
    let hd = evaluate_hd(&ctx.real, &ctx.fading, &cfg, &zero).unwrap();
    for (f, h) in fd.dl.iter().chain(&fd.ul).zip(hd.dl.iter().chain(&hd.ul)) {
        assert!((f.se - 2.0 * h.se).abs() <= 1e-12 * f.se.max(1.0));
    }
}

#[test]
fn hd_has_no_self_interference_term() {
    let cfg = small();
    let r = run(&cfg, vec![ArchitectureSpec::RA_HD], 2);
    for o in r.outcomes(0) {
        assert!(o.performance.ul.iter().all(|b| b.cross_link_or_si == 0.0));
        assert!(o.performance.dl.iter().all(|b| b.cross_link_or_si == 0.0));
        assert!(o.alpha.iter().any(|&a| a > 0.0));
    }
}

#[test]
fn optimized_outcome_respects_power_bounds() {
    let cfg = ScenarioConfig {
        num_repeaters: 3,
        ..small()
    };
    let r = run(&cfg, vec![ArchitectureSpec::RA_FD_OPT], 2);
    for o in r.outcomes(0) {
        let opt = o.optimizer.as_ref().unwrap();
        assert!(opt.trace.is_empty());
        for (a, p) in o.alpha.iter().zip(&o.repeater_input) {
            assert!(*a <= cfg.repeater_max_gain && a * a * p <= cfg.repeater_max_power * (1.0 + 1e-8));
        }
    }
}

#[test]
fn rejects_bad_campaigns() {
    let cfg = small();
    let pl = PathLossModel::default();
    let sca = ScaSettings::default();
    assert!(run_campaign(&cfg, &pl, &sca, &campaign(vec![], 1)).is_err());
    assert!(run_campaign(&cfg, &pl, &sca, &campaign(ArchitectureSpec::defaults(), 0)).is_err());
    let dup = vec![ArchitectureSpec::RA_HD, ArchitectureSpec::RA_HD];
    assert!(run_campaign(&cfg, &pl, &sca, &campaign(dup, 1)).is_err());
}

#[test]
fn results_csv_layout() {
    let cfg = small();
    let r = run(&cfg, vec![ArchitectureSpec::FD_MMIMO], 2);
    let mut buf = Vec::new();
    write_results_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(RESULTS_HEADER));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2 * (cfg.num_dl_ues + cfg.num_ul_ues));
    assert!(rows[0].starts_with("0,FD-mMIMO,dl,0,"));
}
