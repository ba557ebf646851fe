//! Numerical propagation against independently coded closed forms.

use exciton_core::dimer::{analytic_sink_population, dimer_populations, static_sink_population, DimerParams};
use exciton_core::dynamics::{propagate, ChannelSpec, IntegratorConfig, Sampling};
use exciton_core::model::{time_averaged_coupling, ChainSpec, MotionProfile, VibronicCoupling};

mod common;

use common::{gamma_sets, static_oracle, GammaOracle};

#[test]
fn static_dimer_matches_closed_form_on_grid() {
    let cfg = IntegratorConfig::default();
    let grid = [
        (1.0, 0.1, 0.5),
        (8.0, 0.1, 0.5),
        (0.3, 0.1, 0.5),
        (1.0, 0.0, 0.5),
        (1.0, 0.5, 0.5),
        (2.0, 0.05, 1.0),
        (0.5, 0.2, 0.1),
        (1.5, 0.01, 2.0),
        (3.0, 0.3, 0.05),
        (0.8, 0.15, 0.8),
    ];
    for (j, g, gs) in grid {
        let spec = ChainSpec::uniform(2).unwrap().with_j0(j).unwrap();
        let ch = ChannelSpec::uniform(2, g, gs);
        let rec = propagate(
            &spec,
            &MotionProfile::Static { scale: 1.0 },
            &VibronicCoupling::disabled(),
            &ch,
            &cfg,
            1,
        )
        .unwrap();
        let want = static_oracle(j, g, gs);
        assert!(
            (rec.asymptotic_sink - want).abs() < 1e-4,
            "J={j} g={g} gs={gs}: {} vs {want}",
            rec.asymptotic_sink
        );
        assert!((static_sink_population(j, g, gs).unwrap() - want).abs() < 1e-14);
    }
}

#[test]
fn gamma_condition_numeric_and_closed_form_agree_with_oracle() {
    let cfg = IntegratorConfig {
        t_max: 20.0,
        convergence_tol: 1e-300,
        ..IntegratorConfig::default()
    }
    .with_sampling(Sampling::Uniform(0.05));
    for p in gamma_sets() {
        let oracle = GammaOracle::new(&p, 20.0, 1e-3);
        let (spec, profile, ch) = p.to_chain().unwrap();
        let rec = propagate(&spec, &profile, &VibronicCoupling::disabled(), &ch, &cfg, 1).unwrap();
        assert!((rec.final_time() - 20.0).abs() < 1e-9);
        let mut sup = 0.0_f64;
        for (k, &t) in rec.times.iter().enumerate() {
            let (o1, o2, os) = oracle.at(t);
            sup = sup
                .max((rec.site_populations[k][0] - o1).abs())
                .max((rec.site_populations[k][1] - o2).abs())
                .max((rec.sink_population[k] - os).abs());
        }
        assert!(sup < 1e-6, "{p:?}: sup-norm {sup:e}");

        for t in [0.0, 0.35, 3.0, 12.5, 20.0] {
            let (o1, o2, os) = oracle.at(t);
            let (c1, c2) = dimer_populations(&p, t).unwrap();
            let cs = analytic_sink_population(&p, t).unwrap();
            assert!((c1 - o1).abs() < 1e-9 && (c2 - o2).abs() < 1e-9, "{p:?} t={t}");
            assert!((cs - os).abs() < 1e-9, "{p:?} t={t}: {cs} vs {os}");
        }
    }
}

#[test]
fn gamma_condition_is_enforced() {
    let p = DimerParams {
        gamma1: 0.1,
        ..gamma_sets()[0]
    };
    assert!(dimer_populations(&p, 1.0).is_err());
}

#[test]
fn fast_drive_approaches_time_averaged_coupling() {
    let a = 0.25;
    let j_avg = time_averaged_coupling(1.0, a).unwrap();
    let mean: f64 = {
        let n = 200_000;
        (0..n)
            .map(|k| 1.0 / (1.0 - 2.0 * a * (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin()).powi(3))
            .sum::<f64>()
            / n as f64
    };
    assert!((j_avg - mean).abs() < 1e-10, "{j_avg} vs {mean}");
    let spec = ChainSpec::uniform(2).unwrap();
    let ch = ChannelSpec::uniform(2, 0.1, 0.5);
    let profile = MotionProfile::pairwise_uniform(1, a, 100.0, std::f64::consts::FRAC_PI_2);
    let rec = propagate(
        &spec,
        &profile,
        &VibronicCoupling::disabled(),
        &ch,
        &IntegratorConfig::default(),
        1,
    )
    .unwrap();
    let want = static_oracle(j_avg, 0.1, 0.5);
    assert!((rec.asymptotic_sink - want).abs() / want < 0.02);
}
