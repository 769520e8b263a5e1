use std::f64::consts::PI;

use mixfield_core::beamforming::*;
use mixfield_core::channel::{build_channels, Scenario, UserLayout, UserRegion};
use mixfield_core::config::SystemConfig;
use mixfield_core::geometry::UserPlacement;
use mixfield_core::linalg::{CMatrix, CVector};
use mixfield_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn drop(cells: usize, users: usize, antennas: usize, nlos: usize, seed: u64) -> Scenario {
    let mut cfg = SystemConfig::reference().with_antennas(antennas);
    cfg.cell_count = cells;
    cfg.users_per_cell = users;
    cfg.nlos_path_count = nlos;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Scenario::random_drop(cfg, [-PI / 6.0, PI / 6.0], &UserRegion::default(), &mut rng).unwrap()
}

fn effective(sc: &Scenario, rotations: &[f64]) -> (EffectiveChannels, Vec<AnalogBeamformer>) {
    let ch = build_channels(sc, rotations).unwrap();
    let analog = analog_mrt(sc, rotations).unwrap();
    (effective_channels(&ch, &analog).unwrap(), analog)
}

#[test]
fn analog_stage_is_unit_modulus_and_matched() {
    let sc = drop(1, 1, 65, 0, 1);
    let ch = build_channels(&sc, &[0.2]).unwrap();
    let analog = analog_mrt(&sc, &[0.2]).unwrap();
    for z in analog[0].matrix.as_slice() {
        assert!((z.norm() - 1.0).abs() < 1e-10);
    }
    let eff = effective_channels(&ch, &analog).unwrap();
    let beta = ch.link(0, 0, 0).los_gain;
    let hbar = eff.get(0, 0, 0)[0];
    assert!((hbar - beta.conj() * 65.0).norm() < 1e-12 * beta.norm() * 65.0);
    assert!((eff.grams[0][(0, 0)].re - 65.0).abs() < 1e-9);
}

#[test]
fn zero_channel_gives_zero_effective_channel() {
    let sc = drop(2, 2, 33, 1, 2);
    let mut ch = build_channels(&sc, &[0.0, 0.0]).unwrap();
    for z in ch.links[1].coefficients.iter_mut() {
        *z = Complex64::new(0.0, 0.0);
    }
    let analog = analog_mrt(&sc, &[0.0, 0.0]).unwrap();
    let eff = effective_channels(&ch, &analog).unwrap();
    assert!(eff.vectors[1].iter().all(|z| z.norm() == 0.0));
}

#[test]
fn raw_and_effective_rates_agree() {
    let sc = drop(2, 3, 65, 3, 3);
    let rot = [0.1, -0.3];
    let ch = build_channels(&sc, &rot).unwrap();
    let analog = analog_mrt(&sc, &rot).unwrap();
    let eff = effective_channels(&ch, &analog).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let digital: Vec<DigitalBeamformer> = (0..2)
        .map(|_| DigitalBeamformer {
            matrix: CMatrix::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.05),
        })
        .collect();
    let a = compute_rates(&eff, &digital, 1e-11, InterferenceMask::FULL).unwrap();
    let b = compute_rates_raw(&ch, &BeamformerSet { analog, digital }, 1e-11).unwrap();
    for (x, y) in a.users.iter().zip(&b.users) {
        assert!((x.rate - y.rate).abs() <= 1e-10 * x.rate.abs().max(1.0));
        assert!((x.signal - y.signal).abs() <= 1e-10 * x.signal);
    }
    assert!((a.sum_rate - a.cell_rates.iter().sum::<f64>()).abs() < 1e-12);
    for u in &a.users {
        assert_eq!(u.rate, (1.0 + u.signal / (u.intra + u.inter + u.noise)).log2());
    }
}

#[test]
fn zero_power_gives_zero_rates() {
    let sc = drop(2, 2, 33, 0, 4);
    let (eff, _) = effective(&sc, &[0.0, 0.0]);
    let digital = vec![DigitalBeamformer { matrix: CMatrix::zeros(2, 2) }; 2];
    let report = compute_rates(&eff, &digital, 1e-11, InterferenceMask::FULL).unwrap();
    assert_eq!(report.sum_rate, 0.0);
}

#[test]
fn single_user_closed_form() {
    let sc = drop(1, 1, 65, 0, 5);
    let ch = build_channels(&sc, &[0.0]).unwrap();
    let cfg = &sc.config;
    let h = &ch.link(0, 0, 0).coefficients;
    let h_norm: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let closed = (1.0 + cfg.power_budget * h_norm / cfg.noise_power).log2();
    let (eff, _) = effective(&sc, &[0.0]);
    let out = sca_digital(&eff, cfg.noise_power, cfg.power_budget, &ScaOptions::default()).unwrap();
    assert!((out.report.sum_rate - closed).abs() < 1e-3, "{} vs {closed}", out.report.sum_rate);
    let zf = zf_digital(&eff, 0, cfg.power_budget).unwrap();
    let zf_rate = compute_rates(&eff, &[zf.beamformer], cfg.noise_power, InterferenceMask::FULL).unwrap();
    assert!((zf_rate.sum_rate - closed).abs() < 1e-9);
}

#[test]
fn zf_properties() {
    let sc = drop(2, 3, 65, 3, 6);
    let (eff, _) = effective(&sc, &[0.0, 0.0]);
    let p = sc.config.power_budget;
    let zf = zf_all_cells(&eff, p).unwrap();
    let digital: Vec<_> = zf.iter().map(|z| z.beamformer.clone()).collect();
    let report = compute_rates(&eff, &digital, 1e-11, InterferenceMask::FULL).unwrap();
    for u in &report.users {
        assert!(u.intra < 1e-8 * u.signal, "{} vs {}", u.intra, u.signal);
    }
    for (pw, z) in cell_powers(&eff, &digital).iter().zip(&zf) {
        assert!((pw - p).abs() < 1e-9 * p);
        assert!(!z.regularized);
    }
    // Inter-cell interference at cell 0 depends only on cell 1's precoder.
    let mut other = digital.clone();
    other[0].matrix = CMatrix::identity(3).scale(0.01);
    let swapped = compute_rates(&eff, &other, 1e-11, InterferenceMask::FULL).unwrap();
    for k in 0..3 {
        assert!((swapped.users[k].inter - report.users[k].inter).abs() <= 1e-12 * report.users[k].inter);
    }
}

#[test]
fn zf_diagonal_and_singular_channels() {
    let layout = UserLayout::uniform(1, 2);
    let diag = vec![
        vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)],
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 3.0)],
    ];
    let eff = EffectiveChannels::from_parts(layout.clone(), diag, vec![CMatrix::identity(2)]).unwrap();
    let f = zf_digital(&eff, 0, 1.0).unwrap().beamformer.matrix;
    assert!(f[(0, 1)].norm() < 1e-15 && f[(1, 0)].norm() < 1e-15);
    let v: CVector = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)];
    let singular = EffectiveChannels::from_parts(layout.clone(), vec![v.clone(), v], vec![CMatrix::identity(2)]).unwrap();
    assert!(zf_digital(&singular, 0, 1.0).unwrap().regularized);
    let zero = vec![vec![Complex64::new(0.0, 0.0); 2]; 2];
    let zero = EffectiveChannels::from_parts(layout, zero, vec![CMatrix::identity(2)]).unwrap();
    assert!(zf_digital(&zero, 0, 1.0).is_err());
}

#[test]
fn sca_ascends_from_zero_forcing() {
    let cfg_noise = 1e-11;
    for seed in 0..3 {
        let sc = drop(2, 2, 33, 3, 20 + seed);
        let (eff, _) = effective(&sc, &[0.1, -0.1]);
        let p = sc.config.power_budget;
        let out = sca_digital(&eff, cfg_noise, p, &ScaOptions::default()).unwrap();
        for w in out.trajectory.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
        for w in out.trace.windows(2) {
            assert!(w[1].surrogate_obj <= w[0].surrogate_obj + 1e-6);
        }
        let zf: Vec<_> = zf_all_cells(&eff, p).unwrap().into_iter().map(|z| z.beamformer).collect();
        let zf_rate = compute_rates(&eff, &zf, cfg_noise, InterferenceMask::FULL).unwrap().sum_rate;
        assert!(out.report.sum_rate >= zf_rate - 1e-6);
        for pw in cell_powers(&eff, &out.digital) {
            assert!(pw <= p * (1.0 + 1e-12));
        }
        for row in &out.trace {
            assert!(row.max_kkt_residual <= 1e-6, "{row:?}");
        }
    }
}

#[test]
fn sca_handles_uneven_cells() {
    let mut cfg = SystemConfig::reference().with_antennas(33);
    cfg.nlos_path_count = 0;
    let stations = mixfield_core::channel::canonical_stations(&cfg, [-PI / 6.0, PI / 6.0]);
    let rr = cfg.boresight_rayleigh_distance();
    let users = vec![
        UserPlacement::new(&stations[0], 0, 0.4 * PI, 0.3 * rr),
        UserPlacement::new(&stations[0], 1, 0.55 * PI, 0.5 * rr),
        UserPlacement::new(&stations[1], 0, 0.4 * PI, 0.3 * rr),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sc = Scenario::new(cfg.clone(), stations, users, &mut rng).unwrap();
    let (eff, _) = effective(&sc, &[0.0, 0.0]);
    let out = sca_digital(&eff, cfg.noise_power, cfg.power_budget, &ScaOptions::default()).unwrap();
    assert_eq!(out.report.users.len(), 3);
    assert_eq!(out.digital[1].matrix.rows(), 1);
}
