use mixfield::experiment::SweepVariable;
use mixfield::scenario_file::{FixedUser, ScenarioFile};
use mixfield::schemes::water_fill;
use proptest::prelude::*;

proptest! {
    #[test]
    fn water_filling_spends_exactly_the_budget(
        gains in prop::collection::vec(1e-3f64..1e3, 1..8),
        budget in 1e-3f64..10.0,
    ) {
        let p = water_fill(&gains, budget);
        prop_assert_eq!(p.len(), gains.len());
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        let total: f64 = p.iter().sum();
        prop_assert!((total - budget).abs() <= 1e-9 * budget);
        // Active users share one water level 1/g + p.
        let level: Vec<f64> = p.iter().zip(&gains).filter(|(x, _)| **x > 0.0).map(|(x, g)| x + 1.0 / g).collect();
        for l in &level {
            prop_assert!((l - level[0]).abs() <= 1e-9 * level[0]);
        }
        for (x, g) in p.iter().zip(&gains) {
            if *x == 0.0 {
                prop_assert!(1.0 / g >= level[0] - 1e-9 * level[0]);
            }
        }
    }

    #[test]
    fn scenario_files_round_trip(
        antennas in (4usize..40).prop_map(|h| 2 * h + 1),
        power in -10.0f64..40.0,
        first in prop::collection::vec((60.0f64..120.0, 0.1f64..1.0), 1..3),
        second in prop::collection::vec((60.0f64..120.0, 0.1f64..1.0), 1..3),
    ) {
        let mut f = ScenarioFile::default();
        f.system.antennas = antennas;
        f.system.power_dbm = power;
        f.users = first
            .into_iter()
            .map(|u| (0, u))
            .chain(second.into_iter().map(|u| (1, u)))
            .map(|(cell, (angle_deg, range_frac))| FixedUser { cell, angle_deg, range_frac })
            .collect();
        let text = f.to_toml();
        prop_assert_eq!(ScenarioFile::from_toml(&text, std::path::Path::new("inline")).unwrap(), f);
    }

    #[test]
    fn power_sweeps_touch_only_the_power(power in -20.0f64..50.0) {
        let base = ScenarioFile::default();
        let swept = SweepVariable::PowerDbm.apply(&base, power).unwrap();
        prop_assert_eq!(swept.system.power_dbm, power);
        let mut back = swept.clone();
        back.system.power_dbm = base.system.power_dbm;
        prop_assert_eq!(back, base);
    }
}
