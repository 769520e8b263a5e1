//! TOML scenario description.
//!
//! ```toml
//! [system]
//! carrier_ghz = 28.0
//! antennas = 129
//! cells = 2
//! users_per_cell = 3
//! power_dbm = 30.0
//! noise_dbm = -80.0
//! nlos_paths = 3
//!
//! [geometry]
//! rotation_deg = [-30.0, 30.0]
//! angle_deg = [60.0, 120.0]
//! range_frac = [0.1, 1.0]
//!
//! # Optional fixed users; scatterers are still drawn per drop.
//! [[users]]
//! cell = 0
//! angle_deg = 72.0
//! range_frac = 0.3
//!
//! [optimizer]
//! swarm = 50
//! pso_iterations = 50
//! ```
//!
//! Every field has a default, so an empty file is the reference system.
//! Ranges are fractions of the boresight Rayleigh distance.

use std::path::Path;

use mixfield_core::beamforming::ScaOptions;
use mixfield_core::channel::{canonical_stations, Scenario, UserRegion};
use mixfield_core::config::{dbm_to_watts, SystemConfig, DEFAULT_RAYLEIGH_COEFFICIENT};
use mixfield_core::geometry::UserPlacement;
use mixfield_core::joint::JointOptions;
use mixfield_core::pso::PsoConfig;
use mixfield_core::SPEED_OF_LIGHT;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

#[derive(Default, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub users: Vec<FixedUser>,
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub carrier_ghz: f64,
    pub antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    pub cells: usize,
    pub users_per_cell: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub nlos_paths: usize,
    pub rayleigh_coefficient: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            antennas: 129,
            spacing_wavelengths: 0.5,
            cells: 2,
            users_per_cell: 3,
            power_dbm: 30.0,
            noise_dbm: -80.0,
            nlos_paths: 3,
            rayleigh_coefficient: DEFAULT_RAYLEIGH_COEFFICIENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub rotation_deg: [f64; 2],
    /// Intra-cell angle interval of random users and scatterers.
    pub angle_deg: [f64; 2],
    pub range_frac: [f64; 2],
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            rotation_deg: [-30.0, 30.0],
            angle_deg: [60.0, 120.0],
            range_frac: [0.1, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedUser {
    pub cell: usize,
    pub angle_deg: f64,
    pub range_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub swarm: usize,
    pub pso_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub inertia_min: f64,
    pub inertia_max: f64,
    pub sca_iterations: usize,
    pub sca_tol: f64,
    pub warm_start: bool,
    pub rotation_quantum: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let pso = PsoConfig::default();
        let sca = ScaOptions::default();
        let joint = JointOptions::default();
        Self {
            swarm: pso.swarm_size,
            pso_iterations: pso.iterations,
            c1: pso.c1,
            c2: pso.c2,
            inertia_min: pso.inertia_min,
            inertia_max: pso.inertia_max,
            sca_iterations: sca.max_iters,
            sca_tol: sca.tol,
            warm_start: joint.warm_start,
            rotation_quantum: joint.quantum,
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str, origin: &Path) -> SimResult<Self> {
        let file: Self = toml::from_str(text).map_err(|e| SimError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.validate().map_err(|e| SimError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(file)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn validate(&self) -> SimResult<()> {
        self.system_config().validate()?;
        let [lo, hi] = self.geometry.rotation_deg;
        if !(lo <= hi && lo > -180.0 && hi < 180.0) {
            return Err(SimError::Spec(format!("rotation interval [{lo}, {hi}] deg")));
        }
        let [alo, ahi] = self.geometry.angle_deg;
        if !(alo > 0.0 && alo <= ahi && ahi < 180.0) {
            return Err(SimError::Spec(format!("angle interval [{alo}, {ahi}] deg must lie in (0, 180)")));
        }
        let [rlo, rhi] = self.geometry.range_frac;
        if !(rlo > 0.0 && rlo <= rhi) {
            return Err(SimError::Spec(format!("range interval [{rlo}, {rhi}]")));
        }
        if !self.users.is_empty() {
            for (i, u) in self.users.iter().enumerate() {
                if u.cell >= self.system.cells || !(u.angle_deg > 0.0 && u.angle_deg < 180.0) || !(u.range_frac > 0.0) {
                    return Err(SimError::Spec(format!("fixed user #{i} is out of range: {u:?}")));
                }
                if i > 0 && u.cell < self.users[i - 1].cell {
                    return Err(SimError::Spec("fixed users must be listed cell by cell".into()));
                }
            }
            for m in 0..self.system.cells {
                if !self.users.iter().any(|u| u.cell == m) {
                    return Err(SimError::Spec(format!("no fixed user in cell {m}")));
                }
            }
        }
        self.pso_config(0).validate()?;
        if !(self.optimizer.rotation_quantum > 0.0) || self.optimizer.sca_iterations == 0 {
            return Err(SimError::Spec("rotation quantum and SCA iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        let carrier_frequency = s.carrier_ghz * 1e9;
        SystemConfig {
            carrier_frequency,
            antenna_count: s.antennas,
            element_spacing: s.spacing_wavelengths * SPEED_OF_LIGHT / carrier_frequency,
            cell_count: s.cells,
            users_per_cell: s.users_per_cell,
            power_budget: dbm_to_watts(s.power_dbm),
            noise_power: dbm_to_watts(s.noise_dbm),
            nlos_path_count: s.nlos_paths,
            rayleigh_coefficient: s.rayleigh_coefficient,
            rng_seed: 0,
        }
    }

    pub fn rotation_limits(&self) -> [f64; 2] {
        self.geometry.rotation_deg.map(f64::to_radians)
    }

    pub fn region(&self) -> UserRegion {
        UserRegion {
            range_frac: self.geometry.range_frac,
            angle: self.geometry.angle_deg.map(f64::to_radians),
        }
    }

    pub fn pso_config(&self, seed: u64) -> PsoConfig {
        let o = &self.optimizer;
        PsoConfig {
            swarm_size: o.swarm,
            iterations: o.pso_iterations,
            c1: o.c1,
            c2: o.c2,
            inertia_min: o.inertia_min,
            inertia_max: o.inertia_max,
            seed,
        }
    }

    pub fn sca_options(&self) -> ScaOptions {
        ScaOptions {
            max_iters: self.optimizer.sca_iterations,
            tol: self.optimizer.sca_tol,
            ..ScaOptions::default()
        }
    }

    pub fn joint_options(&self, seed: u64) -> JointOptions {
        JointOptions {
            pso: self.pso_config(seed),
            sca: self.sca_options(),
            warm_start: self.optimizer.warm_start,
            quantum: self.optimizer.rotation_quantum,
            extra_seeds: Vec::new(),
        }
    }

    /// One drop: random users from the region, or the fixed users with
    /// fresh scatterers. Path gains are drawn from `rng` as well.
    pub fn build_drop<R: Rng + ?Sized>(&self, rng: &mut R) -> SimResult<Scenario> {
        let cfg = self.system_config();
        let limits = self.rotation_limits();
        let region = self.region();
        if self.users.is_empty() {
            return Ok(Scenario::random_drop(cfg, limits, &region, rng)?);
        }
        let stations = canonical_stations(&cfg, limits);
        let rayleigh = cfg.boresight_rayleigh_distance();
        let mut next = vec![0usize; cfg.cell_count];
        let users = self
            .users
            .iter()
            .map(|u| {
                let bs = &stations[u.cell];
                let k = next[u.cell];
                next[u.cell] += 1;
                let scatterers: Vec<(f64, f64)> = (0..cfg.nlos_path_count).map(|_| region.sample(rayleigh, rng)).collect();
                UserPlacement::new(bs, k, u.angle_deg.to_radians(), u.range_frac * rayleigh).with_scatterers(bs, &scatterers)
            })
            .collect();
        Ok(Scenario::new(cfg, stations, users, rng)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_file_is_the_reference_system() {
        let f = ScenarioFile::from_toml("", Path::new("empty.toml")).unwrap();
        let cfg = f.system_config();
        let reference = SystemConfig::reference();
        assert_eq!(cfg.antenna_count, reference.antenna_count);
        assert!((cfg.power_budget - reference.power_budget).abs() < 1e-15);
        assert!((cfg.element_spacing - reference.element_spacing).abs() < 1e-15);
        assert_eq!(f.pso_config(0), PsoConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut f = ScenarioFile::default();
        f.system.antennas = 65;
        f.users = vec![
            FixedUser { cell: 0, angle_deg: 72.0, range_frac: 0.3 },
            FixedUser { cell: 0, angle_deg: 90.0, range_frac: 0.5 },
            FixedUser { cell: 1, angle_deg: 72.0, range_frac: 0.3 },
        ];
        let back = ScenarioFile::from_toml(&f.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        let p = Path::new("bad.toml");
        assert!(ScenarioFile::from_toml("[system]\nantenas = 65\n", p).is_err());
        assert!(ScenarioFile::from_toml("[system]\nantennas = 64\n", p).is_err());
        assert!(ScenarioFile::from_toml("[geometry]\nangle_deg = [0.0, 90.0]\n", p).is_err());
        let err = ScenarioFile::from_toml("[[users]]\ncell = 1\nangle_deg = 80.0\nrange_frac = 0.2\n", p).unwrap_err();
        assert!(err.to_string().starts_with("bad.toml"), "{err}");
    }

    #[test]
    fn fixed_users_keep_their_positions() {
        let text = "[system]\nantennas = 33\n\n[[users]]\ncell = 0\nangle_deg = 72.0\nrange_frac = 0.3\n\n\
                    [[users]]\ncell = 0\nangle_deg = 100.0\nrange_frac = 0.6\n\n\
                    [[users]]\ncell = 1\nangle_deg = 72.0\nrange_frac = 0.3\n";
        let f = ScenarioFile::from_toml(text, Path::new("fixed.toml")).unwrap();
        let a = f.build_drop(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = f.build_drop(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.layout.counts(), &[2, 1]);
        assert_eq!(a.users[1].angle, b.users[1].angle);
        assert_eq!(a.users[1].range, b.users[1].range);
        assert_ne!(a.gains, b.gains);
        let rayleigh = a.config.boresight_rayleigh_distance();
        assert!((a.user(1, 0).range - 0.3 * rayleigh).abs() < 1e-12);
    }
}
