//! Scenarios (stations, users, scatterers, path gains) and channel synthesis.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::config::{SystemConfig, NLOS_REFLECTION_LOSS_DB};
use crate::error::{Error, Result};
use crate::geometry::{inter_cell_angle, inter_cell_distance, BaseStation, Frame, UserPlacement};
use crate::linalg::CVector;
use crate::steering::{far_steering, near_steering};

/// Propagation regime of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NearField,
    FarField,
}

/// Free-space line-of-sight gain `lambda / (4 pi r) * exp(-j 2 pi r / lambda)`.
pub fn free_space_gain(distance: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(
        wavelength / (4.0 * PI * distance),
        -2.0 * PI * distance / wavelength,
    )
}

/// Standard circularly-symmetric complex Gaussian sample, `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let radius = libm::sqrt(-libm::log(u1));
    Complex64::from_polar(radius, 2.0 * PI * u2)
}

/// Uniform sampling region for users and scatterers, relative to the
/// boresight effective Rayleigh distance of the serving array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRegion {
    pub range_frac: [f64; 2],
    /// Intra-cell angle interval, radians.
    pub angle: [f64; 2],
}

impl Default for UserRegion {
    fn default() -> Self {
        Self {
            range_frac: [0.1, 1.0],
            angle: [PI / 3.0, 2.0 * PI / 3.0],
        }
    }
}

impl UserRegion {
    /// One `(angle, range)` draw for a Rayleigh distance of `rayleigh`.
    pub fn sample<R: Rng + ?Sized>(&self, rayleigh: f64, rng: &mut R) -> (f64, f64) {
        let angle = lerp(self.angle, rng.gen::<f64>());
        let range = rayleigh * lerp(self.range_frac, rng.gen::<f64>());
        (angle, range)
    }
}

fn lerp(bounds: [f64; 2], u: f64) -> f64 {
    bounds[0] + (bounds[1] - bounds[0]) * u
}

/// Stations on a vertical line at spacing `2 R_Ray`, alternately facing up
/// and down so that stations 0 and 1 face each other.
pub fn canonical_stations(cfg: &SystemConfig, rotation_limits: [f64; 2]) -> Vec<BaseStation> {
    let spacing = 2.0 * cfg.boresight_rayleigh_distance();
    (0..cfg.cell_count)
        .map(|m| {
            let frame = if m % 2 == 0 { Frame::UP } else { Frame::DOWN };
            BaseStation::new(m, [0.0, spacing * m as f64], frame, rotation_limits)
        })
        .collect()
}

/// Uniform random user drop: `K` users per cell, each with `L` scatterers
/// drawn from the same region.
pub fn place_users<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    stations: &[BaseStation],
    region: &UserRegion,
    rng: &mut R,
) -> Vec<UserPlacement> {
    let rayleigh = cfg.boresight_rayleigh_distance();
    let mut users = Vec::with_capacity(stations.len() * cfg.users_per_cell);
    for bs in stations {
        for k in 0..cfg.users_per_cell {
            let (angle, range) = region.sample(rayleigh, rng);
            let scatterers: Vec<(f64, f64)> = (0..cfg.nlos_path_count)
                .map(|_| region.sample(rayleigh, rng))
                .collect();
            users.push(UserPlacement::new(bs, k, angle, range).with_scatterers(bs, &scatterers));
        }
    }
    users
}

/// Random complex gains of every scattered path of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub los: Complex64,
    pub nlos: Vec<Complex64>,
}

/// Per-cell user counts with prefix offsets, so users can be addressed
/// either as `(cell, user)` or by their global position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserLayout {
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl UserLayout {
    pub fn new(counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c;
        }
        offsets.push(acc);
        Self { counts, offsets }
    }

    pub fn uniform(cells: usize, users: usize) -> Self {
        Self::new(alloc::vec![users; cells])
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    pub fn users_in(&self, cell: usize) -> usize {
        self.counts[cell]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.offsets[self.counts.len()]
    }

    pub fn offset(&self, cell: usize) -> usize {
        self.offsets[cell]
    }

    /// Global position of user `(cell, user)`.
    pub fn index(&self, cell: usize, user: usize) -> usize {
        debug_assert!(user < self.counts[cell]);
        self.offsets[cell] + user
    }

    /// Inverse of [`UserLayout::index`].
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let cell = self.offsets[1..].iter().position(|&end| global < end).unwrap_or(self.cells() - 1);
        (cell, global - self.offsets[cell])
    }

    pub fn max_users(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Stations, users and all random path gains of one drop. Channels are a
/// pure function of a scenario and a rotation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub stations: Vec<BaseStation>,
    /// Ordered by cell, then user.
    pub users: Vec<UserPlacement>,
    pub layout: UserLayout,
    /// Indexed by `source * U + u` with `u` the global user position.
    pub gains: Vec<LinkGains>,
}

impl Scenario {
    /// Builds a scenario from explicit placements, drawing the scattered
    /// path gains from `rng`. Users must be grouped by cell with consecutive
    /// user indices; cells may hold different numbers of users.
    pub fn new<R: Rng + ?Sized>(
        config: SystemConfig,
        stations: Vec<BaseStation>,
        users: Vec<UserPlacement>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let m_count = config.cell_count;
        if stations.len() != m_count {
            return Err(Error::DimensionMismatch(format!(
                "{} stations for {} cells",
                stations.len(),
                m_count
            )));
        }
        let mut counts = alloc::vec![0usize; m_count];
        for (idx, u) in users.iter().enumerate() {
            let expected_cell = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
            let ordered = u.cell < m_count
                && u.cell >= expected_cell
                && u.user == counts[u.cell]
                && (u.cell == expected_cell || u.user == 0);
            if !ordered {
                return Err(Error::DimensionMismatch(format!(
                    "user at slot {idx} is labelled ({}, {})",
                    u.cell, u.user
                )));
            }
            counts[u.cell] += 1;
            u.validate()?;
        }
        if let Some(m) = counts.iter().position(|&c| c == 0) {
            return Err(Error::DimensionMismatch(format!("cell {m} has no users")));
        }
        let layout = UserLayout::new(counts);
        let lambda = config.wavelength();
        let nlos_scale = libm::pow(10.0, -NLOS_REFLECTION_LOSS_DB / 20.0);
        let mut gains = Vec::with_capacity(m_count * users.len());
        for src in &stations {
            for u in &users {
                let distance = if src.index == u.cell {
                    u.range
                } else {
                    inter_cell_distance(u.position, src)
                };
                if !(distance > 0.0) {
                    return Err(Error::DegenerateGeometry { bs: src.index });
                }
                let nlos = u
                    .scatterers
                    .iter()
                    .map(|s| {
                        let dist = if src.index == u.cell {
                            s.range
                        } else {
                            inter_cell_distance(s.position, src)
                        };
                        complex_gaussian(rng) * (nlos_scale * lambda / (4.0 * PI * dist))
                    })
                    .collect();
                gains.push(LinkGains {
                    los: free_space_gain(distance, lambda),
                    nlos,
                });
            }
        }
        Ok(Self {
            config,
            stations,
            users,
            layout,
            gains,
        })
    }

    /// Canonical layout with a uniform random drop.
    pub fn random_drop<R: Rng + ?Sized>(
        config: SystemConfig,
        rotation_limits: [f64; 2],
        region: &UserRegion,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let stations = canonical_stations(&config, rotation_limits);
        let users = place_users(&config, &stations, region, rng);
        Self::new(config, stations, users, rng)
    }

    pub fn cell_count(&self) -> usize {
        self.config.cell_count
    }

    pub fn users_in(&self, cell: usize) -> usize {
        self.layout.users_in(cell)
    }

    pub fn user(&self, cell: usize, user: usize) -> &UserPlacement {
        &self.users[self.layout.index(cell, user)]
    }

    pub fn link_gains(&self, source: usize, cell: usize, user: usize) -> &LinkGains {
        &self.gains[source * self.layout.total() + self.layout.index(cell, user)]
    }

    pub fn rotation_limits(&self) -> Vec<[f64; 2]> {
        self.stations.iter().map(|bs| bs.rotation_limits).collect()
    }

    pub fn check_rotations(&self, rotations: &[f64]) -> Result<()> {
        if rotations.len() != self.stations.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rotations for {} stations",
                rotations.len(),
                self.stations.len()
            )));
        }
        for (bs, &phi) in self.stations.iter().zip(rotations) {
            // Allow rounding slack at the interval ends.
            let [lo, hi] = bs.rotation_limits;
            if !(phi >= lo - 1e-12 && phi <= hi + 1e-12) {
                return Err(Error::RotationOutOfRange {
                    cell: bs.index,
                    value: phi,
                    min: lo,
                    max: hi,
                });
            }
        }
        Ok(())
    }
}

/// Channel from one station to one user, as the column vector `h` whose
/// conjugate transpose multiplies the transmit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub coefficients: CVector,
    pub regime: Regime,
    pub source: usize,
    pub cell: usize,
    pub user: usize,
    pub los_gain: Complex64,
    pub nlos_gains: Vec<Complex64>,
}

/// Channels for every (station, user) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub layout: UserLayout,
    pub antennas: usize,
    /// Indexed by `source * U + u` with `u` the global user position.
    pub links: Vec<ChannelVector>,
}

impl ChannelSet {
    pub fn cells(&self) -> usize {
        self.layout.cells()
    }

    pub fn link(&self, source: usize, cell: usize, user: usize) -> &ChannelVector {
        &self.links[source * self.layout.total() + self.layout.index(cell, user)]
    }
}

fn accumulate(h: &mut [Complex64], steering: &[Complex64], gain: Complex64, weight: f64) {
    // h = sum conj(gain) * steering, matching h^H = gain * steering^H.
    let g = gain.conj() * weight;
    for (hi, si) in h.iter_mut().zip(steering) {
        *hi += g * si;
    }
}

/// Synthesizes all channels for the given rotation vector. Serving links
/// use the spherical-wavefront model, all other links the planar one.
pub fn build_channels(scenario: &Scenario, rotations: &[f64]) -> Result<ChannelSet> {
    scenario.check_rotations(rotations)?;
    let cfg = &scenario.config;
    let n = cfg.antenna_count;
    let sqrt_n = libm::sqrt(n as f64);
    let mut links = Vec::with_capacity(scenario.gains.len());
    for src in &scenario.stations {
        let phi = rotations[src.index];
        for u in &scenario.users {
            u.validate()?;
            let gains = scenario.link_gains(src.index, u.cell, u.user);
            let mut h = alloc::vec![Complex64::new(0.0, 0.0); n];
            let nlos_weight = if gains.nlos.is_empty() {
                0.0
            } else {
                libm::sqrt(n as f64 / gains.nlos.len() as f64)
            };
            let regime = if src.index == u.cell {
                accumulate(&mut h, &near_steering(u.angle, u.range, phi, cfg), gains.los, sqrt_n);
                for (s, g) in u.scatterers.iter().zip(&gains.nlos) {
                    accumulate(&mut h, &near_steering(s.angle, s.range, phi, cfg), *g, nlos_weight);
                }
                Regime::NearField
            } else {
                let psi = inter_cell_angle(u.position, src)?;
                accumulate(&mut h, &far_steering(psi, phi, cfg), gains.los, sqrt_n);
                for (s, g) in u.scatterers.iter().zip(&gains.nlos) {
                    let psi_s = inter_cell_angle(s.position, src)?;
                    accumulate(&mut h, &far_steering(psi_s, phi, cfg), *g, nlos_weight);
                }
                Regime::FarField
            };
            links.push(ChannelVector {
                coefficients: h,
                regime,
                source: src.index,
                cell: u.cell,
                user: u.user,
                los_gain: gains.los,
                nlos_gains: gains.nlos.clone(),
            });
        }
    }
    Ok(ChannelSet {
        layout: scenario.layout.clone(),
        antennas: n,
        links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sqr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn los_config(cells: usize, users: usize) -> SystemConfig {
        let mut cfg = SystemConfig::reference().with_antennas(65);
        cfg.cell_count = cells;
        cfg.users_per_cell = users;
        cfg.nlos_path_count = 0;
        cfg
    }

    #[test]
    fn los_serving_channel_norm() {
        let cfg = los_config(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sc = Scenario::random_drop(cfg, [-0.5, 0.5], &UserRegion::default(), &mut rng).unwrap();
        let ch = build_channels(&sc, &[0.1, -0.2]).unwrap();
        for m in 0..2 {
            for k in 0..2 {
                let link = ch.link(m, m, k);
                assert_eq!(link.regime, Regime::NearField);
                let expected = 65.0 * link.los_gain.norm_sqr();
                assert!((norm_sqr(&link.coefficients) - expected).abs() < 1e-12 * expected);
                let cross = ch.link(1 - m, m, k);
                assert_eq!(cross.regime, Regime::FarField);
                for z in &cross.coefficients {
                    assert!((z.norm() - cross.los_gain.norm()).abs() < 1e-12 * cross.los_gain.norm());
                }
            }
        }
    }

    #[test]
    fn same_seed_same_channels() {
        let mut cfg = SystemConfig::reference().with_antennas(33);
        cfg.nlos_path_count = 3;
        let build = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sc = Scenario::random_drop(cfg.clone(), [-0.5, 0.5], &UserRegion::default(), &mut rng).unwrap();
            build_channels(&sc, &[0.0, 0.3]).unwrap()
        };
        assert_eq!(build(9), build(9));
        assert_ne!(build(9), build(10));
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let cfg = los_config(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sc = Scenario::random_drop(cfg, [-0.5, 0.5], &UserRegion::default(), &mut rng).unwrap();
        assert!(matches!(
            build_channels(&sc, &[0.0, 0.7]),
            Err(Error::RotationOutOfRange { cell: 1, .. })
        ));
        sc.users[0].angle = -0.1;
        assert!(matches!(build_channels(&sc, &[0.0, 0.0]), Err(Error::AngleOutOfRange { .. })));
    }

    #[test]
    fn placements_stay_in_region() {
        let mut cfg = SystemConfig::reference();
        cfg.users_per_cell = 50;
        let stations = canonical_stations(&cfg, [-0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let region = UserRegion::default();
        let users = place_users(&cfg, &stations, &region, &mut rng);
        let rr = cfg.boresight_rayleigh_distance();
        for u in &users {
            assert!(u.range >= 0.1 * rr && u.range <= rr);
            assert!(u.angle >= PI / 3.0 && u.angle <= 2.0 * PI / 3.0);
            assert_eq!(u.scatterers.len(), 3);
        }
        let mut again = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(users, place_users(&cfg, &stations, &region, &mut again));
    }

    #[test]
    fn empirical_mean_angle() {
        let mut cfg = SystemConfig::reference();
        cfg.cell_count = 1;
        cfg.users_per_cell = 10_000;
        cfg.nlos_path_count = 0;
        let stations = canonical_stations(&cfg, [-0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users = place_users(&cfg, &stations, &UserRegion::default(), &mut rng);
        let mean = users.iter().map(|u| u.angle).sum::<f64>() / users.len() as f64;
        assert!((mean - PI / 2.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn uneven_cells() {
        let mut cfg = los_config(2, 1);
        cfg.nlos_path_count = 1;
        let stations = canonical_stations(&cfg, [-0.5, 0.5]);
        let users = alloc::vec![
            UserPlacement::new(&stations[0], 0, 1.2, 10.0).with_scatterers(&stations[0], &[(1.0, 5.0)]),
            UserPlacement::new(&stations[0], 1, 1.6, 12.0).with_scatterers(&stations[0], &[(1.1, 6.0)]),
            UserPlacement::new(&stations[1], 0, 1.4, 9.0).with_scatterers(&stations[1], &[(2.0, 7.0)]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sc = Scenario::new(cfg.clone(), stations.clone(), users.clone(), &mut rng).unwrap();
        assert_eq!(sc.layout.counts(), &[2, 1]);
        assert_eq!(sc.layout.locate(2), (1, 0));
        assert_eq!(sc.layout.locate(1), (0, 1));
        let ch = build_channels(&sc, &[0.0, 0.0]).unwrap();
        assert_eq!(ch.links.len(), 6);
        assert_eq!(ch.link(1, 0, 1).regime, Regime::FarField);
        assert_eq!((ch.link(1, 1, 0).cell, ch.link(1, 1, 0).user), (1, 0));
        let mut swapped = users.clone();
        swapped.swap(1, 2);
        assert!(Scenario::new(cfg.clone(), stations.clone(), swapped, &mut rng).is_err());
        assert!(Scenario::new(cfg, stations, users[..2].to_vec(), &mut rng).is_err());
    }

    #[test]
    fn complex_gaussian_has_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let p: f64 = (0..n).map(|_| complex_gaussian(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.03, "{p}");
    }
}
