use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{reference_gain, GainPattern};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Radar cross section used when a cluster does not specify one.
pub const DEFAULT_RCS: f64 = 1.0;

/// Height range of generated clusters, meters.
pub const DEFAULT_CLUSTER_Z_RANGE: [f64; 2] = [-10.0, 10.0];

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct User {
    pub position: Vector3<f64>,
    /// Transmit power in watts.
    pub power: f64,
}

impl User {
    pub fn new(position: Vector3<f64>, power: f64) -> Self {
        Self { position, power }
    }
}

/// A point scatterer with radar cross section `rcs` (m^2) and phase shift `phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub position: Vector3<f64>,
    pub rcs: f64,
    pub phase: f64,
}

impl Cluster {
    pub fn new(position: Vector3<f64>, rcs: f64, phase: f64) -> Self {
        Self {
            position,
            rcs,
            phase: phase.rem_euclid(2.0 * PI),
        }
    }
}

/// Draws `count` clusters in front of the array: horizontal range uniform by
/// area in `annulus`, azimuth uniform over the front half-plane, height
/// uniform in `z_range`, phase uniform in `[0, 2 pi)`.
pub fn generate_clusters<R: Rng>(
    rng: &mut R,
    count: usize,
    annulus: [f64; 2],
    z_range: [f64; 2],
    rcs: f64,
) -> Vec<Cluster> {
    let (r1s, r2s) = (annulus[0] * annulus[0], annulus[1] * annulus[1]);
    (0..count)
        .map(|_| {
            let rho = (r1s + (r2s - r1s) * rng.random::<f64>()).sqrt();
            let phi = PI * (rng.random::<f64>() - 0.5);
            let z = z_range[0] + (z_range[1] - z_range[0]) * rng.random::<f64>();
            let chi = 2.0 * PI * rng.random::<f64>();
            Cluster::new(Vector3::new(rho * phi.cos(), rho * phi.sin(), z), rcs, chi)
        })
        .collect()
}

/// Users, scatterers, noise and carrier for one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<User>,
    pub clusters: Vec<Cluster>,
    /// Noise power in watts.
    pub noise: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub pattern: GainPattern,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        users: Vec<User>,
        clusters: Vec<Cluster>,
        noise: f64,
        wavelength: f64,
        pattern: GainPattern,
        seed: u64,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidScenario("at least one user is required".into()));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidScenario(format!("wavelength {wavelength} must be positive")));
        }
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::InvalidScenario(format!("noise power {noise} must be positive")));
        }
        for (k, u) in users.iter().enumerate() {
            if !(u.power.is_finite() && u.power >= 0.0) || !u.position.iter().all(|x| x.is_finite())
            {
                return Err(Error::InvalidScenario(format!("user {k} is not finite")));
            }
        }
        for (d, c) in clusters.iter().enumerate() {
            if !(c.rcs.is_finite() && c.rcs >= 0.0) || !c.position.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidScenario(format!("cluster {d} is not finite")));
            }
        }
        Ok(Self {
            users,
            clusters,
            noise,
            wavelength,
            pattern,
            seed,
        })
    }

    pub fn beta0(&self) -> f64 {
        reference_gain(self.wavelength)
    }

    /// Transmit powers normalized by the noise power, `P_k / sigma^2`.
    pub fn normalized_powers(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.power / self.noise).collect()
    }

    pub fn with_pattern(&self, pattern: GainPattern) -> Self {
        Self {
            pattern,
            ..self.clone()
        }
    }

    /// Resolves a JSON document, drawing generated clusters and any missing
    /// phases from streams derived from the document seed.
    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self> {
        let users = doc
            .users
            .iter()
            .map(|u| User::new(Vector3::from(u.xyz_m), dbm_to_watts(u.power_dbm)))
            .collect();
        let clusters = match &doc.clusters {
            ClusterSpec::List(list) => {
                let mut phases = rng::substream(doc.seed, &[tag::PHASES]);
                list.iter()
                    .map(|c| {
                        let drawn = 2.0 * PI * phases.random::<f64>();
                        Cluster::new(
                            Vector3::from(c.xyz_m),
                            c.rcs_m2.unwrap_or(DEFAULT_RCS),
                            c.phase_rad.unwrap_or(drawn),
                        )
                    })
                    .collect()
            }
            ClusterSpec::Generated {
                count,
                annulus,
                rcs_m2,
            } => {
                if !(annulus[0] >= 0.0 && annulus[1] >= annulus[0]) {
                    return Err(Error::InvalidScenario(format!("bad cluster annulus {annulus:?}")));
                }
                let mut r = rng::substream(doc.seed, &[tag::CLUSTERS]);
                generate_clusters(
                    &mut r,
                    *count,
                    *annulus,
                    DEFAULT_CLUSTER_Z_RANGE,
                    rcs_m2.unwrap_or(DEFAULT_RCS),
                )
            }
        };
        Scenario::new(
            users,
            clusters,
            dbm_to_watts(doc.noise_dbm),
            doc.wavelength_m,
            GainPattern::new(doc.directivity)?,
            doc.seed,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "scenario document".into(),
            source,
        })?;
        Self::from_doc(&doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Document form with every cluster listed explicitly.
    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            seed: self.seed,
            wavelength_m: self.wavelength,
            noise_dbm: watts_to_dbm(self.noise),
            directivity: self.pattern.directivity(),
            users: self
                .users
                .iter()
                .map(|u| UserDoc {
                    xyz_m: u.position.into(),
                    power_dbm: watts_to_dbm(u.power),
                })
                .collect(),
            clusters: ClusterSpec::List(
                self.clusters
                    .iter()
                    .map(|c| ClusterDoc {
                        xyz_m: c.position.into(),
                        rcs_m2: Some(c.rcs),
                        phase_rad: Some(c.phase),
                    })
                    .collect(),
            ),
        }
    }
}

fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn default_directivity() -> f64 {
    2.0
}

/// JSON form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub seed: u64,
    pub wavelength_m: f64,
    pub noise_dbm: f64,
    #[serde(default = "default_directivity")]
    pub directivity: f64,
    pub users: Vec<UserDoc>,
    #[serde(default = "ClusterSpec::empty")]
    pub clusters: ClusterSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDoc {
    pub xyz_m: [f64; 3],
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub xyz_m: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcs_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<f64>,
}

/// Either an explicit cluster list or a request to generate clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClusterSpec {
    List(Vec<ClusterDoc>),
    Generated {
        count: usize,
        annulus: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rcs_m2: Option<f64>,
    },
}

impl ClusterSpec {
    fn empty() -> Self {
        ClusterSpec::List(Vec::new())
    }
}
