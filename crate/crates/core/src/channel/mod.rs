//! Directional gain pattern and narrowband LoS/NLoS channel synthesis.
//!
//! Each antenna radiates with `G(eps) = G0 cos^(2p)(eps)` in its front
//! half-space, where `eps` is the angle between its boresight and the
//! direction of the signal. A user reaches an antenna over the direct path and
//! over one bounce per scattering cluster; only the antenna side of each path
//! carries pattern gain.

mod scenario;

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, ArrayLayout, LayoutMode, RotationState};

pub use scenario::{
    dbm_to_watts, generate_clusters, Cluster, ClusterDoc, ClusterSpec, Scenario, ScenarioDoc,
    User, UserDoc, DEFAULT_CLUSTER_Z_RANGE, DEFAULT_RCS,
};

pub type C64 = Complex<f64>;

/// `G(eps) = G0 cos^(2p)(eps)` with `G0 = 2(2p + 1)`, zero behind the antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPattern {
    directivity: f64,
}

impl GainPattern {
    pub fn new(directivity: f64) -> Result<Self> {
        if !(directivity.is_finite() && directivity >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "directivity {directivity} must be a nonnegative number"
            )));
        }
        Ok(Self { directivity })
    }

    /// Front half-space isotropic pattern (`p = 0`, `G0 = 2`).
    pub fn isotropic() -> Self {
        Self { directivity: 0.0 }
    }

    pub fn directivity(&self) -> f64 {
        self.directivity
    }

    pub fn peak_gain(&self) -> f64 {
        2.0 * (2.0 * self.directivity + 1.0)
    }

    /// Amplitude gain `sqrt(G)`, which is what the channel coefficients use.
    pub fn amplitude(&self, cos_eps: f64) -> f64 {
        if cos_eps > 0.0 {
            self.peak_gain().sqrt() * cos_eps.min(1.0).powf(self.directivity)
        } else {
            0.0
        }
    }
}

/// Power gain of `pattern` at angular offset with cosine `cos_eps`.
pub fn directional_gain(pattern: &GainPattern, cos_eps: f64) -> f64 {
    if cos_eps > 0.0 {
        pattern.peak_gain() * cos_eps.min(1.0).powf(2.0 * pattern.directivity)
    } else {
        0.0
    }
}

/// Free-space reference gain at 1 m, `(lambda / 4 pi)^2`.
pub fn reference_gain(wavelength: f64) -> f64 {
    (wavelength / (4.0 * PI)).powi(2)
}

fn separation(from: &Vector3<f64>, to: &Vector3<f64>) -> Result<(Vector3<f64>, f64)> {
    let d = to - from;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(Error::CoincidentPoints(r));
    }
    Ok((d / r, r))
}

fn phasor(distance: f64, wavelength: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * distance / wavelength)
}

/// Direct-path coefficient between antenna at `t` with boresight `f` and user at `v`.
pub fn los_coefficient(
    pattern: &GainPattern,
    f: &Vector3<f64>,
    t: &Vector3<f64>,
    v: &Vector3<f64>,
    wavelength: f64,
    beta0: f64,
) -> Result<C64> {
    let (dir, r) = separation(t, v)?;
    let amp = beta0.sqrt() * pattern.amplitude(f.dot(&dir)) / r;
    Ok(phasor(r, wavelength) * amp)
}

/// Sum of single-bounce paths from user `v` through every cluster to antenna `t`.
pub fn nlos_coefficient(
    pattern: &GainPattern,
    f: &Vector3<f64>,
    t: &Vector3<f64>,
    clusters: &[Cluster],
    v: &Vector3<f64>,
    wavelength: f64,
    beta0: f64,
) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for c in clusters {
        let (dir, rd) = separation(t, &c.position)?;
        let (_, rdk) = separation(&c.position, v)?;
        let amp = beta0.sqrt() * pattern.amplitude(f.dot(&dir)) / rd
            * (c.rcs / (4.0 * PI)).sqrt()
            / rdk;
        sum += C64::from_polar(amp, -2.0 * PI * (rd + rdk) / wavelength + c.phase);
    }
    Ok(sum)
}

/// Complex `Q x K` uplink channel; column `k` belongs to user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(DMatrix<C64>);

impl ChannelMatrix {
    pub fn new(entries: DMatrix<C64>) -> Self {
        Self(entries)
    }

    pub fn from_columns(columns: &[DVector<C64>]) -> Self {
        Self(DMatrix::from_columns(columns))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, k: usize) -> DVector<C64> {
        self.0.column(k).into_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }
}

/// Precomputed element-mode geometry. In element mode antenna positions do
/// not move with rotation, so every distance and phase can be cached and only
/// the pattern amplitudes depend on the rotation state.
#[derive(Debug, Clone)]
pub struct ChannelSynth {
    pattern: GainPattern,
    antennas: usize,
    users: usize,
    clusters: usize,
    /// Unit direction antenna -> user, indexed `q * K + k`.
    los_dir: Vec<Vector3<f64>>,
    /// `sqrt(beta0) / r * exp(-j 2 pi r / lambda)`, indexed `q * K + k`.
    los_base: Vec<C64>,
    /// Unit direction antenna -> cluster, indexed `q * D + d`.
    nlos_dir: Vec<Vector3<f64>>,
    /// Everything but the pattern amplitude, indexed `(q * D + d) * K + k`.
    nlos_base: Vec<C64>,
}

impl ChannelSynth {
    /// Caches the geometry of `scenario` against an element-mode `layout`.
    pub fn new(scenario: &Scenario, layout: &ArrayLayout) -> Result<Self> {
        let positions = layout.element_positions()?;
        Self::from_positions(scenario, &positions)
    }

    fn from_positions(scenario: &Scenario, positions: &[Vector3<f64>]) -> Result<Self> {
        let lambda = scenario.wavelength;
        let sqrt_b0 = scenario.beta0().sqrt();
        let (q_count, k_count, d_count) =
            (positions.len(), scenario.users.len(), scenario.clusters.len());
        let mut los_dir = Vec::with_capacity(q_count * k_count);
        let mut los_base = Vec::with_capacity(q_count * k_count);
        let mut nlos_dir = Vec::with_capacity(q_count * d_count);
        let mut nlos_base = Vec::with_capacity(q_count * d_count * k_count);
        let mut cluster_user = Vec::with_capacity(d_count * k_count);
        for c in &scenario.clusters {
            for u in &scenario.users {
                let (_, rdk) = separation(&c.position, &u.position)?;
                cluster_user.push(rdk);
            }
        }
        for t in positions {
            for u in &scenario.users {
                let (dir, r) = separation(t, &u.position)?;
                los_dir.push(dir);
                los_base.push(phasor(r, lambda) * (sqrt_b0 / r));
            }
            for (d, c) in scenario.clusters.iter().enumerate() {
                let (dir, rd) = separation(t, &c.position)?;
                nlos_dir.push(dir);
                let scale = sqrt_b0 / rd * (c.rcs / (4.0 * PI)).sqrt();
                for k in 0..k_count {
                    let rdk = cluster_user[d * k_count + k];
                    nlos_base.push(C64::from_polar(
                        scale / rdk,
                        -2.0 * PI * (rd + rdk) / lambda + c.phase,
                    ));
                }
            }
        }
        Ok(Self {
            pattern: scenario.pattern,
            antennas: q_count,
            users: k_count,
            clusters: d_count,
            los_dir,
            los_base,
            nlos_dir,
            nlos_base,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Channel for per-antenna boresights `pointing[q]`.
    pub fn channel(&self, pointing: &[Vector3<f64>]) -> ChannelMatrix {
        assert_eq!(pointing.len(), self.antennas, "one boresight per antenna");
        let (kc, dc) = (self.users, self.clusters);
        let mut h = DMatrix::<C64>::zeros(self.antennas, kc);
        let mut amps = vec![0.0; dc];
        for (q, f) in pointing.iter().enumerate() {
            for (d, a) in amps.iter_mut().enumerate() {
                *a = self.pattern.amplitude(f.dot(&self.nlos_dir[q * dc + d]));
            }
            for k in 0..kc {
                let i = q * kc + k;
                let mut v = self.los_base[i] * self.pattern.amplitude(f.dot(&self.los_dir[i]));
                for (d, &a) in amps.iter().enumerate() {
                    if a > 0.0 {
                        v += self.nlos_base[(q * dc + d) * kc + k] * a;
                    }
                }
                h[(q, k)] = v;
            }
        }
        ChannelMatrix(h)
    }

    /// Channel for a rotation state laid out on the cached element grid.
    pub fn channel_for_state(&self, state: &RotationState) -> ChannelMatrix {
        let pointing: Vec<_> = state
            .unit_angles()
            .into_iter()
            .map(|(a, b)| geometry::pointing_vector(a, b))
            .collect();
        self.channel(&pointing)
    }
}

fn channel_column(
    scenario: &Scenario,
    antennas: &[(Vector3<f64>, Vector3<f64>)],
    v: &Vector3<f64>,
) -> Result<DVector<C64>> {
    let (lambda, b0) = (scenario.wavelength, scenario.beta0());
    let mut col = DVector::zeros(antennas.len());
    for (q, (t, f)) in antennas.iter().enumerate() {
        col[q] = los_coefficient(&scenario.pattern, f, t, v, lambda, b0)?
            + nlos_coefficient(&scenario.pattern, f, t, &scenario.clusters, v, lambda, b0)?;
    }
    Ok(col)
}

fn assemble(scenario: &Scenario, antennas: &[(Vector3<f64>, Vector3<f64>)]) -> Result<ChannelMatrix> {
    let cols = scenario
        .users
        .iter()
        .map(|u| channel_column(scenario, antennas, &u.position))
        .collect::<Result<Vec<_>>>()?;
    if cols.is_empty() {
        return Ok(ChannelMatrix(DMatrix::zeros(antennas.len(), 0)));
    }
    Ok(ChannelMatrix::from_columns(&cols))
}

/// Element-mode channel assembled coefficient by coefficient.
pub fn element_channel_matrix(
    scenario: &Scenario,
    layout: &ArrayLayout,
    state: &RotationState,
) -> Result<ChannelMatrix> {
    let positions = layout.element_positions()?;
    state.check_layout(layout)?;
    let antennas: Vec<_> = positions
        .into_iter()
        .zip(state.unit_angles())
        .map(|(t, (a, b))| (t, geometry::pointing_vector(a, b)))
        .collect();
    assemble(scenario, &antennas)
}

/// Antenna positions and shared panel normals for a panel-mode state, in
/// `(panel, within-panel)` order.
pub fn panel_antennas(
    layout: &ArrayLayout,
    state: &RotationState,
) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
    let centers = layout.panel_centers()?;
    let local = layout.panel_local_offsets()?;
    state.check_layout(layout)?;
    let mut out = Vec::with_capacity(layout.antenna_count());
    for (center, (a, b)) in centers.iter().zip(state.unit_angles()) {
        let o = geometry::rotation_matrix(a, b);
        for r in &local {
            out.push((
                geometry::antenna_global_position(center, &o.rotation, r),
                o.pointing,
            ));
        }
    }
    Ok(out)
}

/// Panel-mode channel: antennas move with their panel and share its normal.
pub fn panel_channel_matrix(
    scenario: &Scenario,
    layout: &ArrayLayout,
    state: &RotationState,
) -> Result<ChannelMatrix> {
    let antennas = panel_antennas(layout, state)?;
    assemble(scenario, &antennas)
}

/// Dispatches on the layout mode.
pub fn channel_matrix(
    scenario: &Scenario,
    layout: &ArrayLayout,
    state: &RotationState,
) -> Result<ChannelMatrix> {
    match layout.mode() {
        LayoutMode::Element => element_channel_matrix(scenario, layout, state),
        LayoutMode::Panel { .. } => panel_channel_matrix(scenario, layout, state),
    }
}

/// Reusable channel evaluator for one scenario and layout, caching element
/// geometry when possible.
#[derive(Debug, Clone)]
pub enum ChannelModel<'a> {
    Element(ChannelSynth),
    Panel {
        scenario: &'a Scenario,
        layout: &'a ArrayLayout,
    },
}

impl<'a> ChannelModel<'a> {
    pub fn new(scenario: &'a Scenario, layout: &'a ArrayLayout) -> Result<Self> {
        Ok(match layout.mode() {
            LayoutMode::Element => ChannelModel::Element(ChannelSynth::new(scenario, layout)?),
            LayoutMode::Panel { .. } => ChannelModel::Panel { scenario, layout },
        })
    }

    pub fn channel(&self, state: &RotationState) -> Result<ChannelMatrix> {
        match self {
            ChannelModel::Element(s) => {
                if state.units() != s.antennas() {
                    return Err(Error::StateMismatch(format!(
                        "{} units for {} antennas",
                        state.units(),
                        s.antennas()
                    )));
                }
                Ok(s.channel_for_state(state))
            }
            ChannelModel::Panel { scenario, layout } => {
                panel_channel_matrix(scenario, layout, state)
            }
        }
    }
}
