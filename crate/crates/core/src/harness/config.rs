use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discrete_ga::GaParams;
use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;
use crate::rotation_opt::{AoParams, ConstraintSet};

/// Antenna array shared by every scheme of an experiment.
///
/// `rows x cols` is the antenna grid. Panel schemes split it into a
/// `panel_rows x panel_cols` grid of equal panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    pub panel_rows: usize,
    pub panel_cols: usize,
    /// Antenna spacing in wavelengths.
    pub spacing_wavelengths: f64,
    pub occupation: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            panel_rows: 2,
            panel_cols: 2,
            spacing_wavelengths: 0.5,
            occupation: 1.0,
        }
    }
}

/// Whether mode-agnostic schemes rotate antennas or panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Element,
    Panel,
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| {
                        let names: Vec<&str> = Self::ALL.iter().map(|v| v.name()).collect();
                        Error::InvalidParameter(format!(
                            "unknown {} {s:?}; expected one of {}",
                            stringify!($name),
                            names.join(", ")
                        ))
                    })
            }
        }
    };
}

named_enum!(Scheme {
    ClElement => "cl_element",
    ClPanel => "cl_panel",
    FlexibleElement => "flexible_element",
    FlexiblePanel => "flexible_panel",
    ArrayWise => "array_wise",
    RandomOrientation => "random_orientation",
    Fixed => "fixed",
    Isotropic => "isotropic",
    GaElement => "ga_element",
    GaPanel => "ga_panel",
    NearestProjection => "nearest_projection",
});

named_enum!(SweepVar {
    Power => "power",
    ThetaMax => "theta_max",
    Directivity => "p",
    Antennas => "Q",
    Users => "K",
    GridPoints => "L",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

/// Everything needed to reproduce an experiment. Defaults describe the
/// 64-antenna, 6-user reference setup at 3.5 GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub array: ArraySpec,
    pub mode: Mode,
    pub schemes: Vec<Scheme>,
    pub users: usize,
    pub clusters: usize,
    /// Horizontal distance range of the users from the array center.
    pub user_annulus_m: [f64; 2],
    /// Users are spread over azimuths in `[-sector, sector]` around `+x`.
    pub user_sector_rad: f64,
    pub user_height_m: f64,
    pub cluster_annulus_m: [f64; 2],
    pub cluster_height_m: [f64; 2],
    pub rcs_m2: f64,
    pub wavelength_m: f64,
    pub noise_dbm: f64,
    pub power_dbm: f64,
    pub directivity: f64,
    pub theta_max_rad: f64,
    /// Apply the anti-reflection and center-facing constraints to panels.
    pub panel_constraints: bool,
    /// Points per angle in the discrete grids.
    pub grid_points: usize,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub seed: u64,
    pub ao: AoParams,
    pub ga: GaParams,
    pub output: Option<PathBuf>,
    /// Write measured run times; when off the column is zero and output is
    /// byte-for-byte reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            array: ArraySpec::default(),
            mode: Mode::Element,
            schemes: vec![Scheme::ClElement, Scheme::ClPanel, Scheme::FlexibleElement, Scheme::Fixed],
            users: 6,
            clusters: 8,
            user_annulus_m: [50.0, 70.0],
            user_sector_rad: FRAC_PI_3,
            user_height_m: -10.0,
            cluster_annulus_m: [20.0, 60.0],
            cluster_height_m: [-10.0, 10.0],
            rcs_m2: 1.0,
            wavelength_m: 0.0857,
            noise_dbm: -80.0,
            power_dbm: 10.0,
            directivity: 2.0,
            theta_max_rad: FRAC_PI_6,
            panel_constraints: true,
            grid_points: 15,
            sweep: None,
            trials: 10,
            seed: 1,
            ao: AoParams::default(),
            ga: GaParams::default(),
            output: None,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "experiment config".into(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        if self.users == 0 {
            return bad("at least one user is required".into());
        }
        if !(self.user_annulus_m[0] >= 0.0 && self.user_annulus_m[1] >= self.user_annulus_m[0]) {
            return bad(format!("bad user annulus {:?}", self.user_annulus_m));
        }
        if !(self.cluster_annulus_m[0] >= 0.0 && self.cluster_annulus_m[1] >= self.cluster_annulus_m[0]) {
            return bad(format!("bad cluster annulus {:?}", self.cluster_annulus_m));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.user_sector_rad) {
            return bad(format!(
                "user sector {} must keep users in front of the array",
                self.user_sector_rad
            ));
        }
        if !(0.0..PI).contains(&self.theta_max_rad) {
            return bad(format!("theta_max {} must be in [0, pi)", self.theta_max_rad));
        }
        if self.grid_points == 0 {
            return bad("grid_points must be positive".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad(format!("sweep over {} has no values", s.variable));
            }
        }
        self.ao.inner.validate()?;
        self.ga.validate()?;
        for (var, value) in self.points() {
            let point = self.at(var, value)?;
            point.element_layout()?;
            if self.schemes.iter().any(|s| s.uses_panels(self.mode)) {
                point.panel_layout()?;
            }
        }
        Ok(())
    }

    /// Sweep points, or the configured transmit power when no sweep is set.
    pub fn points(&self) -> Vec<(SweepVar, f64)> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| (s.variable, v)).collect(),
            None => vec![(SweepVar::Power, self.power_dbm)],
        }
    }

    /// A copy with one parameter replaced by a sweep value.
    pub fn at(&self, var: SweepVar, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let count = |what: &str| -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParameter(format!("{what} must be a whole number, got {value}")))
            }
        };
        match var {
            SweepVar::Power => c.power_dbm = value,
            SweepVar::ThetaMax => {
                if !(0.0..PI).contains(&value) {
                    return Err(Error::InvalidParameter(format!("theta_max {value} must be in [0, pi)")));
                }
                c.theta_max_rad = value;
            }
            SweepVar::Directivity => c.directivity = value,
            SweepVar::Antennas => {
                let q = count("Q")?;
                let side = (q as f64).sqrt().round() as usize;
                if side == 0 || side * side != q {
                    return Err(Error::InvalidParameter(format!("Q = {q} is not a square array")));
                }
                c.array.rows = side;
                c.array.cols = side;
            }
            SweepVar::Users => {
                c.users = count("K")?;
                if c.users == 0 {
                    return Err(Error::InvalidParameter("K must be positive".into()));
                }
            }
            SweepVar::GridPoints => {
                c.grid_points = count("L")?;
                if c.grid_points == 0 {
                    return Err(Error::InvalidParameter("L must be positive".into()));
                }
            }
        }
        Ok(c)
    }

    pub fn spacing_m(&self) -> f64 {
        self.array.spacing_wavelengths * self.wavelength_m
    }

    pub fn element_layout(&self) -> Result<ArrayLayout> {
        ArrayLayout::element(self.array.rows, self.array.cols, self.spacing_m())
    }

    pub fn panel_layout(&self) -> Result<ArrayLayout> {
        let a = &self.array;
        if a.panel_rows == 0 || a.panel_cols == 0 || a.rows % a.panel_rows != 0 || a.cols % a.panel_cols != 0 {
            return Err(Error::InvalidLayout(format!(
                "{}x{} antennas do not split into {}x{} equal panels",
                a.rows, a.cols, a.panel_rows, a.panel_cols
            )));
        }
        ArrayLayout::panel(
            a.panel_rows,
            a.panel_cols,
            a.rows / a.panel_rows,
            a.cols / a.panel_cols,
            self.spacing_m(),
        )?
        .with_occupation(a.occupation)
    }

    /// The whole array as one panel.
    pub fn array_wise_layout(&self) -> Result<ArrayLayout> {
        ArrayLayout::panel(1, 1, self.array.rows, self.array.cols, self.spacing_m())?
            .with_occupation(self.array.occupation)
    }

    /// Constraints for element or panel rotation at the configured bound.
    pub fn constraints(&self, panels: bool) -> ConstraintSet {
        if panels && self.panel_constraints {
            ConstraintSet::panel(self.theta_max_rad)
        } else {
            ConstraintSet::eccentric(self.theta_max_rad)
        }
    }
}

impl Scheme {
    /// Whether the scheme rotates panels when the experiment mode is `mode`.
    pub fn uses_panels(self, mode: Mode) -> bool {
        match self {
            Scheme::ClPanel | Scheme::FlexiblePanel | Scheme::GaPanel => true,
            Scheme::ClElement | Scheme::FlexibleElement | Scheme::GaElement | Scheme::ArrayWise => false,
            Scheme::RandomOrientation | Scheme::Fixed | Scheme::Isotropic | Scheme::NearestProjection => {
                mode == Mode::Panel
            }
        }
    }
}
