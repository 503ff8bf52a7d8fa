//! Scenario files and run configuration.
//!
//! ```text
//! # comment
//! bounds x0 y0 z0 x1 y1 z1
//! box x0 y0 z0 x1 y1 z1      # repeatable
//! start x y z yaw            # yaw in radians
//! resolution 0.2             # any ExplorationConfig key
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use octoexplore_core::mav::MavState;
use octoexplore_core::octree::{DEFAULT_L_MAX, DEFAULT_L_MIN};
use octoexplore_core::{Aabb, PlannerConfig, SensorModel, Vec3};
use thiserror::Error;

use crate::world::{MavConfig, WorldError, WorldModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: bad value {value:?} for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("missing required `{0}` line")]
    Missing(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Apartment,
    Maze,
    Powerplant,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apartment" => Ok(Preset::Apartment),
            "maze" => Ok(Preset::Maze),
            "powerplant" => Ok(Preset::Powerplant),
            _ => Err(format!("unknown preset `{s}` (apartment, maze, powerplant)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Apartment => "apartment",
            Preset::Maze => "maze",
            Preset::Powerplant => "powerplant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig {
    pub n_candidates: usize,
    pub resolution: f64,
    pub mav: MavConfig,
    pub planner: PlannerConfig,
    pub sensor: SensorModel,
    pub l_min: f32,
    pub l_max: f32,
    pub sensor_rate_hz: f64,
    pub control_dt: f64,
    pub seed: u64,
    pub min_frontier_voxels: u32,
    pub random_phase: bool,
    pub max_retries: usize,
    /// Simulated seconds after which the run is cut off.
    pub max_sim_time: f64,
    /// Half-width of the box around the start that is known free before
    /// the first frame (never less than the safety radius).
    pub start_clearance: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            n_candidates: 20,
            resolution: 0.1,
            mav: MavConfig::default(),
            planner: PlannerConfig::default(),
            sensor: SensorModel::default(),
            l_min: DEFAULT_L_MIN,
            l_max: DEFAULT_L_MAX,
            sensor_rate_hz: 5.0,
            control_dt: 0.05,
            seed: 0,
            min_frontier_voxels: 8,
            random_phase: false,
            max_retries: 3,
            max_sim_time: 600.0,
            start_clearance: 1.0,
        }
    }
}

impl ExplorationConfig {
    /// Reference parameters for each environment type. Each gets a single
    /// resolution and speed.
    pub fn apply_preset(&mut self, preset: Preset) {
        let m = &mut self.mav;
        m.safety_radius = 0.5;
        m.w_max = 0.75;
        m.fov_v = 60f64.to_radians();
        match preset {
            Preset::Apartment => {
                self.resolution = 0.1;
                m.v_max = 1.5;
                m.d_max = 5.0;
                m.fov_h = 90f64.to_radians();
            }
            Preset::Maze => {
                self.resolution = 0.1;
                m.v_max = 1.5;
                m.d_max = 5.0;
                m.fov_h = 115f64.to_radians();
            }
            Preset::Powerplant => {
                self.resolution = 0.2;
                m.v_max = 1.5;
                m.d_max = 7.0;
                m.fov_h = 115f64.to_radians();
            }
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let m = &self.mav;
        let checks: [(bool, &str); 14] = [
            (self.n_candidates >= 1, "n_candidates must be at least 1"),
            (self.resolution > 0.0, "resolution must be positive"),
            (m.v_max > 0.0 && m.w_max > 0.0, "v_max and w_max must be positive"),
            (m.safety_radius > 0.0, "safety_radius must be positive"),
            (m.d_max > 0.0, "d_max must be positive"),
            (m.fov_h > 0.0 && m.fov_h < std::f64::consts::PI, "fov_h_deg must lie in (0, 180)"),
            (m.fov_v > 0.0 && m.fov_v < std::f64::consts::PI, "fov_v_deg must lie in (0, 180)"),
            (m.image_width >= 1 && m.image_height >= 1, "image size must be at least 1x1"),
            (m.range_noise >= 0.0, "range_noise must not be negative"),
            (self.sensor.l_hit > 0.0 && self.sensor.l_miss < 0.0, "need l_hit > 0 > l_miss"),
            (self.l_min < 0.0 && self.l_max > 0.0, "need l_min < 0 < l_max"),
            (self.sensor_rate_hz > 0.0 && self.control_dt > 0.0, "sensor_rate_hz and control_dt must be positive"),
            (self.min_frontier_voxels >= 1 && self.max_sim_time > 0.0, "min_frontier_voxels and max_sim_time must be positive"),
            (self.start_clearance >= 0.0, "start_clearance must not be negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ScenarioError::Invalid((*msg).to_string())),
            None => Ok(()),
        }
    }

    /// Sets one `key value` pair. Returns `None` for an unknown key.
    fn set(&mut self, key: &str, value: &str) -> Option<Result<(), ()>> {
        fn p<T: FromStr>(v: &str, slot: &mut T) -> Result<(), ()> {
            *slot = v.parse().map_err(|_| ())?;
            Ok(())
        }
        fn deg(v: &str, slot: &mut f64) -> Result<(), ()> {
            let d: f64 = v.parse().map_err(|_| ())?;
            *slot = d.to_radians();
            Ok(())
        }
        let m = &mut self.mav;
        Some(match key {
            "resolution" => p(value, &mut self.resolution),
            "safety_radius" => p(value, &mut m.safety_radius),
            "v_max" => p(value, &mut m.v_max),
            "w_max" => p(value, &mut m.w_max),
            "d_max" => p(value, &mut m.d_max),
            "fov_h_deg" => deg(value, &mut m.fov_h),
            "fov_v_deg" => deg(value, &mut m.fov_v),
            "mount_pitch_deg" => deg(value, &mut m.mount_pitch),
            "image_width" => p(value, &mut m.image_width),
            "image_height" => p(value, &mut m.image_height),
            "range_noise" => p(value, &mut m.range_noise),
            "n_candidates" => p(value, &mut self.n_candidates),
            "seed" => p(value, &mut self.seed),
            "sensor_rate_hz" => p(value, &mut self.sensor_rate_hz),
            "control_dt" => p(value, &mut self.control_dt),
            "min_frontier_voxels" => p(value, &mut self.min_frontier_voxels),
            "l_hit" => p(value, &mut self.sensor.l_hit),
            "l_miss" => p(value, &mut self.sensor.l_miss),
            "l_min" => p(value, &mut self.l_min),
            "l_max" => p(value, &mut self.l_max),
            "random_phase" => p(value, &mut self.random_phase),
            "max_retries" => p(value, &mut self.max_retries),
            "max_sim_time" => p(value, &mut self.max_sim_time),
            "start_clearance" => p(value, &mut self.start_clearance),
            "planner_iterations" => p(value, &mut self.planner.max_iterations),
            "planner_step" => p(value, &mut self.planner.step_size),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: WorldModel,
    pub start: MavState,
    pub config: ExplorationConfig,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>, preset: Option<Preset>) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?, preset)
    }

    /// A preset replaces the built-in defaults; keys in the file still win.
    pub fn parse(text: &str, preset: Option<Preset>) -> Result<Self, ScenarioError> {
        let mut bounds = None;
        let mut boxes = Vec::new();
        let mut start = None;
        let mut config = ExplorationConfig::default();
        if let Some(p) = preset {
            config.apply_preset(p);
        }

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let mut tokens = content.split_whitespace();
            let Some(key) = tokens.next() else { continue };
            let args: Vec<&str> = tokens.collect();
            let numbers = |n: usize| -> Result<Vec<f64>, ScenarioError> {
                if args.len() != n {
                    return Err(ScenarioError::Syntax {
                        line,
                        message: format!("`{key}` takes {n} numbers, got {}", args.len()),
                    });
                }
                args.iter()
                    .map(|a| {
                        a.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ScenarioError::BadValue {
                            line,
                            key: key.to_string(),
                            value: a.to_string(),
                        })
                    })
                    .collect()
            };
            let corners = |v: &[f64]| Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]));
            match key {
                "bounds" => {
                    if bounds.is_some() {
                        return Err(ScenarioError::Syntax {
                            line,
                            message: "`bounds` given twice".into(),
                        });
                    }
                    bounds = Some(corners(&numbers(6)?));
                }
                "box" => boxes.push(corners(&numbers(6)?)),
                "start" => {
                    let v = numbers(4)?;
                    start = Some(MavState::new(Vec3::new(v[0], v[1], v[2]), v[3]));
                }
                _ => {
                    let [value] = args[..] else {
                        return Err(ScenarioError::Syntax {
                            line,
                            message: format!("`{key}` takes exactly one value"),
                        });
                    };
                    match config.set(key, value) {
                        None => {
                            return Err(ScenarioError::Syntax {
                                line,
                                message: format!("unknown key `{key}`"),
                            })
                        }
                        Some(Err(())) => {
                            return Err(ScenarioError::BadValue {
                                line,
                                key: key.to_string(),
                                value: value.to_string(),
                            })
                        }
                        Some(Ok(())) => {}
                    }
                }
            }
        }

        let bounds = bounds.ok_or(ScenarioError::Missing("bounds"))?;
        let start = start.ok_or(ScenarioError::Missing("start"))?;
        config.validate()?;
        Ok(Self {
            world: WorldModel::new(bounds, boxes)?,
            start,
            config,
        })
    }
}
