//! Piecewise-flat terrain worlds and their robot-centric heightmap view.
//!
//! A terrain is a list of `(x_start, height)` breakpoints sorted by `x_start`;
//! segment `i` covers `[x_i, x_{i+1})` and the first segment extends to -inf.
//! Two generated flavors exist: ditch worlds (flat ground with rectangular
//! ditches cut in) and step worlds (a random walk of plateau levels).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Number of cells in the robot-centric heightmap.
pub const HEIGHTMAP_CELLS: usize = 110;
/// Width of one heightmap cell in meters.
pub const CELL_WIDTH: f64 = 0.1;
/// Heightmap coverage behind the robot, meters.
pub const LOOKBACK: f64 = 3.0;
/// Heightmap coverage in front of the robot, meters.
pub const LOOKAHEAD: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Ditches,
    Steps,
}

/// Piecewise-constant height field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub kind: TerrainKind,
    /// Ground friction coefficient.
    pub mu: f64,
    /// `(x_start, height)` pairs, strictly increasing in `x_start`. The first
    /// segment answers every query left of its own start.
    pub breakpoints: Vec<(f64, f64)>,
}

impl Terrain {
    /// Flat ground at height zero.
    pub fn flat(mu: f64) -> Self {
        Terrain {
            kind: TerrainKind::Ditches,
            mu,
            breakpoints: vec![(-5.0, 0.0)],
        }
    }

    /// Index of the segment containing `x`. A query exactly on a breakpoint
    /// belongs to the segment starting there (right-segment convention).
    pub fn segment_index(&self, x: f64) -> usize {
        let after = self.breakpoints.partition_point(|&(bx, _)| bx <= x);
        after.saturating_sub(1)
    }

    /// Ground height at `x`.
    pub fn height_at(&self, x: f64) -> f64 {
        self.breakpoints[self.segment_index(x)].1
    }

    /// Lowest ground height anywhere on the terrain.
    pub fn min_height(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|&(_, h)| h)
            .fold(f64::INFINITY, f64::min)
    }

    /// Breakpoint x positions crossed when moving from `x0` to `x1`
    /// (exclusive of the start, inclusive of the end), in travel order.
    pub fn crossings(&self, x0: f64, x1: f64) -> Vec<f64> {
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let mut xs: Vec<f64> = self
            .breakpoints
            .iter()
            .map(|&(bx, _)| bx)
            .filter(|&bx| {
                if x0 <= x1 {
                    bx > lo && bx <= hi
                } else {
                    bx >= lo && bx < hi
                }
            })
            .collect();
        if x0 > x1 {
            xs.reverse();
        }
        xs
    }

    /// Robot-centric heightmap: 110 cells of 10 cm sampled at cell centers,
    /// spanning `[robot_x - 3, robot_x + 8)`.
    pub fn discretize(&self, robot_x: f64) -> Heightmap {
        let cells = (0..HEIGHTMAP_CELLS)
            .map(|i| self.height_at(robot_x - LOOKBACK + CELL_WIDTH * (i as f64 + 0.5)))
            .collect();
        Heightmap {
            origin_x: robot_x,
            cells,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("terrain serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// 110-cell robot-centric terrain discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heightmap {
    pub origin_x: f64,
    pub cells: Vec<f64>,
}

impl Heightmap {
    /// x coordinate of the left edge of cell 0.
    pub fn window_start(&self) -> f64 {
        self.origin_x - LOOKBACK
    }

    /// x coordinate just past the last cell.
    pub fn window_end(&self) -> f64 {
        self.origin_x + LOOKAHEAD
    }

    /// Center x coordinate of cell `i`.
    pub fn cell_center(&self, i: usize) -> f64 {
        self.window_start() + CELL_WIDTH * (i as f64 + 0.5)
    }

    /// Cell containing `x`, or None when outside the window.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let off = (x - self.window_start()) / CELL_WIDTH;
        if off < 0.0 {
            return None;
        }
        let i = off.floor() as usize;
        (i < HEIGHTMAP_CELLS).then_some(i)
    }

    /// Writes `cell_index,x_center,height` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "cell_index,x_center,height")?;
        for (i, h) in self.cells.iter().enumerate() {
            writeln!(w, "{},{},{}", i, self.cell_center(i), h)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TerrainError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Parameters for random terrain generation. The feature geometry here is
/// recorded config, not canon; defaults are tuned so a hopper launching at
/// 0.8 m apex height faces passable but non-trivial worlds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TerrainGenConfig {
    /// Min/max ditch width, meters.
    pub ditch_width: (f64, f64),
    /// Ditch depth below baseline, meters (positive).
    pub ditch_depth: f64,
    /// Min/max magnitude of one plateau level change, meters.
    pub step_height: (f64, f64),
    /// Min/max distance between consecutive feature starts, meters.
    pub spacing: (f64, f64),
    /// Features are generated from the end of the launch zone up to here.
    pub extent: f64,
    /// Friction coefficient stamped on generated terrains.
    pub mu: f64,
}

impl Default for TerrainGenConfig {
    fn default() -> Self {
        TerrainGenConfig {
            ditch_width: (0.3, 0.9),
            ditch_depth: 1.0,
            step_height: (0.05, 0.25),
            spacing: (1.2, 2.5),
            extent: 14.0,
            mu: 0.8,
        }
    }
}

/// Launch zone kept flat at the start of every generated terrain.
pub const SAFE_ZONE: f64 = 1.5;

fn sample_range<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 <= range.0 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

fn validate(cfg: &TerrainGenConfig) -> Result<(), TerrainError> {
    if !(cfg.extent > SAFE_ZONE) {
        return Err(TerrainError::InvalidConfig(format!(
            "extent {} must exceed the {} m launch zone",
            cfg.extent, SAFE_ZONE
        )));
    }
    if cfg.spacing.0 < 0.0 || cfg.spacing.1 < cfg.spacing.0 {
        return Err(TerrainError::InvalidConfig("bad spacing range".into()));
    }
    Ok(())
}

/// Flat baseline with non-overlapping rectangular ditches. Consecutive ditch
/// starts are one spacing draw apart, so the config is rejected when the
/// minimum spacing could not contain the widest ditch.
pub fn gen_ditch_world<R: Rng>(cfg: &TerrainGenConfig, rng: &mut R) -> Result<Terrain, TerrainError> {
    validate(cfg)?;
    if cfg.ditch_width.1 > 0.0 && cfg.spacing.0 < cfg.ditch_width.1 {
        return Err(TerrainError::InvalidConfig(format!(
            "min spacing {} is smaller than max ditch width {}",
            cfg.spacing.0, cfg.ditch_width.1
        )));
    }
    let mut breakpoints = vec![(-5.0, 0.0)];
    let mut start = SAFE_ZONE + sample_range(rng, cfg.spacing);
    loop {
        let width = sample_range(rng, cfg.ditch_width);
        if width > 0.0 {
            if start + width > cfg.extent {
                break;
            }
            breakpoints.push((start, -cfg.ditch_depth));
            breakpoints.push((start + width, 0.0));
        }
        let gap = sample_range(rng, cfg.spacing);
        if gap <= 0.0 {
            break;
        }
        start += gap;
        if start > cfg.extent {
            break;
        }
    }
    Ok(Terrain {
        kind: TerrainKind::Ditches,
        mu: cfg.mu,
        breakpoints,
    })
}

/// Plateau random walk: at each feature start the level moves up or down by a
/// draw from the step-height range.
pub fn gen_step_world<R: Rng>(cfg: &TerrainGenConfig, rng: &mut R) -> Result<Terrain, TerrainError> {
    validate(cfg)?;
    let mut breakpoints = vec![(-5.0, 0.0)];
    let mut level = 0.0;
    let mut x = SAFE_ZONE + sample_range(rng, cfg.spacing);
    while x <= cfg.extent {
        let magnitude = sample_range(rng, cfg.step_height);
        let up: bool = rng.gen();
        if magnitude > 0.0 {
            level += if up { magnitude } else { -magnitude };
            breakpoints.push((x, level));
        }
        let gap = sample_range(rng, cfg.spacing);
        if gap <= 0.0 {
            break;
        }
        x += gap;
    }
    Ok(Terrain {
        kind: TerrainKind::Steps,
        mu: cfg.mu,
        breakpoints,
    })
}
