//! Metrics log, CSV and map exports, PGM image dumps.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use octoexplore_core::evaluation::{DepthImage360, EntropyImage};
use octoexplore_core::OccupancyOctree;

pub const METRICS_HEADER: &str = "t_s,explored_volume_m3,frontier_blocks,iteration,plan_time_ms";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSample {
    pub t: f64,
    pub explored_volume: f64,
    pub frontier_blocks: usize,
    pub iteration: usize,
    pub plan_time_ms: f64,
}

/// One sample per integrated frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    samples: Vec<MetricsSample>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// # Panics
    /// If `t` does not increase or the explored volume shrinks.
    pub fn push(&mut self, s: MetricsSample) {
        if let Some(last) = self.samples.last() {
            assert!(s.t > last.t, "metrics time must increase");
            assert!(s.explored_volume >= last.explored_volume, "explored volume must not shrink");
        }
        self.samples.push(s);
    }

    pub fn samples(&self) -> &[MetricsSample] {
        &self.samples
    }

    pub fn last(&self) -> Option<&MetricsSample> {
        self.samples.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.samples.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:.3},{:.6},{},{},{:.3}",
                s.t, s.explored_volume, s.frontier_blocks, s.iteration, s.plan_time_ms
            );
        }
        out
    }
}

pub fn export_metrics(log: &MetricsLog, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, log.to_csv())
}

/// Observed voxels as `x y z p` lines (voxel centre, occupancy), Morton
/// order.
pub fn map_to_string(map: &OccupancyOctree) -> String {
    let mut out = String::new();
    for (v, p) in map.observed_voxels() {
        let c = map.voxel_center(v);
        let _ = writeln!(out, "{:.6} {:.6} {:.6} {:.6}", c.x, c.y, c.z, p);
    }
    out
}

pub fn export_map(map: &OccupancyOctree, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, map_to_string(map))
}

/// Binary 8-bit PGM, values scaled linearly from `[0, max]`.
fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64], max: f64) -> io::Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    bytes.extend(values.iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    fs::write(path, bytes)
}

/// Row 0 of the image (lowest pitch) is written as the bottom PGM row.
fn flip_rows(values: &[f64], columns: usize, rows: usize) -> Vec<f64> {
    (0..rows).rev().flat_map(|k| values[k * columns..(k + 1) * columns].iter().copied()).collect()
}

pub fn export_entropy_image(image: &EntropyImage, max: f64, path: impl AsRef<Path>) -> io::Result<()> {
    let v = flip_rows(&image.values, image.columns, image.rows);
    write_pgm(path.as_ref(), image.columns, image.rows, &v, max)
}

/// Rays without a hit are written as 0.
pub fn export_depth_image(image: &DepthImage360, d_max: f64, path: impl AsRef<Path>) -> io::Result<()> {
    let ranges: Vec<f64> = image.ranges.iter().map(|r| r.unwrap_or(0.0)).collect();
    let v = flip_rows(&ranges, image.columns, image.rows);
    write_pgm(path.as_ref(), image.columns, image.rows, &v, d_max)
}
