//! Accuracy of the full pipeline against synthetic ground truth over a
//! distance sweep.

use std::fmt::Write as _;

use crate::error::Result;
use crate::geom::normalize_theta;
use crate::guidance::GuidanceStatus;
use crate::par::{self, Execution};
use crate::pipeline::{process_frame, PipelineParams};
use crate::synth::{derive_seed, render, SweepSpec};

/// Pass/fail limits for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Detection slack added to the laser-offset corner budget, pixels.
    pub corner_slack_px: f64,
    pub laser_max_px: f64,
    pub theta_max_deg: f64,
    pub min_full_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            corner_slack_px: 3.0,
            laser_max_px: 1.0,
            theta_max_deg: 2.0,
            min_full_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEval {
    pub distance_m: f64,
    pub seed: u64,
    pub status: GuidanceStatus,
    pub corner_err_px: Option<f64>,
    /// `focal * laser_offset / Z + slack` for this frame.
    pub corner_budget_px: f64,
    pub laser_err_px: Option<f64>,
    pub theta_err_deg: Option<f64>,
    pub truth_theta: f64,
}

impl FrameEval {
    pub fn corner_ok(&self) -> bool {
        self.status != GuidanceStatus::Full || self.corner_err_px.is_some_and(|e| e <= self.corner_budget_px)
    }

    pub fn laser_ok(&self, t: &Thresholds) -> bool {
        self.laser_err_px.is_some_and(|e| e <= t.laser_max_px)
    }

    pub fn theta_ok(&self, t: &Thresholds) -> bool {
        self.theta_err_deg.is_some_and(|e| e <= t.theta_max_deg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub frames: Vec<FrameEval>,
    pub thresholds: Thresholds,
}

impl SweepReport {
    pub fn full_fraction(&self) -> f64 {
        let full = self.frames.iter().filter(|f| f.status == GuidanceStatus::Full).count();
        full as f64 / self.frames.len().max(1) as f64
    }

    pub fn corner_ok(&self) -> bool {
        self.frames.iter().all(FrameEval::corner_ok)
    }

    pub fn laser_ok(&self) -> bool {
        self.frames.iter().all(|f| f.laser_ok(&self.thresholds))
    }

    pub fn theta_ok(&self) -> bool {
        self.frames.iter().all(|f| f.theta_ok(&self.thresholds))
    }

    pub fn full_ok(&self) -> bool {
        self.full_fraction() >= self.thresholds.min_full_fraction
    }

    pub fn passed(&self) -> bool {
        self.full_ok() && self.corner_ok() && self.laser_ok() && self.theta_ok()
    }

    /// Names of the violated checks, empty when the sweep passes.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.full_ok() {
            v.push(format!(
                "full-status fraction {:.3} below {:.3}",
                self.full_fraction(),
                self.thresholds.min_full_fraction
            ));
        }
        if !self.corner_ok() {
            v.push("corner error over budget".to_string());
        }
        if !self.laser_ok() {
            v.push(format!("laser error over {} px", self.thresholds.laser_max_px));
        }
        if !self.theta_ok() {
            v.push(format!("diagonal angle error over {} deg", self.thresholds.theta_max_deg));
        }
        v
    }

    /// CSV table, one row per frame, fixed precision.
    pub fn to_table(&self) -> String {
        let mut s = String::from("distance_m,seed,status,corner_err_px,corner_budget_px,laser_err_px,theta_err_deg\n");
        let cell = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"));
        for f in &self.frames {
            let _ = writeln!(
                s,
                "{:.2},{},{},{},{:.3},{},{}",
                f.distance_m,
                f.seed,
                f.status,
                cell(f.corner_err_px, 3),
                f.corner_budget_px,
                cell(f.laser_err_px, 3),
                cell(f.theta_err_deg, 3),
            );
        }
        s
    }
}

/// Renders `seeds_per_distance` frames at every distance and scores the
/// pipeline on each. Frame `k` at distance index `i` uses
/// `derive_seed(seed, i * seeds_per_distance + k)`.
pub fn evaluate_sweep(
    sweep: &SweepSpec,
    params: &PipelineParams,
    distances: &[f64],
    seeds_per_distance: usize,
    seed: u64,
    thresholds: Thresholds,
    exec: Execution,
) -> Result<SweepReport> {
    if distances.is_empty() || seeds_per_distance == 0 {
        return Err(crate::Error::Scene("evaluation needs at least one distance and one seed".into()));
    }
    let jobs: Vec<(f64, u64)> = distances
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| {
            (0..seeds_per_distance).map(move |k| (d, derive_seed(seed, (i * seeds_per_distance + k) as u64)))
        })
        .collect();
    let frames = par::map(exec, &jobs, |&(d, s)| evaluate_frame(sweep, params, d, s, &thresholds))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { frames, thresholds })
}

pub fn evaluate_frame(
    sweep: &SweepSpec,
    params: &PipelineParams,
    distance: f64,
    seed: u64,
    t: &Thresholds,
) -> Result<FrameEval> {
    let scene = sweep.scene(distance, seed);
    let (img, truth) = render(&scene, seed)?;
    let r = process_frame(&img, params)?;
    let offset = scene.geometry.laser_camera_offset_m();
    Ok(FrameEval {
        distance_m: distance,
        seed,
        status: r.status,
        corner_err_px: r.corner.map(|c| c.distance(truth.landing_pixel)),
        corner_budget_px: scene.focal * offset / distance + t.corner_slack_px,
        laser_err_px: r.laser.map(|s| s.center.distance(truth.laser_pixel)),
        theta_err_deg: r
            .selection
            .diagonal_source
            .map(|s| normalize_theta(s.theta() - truth.edge_theta).abs()),
        truth_theta: truth.edge_theta,
    })
}
