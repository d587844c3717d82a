//! `key = value` settings file with `[section]` headers. Blank lines and
//! lines starting with `#` or `;` are ignored; unknown sections or keys are
//! errors.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crane_guide::pipeline::PipelineParams;
use crane_guide::synth::SweepSpec;
use crane_guide::wire::{FrameEncoding, DEFAULT_PORT};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireSettings {
    /// Host the daemon connects to.
    pub host: String,
    pub port: u16,
    pub slots: usize,
    /// 0 means uncapped.
    pub fps_cap: f64,
    pub encoding: FrameEncoding,
    pub queue_depth: usize,
    pub retry_attempts: u32,
    pub retry_delay_ms: u64,
}

impl Default for WireSettings {
    fn default() -> Self {
        WireSettings {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            slots: 3,
            fps_cap: 0.0,
            encoding: FrameEncoding::Png,
            queue_depth: 4,
            retry_attempts: 5,
            retry_delay_ms: 1000,
        }
    }
}

impl WireSettings {
    pub fn fps(&self) -> Option<f64> {
        (self.fps_cap > 0.0).then_some(self.fps_cap)
    }

    pub fn retry_delay(&self) -> Duration {
        Duration::from_millis(self.retry_delay_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub pipeline: PipelineParams,
    pub sweep: SweepSpec,
    pub wire: WireSettings,
}

fn val<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| format!("bad value `{v}`: {e}"))
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ConfigError::Syntax { line, msg };
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{s}`")))?
                    .trim();
                if !matches!(name, "canny" | "hough" | "line" | "laser" | "scene" | "wire") {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got `{s}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| err(format!("key `{k}` outside any section")))?;
            cfg.set(sec, k, v).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), String> {
        let edges = &mut self.pipeline.lines.edges;
        let hough = &mut self.pipeline.lines.hough;
        let line = &mut self.pipeline.lines.line;
        let laser = &mut self.pipeline.laser;
        let scene = &mut self.sweep.base;
        let wire = &mut self.wire;
        match (section, key) {
            ("canny", "low") => edges.low = val(v)?,
            ("canny", "high") => edges.high = val(v)?,
            ("canny", "blur_sigma") => edges.blur_sigma = val(v)?,
            ("canny", "blur_ksize") => edges.blur_ksize = val(v)?,

            ("hough", "rho_res") => hough.rho_res = val(v)?,
            ("hough", "theta_res") => hough.theta_res = val(v)?,
            ("hough", "votes_min") => hough.votes_min = val(v)?,
            ("hough", "min_len") => hough.min_len = val(v)?,
            ("hough", "max_gap") => hough.max_gap = val(v)?,

            ("line", "theta_horiz_max") => line.theta_horiz_max = val(v)?,
            ("line", "theta_diag_lo") => line.theta_diag_lo = val(v)?,
            ("line", "theta_diag_hi") => line.theta_diag_hi = val(v)?,
            ("line", "alpha_length") => line.alpha_length = val(v)?,
            ("line", "beta_angle") => line.beta_angle = val(v)?,
            ("line", "gamma_position") => line.gamma_position = val(v)?,
            ("line", "horizontal_side") => line.horizontal_side = val(v)?,
            ("line", "diagonal_side") => line.diagonal_side = val(v)?,
            ("line", "min_separation") => line.min_separation = val(v)?,
            ("line", "crossing_margin") => line.crossing_margin = val(v)?,

            ("laser", "area_min") => laser.area_min = val(v)?,
            ("laser", "area_max") => laser.area_max = val(v)?,
            ("laser", "blur_sigma") => laser.blur_sigma = val(v)?,
            ("laser", "blur_ksize") => laser.blur_ksize = val(v)?,
            ("laser", k) if k.starts_with("core_") || k.starts_with("bright_") => {
                let (range, field) = if let Some(f) = k.strip_prefix("core_") {
                    (&mut laser.core_green, f)
                } else {
                    (&mut laser.bright_green, &k["bright_".len()..])
                };
                match field {
                    "h_lo" => range.h_lo = val(v)?,
                    "h_hi" => range.h_hi = val(v)?,
                    "s_lo" => range.s_lo = val(v)?,
                    "s_hi" => range.s_hi = val(v)?,
                    "v_lo" => range.v_lo = val(v)?,
                    "v_hi" => range.v_hi = val(v)?,
                    _ => return Err(format!("unknown key `{k}` in [laser]")),
                }
            }

            ("scene", "width") => scene.width = val(v)?,
            ("scene", "height") => scene.height = val(v)?,
            ("scene", "focal") => scene.focal = val(v)?,
            ("scene", "edge_theta") => scene.edge_theta = val(v)?,
            ("scene", "edge_row_offset") => scene.edge_row_offset = val(v)?,
            ("scene", "laser_radius") => scene.laser_radius = val(v)?,
            ("scene", "ground_gray") => scene.ground_gray = val(v)?,
            ("scene", "object_gray") => scene.object_gray = val(v)?,
            ("scene", "noise_amplitude") => scene.noise_amplitude = val(v)?,
            ("scene", "grid_spacing") => scene.grid_spacing = val(v)?,
            ("scene", "grid_contrast") => scene.grid_contrast = val(v)?,
            ("scene", "clutter_blobs") => scene.clutter_blobs = val(v)?,
            ("scene", "suction_tip_offset") => scene.geometry.suction_tip_offset = val(v)?,
            ("scene", "laser_axis_offset") => scene.geometry.laser_axis_offset = val(v)?,
            ("scene", "camera_axis_offset") => scene.geometry.camera_axis_offset = val(v)?,
            ("scene", "theta_lo") => self.sweep.theta_range.0 = val(v)?,
            ("scene", "theta_hi") => self.sweep.theta_range.1 = val(v)?,
            ("scene", "laser_radius_lo") => self.sweep.laser_radius_range.0 = val(v)?,
            ("scene", "laser_radius_hi") => self.sweep.laser_radius_range.1 = val(v)?,

            ("wire", "host") => wire.host = v.to_string(),
            ("wire", "port") => wire.port = val(v)?,
            ("wire", "slots") => wire.slots = val(v)?,
            ("wire", "fps_cap") => wire.fps_cap = val(v)?,
            ("wire", "encoding") => wire.encoding = val(v)?,
            ("wire", "queue_depth") => wire.queue_depth = val(v)?,
            ("wire", "retry_attempts") => wire.retry_attempts = val(v)?,
            ("wire", "retry_delay_ms") => wire.retry_delay_ms = val(v)?,

            (s, k) => return Err(format!("unknown key `{k}` in [{s}]")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn Display| ConfigError::Invalid(e.to_string());
        self.pipeline.validate().map_err(|e| invalid(&e))?;
        self.sweep.base.validate().map_err(|e| invalid(&e))?;
        let (t0, t1) = self.sweep.theta_range;
        let (r0, r1) = self.sweep.laser_radius_range;
        if !(0.0 < t0 && t0 <= t1 && t1 < 90.0) {
            return Err(invalid(&format!("scene theta range {t0}..{t1} must lie in (0, 90)")));
        }
        if !(0.0 < r0 && r0 <= r1) {
            return Err(invalid(&format!("laser radius range {r0}..{r1} must be positive")));
        }
        let w = &self.wire;
        if !(1..=3).contains(&w.slots) {
            return Err(invalid(&format!("wire slots must be 1..=3, got {}", w.slots)));
        }
        if w.queue_depth == 0 || w.retry_attempts == 0 {
            return Err(invalid(&"wire queue_depth and retry_attempts must be positive"));
        }
        if !(w.fps_cap >= 0.0 && w.fps_cap.is_finite()) {
            return Err(invalid(&format!("wire fps_cap {} must be >= 0", w.fps_cap)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crane_guide::line_detect::Border;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("# nothing\n\n; here\n").unwrap(), Config::default());
    }

    #[test]
    fn overrides_every_section() {
        let c = Config::parse(
            "[canny]\nlow = 40\nhigh=120\n[hough]\nvotes_min = 30\n[line]\ndiagonal_side = right\n\
             [laser]\ncore_h_lo = 95\nbright_v_lo=0.8\narea_max = 500\n[scene]\nfocal = 600\ntheta_hi = 50\n\
             [wire]\nport = 9000\nencoding = raw\nfps_cap = 5\nretry_delay_ms = 10\n",
        )
        .unwrap();
        assert_eq!(c.pipeline.lines.edges.low, 40.0);
        assert_eq!(c.pipeline.lines.edges.high, 120.0);
        assert_eq!(c.pipeline.lines.hough.votes_min, 30);
        assert_eq!(c.pipeline.lines.line.diagonal_side, Border::Right);
        assert_eq!(c.pipeline.laser.core_green.h_lo, 95.0);
        assert_eq!(c.pipeline.laser.bright_green.v_lo, 0.8);
        assert_eq!(c.pipeline.laser.area_max, 500.0);
        assert_eq!(c.sweep.base.focal, 600.0);
        assert_eq!(c.sweep.theta_range.1, 50.0);
        assert_eq!(c.wire.port, 9000);
        assert_eq!(c.wire.encoding, FrameEncoding::Raw);
        assert_eq!(c.wire.fps(), Some(5.0));
        assert_eq!(c.wire.retry_delay(), Duration::from_millis(10));
    }

    fn line_of(text: &str) -> usize {
        match Config::parse(text).unwrap_err() {
            ConfigError::Syntax { line, .. } => line,
            e => panic!("expected syntax error, got {e}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("[canny]\nlow = 10\nbogus = 1\n"), 3);
        assert_eq!(line_of("\n[nope]\n"), 2);
        assert_eq!(line_of("low = 1\n"), 1);
        assert_eq!(line_of("[hough]\nvotes_min = many\n"), 2);
        assert_eq!(line_of("[laser]\ncore_x_lo = 1\n"), 2);
        assert_eq!(line_of("[wire]\nencoding = jpeg\n"), 2);
        assert_eq!(line_of("[line]\njust words\n"), 2);
    }

    #[test]
    fn semantic_errors_rejected() {
        assert!(matches!(
            Config::parse("[canny]\nlow = 200\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::parse("[wire]\nslots = 4\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::parse("[canny]\nblur_ksize = 4\n"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
