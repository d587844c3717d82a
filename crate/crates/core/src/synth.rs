//! Synthetic frames with exact ground truth for the downward camera.
//!
//! Pinhole camera with its optical axis normal to the ground, principal
//! point at the image centre. The mounting face is normal to the image x
//! axis: the object corner lands `camera_axis_offset` from the optical axis
//! and the laser hits the ground `camera_axis_offset - laser_axis_offset`
//! from it, both on the principal row. The object is drawn as a dark
//! occluder bounded by its undistorted bottom edge (an image row below the
//! principal point) and by its corner edge, a straight line through the
//! projected corner at a controlled angle. The edge runs down and to the
//! left, so its image angle is `-edge_theta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Vec2};
use crate::guidance::ModuleGeometry;
use crate::image::Image;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Focal length in pixels.
    pub focal: f64,
    /// Camera height above the ground, metres.
    pub ground_distance: f64,
    /// Slant of the corner edge from the image x axis, degrees.
    pub edge_theta: f64,
    /// Rows between the principal point and the object's bottom edge.
    pub edge_row_offset: f64,
    pub geometry: ModuleGeometry,
    pub laser_radius: f64,
    pub ground_gray: u8,
    pub object_gray: u8,
    pub noise_amplitude: f64,
    pub grid_spacing: u32,
    pub grid_contrast: f64,
    pub clutter_blobs: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 640,
            height: 480,
            focal: 500.0,
            ground_distance: 3.0,
            edge_theta: 40.0,
            edge_row_offset: 100.0,
            geometry: ModuleGeometry::default(),
            laser_radius: 3.0,
            ground_gray: 150,
            object_gray: 45,
            noise_amplitude: 12.0,
            grid_spacing: 40,
            grid_contrast: 6.0,
            clutter_blobs: 8,
        }
    }
}

impl SceneSpec {
    pub fn principal_point(&self) -> Point {
        Point::new(f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    /// Projection of a ground point `lateral` metres along +x from the optical axis.
    fn project_lateral(&self, lateral: f64) -> Point {
        let pp = self.principal_point();
        Point::new(pp.x + self.focal * lateral / self.ground_distance, pp.y)
    }

    pub fn landing_pixel(&self) -> Point {
        self.project_lateral(self.geometry.camera_axis_offset_m())
    }

    pub fn laser_pixel(&self) -> Point {
        self.project_lateral(self.geometry.laser_camera_offset_m())
    }

    pub fn edge_row(&self) -> f64 {
        self.principal_point().y + self.edge_row_offset
    }

    /// Signed image angle of the corner edge, in (-90, 90].
    pub fn image_edge_theta(&self) -> f64 {
        -self.edge_theta
    }

    fn edge_direction(&self) -> Vec2 {
        let t = self.edge_theta.to_radians();
        Vec2::new(-t.cos(), t.sin())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scene(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("frame {}x{} too small", self.width, self.height));
        }
        if !(self.ground_distance > 0.0) || !self.ground_distance.is_finite() {
            return bad(format!("ground distance must be positive, got {}", self.ground_distance));
        }
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return bad(format!("focal length must be positive, got {}", self.focal));
        }
        if !(self.edge_theta > 0.0 && self.edge_theta < 90.0) {
            return bad(format!("edge angle {} outside (0, 90)", self.edge_theta));
        }
        if !(self.laser_radius > 0.0) {
            return bad(format!("laser radius must be positive, got {}", self.laser_radius));
        }
        self.geometry.validate().map_err(|e| Error::Scene(e.to_string()))?;
        let rect = crate::geom::ImageRect::new(self.width, self.height);
        let landing = self.landing_pixel();
        if !rect.contains(landing) {
            return bad(format!("landing pixel ({:.1}, {:.1}) falls outside the frame", landing.x, landing.y));
        }
        let laser = self.laser_pixel();
        if !rect.contains(laser) {
            return bad(format!("laser pixel ({:.1}, {:.1}) falls outside the frame", laser.x, laser.y));
        }
        let row = self.edge_row();
        if row <= landing.y + self.laser_radius + 4.0 || row >= rect.max_y() - 4.0 {
            return bad(format!("object edge row {row:.1} must lie between the landing row and the bottom border"));
        }
        Ok(())
    }
}

/// Exact answers for one rendered frame. Serializes as the scene sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "landing", with = "point_array")]
    pub landing_pixel: Point,
    #[serde(rename = "laser", with = "point_array")]
    pub laser_pixel: Point,
    #[serde(rename = "theta")]
    pub edge_theta: f64,
    pub distance_m: f64,
    pub seed: u64,
}

mod point_array {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geom::Point;

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Point::new(x, y))
    }
}

const SUBSAMPLES: usize = 4;

fn subsample_offsets() -> impl Iterator<Item = (f64, f64)> {
    let step = 1.0 / SUBSAMPLES as f64;
    (0..SUBSAMPLES).flat_map(move |j| {
        (0..SUBSAMPLES).map(move |i| ((i as f64 + 0.5) * step - 0.5, (j as f64 + 0.5) * step - 0.5))
    })
}

const LASER_CORE: [f64; 3] = [30.0, 255.0, 40.0];
const LASER_BLOOM: [f64; 3] = [190.0, 255.0, 190.0];

struct Blob {
    center: Point,
    radius: f64,
    darken: f64,
}

/// Renders one frame. Deterministic in `(spec, seed)`.
pub fn render(spec: &SceneSpec, seed: u64) -> Result<(Image, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width, spec.height);
    let laser = spec.laser_pixel();
    let landing = spec.landing_pixel();
    let edge_dir = spec.edge_direction();
    let edge_row = spec.edge_row();

    let blobs: Vec<Blob> = (0..spec.clutter_blobs)
        .filter_map(|_| {
            let center = Point::new(rng.gen_range(0.0..f64::from(w)), rng.gen_range(0.0..edge_row));
            let radius = rng.gen_range(3.0..8.0);
            let darken = rng.gen_range(40.0..80.0);
            (center.distance(laser) > radius + spec.laser_radius + 20.0).then_some(Blob {
                center,
                radius,
                darken,
            })
        })
        .collect();

    // Signed distance into the occluder; positive inside.
    let inside_edge = |p: Point| p.sub(landing).cross(edge_dir);
    let occluded = |p: Point| p.y >= edge_row && inside_edge(p) >= 0.0;

    let mut img = Image::rgb(w, h, [0, 0, 0])?;
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(f64::from(x), f64::from(y));
            let mut g = f64::from(spec.ground_gray) + rng.gen_range(-spec.noise_amplitude..=spec.noise_amplitude);
            if spec.grid_spacing > 0 && (x % spec.grid_spacing == 0 || y % spec.grid_spacing == 0) {
                g -= spec.grid_contrast;
            }
            for b in &blobs {
                if p.distance(b.center) <= b.radius {
                    g -= b.darken;
                }
            }
            let mut c = [g + 4.0, g, g - 4.0];

            if p.distance(laser) <= spec.laser_radius + 1.0 {
                let mut acc = [0.0; 3];
                for (dx, dy) in subsample_offsets() {
                    let d = Point::new(p.x + dx, p.y + dy).distance(laser);
                    let s = if d <= 0.5 * spec.laser_radius {
                        LASER_BLOOM
                    } else if d <= spec.laser_radius {
                        LASER_CORE
                    } else {
                        c
                    };
                    (0..3).for_each(|k| acc[k] += s[k]);
                }
                c = acc.map(|v| v / (SUBSAMPLES * SUBSAMPLES) as f64);
            }

            let near_edge = (p.y - edge_row).abs() <= 1.0 || inside_edge(p).abs() <= 1.0;
            let cover = if near_edge {
                subsample_offsets()
                    .filter(|&(dx, dy)| occluded(Point::new(p.x + dx, p.y + dy)))
                    .count() as f64
                    / (SUBSAMPLES * SUBSAMPLES) as f64
            } else if occluded(p) {
                1.0
            } else {
                0.0
            };
            if cover > 0.0 {
                let o = f64::from(spec.object_gray) + rng.gen_range(-3.0..=3.0);
                c = c.map(|v| cover * o + (1.0 - cover) * v);
            }
            img.set_rgb(x, y, c.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }

    let truth = GroundTruth {
        landing_pixel: landing,
        laser_pixel: laser,
        edge_theta: spec.image_edge_theta(),
        distance_m: spec.ground_distance,
        seed,
    };
    Ok((img, truth))
}

/// Ranges the sweep draws per-frame scene parameters from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SceneSpec,
    pub theta_range: (f64, f64),
    pub laser_radius_range: (f64, f64),
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: SceneSpec::default(),
            theta_range: (25.0, 65.0),
            laser_radius_range: (2.0, 4.0),
        }
    }
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SweepSpec {
    /// Scene for one sweep frame; angle and spot size come from `frame_seed`.
    pub fn scene(&self, distance: f64, frame_seed: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed ^ 0x5CE4_E000);
        let (t0, t1) = self.theta_range;
        let (r0, r1) = self.laser_radius_range;
        SceneSpec {
            ground_distance: distance,
            edge_theta: if t1 > t0 { rng.gen_range(t0..=t1) } else { t0 },
            laser_radius: if r1 > r0 { rng.gen_range(r0..=r1) } else { r0 },
            ..self.base
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepFrame {
    pub image: Image,
    pub truth: GroundTruth,
    pub scene: SceneSpec,
}

/// One frame per distance; frame `i` uses `derive_seed(seed, i)`.
pub fn sweep(spec: &SweepSpec, distances: &[f64], seed: u64, exec: Execution) -> Result<Vec<SweepFrame>> {
    if distances.is_empty() {
        return Err(Error::Scene("sweep needs at least one distance".into()));
    }
    let jobs: Vec<(f64, u64)> = distances
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, derive_seed(seed, i as u64)))
        .collect();
    par::map(exec, &jobs, |&(d, s)| {
        let scene = spec.scene(d, s);
        render(&scene, s).map(|(image, truth)| SweepFrame { image, truth, scene })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laser_offsets_follow_pinhole() {
        let at = |d: f64| SceneSpec { ground_distance: d, ..SceneSpec::default() };
        let pp = SceneSpec::default().principal_point();
        assert!((at(1.0).laser_pixel().x - pp.x - 8.5).abs() < 1e-9);
        assert!((at(5.0).laser_pixel().x - pp.x - 1.7).abs() < 1e-9);
        assert_eq!(at(5.0).laser_pixel().y, pp.y);
        assert!((at(1.0).landing_pixel().x - pp.x - 18.4).abs() < 1e-9);
    }

    #[test]
    fn render_is_deterministic() {
        let spec = SceneSpec::default();
        let (a, ta) = render(&spec, 11).unwrap();
        let (b, tb) = render(&spec, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = render(&spec, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_scenes() {
        let near = SceneSpec { ground_distance: 0.01, ..SceneSpec::default() };
        assert!(matches!(render(&near, 0), Err(Error::Scene(_))));
        let zero = SceneSpec { ground_distance: 0.0, ..SceneSpec::default() };
        assert!(render(&zero, 0).is_err());
        let flat = SceneSpec { edge_theta: 0.0, ..SceneSpec::default() };
        assert!(render(&flat, 0).is_err());
    }

    #[test]
    fn landing_pixel_inside_frame_over_range() {
        for d in [1.0, 1.5, 2.0, 3.0, 4.0, 5.0] {
            SceneSpec { ground_distance: d, ..SceneSpec::default() }.validate().unwrap();
        }
    }

    #[test]
    fn sweep_contract() {
        let spec = SweepSpec::default();
        let frames = sweep(&spec, &[1.0, 2.0, 3.0, 4.0, 5.0], 7, Execution::Parallel).unwrap();
        assert_eq!(frames.len(), 5);
        let pp = spec.base.principal_point();
        let offsets: Vec<f64> = frames.iter().map(|f| f.truth.laser_pixel.x - pp.x).collect();
        assert!(offsets.windows(2).all(|w| w[0] > w[1]), "{offsets:?}");
        for f in &frames {
            // pinhole: offset * Z is constant
            let k = (f.truth.laser_pixel.x - pp.x) * f.truth.distance_m;
            assert!((k - 500.0 * 0.017).abs() < 1e-9);
            assert!((-65.0..=-25.0).contains(&f.truth.edge_theta));
        }
        assert!(sweep(&spec, &[], 7, Execution::Sequential).is_err());

        let twice = sweep(&spec, &[3.0, 3.0], 9, Execution::Sequential).unwrap();
        for (i, f) in twice.iter().enumerate() {
            let s = derive_seed(9, i as u64);
            let (img, truth) = render(&spec.scene(3.0, s), s).unwrap();
            assert_eq!(img, f.image);
            assert_eq!(truth, f.truth);
        }
    }

    #[test]
    fn sidecar_shape() {
        let (_, t) = render(&SceneSpec::default(), 3).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with(r#"{"landing":[3"#), "{text}");
        let keys = ["\"landing\"", "\"laser\"", "\"theta\"", "\"distance_m\"", "\"seed\":3}"];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(serde_json::from_str::<GroundTruth>(&text).unwrap(), t);
    }
}
