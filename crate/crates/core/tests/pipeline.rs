use crane_guide::eval::{evaluate_sweep, Thresholds};
use crane_guide::guidance::GuidanceStatus;
use crane_guide::imgproc::to_grayscale;
use crane_guide::par::Execution;
use crane_guide::pipeline::{process_frame, PipelineParams};
use crane_guide::synth::{render, SceneSpec, SweepSpec};

#[test]
fn frames_close_on_ground_truth() {
    let params = PipelineParams::default();
    for (i, d) in [1.0, 2.5, 5.0].into_iter().enumerate() {
        for theta in [28.0, 45.0, 62.0] {
            let spec = SceneSpec {
                ground_distance: d,
                edge_theta: theta,
                ..SceneSpec::default()
            };
            let (img, truth) = render(&spec, 100 + i as u64).unwrap();
            let r = process_frame(&img, &params).unwrap();
            assert_eq!(r.status, GuidanceStatus::Full, "d={d} theta={theta}");
            let budget = spec.focal * spec.geometry.laser_camera_offset_m() / d + 3.0;
            let err = r.corner.unwrap().distance(truth.landing_pixel);
            assert!(err <= budget, "d={d} theta={theta}: corner error {err}");
            assert!(r.laser.unwrap().center.distance(truth.laser_pixel) <= 1.0);
        }
    }
}

/// Least-squares fit of the clean diagonal boundary, independent of the
/// detector: per row, the sub-pixel crossing of the mid grey level.
#[test]
fn ground_truth_angle_matches_rendered_edge() {
    for theta in [25.0, 40.0, 55.0, 65.0] {
        let spec = SceneSpec {
            edge_theta: theta,
            noise_amplitude: 0.0,
            grid_contrast: 0.0,
            clutter_blobs: 0,
            ..SceneSpec::default()
        };
        let (img, truth) = render(&spec, 1).unwrap();
        let g = to_grayscale(&img).unwrap();
        let mid = (f64::from(spec.ground_gray) + f64::from(spec.object_gray)) / 2.0;
        let (mut ys, mut xs) = (Vec::new(), Vec::new());
        let y0 = spec.edge_row().ceil() as u32 + 3;
        for y in y0..spec.height - 3 {
            for x in 1..spec.width {
                let (a, b) = (f64::from(g.gray_at(x - 1, y)), f64::from(g.gray_at(x, y)));
                if (a - mid) * (b - mid) < 0.0 {
                    xs.push(f64::from(x - 1) + (mid - a) / (b - a));
                    ys.push(f64::from(y));
                    break;
                }
            }
        }
        assert!(ys.len() >= 30, "theta={theta}: only {} rows", ys.len());
        let n = ys.len() as f64;
        let (my, mx) = (ys.iter().sum::<f64>() / n, xs.iter().sum::<f64>() / n);
        let sxy: f64 = ys.iter().zip(&xs).map(|(y, x)| (y - my) * (x - mx)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / syy; // dx/dy
        // Direction (slope, 1) folded to (-90, 90].
        let mut fitted = 1f64.atan2(slope).to_degrees();
        if fitted > 90.0 {
            fitted -= 180.0;
        }
        assert!(
            (fitted - truth.edge_theta).abs() < 0.25,
            "theta={theta}: fitted {fitted}, truth {}",
            truth.edge_theta
        );
        // The boundary extended to the principal row lands on the landing pixel.
        let x_at = mx + slope * (truth.landing_pixel.y - my);
        assert!((x_at - truth.landing_pixel.x).abs() < 0.5, "theta={theta}: {x_at}");
    }
}

#[test]
fn sweep_modes_agree() {
    let run = |exec| {
        evaluate_sweep(
            &SweepSpec::default(),
            &PipelineParams::default(),
            &[1.5, 4.0],
            3,
            42,
            Thresholds::default(),
            exec,
        )
        .unwrap()
    };
    let (a, b) = (run(Execution::Sequential), run(Execution::Parallel));
    assert_eq!(a, b);
    assert_eq!(a.to_table(), b.to_table());
    assert_eq!(a.frames.len(), 6);
    assert!(a.passed(), "{:?}", a.violations());
}

#[test]
fn impossible_thresholds_fail() {
    let r = evaluate_sweep(
        &SweepSpec::default(),
        &PipelineParams::default(),
        &[2.0],
        1,
        0,
        Thresholds {
            min_full_fraction: 1.5,
            ..Thresholds::default()
        },
        Execution::Sequential,
    )
    .unwrap();
    assert!(!r.passed());
    assert_eq!(r.violations().len(), 1);
}
