//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracklet_core::association::{speed_and_direction, Track, TrackState, TrajectoryPoint};
use tracklet_core::background::{GmmParams, MixtureModel};
use tracklet_core::meanshift::{build_target_model, candidate_histogram, estimate_geometry, track, TargetModel};
use tracklet_core::pipeline::{annotate_frame, run_frames, FrameResult, PipelineConfig, PALETTE, YELLOW};
use tracklet_core::regions::{
    d_total, downsample_histogram, l1_distance, label_components, BoundingBox, ColorHistogram,
    DownsampleMode, Point, RegionFeatures,
};
use tracklet_core::synthgen::{
    crossing_script, render, script_to_text, Background, CrossingParams, GroundTruth, Keyframe,
    ObjectSpec, SceneScript, Shape,
};
use tracklet_core::{ForegroundMask, Frame};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit,
        format!("took {:.2}s, limit {limit}s", elapsed.as_secs_f64()),
    )
}

// 1. dump-config prints the default mixture constants
fn criterion_1() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_tracklet"))
        .args(["run", "--dump-config"])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), format!("exit status {}", out.status))?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let expected = [
        ("alpha", "0.02"),
        ("rho", "0.01"),
        ("deviation_sq_threshold", "49"),
        ("init_variance", "3"),
        ("init_mixprop", "1e-5"),
        ("background_threshold", "0.9"),
        ("component_threshold", "10"),
        ("ms_epsilon", "0.1"),
    ];
    for (k, v) in expected {
        let found = text
            .lines()
            .find_map(|l| l.split_once(" = ").filter(|(key, _)| *key == k).map(|(_, val)| val));
        check(found == Some(v), format!("{k}: expected {v}, got {found:?}"))?;
    }
    Ok("8/8 values exact".into())
}

fn flood(mask: &ForegroundMask, seen: &mut [bool], x: usize, y: usize, out: &mut Vec<(usize, usize)>) {
    let w = mask.width();
    if seen[y * w + x] || !mask.get(x, y) {
        return;
    }
    seen[y * w + x] = true;
    out.push((x, y));
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < mask.height() {
                flood(mask, seen, nx as usize, ny as usize, out);
            }
        }
    }
}

// 2. connected components against recursive flood fill
fn criterion_2() -> Outcome {
    let start = Instant::now();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = rng.random_range(0.1..0.7);
        let bits = (0..32 * 32).map(|_| rng.random_bool(density)).collect();
        let mask = ForegroundMask::from_bits(32, 32, bits);
        let mut seen = vec![false; 32 * 32];
        let mut oracle = BTreeSet::new();
        for y in 0..32 {
            for x in 0..32 {
                let mut comp = Vec::new();
                flood(&mask, &mut seen, x, y, &mut comp);
                if !comp.is_empty() {
                    comp.sort_by_key(|&(x, y)| (y, x));
                    oracle.insert(comp);
                }
            }
        }
        let got: BTreeSet<Vec<(usize, usize)>> = label_components(&mask)
            .into_iter()
            .map(|mut c| {
                c.sort_by_key(|&(x, y)| (y, x));
                c
            })
            .collect();
        check(got == oracle, format!("seed {seed}: partitions differ"))?;
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("200/200 masks identical in {:.3}s", start.elapsed().as_secs_f64()))
}

fn unit_hist(rng: &mut ChaCha8Rng, n: usize) -> ColorHistogram {
    let mut h = ColorHistogram {
        bins: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let s: f64 = h.bins.iter().sum();
    h.bins.iter_mut().for_each(|b| *b /= s);
    h
}

fn features(upper: ColorHistogram, lower: ColorHistogram) -> RegionFeatures {
    RegionFeatures {
        label: 0,
        bbox: BoundingBox {
            x_min: 0,
            y_min: 0,
            x_max: 0,
            y_max: 0,
        },
        area: 1,
        centroid: Point::new(0.0, 0.0),
        hist_upper: upper,
        hist_lower: lower,
    }
}

// 3. L1 metric and two-half distance
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..1000 {
        let n = [8, 64, 512][i % 3];
        let (a, b, c) = (unit_hist(&mut rng, n), unit_hist(&mut rng, n), unit_hist(&mut rng, n));
        let d = |x: &ColorHistogram, y: &ColorHistogram| l1_distance(x, y).unwrap();
        check(d(&a, &b) == d(&b, &a), format!("triple {i}: asymmetric"))?;
        check(
            (-1e-12..=2.0 + 1e-12).contains(&d(&a, &b)),
            format!("triple {i}: out of range {}", d(&a, &b)),
        )?;
        check(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12, format!("triple {i}: triangle"))?;
        let fa = features(a.clone(), b.clone());
        let fb = features(c.clone(), a.clone());
        check(
            d_total(&fa, &fb).unwrap() == d(&a, &c) + d(&b, &a),
            format!("triple {i}: d_total is not the sum of halves"),
        )?;
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("1000/1000 triples in {:.3}s", start.elapsed().as_secs_f64()))
}

// 4. stride sampling with renormalisation
fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = 0;
    for i in 0..500 {
        let target = if i % 2 == 0 { 8 } else { 64 };
        let mut h = unit_hist(&mut rng, 512);
        if i % 10 == 0 {
            // sparse inputs, sometimes with every sampled bin empty
            for (j, b) in h.bins.iter_mut().enumerate() {
                if j % 3 != 0 || i % 20 == 0 {
                    *b = 0.0;
                }
            }
            if i % 20 == 0 {
                h.bins[0] = 1.0;
            }
        }
        let got = downsample_histogram(&h, target, DownsampleMode::Sample).map_err(|e| e.to_string())?;
        let stride = 512 / target;
        let mut direct: Vec<f64> = (0..target).map(|k| h.bins[(k + 1) * stride - 1]).collect();
        let total: f64 = direct.iter().sum();
        if total > 0.0 {
            direct.iter_mut().for_each(|v| *v /= total);
            check((got.bins.iter().sum::<f64>() - 1.0).abs() <= 1e-9, format!("case {i}: sum"))?;
        }
        for (g, d) in got.bins.iter().zip(&direct) {
            check((g - d).abs() <= 1e-12, format!("case {i}: {g} vs {d}"))?;
        }
        cases += 1;
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("{cases}/{cases} histograms in {:.3}s", start.elapsed().as_secs_f64()))
}

fn textured_background(seed: u64, w: usize, h: usize) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * 3).map(|_| rng.random_range(20..236u8)).collect();
    Frame::new(w, h, 3, data).expect("valid frame")
}

// 5. mixture model on a static noisy scene
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let params = GmmParams::default();
    let mut rates = Vec::new();
    for seed in 0..5u64 {
        let script = SceneScript {
            width: 64,
            height: 64,
            frame_count: 300,
            background: Background::Image(textured_background(100 + seed, 64, 64)),
            noise_sigma: 2.0,
            seed,
            objects: vec![],
        };
        let (frames, _) = render(&script).map_err(|e| e.to_string())?;
        let mut model = MixtureModel::new(64, 64, 3);
        let mut late = 0usize;
        for (t, f) in frames.iter().enumerate() {
            let mask = model.classify_and_update(f, &params).map_err(|e| e.to_string())?;
            if t >= 150 {
                late += mask.count_ones();
            }
            for px in model.pixels() {
                let total: f64 = px.components().iter().map(|c| c.weight).sum();
                let ok = (total - 1.0).abs() <= 1e-9
                    && px.components().iter().all(|c| (0.0..=1.0).contains(&c.weight));
                check(ok, format!("seed {seed} frame {t}: weights off the simplex"))?;
            }
        }
        let rate = late as f64 / (150.0 * 64.0 * 64.0);
        check(rate < 0.01, format!("seed {seed}: late foreground rate {:.4}", rate))?;
        rates.push(rate);
    }
    within(start.elapsed(), 30.0)?;
    let worst = rates.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "worst late foreground rate {:.5}, simplex held, {:.2}s",
        worst,
        start.elapsed().as_secs_f64()
    ))
}

const VELOCITY: (f64, f64) = (0.5, 0.25);

fn single_object_script() -> SceneScript {
    SceneScript {
        width: 64,
        height: 64,
        frame_count: 100,
        background: Background::Color([40, 40, 40]),
        noise_sigma: 0.0,
        seed: 6,
        objects: vec![ObjectSpec {
            id: 1,
            shape: Shape::Rectangle,
            size: (10.0, 10.0),
            color: [210, 180, 30],
            path: vec![
                Keyframe {
                    frame: 0,
                    center: Point::new(-2.0, 12.0),
                },
                Keyframe {
                    frame: 99,
                    center: Point::new(-2.0 + 99.0 * VELOCITY.0, 12.0 + 99.0 * VELOCITY.1),
                },
            ],
            visible: Some((30, 99)),
        }],
    }
}

// 6. single object accuracy
fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (frames, truth) = render(&single_object_script()).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let results = run_frames(&cfg, &frames).map_err(|e| e.to_string())?;
    let post: Vec<&FrameResult> = results.iter().filter(|r| !r.warmup).collect();
    let ids: BTreeSet<u64> = post.iter().flat_map(|r| r.tracks.iter().map(|t| t.id)).collect();
    check(ids.len() == 1, format!("track ids after warm-up: {ids:?}"))?;
    check(
        post.iter().all(|r| r.tracks.len() == 1 && r.tracks[0].observed),
        "some frame lacks exactly one observed track",
    )?;
    let mut sq = 0.0;
    let mut trajectory = Vec::new();
    for r in &post {
        let t = &r.tracks[0];
        let g = truth.get(r.frame, 1).ok_or("missing truth")?;
        sq += (t.centroid.x - g.centroid.x).powi(2) + (t.centroid.y - g.centroid.y).powi(2);
        trajectory.push(TrajectoryPoint {
            frame: r.frame,
            position: t.centroid,
        });
    }
    let rms = (sq / post.len() as f64).sqrt();
    check(rms < 1.0, format!("trajectory rms {rms:.3} px"))?;

    let last = post.last().ok_or("no frames")?.tracks[0].clone();
    let track_view = Track {
        id: last.id,
        state: TrackState::Active,
        features: features(ColorHistogram::zeros(1), ColorHistogram::zeros(1)),
        ref_hist_upper: ColorHistogram::zeros(1),
        ref_hist_lower: ColorHistogram::zeros(1),
        trajectory,
        missed_frames: 0,
        group: None,
    };
    let m = speed_and_direction(&track_view, cfg.speed_window).map_err(|e| e.to_string())?;
    let speed = VELOCITY.0.hypot(VELOCITY.1);
    let direction = (-VELOCITY.1).atan2(VELOCITY.0).to_degrees().rem_euclid(360.0);
    check((m.speed - speed).abs() <= 1e-6, format!("speed {} vs {speed}", m.speed))?;
    check((m.direction - direction).abs() <= 0.5, format!("direction {} vs {direction}", m.direction))?;
    check(
        last.speed == Some(m.speed) && last.direction == Some(m.direction),
        "reported motion disagrees with the trajectory",
    )?;
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "1 track, rms {rms:.3} px, speed err {:.1e}, direction err {:.1e} deg, {:.2}s",
        (m.speed - speed).abs(),
        (m.direction - direction).abs(),
        start.elapsed().as_secs_f64()
    ))
}

fn crossing_case(seed: u64) -> Result<SceneScript, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut color = |avoid: Option<[u8; 3]>| loop {
        let c = [rng.random_range(60..=200u8), rng.random_range(60..=200u8), rng.random_range(60..=200u8)];
        let far = |o: [u8; 3]| c.iter().zip(o).any(|(a, b)| (*a as i32 - b as i32).abs() >= 64);
        if far([40, 40, 40]) && avoid.is_none_or(far) {
            return c;
        }
    };
    let a = color(None);
    let b = color(Some(a));
    let params = CrossingParams {
        speed: 0.5 + 0.06 * seed as f64,
        noise_sigma: 2.0,
        seed,
        enter_frame: 30,
        ..CrossingParams::default()
    };
    crossing_script(a, b, &params).map_err(|e| e.to_string())
}

/// Track id nearest each truth object at `frame`.
fn ids_by_object(result: &FrameResult, truth: &GroundTruth) -> Option<(u64, u64)> {
    let near = |obj: u64| {
        let g = truth.get(result.frame, obj)?.centroid;
        result
            .tracks
            .iter()
            .filter(|t| t.observed)
            .min_by(|a, b| {
                let da = (a.centroid.x - g.x).hypot(a.centroid.y - g.y);
                let db = (b.centroid.x - g.x).hypot(b.centroid.y - g.y);
                da.total_cmp(&db)
            })
            .filter(|t| (t.centroid.x - g.x).hypot(t.centroid.y - g.y) < 3.0)
            .map(|t| t.id)
    };
    Some((near(1)?, near(2)?))
}

/// Yellow pixels form exactly one rectangle outline; no green or red.
fn one_yellow_box(frame: &Frame) -> bool {
    let mut yellow = Vec::new();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let p = frame.pixel(x, y);
            if p == PALETTE[0] || p == PALETTE[1] {
                return false;
            }
            if p == YELLOW {
                yellow.push((x, y));
            }
        }
    }
    if yellow.is_empty() {
        return false;
    }
    let x0 = yellow.iter().map(|p| p.0).min().unwrap_or(0);
    let x1 = yellow.iter().map(|p| p.0).max().unwrap_or(0);
    let y0 = yellow.iter().map(|p| p.1).min().unwrap_or(0);
    let y1 = yellow.iter().map(|p| p.1).max().unwrap_or(0);
    let mut outline = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if x == x0 || x == x1 || y == y0 || y == y1 {
                outline.push((x, y));
            }
        }
    }
    outline == yellow
}

// 7. identities survive the crossing
fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let mut recovered = 0;
    let mut merge_frames = 0;
    for seed in 0..10u64 {
        let script = crossing_case(seed)?;
        let (frames, truth) = render(&script).map_err(|e| e.to_string())?;
        let results = run_frames(&cfg, &frames).map_err(|e| e.to_string())?;
        let first_merge = results
            .iter()
            .find(|r| !r.events.merges.is_empty())
            .ok_or(format!("seed {seed}: no merge"))?
            .frame;
        let first_split = results
            .iter()
            .find(|r| r.frame > first_merge && !r.events.splits.is_empty())
            .ok_or(format!("seed {seed}: no split after merge at {first_merge}"))?
            .frame;
        let before = ids_by_object(&results[first_merge as usize - 1], &truth)
            .ok_or(format!("seed {seed}: objects untracked before merge"))?;
        let end = results.last().ok_or("empty run")?;
        let after = ids_by_object(end, &truth).ok_or(format!("seed {seed}: objects untracked at end"))?;
        check(before.0 != before.1, format!("seed {seed}: shared id before merge"))?;
        check(
            after == before,
            format!("seed {seed}: ids {before:?} before merge, {after:?} after split at {first_split}"),
        )?;
        recovered += 1;
        for (r, f) in results.iter().zip(&frames) {
            let grouped = r.tracks.iter().any(|t| t.state == TrackState::Occluded);
            let solo = r.tracks.iter().filter(|t| t.observed).count();
            if grouped && solo == 0 {
                merge_frames += 1;
                check(
                    one_yellow_box(&annotate_frame(f, r)),
                    format!("seed {seed} frame {}: merge annotation is not one yellow box", r.frame),
                )?;
            }
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{recovered}/10 identities recovered, {merge_frames} merge frames with one yellow box, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn bhattacharyya(frame: &Frame, model: &TargetModel, c: Point) -> f64 {
    match candidate_histogram(frame, model, c) {
        Ok(p) => p.bins.iter().zip(&model.q.bins).map(|(a, b)| (a * b).sqrt()).sum(),
        Err(_) => 0.0,
    }
}

fn blob_scene(c: Point, a: f64, b: f64, colors: &[[u8; 3]; 3], seed: u64) -> Result<Frame, String> {
    let ellipse = |id, center: Point, w: f64, h: f64, color| ObjectSpec {
        id,
        shape: Shape::Ellipse,
        size: (w, h),
        color,
        path: vec![Keyframe { frame: 0, center }],
        visible: None,
    };
    let script = SceneScript {
        width: 64,
        height: 64,
        frame_count: 1,
        background: Background::Color(colors[0]),
        noise_sigma: 4.0,
        seed,
        objects: vec![
            ellipse(1, c, 2.0 * a, 2.0 * b, colors[1]),
            ellipse(2, Point::new(c.x + a / 3.0, c.y - b / 3.0), a, b, colors[2]),
        ],
    };
    let (mut frames, _) = render(&script).map_err(|e| e.to_string())?;
    frames.pop().ok_or_else(|| "no frame".into())
}

// 8. mean shift against a grid search of the Bhattacharyya coefficient
fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (mut converged, mut near) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + seed);
        let (a, b) = (rng.random_range(6.0..10.0), rng.random_range(6.0..10.0));
        let mut color = || [rng.random::<u8>(), rng.random::<u8>(), rng.random::<u8>()];
        let colors = [color(), color(), color()];
        let c0 = Point::new(32.0, 32.0);
        let reference = blob_scene(c0, a, b, &colors, 2 * seed)?;
        let model = build_target_model(&reference, c0, a, b, 8).map_err(|e| e.to_string())?;
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let frac: f64 = rng.random_range(0.0..1.0);
        let moved_center = Point::new(c0.x + frac * a / 2.0 * angle.cos(), c0.y + frac * b / 2.0 * angle.sin());
        let moved = blob_scene(moved_center, a, b, &colors, 2 * seed + 1)?;
        let out = track(&moved, &model, c0, 0.1, 20).map_err(|e| e.to_string())?;
        let mut best = (f64::NEG_INFINITY, c0);
        for dy in -8..=8 {
            for dx in -8..=8 {
                let p = Point::new(c0.x + dx as f64, c0.y + dy as f64);
                let r = bhattacharyya(&moved, &model, p);
                if r > best.0 {
                    best = (r, p);
                }
            }
        }
        converged += out.converged as usize;
        let d = (out.position.x - best.1.x).hypot(out.position.y - best.1.y);
        near += (d <= 1.0) as usize;
    }
    check(converged >= 95, format!("converged in {converged}/100"))?;
    check(near >= 95, format!("within 1 px of the grid argmax in {near}/100"))?;
    within(start.elapsed(), 20.0)?;
    Ok(format!(
        "converged {converged}/100, within 1 px {near}/100, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn rotate90(f: &Frame) -> Frame {
    let n = f.width();
    let mut out = f.clone();
    for y in 0..n {
        for x in 0..n {
            out.pixel_mut(x, y).copy_from_slice(f.pixel(n - 1 - y, x));
        }
    }
    out
}

// 9. geometry of a 2:1 ellipse and its rotation
fn criterion_9() -> Outcome {
    let script = SceneScript {
        width: 64,
        height: 64,
        frame_count: 1,
        background: Background::Color([30, 30, 30]),
        noise_sigma: 0.0,
        seed: 9,
        objects: vec![ObjectSpec {
            id: 1,
            shape: Shape::Ellipse,
            size: (24.0, 12.0),
            color: [230, 140, 20],
            path: vec![Keyframe {
                frame: 0,
                center: Point::new(32.0, 32.0),
            }],
            visible: None,
        }],
    };
    let (frames, _) = render(&script).map_err(|e| e.to_string())?;
    let c = Point::new(32.0, 32.0);
    let model = build_target_model(&frames[0], c, 15.0, 15.0, 8).map_err(|e| e.to_string())?;
    let g = estimate_geometry(&frames[0], &model, c).map_err(|e| e.to_string())?;
    let off_axis = g.orientation.min(180.0 - g.orientation);
    check(off_axis <= 5.0, format!("orientation {}", g.orientation))?;
    let ratio = g.width / g.height;
    check((1.6..=2.4).contains(&ratio), format!("axis ratio {ratio:.3}"))?;
    // (32, 32) lands on (32, 31) under the rotation
    let rotated = rotate90(&frames[0]);
    let r = estimate_geometry(&rotated, &model, Point::new(32.0, 31.0)).map_err(|e| e.to_string())?;
    let (sw, sh) = (r.width / g.height, r.height / g.width);
    check(
        (sw - 1.0).abs() <= 0.1 && (sh - 1.0).abs() <= 0.1,
        format!("rotated {r:?} vs {g:?}"),
    )?;
    Ok(format!(
        "orientation {:.2} deg, ratio {ratio:.3}, rotated width/height agree to {:.1}%/{:.1}%",
        g.orientation,
        100.0 * (sw - 1.0).abs(),
        100.0 * (sh - 1.0).abs()
    ))
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        out.push((name, fs::read(&path).map_err(|e| e.to_string())?));
    }
    out.sort();
    Ok(out)
}

// 10. byte-identical reruns through the binary
fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script_path = tmp.path().join("crossing.txt");
    fs::write(&script_path, script_to_text(&crossing_case(3)?).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let frames_dir = tmp.path().join("frames");
    let bin = env!("CARGO_BIN_EXE_tracklet");
    let status = Command::new(bin)
        .args(["synth", "--script"])
        .arg(&script_path)
        .arg("--out")
        .arg(&frames_dir)
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), format!("synth exited with {status}"))?;
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let status = Command::new(bin)
            .args(["run", "--annotate", "--input"])
            .arg(&frames_dir)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        check(status.success(), format!("run exited with {status}"))?;
        runs.push(dir_bytes(&out)?);
    }
    let names: Vec<&String> = runs[0].iter().map(|(n, _)| n).collect();
    check(names.contains(&&"tracks.jsonl".to_string()), "tracks.jsonl missing")?;
    check(names.contains(&&"trajectories.csv".to_string()), "trajectories.csv missing")?;
    let ann = names.iter().filter(|n| n.starts_with("ann_")).count();
    check(ann == 100, format!("{ann} annotated frames"))?;
    check(runs[0] == runs[1], "outputs differ between runs")?;
    Ok(format!("{} files identical across two runs", runs[0].len()))
}

// 11. throughput of the single-object run
fn criterion_11() -> Outcome {
    let (frames, _) = render(&single_object_script()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let results = run_frames(&PipelineConfig::default(), &frames).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(results.len() == 100, "wrong frame count")?;
    within(elapsed, 5.0)?;
    Ok(format!("100 frames in {:.3}s", elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("default constants", criterion_1),
        ("connected components", criterion_2),
        ("histogram metric", criterion_3),
        ("histogram downsampling", criterion_4),
        ("mixture convergence", criterion_5),
        ("single-object tracking", criterion_6),
        ("occlusion identity", criterion_7),
        ("mean-shift oracle", criterion_8),
        ("geometry estimate", criterion_9),
        ("determinism", criterion_10),
        ("throughput", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
