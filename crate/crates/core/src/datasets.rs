//! Deterministic synthetic dataset generators with ground-truth labels.
//!
//! Every generator is a pure function of its parameters (and seed, where
//! randomness is involved); regenerating produces identical clouds.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measure::WeightedCloud;

/// Cloud plus per-point ground-truth labels and generator provenance.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub cloud: WeightedCloud,
    pub labels: Vec<usize>,
    pub name: String,
    pub seed: Option<u64>,
    /// (parameter, value) pairs recorded for the metadata sidecar.
    pub params: Vec<(String, f64)>,
}

/// T-junction: a vertical line of 200 points from (0,1) to (0,200) and a
/// horizontal line of 201 points from (-100,0) to (100,0).
/// Labels the arms: 0 = vertical, 1 = horizontal x<0, 2 = horizontal x>=0
/// (the junction point (0,0) goes with the horizontal line).
pub fn gen_tjunction() -> LabeledCloud {
    let mut points = Vec::with_capacity(401);
    let mut labels = Vec::with_capacity(401);
    for i in 0..200 {
        points.push(vec![0.0, 1.0 + i as f64 * 199.0 / 199.0]);
        labels.push(0);
    }
    for i in 0..201 {
        let x = -100.0 + i as f64;
        points.push(vec![x, 0.0]);
        labels.push(if x < 0.0 { 1 } else { 2 });
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "tjunction".into(),
        seed: None,
        params: Vec::new(),
    }
}

/// Square-lattice points inside a disk of radius 1 centered at `center`,
/// trimmed deterministically (outermost first, ties by angle) to exactly
/// `count` points. The pitch is found by bisection.
fn disk_grid(center: (f64, f64), count: usize) -> Vec<Vec<f64>> {
    let points_at = |pitch: f64| -> Vec<(f64, f64)> {
        let k = (1.0 / pitch).ceil() as i64;
        let mut pts = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                let (x, y) = (i as f64 * pitch, j as f64 * pitch);
                if x * x + y * y <= 1.0 {
                    pts.push((x, y));
                }
            }
        }
        pts
    };
    let (mut lo, mut hi) = (0.01f64, 2.0f64); // lo -> many points, hi -> few
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if points_at(mid).len() >= count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut pts = points_at(lo);
    assert!(pts.len() >= count);
    // Trim from the rim inward, deterministic order.
    pts.sort_by(|a, b| {
        let ra = a.0 * a.0 + a.1 * a.1;
        let rb = b.0 * b.0 + b.1 * b.1;
        ra.partial_cmp(&rb)
            .unwrap()
            .then(a.1.atan2(a.0).partial_cmp(&b.1.atan2(b.0)).unwrap())
    });
    pts.truncate(count);
    pts.into_iter()
        .map(|(x, y)| vec![x + center.0, y + center.1])
        .collect()
}

/// Two unit-disk blobs (300 lattice points each) joined by a length-2
/// chain of 200 points, then stretched by diag(a1, a2). Labels: 0 and 1
/// for the blobs, 2 for the chain.
pub fn gen_dumbbell(a1: f64, a2: f64) -> LabeledCloud {
    assert!(a1 > 0.0 && a2 > 0.0);
    let mut points = Vec::with_capacity(800);
    let mut labels = Vec::with_capacity(800);
    for p in disk_grid((-2.0, 0.0), 300) {
        points.push(p);
        labels.push(0);
    }
    for p in disk_grid((2.0, 0.0), 300) {
        points.push(p);
        labels.push(1);
    }
    for i in 0..200 {
        let x = -1.0 + 2.0 * i as f64 / 199.0;
        points.push(vec![x, 0.0]);
        labels.push(2);
    }
    for p in points.iter_mut() {
        p[0] *= a1;
        p[1] *= a2;
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "dumbbell".into(),
        seed: None,
        params: vec![("a1".into(), a1), ("a2".into(), a2)],
    }
}

/// Radius of the spiral's disk envelope (fits inside [-30,30]^2).
const SPIRAL_R_MAX: f64 = 27.0;
/// Radial gap between successive spiral arms, chosen between one and two
/// denoising bandwidths so a bandwidth-4 ball reaches the nearest arm from
/// anywhere in the gap without always straddling two arms.
const SPIRAL_ARM_GAP: f64 = 6.5;

fn spiral_point(i: usize) -> Vec<f64> {
    let theta_max = 2.0 * PI * SPIRAL_R_MAX / SPIRAL_ARM_GAP;
    let theta = theta_max * i as f64 / 599.0;
    let r = SPIRAL_ARM_GAP / (2.0 * PI) * theta;
    vec![r * theta.cos(), r * theta.sin()]
}

/// Archimedean spiral (600 points, arm gap 6.5, radius up to 27) plus 150
/// outliers sampled uniformly over the spiral's disk envelope by rejection.
/// Labels: 0 = spiral, 1 = outlier.
pub fn gen_spiral(seed: u64) -> LabeledCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(750);
    let mut labels = Vec::with_capacity(750);
    for i in 0..600 {
        points.push(spiral_point(i));
        labels.push(0);
    }
    let r_max = SPIRAL_R_MAX;
    while labels.len() < 750 {
        let x = rng.gen_range(-r_max..r_max);
        let y = rng.gen_range(-r_max..r_max);
        if x * x + y * y <= r_max * r_max {
            points.push(vec![x, y]);
            labels.push(1);
        }
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "spiral".into(),
        seed: Some(seed),
        params: Vec::new(),
    }
}

/// Clean spiral polyline (no outliers), for residual measurements.
pub fn spiral_polyline() -> Vec<Vec<f64>> {
    (0..600).map(spiral_point).collect()
}

/// Two concentric circles of radii 1 and 2 (250 points each) with
/// Gaussian coordinate jitter sigma = 0.05. Labels: 0 = inner, 1 = outer.
pub fn gen_concentric(seed: u64) -> LabeledCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(500);
    let mut labels = Vec::with_capacity(500);
    let mut gauss = || {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    for (label, radius) in [(0usize, 1.0f64), (1, 2.0)] {
        for i in 0..250 {
            let t = 2.0 * PI * i as f64 / 250.0;
            points.push(vec![
                radius * t.cos() + 0.05 * gauss(),
                radius * t.sin() + 0.05 * gauss(),
            ]);
            labels.push(label);
        }
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "concentric".into(),
        seed: Some(seed),
        params: vec![("sigma".into(), 0.05)],
    }
}

/// Unit circle (200 uniformly spaced points) plus 500 uniform noise points
/// in [-1,1]^2. Labels: 0 = circle, 1 = noise.
pub fn gen_noisy_circle(seed: u64) -> LabeledCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(700);
    let mut labels = Vec::with_capacity(700);
    for i in 0..200 {
        let t = 2.0 * PI * i as f64 / 200.0;
        points.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for _ in 0..500 {
        points.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        labels.push(1);
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "noisy_circle".into(),
        seed: Some(seed),
        params: Vec::new(),
    }
}

/// 100x100 grid on [0,1]^2 plus 1001 points on the segment from (0.5,0)
/// to (0.5,1). Labels: 0 = grid, 1 = line.
pub fn gen_grid_line() -> LabeledCloud {
    let mut points = Vec::with_capacity(11001);
    let mut labels = Vec::with_capacity(11001);
    for i in 0..100 {
        for j in 0..100 {
            points.push(vec![i as f64 / 99.0, j as f64 / 99.0]);
            labels.push(0);
        }
    }
    for k in 0..1001 {
        points.push(vec![0.5, k as f64 / 1000.0]);
        labels.push(1);
    }
    LabeledCloud {
        cloud: WeightedCloud::uniform(points).unwrap(),
        labels,
        name: "grid_line".into(),
        seed: None,
        params: Vec::new(),
    }
}

impl LabeledCloud {
    /// JSON metadata sidecar content (name, seed, parameters, counts).
    pub fn metadata_json(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("\"{k}\": {v}"))
            .collect();
        format!(
            "{{\"name\": \"{}\", \"seed\": {}, \"n\": {}, \"dim\": {}, \"params\": {{{}}}}}",
            self.name,
            self.seed.map_or("null".to_string(), |s| s.to_string()),
            self.cloud.len(),
            self.cloud.dim(),
            params.join(", ")
        )
    }

    /// Writes the cloud CSV (with labels as an extra metadata CSV) and the
    /// JSON sidecar next to `path` (which names the cloud CSV).
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        crate::measure::write_cloud_csv(path, &self.cloud, true)?;
        let labels_path = path.with_extension("labels.csv");
        let mut s = String::from("label\n");
        for l in &self.labels {
            s.push_str(&format!("{l}\n"));
        }
        std::fs::write(labels_path, s)?;
        std::fs::write(path.with_extension("json"), self.metadata_json())?;
        Ok(())
    }
}
