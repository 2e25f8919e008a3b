//! Synthetic subjects built from tube-shaped bundles with known geometry.
//!
//! Each bundle is a Catmull-Rom curve through control points, swept with a fixed
//! radius and flat end caps. Voxels owned by a tube carry the unit tangent of the
//! nearest centerline point as their first peak; all other voxels carry three
//! randomly oriented noise vectors of length `noise_sigma`.

use ndarray::{Array3, Array4, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::morphology::dilate_cube;
use crate::prep::SubjectRecord;
use crate::tractometry::Streamline;
use crate::volume::check_unique;
use crate::{BundleMaskSet, Error, PeakVolume, Result, ScalarVolume, VoxelGrid};

/// Chebyshev radius, in voxels, of the brain mask around the bundle union.
pub const BRAIN_DILATION: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeBundle {
    pub name: String,
    /// Control points in millimeters.
    pub control_points: Vec<[f64; 3]>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: VoxelGrid,
    pub bundles: Vec<TubeBundle>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bundles.is_empty() {
            return Err(Error::Invalid("phantom needs at least one bundle".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise sigma {} must be ≥ 0",
                self.noise_sigma
            )));
        }
        let names: Vec<String> = self.bundles.iter().map(|b| b.name.clone()).collect();
        check_unique(&names)?;
        let vs = self.grid.voxel_size();
        let max_vs = vs.iter().copied().fold(0.0, f64::max);
        let lo: [f64; 3] = std::array::from_fn(|a| self.grid.origin()[a] - 0.5 * vs[a]);
        let hi: [f64; 3] = std::array::from_fn(|a| lo[a] + self.grid.extent()[a]);
        for b in &self.bundles {
            if !(b.radius >= max_vs) {
                return Err(Error::Invalid(format!(
                    "bundle {}: radius {} is below one voxel ({max_vs} mm)",
                    b.name, b.radius
                )));
            }
            if b.control_points.len() < 2 {
                return Err(Error::Invalid(format!(
                    "bundle {}: needs at least 2 control points",
                    b.name
                )));
            }
            for p in &b.control_points {
                if (0..3).any(|a| !(p[a] >= lo[a] && p[a] <= hi[a])) {
                    return Err(Error::Invalid(format!(
                        "bundle {}: control point {p:?} outside grid",
                        b.name
                    )));
                }
            }
            if b.control_points.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invalid(format!(
                    "bundle {}: repeated control point",
                    b.name
                )));
            }
        }
        Ok(())
    }

    pub fn bundle_names(&self) -> Vec<String> {
        self.bundles.iter().map(|b| b.name.clone()).collect()
    }

    pub fn bundle_index(&self, name: &str) -> Option<usize> {
        self.bundles.iter().position(|b| b.name == name)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Target spacing between centerline samples, in millimeters.
const SAMPLE_SPACING: f64 = 0.5;

/// Uniform Catmull-Rom curve through `control`, with reflected phantom end points,
/// sampled at roughly `SAMPLE_SPACING` intervals. Consecutive samples are distinct
/// as long as consecutive control points are.
pub fn catmull_rom_polyline(control: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = control.len();
    let at = |i: isize| -> [f64; 3] {
        if i < 0 {
            let (a, b) = (control[0], control[1]);
            std::array::from_fn(|k| 2.0 * a[k] - b[k])
        } else if i as usize >= n {
            let (a, b) = (control[n - 1], control[n - 2]);
            std::array::from_fn(|k| 2.0 * a[k] - b[k])
        } else {
            control[i as usize]
        }
    };
    let mut out = vec![control[0]];
    for seg in 0..n - 1 {
        let s = seg as isize;
        let (p0, p1, p2, p3) = (at(s - 1), at(s), at(s + 1), at(s + 2));
        let steps = ((norm(sub(p2, p1)) / SAMPLE_SPACING).ceil() as usize).max(2);
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let w = crate::resample::catmull_rom_weights(t);
            // Offsets from p1 keep coordinates shared by all control points exact.
            let p = std::array::from_fn(|a| {
                p1[a] + w[0] * (p0[a] - p1[a]) + w[2] * (p2[a] - p1[a]) + w[3] * (p3[a] - p1[a])
            });
            if p != *out.last().unwrap() {
                out.push(p);
            }
        }
    }
    out
}

/// Per-voxel squared distance to a tube centerline and the local tangent.
struct TubeField {
    dist2: Array3<f64>,
    tangent: Array4<f32>,
}

fn tube_field(grid: &VoxelGrid, curve: &[[f64; 3]], radius: f64) -> TubeField {
    let [nx, ny, nz] = grid.shape();
    let mut dist2 = Array3::from_elem((nx, ny, nz), f64::INFINITY);
    let mut tangent = Array4::<f32>::zeros((nx, ny, nz, 3));
    let vs = grid.voxel_size();
    let org = grid.origin();
    let (start, end) = (curve[0], curve[curve.len() - 1]);
    let start_dir = sub(curve[1], start);
    let end_dir = sub(end, curve[curve.len() - 2]);
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = sub(b, a);
        let len2 = dot(d, d);
        let len = len2.sqrt();
        let tan = [
            (d[0] / len) as f32,
            (d[1] / len) as f32,
            (d[2] / len) as f32,
        ];
        let range = |ax: usize| {
            let lo = (a[ax].min(b[ax]) - radius - org[ax]) / vs[ax];
            let hi = (a[ax].max(b[ax]) + radius - org[ax]) / vs[ax];
            let n = [nx, ny, nz][ax] as f64;
            (
                lo.floor().max(0.0) as usize,
                (hi.ceil().min(n - 1.0)).max(-1.0) as isize,
            )
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        for i in rx.0 as isize..=rx.1 {
            for j in ry.0 as isize..=ry.1 {
                for k in rz.0 as isize..=rz.1 {
                    let idx = [i as usize, j as usize, k as usize];
                    let p = grid.world(idx);
                    // Flat caps: nothing beyond the planes through the curve's ends.
                    if dot(sub(p, start), start_dir) < 0.0 || dot(sub(p, end), end_dir) > 0.0 {
                        continue;
                    }
                    let t = (dot(sub(p, a), d) / len2).clamp(0.0, 1.0);
                    let q: [f64; 3] = std::array::from_fn(|x| a[x] + t * d[x]);
                    let r2 = dot(sub(p, q), sub(p, q));
                    let cell = &mut dist2[(idx[0], idx[1], idx[2])];
                    if r2 < *cell {
                        *cell = r2;
                        for c in 0..3 {
                            tangent[(idx[0], idx[1], idx[2], c)] = tan[c];
                        }
                    }
                }
            }
        }
    }
    TubeField { dist2, tangent }
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = norm(v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Build masks, peaks and brain mask for one phantom subject.
///
/// Masks of different bundles may overlap; the peak of a shared voxel follows the
/// bundle whose centerline is nearest, first bundle on ties.
pub fn generate_subject(id: &str, spec: &PhantomSpec) -> Result<SubjectRecord> {
    spec.validate()?;
    let grid = spec.grid;
    let [nx, ny, nz] = grid.shape();
    let c = spec.bundles.len();
    let mut masks = Array4::<f32>::zeros((nx, ny, nz, c));
    let mut peaks = Array4::<f32>::zeros((nx, ny, nz, 9));
    let mut owner_d2 = Array3::from_elem((nx, ny, nz), f64::INFINITY);

    for (b, bundle) in spec.bundles.iter().enumerate() {
        let curve = catmull_rom_polyline(&bundle.control_points);
        let field = tube_field(&grid, &curve, bundle.radius);
        let r2 = bundle.radius * bundle.radius;
        for ((i, j, k), &d2) in field.dist2.indexed_iter() {
            if d2 > r2 {
                continue;
            }
            masks[(i, j, k, b)] = 1.0;
            if d2 < owner_d2[(i, j, k)] {
                owner_d2[(i, j, k)] = d2;
                for ch in 0..3 {
                    peaks[(i, j, k, ch)] = field.tangent[(i, j, k, ch)];
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if spec.noise_sigma > 0.0 {
        for ((i, j, k), d2) in owner_d2.indexed_iter() {
            if d2.is_finite() {
                continue;
            }
            for p in 0..3 {
                let v = random_direction(&mut rng);
                for a in 0..3 {
                    peaks[(i, j, k, 3 * p + a)] = (spec.noise_sigma * v[a]) as f32;
                }
            }
        }
    }

    let union = owner_d2.mapv(|d| d.is_finite());
    let brain = dilate_cube(&union, BRAIN_DILATION).mapv(|b| b as u8 as f32);

    let masks = BundleMaskSet::new(grid, spec.bundle_names(), masks, vec![true; c])?;
    SubjectRecord::new(
        id,
        PeakVolume::new(grid, peaks)?,
        masks,
        ScalarVolume::new(grid, brain)?,
    )
}

/// `n` streamlines following one bundle: the control points get independent
/// Gaussian jitter per streamline and are re-interpolated. Zero jitter reproduces
/// the centerline exactly.
pub fn generate_streamlines(
    spec: &PhantomSpec,
    bundle: usize,
    n: usize,
    jitter_sigma: f64,
) -> Result<Vec<Streamline>> {
    let b = spec
        .bundles
        .get(bundle)
        .ok_or_else(|| Error::Invalid(format!("bundle index {bundle} out of range")))?;
    if n == 0 {
        return Err(Error::Invalid("streamline count must be at least 1".into()));
    }
    if !(jitter_sigma >= 0.0 && jitter_sigma.is_finite()) {
        return Err(Error::Invalid(format!(
            "jitter sigma {jitter_sigma} must be ≥ 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(bundle as u64 + 1);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let ctrl: Vec<[f64; 3]> = b
            .control_points
            .iter()
            .map(|p| {
                std::array::from_fn(|a| {
                    let z: f64 = rng.sample(StandardNormal);
                    p[a] + jitter_sigma * z
                })
            })
            .collect();
        // Degenerate draws (coincident jittered points) are simply redrawn.
        if let Ok(s) = Streamline::new(catmull_rom_polyline(&ctrl)) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Fraction of a cohort in which one bundle is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRule {
    pub bundle: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub n_subjects: usize,
    pub seed: u64,
    /// Standard deviation of per-subject control point displacement, millimeters.
    pub control_jitter: f64,
    pub drops: Vec<DropRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub spec: PhantomSpec,
    pub record: SubjectRecord,
}

pub fn subject_id(index: usize) -> String {
    format!("sub-{:02}", index + 1)
}

/// A cohort of related subjects. Each subject perturbs the base control points;
/// each drop rule zeroes and invalidates its bundle in `round(fraction · n)`
/// subjects chosen by seeded shuffle.
pub fn generate_cohort(base: &PhantomSpec, opts: &CohortOptions) -> Result<Vec<CohortMember>> {
    if opts.n_subjects == 0 {
        return Err(Error::Invalid("cohort needs at least one subject".into()));
    }
    if !(opts.control_jitter >= 0.0 && opts.control_jitter.is_finite()) {
        return Err(Error::Invalid(format!(
            "control jitter {} must be ≥ 0",
            opts.control_jitter
        )));
    }
    base.validate()?;
    for d in &opts.drops {
        if !(0.0..=1.0).contains(&d.fraction) {
            return Err(Error::Invalid(format!(
                "drop fraction {} for {} outside [0, 1]",
                d.fraction, d.bundle
            )));
        }
        if base.bundle_index(&d.bundle).is_none() {
            return Err(Error::MissingChannel(format!(
                "drop rule bundle `{}`",
                d.bundle
            )));
        }
    }

    let vs = base.grid.voxel_size();
    let lo: [f64; 3] = std::array::from_fn(|a| base.grid.origin()[a] - 0.5 * vs[a]);
    let hi: [f64; 3] = std::array::from_fn(|a| lo[a] + base.grid.extent()[a]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut members = Vec::with_capacity(opts.n_subjects);
    for s in 0..opts.n_subjects {
        let mut spec = base.clone();
        for b in &mut spec.bundles {
            for p in &mut b.control_points {
                for a in 0..3 {
                    let z: f64 = rng.sample(StandardNormal);
                    p[a] = (p[a] + opts.control_jitter * z).clamp(lo[a], hi[a]);
                }
            }
        }
        spec.seed = rng.next_u64();
        let record = generate_subject(&subject_id(s), &spec)?;
        members.push(CohortMember { spec, record });
    }

    for d in &opts.drops {
        let c = base.bundle_index(&d.bundle).expect("checked above");
        let k = (d.fraction * opts.n_subjects as f64).round() as usize;
        let mut order: Vec<usize> = (0..opts.n_subjects).collect();
        order.shuffle(&mut rng);
        for &s in &order[..k] {
            let masks = &mut members[s].record.masks;
            masks.channel_mut(c).fill(0.0);
            masks.set_valid(c, false);
        }
    }
    Ok(members)
}

/// Three tubes with distinct orientations on a 64×64×40 grid at 1 mm: a
/// left-right arc, an anterior-posterior tube and a near-vertical tube.
pub fn default_spec(seed: u64) -> PhantomSpec {
    PhantomSpec {
        grid: VoxelGrid::isotropic([64, 64, 40], 1.0).expect("valid grid"),
        bundles: vec![
            TubeBundle {
                name: "CC_Body".into(),
                control_points: vec![[10.0, 30.0, 20.0], [32.0, 32.0, 27.0], [54.0, 30.0, 20.0]],
                radius: 4.0,
            },
            TubeBundle {
                name: "L_Cingulum".into(),
                control_points: vec![[20.0, 8.0, 13.0], [22.0, 32.0, 16.0], [20.0, 56.0, 13.0]],
                radius: 3.5,
            },
            TubeBundle {
                name: "Fornix".into(),
                control_points: vec![[42.0, 44.0, 5.0], [44.0, 42.0, 19.0], [42.0, 46.0, 34.0]],
                radius: 3.0,
            },
        ],
        noise_sigma: 0.1,
        seed,
    }
}

/// Sixteen tubes named after the expert bundle catalog, for 16- and 60-channel
/// runs. Tubes alternate between the three axis orientations.
pub fn expert_spec(names: &[String], seed: u64) -> Result<PhantomSpec> {
    if names.is_empty() {
        return Err(Error::Invalid("expert phantom needs bundle names".into()));
    }
    let grid = VoxelGrid::isotropic([64, 64, 40], 1.0)?;
    let bundles = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let slot = i / 3;
            let off = 8.0 + 9.0 * (slot % 6) as f64;
            let (a, b) = match i % 3 {
                0 => (
                    [6.0, off, 8.0 + 4.0 * slot as f64 % 28.0],
                    [58.0, off, 10.0 + 4.0 * slot as f64 % 28.0],
                ),
                1 => (
                    [off, 6.0, 30.0 - 4.0 * slot as f64 % 24.0],
                    [off + 2.0, 58.0, 30.0 - 4.0 * slot as f64 % 24.0],
                ),
                _ => ([off, 60.0 - off, 4.0], [off + 1.0, 58.0 - off, 36.0]),
            };
            let mid: [f64; 3] = std::array::from_fn(|k| 0.5 * (a[k] + b[k]));
            TubeBundle {
                name: name.clone(),
                control_points: vec![a, mid, b],
                radius: 2.0,
            }
        })
        .collect();
    let spec = PhantomSpec {
        grid,
        bundles,
        noise_sigma: 0.1,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// Voxel count of a mask channel, mostly for tests and manifests.
pub fn mask_voxels(masks: &BundleMaskSet, channel: usize) -> usize {
    let mut n = 0;
    Zip::from(&masks.channel(channel)).for_each(|&v| n += (v >= 0.5) as usize);
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::normalize_peaks;
    use crate::tractometry::{bundle_shape, streamline_curl};
    use std::f64::consts::PI;

    fn z_tube(radius: f64) -> PhantomSpec {
        PhantomSpec {
            grid: VoxelGrid::isotropic([32, 32, 40], 1.0).unwrap(),
            bundles: vec![TubeBundle {
                name: "Z".into(),
                control_points: vec![[16.0, 16.0, 5.0], [16.0, 16.0, 20.0], [16.0, 16.0, 35.0]],
                radius,
            }],
            noise_sigma: 0.1,
            seed: 3,
        }
    }

    #[test]
    fn straight_tube_volume_matches_cylinder() {
        let spec = z_tube(3.0);
        let rec = generate_subject("s", &spec).unwrap();
        let count = mask_voxels(&rec.masks, 0) as f64;
        let analytic = PI * 9.0 * 30.0;
        assert!(
            (count - analytic).abs() / analytic < 0.10,
            "{count} vs {analytic}"
        );
        // each slice is a discrete disk
        for z in 6..35 {
            let n = rec
                .masks
                .channel(0)
                .index_axis(ndarray::Axis(2), z)
                .iter()
                .filter(|&&v| v > 0.5)
                .count() as f64;
            assert!((n - PI * 9.0).abs() <= 2.0 * PI * 3.0);
        }
    }

    #[test]
    fn z_tube_peak_is_unit_z() {
        let rec = generate_subject("s", &z_tube(3.0)).unwrap();
        let p = rec.peaks.data();
        assert_eq!(
            [p[(16, 16, 20, 0)], p[(16, 16, 20, 1)], p[(16, 16, 20, 2)]],
            [0.0, 0.0, 1.0]
        );
        assert_eq!(p[(16, 16, 20, 3)], 0.0);
        let noise = (0..3)
            .map(|c| p[(0, 0, 0, c)] as f64)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!((noise - 0.1).abs() < 1e-6);
        assert_eq!(normalize_peaks(&rec.peaks), rec.peaks);
    }

    #[test]
    fn brain_mask_is_dilated_union() {
        let rec = generate_subject("s", &z_tube(3.0)).unwrap();
        let b = rec.brain_mask.data();
        assert_eq!(b[(16 + 3 + 4, 16, 20)], 1.0);
        assert_eq!(b[(16 + 3 + 5, 16, 20)], 0.0);
        assert_eq!(b[(16, 16, 0)], 0.0);
        assert_eq!(b[(16, 16, 1)], 1.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = default_spec(11);
        assert_eq!(
            generate_subject("a", &spec).unwrap(),
            generate_subject("a", &spec).unwrap()
        );
        let opts = CohortOptions {
            n_subjects: 3,
            seed: 5,
            control_jitter: 1.0,
            drops: vec![],
        };
        let a = generate_cohort(&spec, &opts).unwrap();
        let b = generate_cohort(&spec, &opts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].record.masks, a[1].record.masks);
        assert!(a.iter().all(|m| m.record.masks.valid().iter().all(|&v| v)));
    }

    #[test]
    fn drops_follow_fraction() {
        let spec = default_spec(1);
        let opts = CohortOptions {
            n_subjects: 10,
            seed: 2,
            control_jitter: 0.5,
            drops: vec![DropRule {
                bundle: "Fornix".into(),
                fraction: 0.4,
            }],
        };
        let cohort = generate_cohort(&spec, &opts).unwrap();
        let c = spec.bundle_index("Fornix").unwrap();
        let dropped: Vec<_> = cohort
            .iter()
            .filter(|m| !m.record.masks.is_valid(c))
            .collect();
        assert_eq!(dropped.len(), 4);
        assert!(dropped.iter().all(|m| mask_voxels(&m.record.masks, c) == 0));

        let all = CohortOptions {
            drops: vec![DropRule {
                bundle: "Fornix".into(),
                fraction: 1.0,
            }],
            n_subjects: 3,
            ..opts
        };
        assert!(generate_cohort(&spec, &all)
            .unwrap()
            .iter()
            .all(|m| !m.record.masks.is_valid(c)));
    }

    #[test]
    fn streamlines_follow_centerline() {
        let spec = z_tube(3.0);
        let s = generate_streamlines(&spec, 0, 4, 0.0).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|x| x == &s[0]));
        assert!(s.iter().all(|x| streamline_curl(x) == Some(1.0)));
        let big = generate_streamlines(&spec, 0, 2000, 0.5).unwrap();
        assert_eq!(big.len(), 2000);
        assert!(generate_streamlines(&spec, 1, 1, 0.0).is_err());
        assert!(generate_streamlines(&spec, 0, 0, 0.0).is_err());
    }

    #[test]
    fn jittered_streamlines_stay_near_tube() {
        let spec = z_tube(3.0);
        let sigma = 0.5;
        for s in generate_streamlines(&spec, 0, 50, sigma).unwrap() {
            let mean_dev = s
                .points()
                .iter()
                .map(|p| ((p[0] - 16.0).powi(2) + (p[1] - 16.0).powi(2)).sqrt())
                .sum::<f64>()
                / s.n_points() as f64;
            assert!(mean_dev < 3.0 * sigma);
        }
    }

    #[test]
    fn phantom_tube_shape() {
        let spec = z_tube(3.0);
        let rec = generate_subject("s", &spec).unwrap();
        let sl = generate_streamlines(&spec, 0, 10, 0.0).unwrap();
        let shape = bundle_shape(rec.masks.channel(0), &spec.grid, &sl).unwrap();
        assert!((shape.volume - PI * 9.0 * 30.0).abs() / (PI * 9.0 * 30.0) < 0.10);
        assert!((shape.mean_length - 30.0).abs() < 1e-9);
        assert_eq!(shape.curl, Some(1.0));
    }

    #[test]
    fn spec_validation() {
        let mut s = z_tube(0.5);
        assert!(generate_subject("s", &s).is_err());
        s = z_tube(3.0);
        s.bundles[0].control_points[0] = [100.0, 0.0, 0.0];
        assert!(s.validate().is_err());
        let names: Vec<String> = crate::bundles::BundleCatalog::builtin().expert_16;
        let e = expert_spec(&names, 0).unwrap();
        let rec = generate_subject("e", &e).unwrap();
        assert_eq!(rec.masks.n_channels(), 16);
        assert!((0..16).all(|c| mask_voxels(&rec.masks, c) > 100));
    }
}
