use std::io::{Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AgentState, FlightError, FlightParams};
use crate::geometry::{closest_point, corrective_curvature, Curve, CurvatureVector};
use crate::volume::{crop_aligned, GroundTruth, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringCommand {
    pub k: CurvatureVector,
    /// Set when the predictor had too little signal to steer.
    pub low_confidence: bool,
}

impl SteeringCommand {
    pub fn new(k: CurvatureVector) -> Self {
        Self {
            k,
            low_confidence: false,
        }
    }

    pub fn uncertain() -> Self {
        Self {
            k: CurvatureVector::ZERO,
            low_confidence: true,
        }
    }
}

/// Curvature command for an agent. Implementations are shared across
/// concurrently flying agents.
pub trait Steering: Sync {
    fn steer(&self, state: &AgentState, volume: &Volume) -> Result<SteeringCommand, FlightError>;

    /// True when commands come from ground-truth centerlines.
    fn uses_ground_truth(&self) -> bool {
        false
    }
}

/// Curvature command from an aligned crop alone.
pub trait CropPredictor: Sync {
    fn predict(&self, crop: &Volume) -> Result<SteeringCommand, FlightError>;
}

/// Curves within this distance (µm) of the nearest count as tied.
const JUNCTION_TIE: f64 = 1.0;

fn search_samples(points: usize) -> usize {
    64 * points.max(4)
}

/// Corrective curvature toward the nearest ground-truth centerline, in the
/// agent's `(n1, n2)` basis, clamped to `curvature_bound`.
pub fn steer_oracle(
    state: &AgentState,
    truth: &GroundTruth,
    params: &FlightParams,
) -> Result<SteeringCommand, FlightError> {
    let x = state.position();
    let dists: Vec<(f64, &crate::volume::TruthCurve)> = truth
        .curves
        .iter()
        .map(|c| {
            let (_, d) = closest_point(&c.curve, &x, search_samples(c.curve.points().len()));
            (d, c)
        })
        .collect();
    let best = dists
        .iter()
        .map(|e| e.0)
        .min_by(f64::total_cmp)
        .ok_or(FlightError::EmptyTruth)?;
    if best > params.p {
        return Err(FlightError::TooFar(best));
    }
    // Curves meeting at a junction are equally near; follow the one best
    // aligned with the heading.
    let alignment = |c: &crate::volume::TruthCurve| {
        let (t, _) = closest_point(&c.curve, &x, search_samples(c.curve.points().len()));
        c.curve
            .tangent(t)
            .map_or(0.0, |tan| tan.dot(&state.frame.t).abs())
    };
    let nearest = dists
        .iter()
        .filter(|e| e.0 <= best + JUNCTION_TIE)
        .map(|e| (alignment(e.1), e.1))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.id.cmp(&a.1.id)))
        .expect("at least the nearest curve");
    let curve = &nearest.1.curve;
    let (k, _) = corrective_curvature(
        curve,
        &state.frame,
        params.lookahead(),
        search_samples(curve.points().len()),
    )?;
    Ok(SteeringCommand::new(k.clamped(params.curvature_bound)))
}

pub struct OracleSteering {
    pub truth: GroundTruth,
    pub params: FlightParams,
}

impl Steering for OracleSteering {
    fn steer(&self, state: &AgentState, _volume: &Volume) -> Result<SteeringCommand, FlightError> {
        steer_oracle(state, &self.truth, &self.params)
    }

    fn uses_ground_truth(&self) -> bool {
        true
    }
}

/// Intensity-weighted centroid of the forward slab `[p/4, p/2]` of an aligned
/// crop, converted to the curvature that reaches it: `k_i = 2·c_i/ŝ²` with
/// `ŝ` the mean slab depth.
pub fn centroid_command(crop: &Volume, params: &FlightParams) -> SteeringCommand {
    let [nx, ny, nz] = crop.dims();
    let pitch = crop.pitch();
    let ci = (nx as f64 - 1.0) / 2.0;
    let cj = (ny as f64 - 1.0) / 2.0;
    let ck = (nz as f64 - 1.0) / 2.0;
    let (near, far) = (params.p / 4.0, params.p / 2.0);
    let thr = params.bg_threshold;

    let mut depth_sum = 0.0;
    let mut planes = 0usize;
    let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..nz {
        let depth = (k as f64 - ck) * pitch;
        if depth < near || depth > far {
            continue;
        }
        depth_sum += depth;
        planes += 1;
        for j in 0..ny {
            for i in 0..nx {
                let w = crop.get(i, j, k) as f64;
                if w >= thr {
                    mass += w;
                    m1 += w * (i as f64 - ci) * pitch;
                    m2 += w * (j as f64 - cj) * pitch;
                }
            }
        }
    }
    let slab_voxels = (planes * nx * ny) as f64;
    if planes == 0 || mass <= 0.0 || mass < 0.01 * slab_voxels * thr {
        return SteeringCommand::uncertain();
    }
    let s_hat = depth_sum / planes as f64;
    let scale = 2.0 / (s_hat * s_hat * mass);
    SteeringCommand::new(CurvatureVector::new(m1 * scale, m2 * scale).clamped(params.curvature_bound))
}

/// Crops around the agent and applies [`centroid_command`].
pub fn steer_centroid(state: &AgentState, volume: &Volume, params: &FlightParams) -> SteeringCommand {
    match crop_aligned(volume, &state.frame, params.crop_size, params.crop_pitch) {
        Ok(crop) => centroid_command(&crop, params),
        Err(_) => SteeringCommand::uncertain(),
    }
}

pub struct CentroidPredictor {
    pub params: FlightParams,
}

impl CropPredictor for CentroidPredictor {
    fn predict(&self, crop: &Volume) -> Result<SteeringCommand, FlightError> {
        Ok(centroid_command(crop, &self.params))
    }
}

/// Adapts a [`CropPredictor`] to [`Steering`] by cropping around the agent.
pub struct CropSteering<P> {
    pub predictor: P,
    pub params: FlightParams,
}

impl<P: CropPredictor> Steering for CropSteering<P> {
    fn steer(&self, state: &AgentState, volume: &Volume) -> Result<SteeringCommand, FlightError> {
        let crop = crop_aligned(volume, &state.frame, self.params.crop_size, self.params.crop_pitch)?;
        self.predictor.predict(&crop)
    }
}

pub type CentroidSteering = CropSteering<CentroidPredictor>;

impl CentroidSteering {
    pub fn centroid(params: FlightParams) -> Self {
        CropSteering {
            predictor: CentroidPredictor { params },
            params,
        }
    }
}

/// Long-running predictor process. Per request it reads the crop as
/// little-endian `f32` voxels (x fastest) on stdin and answers `k1 k2` as two
/// little-endian `f32` on stdout.
pub struct ExternalPredictor {
    io: Mutex<(ChildStdin, ChildStdout)>,
    child: Mutex<Child>,
}

impl ExternalPredictor {
    pub fn spawn(command: &str, args: &[String]) -> Result<Self, FlightError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| FlightError::Predictor(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            io: Mutex::new((stdin, stdout)),
            child: Mutex::new(child),
        })
    }
}

impl CropPredictor for ExternalPredictor {
    fn predict(&self, crop: &Volume) -> Result<SteeringCommand, FlightError> {
        let err = |e: std::io::Error| FlightError::Predictor(e.to_string());
        let mut bytes = Vec::with_capacity(4 * crop.len());
        for v in crop.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut io = self.io.lock().unwrap_or_else(|p| p.into_inner());
        io.0.write_all(&bytes).map_err(err)?;
        io.0.flush().map_err(err)?;
        let mut reply = [0u8; 8];
        io.1.read_exact(&mut reply).map_err(err)?;
        let k1 = f32::from_le_bytes(reply[..4].try_into().unwrap()) as f64;
        let k2 = f32::from_le_bytes(reply[4..].try_into().unwrap()) as f64;
        if !k1.is_finite() || !k2.is_finite() {
            return Err(FlightError::Predictor("non-finite curvature".into()));
        }
        Ok(SteeringCommand::new(CurvatureVector::new(k1, k2)))
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(mut c) = self.child.lock() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::{init_from_points, step};
    use crate::geometry::{fit_bspline, Frame};
    use crate::volume::{generate_phantom, min_max_normalize, PhantomSpec, TruthCurve, VolumeKind};
    use crate::Vec3;
    use std::collections::BTreeSet;

    fn truth(points: Vec<Vec3>) -> GroundTruth {
        GroundTruth {
            curves: vec![TruthCurve {
                id: 0,
                curve: fit_bspline(&points).unwrap(),
            }],
        }
    }

    fn at(frame: Frame) -> AgentState {
        AgentState {
            frame,
            arc_traveled: 0.0,
            steps: 0,
            trajectory: vec![frame.position],
            source: None,
            excluded: BTreeSet::new(),
        }
    }

    fn x_line() -> GroundTruth {
        truth((0..8).map(|i| Vec3::new(10.0 * i as f64, 0.0, 0.0)).collect())
    }

    #[test]
    fn oracle_on_straight_centerline_is_zero() {
        let p = FlightParams::default();
        let s = at(Frame::new(Vec3::new(30.0, 0.0, 0.0), Vec3::x(), Vec3::y()).unwrap());
        let c = steer_oracle(&s, &x_line(), &p).unwrap();
        assert!(c.k.magnitude() < 1e-9, "{:?}", c.k);
    }

    #[test]
    fn oracle_lateral_offset() {
        let p = FlightParams::default();
        // n1 = +y; the agent sits 1 µm along n1 from the line.
        let s = at(Frame::new(Vec3::new(30.0, 1.0, 0.0), Vec3::x(), Vec3::y()).unwrap());
        let c = steer_oracle(&s, &x_line(), &p).unwrap();
        assert!((c.k.k1 + 1.0 / 32.0).abs() < 1e-9, "{:?}", c.k);
        assert!(c.k.k2.abs() < 1e-9);
    }

    #[test]
    fn oracle_on_circle_returns_its_curvature() {
        let r = 10.0;
        let pts: Vec<Vec3> = (0..=72)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 72.0 * 0.75;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        let gt = truth(pts);
        let p = FlightParams::default();
        let a: f64 = 1.0;
        let pos = Vec3::new(r * a.cos(), r * a.sin(), 0.0);
        let tangent = Vec3::new(-a.sin(), a.cos(), 0.0);
        // n1 in the plane of the circle.
        let s = at(Frame::new(pos, tangent, -pos).unwrap());
        let c = steer_oracle(&s, &gt, &p).unwrap();
        assert!((c.k.k1.abs() - 0.1).abs() < 1e-4, "{:?}", c.k);
        assert!(c.k.k2.abs() < 1e-4);
    }

    #[test]
    fn oracle_refuses_distant_agents() {
        let p = FlightParams::default();
        let s = at(Frame::new(Vec3::new(30.0, 20.0, 0.0), Vec3::x(), Vec3::y()).unwrap());
        assert!(matches!(steer_oracle(&s, &x_line(), &p), Err(FlightError::TooFar(_))));
        assert!(matches!(
            steer_oracle(&s, &GroundTruth::default(), &p),
            Err(FlightError::EmptyTruth)
        ));
    }

    fn tube_volume() -> Volume {
        let spec = PhantomSpec {
            dims: [80, 40, 40],
            origin: [0; 3],
            pitch: 1.0,
            curves: vec![(0..6).map(|i| [5.0 + 14.0 * i as f64, 20.0, 20.0]).collect()],
            tube_radius: 2.0,
            peak_intensity: 1000.0,
            background: 100.0,
            noise_sd: 0.0,
            gaps: vec![],
            seed: 0,
        };
        min_max_normalize(&generate_phantom(&spec).unwrap().0)
    }

    #[test]
    fn centroid_in_centered_tube_is_small() {
        let v = tube_volume();
        let p = FlightParams::default();
        let s = at(Frame::new(Vec3::new(30.0, 20.0, 20.0), Vec3::x(), Vec3::y()).unwrap());
        let c = steer_centroid(&s, &v, &p);
        assert!(!c.low_confidence);
        assert!(c.k.magnitude() < 0.01, "{:?}", c.k);
    }

    #[test]
    fn centroid_steers_back_from_offset() {
        let v = tube_volume();
        let p = FlightParams::default();
        let s = at(Frame::new(Vec3::new(30.0, 22.0, 20.0), Vec3::x(), Vec3::y()).unwrap());
        let c = steer_centroid(&s, &v, &p);
        let expected = 2.0 * 2.0 / 36.0;
        assert!(c.k.k1 < 0.0);
        assert!((c.k.k1.abs() - expected).abs() <= 0.3 * expected, "{:?}", c.k);
        assert!(c.k.k2.abs() < 0.01);
    }

    #[test]
    fn empty_crop_is_low_confidence() {
        let v = Volume::filled([40, 40, 40], [0; 3], 1.0, VolumeKind::NormalizedFloat, 0.0).unwrap();
        let s = at(Frame::identity(Vec3::new(20.0, 20.0, 20.0)));
        let c = steer_centroid(&s, &v, &FlightParams::default());
        assert!(c.low_confidence);
        assert_eq!(c.k, CurvatureVector::ZERO);
    }

    #[test]
    fn oracle_flight_recovers_from_offset() {
        // Frames stay orthonormal while the oracle pulls the agent back.
        let p = FlightParams::default();
        let gt = x_line();
        let mut s = init_from_points(&[Vec3::new(0.0, 1.5, 0.0), Vec3::new(2.0, 1.5, 0.0)], &p).unwrap();
        for _ in 0..25 {
            let c = steer_oracle(&s, &gt, &p).unwrap();
            s = step(&s, c.k, crate::flight::adaptive_step(c.k.magnitude(), &p)).unwrap();
            assert!(s.frame.orthonormality_error() < 1e-9);
        }
        let y = s.position().y;
        assert!(y.abs() < 0.3, "{y}");
    }

    #[cfg(unix)]
    #[test]
    fn external_predictor_round_trip() {
        // Answers every 32³ request with (0.25, -0.5).
        let script = "while head -c 131072 > /dev/null; do printf '\\000\\000\\200\\076\\000\\000\\000\\277'; done";
        let pred = ExternalPredictor::spawn("sh", &["-c".into(), script.into()]).unwrap();
        let crop = Volume::filled([32, 32, 32], [0; 3], 1.0, VolumeKind::NormalizedFloat, 0.5).unwrap();
        for _ in 0..2 {
            let c = pred.predict(&crop).unwrap();
            assert_eq!(c.k, CurvatureVector::new(0.25, -0.5));
        }
    }
}
