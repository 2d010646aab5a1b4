//! Scene description and its text dialect.
//!
//! Global `key = value` lines come first, followed by any number of
//! `[primitive]` blocks. Vectors are comma separated; the trajectory is a
//! `;`-separated list of `x,y` waypoints.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::config::strip_comment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimitiveKind {
    /// Yawed box.
    Box,
    /// Horizontal rectangle at `center.z`; `size.z` is ignored.
    Plane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveClass {
    Static = 0,
    Dynamic = 1,
    /// Still within a session, but not present in every session.
    Transient = 2,
}

impl PrimitiveClass {
    pub fn name(self) -> &'static str {
        match self {
            PrimitiveClass::Static => "static",
            PrimitiveClass::Dynamic => "dynamic",
            PrimitiveClass::Transient => "transient",
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(PrimitiveClass::Static),
            1 => Some(PrimitiveClass::Dynamic),
            2 => Some(PrimitiveClass::Transient),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Primitive {
    pub name: String,
    pub kind: PrimitiveKind,
    pub class: PrimitiveClass,
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
    /// Degrees.
    pub yaw: f64,
    /// 1-based sessions in which the primitive exists; empty means all.
    pub sessions: Vec<usize>,
    /// Meters per second, applied from the start of the active window.
    pub velocity: Vector3<f64>,
    /// Inclusive scan-index window within each session.
    pub active: Option<(usize, usize)>,
}

impl Primitive {
    pub fn new(name: &str, kind: PrimitiveKind, class: PrimitiveClass, center: [f64; 3], size: [f64; 3]) -> Self {
        Primitive {
            name: name.to_owned(),
            kind,
            class,
            center: Vector3::from(center),
            size: Vector3::from(size),
            yaw: 0.0,
            sessions: Vec::new(),
            velocity: Vector3::zeros(),
            active: None,
        }
    }

    pub fn in_sessions(mut self, sessions: &[usize]) -> Self {
        self.sessions = sessions.to_vec();
        self
    }

    pub fn moving(mut self, velocity: [f64; 3], active: (usize, usize)) -> Self {
        self.velocity = Vector3::from(velocity);
        self.active = Some(active);
        self
    }

    pub fn exists_in(&self, session: usize) -> bool {
        self.sessions.is_empty() || self.sessions.contains(&session)
    }

    pub fn active_at(&self, scan: usize) -> bool {
        self.active.is_none_or(|(a, b)| scan >= a && scan <= b)
    }

    /// Center at a scan, for a scene with the given scan interval.
    pub fn center_at(&self, scan: usize, scan_interval: f64) -> Vector3<f64> {
        let start = self.active.map_or(0, |(a, _)| a);
        let dt = scan.saturating_sub(start) as f64 * scan_interval;
        self.center + self.velocity * dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub channels: usize,
    pub azimuth_steps: usize,
    /// Degrees.
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub max_range: f64,
    pub noise: f64,
    pub height: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            channels: 32,
            azimuth_steps: 360,
            elevation_min: -25.0,
            elevation_max: 15.0,
            max_range: 40.0,
            noise: 0.01,
            height: 1.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub sessions: usize,
    pub scans_per_session: usize,
    /// Seconds between consecutive scans.
    pub scan_interval: f64,
    pub sensor: SensorModel,
    /// Meters of accumulated translation error added per scan.
    pub drift_per_scan: f64,
    /// Degrees of accumulated yaw error added per scan.
    pub drift_yaw_per_scan: f64,
    /// Per-session offset of the whole trajectory (meters, uniform ±).
    pub session_jitter: f64,
    /// Per-session yaw offset (degrees, uniform ±).
    pub session_jitter_yaw: f64,
    pub trajectory: Vec<[f64; 2]>,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bounds: [f64; 4],
    pub primitives: Vec<Primitive>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 1,
            sessions: 1,
            scans_per_session: 10,
            scan_interval: 1.0,
            sensor: SensorModel::default(),
            drift_per_scan: 0.0,
            drift_yaw_per_scan: 0.0,
            session_jitter: 0.0,
            session_jitter_yaw: 0.0,
            trajectory: vec![[0.0, 0.0], [1.0, 0.0]],
            bounds: [-50.0, -50.0, 50.0, 50.0],
            primitives: Vec::new(),
        }
    }
}

fn real(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.trim().parse().map_err(|_| format!("expected a real number, got `{value}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{value}`"))
    }
}

fn count(value: &str) -> std::result::Result<usize, String> {
    value.trim().parse().map_err(|_| format!("expected a count, got `{value}`"))
}

fn reals<const N: usize>(value: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated values, got `{value}`"));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = real(part)?;
    }
    Ok(out)
}

fn fmt_reals(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl SceneSpec {
    fn set_global(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "seed" => self.seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?,
            "sessions" => self.sessions = count(value)?,
            "scans_per_session" => self.scans_per_session = count(value)?,
            "scan_interval" => self.scan_interval = real(value)?,
            "sensor_channels" => self.sensor.channels = count(value)?,
            "sensor_azimuth_steps" => self.sensor.azimuth_steps = count(value)?,
            "sensor_elevation_min" => self.sensor.elevation_min = real(value)?,
            "sensor_elevation_max" => self.sensor.elevation_max = real(value)?,
            "sensor_max_range" => self.sensor.max_range = real(value)?,
            "sensor_noise" => self.sensor.noise = real(value)?,
            "sensor_height" => self.sensor.height = real(value)?,
            "drift_per_scan" => self.drift_per_scan = real(value)?,
            "drift_yaw_per_scan" => self.drift_yaw_per_scan = real(value)?,
            "session_jitter" => self.session_jitter = real(value)?,
            "session_jitter_yaw" => self.session_jitter_yaw = real(value)?,
            "trajectory" => {
                self.trajectory = value
                    .split(';')
                    .map(|w| reals::<2>(w.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "bounds" => self.bounds = reals::<4>(value)?,
            _ => return Err(format!("unknown scene key `{key}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut spec = SceneSpec::default();
        let mut current: Option<Primitive> = None;
        for (number, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: number + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if line == "[primitive]" {
                if let Some(p) = current.take() {
                    spec.primitives.push(p);
                }
                current = Some(Primitive::new(
                    "",
                    PrimitiveKind::Box,
                    PrimitiveClass::Static,
                    [0.0; 3],
                    [1.0; 3],
                ));
                continue;
            }
            if line.starts_with('[') {
                return Err(err(format!("unknown section `{line}`")));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match current.as_mut() {
                None => spec.set_global(key, value).map_err(err)?,
                Some(p) => set_primitive(p, key, value).map_err(err)?,
            }
        }
        if let Some(p) = current.take() {
            spec.primitives.push(p);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("scene: {m}")));
        if self.sessions == 0 || self.scans_per_session == 0 {
            return fail("sessions and scans_per_session must be positive");
        }
        if !(self.scan_interval > 0.0) {
            return fail("scan_interval must be positive");
        }
        let s = &self.sensor;
        if s.channels == 0 || s.azimuth_steps == 0 || !(s.max_range > 0.0) || s.noise < 0.0 {
            return fail("invalid sensor model");
        }
        if !(s.elevation_max >= s.elevation_min) {
            return fail("sensor_elevation_max must not be below sensor_elevation_min");
        }
        if self.trajectory.len() < 2 {
            return fail("trajectory needs at least two waypoints");
        }
        if !(self.bounds[2] > self.bounds[0] && self.bounds[3] > self.bounds[1]) {
            return fail("bounds must be x_min,y_min,x_max,y_max with positive extent");
        }
        for p in &self.primitives {
            if p.size.iter().any(|v| *v < 0.0) {
                return fail("primitive sizes must be non-negative");
            }
            if let Some((a, b)) = p.active {
                if a > b {
                    return fail("primitive active window must be ordered");
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.sensor;
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "sessions = {}", self.sessions);
        let _ = writeln!(out, "scans_per_session = {}", self.scans_per_session);
        let _ = writeln!(out, "scan_interval = {:?}", self.scan_interval);
        let _ = writeln!(out, "sensor_channels = {}", s.channels);
        let _ = writeln!(out, "sensor_azimuth_steps = {}", s.azimuth_steps);
        let _ = writeln!(out, "sensor_elevation_min = {:?}", s.elevation_min);
        let _ = writeln!(out, "sensor_elevation_max = {:?}", s.elevation_max);
        let _ = writeln!(out, "sensor_max_range = {:?}", s.max_range);
        let _ = writeln!(out, "sensor_noise = {:?}", s.noise);
        let _ = writeln!(out, "sensor_height = {:?}", s.height);
        let _ = writeln!(out, "drift_per_scan = {:?}", self.drift_per_scan);
        let _ = writeln!(out, "drift_yaw_per_scan = {:?}", self.drift_yaw_per_scan);
        let _ = writeln!(out, "session_jitter = {:?}", self.session_jitter);
        let _ = writeln!(out, "session_jitter_yaw = {:?}", self.session_jitter_yaw);
        let waypoints: Vec<String> = self.trajectory.iter().map(|w| fmt_reals(w)).collect();
        let _ = writeln!(out, "trajectory = {}", waypoints.join("; "));
        let _ = writeln!(out, "bounds = {}", fmt_reals(&self.bounds));
        for p in &self.primitives {
            let _ = writeln!(out, "\n[primitive]");
            if !p.name.is_empty() {
                let _ = writeln!(out, "name = {}", p.name);
            }
            let kind = match p.kind {
                PrimitiveKind::Box => "box",
                PrimitiveKind::Plane => "plane",
            };
            let _ = writeln!(out, "kind = {kind}");
            let _ = writeln!(out, "class = {}", p.class.name());
            let _ = writeln!(out, "center = {}", fmt_reals(p.center.as_slice()));
            let _ = writeln!(out, "size = {}", fmt_reals(p.size.as_slice()));
            if p.yaw != 0.0 {
                let _ = writeln!(out, "yaw = {:?}", p.yaw);
            }
            if !p.sessions.is_empty() {
                let list: Vec<String> = p.sessions.iter().map(|s| s.to_string()).collect();
                let _ = writeln!(out, "sessions = {}", list.join(","));
            }
            if p.velocity != Vector3::zeros() {
                let _ = writeln!(out, "velocity = {}", fmt_reals(p.velocity.as_slice()));
            }
            if let Some((a, b)) = p.active {
                let _ = writeln!(out, "active = {a},{b}");
            }
        }
        out
    }
}

fn set_primitive(p: &mut Primitive, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "name" => p.name = value.to_owned(),
        "kind" => {
            p.kind = match value {
                "box" => PrimitiveKind::Box,
                "plane" => PrimitiveKind::Plane,
                _ => return Err(format!("unknown primitive kind `{value}`")),
            }
        }
        "class" => {
            p.class = match value {
                "static" => PrimitiveClass::Static,
                "dynamic" => PrimitiveClass::Dynamic,
                "transient" => PrimitiveClass::Transient,
                _ => return Err(format!("unknown primitive class `{value}`")),
            }
        }
        "center" => p.center = Vector3::from(reals::<3>(value)?),
        "size" => p.size = Vector3::from(reals::<3>(value)?),
        "yaw" => p.yaw = real(value)?,
        "sessions" => {
            p.sessions = value
                .split(',')
                .map(count)
                .collect::<std::result::Result<_, _>>()?
        }
        "velocity" => p.velocity = Vector3::from(reals::<3>(value)?),
        "active" => {
            let parts: Vec<&str> = value.split(',').collect();
            if parts.len() != 2 {
                return Err(format!("active expects `first,last`, got `{value}`"));
            }
            p.active = Some((count(parts[0])?, count(parts[1])?));
        }
        _ => return Err(format!("unknown primitive key `{key}`")),
    }
    Ok(())
}
