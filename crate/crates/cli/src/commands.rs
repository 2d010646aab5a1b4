use std::path::{Path, PathBuf};

use lifelong_core::eval::{alignment_metrics, cleaning_metrics};
use lifelong_core::io::{
    format_delta, format_heatmap, load_lifelong, parse_ply_positions, read_archive, read_delta, read_session,
    stage_lifelong, write_ply, MapArchive, SessionData, Staged, ARCHIVE_MAGIC,
};
use lifelong_core::pipeline::{init_map, update_map, Seed};
use lifelong_core::synth::{label_class, render_session, PrimitiveClass, SceneSpec};
use lifelong_core::update::{export_heatmap, extract_static_map, replay_delta, rollback_delta, PointCategory};
use lifelong_core::{Error, PipelineConfig, Point3, Pose};

use crate::{Common, LabelScheme};

pub const EXIT_PIPELINE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub details: Vec<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
            details: Vec::new(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() { EXIT_INPUT } else { EXIT_PIPELINE };
        let details = match &e {
            Error::AlignmentFailed { diagnostics, .. } => diagnostics.clone(),
            _ => Vec::new(),
        };
        Failure {
            code,
            message: e.to_string(),
            details,
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn setup(common: &Common) -> Result<PipelineConfig, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| Failure::input(format!("cannot start {} threads: {e}", common.threads)))?;
    Ok(match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    })
}

fn session_id(explicit: Option<String>, dir: &Path) -> Result<String, Failure> {
    let id = explicit.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "session".into())
    });
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Failure::input(format!("session id `{id}` must be nonempty without whitespace")));
    }
    Ok(id)
}

/// Mismatched configurations are refused unless the caller forces them.
fn check_hash(found: u64, config: &PipelineConfig, force: bool, what: &str) -> Outcome {
    if found == config.hash() {
        return Ok(());
    }
    eprintln!(
        "warning: {what} was produced with config {found:016x}, current config is {:016x}",
        config.hash()
    );
    if force {
        Ok(())
    } else {
        Err(Error::ConfigMismatch {
            archive: found,
            config: config.hash(),
        }
        .into())
    }
}

pub fn init(common: &Common, session: &Path, output: &Path, id: Option<String>) -> Outcome {
    let config = setup(common)?;
    let id = session_id(id, session)?;
    let data = read_session(session)?;
    let out = init_map(&data.session, &id, &config)?;
    let mut staged = Staged::new();
    stage_lifelong(&mut staged, output, &out.map)?;
    staged.commit()?;
    println!(
        "initialized {} with {} points from {} ({} removed)",
        output.display(),
        out.map.map.len(),
        id,
        out.cleaned.removed.len()
    );
    Ok(())
}

pub struct UpdateArgs {
    pub archive: PathBuf,
    pub session: PathBuf,
    pub output: PathBuf,
    pub delta: Option<PathBuf>,
    pub id: Option<String>,
    pub init_transform: Option<String>,
    pub force: bool,
    pub diagnostics: Option<PathBuf>,
}

fn parse_transform(text: &str) -> Result<Pose, Failure> {
    let values: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| Failure::input("--init-transform expects 12 finite reals"))?;
    let values: [f64; 12] = values
        .try_into()
        .map_err(|v: Vec<f64>| Failure::input(format!("--init-transform expects 12 reals, got {}", v.len())))?;
    let pose = Pose::from_row_major_3x4(&values);
    if !pose.is_valid(1e-6) {
        return Err(Failure::input("--init-transform rotation is not orthonormal"));
    }
    Ok(pose)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn update(common: &Common, args: &UpdateArgs) -> Outcome {
    let config = setup(common)?;
    let id = session_id(args.id.clone(), &args.session)?;
    let seed = match &args.init_transform {
        Some(text) => Seed::Manual(parse_transform(text)?),
        None => Seed::Detect,
    };
    let prev = load_lifelong(&args.archive)?;
    check_hash(prev.config_hash, &config, args.force, "archive")?;
    if prev.lineage.contains(&id) {
        return Err(Failure::input(format!("session id `{id}` is already in the lineage")));
    }
    let data = read_session(&args.session)?;
    let out = update_map(&prev, &data.session, &id, &config, seed)?;
    let delta_path = args.delta.clone().unwrap_or_else(|| with_suffix(&args.output, ".delta"));
    let mut staged = Staged::new();
    stage_lifelong(&mut staged, &args.output, &out.map)?;
    staged.add(&delta_path, format_delta(&out.delta).as_bytes())?;
    if let Some(path) = &args.diagnostics {
        staged.add(path, out.aligned.diagnostics_log().as_bytes())?;
    }
    staged.commit()?;
    let counts: Vec<String> = PointCategory::ALL
        .iter()
        .map(|c| format!("{}={}", c.name(), out.classification.count(*c)))
        .collect();
    println!(
        "updated {} -> {} ({} points, lineage {}); seed scan {} map scan {}; {}",
        args.archive.display(),
        args.output.display(),
        out.map.map.len(),
        out.map.lineage.join(","),
        out.seed.session_scan_index,
        out.seed.map_scan_index,
        counts.join(" ")
    );
    Ok(())
}

fn write_archive(staged: &mut Staged, path: &Path, archive: &MapArchive) -> Outcome {
    staged.add(path, &lifelong_core::io::encode_archive(archive))?;
    Ok(())
}

pub fn extract_static(common: &Common, archive: &Path, output: &Path, tau_g: Option<f64>, ascii: bool) -> Outcome {
    let config = setup(common)?;
    let tau = tau_g.unwrap_or(config.tau_g);
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Failure::input(format!("--tau-g must lie in (0, 1), got {tau}")));
    }
    let source = read_archive(archive)?;
    let map = extract_static_map(&source.map, tau);
    let mut staged = Staged::new();
    if ascii {
        staged.add(output, write_ply(&map).as_bytes())?;
    } else {
        let kept = MapArchive { map, ..source.clone() };
        write_archive(&mut staged, output, &kept)?;
    }
    staged.commit()?;
    println!("kept points with eps_g < {tau} from {} points", source.map.len());
    Ok(())
}

pub fn delta_replay(common: &Common, archive: &Path, delta: &Path, output: &Path, force: bool) -> Outcome {
    let config = setup(common)?;
    let prev = read_archive(archive)?;
    let delta = read_delta(delta)?;
    check_hash(delta.config_hash, &config, force, "delta")?;
    let map = replay_delta(&prev.map, &delta, &config)?;
    let mut lineage = prev.lineage.clone();
    lineage.push(delta.session_id.clone());
    let mut staged = Staged::new();
    write_archive(
        &mut staged,
        output,
        &MapArchive {
            map,
            lineage,
            config_hash: delta.config_hash,
        },
    )?;
    staged.commit()?;
    println!("replayed {} records of {}", delta.records.len(), delta.session_id);
    Ok(())
}

pub fn delta_rollback(common: &Common, archive: &Path, delta: &Path, output: &Path) -> Outcome {
    setup(common)?;
    let next = read_archive(archive)?;
    let delta = read_delta(delta)?;
    if next.lineage.last() != Some(&delta.session_id) {
        return Err(Failure::input(format!(
            "delta belongs to `{}` but the archive's last session is `{}`",
            delta.session_id,
            next.lineage.last().map_or("", String::as_str)
        )));
    }
    let map = rollback_delta(&next.map, &delta)?;
    let mut lineage = next.lineage.clone();
    lineage.pop();
    let mut staged = Staged::new();
    write_archive(
        &mut staged,
        output,
        &MapArchive {
            map,
            lineage,
            config_hash: next.config_hash,
        },
    )?;
    staged.commit()?;
    println!("rolled back {}", delta.session_id);
    Ok(())
}

pub fn heatmap(common: &Common, deltas: &[PathBuf], output: &Path, cell: Option<f64>, floor: Option<f64>) -> Outcome {
    let config = setup(common)?;
    let cell = cell.unwrap_or(config.coverage_cell);
    let floor = floor.unwrap_or(config.heatmap_floor);
    if !(cell > 0.0) || !(floor >= 0.0) {
        return Err(Failure::input("--cell must be positive and --floor nonnegative"));
    }
    let maps = deltas.iter().map(|p| read_delta(p)).collect::<Result<Vec<_>, _>>()?;
    let cells = export_heatmap(&maps, cell, floor)?;
    let mut staged = Staged::new();
    staged.add(output, format_heatmap(&cells, cell).as_bytes())?;
    staged.commit()?;
    println!("{} cells from {} delta maps", cells.len(), maps.len());
    Ok(())
}

fn session_points(data: &SessionData, poses: &[Pose]) -> Vec<Point3> {
    data.session
        .scans
        .iter()
        .zip(poses)
        .flat_map(|(scan, pose)| scan.transformed(pose))
        .collect()
}

fn is_archive(path: &Path) -> bool {
    use std::io::Read as _;
    let mut magic = [0u8; 8];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .is_ok_and(|_| &magic == ARCHIVE_MAGIC)
}

/// Points of an archive, an ASCII PLY file, or a session directory.
fn cloud_positions(path: &Path, prefer_gt: bool) -> Result<Vec<Point3>, Failure> {
    if path.is_dir() {
        let data = read_session(path)?;
        let poses = match (&data.gt_poses, prefer_gt) {
            (Some(gt), true) => gt.clone(),
            _ => data.session.poses.clone(),
        };
        return Ok(session_points(&data, &poses));
    }
    if is_archive(path) {
        return Ok(read_archive(path)?.map.positions());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_ply_positions(&text, path)?)
}

pub fn eval_align(common: &Common, pred: &Path, gt: &Path, sigma: Option<f64>, table: bool) -> Outcome {
    let config = setup(common)?;
    let sigma = sigma.unwrap_or(config.sigma_inlier);
    if !(sigma > 0.0) {
        return Err(Failure::input("--sigma must be positive"));
    }
    let a = cloud_positions(pred, false)?;
    let b = cloud_positions(gt, true)?;
    let m = alignment_metrics(&a, &b, sigma)?;
    if table {
        print!("{}", m.table());
    } else {
        println!("{}", m.record());
    }
    Ok(())
}

fn is_dynamic(label: u32, scheme: LabelScheme) -> Result<bool, Failure> {
    match scheme {
        LabelScheme::Synth => match label_class(label) {
            Some(PrimitiveClass::Dynamic) => Ok(true),
            Some(_) => Ok(false),
            None => Err(Failure::input(format!("label {label:#x} has no synthetic class"))),
        },
        LabelScheme::SemanticKitti => Ok(label & 0xffff >= 252),
    }
}

pub fn eval_clean(
    common: &Common,
    pred: &Path,
    gt: &Path,
    match_radius: Option<f64>,
    scheme: LabelScheme,
    table: bool,
) -> Outcome {
    let config = setup(common)?;
    let radius = match_radius.unwrap_or(config.match_radius);
    let cleaned = cloud_positions(pred, false)?;
    let data = read_session(gt)?;
    let Some(labels) = &data.labels else {
        return Err(Failure::input(format!("{}: clean mode needs labels/", gt.display())));
    };
    let points = session_points(&data, &data.session.poses);
    let (mut statics, mut dynamics) = (Vec::new(), Vec::new());
    for (p, l) in points.iter().zip(labels.iter().flatten()) {
        if is_dynamic(*l, scheme)? {
            dynamics.push(*p);
        } else {
            statics.push(*p);
        }
    }
    let m = cleaning_metrics(&cleaned, &statics, &dynamics, radius)?;
    if table {
        print!("{}", m.table());
    } else {
        println!("{}", m.record());
    }
    Ok(())
}

fn load_scene(scene: &str) -> Result<SceneSpec, Failure> {
    Ok(match scene {
        "parking-lot" => lifelong_core::synth::parking_lot_scenario(),
        "alignment" => lifelong_core::synth::alignment_scenario(),
        path => SceneSpec::load(Path::new(path))?,
    })
}

pub fn synth(common: &Common, scene: &str, out: &Path, seed: Option<u64>, sessions: &[usize]) -> Outcome {
    setup(common)?;
    let mut spec = load_scene(scene)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let indices: Vec<usize> = if sessions.is_empty() {
        (1..=spec.sessions).collect()
    } else {
        sessions.to_vec()
    };
    if let Some(bad) = indices.iter().find(|&&t| t == 0 || t > spec.sessions) {
        return Err(Failure::input(format!("session {bad} outside 1..={}", spec.sessions)));
    }
    // Render everything before touching the output directory.
    let rendered = indices
        .iter()
        .map(|&t| render_session(&spec, t))
        .collect::<Result<Vec<_>, _>>()?;
    for (t, session) in indices.iter().zip(&rendered) {
        let dir = out.join(format!("session_{t:02}"));
        lifelong_core::io::write_session(&dir, &session.to_session_data())?;
        println!("{} ({} scans, {} points)", dir.display(), session.session.len(), session.point_count());
    }
    Ok(())
}
