//! 2D map of entities by missing-path profile.
//!
//! Entities with the same restricted completeness row are embedded once as a single
//! profile, then fanned out on a small spiral around the profile's position, so
//! identical rows always land together. Profiles are laid out by a neighbor-graph
//! embedding over the Russel-Rao k-nearest-neighbor graph.

pub mod distance;
pub mod umap;
pub mod zones;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use distance::russel_rao;
pub use zones::{compute_zones, Zone, ZoneConfig};

use crate::error::{Error, Result};
use crate::summaries::PathSummary;
use crate::vectors::CompletenessMatrix;

pub const COORDINATES_FILE: &str = "coordinates.csv";
pub const ZONES_FILE: &str = "zones.json";
pub const PROJECTION_FILE: &str = "projection.json";

/// Spiral radius of the largest profile, as a fraction of the profile layout diagonal.
const SPREAD_FRACTION: f64 = 0.004;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub selected_path_indices: Vec<usize>,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub seed: u64,
}

impl ProjectionConfig {
    pub fn new(selected_path_indices: Vec<usize>) -> Self {
        ProjectionConfig { selected_path_indices, n_neighbors: 15, min_dist: 0.1, n_epochs: 200, seed: 42 }
    }

    /// Default configuration over every path.
    pub fn all_paths(n_paths: usize) -> Self {
        Self::new((0..n_paths).collect())
    }

    pub fn validate(&self, n_paths: usize) -> Result<()> {
        if self.selected_path_indices.len() < 2 {
            return Err(Error::InvalidConfig("a projection needs at least 2 selected paths".into()));
        }
        if let Some(&bad) = self.selected_path_indices.iter().find(|&&i| i >= n_paths) {
            return Err(Error::UnknownPath(bad));
        }
        let mut sorted = self.selected_path_indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.selected_path_indices.len() {
            return Err(Error::InvalidConfig("selected path indices must be distinct".into()));
        }
        if self.n_neighbors < 2 {
            return Err(Error::InvalidConfig("n_neighbors must be at least 2".into()));
        }
        if !(self.min_dist >= 0.0 && self.min_dist.is_finite()) {
            return Err(Error::InvalidConfig("min_dist must be a non-negative number".into()));
        }
        if self.n_epochs == 0 {
            return Err(Error::InvalidConfig("n_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedMap {
    /// Indexed by entity id.
    pub coordinates: Vec<[f64; 2]>,
    pub zones: Vec<Zone>,
    pub config_used: ProjectionConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ProjectedMap {
    pub fn zone(&self, zone_id: usize) -> Result<&Zone> {
        self.zones.iter().find(|z| z.zone_id == zone_id).ok_or(Error::UnknownZone(zone_id))
    }
}

/// Cancellation flag and progress counter shared with a running projection.
#[derive(Debug, Default)]
pub struct JobControl {
    cancelled: AtomicBool,
    progress: AtomicU64,
}

impl JobControl {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    /// Fraction done in `[0, 1]`.
    pub fn progress(&self) -> f64 {
        f64::from_bits(self.progress.load(Ordering::Relaxed))
    }

    pub fn set_progress(&self, fraction: f64) {
        self.progress.store(fraction.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }
}

pub fn project(matrix: &CompletenessMatrix, cfg: &ProjectionConfig) -> Result<ProjectedMap> {
    project_with(matrix, cfg, &ZoneConfig::default(), &JobControl::new())
}

/// Embeds the rows of `matrix` restricted to the selected columns, then computes
/// zones whose missing paths refer to the unrestricted matrix.
pub fn project_with(
    matrix: &CompletenessMatrix,
    cfg: &ProjectionConfig,
    zone_cfg: &ZoneConfig,
    control: &JobControl,
) -> Result<ProjectedMap> {
    cfg.validate(matrix.n_paths())?;
    let restricted = matrix.restrict(&cfg.selected_path_indices)?;
    let n_bits = restricted.n_paths();
    let mut warnings = Vec::new();

    // Unique profiles in first-seen order, with their member rows.
    let mut profile_of: HashMap<&[u64], usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for row in 0..restricted.n_rows() {
        let id = *profile_of.entry(restricted.row_words(row)).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[id].push(row);
    }
    let mut profiles: Vec<&[u64]> = vec![&[]; members.len()];
    for (words, &id) in &profile_of {
        profiles[id] = words;
    }

    let n_profiles = profiles.len();
    let k = cfg.n_neighbors.min(n_profiles.saturating_sub(1));
    if n_profiles > 1 && k < cfg.n_neighbors {
        warnings.push(format!(
            "n_neighbors reduced from {} to {k}: only {n_profiles} distinct missing-path profiles",
            cfg.n_neighbors
        ));
    }

    let layout: Vec<[f64; 2]> = if n_profiles <= 1 {
        vec![[0.0, 0.0]; n_profiles]
    } else {
        let knn = umap::russel_rao_knn(&profiles, n_bits, k);
        if control.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let graph = umap::fuzzy_graph(&knn);
        let params = umap::LayoutParams { min_dist: cfg.min_dist, n_epochs: cfg.n_epochs, seed: cfg.seed };
        umap::optimize_layout(n_profiles, &graph, &params, control)?
    };

    let coordinates = expand_profiles(&layout, &members, restricted.n_rows());
    let zones = compute_zones(&coordinates, matrix, zone_cfg);
    control.set_progress(1.0);
    Ok(ProjectedMap { coordinates, zones, config_used: cfg.clone(), warnings })
}

/// Places the members of each profile on a sunflower spiral centred on the profile.
fn expand_profiles(layout: &[[f64; 2]], members: &[Vec<usize>], n_rows: usize) -> Vec<[f64; 2]> {
    let diag = zones::diagonal(layout);
    let largest = members.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let mut coords = vec![[0.0, 0.0]; n_rows];
    for (center, rows) in layout.iter().zip(members) {
        let m = rows.len() as f64;
        let radius = SPREAD_FRACTION * diag * (m / largest).sqrt();
        for (t, &row) in rows.iter().enumerate() {
            let r = radius * ((t as f64 + 0.5) / m).sqrt();
            let theta = t as f64 * GOLDEN_ANGLE;
            coords[row] = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
        }
    }
    coords
}

/// The most complete path whose value summary shows more than one bucket, counting
/// a non-empty OTHER as a bucket. Ties go to the lowest index.
pub fn default_color_path(summaries: &[PathSummary], completeness: impl Fn(usize) -> f64) -> Option<usize> {
    summaries
        .iter()
        .filter(|s| s.values.bucket_count() > 1)
        .map(|s| (s.path_index, completeness(s.path_index)))
        .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((bi, bc)) if bc > c || (bc == c && bi < i) => Some((bi, bc)),
            _ => Some((i, c)),
        })
        .map(|(i, _)| i)
}

#[derive(Serialize, Deserialize)]
struct CoordinateRecord {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct ProjectionMeta {
    config_used: ProjectionConfig,
    warnings: Vec<String>,
}

/// Writes `coordinates.csv`, `zones.json` and `projection.json`.
pub fn persist_map(map: &ProjectedMap, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join(COORDINATES_FILE))?;
    w.write_record(["id", "x", "y"])?;
    for (id, [x, y]) in map.coordinates.iter().enumerate() {
        w.serialize(CoordinateRecord { id, x: *x, y: *y })?;
    }
    w.flush()?;
    fs::write(dir.join(ZONES_FILE), serde_json::to_vec_pretty(&map.zones)?)?;
    let meta = ProjectionMeta { config_used: map.config_used.clone(), warnings: map.warnings.clone() };
    fs::write(dir.join(PROJECTION_FILE), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

pub fn load_map(dir: impl AsRef<Path>) -> Result<ProjectedMap> {
    let dir = dir.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(dir.join(COORDINATES_FILE))?;
    let mut coordinates = Vec::new();
    for (line, record) in r.deserialize::<CoordinateRecord>().enumerate().skip(1) {
        let rec = record?;
        if rec.id != line - 1 {
            return Err(Error::format(COORDINATES_FILE, format!("expected id {} on line {}", line - 1, line + 1)));
        }
        coordinates.push([rec.x, rec.y]);
    }
    let zones: Vec<Zone> = serde_json::from_slice(&fs::read(dir.join(ZONES_FILE))?)?;
    let meta: ProjectionMeta = serde_json::from_slice(&fs::read(dir.join(PROJECTION_FILE))?)?;
    Ok(ProjectedMap { coordinates, zones, config_used: meta.config_used, warnings: meta.warnings })
}
