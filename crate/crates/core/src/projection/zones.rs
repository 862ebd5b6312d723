//! Dense zones on the 2D map: DBSCAN clusters with a padded convex-hull boundary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::vectors::CompletenessMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    /// Neighborhood radius as a fraction of the bounding-box diagonal.
    pub eps_fraction: f64,
    pub min_members: usize,
    /// Boundary padding as a fraction of the bounding-box diagonal.
    pub padding_fraction: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig { eps_fraction: 0.03, min_members: 5, padding_fraction: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: usize,
    #[serde(rename = "member_ids")]
    pub member_entity_ids: Vec<usize>,
    /// Counter-clockwise polygon.
    pub boundary: Vec<[f64; 2]>,
    /// Paths missing for every member.
    pub missing_path_indices: Vec<usize>,
}

/// Length of the bounding-box diagonal; 0 for fewer than two distinct points.
pub fn diagonal(points: &[[f64; 2]]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

/// DBSCAN labels: `Some(cluster)` or `None` for noise. A point is a core point when
/// at least `min_points` points, itself included, lie within `eps`. Clusters are
/// numbered in order of their lowest point index.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_points: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    if n == 0 || eps <= 0.0 {
        return labels;
    }
    let cell = |p: &[f64; 2]| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let (cx, cy) = cell(&points[i]);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        let d2 = (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out
    };

    let mut visited = vec![false; n];
    let mut next_cluster = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = neighbors(i);
        if seeds.len() < min_points {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = Some(cluster);
        let mut stack = seeds;
        while let Some(j) = stack.pop() {
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let more = neighbors(j);
            if more.len() >= min_points {
                stack.extend(more.into_iter().filter(|&k| labels[k].is_none() || !visited[k]));
            }
        }
    }
    labels
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without repeated
/// endpoint. Collinear points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Hull of the members grown by `pad`: every member contributes eight points on a
/// circle of radius `pad` around it.
pub fn padded_hull(points: &[[f64; 2]], pad: f64) -> Vec<[f64; 2]> {
    let mut grown = Vec::with_capacity(points.len() * 8);
    for p in points {
        for k in 0..8 {
            let angle = k as f64 * std::f64::consts::FRAC_PI_4;
            grown.push([p[0] + pad * angle.cos(), p[1] + pad * angle.sin()]);
        }
    }
    convex_hull(&grown)
}

/// Clusters the map and describes each cluster of at least `min_members` points.
/// `matrix` rows are the entities, in coordinate order.
pub fn compute_zones(coordinates: &[[f64; 2]], matrix: &CompletenessMatrix, cfg: &ZoneConfig) -> Vec<Zone> {
    let diag = match diagonal(coordinates) {
        d if d > 0.0 => d,
        _ => 1.0,
    };
    let min_members = cfg.min_members.max(1);
    let labels = dbscan(coordinates, cfg.eps_fraction * diag, min_members);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = *label {
            if clusters.len() <= c {
                clusters.resize(c + 1, Vec::new());
            }
            clusters[c].push(i);
        }
    }
    clusters
        .into_iter()
        .filter(|members| members.len() >= min_members)
        .enumerate()
        .map(|(zone_id, members)| {
            let pts: Vec<[f64; 2]> = members.iter().map(|&i| coordinates[i]).collect();
            Zone {
                zone_id,
                boundary: padded_hull(&pts, cfg.padding_fraction * diag),
                missing_path_indices: common_missing(matrix, &members),
                member_entity_ids: members,
            }
        })
        .collect()
}

fn common_missing(matrix: &CompletenessMatrix, members: &[usize]) -> Vec<usize> {
    let Some((&first, rest)) = members.split_first() else { return Vec::new() };
    if first >= matrix.n_rows() {
        return Vec::new();
    }
    let mut acc: Vec<u64> = matrix.row_words(first).to_vec();
    for &m in rest {
        if m >= matrix.n_rows() {
            return Vec::new();
        }
        for (a, w) in acc.iter_mut().zip(matrix.row_words(m)) {
            *a &= w;
        }
    }
    (0..matrix.n_paths()).filter(|&j| acc[j / 64] >> (j % 64) & 1 == 1).collect()
}

/// Even-odd point-in-polygon test.
pub fn contains(polygon: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(center: [f64; 2], n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [center[0] + rng.random_range(-radius..radius), center[1] + rng.random_range(-radius..radius)])
            .collect()
    }

    #[test]
    fn two_far_blobs_make_two_zones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob([0.0, 0.0], 30, 0.5, &mut rng);
        pts.extend(blob([100.0, 100.0], 30, 0.5, &mut rng));
        let zones = compute_zones(&pts, &CompletenessMatrix::zeros(60, 3), &ZoneConfig::default());
        assert_eq!(zones.len(), 2);
        assert_eq!(zones[0].member_entity_ids, (0..30).collect::<Vec<_>>());
        assert_eq!(zones[1].member_entity_ids, (30..60).collect::<Vec<_>>());
        for z in &zones {
            for &m in &z.member_entity_ids {
                assert!(contains(&z.boundary, pts[m]));
            }
        }
    }

    #[test]
    fn sparse_scatter_has_no_zone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = blob([0.0, 0.0], 200, 100.0, &mut rng);
        let cfg = ZoneConfig { eps_fraction: 0.005, ..ZoneConfig::default() };
        assert!(compute_zones(&pts, &CompletenessMatrix::zeros(200, 1), &cfg).is_empty());
    }

    #[test]
    fn zone_missing_paths_are_the_intersection() {
        let pts = vec![[0.0, 0.0]; 6];
        let mut m = CompletenessMatrix::zeros(6, 12);
        for r in 0..6 {
            m.set(r, 7, true);
            m.set(r, 9, true);
        }
        m.set(0, 3, true);
        let zones = compute_zones(&pts, &m, &ZoneConfig::default());
        assert_eq!(zones.len(), 1);
        assert_eq!(zones[0].missing_path_indices, vec![7, 9]);
    }

    #[test]
    fn hull_of_square() {
        let hull = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]);
        assert_eq!(hull, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }
}
