use serde::{Deserialize, Serialize};

use super::{FixationEvent, ScreenToImageTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// DBSCAN neighborhood radius, image px.
    pub neighborhood_px: f64,
    /// Minimum neighborhood size (self included) for a core point, and
    /// minimum size of a reported cluster.
    pub min_members: usize,
    /// Radius of the circle drawn around each cluster center, image px.
    pub display_radius_px: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            neighborhood_px: 50.0,
            min_members: 2,
            display_radius_px: 60.0,
        }
    }
}

/// A salient region: a group of fixations close together on the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationCluster {
    /// Center, image px.
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub member_count: usize,
    /// Summed member durations, ms.
    pub total_duration: f64,
}

#[derive(Clone, Copy)]
struct Point {
    u: f64,
    v: f64,
    duration: f64,
    t_start: f64,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Smaller root wins so labels do not depend on union order.
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Density-based clustering of fixation centroids in image coordinates.
///
/// Fixations outside the image are dropped. Core points (at least
/// `min_members` neighbors within `neighborhood_px`, self included) that are
/// mutually reachable form a cluster; a border point joins the cluster of its
/// nearest core neighbor. Points are put in a canonical order first, so the
/// result does not depend on input order. Clusters are returned sorted by
/// center.
pub fn cluster_fixations(
    fixations: &[FixationEvent],
    transform: &ScreenToImageTransform,
    cfg: &ClusterConfig,
) -> Vec<FixationCluster> {
    let mut pts: Vec<Point> = fixations
        .iter()
        .filter_map(|f| {
            transform.map_inside(f.cx, f.cy).map(|(u, v)| Point {
                u,
                v,
                duration: f.duration(),
                t_start: f.t_start,
            })
        })
        .collect();
    pts.sort_by(|a, b| {
        a.u.total_cmp(&b.u)
            .then(a.v.total_cmp(&b.v))
            .then(a.t_start.total_cmp(&b.t_start))
            .then(a.duration.total_cmp(&b.duration))
    });

    let n = pts.len();
    let eps2 = cfg.neighborhood_px * cfg.neighborhood_px;
    let dist2 = |a: &Point, b: &Point| (a.u - b.u).powi(2) + (a.v - b.v).powi(2);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(&pts[i], &pts[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors
        .iter()
        .map(|nb| nb.len() >= cfg.min_members.max(1))
        .collect();

    let mut sets = DisjointSet::new(n);
    for i in (0..n).filter(|&i| core[i]) {
        for &j in neighbors[i].iter().filter(|&&j| core[j]) {
            sets.union(i, j);
        }
    }

    let mut label: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        label[i] = if core[i] {
            Some(sets.find(i))
        } else {
            neighbors[i]
                .iter()
                .filter(|&&j| core[j])
                .min_by(|&&a, &&b| {
                    dist2(&pts[i], &pts[a])
                        .total_cmp(&dist2(&pts[i], &pts[b]))
                        .then(a.cmp(&b))
                })
                .map(|&j| sets.find(j))
        };
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, l) in label.iter().enumerate() {
        if let Some(l) = l {
            groups.entry(*l).or_default().push(i);
        }
    }

    let mut clusters: Vec<FixationCluster> = groups
        .values()
        // A border point can be pulled away by a nearer core of another
        // cluster, so the size floor is re-checked here.
        .filter(|members| members.len() >= cfg.min_members)
        .map(|members| {
            let count = members.len() as f64;
            FixationCluster {
                cx: members.iter().map(|&i| pts[i].u).sum::<f64>() / count,
                cy: members.iter().map(|&i| pts[i].v).sum::<f64>() / count,
                radius: cfg.display_radius_px,
                member_count: members.len(),
                total_duration: members.iter().map(|&i| pts[i].duration).sum(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.cx.total_cmp(&b.cx).then(a.cy.total_cmp(&b.cy)));
    clusters
}
