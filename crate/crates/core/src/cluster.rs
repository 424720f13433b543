//! IoU connectivity clustering of detections within a volume.
//!
//! Detections are graph nodes; two detections are joined when their IoU
//! reaches the threshold and the temporal linking rule allows the pair.
//! Clusters are the connected components, found with a union-find.

use alloc::vec::Vec;

use crate::geometry::{iou, union_box};
use crate::volume::VideoVolume;
use crate::{BoundingBox, Error};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.10;

/// Which detection pairs may be linked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemporalLinking {
    /// Any two detections in the volume.
    #[default]
    AnyFrame,
    /// Detections at most one frame apart.
    AdjacentFrame,
    SameFrameOnly,
}

impl TemporalLinking {
    pub fn allows(&self, frame_a: usize, frame_b: usize) -> bool {
        match self {
            TemporalLinking::AnyFrame => true,
            TemporalLinking::AdjacentFrame => frame_a.abs_diff(frame_b) <= 1,
            TemporalLinking::SameFrameOnly => frame_a == frame_b,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TemporalLinking::AnyFrame => "any-frame",
            TemporalLinking::AdjacentFrame => "adjacent-frame",
            TemporalLinking::SameFrameOnly => "same-frame-only",
        }
    }
}

impl core::str::FromStr for TemporalLinking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "any-frame" | "any" => Ok(TemporalLinking::AnyFrame),
            "adjacent-frame" | "adjacent" => Ok(TemporalLinking::AdjacentFrame),
            "same-frame-only" | "same-frame" => Ok(TemporalLinking::SameFrameOnly),
            _ => Err(Error::InvalidConfig(
                "linking must be any-frame, adjacent-frame or same-frame-only",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    iou_threshold: f64,
    pub temporal_linking: TemporalLinking,
    min_cluster_boxes: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            temporal_linking: TemporalLinking::AnyFrame,
            min_cluster_boxes: 1,
        }
    }
}

impl ClusterConfig {
    pub fn new(iou_threshold: f64, temporal_linking: TemporalLinking, min_cluster_boxes: usize) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&iou_threshold) {
            return Err(Error::InvalidConfig("iou threshold must lie in [0, 1]"));
        }
        if min_cluster_boxes == 0 {
            return Err(Error::InvalidConfig("min cluster boxes must be at least 1"));
        }
        Ok(ClusterConfig { iou_threshold, temporal_linking, min_cluster_boxes })
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    pub fn min_cluster_boxes(&self) -> usize {
        self.min_cluster_boxes
    }
}

/// Position of a detection inside a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MemberRef {
    /// Absolute frame index.
    pub frame_index: usize,
    /// Position within that frame's detection list.
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub cluster_id: usize,
    /// Sorted by `(frame_index, ordinal)`.
    pub members: Vec<MemberRef>,
    pub best_box: BoundingBox,
    /// Distinct frames with at least one member.
    pub frame_coverage: usize,
}

impl Cluster {
    pub fn first_frame(&self) -> usize {
        self.members[0].frame_index
    }
}

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: alloc::vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns `true` when the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Componentwise min of the top-left and max of the bottom-right corners.
pub fn best_box_of(members: &[BoundingBox]) -> Result<BoundingBox, Error> {
    let (first, rest) = members.split_first().ok_or(Error::EmptyCluster)?;
    Ok(rest.iter().fold(*first, |acc, b| union_box(&acc, b)))
}

/// Clusters every detection of `volume`.
///
/// Output is ordered by first member frame, then by the left edge of the
/// best box, then by first member; `cluster_id` is the position in that
/// order after dropping clusters smaller than `min_cluster_boxes`.
pub fn cluster_volume(volume: &VideoVolume, config: &ClusterConfig) -> Vec<Cluster> {
    let nodes: Vec<(MemberRef, BoundingBox)> = volume
        .detections
        .iter()
        .flat_map(|frame| {
            frame.iter().enumerate().map(|(ordinal, d)| {
                (MemberRef { frame_index: d.frame_index, ordinal }, d.bbox)
            })
        })
        .collect();
    let mut sets = UnionFind::new(nodes.len());
    let linking = config.temporal_linking;
    for i in 0..nodes.len() {
        let (ref_i, box_i) = &nodes[i];
        for (j, (ref_j, box_j)) in nodes.iter().enumerate().skip(i + 1) {
            if linking.allows(ref_i.frame_index, ref_j.frame_index)
                && iou(box_i, box_j) >= config.iou_threshold
            {
                sets.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root: Vec<Option<usize>> = alloc::vec![None; nodes.len()];
    for i in 0..nodes.len() {
        let root = sets.find(i);
        let g = *group_of_root[root].get_or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .filter(|g| g.len() >= config.min_cluster_boxes)
        .map(|g| build_cluster(&nodes, g))
        .collect();
    clusters.sort_by(|a, b| {
        (a.first_frame(), a.best_box.x1(), a.members[0])
            .cmp(&(b.first_frame(), b.best_box.x1(), b.members[0]))
    });
    for (id, c) in clusters.iter_mut().enumerate() {
        c.cluster_id = id;
    }
    clusters
}

fn build_cluster(nodes: &[(MemberRef, BoundingBox)], indices: Vec<usize>) -> Cluster {
    let mut members: Vec<MemberRef> = indices.iter().map(|&i| nodes[i].0).collect();
    members.sort_unstable();
    let boxes: Vec<BoundingBox> = indices.iter().map(|&i| nodes[i].1).collect();
    let best_box = best_box_of(&boxes).expect("groups are never empty");
    let mut frame_coverage = 0;
    let mut last = None;
    for m in &members {
        if last != Some(m.frame_index) {
            frame_coverage += 1;
            last = Some(m.frame_index);
        }
    }
    Cluster { cluster_id: 0, members, best_box, frame_coverage }
}
