use crate::regions::{Point, RegionFeatures};

/// Euclidean centroid distance.
pub fn gate_distance(cp: Point, ci: Point) -> f64 {
    let (dx, dy) = (cp.x - ci.x, cp.y - ci.y);
    (dx * dx + dy * dy).sqrt()
}

/// Bipartite graph between `m` previous objects and `n` detections.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchGraph {
    pub m: usize,
    pub n: usize,
    /// `(previous, detection)` pairs in lexicographic order.
    pub edges: Vec<(usize, usize)>,
}

impl MatchGraph {
    pub fn has_edge(&self, p: usize, i: usize) -> bool {
        self.edges.binary_search(&(p, i)).is_ok()
    }

    pub fn degree_of_previous(&self, p: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == p).count()
    }

    pub fn degree_of_detection(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == i).count()
    }
}

/// Edge `(p, i)` iff `gate_distance(prev[p], curr[i].centroid) < lambda`.
pub fn build_graph(prev: &[Point], curr: &[RegionFeatures], lambda: f64) -> MatchGraph {
    let edges = prev
        .iter()
        .enumerate()
        .flat_map(|(p, &cp)| {
            curr.iter()
                .enumerate()
                .filter(move |(_, d)| gate_distance(cp, d.centroid) < lambda)
                .map(move |(i, _)| (p, i))
        })
        .collect();
    MatchGraph {
        m: prev.len(),
        n: curr.len(),
        edges,
    }
}
