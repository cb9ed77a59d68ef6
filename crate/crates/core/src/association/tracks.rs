use std::collections::BTreeMap;

use serde::Serialize;

use super::{gate_distance, AssociationError, MatchGraph};
use crate::regions::{
    downsample_histogram, l1_distance, BoundingBox, ColorHistogram, DownsampleMode, Point,
    RegionFeatures,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackState {
    Active,
    Occluded,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub frame: u64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    /// Latest detection; for an occluded track, the merged blob.
    pub features: RegionFeatures,
    /// Appearance at the last unoccluded sighting.
    pub ref_hist_upper: ColorHistogram,
    pub ref_hist_lower: ColorHistogram,
    pub trajectory: Vec<TrajectoryPoint>,
    pub missed_frames: usize,
    /// Occlusion group key (smallest member id) while `Occluded`.
    pub group: Option<u64>,
}

impl Track {
    fn born(id: u64, det: &RegionFeatures, frame: u64) -> Self {
        Self {
            id,
            state: TrackState::Active,
            features: det.clone(),
            ref_hist_upper: det.hist_upper.clone(),
            ref_hist_lower: det.hist_lower.clone(),
            trajectory: vec![TrajectoryPoint {
                frame,
                position: det.centroid,
            }],
            missed_frames: 0,
            group: None,
        }
    }

    pub fn centroid(&self) -> Point {
        self.features.centroid
    }

    /// Whether the track took a detection of its own in `frame`.
    pub fn seen_at(&self, frame: u64) -> bool {
        self.trajectory.last().is_some_and(|p| p.frame == frame)
    }

    fn observe_solo(&mut self, det: &RegionFeatures, frame: u64) {
        self.state = TrackState::Active;
        self.group = None;
        self.missed_frames = 0;
        self.features = det.clone();
        self.ref_hist_upper = det.hist_upper.clone();
        self.ref_hist_lower = det.hist_lower.clone();
        self.trajectory.push(TrajectoryPoint {
            frame,
            position: det.centroid,
        });
    }

    fn observe_occluded(&mut self, det: &RegionFeatures, group: u64) {
        self.state = TrackState::Occluded;
        self.group = Some(group);
        self.missed_frames = 0;
        self.features = det.clone();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationParams {
    /// Gate on centroid distance, pixels.
    pub lambda: f64,
    /// Frames a track may go undetected before it is dropped.
    pub max_missed: usize,
    /// Slack, in pixels, when testing whether a blob covers a track's last box.
    pub overlap_margin: usize,
    /// Downsample histograms to this many bins before comparing them.
    pub match_bins: Option<usize>,
    pub downsample: DownsampleMode,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self {
            lambda: 50.0,
            max_missed: 5,
            overlap_margin: 2,
            match_bins: None,
            downsample: DownsampleMode::Sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeEvent {
    pub tracks: Vec<u64>,
    pub detection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitEvent {
    pub tracks: Vec<u64>,
    pub detections: Vec<usize>,
}

/// Tracks sharing one blob during the current frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcclusionGroup {
    pub tracks: Vec<u64>,
    pub detection: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssociationReport {
    pub frame: u64,
    /// `(track id, detection index)` for every track that took a detection
    /// of its own this frame.
    pub matches: Vec<(u64, usize)>,
    pub births: Vec<u64>,
    pub deaths: Vec<u64>,
    pub merges: Vec<MergeEvent>,
    pub splits: Vec<SplitEvent>,
    pub groups: Vec<OcclusionGroup>,
}

#[derive(Debug, Clone)]
pub struct TrackSet {
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    params: AssociationParams,
}

impl TrackSet {
    pub fn new(params: AssociationParams) -> Result<Self, AssociationError> {
        if !(params.lambda > 0.0) {
            return Err(AssociationError::InvalidParameter(format!(
                "lambda must be positive, got {}",
                params.lambda
            )));
        }
        Ok(Self {
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            params,
        })
    }

    pub fn params(&self) -> &AssociationParams {
        &self.params
    }

    /// Live tracks in ascending id order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn get(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Centroids in track order; the "previous objects" side of the graph.
    pub fn centroids(&self) -> Vec<Point> {
        self.tracks.iter().map(Track::centroid).collect()
    }

    /// Replace the position recorded for `id` at its latest sighting.
    pub fn refine_latest(&mut self, id: u64, position: Point) {
        if let Some(t) = self.tracks.iter_mut().find(|t| t.id == id) {
            if let Some(last) = t.trajectory.last_mut() {
                last.position = position;
            }
        }
    }

    /// Build the gate graph for `detections` and resolve it.
    pub fn step(
        &mut self,
        detections: &[RegionFeatures],
        frame: u64,
    ) -> Result<AssociationReport, AssociationError> {
        let graph = super::build_graph(&self.centroids(), detections, self.params.lambda);
        self.resolve(&graph, detections, frame)
    }

    fn appearance_distance(
        &self,
        track: &Track,
        det: &RegionFeatures,
    ) -> Result<f64, AssociationError> {
        let pairs = [
            (&track.ref_hist_upper, &det.hist_upper),
            (&track.ref_hist_lower, &det.hist_lower),
        ];
        let mut total = 0.0;
        for (a, b) in pairs {
            total += match self.params.match_bins {
                Some(c) => l1_distance(
                    &downsample_histogram(a, c, self.params.downsample)?,
                    &downsample_histogram(b, c, self.params.downsample)?,
                )?,
                None => l1_distance(a, b)?,
            };
        }
        Ok(total)
    }

    /// Apply one frame of detections.
    ///
    /// Tracks are grouped into units: an occluded group moves as one unit,
    /// every other track is its own unit. Then:
    ///
    /// 1. Gate edges are taken greedily by ascending centroid distance (ties:
    ///    lower track id, then lower detection index), each unit and
    ///    detection used once.
    /// 2. An unmatched unit with an edge to an already-taken detection whose
    ///    box covers both its own last box and the taker's is merged into
    ///    that detection; every track involved becomes `Occluded` and keeps
    ///    its reference histograms.
    /// 3. A group whose blob is joined by further untaken detections covering
    ///    the group's last box has split. Members claim the pieces greedily
    ///    by ascending appearance distance to their references, each member
    ///    and piece used once.
    /// 4. Remaining one-to-one matches update the track; untaken detections
    ///    start tracks; unmatched tracks count a miss and are dropped after
    ///    `max_missed`.
    pub fn resolve(
        &mut self,
        graph: &MatchGraph,
        detections: &[RegionFeatures],
        frame: u64,
    ) -> Result<AssociationReport, AssociationError> {
        let (m, n) = (self.tracks.len(), detections.len());
        if graph.m != m || graph.n != n {
            return Err(AssociationError::GraphMismatch {
                graph_m: graph.m,
                graph_n: graph.n,
                tracks: m,
                detections: n,
            });
        }
        if self.last_frame.is_some_and(|last| frame <= last) {
            return Err(AssociationError::InvalidParameter(format!(
                "frame {frame} does not follow frame {}",
                self.last_frame.unwrap_or_default()
            )));
        }
        self.last_frame = Some(frame);
        let margin = self.params.overlap_margin;

        // units, ordered by smallest member id since tracks are id-sorted
        let mut units: Vec<Vec<usize>> = Vec::new();
        let mut group_slot: BTreeMap<u64, usize> = BTreeMap::new();
        for (t, track) in self.tracks.iter().enumerate() {
            match (track.state, track.group) {
                (TrackState::Occluded, Some(g)) => match group_slot.get(&g) {
                    Some(&u) => units[u].push(t),
                    None => {
                        group_slot.insert(g, units.len());
                        units.push(vec![t]);
                    }
                },
                _ => units.push(vec![t]),
            }
        }
        let unit_edge = |u: usize, i: usize| units[u].iter().any(|&t| graph.has_edge(t, i));
        let unit_box = |u: usize| -> BoundingBox { self.tracks[units[u][0]].features.bbox };
        let unit_dist =
            |u: usize, i: usize| gate_distance(self.tracks[units[u][0]].centroid(), detections[i].centroid);
        let unit_ids: Vec<u64> = units.iter().map(|v| self.tracks[v[0]].id).collect();
        let unit_key = |u: usize| unit_ids[u];

        // 1. greedy one-to-one
        let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
        for u in 0..units.len() {
            for i in 0..n {
                if unit_edge(u, i) {
                    pairs.push((unit_dist(u, i), unit_key(u), i, u));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut unit_det: Vec<Option<usize>> = vec![None; units.len()];
        let mut det_unit: Vec<Option<usize>> = vec![None; n];
        for &(_, _, i, u) in &pairs {
            if unit_det[u].is_none() && det_unit[i].is_none() {
                unit_det[u] = Some(i);
                det_unit[i] = Some(u);
            }
        }

        // 2. merges
        let mut absorbed: Vec<Vec<usize>> = vec![Vec::new(); n];
        for u in 0..units.len() {
            if unit_det[u].is_some() {
                continue;
            }
            let target = (0..n)
                .filter(|&i| unit_edge(u, i))
                .filter_map(|i| det_unit[i].map(|owner| (i, owner)))
                .filter(|&(i, owner)| {
                    let blob = &detections[i].bbox;
                    blob.overlaps(&unit_box(u), margin) && blob.overlaps(&unit_box(owner), margin)
                })
                .map(|(i, _)| i)
                .min_by(|&a, &b| unit_dist(u, a).total_cmp(&unit_dist(u, b)).then(a.cmp(&b)));
            if let Some(i) = target {
                absorbed[i].push(u);
            }
        }

        // 3. splits
        let mut claimed = vec![false; n];
        let mut splits: Vec<(usize, Vec<usize>)> = Vec::new();
        for g in 0..units.len() {
            let Some(i) = unit_det[g] else { continue };
            if units[g].len() < 2 || !absorbed[i].is_empty() {
                continue;
            }
            let mut pieces = vec![i];
            for j in 0..n {
                if det_unit[j].is_none()
                    && !claimed[j]
                    && unit_edge(g, j)
                    && detections[j].bbox.overlaps(&unit_box(g), margin)
                {
                    pieces.push(j);
                }
            }
            if pieces.len() >= 2 {
                pieces.sort_unstable();
                for &p in &pieces {
                    claimed[p] = true;
                }
                splits.push((g, pieces));
            }
        }

        let mut report = AssociationReport {
            frame,
            ..Default::default()
        };
        let split_units: Vec<usize> = splits.iter().map(|s| s.0).collect();

        // 4a. plain matches and continuing occlusions
        for u in 0..units.len() {
            let Some(i) = unit_det[u] else { continue };
            if !absorbed[i].is_empty() || split_units.contains(&u) {
                continue;
            }
            if units[u].len() >= 2 {
                let gid = unit_key(u);
                for &t in &units[u] {
                    self.tracks[t].observe_occluded(&detections[i], gid);
                }
                report.groups.push(OcclusionGroup {
                    tracks: units[u].iter().map(|&t| self.tracks[t].id).collect(),
                    detection: i,
                });
            } else {
                let t = units[u][0];
                self.tracks[t].observe_solo(&detections[i], frame);
                report.matches.push((self.tracks[t].id, i));
            }
        }

        // 2 (apply). merges
        for i in 0..n {
            if absorbed[i].is_empty() {
                continue;
            }
            let owner = det_unit[i].expect("merge target is taken");
            let mut members: Vec<usize> = units[owner].clone();
            for &u in &absorbed[i] {
                members.extend_from_slice(&units[u]);
            }
            members.sort_unstable();
            let ids: Vec<u64> = members.iter().map(|&t| self.tracks[t].id).collect();
            for &t in &members {
                self.tracks[t].observe_occluded(&detections[i], ids[0]);
            }
            report.merges.push(MergeEvent {
                tracks: ids.clone(),
                detection: i,
            });
            report.groups.push(OcclusionGroup {
                tracks: ids,
                detection: i,
            });
        }

        // 3 (apply). splits
        let mut split_births: Vec<usize> = Vec::new();
        for (g, pieces) in &splits {
            let members = &units[*g];
            let mut costs: Vec<(f64, u64, usize, usize)> = Vec::new();
            for &t in members {
                for &p in pieces {
                    let d = self.appearance_distance(&self.tracks[t], &detections[p])?;
                    costs.push((d, self.tracks[t].id, p, t));
                }
            }
            costs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut piece_members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            let mut assigned: Vec<usize> = Vec::new();
            for &(_, _, p, t) in &costs {
                if !assigned.contains(&t) && !piece_members.contains_key(&p) {
                    assigned.push(t);
                    piece_members.insert(p, vec![t]);
                }
            }
            // more members than pieces: leftovers stay occluded in their closest piece
            for &t in members {
                if assigned.contains(&t) {
                    continue;
                }
                let best = costs
                    .iter()
                    .filter(|c| c.3 == t)
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)))
                    .map(|c| c.2)
                    .expect("split has pieces");
                piece_members.entry(best).or_default().push(t);
            }
            for &p in pieces {
                match piece_members.get_mut(&p) {
                    None => split_births.push(p),
                    Some(ts) if ts.len() == 1 => {
                        let t = ts[0];
                        self.tracks[t].observe_solo(&detections[p], frame);
                        report.matches.push((self.tracks[t].id, p));
                    }
                    Some(ts) => {
                        ts.sort_unstable();
                        let ids: Vec<u64> = ts.iter().map(|&t| self.tracks[t].id).collect();
                        for &t in ts.iter() {
                            self.tracks[t].observe_occluded(&detections[p], ids[0]);
                        }
                        report.groups.push(OcclusionGroup {
                            tracks: ids,
                            detection: p,
                        });
                    }
                }
            }
            let mut ids: Vec<u64> = members.iter().map(|&t| self.tracks[t].id).collect();
            ids.sort_unstable();
            report.splits.push(SplitEvent {
                tracks: ids,
                detections: pieces.clone(),
            });
        }

        // 4b. misses
        let merged_units: Vec<usize> = absorbed.iter().flatten().copied().collect();
        for u in 0..units.len() {
            if unit_det[u].is_some() || merged_units.contains(&u) {
                continue;
            }
            for &t in &units[u] {
                let track = &mut self.tracks[t];
                track.missed_frames += 1;
                if track.missed_frames > self.params.max_missed {
                    track.state = TrackState::Lost;
                    report.deaths.push(track.id);
                }
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Lost);
        report.deaths.sort_unstable();

        // 4c. births
        for i in 0..n {
            let untaken = det_unit[i].is_none() && !claimed[i];
            if untaken || split_births.contains(&i) {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(Track::born(id, &detections[i], frame));
                report.births.push(id);
            }
        }
        report.matches.sort_unstable_by_key(|m| m.0);
        report.groups.sort_by_key(|g| g.tracks[0]);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::build_graph;

    const RED: usize = 0;
    const GREEN: usize = 1;
    const BLUE: usize = 2;

    /// Detection whose upper and lower histograms put `mix` of the mass in
    /// each of 3 colour bins.
    fn det(x0: usize, y0: usize, w: usize, h: usize, mix: [f64; 3]) -> RegionFeatures {
        let hist = ColorHistogram { bins: mix.to_vec() };
        RegionFeatures {
            label: 0,
            bbox: BoundingBox {
                x_min: x0,
                y_min: y0,
                x_max: x0 + w - 1,
                y_max: y0 + h - 1,
            },
            area: w * h,
            centroid: Point::new(x0 as f64 + (w - 1) as f64 / 2.0, y0 as f64 + (h - 1) as f64 / 2.0),
            hist_upper: hist.clone(),
            hist_lower: hist,
        }
    }

    fn pure(c: usize) -> [f64; 3] {
        let mut m = [0.0; 3];
        m[c] = 1.0;
        m
    }

    fn set() -> TrackSet {
        TrackSet::new(AssociationParams::default()).unwrap()
    }

    #[test]
    fn single_match_grows_trajectory() {
        let mut ts = TrackSet::new(AssociationParams {
            lambda: 5.0,
            ..Default::default()
        })
        .unwrap();
        let r0 = ts.step(&[det(8, 8, 5, 5, pure(RED))], 0).unwrap();
        assert_eq!(r0.births, vec![1]);
        let r1 = ts.step(&[det(10, 8, 5, 5, pure(RED))], 1).unwrap();
        assert_eq!(r1.matches, vec![(1, 0)]);
        assert_eq!(ts.tracks()[0].trajectory.len(), 2);
        assert_eq!(ts.tracks()[0].centroid(), Point::new(12.0, 10.0));
    }

    #[test]
    fn detection_without_edges_is_born() {
        let mut ts = TrackSet::new(AssociationParams {
            lambda: 5.0,
            ..Default::default()
        })
        .unwrap();
        ts.step(&[det(0, 0, 4, 4, pure(RED))], 0).unwrap();
        let r = ts
            .step(&[det(1, 0, 4, 4, pure(RED)), det(40, 40, 4, 4, pure(GREEN))], 1)
            .unwrap();
        assert_eq!(r.births, vec![2]);
        assert_eq!(ts.next_id(), 3);
    }

    #[test]
    fn conflict_goes_to_nearest_then_lowest_id() {
        let mut ts = set();
        ts.step(&[det(0, 0, 3, 3, pure(RED)), det(20, 0, 3, 3, pure(GREEN))], 0)
            .unwrap();
        // one detection equidistant from both, far from both boxes: no merge
        let r = ts.step(&[det(10, 0, 3, 3, pure(BLUE))], 1).unwrap();
        assert_eq!(r.matches, vec![(1, 0)]);
        assert!(r.merges.is_empty());
        assert_eq!(ts.get(2).unwrap().missed_frames, 1);
    }

    #[test]
    fn unmatched_track_dies_after_max_missed() {
        let mut ts = set();
        ts.step(&[det(0, 0, 3, 3, pure(RED))], 0).unwrap();
        for f in 1..=5 {
            let r = ts.step(&[], f).unwrap();
            assert!(r.deaths.is_empty());
            assert_eq!(ts.tracks()[0].state, TrackState::Active);
        }
        let r = ts.step(&[], 6).unwrap();
        assert_eq!(r.deaths, vec![1]);
        assert!(ts.tracks().is_empty());
        // ids are not reused
        let r = ts.step(&[det(0, 0, 3, 3, pure(RED))], 7).unwrap();
        assert_eq!(r.births, vec![2]);
    }

    #[test]
    fn merge_then_split_restores_identities() {
        let mut ts = set();
        // red moves right, green moves left, same row
        ts.step(&[det(10, 10, 8, 8, pure(RED)), det(40, 10, 8, 8, pure(GREEN))], 0)
            .unwrap();
        ts.step(&[det(14, 10, 8, 8, pure(RED)), det(36, 10, 8, 8, pure(GREEN))], 1)
            .unwrap();
        ts.step(&[det(18, 10, 8, 8, pure(RED)), det(32, 10, 8, 8, pure(GREEN))], 2)
            .unwrap();
        let merged = det(22, 10, 14, 8, [0.5, 0.5, 0.0]);
        let r = ts.step(std::slice::from_ref(&merged), 3).unwrap();
        assert_eq!(
            r.merges,
            vec![MergeEvent {
                tracks: vec![1, 2],
                detection: 0
            }]
        );
        for t in ts.tracks() {
            assert_eq!(t.state, TrackState::Occluded);
            assert_eq!(t.group, Some(1));
        }
        assert_eq!(ts.get(1).unwrap().ref_hist_upper.bins, pure(RED).to_vec());

        for f in 4..7 {
            let r = ts.step(std::slice::from_ref(&merged), f).unwrap();
            assert_eq!(r.groups.len(), 1);
            assert!(r.merges.is_empty() && r.splits.is_empty());
        }
        // green emerges on the left, red on the right
        let r = ts
            .step(&[det(18, 10, 8, 8, [0.1, 0.9, 0.0]), det(34, 10, 8, 8, [0.8, 0.2, 0.0])], 7)
            .unwrap();
        assert_eq!(
            r.splits,
            vec![SplitEvent {
                tracks: vec![1, 2],
                detections: vec![0, 1]
            }]
        );
        assert_eq!(r.matches, vec![(1, 1), (2, 0)]);
        assert!(r.births.is_empty());
        for t in ts.tracks() {
            assert_eq!(t.state, TrackState::Active);
            assert_eq!(t.group, None);
        }
        // occluded frames add no trajectory points
        assert_eq!(
            ts.get(1).unwrap().trajectory.iter().map(|p| p.frame).collect::<Vec<_>>(),
            vec![0, 1, 2, 7]
        );
    }

    #[test]
    fn three_way_group_split_into_two_keeps_leftover_occluded() {
        let mut ts = set();
        ts.step(
            &[
                det(0, 10, 6, 6, pure(RED)),
                det(12, 10, 6, 6, pure(GREEN)),
                det(24, 10, 6, 6, pure(BLUE)),
            ],
            0,
        )
        .unwrap();
        let blob = det(2, 10, 26, 6, [0.34, 0.33, 0.33]);
        let r = ts.step(std::slice::from_ref(&blob), 1).unwrap();
        assert_eq!(r.merges[0].tracks, vec![1, 2, 3]);
        let r = ts
            .step(&[det(0, 10, 6, 6, pure(RED)), det(14, 10, 16, 6, [0.0, 0.5, 0.5])], 2)
            .unwrap();
        assert_eq!(r.splits.len(), 1);
        assert_eq!(r.matches, vec![(1, 0)]);
        assert_eq!(r.groups, vec![OcclusionGroup { tracks: vec![2, 3], detection: 1 }]);
        assert_eq!(ts.get(3).unwrap().state, TrackState::Occluded);
    }

    #[test]
    fn graph_mismatch_and_frame_order() {
        let mut ts = set();
        let g = build_graph(&[Point::new(0.0, 0.0)], &[], 10.0);
        assert!(matches!(
            ts.resolve(&g, &[], 0),
            Err(AssociationError::GraphMismatch { .. })
        ));
        ts.step(&[], 3).unwrap();
        assert!(ts.step(&[], 3).is_err());
        assert!(TrackSet::new(AssociationParams {
            lambda: 0.0,
            ..Default::default()
        })
        .is_err());
    }
}
