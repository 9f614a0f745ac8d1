//! Target labeling at a forecast offset, per-image class balancing, and
//! margin-separated contiguous time folds.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix};
use crate::raster::{GridGeometry, LightningRaster, RasterError, Timestamp, WINDOW_MINUTES};

/// Longest supported forecast offset.
pub const MAX_OFFSET_MINUTES: i64 = 300;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("bad offset: {0}")]
    BadOffset(String),
    #[error("frame time {0} is not aligned to the 15-minute grid")]
    UnalignedBase(Timestamp),
    #[error("no lightning data covers the window starting {window_start}")]
    MissingRaster { window_start: Timestamp },
    #[error("geometry differs from the store's")]
    GeometryMismatch,
    #[error("bad fold configuration: {0}")]
    BadConfig(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

// ---------------------------------------------------------------------------
// Raster store
// ---------------------------------------------------------------------------

/// Window-indexed lightning rasters with an explicit coverage interval.
/// A covered window with no raster means "no strikes recorded": labels are
/// all negative. A window outside coverage is unknown and labeling fails.
pub struct RasterStore {
    geometry: GridGeometry,
    coverage_start: Timestamp,
    coverage_end: Timestamp,
    rasters: HashMap<i64, LightningRaster>,
}

impl RasterStore {
    /// Coverage is `[start, end)` in window starts.
    pub fn new(
        geometry: GridGeometry,
        coverage_start: Timestamp,
        coverage_end: Timestamp,
    ) -> Result<Self, SamplingError> {
        geometry.validate()?;
        if coverage_end.unix_minutes() < coverage_start.unix_minutes() {
            return Err(SamplingError::BadConfig(format!(
                "coverage ends {coverage_end} before it starts {coverage_start}"
            )));
        }
        Ok(Self { geometry, coverage_start, coverage_end, rasters: HashMap::new() })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn insert(&mut self, raster: LightningRaster) -> Result<(), SamplingError> {
        if raster.geometry != self.geometry {
            return Err(SamplingError::GeometryMismatch);
        }
        if !raster.window_start.is_frame_aligned() {
            return Err(SamplingError::UnalignedBase(raster.window_start));
        }
        self.rasters.insert(raster.window_start.unix_minutes(), raster);
        Ok(())
    }

    pub fn covers(&self, window_start: Timestamp) -> bool {
        let m = window_start.unix_minutes();
        m >= self.coverage_start.unix_minutes() && m < self.coverage_end.unix_minutes()
    }

    /// `Ok(Some)` = recorded strikes, `Ok(None)` = covered but strike-free,
    /// `Err` = outside coverage.
    pub fn window(&self, window_start: Timestamp) -> Result<Option<&LightningRaster>, SamplingError> {
        if !self.covers(window_start) {
            return Err(SamplingError::MissingRaster { window_start });
        }
        Ok(self.rasters.get(&window_start.unix_minutes()))
    }
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

/// Binary per-tile target for one frame instant at one forecast offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFrame {
    pub geometry: GridGeometry,
    /// The frame instant the features come from.
    pub base_time: Timestamp,
    pub offset_minutes: i64,
    labels: Vec<bool>,
}

impl LabelFrame {
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.labels[y as usize * self.geometry.width as usize + x as usize]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positive_tiles(&self) -> Vec<(u32, u32)> {
        self.tiles_where(true)
    }

    pub fn negative_tiles(&self) -> Vec<(u32, u32)> {
        self.tiles_where(false)
    }

    fn tiles_where(&self, value: bool) -> Vec<(u32, u32)> {
        let w = self.geometry.width;
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == value)
            .map(|(i, _)| ((i as u32) % w, (i as u32) / w))
            .collect()
    }
}

pub fn validate_offset(offset_minutes: i64) -> Result<(), SamplingError> {
    if offset_minutes % WINDOW_MINUTES != 0 {
        return Err(SamplingError::BadOffset(format!(
            "{offset_minutes} min is not a multiple of {WINDOW_MINUTES}"
        )));
    }
    if !(0..=MAX_OFFSET_MINUTES).contains(&offset_minutes) {
        return Err(SamplingError::BadOffset(format!(
            "{offset_minutes} min is outside 0..={MAX_OFFSET_MINUTES}"
        )));
    }
    Ok(())
}

/// Tile is positive iff at least one strike lands on it inside
/// `[base + offset, base + offset + 15 min)`.
pub fn label_tiles(
    store: &RasterStore,
    base_time: Timestamp,
    offset_minutes: i64,
) -> Result<LabelFrame, SamplingError> {
    validate_offset(offset_minutes)?;
    if !base_time.is_frame_aligned() {
        return Err(SamplingError::UnalignedBase(base_time));
    }
    let window_start = base_time.plus_minutes(offset_minutes);
    let geometry = *store.geometry();
    let labels = match store.window(window_start)? {
        Some(raster) => raster.counts().iter().map(|&c| c >= 1).collect(),
        None => vec![false; geometry.tiles()],
    };
    Ok(LabelFrame { geometry, base_time, offset_minutes, labels })
}

// ---------------------------------------------------------------------------
// Balancing
// ---------------------------------------------------------------------------

/// Per-frame sampling seed; frames can be balanced in parallel and still
/// reproduce exactly.
pub fn frame_seed(dataset_seed: u64, frame_index: u64) -> u64 {
    dataset_seed ^ frame_index
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedSelection {
    /// Selected tiles in row-major order.
    pub tiles: Vec<(u32, u32)>,
    pub n_positive: usize,
    pub n_negative: usize,
    /// True when the frame had more positives than negatives, so classes
    /// could not be equalized.
    pub degenerate: bool,
}

/// All positive tiles plus an equal-count uniform sample (without
/// replacement) of the frame's negatives. Frames with no positives select
/// nothing; frames with more positives than negatives keep every tile.
pub fn balance_per_image(labels: &LabelFrame, rng_seed: u64) -> BalancedSelection {
    let positives = labels.positive_tiles();
    if positives.is_empty() {
        return BalancedSelection { tiles: vec![], n_positive: 0, n_negative: 0, degenerate: false };
    }
    let negatives = labels.negative_tiles();
    let want = positives.len().min(negatives.len());
    let degenerate = positives.len() > negatives.len();

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chosen = rand::seq::index::sample(&mut rng, negatives.len(), want);

    let mut tiles = positives;
    tiles.extend(chosen.iter().map(|i| negatives[i]));
    tiles.sort_unstable_by_key(|&(x, y)| (y, x));
    BalancedSelection { tiles, n_positive: labels.positive_tiles().len(), n_negative: want, degenerate }
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRange {
    /// First frame instant in the fold (inclusive).
    pub start: Timestamp,
    /// Last frame instant in the fold (inclusive).
    pub end: Timestamp,
}

/// Contiguous time folds with enforced gaps. Frames inside a gap belong to
/// no fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub folds: Vec<FoldRange>,
    pub margin_minutes: i64,
    /// Sampling seed the dataset was balanced with; recorded so reruns can
    /// reproduce selections.
    pub seed: u64,
}

impl FoldSpec {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Index of the fold containing `t`, or None for margin-discarded times.
    pub fn fold_of(&self, t: Timestamp) -> Option<usize> {
        let m = t.unix_minutes();
        self.folds.iter().position(|f| {
            m >= f.start.unix_minutes() && m <= f.end.unix_minutes()
        })
    }

    /// Fold ids per timestamp; -1 marks margin-discarded frames.
    pub fn assign(&self, times: &[Timestamp]) -> Vec<i32> {
        times
            .iter()
            .map(|&t| self.fold_of(t).map(|i| i as i32).unwrap_or(-1))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.folds.len() < 2 {
            return Err(SamplingError::BadConfig("need at least 2 folds".into()));
        }
        if self.margin_minutes < 0 {
            return Err(SamplingError::BadConfig("margin must be non-negative".into()));
        }
        for (i, f) in self.folds.iter().enumerate() {
            if f.end.unix_minutes() < f.start.unix_minutes() {
                return Err(SamplingError::BadConfig(format!(
                    "fold {i} ends before it starts"
                )));
            }
            if i > 0 {
                let gap = f.start.unix_minutes() - self.folds[i - 1].end.unix_minutes();
                if gap < self.margin_minutes {
                    return Err(SamplingError::BadConfig(format!(
                        "gap before fold {i} is {gap} min, margin is {} min",
                        self.margin_minutes
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Splits sorted frame instants into `k` contiguous folds of near-equal
/// count, then discards frames within `margin/2` of each boundary midpoint
/// so consecutive folds end up at least `margin` apart.
pub fn make_folds(
    available: &[Timestamp],
    k: usize,
    margin_minutes: i64,
    seed: u64,
) -> Result<FoldSpec, SamplingError> {
    if k < 2 {
        return Err(SamplingError::BadConfig(format!("k must be at least 2, got {k}")));
    }
    if margin_minutes < 0 {
        return Err(SamplingError::BadConfig("margin must be non-negative".into()));
    }
    let mut times: Vec<i64> = available.iter().map(|t| t.unix_minutes()).collect();
    times.sort_unstable();
    times.dedup();
    if times.len() < 2 * k {
        return Err(SamplingError::InsufficientData(format!(
            "{} distinct frame times cannot fill {k} folds",
            times.len()
        )));
    }

    // Near-equal chunk sizes; the remainder goes to the earliest chunks.
    let n = times.len();
    let base = n / k;
    let mut chunks: Vec<&[i64]> = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < n % k);
        chunks.push(&times[at..at + size]);
        at += size;
    }

    let mut folds = Vec::with_capacity(k);
    for (i, chunk) in chunks.iter().enumerate() {
        // Carve the margin out of both ends that face another fold. A frame
        // survives when it is at least margin/2 from the boundary midpoint,
        // so facing folds end up a full margin apart.
        let keep = |m: i64| -> bool {
            let after_prev = i == 0 || {
                let mid2 = chunks[i - 1].last().unwrap() + chunk.first().unwrap();
                2 * m - mid2 >= margin_minutes
            };
            let before_next = i + 1 == k || {
                let mid2 = chunk.last().unwrap() + chunks[i + 1].first().unwrap();
                mid2 - 2 * m >= margin_minutes
            };
            after_prev && before_next
        };
        let kept: Vec<i64> = chunk.iter().copied().filter(|&m| keep(m)).collect();
        let (Some(&first), Some(&last)) = (kept.first(), kept.last()) else {
            return Err(SamplingError::InsufficientData(format!(
                "fold {i} lost all frames to the {margin_minutes}-minute margin"
            )));
        };
        folds.push(FoldRange {
            start: Timestamp::from_unix_minutes(first),
            end: Timestamp::from_unix_minutes(last),
        });
    }

    let spec = FoldSpec { folds, margin_minutes, seed };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Labeled dataset
// ---------------------------------------------------------------------------

/// Feature rows with binary targets and fold assignments (-1 = discarded).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: FeatureMatrix,
    pub labels: Vec<bool>,
    pub folds: Vec<i32>,
}

impl LabeledDataset {
    pub fn new(
        matrix: FeatureMatrix,
        labels: Vec<bool>,
        folds: Vec<i32>,
        k: usize,
    ) -> Result<Self, SamplingError> {
        if labels.len() != matrix.n_rows() || folds.len() != matrix.n_rows() {
            return Err(SamplingError::BadDataset(format!(
                "{} labels / {} fold ids for {} rows",
                labels.len(),
                folds.len(),
                matrix.n_rows()
            )));
        }
        if let Some(&bad) = folds.iter().find(|&&f| f < -1 || f >= k as i32) {
            return Err(SamplingError::BadDataset(format!(
                "fold id {bad} outside -1..{k}"
            )));
        }
        Ok(Self { matrix, labels, folds })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Row indices belonging to fold `f`.
    pub fn rows_in_fold(&self, f: i32) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(_, &x)| x == f)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row indices in any fold except `f` (margin-discarded rows excluded).
    pub fn rows_outside_fold(&self, f: i32) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(_, &x)| x >= 0 && x != f)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoBounds;

    fn geometry(w: u32, h: u32) -> GridGeometry {
        GridGeometry::new(
            w,
            h,
            GeoBounds { lat_min: 46.0, lat_max: 56.0, lon_min: 0.0, lon_max: 10.0 },
        )
        .unwrap()
    }

    fn t(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn store_with(
        g: GridGeometry,
        windows: &[(Timestamp, Vec<u32>)],
    ) -> RasterStore {
        let mut store =
            RasterStore::new(g, t("2017-06-01T00:00:00Z"), t("2017-06-02T00:00:00Z")).unwrap();
        for (ws, counts) in windows {
            store.insert(LightningRaster::new(g, *ws, counts.clone()).unwrap()).unwrap();
        }
        store
    }

    #[test]
    fn labels_all_negative_on_zero_raster_and_on_empty_window() {
        let g = geometry(3, 3);
        let store = store_with(g, &[(t("2017-06-01T13:00:00Z"), vec![0; 9])]);
        let lf = label_tiles(&store, t("2017-06-01T13:00:00Z"), 0).unwrap();
        assert!(lf.labels().iter().all(|&l| !l));
        // Covered window with no raster at all behaves the same.
        let lf = label_tiles(&store, t("2017-06-01T14:00:00Z"), 0).unwrap();
        assert!(lf.labels().iter().all(|&l| !l));
    }

    #[test]
    fn any_count_at_least_one_is_positive() {
        let g = geometry(3, 3);
        let mut counts = vec![0u32; 9];
        counts[4] = 3;
        counts[7] = 1;
        let store = store_with(g, &[(t("2017-06-01T13:00:00Z"), counts)]);
        let lf = label_tiles(&store, t("2017-06-01T13:00:00Z"), 0).unwrap();
        assert!(lf.get(1, 1));
        assert!(lf.get(1, 2));
        assert_eq!(lf.positive_tiles(), vec![(1, 1), (1, 2)]);
        assert_eq!(lf.negative_tiles().len(), 7);
    }

    #[test]
    fn offset_shifts_the_label_window() {
        let g = geometry(2, 2);
        let mut counts = vec![0u32; 4];
        counts[3] = 1;
        // Strikes five hours after the frame instant.
        let store = store_with(g, &[(t("2017-06-01T18:00:00Z"), counts)]);
        let base = t("2017-06-01T13:00:00Z");
        let lf = label_tiles(&store, base, 300).unwrap();
        assert!(lf.get(1, 1));
        assert_eq!(lf.offset_minutes, 300);
        // At offset 0 the same frame sees an empty window.
        let lf = label_tiles(&store, base, 0).unwrap();
        assert!(lf.labels().iter().all(|&l| !l));
    }

    #[test]
    fn offset_validation() {
        let g = geometry(2, 2);
        let store = store_with(g, &[]);
        let base = t("2017-06-01T13:00:00Z");
        assert!(matches!(label_tiles(&store, base, 7), Err(SamplingError::BadOffset(_))));
        assert!(matches!(label_tiles(&store, base, -15), Err(SamplingError::BadOffset(_))));
        assert!(matches!(label_tiles(&store, base, 315), Err(SamplingError::BadOffset(_))));
        assert!(matches!(
            label_tiles(&store, t("2017-06-01T13:07:00Z"), 0),
            Err(SamplingError::UnalignedBase(_))
        ));
    }

    #[test]
    fn uncovered_window_is_missing_not_negative() {
        let g = geometry(2, 2);
        let store = store_with(g, &[]);
        // 21:00 + 5 h lands past the coverage end.
        let err = label_tiles(&store, t("2017-06-01T21:00:00Z"), 300);
        assert!(matches!(err, Err(SamplingError::MissingRaster { .. })));
    }

    fn label_frame(g: GridGeometry, positives: &[(u32, u32)]) -> LabelFrame {
        let mut labels = vec![false; g.tiles()];
        for &(x, y) in positives {
            labels[y as usize * g.width as usize + x as usize] = true;
        }
        LabelFrame { geometry: g, base_time: t("2017-06-01T13:00:00Z"), offset_minutes: 0, labels }
    }

    #[test]
    fn balance_picks_equal_classes() {
        let g = geometry(40, 30);
        let positives = [(0, 0), (5, 7), (12, 3), (39, 29), (20, 15)];
        let lf = label_frame(g, &positives);
        let sel = balance_per_image(&lf, 42);
        assert_eq!(sel.tiles.len(), 10);
        assert_eq!(sel.n_positive, 5);
        assert_eq!(sel.n_negative, 5);
        assert!(!sel.degenerate);
        for p in positives {
            assert!(sel.tiles.contains(&p), "positive {p:?} missing");
        }
        // Without replacement: all distinct.
        let mut dedup = sel.tiles.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), sel.tiles.len());
    }

    #[test]
    fn balance_empty_when_no_positives() {
        let g = geometry(10, 10);
        let sel = balance_per_image(&label_frame(g, &[]), 1);
        assert!(sel.tiles.is_empty());
    }

    #[test]
    fn balance_degenerate_frame_keeps_everything() {
        let g = geometry(3, 3);
        let positives: Vec<(u32, u32)> =
            (0..3).flat_map(|y| (0..3).map(move |x| (x, y))).take(7).collect();
        let sel = balance_per_image(&label_frame(g, &positives), 9);
        assert!(sel.degenerate);
        assert_eq!(sel.tiles.len(), 9);
        assert_eq!(sel.n_positive, 7);
        assert_eq!(sel.n_negative, 2);
    }

    #[test]
    fn balance_exhaustive_two_by_two() {
        let g = geometry(2, 2);
        for mask in 0u32..16 {
            let positives: Vec<(u32, u32)> = (0..4)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| (i % 2, i / 2))
                .collect();
            let p = positives.len();
            let lf = label_frame(g, &positives);
            let sel = balance_per_image(&lf, mask as u64);
            if p == 0 {
                assert!(sel.tiles.is_empty());
                continue;
            }
            let n = 4 - p;
            assert_eq!(sel.degenerate, p > n, "mask {mask}");
            assert_eq!(sel.tiles.len(), p + p.min(n), "mask {mask}");
            for pos in &positives {
                assert!(sel.tiles.contains(pos));
            }
        }
    }

    #[test]
    fn balance_is_deterministic_per_seed() {
        let g = geometry(30, 30);
        let lf = label_frame(g, &[(1, 1), (2, 2), (3, 3), (4, 4)]);
        let a = balance_per_image(&lf, frame_seed(7, 3));
        let b = balance_per_image(&lf, frame_seed(7, 3));
        assert_eq!(a, b);
        let c = balance_per_image(&lf, frame_seed(8, 3));
        assert_ne!(a.tiles, c.tiles);
    }

    fn spaced_times(n: usize, step_min: i64) -> Vec<Timestamp> {
        let start = t("2017-06-01T00:00:00Z");
        (0..n).map(|i| start.plus_minutes(i as i64 * step_min)).collect()
    }

    #[test]
    fn two_folds_no_margin_split_evenly() {
        let times = spaced_times(10, 15);
        let spec = make_folds(&times, 2, 0, 0).unwrap();
        assert_eq!(spec.k(), 2);
        let assign = spec.assign(&times);
        assert_eq!(assign, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn margin_carves_a_real_gap() {
        // Four days of 15-minute frames, 12-hour margin.
        let times = spaced_times(4 * 96, 15);
        let spec = make_folds(&times, 4, 720, 99).unwrap();
        assert_eq!(spec.seed, 99);
        spec.validate().unwrap();
        for w in spec.folds.windows(2) {
            let gap = w[1].start.unix_minutes() - w[0].end.unix_minutes();
            assert!(gap >= 720, "gap {gap}");
        }
        let assign = spec.assign(&times);
        // Each boundary discards the open 720-minute interval around its
        // midpoint: frames at midpoint +- {352.5, ..., 7.5} = 48 of them.
        let dropped = assign.iter().filter(|&&f| f == -1).count();
        assert_eq!(dropped, 3 * 48);
        // Each time belongs to at most one fold, in time order.
        let mut last = -1;
        for f in assign.iter().filter(|&&f| f >= 0) {
            assert!(*f >= last);
            last = *f;
        }
    }

    #[test]
    fn near_equal_chunks_before_carving() {
        let times = spaced_times(103, 15);
        let spec = make_folds(&times, 4, 0, 0).unwrap();
        let assign = spec.assign(&times);
        let mut counts = [0usize; 4];
        for f in assign {
            counts[f as usize] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 103);
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn fold_failures() {
        assert!(matches!(
            make_folds(&spaced_times(3, 15), 4, 0, 0),
            Err(SamplingError::InsufficientData(_))
        ));
        assert!(matches!(
            make_folds(&spaced_times(10, 15), 1, 0, 0),
            Err(SamplingError::BadConfig(_))
        ));
        // Margin wider than a whole chunk swallows it.
        assert!(matches!(
            make_folds(&spaced_times(12, 15), 4, 720, 0),
            Err(SamplingError::InsufficientData(_))
        ));
    }

    #[test]
    fn fold_spec_json_shape() {
        let times = spaced_times(40, 15);
        let spec = make_folds(&times, 2, 60, 5).unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        assert!(json.get("folds").unwrap().is_array());
        assert_eq!(json["margin_minutes"], 60);
        assert_eq!(json["seed"], 5);
        assert!(json["folds"][0]["start"].is_string());
        let back: FoldSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn labeled_dataset_validation() {
        let matrix = FeatureMatrix::from_rows(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let ds =
            LabeledDataset::new(matrix.clone(), vec![true, false], vec![0, -1], 2).unwrap();
        assert_eq!(ds.rows_in_fold(0), vec![0]);
        assert_eq!(ds.rows_outside_fold(0), Vec::<usize>::new());
        assert!(LabeledDataset::new(matrix.clone(), vec![true], vec![0, 1], 2).is_err());
        assert!(LabeledDataset::new(matrix, vec![true, false], vec![0, 2], 2).is_err());
    }
}
