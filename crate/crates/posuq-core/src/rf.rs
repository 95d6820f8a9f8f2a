//! Random-forest regression from the ToA vector to 2D position, plus the
//! KNN baseline used by the CNK uncertainty measure.
//!
//! Trees are multi-output (one tree predicts both coordinates) and split
//! by summed per-coordinate variance reduction. Split candidates are
//! midpoints between consecutive sorted unique feature values.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::geo::Point2;
use crate::radiosim::MeasurementSet;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        mean_position: Point2,
    },
}

impl TreeNode {
    pub fn predict(&self, features: &[f64]) -> Point2 {
        match self {
            TreeNode::Leaf { mean_position } => *mean_position,
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            } => {
                if features[*feature_index] <= *threshold {
                    left.predict(features)
                } else {
                    right.predict(features)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf_size: usize,
    pub features_per_split: usize,
    /// Debug switch: `false` fits every tree on the full sample.
    pub bootstrap: bool,
}

impl RfParams {
    pub fn defaults_for(n_features: usize) -> Self {
        Self {
            n_trees: 200,
            max_depth: 16,
            min_leaf_size: 1,
            features_per_split: n_features.div_ceil(3).max(1),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub params: RfParams,
    pub bootstrap_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub train_features: Vec<Vec<f64>>,
    pub train_positions: Vec<Point2>,
    pub k_neighbors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfError {
    EmptyTrainingSet,
    InvalidInput,
}

impl core::fmt::Display for RfError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RfError::EmptyTrainingSet => write!(f, "empty training set"),
            RfError::InvalidInput => write!(f, "invalid regression input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RfError {}

/// Extract (feature rows, target positions) from a measurement set.
pub fn to_regression_data(set: &MeasurementSet) -> (Vec<Vec<f64>>, Vec<Point2>) {
    (
        set.records.iter().map(|r| r.toa.clone()).collect(),
        set.records.iter().map(|r| r.true_position).collect(),
    )
}

fn mean_position(rows: &[usize], targets: &[Point2]) -> Point2 {
    let n = rows.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &r in rows {
        sx += targets[r].x;
        sy += targets[r].y;
    }
    Point2::new(sx / n, sy / n)
}

/// Summed per-coordinate SSE of a candidate split, via prefix sums over the
/// rows sorted by the feature.
struct SplitScan {
    px: Vec<f64>,
    py: Vec<f64>,
    pxx: Vec<f64>,
    pyy: Vec<f64>,
}

impl SplitScan {
    fn new(sorted_rows: &[usize], targets: &[Point2]) -> Self {
        let n = sorted_rows.len();
        let mut px = Vec::with_capacity(n + 1);
        let mut py = Vec::with_capacity(n + 1);
        let mut pxx = Vec::with_capacity(n + 1);
        let mut pyy = Vec::with_capacity(n + 1);
        px.push(0.0);
        py.push(0.0);
        pxx.push(0.0);
        pyy.push(0.0);
        for &r in sorted_rows {
            let t = targets[r];
            px.push(px.last().unwrap() + t.x);
            py.push(py.last().unwrap() + t.y);
            pxx.push(pxx.last().unwrap() + t.x * t.x);
            pyy.push(pyy.last().unwrap() + t.y * t.y);
        }
        Self { px, py, pxx, pyy }
    }

    /// SSE of rows [a, b) around their own mean, x plus y.
    fn sse(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let sx = self.px[b] - self.px[a];
        let sy = self.py[b] - self.py[a];
        let sxx = self.pxx[b] - self.pxx[a];
        let syy = self.pyy[b] - self.pyy[a];
        (sxx - sx * sx / n) + (syy - sy * sy / n)
    }
}

fn best_split_on_feature(
    feature: usize,
    rows: &[usize],
    features: &[Vec<f64>],
    targets: &[Point2],
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| {
        features[a][feature]
            .partial_cmp(&features[b][feature])
            .expect("finite features")
            .then(a.cmp(&b))
    });
    let scan = SplitScan::new(&order, targets);
    let n = order.len();
    let mut best: Option<(f64, f64)> = None;
    for cut in 1..n {
        let lo = features[order[cut - 1]][feature];
        let hi = features[order[cut]][feature];
        if lo == hi {
            continue;
        }
        if cut < min_leaf || n - cut < min_leaf {
            continue;
        }
        let cost = scan.sse(0, cut) + scan.sse(cut, n);
        let threshold = 0.5 * (lo + hi);
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, threshold));
        }
    }
    best
}

fn sample_features(n_features: usize, count: usize, rng: &mut impl RngCore) -> Vec<usize> {
    if count >= n_features {
        return (0..n_features).collect();
    }
    // partial Fisher-Yates, then ascending for a deterministic scan order
    let mut all: Vec<usize> = (0..n_features).collect();
    for i in 0..count {
        let j = i + rng::index(rng, n_features - i);
        all.swap(i, j);
    }
    let mut picked = all[..count].to_vec();
    picked.sort_unstable();
    picked
}

fn grow(
    rows: Vec<usize>,
    features: &[Vec<f64>],
    targets: &[Point2],
    params: &RfParams,
    depth: usize,
    rng: &mut impl RngCore,
) -> TreeNode {
    let leaf = |rows: &[usize]| TreeNode::Leaf {
        mean_position: mean_position(rows, targets),
    };
    if depth >= params.max_depth || rows.len() <= params.min_leaf_size {
        return leaf(&rows);
    }
    let n_features = features[0].len();
    let candidates = sample_features(n_features, params.features_per_split, rng);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in candidates {
        if let Some((cost, thr)) =
            best_split_on_feature(f, &rows, features, targets, params.min_leaf_size.max(1))
        {
            if best.map_or(true, |(c, _, _)| cost < c) {
                best = Some((cost, f, thr));
            }
        }
    }
    let Some((cost, feature_index, threshold)) = best else {
        return leaf(&rows);
    };
    // No split helps if the node is already pure.
    let scan_all = {
        let scan = SplitScan::new(&rows, targets);
        scan.sse(0, rows.len())
    };
    if !(cost < scan_all) {
        return leaf(&rows);
    }
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| features[r][feature_index] <= threshold);
    if left_rows.is_empty() || right_rows.is_empty() {
        return leaf(&rows);
    }
    TreeNode::Internal {
        feature_index,
        threshold,
        left: Box::new(grow(left_rows, features, targets, params, depth + 1, rng)),
        right: Box::new(grow(right_rows, features, targets, params, depth + 1, rng)),
    }
}

/// Fit one regression tree on the given sample rows.
pub fn fit_tree(
    rows: &[usize],
    features: &[Vec<f64>],
    targets: &[Point2],
    params: &RfParams,
    rng: &mut impl RngCore,
) -> Result<TreeNode, RfError> {
    if rows.is_empty() || features.is_empty() || features.len() != targets.len() {
        return Err(RfError::EmptyTrainingSet);
    }
    Ok(grow(rows.to_vec(), features, targets, params, 0, rng))
}

/// Train a forest: `params.n_trees` trees, each on an M-sized bootstrap
/// resample, with per-tree RNG streams derived from (seed, tree index).
pub fn train_rf(
    features: &[Vec<f64>],
    targets: &[Point2],
    params: &RfParams,
    seed: u64,
) -> Result<RandomForestModel, RfError> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(RfError::EmptyTrainingSet);
    }
    let m = features.len();
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut tree_rng = rng::stream(seed, "rf-tree", t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..m).map(|_| rng::index(&mut tree_rng, m)).collect()
            } else {
                (0..m).collect()
            };
            fit_tree(&rows, features, targets, params, &mut tree_rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RandomForestModel {
        trees,
        params: *params,
        bootstrap_seed: seed,
    })
}

/// Ensemble prediction: the mean of the per-tree leaf outputs, plus the
/// per-tree outputs themselves (for the variance-based uncertainty).
pub fn predict_rf(model: &RandomForestModel, features: &[f64]) -> (Point2, Vec<Point2>) {
    let per_tree: Vec<Point2> = model.trees.iter().map(|t| t.predict(features)).collect();
    let n = per_tree.len() as f64;
    let mean = Point2::new(
        per_tree.iter().map(|p| p.x).sum::<f64>() / n,
        per_tree.iter().map(|p| p.y).sum::<f64>() / n,
    );
    (mean, per_tree)
}

impl KnnModel {
    pub fn new(
        train_features: Vec<Vec<f64>>,
        train_positions: Vec<Point2>,
        k_neighbors: usize,
    ) -> Result<Self, RfError> {
        if train_features.is_empty()
            || train_features.len() != train_positions.len()
            || k_neighbors == 0
            || k_neighbors > train_features.len()
        {
            return Err(RfError::InvalidInput);
        }
        Ok(Self {
            train_features,
            train_positions,
            k_neighbors,
        })
    }
}

/// Mean position of the k nearest training rows (Euclidean over the ToA
/// vector), ties broken by lower row index.
pub fn predict_knn(model: &KnnModel, features: &[f64]) -> Point2 {
    let mut scored: Vec<(f64, usize)> = model
        .train_features
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let d2: f64 = row
                .iter()
                .zip(features)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    let k = model.k_neighbors;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(_, i) in &scored[..k] {
        sx += model.train_positions[i].x;
        sy += model.train_positions[i].y;
    }
    Point2::new(sx / k as f64, sy / k as f64)
}

/// 5-fold cross-validation over a (n_trees, max_depth) grid; picks the
/// combination with the lowest mean held-out position error (grid order
/// breaks ties).
pub fn cv_select_params(
    features: &[Vec<f64>],
    targets: &[Point2],
    seed: u64,
) -> Result<RfParams, RfError> {
    const TREES: [usize; 3] = [50, 100, 200];
    const DEPTHS: [usize; 3] = [8, 12, 16];
    const FOLDS: usize = 5;
    let m = features.len();
    if m < FOLDS {
        return Err(RfError::EmptyTrainingSet);
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut fold_rng = rng::stream(seed, "rf-cv", 0);
    for i in (1..m).rev() {
        let j = rng::index(&mut fold_rng, i + 1);
        order.swap(i, j);
    }
    let n_features = features[0].len();
    let mut best: Option<(f64, RfParams)> = None;
    for &n_trees in &TREES {
        for &max_depth in &DEPTHS {
            let params = RfParams {
                n_trees,
                max_depth,
                ..RfParams::defaults_for(n_features)
            };
            let mut err_sum = 0.0;
            let mut err_count = 0usize;
            for fold in 0..FOLDS {
                let held: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| pos % FOLDS == fold)
                    .map(|(_, &i)| i)
                    .collect();
                let kept: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| pos % FOLDS != fold)
                    .map(|(_, &i)| i)
                    .collect();
                let tf: Vec<Vec<f64>> = kept.iter().map(|&i| features[i].clone()).collect();
                let tt: Vec<Point2> = kept.iter().map(|&i| targets[i]).collect();
                let model = train_rf(&tf, &tt, &params, rng::derive_seed(seed, "rf-cv-fit", fold as u64))?;
                for &i in &held {
                    let (p, _) = predict_rf(&model, &features[i]);
                    err_sum += p.distance(&targets[i]);
                    err_count += 1;
                }
            }
            let mean_err = err_sum / err_count as f64;
            if best.map_or(true, |(e, _)| mean_err < e) {
                best = Some((mean_err, params));
            }
        }
    }
    Ok(best.expect("non-empty grid").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rows(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    fn full_params(n_features: usize) -> RfParams {
        RfParams {
            n_trees: 1,
            max_depth: 32,
            min_leaf_size: 1,
            features_per_split: n_features,
            bootstrap: false,
        }
    }

    #[test]
    fn identical_targets_give_single_leaf() {
        let features = vec![vec![1.0], vec![2.0], vec![3.0]];
        let targets = vec![Point2::new(5.0, 7.0); 3];
        let mut r = rng::stream(0, "t", 0);
        let tree = fit_tree(&rows(3), &features, &targets, &full_params(1), &mut r).unwrap();
        assert_eq!(
            tree,
            TreeNode::Leaf {
                mean_position: Point2::new(5.0, 7.0)
            }
        );
    }

    #[test]
    fn two_clusters_split_between_them() {
        let features = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0], vec![5.1], vec![5.2]];
        let targets = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(10.0, 10.0),
            Point2::new(10.0, 10.0),
        ];
        let mut r = rng::stream(0, "t", 1);
        let tree = fit_tree(&rows(6), &features, &targets, &full_params(1), &mut r).unwrap();
        match &tree {
            TreeNode::Internal { threshold, .. } => {
                assert!(*threshold > 0.2 && *threshold < 5.0, "threshold {threshold}");
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn depth_zero_is_global_mean() {
        let features = vec![vec![0.0], vec![1.0]];
        let targets = vec![Point2::new(0.0, 0.0), Point2::new(2.0, 4.0)];
        let params = RfParams {
            max_depth: 0,
            ..full_params(1)
        };
        let mut r = rng::stream(0, "t", 2);
        let tree = fit_tree(&rows(2), &features, &targets, &params, &mut r).unwrap();
        assert_eq!(
            tree,
            TreeNode::Leaf {
                mean_position: Point2::new(1.0, 2.0)
            }
        );
    }

    #[test]
    fn perfect_fit_without_bootstrap() {
        let mut r = rng::stream(4, "t", 3);
        let features: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..3).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..15)
            .map(|_| Point2::new(rng::uniform(&mut r) * 100.0, rng::uniform(&mut r) * 50.0))
            .collect();
        let model = train_rf(&features, &targets, &full_params(3), 1).unwrap();
        for (f, t) in features.iter().zip(&targets) {
            let (p, _) = predict_rf(&model, f);
            assert_eq!(p, *t);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut r = rng::stream(5, "t", 4);
        let features: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..40)
            .map(|_| Point2::new(rng::uniform(&mut r) * 10.0, rng::uniform(&mut r) * 10.0))
            .collect();
        let params = RfParams {
            n_trees: 10,
            ..RfParams::defaults_for(4)
        };
        let a = train_rf(&features, &targets, &params, 99).unwrap();
        let b = train_rf(&features, &targets, &params, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forest_mean_of_two_trees() {
        let leaf = |x, y| TreeNode::Leaf {
            mean_position: Point2::new(x, y),
        };
        let model = RandomForestModel {
            trees: vec![leaf(0.0, 0.0), leaf(2.0, 4.0)],
            params: RfParams::defaults_for(1),
            bootstrap_seed: 0,
        };
        let (p, per_tree) = predict_rf(&model, &[0.0]);
        assert_eq!(p, Point2::new(1.0, 2.0));
        assert_eq!(per_tree.len(), 2);
    }

    #[test]
    fn forest_mean_matches_independent_tree_predictions() {
        let mut r = rng::stream(6, "t", 5);
        let features: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..30)
            .map(|_| Point2::new(rng::uniform(&mut r) * 10.0, rng::uniform(&mut r) * 10.0))
            .collect();
        let params = RfParams {
            n_trees: 7,
            ..RfParams::defaults_for(3)
        };
        let model = train_rf(&features, &targets, &params, 3).unwrap();
        let q = [0.4, 0.2, 0.9];
        let (p, per_tree) = predict_rf(&model, &q);
        let mx = per_tree.iter().map(|t| t.x).sum::<f64>() / 7.0;
        let my = per_tree.iter().map(|t| t.y).sum::<f64>() / 7.0;
        assert_eq!(p, Point2::new(mx, my));
        for (tree, pt) in model.trees.iter().zip(&per_tree) {
            assert_eq!(tree.predict(&q), *pt);
        }
    }

    #[test]
    fn leaf_means_inside_target_bounding_box() {
        let mut r = rng::stream(7, "t", 6);
        let features: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..2).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..50)
            .map(|_| Point2::new(rng::uniform(&mut r) * 100.0, rng::uniform(&mut r) * 50.0))
            .collect();
        let model = train_rf(&features, &targets, &RfParams::defaults_for(2), 5).unwrap();
        let (min_x, max_x) = (0.0, 100.0);
        let (min_y, max_y) = (0.0, 50.0);
        fn walk(node: &TreeNode, f: &mut impl FnMut(&Point2)) {
            match node {
                TreeNode::Leaf { mean_position } => f(mean_position),
                TreeNode::Internal { left, right, .. } => {
                    walk(left, f);
                    walk(right, f);
                }
            }
        }
        for tree in &model.trees {
            walk(tree, &mut |p| {
                assert!(p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y);
            });
        }
    }

    #[test]
    fn row_permutation_invariance_without_bootstrap() {
        let mut r = rng::stream(8, "t", 7);
        let features: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..20)
            .map(|_| Point2::new(rng::uniform(&mut r) * 10.0, rng::uniform(&mut r) * 10.0))
            .collect();
        let perm: Vec<usize> = (0..20).rev().collect();
        let pf: Vec<Vec<f64>> = perm.iter().map(|&i| features[i].clone()).collect();
        let pt: Vec<Point2> = perm.iter().map(|&i| targets[i]).collect();
        let a = train_rf(&features, &targets, &full_params(2), 1).unwrap();
        let b = train_rf(&pf, &pt, &full_params(2), 1).unwrap();
        for _ in 0..50 {
            let q = [rng::uniform(&mut r), rng::uniform(&mut r)];
            let (pa, _) = predict_rf(&a, &q);
            let (pb, _) = predict_rf(&b, &q);
            assert!((pa.x - pb.x).abs() < 1e-12 && (pa.y - pb.y).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_exact_row_with_k1() {
        let features = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let positions = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        let model = KnnModel::new(features.clone(), positions.clone(), 1).unwrap();
        assert_eq!(predict_knn(&model, &features[1]), positions[1]);
    }

    #[test]
    fn knn_all_rows_is_global_mean() {
        let features = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let positions = vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 8.0),
            Point2::new(4.0, 8.0),
        ];
        let model = KnnModel::new(features, positions, 4).unwrap();
        assert_eq!(predict_knn(&model, &[1.5]), Point2::new(2.0, 4.0));
    }

    #[test]
    fn knn_matches_brute_force_scan() {
        let mut r = rng::stream(9, "t", 8);
        let features: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let positions: Vec<Point2> = (0..10)
            .map(|_| Point2::new(rng::uniform(&mut r) * 10.0, rng::uniform(&mut r) * 10.0))
            .collect();
        let model = KnnModel::new(features.clone(), positions.clone(), 3).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng::uniform(&mut r)).collect();
            // brute force: full sort of (distance, index)
            let mut all: Vec<(f64, usize)> = features
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let d: f64 = row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, i)
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect = Point2::new(
                all[..3].iter().map(|&(_, i)| positions[i].x).sum::<f64>() / 3.0,
                all[..3].iter().map(|&(_, i)| positions[i].y).sum::<f64>() / 3.0,
            );
            assert_eq!(predict_knn(&model, &q), expect);
        }
    }

    #[test]
    fn bootstrap_rows_valid() {
        let m = 37;
        let mut tree_rng = rng::stream(3, "rf-tree", 0);
        let rows: Vec<usize> = (0..m).map(|_| rng::index(&mut tree_rng, m)).collect();
        assert_eq!(rows.len(), m);
        assert!(rows.iter().all(|&r| r < m));
    }
}
