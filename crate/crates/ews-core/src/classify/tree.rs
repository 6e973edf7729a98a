//! Classification trees (CART) and random forests.
//!
//! Trees split on Gini impurity with a minimum leaf size, growing until
//! pure. The single-tree method is then pruned by cost-complexity with the
//! penalty chosen by an internal 10-fold cross-validation. Forest trees
//! stay unpruned; each is grown on a bootstrap draw with a random subset of
//! `mtry` features tried at every split, and the forest probability is the
//! mean of the per-tree leaf probabilities.
//!
//! Bootstrap duplicates are carried as integer row weights, and split
//! search walks per-feature presorted index segments that are re-partitioned
//! in place, so growing stays close to O(n log n) per tree.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{
    check_both_classes, stratified_assignment, FamilyFit, FeatureMatrix, Model,
};
use crate::error::Result;
use crate::rng::{derive, rng_from};

const NO_CHILD: i32 = -1;
const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Node {
    feature: u32,
    threshold: f64,
    left: i32,
    right: i32,
    /// Weighted share of class 1 in the node.
    prob: f64,
    /// Weighted misclassification count when predicting the majority.
    miss: f64,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf() {
                return node.prob;
            }
            idx = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    #[cfg(test)]
    fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Training data in column-major layout plus per-row integer weights.
struct GrowData<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [bool],
    weights: &'a [u32],
    min_leaf: f64,
    mtry: usize,
}

struct Grower<'a> {
    data: GrowData<'a>,
    /// Per-feature row indices, sorted by feature value; all features are
    /// partitioned identically as nodes split, so each node owns one
    /// contiguous segment in every array.
    sorted: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    feature_pool: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> Grower<'a> {
    fn new(data: GrowData<'a>) -> Self {
        let m = data.labels.len();
        let g = data.columns.len();
        let mut sorted = Vec::with_capacity(g);
        for col in data.columns {
            let mut idx: Vec<u32> = (0..m as u32).collect();
            idx.sort_unstable_by(|&a, &b| {
                col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b))
            });
            sorted.push(idx);
        }
        Grower {
            data,
            sorted,
            scratch: vec![0; m],
            feature_pool: (0..g).collect(),
            nodes: Vec::new(),
        }
    }

    fn node_stats(&self, lo: usize, hi: usize) -> (f64, f64) {
        let mut w = 0.0;
        let mut pos = 0.0;
        for &row in &self.sorted[0][lo..hi] {
            let wt = self.data.weights[row as usize] as f64;
            w += wt;
            if self.data.labels[row as usize] {
                pos += wt;
            }
        }
        (w, pos)
    }

    fn grow(&mut self, lo: usize, hi: usize, rng: &mut ChaCha8Rng) -> i32 {
        let (w, pos) = self.node_stats(lo, hi);
        let prob = pos / w;
        let miss = pos.min(w - pos);
        let idx = self.nodes.len() as i32;
        self.nodes.push(Node {
            feature: 0,
            threshold: 0.0,
            left: NO_CHILD,
            right: NO_CHILD,
            prob,
            miss,
        });
        if pos == 0.0 || pos == w || w < 2.0 * self.data.min_leaf {
            return idx;
        }

        let g = self.data.columns.len();
        let tried = if self.data.mtry < g {
            for i in 0..self.data.mtry {
                let j = rng.random_range(i..g);
                self.feature_pool.swap(i, j);
            }
            self.feature_pool[..self.data.mtry].to_vec()
        } else {
            self.feature_pool.clone()
        };

        let parent_gini = 2.0 * pos * (w - pos) / w;
        let mut best: Option<(usize, f64)> = None;
        let mut best_improvement = MIN_IMPROVEMENT;
        for &f in &tried {
            let col = &self.data.columns[f];
            let seg = &self.sorted[f][lo..hi];
            let mut w_l = 0.0;
            let mut pos_l = 0.0;
            for i in 0..seg.len() - 1 {
                let row = seg[i] as usize;
                let wt = self.data.weights[row] as f64;
                w_l += wt;
                if self.data.labels[row] {
                    pos_l += wt;
                }
                let here = col[row];
                let next = col[seg[i + 1] as usize];
                if next > here {
                    let w_r = w - w_l;
                    if w_l >= self.data.min_leaf && w_r >= self.data.min_leaf {
                        let pos_r = pos - pos_l;
                        let children_gini =
                            2.0 * pos_l * (w_l - pos_l) / w_l + 2.0 * pos_r * (w_r - pos_r) / w_r;
                        let improvement = parent_gini - children_gini;
                        if improvement > best_improvement {
                            best_improvement = improvement;
                            best = Some((f, here + (next - here) / 2.0));
                        }
                    }
                }
            }
        }
        let Some((feature, threshold)) = best else {
            return idx;
        };

        // Stable partition of every feature's segment: rows going left keep
        // their sorted order, as do rows going right.
        let split_col = &self.data.columns[feature];
        let mut mid = lo;
        for f in 0..g {
            let mut left_end = lo;
            let mut spill = 0;
            for i in lo..hi {
                let row = self.sorted[f][i];
                if split_col[row as usize] <= threshold {
                    self.sorted[f][left_end] = row;
                    left_end += 1;
                } else {
                    self.scratch[spill] = row;
                    spill += 1;
                }
            }
            self.sorted[f][left_end..hi].copy_from_slice(&self.scratch[..spill]);
            mid = left_end;
        }

        let left = self.grow(lo, mid, rng);
        let right = self.grow(mid, hi, rng);
        self.nodes[idx as usize].feature = feature as u32;
        self.nodes[idx as usize].threshold = threshold;
        self.nodes[idx as usize].left = left;
        self.nodes[idx as usize].right = right;
        idx
    }
}

/// Grows one tree. `mtry == columns.len()` means all features are tried at
/// every split and the RNG is only consumed when `mtry` is smaller.
pub(crate) fn grow_tree(
    columns: &[Vec<f64>],
    labels: &[bool],
    weights: &[u32],
    min_leaf: u32,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut grower = Grower::new(GrowData {
        columns,
        labels,
        weights,
        min_leaf: min_leaf as f64,
        mtry,
    });
    let m = labels.len();
    grower.grow(0, m, rng);
    Tree { nodes: grower.nodes }
}

/// For every node, decides whether the optimal alpha-pruned tree collapses
/// it, by the bottom-up dynamic program: collapse when the subtree's
/// misclassification saving no longer pays for its extra leaves.
fn collapse_set(tree: &Tree, alpha: f64) -> Vec<bool> {
    let n = tree.nodes.len();
    let mut collapsed = vec![false; n];
    let mut r_pruned = vec![0.0; n];
    let mut leaves = vec![0u32; n];
    for i in (0..n).rev() {
        let node = &tree.nodes[i];
        if node.is_leaf() {
            r_pruned[i] = node.miss;
            leaves[i] = 1;
        } else {
            let (l, r) = (node.left as usize, node.right as usize);
            let sub_miss = r_pruned[l] + r_pruned[r];
            let sub_leaves = leaves[l] + leaves[r];
            if node.miss - sub_miss <= alpha * (sub_leaves as f64 - 1.0) {
                collapsed[i] = true;
                r_pruned[i] = node.miss;
                leaves[i] = 1;
            } else {
                r_pruned[i] = sub_miss;
                leaves[i] = sub_leaves;
            }
        }
    }
    collapsed
}

fn predict_collapsed(tree: &Tree, collapsed: &[bool], x: &[f64]) -> f64 {
    let mut idx = 0usize;
    loop {
        let node = &tree.nodes[idx];
        if node.is_leaf() || collapsed[idx] {
            return node.prob;
        }
        idx = if x[node.feature as usize] <= node.threshold {
            node.left as usize
        } else {
            node.right as usize
        };
    }
}

/// The increasing sequence of critical penalties of the weakest-link
/// pruning path, starting at 0 (the full tree).
fn alpha_sequence(tree: &Tree) -> Vec<f64> {
    let n = tree.nodes.len();
    let mut collapsed = vec![false; n];
    let mut alphas = vec![0.0];
    loop {
        let mut r_sub = vec![0.0; n];
        let mut leaves = vec![0u32; n];
        let mut min_g = f64::INFINITY;
        for i in (0..n).rev() {
            let node = &tree.nodes[i];
            if node.is_leaf() || collapsed[i] {
                r_sub[i] = node.miss;
                leaves[i] = 1;
            } else {
                let (l, r) = (node.left as usize, node.right as usize);
                r_sub[i] = r_sub[l] + r_sub[r];
                leaves[i] = leaves[l] + leaves[r];
                let g = (node.miss - r_sub[i]) / (leaves[i] as f64 - 1.0);
                if g < min_g {
                    min_g = g;
                }
            }
        }
        if !min_g.is_finite() {
            break;
        }
        alphas.push(min_g.max(0.0));
        for i in (0..n).rev() {
            let node = &tree.nodes[i];
            if !node.is_leaf() && !collapsed[i] {
                let g = (node.miss - r_sub[i]) / (leaves[i] as f64 - 1.0);
                if g <= min_g {
                    collapsed[i] = true;
                }
            }
        }
        if collapsed[0] {
            break;
        }
    }
    alphas
}

fn materialize_pruned(tree: &Tree, collapsed: &[bool]) -> Tree {
    fn copy(
        tree: &Tree,
        collapsed: &[bool],
        idx: usize,
        out: &mut Vec<Node>,
    ) -> i32 {
        let node = &tree.nodes[idx];
        let new_idx = out.len() as i32;
        out.push(node.clone());
        if node.is_leaf() || collapsed[idx] {
            out[new_idx as usize].left = NO_CHILD;
            out[new_idx as usize].right = NO_CHILD;
        } else {
            let l = copy(tree, collapsed, node.left as usize, out);
            let r = copy(tree, collapsed, node.right as usize, out);
            out[new_idx as usize].left = l;
            out[new_idx as usize].right = r;
        }
        new_idx
    }
    let mut nodes = Vec::new();
    copy(tree, collapsed, 0, &mut nodes);
    Tree { nodes }
}

struct TreeModel {
    tree: Tree,
}

impl Model for TreeModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.tree.predict(x)
    }
}

fn to_columns(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..x.ncols()).map(|j| x.column(j)).collect()
}

const PRUNE_FOLDS: usize = 10;

pub(crate) fn fit_tree(
    x: &FeatureMatrix,
    y: &[bool],
    min_leaf: usize,
    seed: u64,
) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let n = x.nrows();
    let g = x.ncols();
    let columns = to_columns(x);
    let unit_weights = vec![1u32; n];
    let mut rng = rng_from(derive(seed, 0x7265_65));
    let full = grow_tree(&columns, y, &unit_weights, min_leaf as u32, g, &mut rng);

    let alphas = alpha_sequence(&full);
    let tree = if alphas.len() <= 1 {
        full
    } else {
        let mut candidates: Vec<f64> = alphas
            .windows(2)
            .map(|w| (w[0] * w[1]).sqrt())
            .collect();
        candidates.push(*alphas.last().expect("non-empty"));

        let folds = PRUNE_FOLDS.min(n);
        let assignment = stratified_assignment(y, folds, &mut rng);
        let mut errors = vec![0u32; candidates.len()];
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
            if train.is_empty() || test.is_empty() {
                continue;
            }
            let fold_columns: Vec<Vec<f64>> = columns
                .iter()
                .map(|col| train.iter().map(|&i| col[i]).collect())
                .collect();
            let fold_labels: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let fold_weights = vec![1u32; train.len()];
            let fold_tree = grow_tree(
                &fold_columns,
                &fold_labels,
                &fold_weights,
                min_leaf as u32,
                g,
                &mut rng,
            );
            for (c, alpha) in candidates.iter().enumerate() {
                let collapsed = collapse_set(&fold_tree, *alpha);
                for &i in &test {
                    let row: Vec<f64> = columns.iter().map(|col| col[i]).collect();
                    let predicted = predict_collapsed(&fold_tree, &collapsed, &row) > 0.5;
                    if predicted != y[i] {
                        errors[c] += 1;
                    }
                }
            }
        }
        // Minimal CV error; ties go to the larger penalty (smaller tree).
        let mut chosen = 0usize;
        for c in 1..candidates.len() {
            if errors[c] <= errors[chosen] {
                chosen = c;
            }
        }
        materialize_pruned(&full, &collapse_set(&full, candidates[chosen]))
    };
    Ok(FamilyFit::clean(Box::new(TreeModel { tree })))
}

/// Draws a bootstrap of size n and returns per-row draw counts.
pub(crate) fn bootstrap_counts(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

struct ForestModel {
    trees: Vec<Tree>,
}

impl Model for ForestModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

pub(crate) fn fit_forest(
    x: &FeatureMatrix,
    y: &[bool],
    trees: usize,
    mtry: usize,
    min_leaf: usize,
    seed: u64,
) -> Result<FamilyFit> {
    check_both_classes(y)?;
    let n = x.nrows();
    let columns = to_columns(x);
    let mut grown = Vec::with_capacity(trees);
    for t in 0..trees {
        let mut rng = rng_from(derive(seed, t as u64));
        let counts = bootstrap_counts(n, &mut rng);
        let keep: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
        let boot_columns: Vec<Vec<f64>> = columns
            .iter()
            .map(|col| keep.iter().map(|&i| col[i]).collect())
            .collect();
        let boot_labels: Vec<bool> = keep.iter().map(|&i| y[i]).collect();
        let boot_weights: Vec<u32> = keep.iter().map(|&i| counts[i]).collect();
        grown.push(grow_tree(
            &boot_columns,
            &boot_labels,
            &boot_weights,
            min_leaf as u32,
            mtry,
            &mut rng,
        ));
    }
    Ok(FamilyFit::clean(Box::new(ForestModel { trees: grown })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MethodSpec;
    use crate::eval::{roc_auc, Preference};
    use rand::Rng as _;

    fn noisy_blobs(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = rng_from(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 3 == 0;
            let c = if label { 0.8 } else { -0.8 };
            rows.push(vec![
                c + (rng.random::<f64>() - 0.5) * 2.0,
                rng.random::<f64>(),
                rng.random::<f64>(),
            ]);
            y.push(label);
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn tree_separates_clean_data() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 25).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = MethodSpec::Tree { min_leaf: 5 }.fit(&x, &y, Preference::benchmark(), 3).unwrap();
        assert!(model.predict_proba(&[39.0]) > 0.9);
        assert!(model.predict_proba(&[0.0]) < 0.1);
    }

    #[test]
    fn min_leaf_bounds_every_leaf() {
        let (x, y) = noisy_blobs(200, 8);
        let columns = to_columns(&x);
        let weights = vec![1u32; x.nrows()];
        let mut rng = rng_from(1);
        let tree = grow_tree(&columns, &y, &weights, 7, x.ncols(), &mut rng);
        // Re-route every training row and count leaf occupancy.
        let mut occupancy = vec![0u32; tree.nodes.len()];
        for row in x.rows() {
            let mut idx = 0usize;
            loop {
                let node = &tree.nodes[idx];
                if node.is_leaf() {
                    occupancy[idx] += 1;
                    break;
                }
                idx = if row[node.feature as usize] <= node.threshold {
                    node.left as usize
                } else {
                    node.right as usize
                };
            }
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            if node.is_leaf() && tree.nodes.len() > 1 {
                assert!(occupancy[i] >= 7, "leaf {i} holds {} rows", occupancy[i]);
            }
        }
    }

    #[test]
    fn pruning_shrinks_trees_grown_on_noise() {
        let mut rng = rng_from(99);
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y: Vec<bool> = (0..150).map(|_| rng.random::<f64>() < 0.3).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let columns = to_columns(&x);
        let weights = vec![1u32; 150];
        let mut grow_rng = rng_from(1);
        let full = grow_tree(&columns, &y, &weights, 1, 2, &mut grow_rng);
        let full_leaves = full.leaf_count();

        let model = MethodSpec::Tree { min_leaf: 1 }.fit(&x, &y, Preference::benchmark(), 5).unwrap();
        let pruned_leaves = x
            .rows()
            .map(|r| model.predict_proba(r).to_bits())
            .collect::<std::collections::BTreeSet<u64>>()
            .len();
        // Pure-noise labels leave nothing worth keeping: far fewer distinct
        // leaf probabilities than the unpruned tree has leaves.
        assert!(pruned_leaves * 4 < full_leaves, "{pruned_leaves} vs {full_leaves}");
    }

    #[test]
    fn alpha_sequence_is_increasing_from_zero() {
        let (x, y) = noisy_blobs(120, 77);
        let columns = to_columns(&x);
        let weights = vec![1u32; x.nrows()];
        let mut rng = rng_from(2);
        let tree = grow_tree(&columns, &y, &weights, 1, x.ncols(), &mut rng);
        let alphas = alpha_sequence(&tree);
        assert_eq!(alphas[0], 0.0);
        for w in alphas.windows(2) {
            assert!(w[1] >= w[0], "sequence must not decrease: {:?}", alphas);
        }
        // A huge penalty collapses everything to the root.
        let all = collapse_set(&tree, f64::INFINITY);
        assert!(all[0]);
    }

    #[test]
    fn forest_with_one_tree_and_full_mtry_is_a_bootstrap_tree() {
        let (x, y) = noisy_blobs(90, 31);
        let seed = 424242;
        let spec = MethodSpec::RandomForest { trees: 1, mtry: 3, min_leaf: 1 };
        let forest = spec.fit(&x, &y, Preference::benchmark(), seed).unwrap();

        // Replay the forest's own derivation: the first tree uses the
        // stream-0 RNG for its bootstrap, then grows unpruned.
        let mut rng = rng_from(derive(seed, 0));
        let counts = bootstrap_counts(x.nrows(), &mut rng);
        let keep: Vec<usize> = (0..x.nrows()).filter(|&i| counts[i] > 0).collect();
        let columns = to_columns(&x);
        let boot_columns: Vec<Vec<f64>> = columns
            .iter()
            .map(|col| keep.iter().map(|&i| col[i]).collect())
            .collect();
        let boot_labels: Vec<bool> = keep.iter().map(|&i| y[i]).collect();
        let boot_weights: Vec<u32> = keep.iter().map(|&i| counts[i]).collect();
        let tree = grow_tree(&boot_columns, &boot_labels, &boot_weights, 1, 3, &mut rng);

        for row in x.rows() {
            assert_eq!(forest.predict_raw(row), tree.predict(row));
        }
    }

    #[test]
    fn forest_is_deterministic_and_seed_sensitive() {
        let (x, y) = noisy_blobs(80, 5);
        let spec = MethodSpec::RandomForest { trees: 12, mtry: 2, min_leaf: 1 };
        let a = spec.fit(&x, &y, Preference::benchmark(), 10).unwrap();
        let b = spec.fit(&x, &y, Preference::benchmark(), 10).unwrap();
        let c = spec.fit(&x, &y, Preference::benchmark(), 11).unwrap();
        assert_eq!(a.in_sample_raw(), b.in_sample_raw());
        assert_ne!(a.in_sample_raw(), c.in_sample_raw());
    }

    #[test]
    fn forest_probabilities_average_trees_and_rank_well() {
        let (x, y) = noisy_blobs(240, 13);
        let spec = MethodSpec::RandomForest { trees: 40, mtry: 2, min_leaf: 1 };
        let model = spec.fit(&x, &y, Preference::benchmark(), 7).unwrap();
        let probs: Vec<f64> = x.rows().map(|r| model.predict_proba(r)).collect();
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(roc_auc(&probs, &y).unwrap() > 0.85);
    }

    #[test]
    fn bootstrap_counts_sum_to_n() {
        let mut rng = rng_from(0);
        let counts = bootstrap_counts(500, &mut rng);
        assert_eq!(counts.iter().map(|&c| c as usize).sum::<usize>(), 500);
        let unique = counts.iter().filter(|&&c| c > 0).count();
        // Around 63% of rows appear in a bootstrap draw.
        assert!((0.55..0.72).contains(&(unique as f64 / 500.0)));
    }
}
