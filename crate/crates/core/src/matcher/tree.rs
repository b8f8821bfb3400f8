//! Depth-limited axis-aligned decision trees over two features.
//!
//! Split search is exhaustive: every midpoint between consecutive distinct
//! feature values is tried. Rows are presorted once per training set and the
//! sorted lists are partitioned stably down the tree, so each level costs
//! `O(n)` per feature.

use serde::{Deserialize, Serialize};

pub const N_FEATURES: usize = 2;
pub type Features = [f64; N_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Weighted Gini impurity; leaves hold the class-1 fraction.
    Gini,
    /// Weighted squared error; leaves hold the mean target.
    SquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &Features) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Row order of a training set sorted by each feature.
#[derive(Debug, Clone)]
pub struct Presorted {
    pub by_feature: [Vec<usize>; N_FEATURES],
}

impl Presorted {
    pub fn new(x: &[Features]) -> Self {
        let sorted = |f: usize| {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        };
        Self { by_feature: [sorted(0), sorted(1)] }
    }
}

#[derive(Default, Clone, Copy)]
struct Stats {
    w: f64,
    s1: f64,
    s2: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s1 += w * y;
        self.s2 += w * y * y;
    }

    fn sub(self, o: Stats) -> Stats {
        Stats { w: self.w - o.w, s1: self.s1 - o.s1, s2: self.s2 - o.s2 }
    }

    fn mean(&self) -> f64 {
        if self.w > 0.0 {
            self.s1 / self.w
        } else {
            0.0
        }
    }

    fn impurity(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => {
                let p = (self.s1 / self.w).clamp(0.0, 1.0);
                self.w * 2.0 * p * (1.0 - p)
            }
            Criterion::SquaredError => (self.s2 - self.s1 * self.s1 / self.w).max(0.0),
        }
    }
}

pub struct TreeBuilder<'a> {
    x: &'a [Features],
    y: &'a [f64],
    w: &'a [f64],
    criterion: Criterion,
    max_depth: usize,
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

const MIN_GAIN: f64 = 1e-12;

impl<'a> TreeBuilder<'a> {
    /// Fits a tree on rows with positive weight.
    pub fn fit(
        x: &'a [Features],
        y: &'a [f64],
        w: &'a [f64],
        presorted: &Presorted,
        criterion: Criterion,
        max_depth: usize,
    ) -> Tree {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), w.len());
        let mut b = TreeBuilder { x, y, w, criterion, max_depth, nodes: Vec::new(), go_left: vec![false; x.len()] };
        let lists: [Vec<usize>; N_FEATURES] =
            std::array::from_fn(|f| presorted.by_feature[f].iter().copied().filter(|&i| w[i] > 0.0).collect());
        b.grow(lists, 0);
        Tree { nodes: b.nodes }
    }

    fn grow(&mut self, lists: [Vec<usize>; N_FEATURES], depth: usize) -> usize {
        let id = self.nodes.len();
        let mut total = Stats::default();
        for &i in &lists[0] {
            total.add(self.w[i], self.y[i]);
        }
        self.nodes.push(Node::Leaf { value: total.mean() });
        let parent_impurity = total.impurity(self.criterion);
        if depth >= self.max_depth || parent_impurity <= MIN_GAIN {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&lists, total, parent_impurity) else {
            return id;
        };
        for &i in &lists[feature] {
            self.go_left[i] = self.x[i][feature] <= threshold;
        }
        let mut left: [Vec<usize>; N_FEATURES] = Default::default();
        let mut right: [Vec<usize>; N_FEATURES] = Default::default();
        for f in 0..N_FEATURES {
            for &i in &lists[f] {
                if self.go_left[i] {
                    left[f].push(i);
                } else {
                    right[f].push(i);
                }
            }
        }
        drop(lists);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left: l, right: r };
        id
    }

    fn best_split(&self, lists: &[Vec<usize>; N_FEATURES], total: Stats, parent: f64) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, list) in lists.iter().enumerate() {
            let mut left = Stats::default();
            for k in 0..list.len().saturating_sub(1) {
                let i = list[k];
                left.add(self.w[i], self.y[i]);
                let (here, next) = (self.x[i][f], self.x[list[k + 1]][f]);
                if here >= next {
                    continue;
                }
                let right = total.sub(left);
                let gain = parent - left.impurity(self.criterion) - right.impurity(self.criterion);
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, here + (next - here) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
