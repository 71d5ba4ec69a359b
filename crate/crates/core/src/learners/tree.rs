use serde::{Deserialize, Serialize};

/// Binary decision tree. Rows with `row[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        score: f64,
    },
}

impl Node {
    pub fn leaf(score: f64) -> Node {
        Node::Leaf { score }
    }

    pub fn split(feature: usize, threshold: f64, left: Node, right: Node) -> Node {
        Node::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { score } => return *score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Node::Leaf { score } => score.is_finite(),
            Node::Split {
                threshold, left, right, ..
            } => threshold.is_finite() && left.all_finite() && right.all_finite(),
        }
    }
}

/// Gini impurity of a node with `pos` positives among `n` samples.
pub fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Size-weighted child impurity of a split; lower is better.
pub fn split_impurity(left_pos: usize, left_n: usize, right_pos: usize, right_n: usize) -> f64 {
    let n = (left_n + right_n) as f64;
    (left_n as f64 * gini(left_pos, left_n) + right_n as f64 * gini(right_pos, right_n)) / n
}
