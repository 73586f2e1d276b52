//! Finite martingale pairs `(F, G)` on `[0, 1]` with `|dG| = |dF|` at every split.
//!
//! A pair is a binary tree stored in an arena. A split sends the left fraction
//! `alpha` of its interval to the left child. A scale node multiplies both
//! coordinates of its subtree by `lambda` and optionally negates `G`, which
//! keeps deep self-similar constructions free of overflow.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Node {
    Leaf {
        f: f64,
        g: f64,
    },
    Split {
        alpha: f64,
        left: usize,
        right: usize,
    },
    Scale {
        lambda: f64,
        flip_g: bool,
        child: usize,
    },
}

/// Moments of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiStats {
    /// `E(G^2 + tau^2 F^2)^{p/2}`.
    pub psi: f64,
    pub ef: f64,
    pub eg: f64,
    /// `E|F|^p`.
    pub efp: f64,
}

/// One leaf as an interval of `[0, 1]` with its values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeafInterval {
    pub left: f64,
    pub right: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingalePair {
    nodes: Vec<Node>,
    root: usize,
}

/// Incremental arena builder. Children must be pushed before their parents.
#[derive(Debug, Clone, Default)]
pub struct PairBuilder {
    nodes: Vec<Node>,
}

impl PairBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, f: f64, g: f64) -> usize {
        self.nodes.push(Node::Leaf { f, g });
        self.nodes.len() - 1
    }

    pub fn split(&mut self, alpha: f64, left: usize, right: usize) -> usize {
        debug_assert!(left < self.nodes.len() && right < self.nodes.len());
        self.nodes.push(Node::Split { alpha, left, right });
        self.nodes.len() - 1
    }

    pub fn scale(&mut self, lambda: f64, flip_g: bool, child: usize) -> usize {
        debug_assert!(child < self.nodes.len());
        self.nodes.push(Node::Scale {
            lambda,
            flip_g,
            child,
        });
        self.nodes.len() - 1
    }

    /// Copies another pair in and returns the index of its root.
    pub fn graft(&mut self, pair: &MartingalePair) -> usize {
        let off = self.nodes.len();
        self.nodes.extend(pair.nodes.iter().map(|n| match *n {
            Node::Leaf { f, g } => Node::Leaf { f, g },
            Node::Split { alpha, left, right } => Node::Split {
                alpha,
                left: left + off,
                right: right + off,
            },
            Node::Scale {
                lambda,
                flip_g,
                child,
            } => Node::Scale {
                lambda,
                flip_g,
                child: child + off,
            },
        }));
        pair.root + off
    }

    pub fn finish(self, root: usize) -> MartingalePair {
        MartingalePair {
            nodes: self.nodes,
            root,
        }
    }
}

/// Per-node `(mean F, mean G, E|F|^p, psi)` in the node's local coordinates.
type Local = [f64; 4];

impl MartingalePair {
    /// The constant pair `(1 - s, 1 + s)` sitting at `(s, (1-s)^p)`.
    pub fn constant(s: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("s = {s} outside [-1, 1]")));
        }
        Ok(Self::leaf(1.0 - s, 1.0 + s))
    }

    pub fn leaf(f: f64, g: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { f, g }],
            root: 0,
        }
    }

    /// Puts `left` on `[0, alpha)` and `right` on `[alpha, 1)`.
    pub fn concatenate(left: &Self, right: &Self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "split fraction {alpha} outside (0, 1)"
            )));
        }
        let mut b = PairBuilder::new();
        let l = b.graft(left);
        let r = b.graft(right);
        let root = b.split(alpha, l, r);
        let pair = b.finish(root);
        check_split(&pair.nodes, &pair.local_means(), root)?;
        Ok(pair)
    }

    /// Multiplies `F` and `G` by `lambda` and negates `G` when `flip_g` is set.
    pub fn scaled(&self, lambda: f64, flip_g: bool) -> Result<Self> {
        if !lambda.is_finite() || lambda == 0.0 {
            return Err(Error::Domain(format!(
                "scale factor {lambda} must be finite and nonzero"
            )));
        }
        let mut b = PairBuilder::new();
        let c = b.graft(self);
        let root = b.scale(lambda, flip_g, c);
        Ok(b.finish(root))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Post-order listing of the nodes reachable from the root.
    fn post_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                order.push(i);
                continue;
            }
            stack.push((i, true));
            match self.nodes[i] {
                Node::Leaf { .. } => {}
                Node::Split { left, right, .. } => {
                    stack.push((right, false));
                    stack.push((left, false));
                }
                Node::Scale { child, .. } => stack.push((child, false)),
            }
        }
        order
    }

    fn local_moments(&self, params: &ProblemParams) -> Vec<Local> {
        let p = params.p();
        let t2 = params.tau2();
        let mut out = vec![[f64::NAN; 4]; self.nodes.len()];
        for i in self.post_order() {
            out[i] = match self.nodes[i] {
                Node::Leaf { f, g } => [f, g, f.abs().powf(p), (g * g + t2 * f * f).powf(0.5 * p)],
                Node::Split { alpha, left, right } => {
                    let (l, r) = (out[left], out[right]);
                    std::array::from_fn(|k| alpha * l[k] + (1.0 - alpha) * r[k])
                }
                Node::Scale {
                    lambda,
                    flip_g,
                    child,
                } => {
                    let c = out[child];
                    let lp = lambda.abs().powf(p);
                    let sg = if flip_g { -lambda } else { lambda };
                    [lambda * c[0], sg * c[1], lp * c[2], lp * c[3]]
                }
            };
        }
        out
    }

    /// Per-node `(mean F, mean G)` in local coordinates.
    fn local_means(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[f64::NAN; 2]; self.nodes.len()];
        for i in self.post_order() {
            out[i] = match self.nodes[i] {
                Node::Leaf { f, g } => [f, g],
                Node::Split { alpha, left, right } => {
                    let (l, r) = (out[left], out[right]);
                    [
                        alpha * l[0] + (1.0 - alpha) * r[0],
                        alpha * l[1] + (1.0 - alpha) * r[1],
                    ]
                }
                Node::Scale {
                    lambda,
                    flip_g,
                    child,
                } => {
                    let c = out[child];
                    [lambda * c[0], if flip_g { -lambda } else { lambda } * c[1]]
                }
            };
        }
        out
    }

    pub fn psi(&self, params: &ProblemParams) -> PsiStats {
        let m = self.local_moments(params)[self.root];
        PsiStats {
            ef: m[0],
            eg: m[1],
            efp: m[2],
            psi: m[3],
        }
    }

    /// Checks split fractions, scale factors and `|dG| = |dF|` at every split.
    pub fn validate(&self) -> Result<()> {
        let local = self.local_means();
        for i in self.post_order() {
            match self.nodes[i] {
                Node::Split { alpha, .. } if !(alpha > 0.0 && alpha < 1.0) => {
                    return Err(Error::Domain(format!(
                        "node {i}: split fraction {alpha} outside (0, 1)"
                    )));
                }
                Node::Split { .. } => check_split(&self.nodes, &local, i)?,
                Node::Scale { lambda, .. } if !lambda.is_finite() || lambda == 0.0 => {
                    return Err(Error::Domain(format!("node {i}: scale factor {lambda}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Leaves in left-to-right order with their intervals and global values.
    pub fn leaves(&self) -> Vec<LeafInterval> {
        let mut out = Vec::new();
        // (node, left, right, lambda, sign of G)
        let mut stack = vec![(self.root, 0.0, 1.0, 1.0, 1.0)];
        while let Some((i, lo, hi, lam, sg)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { f, g } => out.push(LeafInterval {
                    left: lo,
                    right: hi,
                    f: lam * f,
                    g: lam * sg * g,
                }),
                Node::Split { alpha, left, right } => {
                    let mid = lo + alpha * (hi - lo);
                    stack.push((right, mid, hi, lam, sg));
                    stack.push((left, lo, mid, lam, sg));
                }
                Node::Scale {
                    lambda,
                    flip_g,
                    child,
                } => stack.push((child, lo, hi, lam * lambda, if flip_g { -sg } else { sg })),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["left", "right", "F", "G"])?;
        for l in self.leaves() {
            w.write_record([l.left, l.right, l.f, l.g].map(crate::io::fmt17))?;
        }
        w.flush()
    }

    /// SHA-256 of a canonical text form of the reachable tree.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { f, g } => h.update(format!("L{:e},{:e};", f, g)),
                Node::Split { alpha, left, right } => {
                    h.update(format!("S{:e};", alpha));
                    stack.push(right);
                    stack.push(left);
                }
                Node::Scale {
                    lambda,
                    flip_g,
                    child,
                } => {
                    h.update(format!("C{:e},{};", lambda, flip_g as u8));
                    stack.push(child);
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Replaces a leaf by a split that moves the left part by `(1 - alpha)(d, sigma d)`
    /// and the right part by `-alpha (d, sigma d)`.
    pub fn refine_leaf(&mut self, leaf: usize, alpha: f64, d: f64, sigma: f64) -> Result<()> {
        let Node::Leaf { f, g } = self.nodes[leaf] else {
            return Err(Error::Domain(format!("node {leaf} is not a leaf")));
        };
        if !(alpha > 0.0 && alpha < 1.0) || sigma.abs() != 1.0 {
            return Err(Error::Domain(
                "refinement needs alpha in (0, 1) and sigma = +-1".into(),
            ));
        }
        let l = self.nodes.len();
        self.nodes.push(Node::Leaf {
            f: f + (1.0 - alpha) * d,
            g: g + (1.0 - alpha) * sigma * d,
        });
        self.nodes.push(Node::Leaf {
            f: f - alpha * d,
            g: g - alpha * sigma * d,
        });
        self.nodes[leaf] = Node::Split {
            alpha,
            left: l,
            right: l + 1,
        };
        Ok(())
    }

    /// Indices of the leaves reachable from the root.
    pub fn leaf_indices(&self) -> Vec<usize> {
        self.post_order()
            .into_iter()
            .filter(|&i| matches!(self.nodes[i], Node::Leaf { .. }))
            .collect()
    }
}

fn check_split(nodes: &[Node], local: &[[f64; 2]], i: usize) -> Result<()> {
    let Node::Split { left, .. } = nodes[i] else {
        return Ok(());
    };
    let df = local[left][0] - local[i][0];
    let dg = local[left][1] - local[i][1];
    let scale = 1.0
        + local[i][0]
            .abs()
            .max(local[i][1].abs())
            .max(local[left][0].abs())
            .max(local[left][1].abs());
    if (df.abs() - dg.abs()).abs() > 1e-10 * scale {
        return Err(Error::TransformViolation {
            node: i,
            df: df.abs(),
            dg: dg.abs(),
        });
    }
    Ok(())
}
