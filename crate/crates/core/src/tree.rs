//! Rooted tree metrics with unbounded branching.
//!
//! A tree of depth `D` has infinitely many children at every internal node;
//! children are addressed lazily by index, so only touched nodes ever exist in
//! memory. The edge entering a node at depth `t` has level `D - t + 1` and
//! length `gamma^(t - 1)`: root edges have length 1 and every proper subtree
//! is shrunk by `gamma` relative to its parent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric;
use crate::rational::Q;

/// A node, as the child indices taken from the root. Empty is the root.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodePath(Vec<u32>);

impl NodePath {
    pub fn root() -> NodePath {
        NodePath(Vec::new())
    }

    pub fn from_indices(indices: impl Into<Vec<u32>>) -> NodePath {
        NodePath(indices.into())
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<NodePath> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodePath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Appends `index` without any depth check; see [`TreeMetric::child`].
    pub fn join(&self, index: u32) -> NodePath {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(index);
        NodePath(v)
    }

    pub fn prefix(&self, len: usize) -> NodePath {
        NodePath(self.0[..len].to_vec())
    }

    /// True if `self` is `other` or one of its ancestors.
    pub fn is_ancestor_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Child index of `self` on the way down to `descendant`, if strictly below.
    pub fn child_toward(&self, descendant: &NodePath) -> Option<u32> {
        if descendant.0.len() > self.0.len() && self.is_ancestor_of(descendant) {
            Some(descendant.0[self.0.len()])
        } else {
            None
        }
    }

    pub fn lca_len(&self, other: &NodePath) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    pub fn lca(&self, other: &NodePath) -> NodePath {
        self.prefix(self.lca_len(other))
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{idx}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl FromStr for NodePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<NodePath> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(NodePath::root());
        }
        s.split('/')
            .map(|part| {
                part.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("invalid node path {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(NodePath)
    }
}

impl Serialize for NodePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodePath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<NodePath, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One edge, named by its lower endpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeDescriptor {
    pub child: NodePath,
    pub level: usize,
    pub length: Q,
}

/// Geometry of a depth-`D` tree with per-level shrink factor `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeMetric {
    depth: usize,
    gamma: Q,
    /// `edge_len[t]`: length of the edge entering a depth-`t` node (index 0 unused).
    edge_len: Vec<Q>,
    /// `height[t]`: distance from the root to any depth-`t` node.
    height: Vec<Q>,
}

impl TreeMetric {
    pub fn new(depth: usize, gamma: Q) -> Result<TreeMetric> {
        if !gamma.is_positive() || gamma > Q::ONE {
            return Err(Error::Params(format!("scale must lie in (0, 1], got {gamma}")));
        }
        let mut edge_len = vec![Q::ZERO];
        let mut height = vec![Q::ZERO];
        let mut len = Q::ONE;
        for _ in 1..=depth {
            edge_len.push(len);
            height.push(*height.last().unwrap() + len);
            len = len * gamma;
        }
        Ok(TreeMetric {
            depth,
            gamma,
            edge_len,
            height,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gamma(&self) -> Q {
        self.gamma
    }

    pub fn contains(&self, node: &NodePath) -> bool {
        node.len() <= self.depth
    }

    pub fn check(&self, node: &NodePath) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                node: node.clone(),
                depth: self.depth,
            })
        }
    }

    pub fn is_leaf(&self, node: &NodePath) -> bool {
        node.len() == self.depth
    }

    pub fn child(&self, node: &NodePath, index: u32) -> Result<NodePath> {
        self.check(node)?;
        if self.is_leaf(node) {
            return Err(Error::LeafHasNoChildren {
                node: node.clone(),
                depth: self.depth,
            });
        }
        Ok(node.join(index))
    }

    /// Level of the edge entering a node at path length `node_depth >= 1`.
    pub fn level_of_depth(&self, node_depth: usize) -> usize {
        self.depth + 1 - node_depth
    }

    /// Path length of the lower endpoint of a level-`level` edge.
    pub fn depth_of_level(&self, level: usize) -> usize {
        self.depth + 1 - level
    }

    pub fn edge_length_at_depth(&self, node_depth: usize) -> Q {
        self.edge_len[node_depth]
    }

    pub fn edge_length_at_level(&self, level: usize) -> Q {
        self.edge_len[self.depth_of_level(level)]
    }

    /// Distance from the root to any node at path length `node_depth`.
    pub fn height(&self, node_depth: usize) -> Q {
        self.height[node_depth]
    }

    pub fn edge(&self, child: &NodePath) -> EdgeDescriptor {
        let t = child.len();
        EdgeDescriptor {
            child: child.clone(),
            level: self.level_of_depth(t),
            length: self.edge_len[t],
        }
    }

    pub fn distance(&self, a: &NodePath, b: &NodePath) -> Q {
        let l = a.lca_len(b);
        self.height[a.len()] + self.height[b.len()] - self.height[l] - self.height[l]
    }

    /// Cost of moving from `a` to `b` under the downward-only charge.
    pub fn down_distance(&self, a: &NodePath, b: &NodePath) -> Q {
        self.height[b.len()] - self.height[a.lca_len(b)]
    }

    /// The `a -> b` path split at the lowest common ancestor. Upward edges are
    /// listed from `a` toward the ancestor, downward edges from the ancestor
    /// toward `b`.
    pub fn path_decompose(&self, a: &NodePath, b: &NodePath) -> (Vec<EdgeDescriptor>, Vec<EdgeDescriptor>) {
        let l = a.lca_len(b);
        let up = (l + 1..=a.len()).rev().map(|t| self.edge(&a.prefix(t))).collect();
        let down = (l + 1..=b.len()).map(|t| self.edge(&b.prefix(t))).collect();
        (up, down)
    }
}

/// Optional overrides applied on top of the derived schedule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub b: Option<u32>,
    pub h: Option<u64>,
    pub k: Option<Q>,
    pub epsilon: Option<Q>,
    pub gamma: Option<Q>,
}

/// Everything that fixes one tree/adversary instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionParams {
    pub rho: Q,
    pub depth: u32,
    pub b: u32,
    pub h: u64,
    pub k: Q,
    pub epsilon: Q,
    pub gamma: Q,
    /// True only when nothing touched `b`, `h`, `k` and `rho >= 1`.
    pub standard_schedule: bool,
}

pub fn default_gamma() -> Q {
    Q::new(1, 4)
}

/// `b^level`, checked.
pub fn servers_at(b: u32, level: u32) -> Result<u64> {
    (b as u64)
        .checked_pow(level)
        .ok_or_else(|| Error::Params(format!("b^i overflows for b={b}, i={level}")))
}

/// `b^level * (1 + level / (2b))`, the online mass granted to a level-`level` subtree.
pub fn online_mass_at(b: u32, level: u32) -> Result<Q> {
    let h = servers_at(b, level)?;
    Ok(Q::from(h) * (Q::ONE + Q::new(level as i128, 2 * b as i128)))
}

/// `b = ceil(exp(3 rho))`, `h = b^i`, `k = b^i (1 + i/(2b))`, then overrides.
pub fn derive_params(rho: Q, depth: u32, overrides: &ParamOverrides) -> Result<ConstructionParams> {
    if rho.is_negative() {
        return Err(Error::Params(format!("rho must be >= 0, got {rho}")));
    }
    let b = match overrides.b {
        Some(b) => b,
        None => {
            let b = numeric::ceil_exp(rho * Q::int(3));
            u32::try_from(b).map_err(|_| Error::Params(format!("b = ceil(exp(3 rho)) = {b} is too large")))?
        }
    };
    if b < 2 {
        return Err(Error::Params(format!("b must be >= 2, got {b}")));
    }
    let h = match overrides.h {
        Some(h) => h,
        None => servers_at(b, depth)?,
    };
    let k = match overrides.k {
        Some(k) => k,
        None => online_mass_at(b, depth)?,
    };
    if k < Q::ONE {
        return Err(Error::Params(format!("k must be >= 1, got {k}")));
    }
    let epsilon = overrides.epsilon.unwrap_or_else(|| Q::new(1, 4 * b as i128));
    if !epsilon.is_positive() || epsilon >= Q::ONE {
        return Err(Error::Params(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let gamma = overrides.gamma.unwrap_or_else(default_gamma);
    if !gamma.is_positive() || gamma > Q::ONE {
        return Err(Error::Params(format!("scale must lie in (0, 1], got {gamma}")));
    }
    let untouched = overrides.b.is_none() && overrides.h.is_none() && overrides.k.is_none();
    Ok(ConstructionParams {
        rho,
        depth,
        b,
        h,
        k,
        epsilon,
        gamma,
        standard_schedule: untouched && rho >= Q::ONE,
    })
}

impl ConstructionParams {
    pub fn metric(&self) -> Result<TreeMetric> {
        TreeMetric::new(self.depth as usize, self.gamma)
    }

    /// Cap for a level-`level` subtree (`k_level`).
    pub fn cap(&self, level: u32) -> Q {
        online_mass_at(self.b, level).expect("cap overflow checked at derivation")
    }

    pub fn servers(&self, level: u32) -> u64 {
        servers_at(self.b, level).expect("b^i overflow checked at derivation")
    }

    /// `k - h = b^i * i / (2b)`.
    pub fn augmentation(&self) -> Q {
        self.k - Q::from(self.h)
    }
}
