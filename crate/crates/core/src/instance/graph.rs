use std::collections::HashMap;

use super::{PartId, ValidationError};

/// Body-part graph: part names, the major parts every pose must contain, and
/// the undirected edges along which pairwise costs between different parts
/// are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGraph {
    parts: Vec<String>,
    major: Vec<bool>,
    edges: Vec<(PartId, PartId)>,
    adjacency: Vec<Vec<PartId>>,
    index: HashMap<String, PartId>,
}

/// Names of the 14-part body model, in canonical order.
pub const BODY14_PARTS: [&str; 14] = [
    "head",
    "neck",
    "r_shoulder",
    "l_shoulder",
    "r_elbow",
    "l_elbow",
    "r_wrist",
    "l_wrist",
    "r_hip",
    "l_hip",
    "r_knee",
    "l_knee",
    "r_ankle",
    "l_ankle",
];

const BODY14_TREE: [(&str, &str); 13] = [
    ("head", "neck"),
    ("neck", "r_shoulder"),
    ("neck", "l_shoulder"),
    ("r_shoulder", "r_elbow"),
    ("l_shoulder", "l_elbow"),
    ("r_elbow", "r_wrist"),
    ("l_elbow", "l_wrist"),
    ("neck", "r_hip"),
    ("neck", "l_hip"),
    ("r_hip", "r_knee"),
    ("l_hip", "l_knee"),
    ("r_knee", "r_ankle"),
    ("l_knee", "l_ankle"),
];

// Hip-to-shoulder and shoulder-to-head edges on top of the neck-augmented tree.
const BODY14_EXTRA: [(&str, &str); 4] = [
    ("l_hip", "l_shoulder"),
    ("r_hip", "r_shoulder"),
    ("head", "l_shoulder"),
    ("head", "r_shoulder"),
];

impl PartGraph {
    /// Builds a graph from names, reporting every structural problem found.
    pub fn new<S: AsRef<str>>(parts: &[S], major_parts: &[S], edges: &[(S, S)]) -> Result<Self, Vec<ValidationError>> {
        let mut errors = Vec::new();
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(parts.len());
        for p in parts {
            let name = p.as_ref().to_string();
            if index.contains_key(&name) {
                errors.push(ValidationError::DuplicatePart(name));
                continue;
            }
            index.insert(name.clone(), names.len());
            names.push(name);
        }

        let mut major = vec![false; names.len()];
        for m in major_parts {
            match index.get(m.as_ref()) {
                Some(&p) => major[p] = true,
                None => errors.push(ValidationError::UnknownPart(m.as_ref().to_string())),
            }
        }
        if major_parts.is_empty() {
            errors.push(ValidationError::NoMajorPart);
        }

        let mut edge_list: Vec<(PartId, PartId)> = Vec::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let (pa, pb) = match (index.get(a), index.get(b)) {
                (Some(&pa), Some(&pb)) => (pa, pb),
                (ia, ib) => {
                    if ia.is_none() {
                        errors.push(ValidationError::UnknownPart(a.to_string()));
                    }
                    if ib.is_none() {
                        errors.push(ValidationError::UnknownPart(b.to_string()));
                    }
                    continue;
                }
            };
            if pa == pb {
                errors.push(ValidationError::SelfLoopEdge(a.to_string()));
                continue;
            }
            let e = (pa.min(pb), pa.max(pb));
            if edge_list.contains(&e) {
                errors.push(ValidationError::DuplicateEdge(a.to_string(), b.to_string()));
                continue;
            }
            edge_list.push(e);
        }
        edge_list.sort_unstable();

        let mut adjacency = vec![Vec::new(); names.len()];
        for &(a, b) in &edge_list {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let graph = PartGraph {
            parts: names,
            major,
            edges: edge_list,
            adjacency,
            index,
        };
        for m in graph.major_parts() {
            if !graph.conditional_is_forest(m) {
                errors.push(ValidationError::ConditionalGraphNotForest(graph.parts[m].clone()));
            }
        }

        if errors.is_empty() {
            Ok(graph)
        } else {
            Err(errors)
        }
    }

    /// The 14-part body model: pictorial-structure tree rooted at the neck,
    /// neck edges to every part not already adjacent to it, plus hip-shoulder
    /// and shoulder-head edges. Neck is the only major part.
    pub fn body14() -> Self {
        let mut edges: Vec<(&str, &str)> = BODY14_TREE.to_vec();
        for part in BODY14_PARTS {
            if part == "neck" {
                continue;
            }
            if !BODY14_TREE
                .iter()
                .any(|&(a, b)| (a == "neck" && b == part) || (b == "neck" && a == part))
            {
                edges.push(("neck", part));
            }
        }
        edges.extend_from_slice(&BODY14_EXTRA);
        Self::new(&BODY14_PARTS, &["neck"], &edges).expect("built-in body graph is valid")
    }

    /// Four-part upper body (neck, head, both shoulders) used for small test
    /// instances.
    pub fn upper4() -> Self {
        Self::new(
            &["neck", "head", "r_shoulder", "l_shoulder"],
            &["neck"],
            &[
                ("neck", "head"),
                ("neck", "r_shoulder"),
                ("neck", "l_shoulder"),
                ("head", "r_shoulder"),
                ("head", "l_shoulder"),
            ],
        )
        .expect("built-in upper-body graph is valid")
    }

    pub fn parts(&self) -> &[String] {
        &self.parts
    }

    pub fn n_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn part_name(&self, p: PartId) -> &str {
        &self.parts[p]
    }

    pub fn part_id(&self, name: &str) -> Option<PartId> {
        self.index.get(name).copied()
    }

    pub fn is_major(&self, p: PartId) -> bool {
        self.major[p]
    }

    pub fn major_parts(&self) -> impl Iterator<Item = PartId> + '_ {
        self.major.iter().enumerate().filter(|(_, &m)| m).map(|(p, _)| p)
    }

    /// Edges as sorted `(low, high)` part pairs.
    pub fn edges(&self) -> &[(PartId, PartId)] {
        &self.edges
    }

    pub fn neighbors(&self, p: PartId) -> &[PartId] {
        &self.adjacency[p]
    }

    pub fn has_edge(&self, a: PartId, b: PartId) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Whether the graph on all parts except `root`, using only edges not
    /// incident to `root`, is acyclic.
    pub fn conditional_is_forest(&self, root: PartId) -> bool {
        let mut uf = UnionFind::new(self.parts.len());
        self.edges
            .iter()
            .filter(|&&(a, b)| a != root && b != root)
            .all(|&(a, b)| uf.union(a, b))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
