//! The explanation tree: a rooted tree of propositions whose edges carry the
//! answer label each child was generated to explain.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Answer, NodeId, Proposition, TreeConfig};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("the root cannot be removed")]
    RootRemoval,
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: NodeId,
    pub label: Answer,
    pub child: NodeId,
}

/// Serializes as a [`TreeDocument`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeDocument", try_from = "TreeDocument")]
pub struct MaieuticTree {
    nodes: IndexMap<NodeId, Proposition>,
    children: HashMap<NodeId, Vec<(Answer, NodeId)>>,
    parents: HashMap<NodeId, NodeId>,
    config: TreeConfig,
}

impl MaieuticTree {
    /// A tree holding only `root`. The root's id is forced to `root`.
    pub fn new(mut root: Proposition, config: TreeConfig) -> Self {
        root.id = NodeId::root();
        let mut nodes = IndexMap::new();
        nodes.insert(root.id.clone(), root);
        MaieuticTree {
            nodes,
            children: HashMap::new(),
            parents: HashMap::new(),
            config,
        }
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn root(&self) -> &Proposition {
        &self.nodes[&NodeId::root()]
    }

    pub fn node(&self, id: &NodeId) -> Option<&Proposition> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Proposition> {
        self.nodes.get_mut(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when the tree holds nothing but the root.
    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn children_of(&self, id: &NodeId) -> &[(Answer, NodeId)] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent_of(&self, id: &NodeId) -> Option<&NodeId> {
        self.parents.get(id)
    }

    pub fn add_child(
        &mut self,
        parent: &NodeId,
        label: Answer,
        child: Proposition,
    ) -> Result<(), TreeError> {
        let parent_node = self
            .nodes
            .get(parent)
            .ok_or_else(|| TreeError::UnknownNode(parent.clone()))?;
        if self.nodes.contains_key(&child.id) {
            return Err(TreeError::DuplicateNode(child.id.clone()));
        }
        if child.path_label != parent_node.path_label.extended(label) {
            return Err(TreeError::Malformed(format!(
                "node {} path {} does not extend parent {} by {}",
                child.id,
                child.path_label,
                parent,
                label.letter()
            )));
        }
        let id = child.id.clone();
        self.nodes.insert(id.clone(), child);
        self.children
            .entry(parent.clone())
            .or_default()
            .push((label, id.clone()));
        self.parents.insert(id, parent.clone());
        Ok(())
    }

    /// Removes a non-root leaf.
    pub fn remove_leaf(&mut self, id: &NodeId) -> Result<Proposition, TreeError> {
        if id.is_root() {
            return Err(TreeError::RootRemoval);
        }
        if !self.nodes.contains_key(id) {
            return Err(TreeError::UnknownNode(id.clone()));
        }
        if !self.children_of(id).is_empty() {
            return Err(TreeError::NotALeaf(id.clone()));
        }
        let parent = self.parents.remove(id).expect("non-root node has a parent");
        if let Some(siblings) = self.children.get_mut(&parent) {
            siblings.retain(|(_, c)| c != id);
            if siblings.is_empty() {
                self.children.remove(&parent);
            }
        }
        Ok(self.nodes.shift_remove(id).expect("checked above"))
    }

    /// Pre-order traversal, root first, children in insertion order.
    pub fn nodes(&self) -> Vec<&Proposition> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![NodeId::root()];
        while let Some(id) = stack.pop() {
            out.push(&self.nodes[&id]);
            for (_, child) in self.children_of(&id).iter().rev() {
                stack.push(child.clone());
            }
        }
        out
    }

    /// Nodes without children, in pre-order. A root-only tree yields the root.
    pub fn leaves(&self) -> Vec<&Proposition> {
        self.nodes()
            .into_iter()
            .filter(|p| self.children_of(&p.id).is_empty())
            .collect()
    }

    /// Edges in pre-order of their child.
    pub fn edges(&self) -> Vec<Edge> {
        self.nodes()
            .into_iter()
            .skip(1)
            .map(|p| Edge {
                parent: self.parents[&p.id].clone(),
                label: p.path_label.last().expect("non-root node has a label"),
                child: p.id.clone(),
            })
            .collect()
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            root: NodeId::root(),
            nodes: self.nodes().into_iter().cloned().collect(),
            edges: self.edges(),
            config: self.config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument =
            serde_json::from_str(raw).map_err(|e| TreeError::Malformed(e.to_string()))?;
        MaieuticTree::try_from(doc)
    }

    /// Graphviz rendering. Node labels are truncated text; fill color follows
    /// the assigned truth value when one is given.
    pub fn to_dot(&self, truth: &BTreeMap<NodeId, bool>) -> String {
        let mut out = String::from("digraph maieutic {\n  node [shape=box, style=filled];\n");
        for p in self.nodes() {
            let color = match truth.get(&p.id) {
                Some(true) => "palegreen",
                Some(false) => "lightpink",
                None => "white",
            };
            out.push_str(&format!(
                "  \"{}\" [label=\"{}\", fillcolor={}];\n",
                p.id,
                dot_escape(&truncate(&p.text, 40)),
                color
            ));
        }
        for e in self.edges() {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
                e.parent, e.child, e.label
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn truncate(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        text.to_string()
    } else {
        let mut s: String = text.chars().take(max_chars - 1).collect();
        s.push('…');
        s
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Flat JSON form of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub root: NodeId,
    pub nodes: Vec<Proposition>,
    pub edges: Vec<Edge>,
    pub config: TreeConfig,
}

impl From<MaieuticTree> for TreeDocument {
    fn from(tree: MaieuticTree) -> Self {
        tree.to_document()
    }
}

impl TryFrom<TreeDocument> for MaieuticTree {
    type Error = TreeError;

    fn try_from(doc: TreeDocument) -> Result<Self, Self::Error> {
        if !doc.root.is_root() {
            return Err(TreeError::Malformed(format!(
                "root id must be `root`, got {}",
                doc.root
            )));
        }
        let mut by_id: IndexMap<NodeId, Proposition> = IndexMap::new();
        for node in doc.nodes {
            node.validate().map_err(TreeError::Malformed)?;
            if by_id.contains_key(&node.id) {
                return Err(TreeError::DuplicateNode(node.id));
            }
            by_id.insert(node.id.clone(), node);
        }
        let root = by_id
            .shift_remove(&doc.root)
            .ok_or_else(|| TreeError::Malformed("root node missing".into()))?;
        if root.depth() != 0 {
            return Err(TreeError::Malformed(
                "root has a non-empty path label".into(),
            ));
        }
        let mut tree = MaieuticTree::new(root, doc.config);
        let mut children = std::collections::HashSet::new();
        for e in &doc.edges {
            if !children.insert(e.child.clone()) {
                return Err(TreeError::Malformed(format!(
                    "node {} has two parents",
                    e.child
                )));
            }
        }
        // Attach edges whose parent is already placed until no progress.
        let mut pending = doc.edges;
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for e in pending {
                if tree.nodes.contains_key(&e.parent) {
                    let child = by_id
                        .shift_remove(&e.child)
                        .ok_or_else(|| TreeError::UnknownNode(e.child.clone()))?;
                    tree.add_child(&e.parent, e.label, child)?;
                } else {
                    rest.push(e);
                }
            }
            if rest.len() == before {
                return Err(TreeError::Malformed(
                    "edges do not form a tree reachable from the root".into(),
                ));
            }
            pending = rest;
        }
        if let Some((id, _)) = by_id.first() {
            return Err(TreeError::Malformed(format!("node {id} has no parent")));
        }
        Ok(tree)
    }
}
