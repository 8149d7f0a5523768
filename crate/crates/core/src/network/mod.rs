//! Feeder data model, JSON network files and time-series profiles.

mod fixture;
mod profiles;

use std::collections::VecDeque;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use fixture::{builtin_network, builtin_test_feeder, FIXTURE_MAIN_BRANCH};
pub use profiles::{synth_profiles, synth_profiles_with, Profiles, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-unit bases of the feeder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bases {
    /// Line-to-line voltage base in volts.
    pub v_base_v: f64,
    /// Three-phase power base in kVA.
    pub s_base_kva: f64,
}

impl Bases {
    pub fn z_base_ohm(&self) -> f64 {
        self.v_base_v * self.v_base_v / (self.s_base_kva * 1e3)
    }

    pub fn i_base_a(&self) -> f64 {
        self.s_base_kva * 1e3 / (3f64.sqrt() * self.v_base_v)
    }
}

impl Default for Bases {
    fn default() -> Self {
        Bases {
            v_base_v: 400.0,
            s_base_kva: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Substation,
    Junction,
    Prosumer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub pv_kwp: f64,
    pub hp_kw: f64,
    pub peak_load_kw: f64,
    pub has_flexibility: bool,
}

impl Node {
    pub fn is_prosumer(&self) -> bool {
        self.kind == NodeKind::Prosumer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "r_pu")]
    pub r: f64,
    #[serde(rename = "x_pu")]
    pub x: f64,
    #[serde(rename = "s_max_pu")]
    pub s_max: f64,
    #[serde(rename = "theta_min_rad")]
    pub theta_min: f64,
    #[serde(rename = "theta_max_rad")]
    pub theta_max: f64,
}

impl Branch {
    /// Series admittance `1 / (r + jx)`.
    pub fn admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }
}

/// On-disk layout of a network file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    bases: Bases,
    slack: usize,
    #[serde(default = "default_radial")]
    radial: bool,
    nodes: Vec<Node>,
    branches: Vec<Branch>,
}

fn default_radial() -> bool {
    true
}

/// Spanning-tree orientation from the slack node.
#[derive(Debug, Clone, PartialEq)]
struct Tree {
    /// Parent node of every node (`None` for the slack).
    parent: Vec<Option<usize>>,
    /// Branch index linking a node to its parent.
    parent_branch: Vec<Option<usize>>,
    /// Nodes in breadth-first order from the slack.
    order: Vec<usize>,
    /// Hop count from the slack.
    depth: Vec<usize>,
}

/// A validated, immutable feeder.
///
/// Node ids are dense (`0..N`) so they double as array indices everywhere in
/// the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    bases: Bases,
    slack: usize,
    radial: bool,
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    tree: Tree,
    incident: Vec<Vec<usize>>,
}

impl Network {
    /// Builds and validates a network. Nodes may be given in any order.
    pub fn new(
        bases: Bases,
        slack: usize,
        mut nodes: Vec<Node>,
        branches: Vec<Branch>,
        radial: bool,
    ) -> Result<Self, NetworkError> {
        if !(bases.v_base_v > 0.0 && bases.s_base_kva > 0.0) {
            return Err(NetworkError::Validation(
                "bases must be strictly positive".into(),
            ));
        }
        nodes.sort_by_key(|n| n.id);
        let n = nodes.len();
        if n == 0 {
            return Err(NetworkError::Validation("network has no nodes".into()));
        }
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(NetworkError::Validation(format!(
                    "node ids must be unique and dense 0..{}; found {}",
                    n - 1,
                    node.id
                )));
            }
            validate_node(node, slack)?;
        }
        if slack >= n {
            return Err(NetworkError::Topology(format!(
                "slack node {slack} does not exist"
            )));
        }
        let substations = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Substation)
            .count();
        if substations != 1 || nodes[slack].kind != NodeKind::Substation {
            return Err(NetworkError::Topology(
                "exactly one substation node is required and it must be the slack".into(),
            ));
        }

        let mut incident = vec![Vec::new(); n];
        for (k, br) in branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if end >= n {
                    return Err(NetworkError::Topology(format!(
                        "branch {k} references unknown node {end}"
                    )));
                }
            }
            if br.from == br.to {
                return Err(NetworkError::Topology(format!(
                    "branch {k} is a self-loop on node {}",
                    br.from
                )));
            }
            validate_branch(k, br)?;
            incident[br.from].push(k);
            incident[br.to].push(k);
        }

        let tree = spanning_tree(n, slack, &branches, &incident)?;
        if radial && branches.len() != n - 1 {
            return Err(NetworkError::Topology(format!(
                "radial network with {n} nodes must have {} branches, found {} (cycle present)",
                n - 1,
                branches.len()
            )));
        }

        Ok(Network {
            bases,
            slack,
            radial,
            nodes,
            branches,
            tree,
            incident,
        })
    }

    /// Parses and validates a network JSON file.
    pub fn from_json_str(text: &str) -> Result<Self, NetworkError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: NetworkFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            NetworkError::Parse {
                field,
                message: e.into_inner().to_string(),
            }
        })?;
        Network::new(
            file.bases,
            file.slack,
            file.nodes,
            file.branches,
            file.radial,
        )
    }

    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            bases: self.bases,
            slack: self.slack,
            radial: self.radial,
            nodes: self.nodes.clone(),
            branches: self.branches.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn bases(&self) -> Bases {
        self.bases
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Branch indices incident to `node`.
    pub fn incident_branches(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    /// Parent of `node` in the slack-rooted spanning tree.
    pub fn parent(&self, node: usize) -> Option<usize> {
        self.tree.parent[node]
    }

    /// Branch joining `node` to its parent.
    pub fn parent_branch(&self, node: usize) -> Option<usize> {
        self.tree.parent_branch[node]
    }

    /// Nodes in breadth-first order from the slack.
    pub fn bfs_order(&self) -> &[usize] {
        &self.tree.order
    }

    /// Hop count from the slack.
    pub fn depth(&self, node: usize) -> usize {
        self.tree.depth[node]
    }

    /// Returns `(upstream, downstream)` ends of a branch with respect to the
    /// slack. For branches outside the spanning tree the stored orientation
    /// is returned.
    pub fn oriented_ends(&self, branch: usize) -> (usize, usize) {
        let br = &self.branches[branch];
        if self.tree.parent_branch[br.from] == Some(branch) {
            (br.to, br.from)
        } else {
            (br.from, br.to)
        }
    }

    /// Ids of prosumer nodes that offer flexibility.
    pub fn flexible_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.has_flexibility)
            .map(|n| n.id)
    }

    /// Mean of `r / x` over all branches.
    pub fn mean_r_over_x(&self) -> f64 {
        self.branches.iter().map(|b| b.r / b.x).sum::<f64>() / self.branches.len() as f64
    }

    /// Bus admittance matrix (dense, series elements only).
    pub fn ybus(&self) -> Vec<Vec<Complex64>> {
        let n = self.num_nodes();
        let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for br in &self.branches {
            let ys = br.admittance();
            y[br.from][br.from] += ys;
            y[br.to][br.to] += ys;
            y[br.from][br.to] -= ys;
            y[br.to][br.from] -= ys;
        }
        y
    }
}

fn validate_node(node: &Node, slack: usize) -> Result<(), NetworkError> {
    let id = node.id;
    for (name, v) in [
        ("pv_kwp", node.pv_kwp),
        ("hp_kw", node.hp_kw),
        ("peak_load_kw", node.peak_load_kw),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(NetworkError::Validation(format!(
                "node {id}: {name} must be finite and non-negative"
            )));
        }
    }
    match node.kind {
        NodeKind::Prosumer => {
            if node.peak_load_kw <= 0.0 {
                return Err(NetworkError::Validation(format!(
                    "node {id}: prosumer requires peak_load_kw > 0"
                )));
            }
        }
        NodeKind::Junction | NodeKind::Substation => {
            if node.peak_load_kw != 0.0 || node.pv_kwp != 0.0 || node.hp_kw != 0.0 {
                return Err(NetworkError::Validation(format!(
                    "node {id}: non-prosumer nodes carry no load or generation"
                )));
            }
            if node.has_flexibility {
                return Err(NetworkError::Validation(format!(
                    "node {id}: only prosumers can offer flexibility"
                )));
            }
        }
    }
    if node.kind == NodeKind::Substation && id != slack {
        return Err(NetworkError::Topology(format!(
            "substation node {id} is not the slack"
        )));
    }
    Ok(())
}

fn validate_branch(k: usize, br: &Branch) -> Result<(), NetworkError> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(br.r) || !positive(br.x) || !positive(br.s_max) {
        return Err(NetworkError::Validation(format!(
            "branch {k} ({}-{}): r, x and s_max must be strictly positive",
            br.from, br.to
        )));
    }
    if !(br.theta_min < 0.0 && br.theta_max > 0.0) {
        return Err(NetworkError::Validation(format!(
            "branch {k} ({}-{}): angle limits must satisfy theta_min < 0 < theta_max",
            br.from, br.to
        )));
    }
    if br.theta_min <= -std::f64::consts::FRAC_PI_2 || br.theta_max >= std::f64::consts::FRAC_PI_2 {
        return Err(NetworkError::Validation(format!(
            "branch {k} ({}-{}): angle limits must lie inside (-pi/2, pi/2)",
            br.from, br.to
        )));
    }
    Ok(())
}

fn spanning_tree(
    n: usize,
    slack: usize,
    branches: &[Branch],
    incident: &[Vec<usize>],
) -> Result<Tree, NetworkError> {
    let mut parent = vec![None; n];
    let mut parent_branch = vec![None; n];
    let mut depth = vec![0; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &k in &incident[u] {
            let br = &branches[k];
            let v = if br.from == u { br.to } else { br.from };
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                parent_branch[v] = Some(k);
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if order.len() != n {
        let missing: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        return Err(NetworkError::Topology(format!(
            "network is disconnected; unreachable nodes {missing:?}"
        )));
    }
    Ok(Tree {
        parent,
        parent_branch,
        order,
        depth,
    })
}

/// Reads and validates a network JSON file.
pub fn parse_network(path: impl AsRef<Path>) -> Result<Network, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Network::from_json_str(&text)
}
