//! Directed acyclic graphs over named vertices and the purely graphical
//! tests used for identification: kin queries, d-separation, back-door
//! admissibility, structural-zero patterns, and the odd-cycle condition.
//!
//! Everything here is immutable after construction and reads independence
//! structure off the graph alone (faithfulness); no numbers are involved.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a vertex in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    /// Measured in the data.
    Observed,
    /// Unmeasured common cause.
    Latent,
    /// Sink variable whose interval truncation selects the sample.
    Selection,
}

/// Kin relation for [`Dag::relatives`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Parents,
    Ancestors,
    Descendants,
    NonDescendants,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VertexSpec {
    name: String,
    kind: VertexKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<VertexSpec>,
    edges: Vec<(String, String)>,
}

/// A directed acyclic graph with observed/latent/selection vertices.
///
/// Vertex order is the declaration order (file order for parsed graphs) and
/// is preserved by every operation that returns vertex lists.
#[derive(Debug, Clone)]
pub struct Dag {
    names: Vec<String>,
    kinds: Vec<VertexKind>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG from `(name, kind)` vertices and `(parent, child)` edges.
    pub fn new<S: AsRef<str>>(vertices: &[(S, VertexKind)], edges: &[(S, S)]) -> Result<Self> {
        let mut names = Vec::with_capacity(vertices.len());
        let mut kinds = Vec::with_capacity(vertices.len());
        let mut index = HashMap::new();
        for (name, kind) in vertices {
            let name = name.as_ref().to_owned();
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(Error::DuplicateVertex(name));
            }
            names.push(name);
            kinds.push(*kind);
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut edge_idx = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for (p, c) in edges {
            let pi = *index
                .get(p.as_ref())
                .ok_or_else(|| Error::UnknownVertex(p.as_ref().to_owned()))?;
            let ci = *index
                .get(c.as_ref())
                .ok_or_else(|| Error::UnknownVertex(c.as_ref().to_owned()))?;
            if pi == ci {
                return Err(Error::CyclicGraph);
            }
            if seen.insert((pi, ci)) {
                parents[ci].push(pi);
                children[pi].push(ci);
                edge_idx.push((pi, ci));
            }
        }
        for v in 0..n {
            if kinds[v] == VertexKind::Selection && !children[v].is_empty() {
                return Err(Error::SelectionHasChildren(names[v].clone()));
            }
        }
        let topo = topological_order(n, &parents, &children)?;
        Ok(Dag {
            names,
            kinds,
            index,
            parents,
            children,
            edges: edge_idx,
            topo,
        })
    }

    /// Parses the JSON graph format:
    /// `{"vertices":[{"name":"X","kind":"observed"},...],"edges":[["Z","X"],...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        let vertices: Vec<(String, VertexKind)> =
            file.vertices.into_iter().map(|v| (v.name, v.kind)).collect();
        let edges: Vec<(String, String)> = file.edges;
        Dag::new(&vertices, &edges.iter().map(|(a, b)| (a.clone(), b.clone())).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self
                .names
                .iter()
                .zip(&self.kinds)
                .map(|(n, k)| VertexSpec {
                    name: n.clone(),
                    kind: *k,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(p, c)| (self.names[p].clone(), self.names[c].clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .map(move |&(p, c)| (self.names[p].as_str(), self.names[c].as_str()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn kind(&self, name: &str) -> Result<VertexKind> {
        Ok(self.kinds[self.index_of(name)?])
    }

    /// Names of all vertices of the given kind, in declaration order.
    pub fn vertices_of_kind(&self, kind: VertexKind) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == kind)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub(crate) fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_owned()))
    }

    fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|s| self.index_of(s.as_ref())).collect()
    }

    pub(crate) fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub(crate) fn parent_indices(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub(crate) fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn descendants_idx(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &c in &self.children[u] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    fn ancestors_idx(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &p in &self.parents[u] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Kin query. `Ancestors`/`Descendants` exclude the vertex itself;
    /// `NonDescendants` is everything outside `{v} ∪ descendants(v)`.
    pub fn relatives(&self, v: &str, relation: Relation) -> Result<BTreeSet<String>> {
        let vi = self.index_of(v)?;
        let mask: Vec<bool> = match relation {
            Relation::Parents => {
                let mut m = vec![false; self.names.len()];
                for &p in &self.parents[vi] {
                    m[p] = true;
                }
                m
            }
            Relation::Ancestors => self.ancestors_idx(vi),
            Relation::Descendants => self.descendants_idx(vi),
            Relation::NonDescendants => {
                let desc = self.descendants_idx(vi);
                (0..self.names.len()).map(|i| !desc[i] && i != vi).collect()
            }
        };
        Ok(mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.names[i].clone())
            .collect())
    }

    pub fn is_descendant_of(&self, v: &str, ancestor: &str) -> Result<bool> {
        let vi = self.index_of(v)?;
        let ai = self.index_of(ancestor)?;
        Ok(self.descendants_idx(ai)[vi])
    }

    /// Vertices reachable from `sources` along active trails given `given`,
    /// optionally ignoring every edge out of `cut_out` (used by the back-door
    /// test). Standard two-direction reachability over (vertex, direction)
    /// states: a state records whether the trail enters through a parent or
    /// a child, which is what collider blocking depends on.
    fn reachable(&self, sources: &[usize], given: &[usize], cut_out: Option<usize>) -> Vec<bool> {
        let n = self.names.len();
        let mut in_given = vec![false; n];
        for &g in given {
            in_given[g] = true;
        }
        let skip = |p: usize| cut_out == Some(p);

        // ancestors of the conditioning set, conditioning set included
        let mut anc_given = vec![false; n];
        let mut queue: VecDeque<usize> = given.iter().copied().collect();
        for &g in given {
            anc_given[g] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &p in &self.parents[u] {
                if !skip(p) && !anc_given[p] {
                    anc_given[p] = true;
                    queue.push_back(p);
                }
            }
        }

        // direction 0: entered from a child (or source), 1: entered from a parent
        let mut visited = vec![[false; 2]; n];
        let mut reached = vec![false; n];
        let mut stack: Vec<(usize, usize)> = sources.iter().map(|&s| (s, 0)).collect();
        while let Some((v, dir)) = stack.pop() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if !in_given[v] {
                reached[v] = true;
            }
            if dir == 0 && !in_given[v] {
                for &p in &self.parents[v] {
                    if !skip(p) {
                        stack.push((p, 0));
                    }
                }
                if !skip(v) {
                    for &c in &self.children[v] {
                        stack.push((c, 1));
                    }
                }
            } else if dir == 1 {
                if !in_given[v] && !skip(v) {
                    for &c in &self.children[v] {
                        stack.push((c, 1));
                    }
                }
                if anc_given[v] {
                    for &p in &self.parents[v] {
                        if !skip(p) {
                            stack.push((p, 0));
                        }
                    }
                }
            }
        }
        reached
    }

    fn check_disjoint(sets: &[&[usize]], names: &[String]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for set in sets {
            for &v in *set {
                if !seen.insert(v) {
                    return Err(Error::OverlappingSets(names[v].clone()));
                }
            }
        }
        Ok(())
    }

    /// True iff every path between `a` and `b` is blocked by `c` under the
    /// usual collider/non-collider rules. `a`, `b`, `c` must be pairwise
    /// disjoint.
    pub fn d_separated<S: AsRef<str>>(&self, a: &[S], b: &[S], c: &[S]) -> Result<bool> {
        let ai = self.indices_of(a)?;
        let bi = self.indices_of(b)?;
        let ci = self.indices_of(c)?;
        Self::check_disjoint(&[&ai, &bi, &ci], &self.names)?;
        let reached = self.reachable(&ai, &ci, None);
        Ok(!bi.iter().any(|&v| reached[v]))
    }

    /// Back-door admissibility of `z` relative to `(x, y)`: no member of `z`
    /// is a descendant of `x`, and `z` d-separates `x` from `y` once every
    /// edge out of `x` is removed.
    pub fn back_door_admissible<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S]) -> Result<bool> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let zi = self.indices_of(z)?;
        Self::check_disjoint(&[&[xi], &[yi], &zi], &self.names)?;
        let desc_x = self.descendants_idx(xi);
        if zi.iter().any(|&v| desc_x[v]) {
            return Ok(false);
        }
        let reached = self.reachable(&[xi], &zi, Some(xi));
        Ok(!reached[yi])
    }

    /// Reads the structural zeros of a conditional covariance (mode
    /// `Covariance`) or concentration (mode `Concentration`) matrix off the
    /// graph: a pair is a zero exactly when the corresponding d-separation
    /// holds. Zeros come from the graph, never from data.
    pub fn zero_pattern<S: AsRef<str>>(
        &self,
        vars: &[S],
        given: &[S],
        mode: PatternMode,
    ) -> Result<ZeroPattern> {
        let vi = self.indices_of(vars)?;
        let gi = self.indices_of(given)?;
        Self::check_disjoint(&[&vi, &gi], &self.names)?;
        let var_names: Vec<String> = vi.iter().map(|&i| self.names[i].clone()).collect();
        let mut absent = BTreeSet::new();
        for (p, &i) in vi.iter().enumerate() {
            for (q, &j) in vi.iter().enumerate().skip(p + 1) {
                let mut cond: Vec<usize> = gi.clone();
                if mode == PatternMode::Concentration {
                    cond.extend(vi.iter().filter(|&&v| v != i && v != j));
                }
                let reached = self.reachable(&[i], &cond, None);
                if !reached[j] {
                    absent.insert((p, q));
                }
            }
        }
        ZeroPattern::from_index_pairs(var_names, absent, mode)
    }
}

fn topological_order(
    n: usize,
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    // smallest-index-first keeps the order deterministic
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicGraph);
    }
    Ok(order)
}

/// Whether a zero pattern records vanishing covariances or vanishing
/// concentrations (entries of the inverse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternMode {
    Covariance,
    Concentration,
}

/// Structural zeros of a (conditional) covariance or concentration matrix
/// over a named variable set: `absent` pairs are the entries known to vanish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroPattern {
    variables: Vec<String>,
    absent: BTreeSet<(usize, usize)>,
    mode: PatternMode,
}

impl ZeroPattern {
    /// Builds a pattern from variable names and unordered absent pairs.
    pub fn new<S: AsRef<str>>(
        variables: &[S],
        absent_pairs: &[(S, S)],
        mode: PatternMode,
    ) -> Result<Self> {
        let variables: Vec<String> = variables.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(v.clone()));
            }
        }
        let mut absent = BTreeSet::new();
        for (a, b) in absent_pairs {
            let ai = *index
                .get(a.as_ref())
                .ok_or_else(|| Error::UnknownLabel(a.as_ref().to_owned()))?;
            let bi = *index
                .get(b.as_ref())
                .ok_or_else(|| Error::UnknownLabel(b.as_ref().to_owned()))?;
            if ai == bi {
                return Err(Error::Parse(format!(
                    "self-pair ({}, {}) in zero pattern",
                    a.as_ref(),
                    b.as_ref()
                )));
            }
            absent.insert((ai.min(bi), ai.max(bi)));
        }
        Ok(ZeroPattern {
            variables,
            absent,
            mode,
        })
    }

    fn from_index_pairs(
        variables: Vec<String>,
        absent: BTreeSet<(usize, usize)>,
        mode: PatternMode,
    ) -> Result<Self> {
        Ok(ZeroPattern {
            variables,
            absent,
            mode,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn mode(&self) -> PatternMode {
        self.mode
    }

    pub fn absent_index_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.absent.iter().copied()
    }

    pub fn absent_pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.absent
            .iter()
            .map(move |&(i, j)| (self.variables[i].as_str(), self.variables[j].as_str()))
    }

    pub fn is_absent(&self, a: &str, b: &str) -> Result<bool> {
        let ai = self
            .variables
            .iter()
            .position(|v| v == a)
            .ok_or_else(|| Error::UnknownLabel(a.to_owned()))?;
        let bi = self
            .variables
            .iter()
            .position(|v| v == b)
            .ok_or_else(|| Error::UnknownLabel(b.to_owned()))?;
        Ok(self.absent.contains(&(ai.min(bi), ai.max(bi))))
    }

    /// The graph whose edges are exactly the absent pairs, i.e. the
    /// complement of the presence graph this pattern encodes.
    pub fn zeros_graph(&self) -> UndirectedGraph {
        UndirectedGraph::from_index_edges(self.variables.len(), self.absent.iter().copied())
    }

    /// Odd-cycle identifiability of the rank-one decomposition this pattern
    /// licenses: every connected component of the zeros graph must contain an
    /// odd cycle, and every variable must touch at least one structural zero
    /// (a variable with no zero constraint leaves its loading free, so the
    /// system would be underdetermined).
    pub fn odd_cycle_identifiable(&self) -> bool {
        let n = self.variables.len();
        if n < 3 {
            return false;
        }
        let g = self.zeros_graph();
        if (0..n).any(|v| g.degree(v) == 0) {
            return false;
        }
        for comp in g.components() {
            if !g.component_has_odd_cycle(&comp) {
                return false;
            }
        }
        true
    }
}

/// Plain undirected graph over indexed vertices; used for zero structures.
#[derive(Debug, Clone)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        Self::from_index_edges(n, edges.iter().copied())
    }

    fn from_index_edges(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a != b && a < n && b < n {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        UndirectedGraph { adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn component_has_odd_cycle(&self, comp: &[usize]) -> bool {
        // non-bipartite <=> contains an odd cycle
        let n = self.adj.len();
        let mut color = vec![-1i8; n];
        let start = match comp.first() {
            Some(&s) => s,
            None => return false,
        };
        color[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if color[w] == -1 {
                    color[w] = 1 - color[u];
                    queue.push_back(w);
                } else if color[w] == color[u] {
                    return true;
                }
            }
        }
        false
    }

    /// True iff the graph contains an odd cycle (equivalently, is not
    /// bipartite), checked per connected component.
    pub fn has_odd_cycle(&self) -> bool {
        self.components()
            .iter()
            .any(|c| self.component_has_odd_cycle(c))
    }

    /// An odd cycle within the given component, as a vertex sequence, if one
    /// exists. BFS two-coloring; the first same-color edge closes the cycle
    /// through the two tree paths to the lowest common ancestor.
    pub fn find_odd_cycle(&self, comp: &[usize]) -> Option<Vec<usize>> {
        let n = self.adj.len();
        let mut color = vec![-1i8; n];
        let mut parent = vec![usize::MAX; n];
        let mut depth = vec![0usize; n];
        let start = *comp.first()?;
        color[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if color[w] == -1 {
                    color[w] = 1 - color[u];
                    parent[w] = u;
                    depth[w] = depth[u] + 1;
                    queue.push_back(w);
                } else if color[w] == color[u] {
                    // walk both endpoints up to their common ancestor
                    let (mut a, mut b) = (u, w);
                    let mut pa = vec![a];
                    let mut pb = vec![b];
                    while depth[a] > depth[b] {
                        a = parent[a];
                        pa.push(a);
                    }
                    while depth[b] > depth[a] {
                        b = parent[b];
                        pb.push(b);
                    }
                    while a != b {
                        a = parent[a];
                        b = parent[b];
                        pa.push(a);
                        pb.push(b);
                    }
                    pb.pop(); // common ancestor listed once
                    pb.reverse();
                    pa.extend(pb);
                    return Some(pa);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VertexKind::*;

    fn chain3() -> Dag {
        Dag::new(
            &[("A", Observed), ("B", Observed), ("C", Observed)],
            &[("A", "B"), ("B", "C")],
        )
        .unwrap()
    }

    pub(crate) fn fig2_like() -> Dag {
        // latent U into every observed vertex, plus Z -> X -> Y <- W
        Dag::new(
            &[
                ("U", Latent),
                ("Z", Observed),
                ("W", Observed),
                ("X", Observed),
                ("Y", Observed),
            ],
            &[
                ("U", "X"),
                ("U", "Y"),
                ("U", "Z"),
                ("U", "W"),
                ("Z", "X"),
                ("X", "Y"),
                ("W", "Y"),
            ],
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn relatives_chain() {
        let g = chain3();
        assert_eq!(g.relatives("B", Relation::Parents).unwrap(), set(&["A"]));
        assert_eq!(
            g.relatives("A", Relation::Descendants).unwrap(),
            set(&["B", "C"])
        );
        assert_eq!(g.relatives("C", Relation::Ancestors).unwrap(), set(&["A", "B"]));
    }

    #[test]
    fn relatives_nondescendants() {
        let g = fig2_like();
        assert_eq!(
            g.relatives("X", Relation::NonDescendants).unwrap(),
            set(&["U", "Z", "W"])
        );
    }

    #[test]
    fn relatives_unknown_vertex() {
        let g = chain3();
        assert!(matches!(
            g.relatives("nope", Relation::Parents),
            Err(Error::UnknownVertex(_))
        ));
    }

    #[test]
    fn dsep_chain_blocked_by_middle() {
        let g = Dag::new(
            &[("X", Observed), ("Z", Observed), ("Y", Observed)],
            &[("X", "Z"), ("Z", "Y")],
        )
        .unwrap();
        assert!(g.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        assert!(!g.d_separated(&["X"], &["Y"], &[] as &[&str]).unwrap());
    }

    #[test]
    fn dsep_collider() {
        let g = Dag::new(
            &[("X", Observed), ("Z", Observed), ("Y", Observed)],
            &[("X", "Z"), ("Y", "Z")],
        )
        .unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        assert!(g.d_separated(&["X"], &["Y"], &[] as &[&str]).unwrap());
    }

    #[test]
    fn dsep_collider_descendant_opens() {
        // conditioning on a descendant of a collider also opens it
        let g = Dag::new(
            &[
                ("X", Observed),
                ("Z", Observed),
                ("Y", Observed),
                ("D", Observed),
            ],
            &[("X", "Z"), ("Y", "Z"), ("Z", "D")],
        )
        .unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &["D"]).unwrap());
    }

    #[test]
    fn dsep_fig2_theorem_condition() {
        let g = fig2_like();
        assert!(g.d_separated(&["Y"], &["Z"], &["X", "U"]).unwrap());
        assert!(g.d_separated(&["X", "Z"], &["W"], &["U"]).unwrap());
        assert!(!g.d_separated(&["Z"], &["W"], &["X"]).unwrap());
    }

    #[test]
    fn dsep_rejects_overlap() {
        let g = chain3();
        assert!(matches!(
            g.d_separated(&["A"], &["A"], &["B"]),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn back_door_confounder() {
        let g = Dag::new(
            &[("U", Observed), ("X", Observed), ("Y", Observed)],
            &[("U", "X"), ("U", "Y"), ("X", "Y")],
        )
        .unwrap();
        assert!(g.back_door_admissible("X", "Y", &["U"]).unwrap());
        assert!(!g.back_door_admissible("X", "Y", &[] as &[&str]).unwrap());
    }

    #[test]
    fn back_door_chain_empty_set() {
        let g = Dag::new(&[("X", Observed), ("Y", Observed)], &[("X", "Y")]).unwrap();
        assert!(g.back_door_admissible("X", "Y", &[] as &[&str]).unwrap());
    }

    #[test]
    fn back_door_rejects_descendant() {
        let g = Dag::new(
            &[("X", Observed), ("M", Observed), ("Y", Observed)],
            &[("X", "M"), ("M", "Y")],
        )
        .unwrap();
        assert!(!g.back_door_admissible("X", "Y", &["M"]).unwrap());
    }

    #[test]
    fn back_door_fig2() {
        let g = fig2_like();
        assert!(g.back_door_admissible("X", "Y", &["U"]).unwrap());
    }

    #[test]
    fn selection_must_be_sink() {
        let r = Dag::new(
            &[("S", Selection), ("X", Observed)],
            &[("S", "X")],
        );
        assert!(matches!(r, Err(Error::SelectionHasChildren(_))));
    }

    #[test]
    fn cycle_rejected() {
        let r = Dag::new(
            &[("A", Observed), ("B", Observed)],
            &[("A", "B"), ("B", "A")],
        );
        assert!(matches!(r, Err(Error::CyclicGraph)));
    }

    #[test]
    fn odd_cycle_triangle_square_edge() {
        let tri = UndirectedGraph::new(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(tri.has_odd_cycle());
        let square = UndirectedGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(!square.has_odd_cycle());
        let edge = UndirectedGraph::new(2, &[(0, 1)]);
        assert!(!edge.has_odd_cycle());
    }

    #[test]
    fn find_odd_cycle_returns_odd_closed_walk() {
        let g = UndirectedGraph::new(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]);
        let comps = g.components();
        let cyc = g.find_odd_cycle(&comps[0]).unwrap();
        assert_eq!(cyc.len() % 2, 1);
        for k in 0..cyc.len() {
            let a = cyc[k];
            let b = cyc[(k + 1) % cyc.len()];
            assert!(g.adj[a].contains(&b), "cycle edge missing: {a}-{b}");
        }
    }

    #[test]
    fn zero_pattern_star() {
        let mut vs = vec![("U".to_string(), Latent)];
        let mut es = Vec::new();
        for i in 1..=4 {
            vs.push((format!("X{i}"), Observed));
            es.push(("U".to_string(), format!("X{i}")));
        }
        let g = Dag::new(&vs, &es).unwrap();
        let vars = ["X1", "X2", "X3", "X4"];
        let p = g.zero_pattern(&vars, &["U"], PatternMode::Covariance).unwrap();
        assert_eq!(p.absent_index_pairs().count(), 6);
        let p0 = g
            .zero_pattern(&vars, &[] as &[&str], PatternMode::Covariance)
            .unwrap();
        assert_eq!(p0.absent_index_pairs().count(), 0);
    }

    #[test]
    fn zero_pattern_fig2_given_u() {
        let g = fig2_like();
        let p = g
            .zero_pattern(&["X", "Y", "Z", "W"], &["U"], PatternMode::Covariance)
            .unwrap();
        let absent: Vec<(String, String)> = p
            .absent_pairs()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(absent.len(), 2);
        assert!(p.is_absent("Z", "W").unwrap());
        assert!(p.is_absent("X", "W").unwrap());
        assert!(!p.is_absent("X", "Y").unwrap());
    }

    #[test]
    fn lemma_condition_examples() {
        // complete zeros over 5 variables: complement is K5
        let vars = ["a", "b", "c", "d", "e"];
        let mut pairs = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                pairs.push((vars[i], vars[j]));
            }
        }
        let p = ZeroPattern::new(&vars, &pairs, PatternMode::Covariance).unwrap();
        assert!(p.odd_cycle_identifiable());

        // 4-cycle of zeros: bipartite component
        let vars4 = ["a", "b", "c", "d"];
        let p4 = ZeroPattern::new(
            &vars4,
            &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")],
            PatternMode::Covariance,
        )
        .unwrap();
        assert!(!p4.odd_cycle_identifiable());

        // classical 3-indicator pattern
        let vars3 = ["a", "b", "c"];
        let p3 = ZeroPattern::new(
            &vars3,
            &[("a", "b"), ("b", "c"), ("a", "c")],
            PatternMode::Covariance,
        )
        .unwrap();
        assert!(p3.odd_cycle_identifiable());

        // a variable with no incident zero leaves its loading free
        let p_uncovered = ZeroPattern::new(
            &vars4,
            &[("a", "b"), ("b", "c"), ("a", "c")],
            PatternMode::Covariance,
        )
        .unwrap();
        assert!(!p_uncovered.odd_cycle_identifiable());

        // fewer than 3 variables can never hold an odd cycle
        let p2 = ZeroPattern::new(&["a", "b"], &[("a", "b")], PatternMode::Covariance).unwrap();
        assert!(!p2.odd_cycle_identifiable());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = fig2_like();
        let text = g.to_json();
        let g2 = Dag::from_json(&text).unwrap();
        assert_eq!(g2.names(), g.names());
        assert_eq!(
            g2.edges().collect::<Vec<_>>(),
            g.edges().collect::<Vec<_>>()
        );
        assert_eq!(g2.kind("U").unwrap(), Latent);
    }
}
