//! Path graph loading and shortest-path search.
//!
//! Map files are plain text, one polyline per line:
//!
//! ```text
//! # comment
//! LINE 0,0 10,0 10,10
//! LINE:water 10,10 500,10
//! ```
//!
//! Vertices are deduplicated by exact coordinate match, so polylines that
//! share an endpoint are joined. The optional tag restricts which node
//! groups may travel an edge (`land`, `water` or `both`, default `both`).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: zero-length segment at ({x}, {y})")]
    ZeroLength { line: usize, x: f64, y: f64 },
    #[error("map is empty")]
    Empty,
    #[error("graph is disconnected: component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },
    #[error("no path from vertex {from} to vertex {to}")]
    Unreachable { from: VertexId, to: VertexId },
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Which kind of traveller may use an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeTag {
    Land,
    Water,
    Both,
}

impl EdgeTag {
    fn merge(self, other: EdgeTag) -> EdgeTag {
        if self == other {
            self
        } else {
            EdgeTag::Both
        }
    }
}

impl fmt::Display for EdgeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeTag::Land => "land",
            EdgeTag::Water => "water",
            EdgeTag::Both => "both",
        })
    }
}

/// Which edges a node group is allowed to travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terrain {
    Land,
    Water,
    Any,
}

impl Terrain {
    pub fn allows(self, tag: EdgeTag) -> bool {
        match self {
            Terrain::Any => true,
            Terrain::Land => tag != EdgeTag::Water,
            Terrain::Water => tag != EdgeTag::Land,
        }
    }

    pub fn parse(s: &str) -> Option<Terrain> {
        match s {
            "land" => Some(Terrain::Land),
            "water" => Some(Terrain::Water),
            "any" => Some(Terrain::Any),
            _ => None,
        }
    }
}

impl fmt::Display for Terrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Terrain::Land => "land",
            Terrain::Water => "water",
            Terrain::Any => "any",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
    pub tag: EdgeTag,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Undirected planar graph that nodes move on. Coordinates are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGraph {
    vertices: Vec<Point>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
}

impl PathGraph {
    /// Builds a graph from explicit vertices and `(a, b, tag)` edges.
    /// Edge lengths are computed from the coordinates.
    pub fn new(vertices: Vec<Point>, edges: &[(VertexId, VertexId, EdgeTag)]) -> Result<Self, MapError> {
        let mut graph = PathGraph { adjacency: vec![Vec::new(); vertices.len()], vertices, edges: Vec::new() };
        for &(a, b, tag) in edges {
            for v in [a, b] {
                if v >= graph.vertices.len() {
                    return Err(MapError::UnknownVertex(v));
                }
            }
            if a == b || graph.vertices[a] == graph.vertices[b] {
                let p = graph.vertices[a];
                return Err(MapError::ZeroLength { line: 0, x: p.x, y: p.y });
            }
            graph.add_edge(a, b, tag);
        }
        Ok(graph)
    }

    fn add_edge(&mut self, a: VertexId, b: VertexId, tag: EdgeTag) {
        if let Some(&(_, e)) = self.adjacency[a].iter().find(|(n, _)| *n == b) {
            self.edges[e].tag = self.edges[e].tag.merge(tag);
            return;
        }
        let id = self.edges.len();
        let length = self.vertices[a].distance(&self.vertices[b]);
        self.edges.push(Edge { a, b, length, tag });
        self.adjacency[a].push((b, id));
        self.adjacency[b].push((a, id));
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: VertexId) -> Point {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, e)| e)
    }

    /// Sizes of the connected components reachable over edges that
    /// `terrain` allows, largest first. Vertices with no allowed edge are
    /// not counted.
    pub fn component_sizes(&self, terrain: Terrain) -> Vec<usize> {
        let mut seen = vec![false; self.vertices.len()];
        let mut sizes = Vec::new();
        for start in 0..self.vertices.len() {
            if seen[start] || !self.touches(start, terrain) {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for &(n, e) in &self.adjacency[v] {
                    if !seen[n] && terrain.allows(self.edges[e].tag) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// Vertices incident to at least one edge usable under `terrain`.
    pub fn usable_vertices(&self, terrain: Terrain) -> Vec<VertexId> {
        (0..self.vertices.len()).filter(|&v| self.touches(v, terrain)).collect()
    }

    fn touches(&self, v: VertexId, terrain: Terrain) -> bool {
        self.adjacency[v].iter().any(|&(_, e)| terrain.allows(self.edges[e].tag))
    }

    /// Minimum-length vertex sequence from `from` to `to` over edges that
    /// `terrain` allows. Among equal-cost paths the predecessor with the
    /// smaller vertex index wins.
    pub fn shortest_path(&self, from: VertexId, to: VertexId, terrain: Terrain) -> Result<Vec<VertexId>, MapError> {
        let n = self.vertices.len();
        for v in [from, to] {
            if v >= n {
                return Err(MapError::UnknownVertex(v));
            }
        }
        if from == to {
            return Ok(vec![from]);
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<VertexId>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(QueueEntry { cost: 0.0, vertex: from });
        while let Some(QueueEntry { cost, vertex: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == to {
                break;
            }
            for &(v, e) in &self.adjacency[u] {
                if done[v] || !terrain.allows(self.edges[e].tag) {
                    continue;
                }
                let candidate = cost + self.edges[e].length;
                let better = candidate < dist[v] || (candidate == dist[v] && pred[v].is_some_and(|p| u < p));
                if better {
                    dist[v] = candidate;
                    pred[v] = Some(u);
                    heap.push(QueueEntry { cost: candidate, vertex: v });
                }
            }
        }
        if !done[to] {
            return Err(MapError::Unreachable { from, to });
        }
        let mut path = vec![to];
        let mut cur = to;
        while let Some(p) = pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        debug_assert_eq!(path[0], from);
        Ok(path)
    }

    pub fn path_length(&self, path: &[VertexId]) -> f64 {
        path.windows(2)
            .map(|w| {
                let e = self.edge_between(w[0], w[1]).expect("path uses a missing edge");
                self.edges[e].length
            })
            .sum()
    }

    /// Serializes the graph back into the map text format, one segment per line.
    pub fn to_map_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (a, b) = (self.vertices[e.a], self.vertices[e.b]);
            out.push_str(&format!("LINE:{} {},{} {},{}\n", e.tag, a.x, a.y, b.x, b.y));
        }
        out
    }
}

#[derive(Debug, PartialEq)]
struct QueueEntry {
    cost: f64,
    vertex: VertexId,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on vertex index
        other.cost.total_cmp(&self.cost).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Parses map text into a connected [`PathGraph`].
pub fn load_map(text: &str) -> Result<PathGraph, MapError> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<(u64, u64), VertexId> = HashMap::new();
    let mut segments: Vec<(VertexId, VertexId, EdgeTag)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let tag = match keyword {
            "LINE" | "LINE:both" => EdgeTag::Both,
            "LINE:land" => EdgeTag::Land,
            "LINE:water" => EdgeTag::Water,
            other => {
                return Err(MapError::Parse {
                    line: line_no,
                    message: format!("expected LINE[:land|water|both], found `{other}`"),
                })
            }
        };
        let numbers = rest
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| MapError::Parse { line: line_no, message: format!("invalid coordinate `{s}`") })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if numbers.len() % 2 != 0 {
            return Err(MapError::Parse { line: line_no, message: "odd number of coordinates".into() });
        }
        if numbers.len() < 4 {
            return Err(MapError::Parse { line: line_no, message: "a polyline needs at least two points".into() });
        }
        let mut prev: Option<VertexId> = None;
        for pair in numbers.chunks(2) {
            let p = Point::new(pair[0], pair[1]);
            // normalise -0.0 so it dedups with 0.0
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            let v = *index.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            });
            if let Some(u) = prev {
                if u == v {
                    return Err(MapError::ZeroLength { line: line_no, x: p.x, y: p.y });
                }
                segments.push((u, v, tag));
            }
            prev = Some(v);
        }
    }

    if vertices.is_empty() {
        return Err(MapError::Empty);
    }
    let graph = PathGraph::new(vertices, &segments)?;
    let sizes = graph.component_sizes(Terrain::Any);
    if sizes.len() > 1 {
        return Err(MapError::Disconnected { sizes });
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment_is_three_four_five() {
        let g = load_map("LINE 0,0 3,4").unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edges().len(), 1);
        assert!((g.edge(0).length - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_length_segment_rejected() {
        assert_eq!(load_map("LINE 0,0 0,0"), Err(MapError::ZeroLength { line: 1, x: 0.0, y: 0.0 }));
    }

    #[test]
    fn shared_endpoint_is_deduplicated() {
        let g = load_map("LINE 0,0 1,1\nLINE 1,1 2,0\n").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.component_sizes(Terrain::Any), vec![3]);
    }

    #[test]
    fn whitespace_separated_coordinates_accepted() {
        let g = load_map("LINE 0 0  3 4").unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = load_map("LINE 0,0 1,0\n\nLINE 1,0 x,2").unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 3, .. }), "{err}");
        let err = load_map("# header\nPOLY 0,0 1,0").unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 2, .. }));
        let err = load_map("LINE 0,0 1").unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 1, .. }));
    }

    #[test]
    fn disconnected_map_lists_components() {
        let err = load_map("LINE 0,0 1,0 2,0\nLINE 10,10 11,10").unwrap_err();
        assert_eq!(err, MapError::Disconnected { sizes: vec![3, 2] });
    }

    #[test]
    fn duplicate_segments_merge_tags() {
        let g = load_map("LINE:land 0,0 1,0\nLINE:water 1,0 0,0").unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edge(0).tag, EdgeTag::Both);
    }

    #[test]
    fn path_to_self_is_trivial() {
        let g = load_map("LINE 0,0 1,0").unwrap();
        assert_eq!(g.shortest_path(1, 1, Terrain::Any).unwrap(), vec![1]);
        assert_eq!(g.path_length(&[1]), 0.0);
    }

    #[test]
    fn line_graph_has_only_one_path() {
        let g = load_map("LINE 0,0 1,0 2,0").unwrap();
        assert_eq!(g.shortest_path(0, 2, Terrain::Any).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn triangle_prefers_two_short_hops() {
        // lengths 1, 1, 3 are not realisable with straight edges, so the
        // long side is a bent polyline of total length 3
        let g = load_map("LINE 0,0 1,0 2,0\nLINE 0,0 0,0.5 2,0.5 2,0").unwrap();
        assert!((g.path_length(&[0, 3, 4, 2]) - 3.0).abs() < 1e-12);
        let p = g.shortest_path(0, 2, Terrain::Any).unwrap();
        assert_eq!(p, vec![0, 1, 2]);
        assert!((g.path_length(&p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equal_cost_tie_breaks_on_smaller_predecessor() {
        // square 0-1-3 and 0-2-3 both length 2
        let g = PathGraph::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)],
            &[(0, 2, EdgeTag::Both), (2, 3, EdgeTag::Both), (0, 1, EdgeTag::Both), (1, 3, EdgeTag::Both)],
        )
        .unwrap();
        assert_eq!(g.shortest_path(0, 3, Terrain::Any).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn terrain_filters_edges() {
        let g = load_map("LINE:land 0,0 1,0 2,0\nLINE:water 0,0 0,5 2,0").unwrap();
        assert_eq!(g.shortest_path(0, 2, Terrain::Water).unwrap(), vec![0, 3, 2]);
        assert_eq!(g.shortest_path(0, 2, Terrain::Land).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.usable_vertices(Terrain::Land), vec![0, 1, 2]);
        let err = g.shortest_path(1, 3, Terrain::Land).unwrap_err();
        assert_eq!(err, MapError::Unreachable { from: 1, to: 3 });
    }

    #[test]
    fn text_round_trip_preserves_graph() {
        let g = load_map("LINE:land 0,0 1,0 2,0\nLINE:water 0,0 0,5 2,0").unwrap();
        let again = load_map(&g.to_map_text()).unwrap();
        assert_eq!(g, again);
    }
}
