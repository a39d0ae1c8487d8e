//! Shortest-path map-based movement.
//!
//! Each node repeatedly picks a random destination vertex, travels the
//! shortest path to it at its group's constant speed, optionally pauses,
//! and re-routes.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::map::{EdgeId, MapError, PathGraph, Point, Terrain, VertexId};

/// The part of the map a node group moves on.
#[derive(Debug, Clone)]
pub struct MovementArea {
    graph: Arc<PathGraph>,
    terrain: Terrain,
    vertices: Vec<VertexId>,
}

impl MovementArea {
    /// Fails when the edges usable under `terrain` do not form a single
    /// connected component of at least two vertices.
    pub fn new(graph: Arc<PathGraph>, terrain: Terrain) -> Result<Self, MapError> {
        let sizes = graph.component_sizes(terrain);
        if sizes.len() != 1 {
            return Err(MapError::Disconnected { sizes });
        }
        let vertices = graph.usable_vertices(terrain);
        Ok(MovementArea { graph, terrain, vertices })
    }

    pub fn graph(&self) -> &PathGraph {
        &self.graph
    }

    pub fn terrain(&self) -> Terrain {
        self.terrain
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    fn route(&self, from: VertexId, to: VertexId) -> VecDeque<VertexId> {
        let path = self.graph.shortest_path(from, to, self.terrain).expect("movement area is connected");
        path.into_iter().skip(1).collect()
    }
}

/// Uniform choice over `candidates`, skipping `exclude` when there is any
/// other option. Consumes exactly one draw.
pub fn pick_destination<R: Rng + ?Sized>(rng: &mut R, candidates: &[VertexId], exclude: Option<VertexId>) -> VertexId {
    assert!(!candidates.is_empty(), "no destination candidates");
    let excluded_at = exclude.and_then(|x| candidates.iter().position(|&v| v == x));
    match excluded_at {
        Some(skip) if candidates.len() > 1 => {
            let i = rng.gen_range(0..candidates.len() - 1);
            candidates[if i >= skip { i + 1 } else { i }]
        }
        _ => candidates[rng.gen_range(0..candidates.len())],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heading {
    /// Moving from `edge.a` towards `edge.b`.
    Forward,
    /// Moving from `edge.b` towards `edge.a`.
    Backward,
}

/// Where a node is on the map and where it is going.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePose {
    pub node: usize,
    pub edge: EdgeId,
    /// Meters from `edge.a`.
    pub offset: f64,
    pub heading: Heading,
    /// Vertices still to visit after the end of the current edge.
    pub route: VecDeque<VertexId>,
    pub speed: f64,
    pub pause_left: f64,
    /// Total meters travelled since placement.
    pub odometer: f64,
}

impl NodePose {
    /// Places `node` on a uniformly random vertex and starts its first route.
    pub fn place<R: Rng + ?Sized>(node: usize, area: &MovementArea, speed: f64, rng: &mut R) -> NodePose {
        let start = pick_destination(rng, area.vertices(), None);
        let mut pose = NodePose {
            node,
            edge: 0,
            offset: 0.0,
            heading: Heading::Forward,
            route: VecDeque::new(),
            speed,
            pause_left: 0.0,
            odometer: 0.0,
        };
        pose.start_route(area, start, rng);
        pose
    }

    fn start_route<R: Rng + ?Sized>(&mut self, area: &MovementArea, at: VertexId, rng: &mut R) {
        let dest = pick_destination(rng, area.vertices(), Some(at));
        self.route = area.route(at, dest);
        let next = self.route.pop_front().expect("destination differs from start");
        self.enter_edge(area.graph(), at, next);
    }

    fn enter_edge(&mut self, graph: &PathGraph, from: VertexId, to: VertexId) {
        self.edge = graph.edge_between(from, to).expect("route follows graph edges");
        let e = graph.edge(self.edge);
        if e.a == from {
            self.heading = Heading::Forward;
            self.offset = 0.0;
        } else {
            self.heading = Heading::Backward;
            self.offset = e.length;
        }
    }

    /// The vertex at the end of the current edge in the direction of travel.
    pub fn next_vertex(&self, graph: &PathGraph) -> VertexId {
        let e = graph.edge(self.edge);
        match self.heading {
            Heading::Forward => e.b,
            Heading::Backward => e.a,
        }
    }

    pub fn position(&self, graph: &PathGraph) -> Point {
        let e = graph.edge(self.edge);
        let (a, b) = (graph.vertex(e.a), graph.vertex(e.b));
        let f = self.offset / e.length;
        Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
    }

    /// Moves the node for `dt` seconds, crossing vertices along its route
    /// and re-routing when the destination is reached.
    pub fn advance<R: Rng + ?Sized>(&mut self, area: &MovementArea, dt: f64, pause_time: f64, rng: &mut R) {
        debug_assert!(dt > 0.0);
        let graph = area.graph();
        let mut time_left = dt;
        while time_left > 0.0 {
            if self.pause_left > 0.0 {
                let p = self.pause_left.min(time_left);
                self.pause_left -= p;
                time_left -= p;
                if self.pause_left <= 0.0 {
                    self.pause_left = 0.0;
                    let here = self.next_vertex(graph);
                    self.start_route(area, here, rng);
                }
                continue;
            }
            let length = graph.edge(self.edge).length;
            let remaining = match self.heading {
                Heading::Forward => length - self.offset,
                Heading::Backward => self.offset,
            };
            let needed = remaining / self.speed;
            if needed > time_left {
                let step = self.speed * time_left;
                self.offset += match self.heading {
                    Heading::Forward => step,
                    Heading::Backward => -step,
                };
                self.offset = self.offset.clamp(0.0, length);
                self.odometer += step;
                return;
            }
            time_left -= needed;
            self.odometer += remaining;
            let here = self.next_vertex(graph);
            self.offset = match self.heading {
                Heading::Forward => length,
                Heading::Backward => 0.0,
            };
            match self.route.pop_front() {
                Some(next) => self.enter_edge(graph, here, next),
                None if pause_time > 0.0 => self.pause_left = pause_time,
                None => self.start_route(area, here, rng),
            }
        }
    }
}
