use std::sync::Arc;

use opportunet::config::ScenarioConfig;
use opportunet::engine::{builtin_map, World};
use opportunet::map::{EdgeTag, PathGraph, Point, Terrain};
use opportunet::mobility::pick_destination;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum over every simple path, by exhaustive DFS.
fn brute_force_shortest(g: &PathGraph, from: usize, to: usize) -> Option<f64> {
    fn dfs(g: &PathGraph, at: usize, to: usize, seen: &mut Vec<bool>, len: f64, best: &mut Option<f64>) {
        if at == to {
            *best = Some(best.map_or(len, |b: f64| b.min(len)));
            return;
        }
        for &(next, e) in g.neighbors(at) {
            if !seen[next] {
                seen[next] = true;
                dfs(g, next, to, seen, len + g.edge(e).length, best);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; g.vertex_count()];
    seen[from] = true;
    let mut best = None;
    dfs(g, from, to, &mut seen, 0.0, &mut best);
    best
}

fn small_graph() -> impl Strategy<Value = PathGraph> {
    (2usize..=8)
        .prop_flat_map(|n| {
            let coords = proptest::sample::subsequence((0..100).collect::<Vec<i32>>(), n);
            let edges = proptest::collection::vec((0..n, 0..n), 0..=n * (n - 1) / 2);
            (coords, proptest::collection::vec(0i32..100, n), edges)
        })
        .prop_map(|(xs, ys, edges)| {
            // distinct x coordinates keep every vertex distinct
            let vertices: Vec<Point> = xs.iter().zip(&ys).map(|(&x, &y)| Point::new(x as f64, y as f64)).collect();
            let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a, b, EdgeTag::Land)).collect();
            PathGraph::new(vertices, &edges).unwrap()
        })
}

fn point_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

proptest! {
    #[test]
    fn dijkstra_matches_exhaustive_search(g in small_graph()) {
        for from in 0..g.vertex_count() {
            for to in 0..g.vertex_count() {
                let expected = brute_force_shortest(&g, from, to);
                match g.shortest_path(from, to, Terrain::Any) {
                    Ok(path) => {
                        prop_assert_eq!(path[0], from);
                        prop_assert_eq!(*path.last().unwrap(), to);
                        let got = g.path_length(&path);
                        let want = expected.expect("brute force found no path");
                        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
                    }
                    Err(_) => prop_assert!(expected.is_none()),
                }
            }
        }
    }
}

#[test]
fn destinations_are_uniform() {
    let candidates = [0, 1, 2, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0u32; 4];
    let n = 100_000u32;
    for _ in 0..n {
        counts[pick_destination(&mut rng, &candidates, None)] += 1;
    }
    let expected = n as f64 / 4.0;
    let sigma = (n as f64 * 0.25 * 0.75).sqrt();
    let mut chi2 = 0.0;
    for &c in &counts {
        assert!((c as f64 - expected).abs() <= 3.0 * sigma, "{counts:?}");
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    // 99.9th percentile of chi-square with 3 degrees of freedom
    assert!(chi2 < 16.27, "chi-square {chi2}");
}

fn short_world(seed: u64) -> World {
    let cfg = ScenarioConfig { seed, ..ScenarioConfig::default() };
    World::new(&cfg, builtin_map()).unwrap()
}

#[test]
fn nodes_stay_on_edges_and_keep_speed() {
    let cfg = ScenarioConfig::default();
    let graph: Arc<PathGraph> = builtin_map();
    let mut world = short_world(7);
    let speeds: Vec<f64> = world.poses().map(|p| p.speed).collect();
    let mut positions = Vec::new();
    let mut last: Vec<f64> = world.poses().map(|p| p.odometer).collect();
    for _ in 0..3_000 {
        world.advance(cfg.tick);
        world.positions_into(&mut positions);
        for (i, (p, pose)) in positions.iter().zip(world.poses()).enumerate() {
            let on_edge =
                graph.edges().iter().any(|e| point_to_segment(*p, graph.vertex(e.a), graph.vertex(e.b)) <= 1e-6);
            assert!(on_edge, "node {i} off the graph at {p:?}");
            let step = pose.odometer - last[i];
            let want = speeds[i] * cfg.tick;
            assert!((step - want).abs() <= 1e-9 * want.max(1.0), "node {i} moved {step}, expected {want}");
            last[i] = pose.odometer;
        }
    }
}

#[test]
fn distance_over_time_is_speed_times_duration() {
    let mut world = short_world(3);
    let ticks = 6_000;
    for _ in 0..ticks {
        world.advance(0.1);
    }
    let t = ticks as f64 * 0.1;
    for pose in world.poses() {
        assert!((pose.odometer - pose.speed * t).abs() <= 1e-6 * t, "node {}: {}", pose.node, pose.odometer);
    }
}

fn trajectory(seed: u64) -> String {
    let mut world = short_world(seed);
    let mut out = String::new();
    let mut positions = Vec::new();
    for k in 1..=500 {
        world.advance(0.1);
        world.positions_into(&mut positions);
        for (i, p) in positions.iter().enumerate() {
            out.push_str(&format!("{k},{i},{:?},{:?}\n", p.x, p.y));
        }
    }
    out
}

#[test]
fn same_seed_same_trajectory() {
    assert_eq!(trajectory(11), trajectory(11));
    assert_ne!(trajectory(11), trajectory(12));
}

#[test]
fn builtin_map_is_connected_per_terrain() {
    let g = builtin_map();
    for t in [Terrain::Land, Terrain::Water] {
        assert_eq!(g.component_sizes(t).len(), 1, "{t:?}");
    }
}
