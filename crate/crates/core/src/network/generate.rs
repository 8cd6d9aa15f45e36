//! Synthetic undirected, unweighted layers. Every generator is a pure
//! function of `(kind, n, seed)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LayerGraph, NetworkError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeneratorKind {
    /// G(n, p): each unordered pair independently with probability `p`.
    ErdosRenyi {
        p: f64,
    },
    /// Uniform points in the unit square joined when within `radius`.
    Geometric {
        radius: f64,
    },
    /// Preferential attachment, `m` edges per arriving node.
    BarabasiAlbert {
        m: usize,
    },
    /// Ring lattice of degree `k` with each edge rewired with probability `p_rewire`.
    WattsStrogatz {
        k: usize,
        p_rewire: f64,
    },
    Complete,
}

pub fn generate(kind: GeneratorKind, n: usize, seed: u64) -> Result<LayerGraph, NetworkError> {
    if n == 0 {
        return Err(NetworkError::InvalidParameter(
            "n must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = match kind {
        GeneratorKind::ErdosRenyi { p } => {
            check_probability("p", p)?;
            erdos_renyi(n, p, &mut rng)
        }
        GeneratorKind::Geometric { radius } => {
            if !(radius.is_finite() && radius >= 0.0) {
                return Err(NetworkError::InvalidParameter(format!(
                    "radius must be finite and non-negative, got {radius}"
                )));
            }
            geometric(n, radius, &mut rng)
        }
        GeneratorKind::BarabasiAlbert { m } => {
            if m == 0 || m >= n {
                return Err(NetworkError::InvalidParameter(format!(
                    "barabasi-albert needs 1 <= m < n, got m={m}, n={n}"
                )));
            }
            barabasi_albert(n, m, &mut rng)
        }
        GeneratorKind::WattsStrogatz { k, p_rewire } => {
            check_probability("p_rewire", p_rewire)?;
            if k % 2 != 0 || k >= n {
                return Err(NetworkError::InvalidParameter(format!(
                    "watts-strogatz needs an even k < n, got k={k}, n={n}"
                )));
            }
            watts_strogatz(n, k, p_rewire, &mut rng)
        }
        GeneratorKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    };
    LayerGraph::from_undirected(n, edges.into_iter().map(|(a, b)| (a, b, 1.0)))
}

/// Radius whose expected degree in a unit-square geometric graph on `n`
/// points equals `degree`, boundary effects included.
///
/// The probability that two uniform points lie within `r` is
/// `πr² − 8r³/3 + r⁴/2` for `r ≤ 1`; this solves
/// `(n − 1)·P(r) = degree` by bisection.
pub fn geometric_radius_for_degree(n: usize, degree: f64) -> Result<f64, NetworkError> {
    let pair_prob = |r: f64| PI * r * r - 8.0 * r.powi(3) / 3.0 + r.powi(4) / 2.0;
    if n < 2 || !(degree >= 0.0) {
        return Err(NetworkError::InvalidParameter(format!(
            "cannot target degree {degree} on {n} nodes"
        )));
    }
    let target = degree / (n - 1) as f64;
    if target > pair_prob(1.0) {
        return Err(NetworkError::InvalidParameter(format!(
            "degree {degree} unreachable on {n} nodes"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if pair_prob(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_probability(name: &str, p: f64) -> Result<(), NetworkError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(NetworkError::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

/// Geometric skipping over the lower triangle (Batagelj & Brandes), so the
/// cost is proportional to the number of edges rather than `n²`.
fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if p == 0.0 {
        return Vec::new();
    }
    if p == 1.0 {
        return (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
    }
    let log_q = (-p).ln_1p();
    let mut edges = Vec::new();
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        let u: f64 = rng.random();
        let skip = ((-u).ln_1p() / log_q).floor();
        w += 1 + skip as i64;
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}

/// Points are renumbered in cell order so neighbors have nearby ids.
fn geometric(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let cells = if radius > 0.0 {
        ((1.0 / radius).floor() as usize).clamp(1, 1 << 12)
    } else {
        1
    };
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    let mut points: Vec<(usize, f64, f64)> = (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            (cell_of(y) * cells + cell_of(x), x, y)
        })
        .collect();
    points.sort_by_key(|a| a.0);

    let mut start = vec![0usize; cells * cells + 1];
    for p in &points {
        start[p.0 + 1] += 1;
    }
    for c in 0..cells * cells {
        start[c + 1] += start[c];
    }

    let r2 = radius * radius;
    let mut edges = Vec::new();
    for (i, &(cell, x, y)) in points.iter().enumerate() {
        let (cy, cx) = (cell / cells, cell % cells);
        for ny in cy.saturating_sub(1)..=(cy + 1).min(cells - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(cells - 1) {
                let c = ny * cells + nx;
                for (j, &(_, xj, yj)) in points[start[c]..start[c + 1]]
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (start[c] + k, p))
                {
                    if j > i {
                        let (dx, dy) = (x - xj, y - yj);
                        if dx * dx + dy * dy <= r2 {
                            edges.push((i, j));
                        }
                    }
                }
            }
        }
    }
    edges
}

fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * (n - m) * m);
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((t, source));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        targets = chosen.into_iter().collect();
    }
    edges
}

fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !adj[u].contains(&v) || rng.random::<f64>() >= p {
                continue;
            }
            // A node already linked to everyone cannot be rewired.
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    adj.iter()
        .enumerate()
        .flat_map(|(u, set)| set.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected_edges(g: &LayerGraph) -> usize {
        assert!(g.is_symmetric());
        g.arc_count() / 2
    }

    #[test]
    fn er_p_zero_is_empty() {
        let g = generate(GeneratorKind::ErdosRenyi { p: 0.0 }, 10, 1).unwrap();
        assert_eq!(g.node_count(), 10);
        assert_eq!(g.arc_count(), 0);
    }

    #[test]
    fn complete_arc_count() {
        let g = generate(GeneratorKind::Complete, 5, 0).unwrap();
        assert_eq!(g.arc_count(), 20);
        let g = generate(GeneratorKind::ErdosRenyi { p: 1.0 }, 7, 0).unwrap();
        assert_eq!(g.arc_count(), 42);
    }

    #[test]
    fn er_edge_count_within_three_sigma() {
        // C(1000,2) = 499500; mean 0.2 * 499500 = 99900, sd sqrt(499500*0.16) = 282.7.
        for seed in 0..3 {
            let g = generate(GeneratorKind::ErdosRenyi { p: 0.2 }, 1000, seed).unwrap();
            let m = undirected_edges(&g) as f64;
            assert!((m - 99_900.0).abs() <= 3.0 * 282.7, "seed {seed}: {m}");
        }
    }

    #[test]
    fn er_sparse_edge_count() {
        // C(20000,2) * 5e-4 = 99_995; sd ~ 316.
        let g = generate(GeneratorKind::ErdosRenyi { p: 5e-4 }, 20_000, 3).unwrap();
        let m = undirected_edges(&g) as f64;
        assert!((m - 99_995.0).abs() <= 3.0 * 316.2, "{m}");
    }

    #[test]
    fn generators_are_deterministic() {
        let kinds = [
            GeneratorKind::ErdosRenyi { p: 0.1 },
            GeneratorKind::Geometric { radius: 0.1 },
            GeneratorKind::BarabasiAlbert { m: 3 },
            GeneratorKind::WattsStrogatz {
                k: 4,
                p_rewire: 0.3,
            },
        ];
        for kind in kinds {
            let a = generate(kind, 300, 42).unwrap();
            let b = generate(kind, 300, 42).unwrap();
            let c = generate(kind, 300, 43).unwrap();
            assert_eq!(a, b, "{kind:?}");
            assert_ne!(a, c, "{kind:?}");
        }
    }

    #[test]
    fn geometric_hits_target_degree() {
        let n = 10_000;
        let r = geometric_radius_for_degree(n, 11.0).unwrap();
        let g = generate(GeneratorKind::Geometric { radius: r }, n, 5).unwrap();
        let mean = g.mean_degree();
        assert!((mean - 11.0).abs() < 1.1, "{mean}");
    }

    #[test]
    fn geometric_matches_brute_force() {
        // Same seed, same points: recompute all pairs directly.
        let n = 400;
        let radius = 0.08;
        let g = generate(GeneratorKind::Geometric { radius }, n, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cells = (1.0f64 / radius).floor() as usize;
        let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
        let mut pts: Vec<(usize, f64, f64)> = (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                (cell_of(y) * cells + cell_of(x), x, y)
            })
            .collect();
        pts.sort_by_key(|a| a.0);
        let mut expected = 0;
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pts[i].1 - pts[j].1, pts[i].2 - pts[j].2);
                if dx * dx + dy * dy <= radius * radius {
                    expected += 1;
                    assert!(g.out_neighbors(i).unwrap().ids.contains(&(j as u32)));
                }
            }
        }
        assert_eq!(undirected_edges(&g), expected);
    }

    #[test]
    fn ba_and_ws_edge_counts() {
        let g = generate(GeneratorKind::BarabasiAlbert { m: 2 }, 100, 1).unwrap();
        assert_eq!(undirected_edges(&g), 98 * 2);
        let g = generate(
            GeneratorKind::WattsStrogatz {
                k: 6,
                p_rewire: 0.2,
            },
            50,
            1,
        )
        .unwrap();
        assert_eq!(undirected_edges(&g), 150);
        let ring = generate(
            GeneratorKind::WattsStrogatz {
                k: 2,
                p_rewire: 0.0,
            },
            5,
            1,
        )
        .unwrap();
        assert_eq!(
            ring.out_neighbors(0).unwrap().to_vec(),
            vec![(1, 1.0), (4, 1.0)]
        );
    }

    #[test]
    fn invalid_parameters() {
        let bad = [
            (GeneratorKind::ErdosRenyi { p: 1.5 }, 10),
            (GeneratorKind::ErdosRenyi { p: -0.1 }, 10),
            (GeneratorKind::Geometric { radius: -1.0 }, 10),
            (GeneratorKind::BarabasiAlbert { m: 0 }, 10),
            (GeneratorKind::BarabasiAlbert { m: 10 }, 10),
            (
                GeneratorKind::WattsStrogatz {
                    k: 3,
                    p_rewire: 0.1,
                },
                10,
            ),
            (
                GeneratorKind::WattsStrogatz {
                    k: 10,
                    p_rewire: 0.1,
                },
                10,
            ),
            (GeneratorKind::Complete, 0),
        ];
        for (kind, n) in bad {
            assert!(
                matches!(generate(kind, n, 0), Err(NetworkError::InvalidParameter(_))),
                "{kind:?} n={n}"
            );
        }
        assert!(geometric_radius_for_degree(10, 20.0).is_err());
    }
}
