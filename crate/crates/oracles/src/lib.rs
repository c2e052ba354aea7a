//! Brute-force reference computations.
//!
//! Nothing here shares code with `cgegnn-core`. Each routine takes the slow,
//! obviously-correct route (word reduction, enumeration, all-pairs distances,
//! Monte-Carlo sampling) so the fast implementation can be checked against it.

use rand::Rng;

// ---------------------------------------------------------------------------
// Clifford algebra by word reduction
// ---------------------------------------------------------------------------

/// Reduces a word of generator indices in the tensor algebra modulo
/// `v ⊗ v − |v|²`: equal neighbours contract to `+1` and distinct neighbours
/// anticommute. Returns the sign and the strictly increasing normal form.
pub fn reduce_word(word: &[usize]) -> (f64, Vec<usize>) {
    let mut w = word.to_vec();
    let mut sign = 1.0;
    loop {
        let mut changed = false;
        let mut k = 0;
        while k + 1 < w.len() {
            if w[k] == w[k + 1] {
                w.drain(k..k + 2);
                changed = true;
            } else if w[k] > w[k + 1] {
                w.swap(k, k + 1);
                sign = -sign;
                changed = true;
                k += 1;
            } else {
                k += 1;
            }
        }
        if !changed {
            return (sign, w);
        }
    }
}

fn word_of_mask(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|i| mask >> i & 1 == 1).collect()
}

fn mask_of_word(word: &[usize]) -> usize {
    word.iter().fold(0, |m, &i| m | (1 << i))
}

/// Product of two basis blades (given as bitmasks) by explicit word reduction.
pub fn blade_product(a: usize, b: usize) -> (f64, usize) {
    let mut word = word_of_mask(a);
    word.extend(word_of_mask(b));
    let (sign, normal) = reduce_word(&word);
    (sign, mask_of_word(&normal))
}

/// Geometric product of two dense multivectors of `Cl(ℝ^dim)` computed term by
/// term through [`blade_product`].
pub fn geometric_product(dim: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let size = 1usize << dim;
    assert_eq!(a.len(), size);
    assert_eq!(b.len(), size);
    let mut out = vec![0.0; size];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y == 0.0 {
                continue;
            }
            let (sign, r) = blade_product(i, j);
            out[r] += sign * x * y;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central difference `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn central_difference<F>(f: F, x: &[f64], i: usize, h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    xp[i] += h;
    let mut xm = x.to_vec();
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// `|analytic − numeric| / (|analytic| + 1e−8)`.
pub fn gradient_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + 1e-8)
}

// ---------------------------------------------------------------------------
// Graphs and combinatorics
// ---------------------------------------------------------------------------

/// All-pairs shortest path lengths (unit weights). `None` means unreachable.
pub fn floyd_warshall(nodes: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; nodes]; nodes];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        d[a][b] = Some(1);
        d[b][a] = Some(1);
    }
    for k in 0..nodes {
        for i in 0..nodes {
            for j in 0..nodes {
                if let (Some(ik), Some(kj)) = (d[i][k], d[k][j]) {
                    if d[i][j].map_or(true, |ij| ik + kj < ij) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

/// Nodes within distance `k` of `i`, excluding `i`, in increasing order.
pub fn k_hop_from_distances(dist: &[Vec<Option<usize>>], i: usize, k: usize) -> Vec<usize> {
    (0..dist.len())
        .filter(|&j| j != i && dist[i][j].is_some_and(|d| d <= k))
        .collect()
}

/// Binomial coefficient from Pascal's triangle.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for j in 1..row.len() {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
    }
    row[k]
}

// ---------------------------------------------------------------------------
// Lattice used by the universality construction
// ---------------------------------------------------------------------------

/// All points of `{(2i−1)/(2K)}^d`, in lexicographic order of their indices.
pub fn lattice_points(resolution: usize, d: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (1..=resolution)
        .map(|i| (2 * i - 1) as f64 / (2 * resolution) as f64)
        .collect();
    let mut points = vec![Vec::new()];
    for _ in 0..d {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    points
}

/// Nearest lattice point by exhaustive search under the Euclidean distance.
pub fn nearest_lattice_point(z: &[f64], resolution: usize) -> Vec<f64> {
    lattice_points(resolution, z.len())
        .into_iter()
        .min_by(|a, b| {
            let da: f64 = a.iter().zip(z).map(|(x, y)| (x - y).powi(2)).sum();
            let db: f64 = b.iter().zip(z).map(|(x, y)| (x - y).powi(2)).sum();
            da.total_cmp(&db)
        })
        .expect("lattice is nonempty")
}

/// The snapped set `Ḡ`, sorted and deduplicated.
pub fn snapped_set(points: &[Vec<f64>], resolution: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = points
        .iter()
        .map(|z| nearest_lattice_point(z, resolution))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite lattice coordinates"));
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// Convex hulls by facet enumeration
// ---------------------------------------------------------------------------

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Supporting half-spaces `n·p ≤ c` found by testing every point triple.
/// Duplicated planes are harmless for membership tests.
pub fn supporting_planes(points: &[P3]) -> Vec<(P3, f64)> {
    let mut planes = Vec::new();
    let m = points.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let n = cross(sub(points[j], points[i]), sub(points[k], points[i]));
                let norm = dot(n, n).sqrt();
                if norm < 1e-12 {
                    continue;
                }
                let n = [n[0] / norm, n[1] / norm, n[2] / norm];
                let c = dot(n, points[i]);
                let side: Vec<f64> = points.iter().map(|p| dot(n, *p) - c).collect();
                if side.iter().all(|&s| s <= 1e-9) {
                    planes.push((n, c));
                } else if side.iter().all(|&s| s >= -1e-9) {
                    planes.push(([-n[0], -n[1], -n[2]], -c));
                }
            }
        }
    }
    planes
}

/// Monte-Carlo volume of the convex hull of `points`, sampled uniformly in the
/// bounding box. Returns `(estimate, standard_error)`.
pub fn monte_carlo_hull_volume<R: Rng>(points: &[P3], samples: usize, rng: &mut R) -> (f64, f64) {
    let planes = supporting_planes(points);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let box_volume = (0..3).map(|a| hi[a] - lo[a]).product::<f64>();
    let mut inside = 0usize;
    for _ in 0..samples {
        let q = [
            rng.gen_range(lo[0]..hi[0]),
            rng.gen_range(lo[1]..hi[1]),
            rng.gen_range(lo[2]..hi[2]),
        ];
        if planes.iter().all(|(n, c)| dot(*n, q) <= *c) {
            inside += 1;
        }
    }
    let frac = inside as f64 / samples as f64;
    let se = (frac * (1.0 - frac) / samples as f64).sqrt() * box_volume;
    (frac * box_volume, se)
}
