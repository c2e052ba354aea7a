//! Three-dimensional quickhull and hull volume.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug)]
struct Face {
    v: [usize; 3],
    normal: Point3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn distance(&self, p: Point3) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

/// Triangulated convex hull with outward-facing, consistently oriented faces.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub faces: Vec<[usize; 3]>,
    /// A point strictly inside the hull.
    pub interior: Point3,
}

fn make_face(points: &[Point3], mut v: [usize; 3], interior: Point3) -> Face {
    let mut n = cross(sub(points[v[1]], points[v[0]]), sub(points[v[2]], points[v[0]]));
    if dot(n, sub(interior, points[v[0]])) > 0.0 {
        v.swap(1, 2);
        n = [-n[0], -n[1], -n[2]];
    }
    let len = norm(n);
    let normal = if len > 0.0 { [n[0] / len, n[1] / len, n[2] / len] } else { n };
    Face {
        v,
        normal,
        offset: dot(normal, points[v[0]]),
        outside: Vec::new(),
        alive: true,
    }
}

/// Quickhull: start from an extreme tetrahedron and repeatedly absorb the
/// farthest outside point of some face.
pub fn convex_hull_3d(points: &[Point3]) -> Result<ConvexHull> {
    if points.len() < 4 {
        return Err(Error::DegenerateHull(format!("{} points cannot span a volume", points.len())));
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateHull("non-finite coordinate".into()));
    }
    let scale = points
        .iter()
        .flatten()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1e-300);
    let eps = 1e-10 * scale;

    // extreme tetrahedron
    let mut a = 0;
    let mut b = 0;
    let mut best = -1.0;
    for axis in 0..3 {
        let lo = (0..points.len())
            .min_by(|&i, &j| points[i][axis].total_cmp(&points[j][axis]))
            .expect("nonempty");
        let hi = (0..points.len())
            .max_by(|&i, &j| points[i][axis].total_cmp(&points[j][axis]))
            .expect("nonempty");
        let d = norm(sub(points[hi], points[lo]));
        if d > best {
            best = d;
            a = lo;
            b = hi;
        }
    }
    if best <= eps {
        return Err(Error::DegenerateHull("all points coincide".into()));
    }
    let ab = sub(points[b], points[a]);
    let c = (0..points.len())
        .max_by(|&i, &j| {
            let di = norm(cross(ab, sub(points[i], points[a])));
            let dj = norm(cross(ab, sub(points[j], points[a])));
            di.total_cmp(&dj)
        })
        .expect("nonempty");
    let area = norm(cross(ab, sub(points[c], points[a])));
    if area <= eps * norm(ab) {
        return Err(Error::DegenerateHull("points are collinear".into()));
    }
    let plane = cross(ab, sub(points[c], points[a]));
    let d = (0..points.len())
        .max_by(|&i, &j| {
            let di = dot(plane, sub(points[i], points[a])).abs();
            let dj = dot(plane, sub(points[j], points[a])).abs();
            di.total_cmp(&dj)
        })
        .expect("nonempty");
    if dot(plane, sub(points[d], points[a])).abs() <= eps * norm(plane) {
        return Err(Error::DegenerateHull("points are coplanar".into()));
    }
    let interior = {
        let mut s = [0.0; 3];
        for &i in &[a, b, c, d] {
            for k in 0..3 {
                s[k] += points[i][k] / 4.0;
            }
        }
        s
    };
    let mut faces: Vec<Face> = [[a, b, c], [a, b, d], [a, c, d], [b, c, d]]
        .into_iter()
        .map(|v| make_face(points, v, interior))
        .collect();
    for (i, &p) in points.iter().enumerate() {
        if [a, b, c, d].contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(i);
        }
    }

    while let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&i, &&j| faces[fi].distance(points[i]).total_cmp(&faces[fi].distance(points[j])))
            .expect("nonempty outside set");
        let p = points[apex];
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].alive && faces[i].distance(p) > eps)
            .collect();
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, f) in faces.iter().enumerate().filter(|(_, f)| f.alive) {
            for e in 0..3 {
                owner.insert((f.v[e], f.v[(e + 1) % 3]), i);
            }
        }
        let mut horizon = Vec::new();
        for &i in &visible {
            let v = faces[i].v;
            for e in 0..3 {
                let (u, w) = (v[e], v[(e + 1) % 3]);
                let twin = owner.get(&(w, u)).copied();
                if twin.map_or(true, |t| !visible.contains(&t)) {
                    horizon.push((u, w));
                }
            }
        }
        let mut orphans = Vec::new();
        for &i in &visible {
            faces[i].alive = false;
            orphans.append(&mut faces[i].outside);
        }
        let first_new = faces.len();
        for (u, w) in horizon {
            faces.push(make_face(points, [u, w, apex], interior));
        }
        for q in orphans {
            if q == apex {
                continue;
            }
            if let Some(f) = faces[first_new..]
                .iter_mut()
                .find(|f| f.distance(points[q]) > eps)
            {
                f.outside.push(q);
            }
        }
    }
    Ok(ConvexHull {
        faces: faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect(),
        interior,
    })
}

/// Volume of the convex hull, as a fan of tetrahedra from an interior point.
///
/// Points are sorted first, so the result does not depend on their order.
pub fn hull_volume_3d(points: &[Point3]) -> Result<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    let points = &sorted[..];
    let hull = convex_hull_3d(points)?;
    let c = hull.interior;
    let volume: f64 = hull
        .faces
        .iter()
        .map(|f| {
            let (a, b, d) = (sub(points[f[0]], c), sub(points[f[1]], c), sub(points[f[2]], c));
            dot(a, cross(b, d)) / 6.0
        })
        .sum();
    if volume <= 0.0 {
        return Err(Error::DegenerateHull(format!("non-positive volume {volume}")));
    }
    Ok(volume)
}
