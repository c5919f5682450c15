//! Simplex geometry in millimetres. 2D meshes use the `z = 0` plane.

pub type Point = [f64; 3];

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.map(|v| v / n)
}

/// Signed area (triangle) or signed volume (tetrahedron).
pub fn signed_measure(points: &[Point]) -> f64 {
    match points.len() {
        3 => {
            let a = sub(&points[1], &points[0]);
            let b = sub(&points[2], &points[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        4 => {
            let a = sub(&points[1], &points[0]);
            let b = sub(&points[2], &points[0]);
            let c = sub(&points[3], &points[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        n => panic!("unsupported simplex with {n} vertices"),
    }
}

/// Gradients of the barycentric (P1) basis functions, in 1/mm.
pub fn basis_gradients(points: &[Point]) -> Vec<Point> {
    match points.len() {
        3 => {
            let twice_area = 2.0 * signed_measure(points);
            (0..3)
                .map(|i| {
                    let b = &points[(i + 1) % 3];
                    let c = &points[(i + 2) % 3];
                    [(b[1] - c[1]) / twice_area, (c[0] - b[0]) / twice_area, 0.0]
                })
                .collect()
        }
        4 => {
            let six_vol = 6.0 * signed_measure(points);
            (0..4)
                .map(|i| {
                    // Face opposite vertex i, oriented so the gradient points toward i.
                    let others: Vec<&Point> = (0..4).filter(|&j| j != i).map(|j| &points[j]).collect();
                    let n = cross(&sub(others[1], others[0]), &sub(others[2], others[0]));
                    let to_i = sub(&points[i], others[0]);
                    let s = if dot(&n, &to_i) > 0.0 { 1.0 } else { -1.0 };
                    let area2 = norm(&n);
                    let height = six_vol.abs() / area2;
                    let unit = n.map(|v| s * v / area2);
                    unit.map(|v| v / height)
                })
                .collect()
        }
        n => panic!("unsupported simplex with {n} vertices"),
    }
}

/// Area of a boundary facet (segment length in 2D, triangle area in 3D).
pub fn facet_measure(points: &[Point]) -> f64 {
    match points.len() {
        2 => distance(&points[0], &points[1]),
        3 => 0.5 * norm(&cross(&sub(&points[1], &points[0]), &sub(&points[2], &points[0]))),
        n => panic!("unsupported facet with {n} vertices"),
    }
}

/// Unit normal of a facet, oriented away from `interior`.
pub fn facet_normal(points: &[Point], interior: &Point) -> Point {
    let n = match points.len() {
        2 => {
            let t = sub(&points[1], &points[0]);
            [t[1], -t[0], 0.0]
        }
        3 => cross(&sub(&points[1], &points[0]), &sub(&points[2], &points[0])),
        k => panic!("unsupported facet with {k} vertices"),
    };
    let len = norm(&n);
    let mut unit = n.map(|v| v / len);
    if dot(&unit, &sub(interior, &points[0])) > 0.0 {
        unit = unit.map(|v| -v);
    }
    unit
}
