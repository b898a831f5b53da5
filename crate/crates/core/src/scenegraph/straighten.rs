use crate::geometry::{is_simple_polygon, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct Straightened {
    pub points: Vec<Vec2>,
    /// Straightening would have broken the loop; `points` is the input.
    pub warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    H,
    V,
    Free,
}

fn classify(a: Vec2, b: Vec2, angle_tol: f64) -> Axis {
    let d = b - a;
    if d.x == 0.0 && d.y == 0.0 {
        return Axis::Free;
    }
    let ang = d.y.abs().atan2(d.x.abs()).to_degrees(); // 0 = horizontal, 90 = vertical
    if ang <= angle_tol {
        Axis::H
    } else if ang >= 90.0 - angle_tol {
        Axis::V
    } else {
        Axis::Free
    }
}

/// Merge consecutive vertices closer than `snap_tol` into their midpoint.
fn merge_close(pts: &[Vec2], snap_tol: f64) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in pts {
        match out.last_mut() {
            Some(q) if (p - *q).norm() < snap_tol => *q = (*q + p).scale(0.5),
            _ => out.push(p),
        }
    }
    while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() < snap_tol {
        let last = out.pop().expect("non-empty");
        out[0] = (out[0] + last).scale(0.5);
    }
    out
}

/// Move vertices so near-axis edges become exactly axis-parallel.
fn snap_axes(pts: &[Vec2], angle_tol: f64) -> Vec<Vec2> {
    let n = pts.len();
    let kinds: Vec<Axis> = (0..n).map(|i| classify(pts[i], pts[(i + 1) % n], angle_tol)).collect();
    (0..n)
        .map(|i| {
            let prev = (i + n - 1) % n; // edge prev: pts[prev] -> pts[i]
            let next = i; // edge next: pts[i] -> pts[i+1]
            let mut p = pts[i];
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for e in [prev, next] {
                let (a, b) = (pts[e], pts[(e + 1) % n]);
                match kinds[e] {
                    Axis::H => ys.push((a.y + b.y) * 0.5),
                    Axis::V => xs.push((a.x + b.x) * 0.5),
                    Axis::Free => {}
                }
            }
            if !xs.is_empty() {
                p.x = xs.iter().sum::<f64>() / xs.len() as f64;
            }
            if !ys.is_empty() {
                p.y = ys.iter().sum::<f64>() / ys.len() as f64;
            }
            p
        })
        .collect()
}

fn drop_collinear(pts: &[Vec2]) -> Vec<Vec2> {
    let mut cur = pts.to_vec();
    loop {
        let n = cur.len();
        if n < 3 {
            return cur;
        }
        let found = (0..n).find(|&i| {
            let (a, b, c) = (cur[(i + n - 1) % n], cur[i], cur[(i + 1) % n]);
            let (u, v) = (b - a, c - b);
            u.cross(v).abs() <= 1e-12 * (u.norm() * v.norm()).max(1e-300) || u.norm() == 0.0 || v.norm() == 0.0
        });
        match found {
            Some(i) => {
                cur.remove(i);
            }
            None => return cur,
        }
    }
}

/// Snap near-horizontal/vertical edges axis-parallel, merge close vertices
/// and collinear edges, repeated to a fixpoint.
pub fn straighten_polygon(points: &[Vec2], angle_tol: f64, snap_tol: f64) -> Straightened {
    let fail = || Straightened {
        points: points.to_vec(),
        warning: true,
    };
    if points.len() < 3 {
        return fail();
    }
    let mut cur = points.to_vec();
    for _ in 0..64 {
        let next = drop_collinear(&snap_axes(&merge_close(&cur, snap_tol), angle_tol));
        if next.len() < 3 {
            return fail();
        }
        if next == cur {
            return if is_simple_polygon(&cur) {
                Straightened {
                    points: cur,
                    warning: false,
                }
            } else {
                fail()
            };
        }
        cur = next;
    }
    fail()
}
