//! Convex polygon clipping and shoelace area.

use super::Point;

/// Points whose signed distance to a clip edge is above `-EDGE_TOL` count as inside.
/// Keeps shared and coincident edges from generating near-parallel intersections.
const EDGE_TOL: f64 = 1e-9;

/// Signed shoelace area. Positive for the vertex order produced by
/// [`super::to_vertices`].
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Sutherland–Hodgman clipping of `subject` against the convex polygon `clip`.
///
/// `clip` must have positive signed area. The result is empty when the
/// polygons do not overlap.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len = (ex * ex + ey * ey).sqrt();
        if len == 0.0 {
            continue;
        }
        let dist = |p: Point| (ex * (p.y - a.y) - ey * (p.x - a.x)) / len;

        let input = std::mem::take(&mut output);
        let m = input.len();
        for k in 0..m {
            let cur = input[k];
            let prev = input[(k + m - 1) % m];
            let dc = dist(cur);
            let dp = dist(prev);
            let cur_in = dc >= -EDGE_TOL;
            let prev_in = dp >= -EDGE_TOL;
            if cur_in {
                if !prev_in {
                    output.push(crossing(prev, cur, dp, dc));
                }
                output.push(cur);
            } else if prev_in {
                output.push(crossing(prev, cur, dp, dc));
            }
        }
    }
    output
}

fn crossing(p: Point, q: Point, dp: f64, dq: f64) -> Point {
    let t = dp / (dp - dq);
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}
