//! Floating-point model of the intersection built from headings rather than
//! rotations, checked by dense sampling. Shared with the acceptance suite.

use intersection_consensus::geometry::{Approach, Movement, PathDirection};

pub type V = (f64, f64);

fn add(a: V, b: V) -> V {
    (a.0 + b.0, a.1 + b.1)
}

fn scale(a: V, k: f64) -> V {
    (a.0 * k, a.1 * k)
}

/// Unit travel direction of a vehicle arriving from `a`.
fn heading(a: Approach) -> V {
    match a {
        Approach::South => (0.0, 1.0),
        Approach::North => (0.0, -1.0),
        Approach::East => (-1.0, 0.0),
        Approach::West => (1.0, 0.0),
    }
}

/// Lane width 1, box half-width `half`, drive on the right.
pub fn oracle_path(d: &PathDirection, half: f64) -> Vec<V> {
    let h = heading(d.approach);
    let right = (h.1, -h.0);
    let off = f64::from(d.entry_lane) + 0.5;
    let entry = add(scale(h, -half), scale(right, off));
    match d.movement {
        Movement::Straight => vec![entry, add(scale(h, half), scale(right, off))],
        Movement::Left => {
            let turn = add(scale(right, off), scale(h, off));
            vec![entry, turn, add(scale(right, -half), scale(h, off))]
        }
        Movement::Right => {
            let turn = add(scale(right, off), scale(h, -off));
            vec![entry, turn, add(scale(right, half), scale(h, -off))]
        }
    }
}

fn point_segment_distance(p: V, a: V, b: V) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = (((p.0 - a.0) * ab.0 + (p.1 - a.1) * ab.1) / len2).clamp(0.0, 1.0);
    let q = add(a, scale(ab, t));
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

fn samples(path: &[V]) -> Vec<V> {
    let mut out = Vec::new();
    for w in path.windows(2) {
        for k in 0..=400 {
            let t = f64::from(k) / 400.0;
            out.push(add(scale(w[0], 1.0 - t), scale(w[1], t)));
        }
    }
    out
}

pub fn min_distance(a: &[V], b: &[V]) -> f64 {
    samples(a)
        .into_iter()
        .flat_map(|p| b.windows(2).map(move |w| point_segment_distance(p, w[0], w[1])))
        .fold(f64::INFINITY, f64::min)
}

/// Paths closer than this touch.
pub const TOUCH: f64 = 0.02;

/// Conflict verdict and the closest approach of the two sampled paths.
pub fn oracle_conflict(a: &PathDirection, b: &PathDirection, half: f64) -> (bool, f64) {
    let d = min_distance(&oracle_path(a, half), &oracle_path(b, half));
    (d < TOUCH, d)
}
