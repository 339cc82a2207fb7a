//! Four-way intersection geometry and the movement-conflict relation.
//!
//! Movements are modelled as axis-aligned polylines through the intersection
//! box under right-hand traffic. Coordinates are doubled so that every lane
//! centre, corner and crossing point is an integer: with `L` lanes per
//! approach the box spans `[-2L, 2L]` on both axes and lane `i` of an approach
//! runs along offset `2i + 1` from the centre line. Lane 0 is the innermost.
//!
//! A turning vehicle stays in its lane index: it drives straight until it
//! reaches the centre line of its exit lane, then turns. Two movements
//! conflict when their polylines touch anywhere, which covers crossing
//! paths, a shared entry lane and a shared exit lane.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// The arm of the intersection a vehicle arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::North,
        Approach::East,
        Approach::South,
        Approach::West,
    ];

    fn letter(self) -> char {
        match self {
            Approach::North => 'N',
            Approach::East => 'E',
            Approach::South => 'S',
            Approach::West => 'W',
        }
    }

    /// Quarter turns (counter-clockwise) from the southern approach.
    fn quarter_turns(self) -> u8 {
        match self {
            Approach::South => 0,
            Approach::East => 1,
            Approach::North => 2,
            Approach::West => 3,
        }
    }
}

/// Intended movement through the intersection. U-turns are not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Straight,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Straight, Movement::Right];

    fn letter(self) -> char {
        match self {
            Movement::Left => 'L',
            Movement::Straight => 'S',
            Movement::Right => 'R',
        }
    }
}

/// Approach arm, movement and entry lane of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathDirection {
    pub approach: Approach,
    pub movement: Movement,
    pub entry_lane: u8,
}

impl PathDirection {
    pub fn new(approach: Approach, movement: Movement, entry_lane: u8) -> Self {
        Self {
            approach,
            movement,
            entry_lane,
        }
    }
}

/// Labels look like `N-L-0`: approach, movement, entry lane.
impl fmt::Display for PathDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}",
            self.approach.letter(),
            self.movement.letter(),
            self.entry_lane
        )
    }
}

impl FromStr for PathDirection {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeometryError::InvalidDirection(s.to_string());
        let mut parts = s.split('-');
        let (Some(a), Some(m), Some(l), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let approach = match a {
            "N" => Approach::North,
            "E" => Approach::East,
            "S" => Approach::South,
            "W" => Approach::West,
            _ => return Err(bad()),
        };
        let movement = match m {
            "L" => Movement::Left,
            "S" => Movement::Straight,
            "R" => Movement::Right,
            _ => return Err(bad()),
        };
        let entry_lane = l.parse().map_err(|_| bad())?;
        Ok(PathDirection::new(approach, movement, entry_lane))
    }
}

/// A four-way intersection with `total_lanes` lanes across each road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionGeometry {
    total_lanes: u32,
}

type Point = (i32, i32);
type Segment = (Point, Point);

impl IntersectionGeometry {
    pub fn new(total_lanes: u32) -> Result<Self, GeometryError> {
        match total_lanes {
            2 | 4 | 6 | 8 => Ok(Self { total_lanes }),
            other => Err(GeometryError::InvalidLanes(other)),
        }
    }

    pub fn total_lanes(&self) -> u32 {
        self.total_lanes
    }

    pub fn lanes_per_approach(&self) -> u32 {
        self.total_lanes / 2
    }

    /// Most vehicles that can enter simultaneously: one per entry lane.
    pub fn max_batch(&self) -> usize {
        4 * self.lanes_per_approach() as usize
    }

    pub fn validate(&self, dir: &PathDirection) -> Result<(), GeometryError> {
        if u32::from(dir.entry_lane) < self.lanes_per_approach() {
            Ok(())
        } else {
            Err(GeometryError::InvalidDirection(format!(
                "{dir}: lane {} outside {} lanes per approach",
                dir.entry_lane,
                self.lanes_per_approach()
            )))
        }
    }

    /// Every valid direction, ordered by approach, lane, then movement.
    pub fn all_directions(&self) -> Vec<PathDirection> {
        let mut out = Vec::with_capacity(12 * self.lanes_per_approach() as usize);
        for approach in Approach::ALL {
            for lane in 0..self.lanes_per_approach() as u8 {
                for movement in Movement::ALL {
                    out.push(PathDirection::new(approach, movement, lane));
                }
            }
        }
        out
    }

    /// Polyline of a movement in doubled coordinates.
    pub fn path(&self, dir: &PathDirection) -> Result<Vec<(i32, i32)>, GeometryError> {
        self.validate(dir)?;
        let edge = 2 * self.lanes_per_approach() as i32;
        let c = 2 * i32::from(dir.entry_lane) + 1;
        // Built for the southern approach (travelling north), then rotated.
        let base: Vec<Point> = match dir.movement {
            Movement::Straight => vec![(c, -edge), (c, edge)],
            Movement::Left => vec![(c, -edge), (c, c), (-edge, c)],
            Movement::Right => vec![(c, -edge), (c, -c), (edge, -c)],
        };
        let turns = dir.approach.quarter_turns();
        Ok(base
            .into_iter()
            .map(|p| (0..turns).fold(p, |(x, y), _| (-y, x)))
            .collect())
    }

    /// Whether the swept paths of two movements touch inside the box.
    pub fn conflicts(&self, a: &PathDirection, b: &PathDirection) -> Result<bool, GeometryError> {
        let pa = self.path(a)?;
        let pb = self.path(b)?;
        let hit = segments(&pa).any(|sa| segments(&pb).any(|sb| segments_touch(sa, sb)));
        Ok(hit)
    }

    /// Directions a vehicle travelling `dir` can share the box with.
    pub fn compatible_directions(
        &self,
        dir: &PathDirection,
    ) -> Result<BTreeSet<PathDirection>, GeometryError> {
        let mut out = BTreeSet::new();
        for other in self.all_directions() {
            if !self.conflicts(dir, &other)? {
                out.insert(other);
            }
        }
        Ok(out)
    }

    /// Conflict matrix as CSV: header row of labels, one row per direction,
    /// cells `1` for conflict and `0` otherwise.
    pub fn conflict_matrix_csv(&self) -> String {
        let dirs = self.all_directions();
        let mut out = String::from("direction");
        for d in &dirs {
            out.push(',');
            out.push_str(&d.to_string());
        }
        out.push('\n');
        for a in &dirs {
            out.push_str(&a.to_string());
            for b in &dirs {
                let hit = self.conflicts(a, b).expect("directions come from the geometry");
                out.push_str(if hit { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

fn segments(path: &[Point]) -> impl Iterator<Item = Segment> + '_ {
    path.windows(2).map(|w| (w[0], w[1]))
}

fn orientation(p: Point, q: Point, r: Point) -> i64 {
    let v = i64::from(q.0 - p.0) * i64::from(r.1 - p.1) - i64::from(q.1 - p.1) * i64::from(r.0 - p.0);
    v.signum()
}

fn on_segment(p: Point, q: Point, r: Point) -> bool {
    q.0 >= p.0.min(r.0) && q.0 <= p.0.max(r.0) && q.1 >= p.1.min(r.1) && q.1 <= p.1.max(r.1)
}

/// Closed-segment intersection test, touching and collinear overlap included.
fn segments_touch((p1, q1): Segment, (p2, q2): Segment) -> bool {
    let o1 = orientation(p1, q1, p2);
    let o2 = orientation(p1, q1, q2);
    let o3 = orientation(p2, q2, p1);
    let o4 = orientation(p2, q2, q1);
    if o1 != o2 && o3 != o4 {
        return true;
    }
    (o1 == 0 && on_segment(p1, p2, q1))
        || (o2 == 0 && on_segment(p1, q2, q1))
        || (o3 == 0 && on_segment(p2, p1, q2))
        || (o4 == 0 && on_segment(p2, q1, q2))
}

/// Cap on simultaneous entrants for a geometry.
pub fn max_batch(geometry: &IntersectionGeometry) -> usize {
    geometry.max_batch()
}
