//! Hexagonal small-cell layout.
//!
//! Sites sit on a triangular lattice with inter-site distance `√3·D`; each
//! site's Voronoi cell is a regular hexagon of circumradius `D` whose edge
//! normals point at the six nearest neighbours (angles `0°, 60°, …, 300°`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Regular hexagon with edge normals at multiples of 60°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hexagon {
    pub center: Point,
    pub circumradius: f64,
}

impl Hexagon {
    pub fn new(center: Point, circumradius: f64) -> Self {
        Hexagon {
            center,
            circumradius,
        }
    }

    pub fn inradius(&self) -> f64 {
        self.circumradius * 3f64.sqrt() / 2.0
    }

    /// Outward unit normals of the six edges.
    pub fn normals() -> [Point; 6] {
        std::array::from_fn(|k| {
            let theta = k as f64 * std::f64::consts::FRAC_PI_3;
            Point::new(theta.cos(), theta.sin())
        })
    }

    pub fn vertices(&self) -> [Point; 6] {
        std::array::from_fn(|k| {
            let theta = (k as f64 + 0.5) * std::f64::consts::FRAC_PI_3;
            self.center
                .add(Point::new(theta.cos(), theta.sin()).scale(self.circumradius))
        })
    }

    /// Closed point-in-hexagon test with an absolute slack `eps`.
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        let rel = p.sub(self.center);
        let h = self.inradius();
        Self::normals().iter().all(|n| n.dot(rel) <= h + eps)
    }

    /// Parameter range `[s_lo, s_hi]` such that `origin + s·dir` lies inside.
    /// `None` if the line misses the hexagon.
    pub fn chord(&self, origin: Point, dir: Point) -> Option<(f64, f64)> {
        let rel = origin.sub(self.center);
        let h = self.inradius();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for n in Self::normals() {
            let nd = n.dot(dir);
            let slack = h - n.dot(rel);
            if nd.abs() < 1e-15 {
                if slack < 0.0 {
                    return None;
                }
            } else if nd > 0.0 {
                hi = hi.min(slack / nd);
            } else {
                lo = lo.max(slack / nd);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub cell_radius: f64,
    pub sbs_positions: Vec<Point>,
}

impl CellLayout {
    pub fn n_cells(&self) -> usize {
        self.sbs_positions.len()
    }

    pub fn inter_site_distance(&self) -> f64 {
        3f64.sqrt() * self.cell_radius
    }

    pub fn cell(&self, index: usize) -> Hexagon {
        Hexagon::new(self.sbs_positions[index], self.cell_radius)
    }

    /// Index of the closest site; ties go to the lowest index.
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.sbs_positions.iter().enumerate() {
            let d = s.distance(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Number of hexagonal rings around the centre for a centred hexagonal
/// number `n = 1 + 3r(r+1)`, or `None` if `n` is not of that form.
pub fn rings_for(n_cells: usize) -> Option<usize> {
    (0..).take_while(|r| 1 + 3 * r * (r + 1) <= n_cells)
        .find(|r| 1 + 3 * r * (r + 1) == n_cells)
}

pub fn build_layout(n_cells: usize, cell_radius: f64, macro_radius: f64) -> Result<CellLayout> {
    if !(cell_radius > 0.0) {
        return Err(Error::invalid("cell_radius", "must be positive"));
    }
    let rings = rings_for(n_cells).ok_or_else(|| {
        Error::Layout(format!(
            "{n_cells} cells is not a centred hexagonal number (1, 7, 19, 37, ...)"
        ))
    })? as i64;

    let isd = 3f64.sqrt() * cell_radius;
    let a1 = Point::new(isd, 0.0);
    let a2 = Point::new(0.5 * isd, 0.5 * 3f64.sqrt() * isd);

    let mut sites: Vec<(i64, f64, Point)> = Vec::with_capacity(n_cells);
    for q in -rings..=rings {
        for r in -rings..=rings {
            let ring = q.abs().max(r.abs()).max((q + r).abs());
            if ring > rings {
                continue;
            }
            let p = a1.scale(q as f64).add(a2.scale(r as f64));
            let angle = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
            sites.push((ring, if ring == 0 { 0.0 } else { angle }, p));
        }
    }
    sites.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let sbs_positions: Vec<Point> = sites.into_iter().map(|(_, _, p)| p).collect();
    if let Some(far) = sbs_positions.iter().find(|p| p.norm() > macro_radius + 1e-9) {
        return Err(Error::Layout(format!(
            "site at distance {:.2} m lies outside the {macro_radius} m macro cell",
            far.norm()
        )));
    }
    Ok(CellLayout {
        cell_radius,
        sbs_positions,
    })
}
