//! Computational domain and cell-centered grid.
//!
//! The domain Ω is either an axis-aligned rectangle or a disk. The grid is a
//! uniform cell-centered mesh over the bounding rectangle; for disks, cells
//! whose center falls outside the circle are marked inactive and excluded
//! from the discrete operator. The boundary ∂Ω is carried as an ordered list
//! of nodes, each with a position, a unit outward normal and a trapezoid
//! quadrature weight along arc length.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use serde::{Deserialize, Serialize};

/// Shape descriptor for the domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { cx: f64, cy: f64, radius: f64 },
}

/// Domain plus spatial resolution (cells per unit length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: DomainShape,
    pub resolution: f64,
}

impl DomainSpec {
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64, resolution: f64) -> Self {
        Self {
            shape: DomainShape::Rect { x0, x1, y0, y1 },
            resolution,
        }
    }

    pub fn disk(cx: f64, cy: f64, radius: f64, resolution: f64) -> Self {
        Self {
            shape: DomainShape::Disk { cx, cy, radius },
            resolution,
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match self.shape {
            DomainShape::Rect { x0, x1, y0, y1 } => Rect::new(x0, x1, y0, y1),
            DomainShape::Disk { cx, cy, radius } => {
                Rect::new(cx - radius, cx + radius, cy - radius, cy + radius)
            }
        }
    }

    /// Support function h_Ω(ω) = sup_{x in Ω} x·ω.
    pub fn support(&self, omega: Vec2) -> f64 {
        match self.shape {
            DomainShape::Rect { .. } => self.bounding_rect().support(omega),
            DomainShape::Disk { cx, cy, radius } => Vec2::new(cx, cy).dot(omega) + radius,
        }
    }

    /// Signed distance of `p` to ∂Ω, negative inside Ω.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self.shape {
            DomainShape::Rect { .. } => self.bounding_rect().signed_distance(p),
            DomainShape::Disk { cx, cy, radius } => (p - Vec2::new(cx, cy)).norm() - radius,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p) < 0.0
    }

    pub fn perimeter(&self) -> f64 {
        match self.shape {
            DomainShape::Rect { x0, x1, y0, y1 } => 2.0 * ((x1 - x0) + (y1 - y0)),
            DomainShape::Disk { radius, .. } => 2.0 * std::f64::consts::PI * radius,
        }
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            DomainShape::Rect { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            DomainShape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }
}

/// Axis direction of a boundary face (outward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceDir {
    XNeg,
    XPos,
    YNeg,
    YPos,
}

impl FaceDir {
    pub fn normal(self) -> Vec2 {
        match self {
            FaceDir::XNeg => Vec2::new(-1.0, 0.0),
            FaceDir::XPos => Vec2::new(1.0, 0.0),
            FaceDir::YNeg => Vec2::new(0.0, -1.0),
            FaceDir::YPos => Vec2::new(0.0, 1.0),
        }
    }
}

/// One boundary measurement node: the midpoint of a boundary face.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    /// Position of the node on ∂Ω (face midpoint for rectangles, staircase
    /// face midpoint for disks).
    pub pos: Vec2,
    /// Unit outward normal of Ω at the node.
    pub normal: Vec2,
    /// Trapezoid quadrature weight along arc length.
    pub weight: f64,
    /// Flat index of the adjacent interior cell.
    pub cell: usize,
    /// Outward direction of the face.
    pub face: FaceDir,
    /// Arc-length coordinate along ∂Ω.
    pub s: f64,
}

/// Cell-centered grid over the domain's bounding rectangle.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Lower-left corner of the bounding rectangle.
    pub origin: Vec2,
    /// Active mask over the nx*ny bounding cells (all true for rectangles).
    pub active: Vec<bool>,
    pub n_active: usize,
    pub boundary: Vec<BoundaryNode>,
}

impl Grid {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.hx,
            self.origin.y + (j as f64 + 0.5) * self.hy,
        )
    }

    pub fn cell_center_flat(&self, idx: usize) -> Vec2 {
        self.cell_center(idx % self.nx, idx / self.nx)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Sum of boundary quadrature weights.
    pub fn quadrature_perimeter(&self) -> f64 {
        self.boundary.iter().map(|b| b.weight).sum()
    }

    /// Boundary integral of nodewise values with the trapezoid weights.
    pub fn boundary_integral<F: Fn(&BoundaryNode) -> f64>(&self, f: F) -> f64 {
        self.boundary.iter().map(|b| b.weight * f(b)).sum()
    }

    /// Grids are measurement-compatible when their geometry matches exactly.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.domain == other.domain
            && self.boundary.len() == other.boundary.len()
    }
}

/// Build the grid for a domain.
///
/// Fails when the domain has nonpositive extent or the resolution yields
/// fewer than 16 cells per side.
pub fn build_grid(domain: &DomainSpec) -> Result<Grid> {
    let res = domain.resolution;
    if !res.is_finite() || res <= 0.0 {
        return Err(Error::Domain(format!("nonpositive resolution {res}")));
    }
    match domain.shape {
        DomainShape::Rect { x0, x1, y0, y1 } => {
            let (w, h) = (x1 - x0, y1 - y0);
            if w <= 0.0 || h <= 0.0 {
                return Err(Error::Domain(format!(
                    "degenerate rectangle extents {w} x {h}"
                )));
            }
            let nx = (w * res).round().max(1.0) as usize;
            let ny = (h * res).round().max(1.0) as usize;
            if nx < 16 || ny < 16 {
                return Err(Error::Domain(format!(
                    "resolution {res} yields {nx} x {ny} cells; need at least 16 per side"
                )));
            }
            Ok(build_rect_grid(*domain, x0, y0, w, h, nx, ny))
        }
        DomainShape::Disk { cx, cy, radius } => {
            if radius <= 0.0 {
                return Err(Error::Domain(format!("degenerate disk radius {radius}")));
            }
            let n = (2.0 * radius * res).round().max(1.0) as usize;
            if n < 16 {
                return Err(Error::Domain(format!(
                    "resolution {res} yields {n} cells across the disk; need at least 16"
                )));
            }
            build_disk_grid(*domain, cx, cy, radius, n)
        }
    }
}

fn build_rect_grid(domain: DomainSpec, x0: f64, y0: f64, w: f64, h: f64, nx: usize, ny: usize) -> Grid {
    let hx = w / nx as f64;
    let hy = h / ny as f64;
    let mut g = Grid {
        domain,
        nx,
        ny,
        hx,
        hy,
        origin: Vec2::new(x0, y0),
        active: vec![true; nx * ny],
        n_active: nx * ny,
        boundary: Vec::with_capacity(2 * (nx + ny)),
    };
    // Counterclockwise from the bottom-left corner: bottom, right, top, left.
    let mut s = 0.0;
    for i in 0..nx {
        let pos = Vec2::new(x0 + (i as f64 + 0.5) * hx, y0);
        g.boundary.push(BoundaryNode {
            pos,
            normal: Vec2::new(0.0, -1.0),
            weight: hx,
            cell: i,
            face: FaceDir::YNeg,
            s: s + 0.5 * hx,
        });
        s += hx;
    }
    for j in 0..ny {
        let pos = Vec2::new(x0 + w, y0 + (j as f64 + 0.5) * hy);
        g.boundary.push(BoundaryNode {
            pos,
            normal: Vec2::new(1.0, 0.0),
            weight: hy,
            cell: j * nx + (nx - 1),
            face: FaceDir::XPos,
            s: s + 0.5 * hy,
        });
        s += hy;
    }
    for i in (0..nx).rev() {
        let pos = Vec2::new(x0 + (i as f64 + 0.5) * hx, y0 + h);
        g.boundary.push(BoundaryNode {
            pos,
            normal: Vec2::new(0.0, 1.0),
            weight: hx,
            cell: (ny - 1) * nx + i,
            face: FaceDir::YPos,
            s: s + 0.5 * hx,
        });
        s += hx;
    }
    for j in (0..ny).rev() {
        let pos = Vec2::new(x0, y0 + (j as f64 + 0.5) * hy);
        g.boundary.push(BoundaryNode {
            pos,
            normal: Vec2::new(-1.0, 0.0),
            weight: hy,
            cell: j * nx,
            face: FaceDir::XNeg,
            s: s + 0.5 * hy,
        });
        s += hy;
    }
    g
}

fn build_disk_grid(domain: DomainSpec, cx: f64, cy: f64, radius: f64, n: usize) -> Result<Grid> {
    let hx = 2.0 * radius / n as f64;
    let origin = Vec2::new(cx - radius, cy - radius);
    let center = Vec2::new(cx, cy);
    let mut active = vec![false; n * n];
    let mut n_active = 0;
    for j in 0..n {
        for i in 0..n {
            let p = Vec2::new(
                origin.x + (i as f64 + 0.5) * hx,
                origin.y + (j as f64 + 0.5) * hx,
            );
            if (p - center).norm() < radius {
                active[j * n + i] = true;
                n_active += 1;
            }
        }
    }
    if n_active == 0 {
        return Err(Error::Domain("disk grid has no interior cells".into()));
    }
    // Boundary faces of the staircase; nodes carry the analytic radial
    // normal and an angular trapezoid weight so the weights telescope to the
    // exact circumference.
    struct RawNode {
        pos: Vec2,
        cell: usize,
        face: FaceDir,
        theta: f64,
    }
    let mut raw = Vec::new();
    let idx = |i: usize, j: usize| j * n + i;
    for j in 0..n {
        for i in 0..n {
            if !active[idx(i, j)] {
                continue;
            }
            let c = Vec2::new(
                origin.x + (i as f64 + 0.5) * hx,
                origin.y + (j as f64 + 0.5) * hx,
            );
            let mut push = |face: FaceDir, pos: Vec2| {
                let theta = (pos.y - cy).atan2(pos.x - cx);
                raw.push(RawNode {
                    pos,
                    cell: idx(i, j),
                    face,
                    theta,
                });
            };
            if i == 0 || !active[idx(i - 1, j)] {
                push(FaceDir::XNeg, Vec2::new(c.x - 0.5 * hx, c.y));
            }
            if i == n - 1 || !active[idx(i + 1, j)] {
                push(FaceDir::XPos, Vec2::new(c.x + 0.5 * hx, c.y));
            }
            if j == 0 || !active[idx(i, j - 1)] {
                push(FaceDir::YNeg, Vec2::new(c.x, c.y - 0.5 * hx));
            }
            if j == n - 1 || !active[idx(i, j + 1)] {
                push(FaceDir::YPos, Vec2::new(c.x, c.y + 0.5 * hx));
            }
        }
    }
    raw.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
    let m = raw.len();
    let tau = 2.0 * std::f64::consts::PI;
    let mut boundary = Vec::with_capacity(m);
    for (k, node) in raw.iter().enumerate() {
        let prev = raw[(k + m - 1) % m].theta;
        let next = raw[(k + 1) % m].theta;
        let mut dtheta = next - prev;
        if dtheta <= 0.0 {
            dtheta += tau;
        }
        let weight = radius * 0.5 * dtheta;
        let normal = (node.pos - center).normalized();
        boundary.push(BoundaryNode {
            pos: node.pos,
            normal,
            weight,
            cell: node.cell,
            face: node.face,
            s: radius * (node.theta + std::f64::consts::PI),
        });
    }
    Ok(Grid {
        domain,
        nx: n,
        ny: n,
        hx,
        hy: hx,
        origin,
        active,
        n_active,
        boundary,
    })
}
