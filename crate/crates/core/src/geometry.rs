//! Hexagonal base-station lattice, nearest-site cell assignment, mobile
//! placement in the network disk and the within-cell distance law.
//!
//! Cells are pointy-top hexagons: neighbouring base stations sit `2a` apart
//! along directions 0, 60, 120, ... degrees, where `a` is the apothem.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::params::{SamplingMode, ScenarioParams};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

/// Axial lattice coordinate of a base station. The derived ordering is
/// lexicographic, which is what breaks ties on cell edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub q: i32,
    pub r: i32,
}

impl CellCoord {
    pub const ORIGIN: CellCoord = CellCoord { q: 0, r: 0 };

    pub fn new(q: i32, r: i32) -> Self {
        CellCoord { q, r }
    }

    fn neighbours(self) -> [CellCoord; 6] {
        let CellCoord { q, r } = self;
        [
            CellCoord::new(q + 1, r),
            CellCoord::new(q - 1, r),
            CellCoord::new(q, r + 1),
            CellCoord::new(q, r - 1),
            CellCoord::new(q + 1, r - 1),
            CellCoord::new(q - 1, r + 1),
        ]
    }
}

/// Regular hexagon of a given area centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hexagon {
    area: f64,
    side: f64,
    apothem: f64,
}

impl Hexagon {
    pub fn with_area(area: f64) -> Self {
        let side = (2.0 * area / (3.0 * SQRT_3)).sqrt();
        Hexagon {
            area,
            side,
            apothem: side * SQRT_3 / 2.0,
        }
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn apothem(&self) -> f64 {
        self.apothem
    }

    /// Equal to the side length for a regular hexagon.
    pub fn circumradius(&self) -> f64 {
        self.side
    }

    pub fn contains(&self, p: Point) -> bool {
        let a = self.apothem;
        let u = 0.5 * p.x;
        let v = 0.5 * SQRT_3 * p.y;
        p.x.abs() <= a && (u + v).abs() <= a && (v - u).abs() <= a
    }

    /// Uniform point in the hexagon, by rejection from its bounding box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        loop {
            let p = Point::new(
                self.apothem * (2.0 * rng.random::<f64>() - 1.0),
                self.side * (2.0 * rng.random::<f64>() - 1.0),
            );
            if self.contains(p) {
                return p;
            }
        }
    }

    /// `P(|Y| <= d)` for `Y` uniform in the hexagon.
    pub fn distance_cdf(&self, d: f64) -> f64 {
        let (a, s) = (self.apothem, self.side);
        if d <= 0.0 {
            0.0
        } else if d <= a {
            PI * d * d / self.area
        } else if d < s {
            // Disk minus the six circular segments cut off by the edges.
            let segment = d * d * (a / d).acos() - a * (d * d - a * a).sqrt();
            ((PI * d * d - 6.0 * segment) / self.area).min(1.0)
        } else {
            1.0
        }
    }

    /// Density of `|Y|` for `Y` uniform in the hexagon.
    pub fn distance_pdf(&self, d: f64) -> f64 {
        let (a, s) = (self.apothem, self.side);
        if d <= 0.0 || d >= s {
            0.0
        } else if d <= a {
            2.0 * PI * d / self.area
        } else {
            (2.0 * PI - 12.0 * (a / d).acos()).max(0.0) * d / self.area
        }
    }
}

#[derive(Debug, Clone)]
pub struct HexLattice {
    cell: Hexagon,
    extent: f64,
    coords: Vec<CellCoord>,
    centers: Vec<Point>,
    index: HashMap<CellCoord, usize>,
    origin: usize,
}

/// Builds the lattice with base-station density `rho_c` (one site at the
/// origin) covering every point within `extent` of the origin. `extent = 0`
/// yields the single origin cell.
pub fn build_lattice(rho_c: f64, extent: f64) -> Result<HexLattice> {
    if !(rho_c > 0.0 && rho_c.is_finite()) {
        return Err(Error::invalid("rho_c", format!("must be positive, got {rho_c}")));
    }
    if !(extent >= 0.0 && extent.is_finite()) {
        return Err(Error::invalid("extent", format!("must be non-negative, got {extent}")));
    }
    let cell = Hexagon::with_area(1.0 / rho_c);
    let a = cell.apothem;
    let reach = if extent > 0.0 { extent + 2.0 * cell.side } else { 0.0 };
    let r_max = (reach / (SQRT_3 * a)).ceil() as i32 + 1;
    let mut coords = Vec::new();
    for r in -r_max..=r_max {
        let q_span = (reach / (2.0 * a)).ceil() as i32 + r_max + 1;
        for q in -q_span..=q_span {
            let c = CellCoord::new(q, r);
            if center_of(a, c).norm() <= reach {
                coords.push(c);
            }
        }
    }
    coords.sort();
    let centers: Vec<Point> = coords.iter().map(|&c| center_of(a, c)).collect();
    let index: HashMap<CellCoord, usize> = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let origin = index[&CellCoord::ORIGIN];
    Ok(HexLattice {
        cell,
        extent,
        coords,
        centers,
        index,
        origin,
    })
}

fn center_of(apothem: f64, c: CellCoord) -> Point {
    Point::new(
        2.0 * apothem * (c.q as f64 + 0.5 * c.r as f64),
        SQRT_3 * apothem * c.r as f64,
    )
}

impl HexLattice {
    pub fn cell(&self) -> &Hexagon {
        &self.cell
    }

    pub fn cell_area(&self) -> f64 {
        self.cell.area
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.origin
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, index: usize) -> Point {
        self.centers[index]
    }

    pub fn coord(&self, index: usize) -> CellCoord {
        self.coords[index]
    }

    /// Nearest lattice coordinate by cube rounding of the fractional axial
    /// coordinates; exact ties go to the lexicographically smallest coordinate.
    pub fn nearest_coord(&self, p: Point) -> CellCoord {
        let a = self.cell.apothem;
        let rf = p.y / (SQRT_3 * a);
        let qf = p.x / (2.0 * a) - 0.5 * rf;
        let sf = -qf - rf;
        let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
        let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
        if dq > dr && dq > ds {
            q = -r - s;
        } else if dr > ds {
            r = -q - s;
        }
        let best = CellCoord::new(q as i32, r as i32);
        let d_best = (p - center_of(a, best)).norm_sq();
        best.neighbours()
            .into_iter()
            .filter(|&c| (p - center_of(a, c)).norm_sq() == d_best)
            .fold(best, |acc, c| acc.min(c))
    }

    /// Index of the base station nearest to `p`.
    pub fn assign_cell(&self, p: Point) -> Result<usize> {
        let covered = if self.extent > 0.0 {
            p.norm() <= self.extent + self.cell.side
        } else {
            self.cell.contains(p)
        };
        let outside = || Error::OutsideLattice {
            x: p.x,
            y: p.y,
            extent: self.extent,
        };
        if !covered {
            return Err(outside());
        }
        self.index.get(&self.nearest_coord(p)).copied().ok_or_else(outside)
    }
}

/// One potential transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobile {
    pub position: Point,
    /// Distance to the representative base station at the origin.
    pub distance: f64,
    pub cell: usize,
    /// Distance to the base station of its own cell.
    pub center_distance: f64,
}

impl Mobile {
    fn at(position: Point, cell: usize, lattice: &HexLattice) -> Self {
        Mobile {
            position,
            distance: position.norm(),
            cell,
            center_distance: position.distance(lattice.center(cell)),
        }
    }
}

/// Mobile positions for one trial.
///
/// In [`SamplingMode::Exact`] `mobiles` holds all `n` potential interferers.
/// In [`SamplingMode::Fast`] it holds, per cell, only the first eligible
/// draws up to the per-cell cap: a uniform subset of the eligible mobiles,
/// which is all the active-set selection ever looks at.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    pub representative: Mobile,
    pub mobiles: Vec<Mobile>,
    pub n_total: usize,
    pub disk_radius: f64,
    pub mode: SamplingMode,
}

/// Samples the representative mobile (uniform in the origin cell at least
/// `min_center_distance` from the base station) and the `n` potential
/// interferers in the disk.
pub fn sample_mobiles<R: Rng + ?Sized>(
    params: &ScenarioParams,
    lattice: &HexLattice,
    min_center_distance: f64,
    rng: &mut R,
) -> Result<NetworkRealization> {
    let radius = params.disk_radius;
    if !(radius > 0.0) || !(params.rho_m > 0.0) {
        return Err(Error::invalid(
            "disk_radius",
            "disk radius and mobile density must be positive",
        ));
    }
    if min_center_distance >= lattice.cell.side {
        return Err(Error::invalid(
            "d_min",
            format!("exclusion radius {min_center_distance} covers the whole cell"),
        ));
    }
    let cell = lattice.cell;
    let origin = lattice.origin_index();
    let representative = loop {
        let p = cell.sample(rng);
        if p.norm() >= min_center_distance {
            break Mobile::at(p, origin, lattice);
        }
    };
    let n = params.n_mobiles();
    let mobiles = match params.sampling_mode {
        SamplingMode::Exact => {
            let mut mobiles = Vec::with_capacity(n);
            for _ in 0..n {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                let p = Point::new(r * theta.cos(), r * theta.sin());
                let idx = lattice.assign_cell(p)?;
                mobiles.push(Mobile::at(p, idx, lattice));
            }
            mobiles
        }
        SamplingMode::Fast => {
            // Per-cell occupancy of the full hexagon is Binomial(n, A_c / (pi R^2));
            // thinning those draws to the disk keeps the marginal law of the
            // in-disk count exact for boundary cells too.
            let p_cell = cell.area / (std::f64::consts::PI * radius * radius);
            if p_cell > 1.0 {
                return Err(Error::invalid(
                    "sampling_mode",
                    "fast sampling needs a disk larger than one cell; use exact sampling",
                ));
            }
            let occupancy = Binomial::new(n as u64, p_cell).map_err(|e| Error::invalid("rho_c", e.to_string()))?;
            let mut mobiles = Vec::new();
            for (idx, &center) in lattice.centers.iter().enumerate() {
                if center.norm() > radius + cell.side {
                    continue;
                }
                let cap = if idx == origin { params.k - 1 } else { params.k };
                let draws = occupancy.sample(rng);
                let mut kept = 0;
                for _ in 0..draws {
                    if kept == cap {
                        break;
                    }
                    let offset = cell.sample(rng);
                    let p = center + offset;
                    if p.norm() <= radius && offset.norm() >= min_center_distance {
                        mobiles.push(Mobile {
                            position: p,
                            distance: p.norm(),
                            cell: idx,
                            center_distance: offset.norm(),
                        });
                        kept += 1;
                    }
                }
            }
            mobiles
        }
    };
    Ok(NetworkRealization {
        representative,
        mobiles,
        n_total: n,
        disk_radius: radius,
        mode: params.sampling_mode,
    })
}
