//! Polygonal partitions of the periodicity cell: validation, point lookup and
//! extraction of material-interface corners.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::lattice::{cross2, dot2, norm2, sub2, Lattice2D, Vec2};

/// Vertices closer than this are the same point.
pub const MERGE_TOL: f64 = 1e-9;
/// Distinct vertices closer than this cannot be resolved reliably.
pub const AMBIGUOUS_TOL: f64 = 1e-6;
const BOUNDARY_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-9;

/// A polygonal inclusion with constant `n²`. The vertex loop is stored
/// counterclockwise with duplicate and collinear vertices removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    polygon: Vec<Vec2>,
    n2: f64,
    bbox: [Vec2; 2],
}

impl Region {
    pub fn new(polygon: Vec<Vec2>, n2: f64) -> Result<Self> {
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "n2 must be positive and finite, got {n2}"
            )));
        }
        if polygon.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite vertex".into()));
        }
        let mut poly = simplify_loop(polygon);
        if poly.len() < 3 {
            return Err(Error::InvalidGeometry(
                "polygon needs at least three non-collinear vertices".into(),
            ));
        }
        let area = signed_area(&poly);
        if area.abs() < MERGE_TOL * MERGE_TOL {
            return Err(Error::InvalidGeometry("polygon has zero area".into()));
        }
        if area < 0.0 {
            poly.reverse();
        }
        if !is_simple(&poly) {
            return Err(Error::InvalidGeometry("polygon is self-intersecting".into()));
        }
        let bbox = bounding_box(&poly);
        Ok(Self {
            polygon: poly,
            n2,
            bbox,
        })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, n2: f64) -> Result<Self> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], n2)
    }

    /// Square of side `side` centred at `center`.
    pub fn square(center: Vec2, side: f64, n2: f64) -> Result<Self> {
        let h = 0.5 * side;
        Self::rectangle(center[0] - h, center[1] - h, center[0] + h, center[1] + h, n2)
    }

    /// Regular `sides`-gon inscribed in the circle of radius `radius`.
    pub fn regular_polygon(center: Vec2, radius: f64, sides: usize, n2: f64) -> Result<Self> {
        let pts = (0..sides)
            .map(|k| {
                let t = TAU * k as f64 / sides as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect();
        Self::new(pts, n2)
    }

    pub fn polygon(&self) -> &[Vec2] {
        &self.polygon
    }

    pub fn n2(&self) -> f64 {
        self.n2
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.polygon)
    }

    /// Edges as `(start, end)` pairs, counterclockwise.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.polygon.len();
        (0..n).map(move |i| (self.polygon[i], self.polygon[(i + 1) % n]))
    }

    fn translated(&self, t: Vec2) -> Region {
        let polygon = self
            .polygon
            .iter()
            .map(|p| [p[0] + t[0], p[1] + t[1]])
            .collect();
        Region {
            polygon,
            n2: self.n2,
            bbox: [
                [self.bbox[0][0] + t[0], self.bbox[0][1] + t[1]],
                [self.bbox[1][0] + t[0], self.bbox[1][1] + t[1]],
            ],
        }
    }

    fn locate(&self, x: Vec2) -> Location {
        let [lo, hi] = self.bbox;
        let pad = BOUNDARY_TOL;
        if x[0] < lo[0] - pad || x[0] > hi[0] + pad || x[1] < lo[1] - pad || x[1] > hi[1] + pad {
            return Location::Outside;
        }
        locate_in_polygon(&self.polygon, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

/// Piecewise-constant `n²` on the periodicity cell: an ordered list of
/// disjoint polygonal regions on a background.
///
/// Region order is significant: a point on the boundary of a region belongs
/// to the first region (in list order) whose closure contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalPartition {
    lattice: Lattice2D,
    regions: Vec<Region>,
    background_n2: f64,
}

/// Translations `i a1 + j a2` with `|i|, |j| <= 1`, the identity first.
fn neighbour_shifts(lat: &Lattice2D, reach: i32) -> Vec<Vec2> {
    let mut out = vec![[0.0, 0.0]];
    for i in -reach..=reach {
        for j in -reach..=reach {
            if (i, j) != (0, 0) {
                out.push(lat.translation(i, j));
            }
        }
    }
    out
}

impl PolygonalPartition {
    pub fn new(lattice: Lattice2D, regions: Vec<Region>, background_n2: f64) -> Result<Self> {
        if !(background_n2.is_finite() && background_n2 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "background n2 must be positive and finite, got {background_n2}"
            )));
        }
        let total: f64 = regions.iter().map(Region::area).sum();
        if total > lattice.cell_area() * (1.0 + 1e-12) {
            return Err(Error::InvalidGeometry(format!(
                "regions cover area {total} exceeding the cell area {}",
                lattice.cell_area()
            )));
        }
        let shifts = neighbour_shifts(&lattice, 1);
        for (i, a) in regions.iter().enumerate() {
            for (j, b) in regions.iter().enumerate().skip(i) {
                for t in &shifts {
                    if i == j && *t == [0.0, 0.0] {
                        continue;
                    }
                    if overlaps(a, &b.translated(*t)) {
                        return Err(Error::InvalidGeometry(format!(
                            "regions {i} and {j} overlap (shift {t:?})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            lattice,
            regions,
            background_n2,
        })
    }

    pub fn homogeneous(lattice: Lattice2D, n2: f64) -> Result<Self> {
        Self::new(lattice, Vec::new(), n2)
    }

    pub fn lattice(&self) -> &Lattice2D {
        &self.lattice
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn background_n2(&self) -> f64 {
        self.background_n2
    }

    pub fn is_homogeneous(&self) -> bool {
        self.regions.iter().all(|r| r.n2 == self.background_n2)
    }

    pub fn n2_range(&self) -> (f64, f64) {
        self.regions
            .iter()
            .map(|r| r.n2)
            .fold((self.background_n2, self.background_n2), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Same partition with every polygon shifted by `t`.
    pub fn translated(&self, t: Vec2) -> Result<Self> {
        let regions = self
            .regions
            .iter()
            .map(|r| Region::new(r.translated(t).polygon, r.n2))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.lattice, regions, self.background_n2)
    }

    /// `n²` at `x`; boundary points belong to the first region containing them.
    pub fn region_at(&self, x: Vec2) -> f64 {
        self.region_index_at(x)
            .map_or(self.background_n2, |i| self.regions[i].n2)
    }

    /// Index of the region containing `x` (any periodic image), if any.
    pub fn region_index_at(&self, x: Vec2) -> Option<usize> {
        let x = self.lattice.fold_point(x);
        let shifts = neighbour_shifts(&self.lattice, 1);
        self.regions.iter().position(|r| {
            shifts
                .iter()
                .any(|t| r.locate([x[0] - t[0], x[1] - t[1]]) != Location::Outside)
        })
    }
}

/// One angular sector around a corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    /// Opening angle in radians.
    pub opening: f64,
    pub n2: f64,
}

/// Sectors around an interface corner, counterclockwise from `start_angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSpec {
    pub location: Vec2,
    /// Absolute polar angle of the first sector boundary.
    pub start_angle: f64,
    pub sectors: Vec<Sector>,
}

impl CornerSpec {
    pub fn new(location: Vec2, start_angle: f64, sectors: Vec<Sector>) -> Result<Self> {
        if sectors.len() < 2 {
            return Err(Error::InvalidGeometry("a corner needs at least two sectors".into()));
        }
        if sectors
            .iter()
            .any(|s| !(s.opening > 0.0 && s.n2 > 0.0 && s.n2.is_finite()))
        {
            return Err(Error::InvalidGeometry(
                "sector openings and n2 must be positive".into(),
            ));
        }
        let total: f64 = sectors.iter().map(|s| s.opening).sum();
        if (total - TAU).abs() > 1e-10 {
            return Err(Error::InvalidGeometry(format!(
                "sector angles sum to {total}, not 2π"
            )));
        }
        let first = sectors[0].n2;
        if sectors.iter().all(|s| s.n2 == first) {
            return Err(Error::NoInterface);
        }
        Ok(Self {
            location,
            start_angle,
            sectors,
        })
    }

    /// Two-material corner at the origin: `eps1` on `(0, omega)`, `eps2` on `(omega, 2π)`.
    pub fn two_material(omega: f64, eps1: f64, eps2: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < TAU) {
            return Err(Error::InvalidGeometry(format!(
                "opening angle {omega} outside (0, 2π)"
            )));
        }
        Self::new(
            [0.0, 0.0],
            0.0,
            vec![
                Sector { opening: omega, n2: eps1 },
                Sector { opening: TAU - omega, n2: eps2 },
            ],
        )
    }

    /// Sector boundary angles `ω_0 = 0 < ω_1 < … < ω_L = 2π`, relative to `start_angle`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for s in &self.sectors {
            acc += s.opening;
            out.push(acc);
        }
        out
    }

    pub fn is_two_material(&self) -> bool {
        self.sectors.len() == 2
    }
}

/// Every interface corner of the partition, one per distinct point of the
/// periodic cell. Locations are folded into the fundamental cell.
pub fn extract_corners(part: &PolygonalPartition) -> Result<Vec<CornerSpec>> {
    let lat = &part.lattice;
    // reach 2 so that folded points near the cell edge see every image
    let shifts = neighbour_shifts(lat, 2);
    let images: Vec<Region> = part
        .regions
        .iter()
        .flat_map(|r| shifts.iter().map(move |t| r.translated(*t)))
        .collect();

    let mut nodes: Vec<Vec2> = Vec::new();
    for r in &part.regions {
        for &v in &r.polygon {
            let f = lat.fold_point(v);
            let mut merged = false;
            for &n in &nodes {
                let d = periodic_distance(lat, f, n);
                if d < MERGE_TOL {
                    merged = true;
                    break;
                }
                if d < AMBIGUOUS_TOL {
                    return Err(Error::AmbiguousGeometry { a: f, b: n, distance: d });
                }
            }
            if !merged {
                nodes.push(f);
            }
        }
    }

    let mut corners = Vec::new();
    for c in nodes {
        let mut rays: Vec<f64> = Vec::new();
        let mut min_len = f64::INFINITY;
        for img in &images {
            let poly = &img.polygon;
            let n = poly.len();
            for i in 0..n {
                let (p, q) = (poly[i], poly[(i + 1) % n]);
                let e = sub2(q, p);
                let len = norm2(e);
                if norm2(sub2(p, c)) < MERGE_TOL {
                    rays.push(e[1].atan2(e[0]));
                    min_len = min_len.min(len);
                } else if norm2(sub2(q, c)) < MERGE_TOL {
                    rays.push((-e[1]).atan2(-e[0]));
                    min_len = min_len.min(len);
                } else if segment_distance(p, q, c) < MERGE_TOL {
                    // corner of another polygon sitting on this edge
                    rays.push(e[1].atan2(e[0]));
                    rays.push((-e[1]).atan2(-e[0]));
                    min_len = min_len.min(norm2(sub2(p, c)).min(norm2(sub2(q, c))));
                }
            }
        }
        let mut angles: Vec<f64> = rays.into_iter().map(|a| a.rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < ANGLE_TOL);
        if angles.len() > 1 && (angles[0] + TAU - angles[angles.len() - 1]) < ANGLE_TOL {
            angles.pop();
        }
        if angles.len() < 2 {
            continue;
        }

        let delta = 1e-6 * min_len.min(1.0);
        let m = angles.len();
        let mut bounds: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let a = angles[i];
                let b = if i + 1 < m { angles[i + 1] } else { angles[0] + TAU };
                let mid = 0.5 * (a + b);
                let probe = [c[0] + delta * mid.cos(), c[1] + delta * mid.sin()];
                (a, part.region_at(probe))
            })
            .collect();

        // drop boundaries that do not separate different materials
        let keep: Vec<bool> = (0..m)
            .map(|i| bounds[i].1 != bounds[(i + m - 1) % m].1)
            .collect();
        let mut i = 0;
        bounds.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        if bounds.len() < 2 {
            continue;
        }
        let k = bounds.len();
        let sectors: Vec<Sector> = (0..k)
            .map(|i| {
                let end = if i + 1 < k { bounds[i + 1].0 } else { bounds[0].0 + TAU };
                Sector {
                    opening: end - bounds[i].0,
                    n2: bounds[i].1,
                }
            })
            .collect();
        if k == 2 && (sectors[0].opening - PI).abs() < ANGLE_TOL {
            continue;
        }
        corners.push(CornerSpec::new(c, bounds[0].0, sectors)?);
    }
    Ok(corners)
}

fn periodic_distance(lat: &Lattice2D, a: Vec2, b: Vec2) -> f64 {
    let f = lat.to_fractional(sub2(a, b));
    let g = [f[0] - f[0].round(), f[1] - f[1].round()];
    let mut best = f64::INFINITY;
    for di in -1..=1 {
        for dj in -1..=1 {
            let d = lat.to_cartesian([g[0] + di as f64, g[1] + dj as f64]);
            best = best.min(norm2(d));
        }
    }
    best
}

fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| cross2(poly[i], poly[(i + 1) % n])).sum::<f64>()
}

fn bounding_box(poly: &[Vec2]) -> [Vec2; 2] {
    poly.iter().fold(
        [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]],
        |[lo, hi], p| {
            [
                [lo[0].min(p[0]), lo[1].min(p[1])],
                [hi[0].max(p[0]), hi[1].max(p[1])],
            ]
        },
    )
}

/// Removes repeated vertices and vertices at which the boundary is straight.
fn simplify_loop(mut poly: Vec<Vec2>) -> Vec<Vec2> {
    loop {
        let n = poly.len();
        if n < 3 {
            return poly;
        }
        let drop = (0..n).find(|&i| {
            let prev = poly[(i + n - 1) % n];
            let cur = poly[i];
            let next = poly[(i + 1) % n];
            if norm2(sub2(cur, prev)) < MERGE_TOL {
                return true;
            }
            let u = sub2(cur, prev);
            let v = sub2(next, cur);
            let scale = norm2(u) * norm2(v);
            cross2(u, v).abs() <= 1e-12 * scale && dot2(u, v) > 0.0
        });
        match drop {
            Some(i) => {
                poly.remove(i);
            }
            None => return poly,
        }
    }
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross2(sub2(q2, q1), sub2(p1, q1));
    let d2 = cross2(sub2(q2, q1), sub2(p2, q1));
    let d3 = cross2(sub2(p2, p1), sub2(q1, p1));
    let d4 = cross2(sub2(p2, p1), sub2(q2, p1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    segment_distance(q1, q2, p1) < BOUNDARY_TOL
        || segment_distance(q1, q2, p2) < BOUNDARY_TOL
        || segment_distance(p1, p2, q1) < BOUNDARY_TOL
        || segment_distance(p1, p2, q2) < BOUNDARY_TOL
}

fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn segment_distance(p: Vec2, q: Vec2, x: Vec2) -> f64 {
    let e = sub2(q, p);
    let len2 = dot2(e, e);
    let t = if len2 > 0.0 {
        (dot2(sub2(x, p), e) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm2(sub2(x, [p[0] + t * e[0], p[1] + t * e[1]]))
}

fn locate_in_polygon(poly: &[Vec2], x: Vec2) -> Location {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        if segment_distance(p, q, x) < BOUNDARY_TOL {
            return Location::Boundary;
        }
        if (p[1] > x[1]) != (q[1] > x[1]) {
            let xc = p[0] + (x[1] - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
            if x[0] < xc {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// Interiors of two simple polygons intersect.
fn overlaps(a: &Region, b: &Region) -> bool {
    let (al, ah) = (a.bbox[0], a.bbox[1]);
    let (bl, bh) = (b.bbox[0], b.bbox[1]);
    if al[0] >= bh[0] || bl[0] >= ah[0] || al[1] >= bh[1] || bl[1] >= ah[1] {
        return false;
    }
    for (p1, p2) in a.edges() {
        for (q1, q2) in b.edges() {
            let d1 = cross2(sub2(q2, q1), sub2(p1, q1));
            let d2 = cross2(sub2(q2, q1), sub2(p2, q1));
            let d3 = cross2(sub2(p2, p1), sub2(q1, p1));
            let d4 = cross2(sub2(p2, p1), sub2(q2, p1));
            let s = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v.signum() };
            if s(d1) * s(d2) < 0.0 && s(d3) * s(d4) < 0.0 {
                return true;
            }
        }
    }
    let inward_probe = |r: &Region, other: &Region| {
        r.edges().any(|(p, q)| {
            let e = sub2(q, p);
            let len = norm2(e);
            let nrm = [-e[1] / len, e[0] / len];
            let d = 1e-7 * len;
            let probe = [
                0.5 * (p[0] + q[0]) + d * nrm[0],
                0.5 * (p[1] + q[1]) + d * nrm[1],
            ];
            other.locate(probe) == Location::Inside
        }) || r.polygon.iter().any(|&v| other.locate(v) == Location::Inside)
    };
    inward_probe(a, b) || inward_probe(b, a)
}
