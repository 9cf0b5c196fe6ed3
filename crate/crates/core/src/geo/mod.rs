//! Traffic-zone grid construction and zone-level data aggregation.
//!
//! The study area is tiled with equal square cells in a local metric frame
//! (equirectangular projection about the boundary centroid; error below
//! 0.1 % over city scales). Cells whose centre falls outside the boundary
//! are discarded; the remainder become traffic zones with row-major ids.

pub mod io;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;
/// Kilometres per degree of latitude.
pub const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Geographic coordinate, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        LonLat { lon, lat }
    }
}

/// Equirectangular projection about a reference point; x east, y north, km.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub origin: LonLat,
    cos_lat: f64,
}

impl Projection {
    pub fn new(origin: LonLat) -> Self {
        Projection { origin, cos_lat: origin.lat.to_radians().cos() }
    }

    pub fn to_km(&self, p: LonLat) -> (f64, f64) {
        (
            (p.lon - self.origin.lon) * KM_PER_DEG * self.cos_lat,
            (p.lat - self.origin.lat) * KM_PER_DEG,
        )
    }

    pub fn to_lonlat(&self, x: f64, y: f64) -> LonLat {
        LonLat::new(
            self.origin.lon + x / (KM_PER_DEG * self.cos_lat),
            self.origin.lat + y / KM_PER_DEG,
        )
    }
}

/// Study-area boundary: an exterior ring with optional holes, in degrees.
#[derive(Debug, Clone)]
pub struct BoundaryPolygon {
    /// Closed ring (first vertex repeated at the end), counter-clockwise or
    /// clockwise; orientation does not matter.
    pub exterior: Vec<LonLat>,
    pub holes: Vec<Vec<LonLat>>,
}

impl BoundaryPolygon {
    pub fn new(exterior: Vec<LonLat>, holes: Vec<Vec<LonLat>>) -> Result<Self> {
        let poly = BoundaryPolygon { exterior, holes };
        poly.validate()?;
        Ok(poly)
    }

    fn validate(&self) -> Result<()> {
        for ring in std::iter::once(&self.exterior).chain(self.holes.iter()) {
            if ring.len() < 4 {
                return Err(Error::invalid("boundary ring must have at least 4 vertices"));
            }
            let (first, last) = (ring[0], ring[ring.len() - 1]);
            if first != last {
                return Err(Error::invalid("boundary ring is not closed"));
            }
            if !ring.iter().all(|p| p.lon.is_finite() && p.lat.is_finite()) {
                return Err(Error::invalid("boundary contains non-finite coordinates"));
            }
            if ring_self_intersects(ring) {
                return Err(Error::invalid("boundary ring is self-intersecting"));
            }
        }
        Ok(())
    }

    /// Area centroid of the exterior ring, in degrees (adequate as a
    /// projection origin).
    pub fn centroid(&self) -> LonLat {
        let ring = &self.exterior;
        let mut a2 = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let cross = w[0].lon * w[1].lat - w[1].lon * w[0].lat;
            a2 += cross;
            cx += (w[0].lon + w[1].lon) * cross;
            cy += (w[0].lat + w[1].lat) * cross;
        }
        if a2.abs() < 1e-30 {
            // degenerate; fall back to the vertex mean
            let n = (ring.len() - 1) as f64;
            let (sx, sy) = ring[..ring.len() - 1]
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.lon, sy + p.lat));
            return LonLat::new(sx / n, sy / n);
        }
        LonLat::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    /// Exterior ring projected to the local km frame.
    pub fn exterior_km(&self, proj: &Projection) -> Vec<(f64, f64)> {
        self.exterior.iter().map(|p| proj.to_km(*p)).collect()
    }

    fn holes_km(&self, proj: &Projection) -> Vec<Vec<(f64, f64)>> {
        self.holes.iter().map(|h| h.iter().map(|p| proj.to_km(*p)).collect()).collect()
    }

    /// Planimetric area in km² (holes subtracted).
    pub fn area_km2(&self, proj: &Projection) -> f64 {
        let mut area = ring_area(&self.exterior_km(proj)).abs();
        for h in self.holes_km(proj) {
            area -= ring_area(&h).abs();
        }
        area
    }

    /// Point-in-polygon test in the projected frame (holes excluded).
    pub fn contains_km(&self, proj: &Projection, x: f64, y: f64) -> bool {
        if !point_in_ring(&self.exterior_km(proj), x, y) {
            return false;
        }
        !self.holes_km(proj).iter().any(|h| point_in_ring(h, x, y))
    }
}

fn ring_area(ring: &[(f64, f64)]) -> f64 {
    let mut a2 = 0.0;
    for w in ring.windows(2) {
        a2 += w[0].0 * w[1].1 - w[1].0 * w[0].1;
    }
    a2 / 2.0
}

/// Even-odd ray casting.
fn point_in_ring(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        if (y1 > y) != (y2 > y) && x < (x2 - x1) * (y - y1) / (y2 - y1) + x1 {
            inside = !inside;
        }
    }
    inside
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn ring_self_intersects(ring: &[LonLat]) -> bool {
    let pts: Vec<(f64, f64)> = ring.iter().map(|p| (p.lon, p.lat)).collect();
    let n = pts.len() - 1; // closed ring: n segments
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // first and last segments share a vertex
            }
            if segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return true;
            }
        }
    }
    false
}

/// Gridded person counts; row 0 is the northernmost row.
#[derive(Debug, Clone)]
pub struct PopulationRaster {
    /// Lower-left corner of the grid, degrees.
    pub origin: LonLat,
    /// Cell size in degrees.
    pub cell_size_deg: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major counts, row 0 northernmost.
    pub counts: Vec<f64>,
}

impl PopulationRaster {
    pub fn new(origin: LonLat, cell_size_deg: f64, rows: usize, cols: usize, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::invalid("raster dimensions do not match data length"));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("raster counts must be finite and non-negative"));
        }
        Ok(PopulationRaster { origin, cell_size_deg, rows, cols, counts })
    }

    /// Centre of cell (row, col) in degrees.
    pub fn cell_center(&self, row: usize, col: usize) -> LonLat {
        LonLat::new(
            self.origin.lon + (col as f64 + 0.5) * self.cell_size_deg,
            self.origin.lat + ((self.rows - 1 - row) as f64 + 0.5) * self.cell_size_deg,
        )
    }

    /// Iterate non-zero cells as (centre, count).
    pub fn cells(&self) -> impl Iterator<Item = (LonLat, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).filter_map(move |c| {
                let v = self.counts[r * self.cols + c];
                (v > 0.0).then(|| (self.cell_center(r, c), v))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Workplace,
    Poi,
}

/// A set of geocoded points (workplaces or POIs).
#[derive(Debug, Clone)]
pub struct PointSet {
    pub kind: PointKind,
    pub points: Vec<(LonLat, Option<String>)>,
}

impl PointSet {
    pub fn new(kind: PointKind, points: Vec<(LonLat, Option<String>)>) -> Result<Self> {
        if points.iter().any(|(p, _)| !p.lon.is_finite() || !p.lat.is_finite()) {
            return Err(Error::invalid("point set contains non-finite coordinates"));
        }
        Ok(PointSet { kind, points })
    }
}

/// One square traffic zone.
#[derive(Debug, Clone)]
pub struct TrafficZone {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    /// Zone centre, degrees.
    pub centroid: LonLat,
    /// Zone centre in the local km frame.
    pub center_km: (f64, f64),
    pub population: f64,
    pub workplaces: f64,
    pub pois: f64,
    pub n_ev: u64,
}

/// Regular zone grid over the study area.
#[derive(Debug, Clone)]
pub struct ZoneGrid {
    pub cell_size_km: f64,
    pub zones: Vec<TrafficZone>,
    pub projection: Projection,
    /// Grid frame: x of the west edge and y of the north edge, km.
    pub x_min: f64,
    pub y_max: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell index -> zone id (None for discarded cells).
    cell_zone: Vec<Option<usize>>,
    /// Points that fell outside every zone during the last aggregation.
    pub outside_points: usize,
}

impl ZoneGrid {
    pub fn total_population(&self) -> f64 {
        self.zones.iter().map(|z| z.population).sum()
    }

    pub fn total_workplaces(&self) -> f64 {
        self.zones.iter().map(|z| z.workplaces).sum()
    }

    pub fn total_pois(&self) -> f64 {
        self.zones.iter().map(|z| z.pois).sum()
    }

    pub fn total_evs(&self) -> u64 {
        self.zones.iter().map(|z| z.n_ev).sum()
    }

    pub fn cell_area_km2(&self) -> f64 {
        self.cell_size_km * self.cell_size_km
    }

    /// Zone containing the given projected point. A point exactly on a
    /// shared edge belongs to the zone with the lower id (west / north
    /// neighbour under row-major ids).
    pub fn zone_at_km(&self, x: f64, y: f64) -> Option<usize> {
        let s = self.cell_size_km;
        let fx = (x - self.x_min) / s;
        let fy = (self.y_max - y) / s;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let mut col = fx.floor() as isize;
        let mut row = fy.floor() as isize;
        // on-edge ties go to the lower id
        if fx.fract() == 0.0 && col > 0 {
            col -= 1;
        }
        if fy.fract() == 0.0 && row > 0 {
            row -= 1;
        }
        if col < 0 || row < 0 || col as usize >= self.cols || row as usize >= self.rows {
            return None;
        }
        self.cell_zone[row as usize * self.cols + col as usize]
    }

    pub fn zone_at(&self, p: LonLat) -> Option<usize> {
        let (x, y) = self.projection.to_km(p);
        self.zone_at_km(x, y)
    }

    /// Corner coordinates of a zone polygon (closed ring, degrees).
    pub fn zone_ring(&self, zone: &TrafficZone) -> Vec<LonLat> {
        let s = self.cell_size_km;
        let x0 = self.x_min + zone.col as f64 * s;
        let y0 = self.y_max - zone.row as f64 * s;
        [(x0, y0), (x0 + s, y0), (x0 + s, y0 - s), (x0, y0 - s), (x0, y0)]
            .iter()
            .map(|&(x, y)| self.projection.to_lonlat(x, y))
            .collect()
    }
}

/// Tile the boundary with square cells of side `cell_size_km`, keeping the
/// cells whose centre lies inside the boundary.
pub fn build_zone_grid(boundary: &BoundaryPolygon, cell_size_km: f64) -> Result<ZoneGrid> {
    if !(cell_size_km > 0.0) {
        return Err(Error::invalid("cell size must be positive"));
    }
    let proj = Projection::new(boundary.centroid());
    let area = boundary.area_km2(&proj);
    if area < 1e-6 {
        return Err(Error::invalid("degenerate boundary: area is zero"));
    }
    let ring = boundary.exterior_km(&proj);
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &ring {
        x_min = x_min.min(x);
        y_min = y_min.min(y);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    // the 1e-9 slack keeps exact-multiple boundaries from gaining a row
    let cols = (((x_max - x_min) / cell_size_km) - 1e-9).ceil().max(1.0) as usize;
    let rows = (((y_max - y_min) / cell_size_km) - 1e-9).ceil().max(1.0) as usize;
    // centre the tiling on the bounding box so clipping is symmetric
    let x_min = x_min - (cols as f64 * cell_size_km - (x_max - x_min)) / 2.0;
    let y_max = y_max + (rows as f64 * cell_size_km - (y_max - y_min)) / 2.0;

    let mut zones = Vec::new();
    let mut cell_zone = vec![None; rows * cols];
    for row in 0..rows {
        for col in 0..cols {
            let cx = x_min + (col as f64 + 0.5) * cell_size_km;
            let cy = y_max - (row as f64 + 0.5) * cell_size_km;
            if boundary.contains_km(&proj, cx, cy) {
                let id = zones.len();
                cell_zone[row * cols + col] = Some(id);
                zones.push(TrafficZone {
                    id,
                    row,
                    col,
                    centroid: proj.to_lonlat(cx, cy),
                    center_km: (cx, cy),
                    population: 0.0,
                    workplaces: 0.0,
                    pois: 0.0,
                    n_ev: 0,
                });
            }
        }
    }
    if zones.is_empty() {
        return Err(Error::invalid("no zone centre falls inside the boundary; cell size too large?"));
    }
    Ok(ZoneGrid {
        cell_size_km,
        zones,
        projection: proj,
        x_min,
        y_max,
        rows,
        cols,
        cell_zone,
        outside_points: 0,
    })
}

/// Assign every raster cell's count to the zone containing the cell centre.
/// Resets per-zone population first, so re-running is idempotent.
pub fn aggregate_population(grid: &mut ZoneGrid, raster: &PopulationRaster) -> Result<()> {
    for z in &mut grid.zones {
        z.population = 0.0;
    }
    let mut covered = false;
    for (center, count) in raster.cells() {
        if let Some(id) = grid.zone_at(center) {
            grid.zones[id].population += count;
            covered = true;
        }
    }
    if !covered {
        return Err(Error::NoPopulationCoverage);
    }
    Ok(())
}

/// CSV-style population input: one weighted point per record.
pub fn aggregate_population_points(grid: &mut ZoneGrid, points: &[(LonLat, f64)]) -> Result<()> {
    for z in &mut grid.zones {
        z.population = 0.0;
    }
    let mut covered = false;
    for &(p, count) in points {
        if count < 0.0 || !count.is_finite() {
            return Err(Error::invalid("population counts must be finite and non-negative"));
        }
        if let Some(id) = grid.zone_at(p) {
            grid.zones[id].population += count;
            covered = true;
        }
    }
    if !covered {
        return Err(Error::NoPopulationCoverage);
    }
    Ok(())
}

/// Count points per zone into the workplace or POI field. Points outside
/// every zone are tallied in `grid.outside_points`, not assigned.
pub fn aggregate_points(grid: &mut ZoneGrid, points: &PointSet) {
    for z in &mut grid.zones {
        match points.kind {
            PointKind::Workplace => z.workplaces = 0.0,
            PointKind::Poi => z.pois = 0.0,
        }
    }
    let mut outside = 0;
    for (p, _) in &points.points {
        match grid.zone_at(*p) {
            Some(id) => match points.kind {
                PointKind::Workplace => grid.zones[id].workplaces += 1.0,
                PointKind::Poi => grid.zones[id].pois += 1.0,
            },
            None => outside += 1,
        }
    }
    grid.outside_points = outside;
}

/// Distribute `n_tot` vehicles across zones proportionally to population,
/// using largest-remainder rounding so the total matches exactly. Remainder
/// ties break on the lower zone id.
pub fn allocate_vehicles(grid: &mut ZoneGrid, n_tot: u64) -> Result<()> {
    let p_tot = grid.total_population();
    if !(p_tot > 0.0) {
        return Err(Error::invalid("total population is zero; cannot allocate vehicles"));
    }
    let quotas: Vec<f64> = grid.zones.iter().map(|z| z.population / p_tot * n_tot as f64).collect();
    let mut alloc: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = alloc.iter().sum();
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a].fract(), quotas[b].fract());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take((n_tot - assigned) as usize) {
        alloc[i] += 1;
    }
    for (z, n) in grid.zones.iter_mut().zip(alloc) {
        z.n_ev = n;
    }
    Ok(())
}

/// Test helper: a square boundary of the given side centred on (38.76 E, 9.01 N).
#[cfg(test)]
pub(crate) fn square_boundary_km(side_km: f64) -> BoundaryPolygon {
    let proj = Projection::new(LonLat::new(38.76, 9.01));
    let h = side_km / 2.0;
    let ring = [(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)]
        .iter()
        .map(|&(x, y)| proj.to_lonlat(x, y))
        .collect();
    BoundaryPolygon::new(ring, vec![]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_boundary_exact_tiling() {
        let grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        assert_eq!(grid.zones.len(), 4);
        // ids are row-major
        assert!(grid.zones.iter().enumerate().all(|(i, z)| z.id == i));
    }

    #[test]
    fn boundary_smaller_than_cell_gives_one_zone() {
        let grid = build_zone_grid(&square_boundary_km(0.5), 5.0).unwrap();
        assert_eq!(grid.zones.len(), 1);
    }

    #[test]
    fn degenerate_boundary_rejected() {
        let p = LonLat::new(38.76, 9.01);
        let ring = vec![p, p, p, p];
        let b = BoundaryPolygon { exterior: ring, holes: vec![] };
        assert!(build_zone_grid(&b, 1.0).is_err());
    }

    #[test]
    fn self_intersecting_ring_rejected() {
        let ring = vec![
            LonLat::new(0.0, 0.0),
            LonLat::new(1.0, 1.0),
            LonLat::new(1.0, 0.0),
            LonLat::new(0.0, 1.0),
            LonLat::new(0.0, 0.0),
        ];
        assert!(BoundaryPolygon::new(ring, vec![]).is_err());
    }

    #[test]
    fn zone_side_length_matches_cell_size() {
        let grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        let ring = grid.zone_ring(&grid.zones[0]);
        let (x0, y0) = grid.projection.to_km(ring[0]);
        let (x1, _) = grid.projection.to_km(ring[1]);
        assert_relative_eq!(x1 - x0, 5.0, max_relative = 1e-3);
        let _ = y0;
    }

    #[test]
    fn uniform_raster_gives_equal_population() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        // fine uniform raster across the whole square
        let origin = grid.projection.to_lonlat(-5.0, -5.0);
        let cell_deg = 0.5 / KM_PER_DEG; // ~0.5 km cells
        let n = 20;
        let raster =
            PopulationRaster::new(origin, cell_deg, n, n, vec![10.0; n * n]).unwrap();
        aggregate_population(&mut grid, &raster).unwrap();
        let pops: Vec<f64> = grid.zones.iter().map(|z| z.population).collect();
        for p in &pops {
            assert_relative_eq!(*p, pops[0], max_relative = 1e-12);
        }
        assert_relative_eq!(grid.total_population(), 10.0 * (n * n) as f64, max_relative = 1e-12);
    }

    #[test]
    fn single_raster_cell_goes_to_containing_zone() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        // centre of zone 3 (south-east quadrant)
        let target = grid.zones[3].centroid;
        let origin = LonLat::new(target.lon - 0.0005, target.lat - 0.0005);
        let raster = PopulationRaster::new(origin, 0.001, 1, 1, vec![100.0]).unwrap();
        aggregate_population(&mut grid, &raster).unwrap();
        assert_eq!(grid.zones[3].population, 100.0);
        assert_eq!(grid.total_population(), 100.0);
    }

    #[test]
    fn population_points_assign_like_raster_cells() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        let pts = vec![
            (grid.zones[0].centroid, 10.0),
            (grid.zones[0].centroid, 5.0),
            (grid.zones[3].centroid, 7.0),
        ];
        aggregate_population_points(&mut grid, &pts).unwrap();
        assert_eq!(grid.zones[0].population, 15.0);
        assert_eq!(grid.zones[3].population, 7.0);
        let bad = [(grid.zones[0].centroid, -1.0)];
        assert!(aggregate_population_points(&mut grid, &bad).is_err());
    }

    #[test]
    fn no_overlap_is_an_error() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        let raster = PopulationRaster::new(LonLat::new(0.0, 0.0), 0.001, 2, 2, vec![1.0; 4]).unwrap();
        assert!(matches!(aggregate_population(&mut grid, &raster), Err(Error::NoPopulationCoverage)));
    }

    #[test]
    fn points_all_in_one_zone() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        let c = grid.zones[2].centroid;
        let pts = PointSet::new(
            PointKind::Workplace,
            (0..3).map(|_| (c, None)).collect(),
        )
        .unwrap();
        aggregate_points(&mut grid, &pts);
        assert_eq!(grid.zones[2].workplaces, 3.0);
        assert_eq!(grid.total_workplaces(), 3.0);
        assert_eq!(grid.outside_points, 0);
    }

    #[test]
    fn point_on_shared_edge_goes_to_lower_id() {
        let grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        // vertical edge between zones 0 and 1 is at x = 0 in the grid frame
        let x_edge = grid.x_min + grid.cell_size_km;
        let y_mid = grid.y_max - 0.5 * grid.cell_size_km;
        assert_eq!(grid.zone_at_km(x_edge, y_mid), Some(0));
        // horizontal edge between zones 0 and 2
        let x_mid = grid.x_min + 0.5 * grid.cell_size_km;
        let y_edge = grid.y_max - grid.cell_size_km;
        assert_eq!(grid.zone_at_km(x_mid, y_edge), Some(0));
    }

    #[test]
    fn raster_aggregation_matches_brute_force() {
        use rand::Rng;
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 2.0).unwrap();
        let mut rng = crate::rng::stream(7, "raster-oracle", &[]);
        let origin = grid.projection.to_lonlat(-6.0, -6.0);
        let cell_deg = 0.7 / KM_PER_DEG;
        let (rows, cols) = (18, 18);
        let counts: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..50.0)).collect();
        let raster = PopulationRaster::new(origin, cell_deg, rows, cols, counts).unwrap();
        aggregate_population(&mut grid, &raster).unwrap();

        // brute force: scan zones in id order with an inclusive rectangle test
        let mut expected = vec![0.0; grid.zones.len()];
        for (center, count) in raster.cells() {
            let (x, y) = grid.projection.to_km(center);
            for z in &grid.zones {
                let s = grid.cell_size_km;
                let x0 = grid.x_min + z.col as f64 * s;
                let y0 = grid.y_max - z.row as f64 * s;
                if x >= x0 && x <= x0 + s && y <= y0 && y >= y0 - s {
                    expected[z.id] += count;
                    break;
                }
            }
        }
        for z in &grid.zones {
            assert_relative_eq!(z.population, expected[z.id], max_relative = 1e-12);
        }
    }

    #[test]
    fn random_points_match_brute_force_rectangles() {
        use rand::Rng;
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 2.0).unwrap();
        let mut rng = crate::rng::stream(99, "geo-oracle", &[]);
        let pts: Vec<(LonLat, Option<String>)> = (0..1000)
            .map(|_| {
                let x = rng.gen_range(-7.0..7.0);
                let y = rng.gen_range(-7.0..7.0);
                (grid.projection.to_lonlat(x, y), None)
            })
            .collect();
        let set = PointSet::new(PointKind::Poi, pts.clone()).unwrap();
        aggregate_points(&mut grid, &set);

        // brute force: scan zones in id order, inclusive rectangle test
        let mut counts = vec![0.0; grid.zones.len()];
        let mut outside = 0;
        for (p, _) in &pts {
            let (x, y) = grid.projection.to_km(*p);
            let mut hit = None;
            for z in &grid.zones {
                let s = grid.cell_size_km;
                let x0 = grid.x_min + z.col as f64 * s;
                let y0 = grid.y_max - z.row as f64 * s;
                if x >= x0 && x <= x0 + s && y <= y0 && y >= y0 - s {
                    hit = Some(z.id);
                    break;
                }
            }
            match hit {
                Some(id) => counts[id] += 1.0,
                None => outside += 1,
            }
        }
        for z in &grid.zones {
            assert_eq!(z.pois, counts[z.id], "zone {}", z.id);
        }
        assert_eq!(grid.outside_points, outside);
        let total: f64 = counts.iter().sum();
        assert_eq!(total + outside as f64, 1000.0);
    }

    #[test]
    fn allocation_equal_population() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        for z in &mut grid.zones {
            z.population = 1000.0;
        }
        allocate_vehicles(&mut grid, 100).unwrap();
        assert!(grid.zones.iter().all(|z| z.n_ev == 25));
    }

    #[test]
    fn allocation_largest_remainder_ties_by_id() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        grid.zones.truncate(3);
        for z in &mut grid.zones {
            z.population = 1.0;
        }
        allocate_vehicles(&mut grid, 100).unwrap();
        let n: Vec<u64> = grid.zones.iter().map(|z| z.n_ev).collect();
        assert_eq!(n, vec![34, 33, 33]);
    }

    #[test]
    fn allocation_direct_share() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        grid.zones[0].population = 55_400.0;
        grid.zones[1].population = 5_540_000.0 - 55_400.0;
        grid.zones[2].population = 0.0;
        grid.zones[3].population = 0.0;
        allocate_vehicles(&mut grid, 100_000).unwrap();
        assert_eq!(grid.zones[0].n_ev, 1000);
    }

    #[test]
    fn allocation_zero_population_is_error() {
        let mut grid = build_zone_grid(&square_boundary_km(10.0), 5.0).unwrap();
        assert!(allocate_vehicles(&mut grid, 10).is_err());
    }
}
