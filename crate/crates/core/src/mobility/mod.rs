//! Inter-zone distances and the gravity trip-distribution model.
//!
//! Trips from each origin zone are split across destination zones
//! proportionally to destination attractiveness (workplace count) times an
//! exponential distance decay. The decay parameter is self-calibrated from
//! the zone size, so no observed flow data is required.

pub mod routing;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{BoundaryPolygon, Projection, ZoneGrid};
use crate::rng;
use routing::DistanceProvider;

/// How a distance-matrix entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceSource {
    Routed,
    Circuity,
    IntraZonal,
}

/// Square matrix of inter-zone road distances, km.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    km: Vec<f64>,
    source: Vec<DistanceSource>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn km(&self, i: usize, j: usize) -> f64 {
        self.km[i * self.n + j]
    }

    pub fn source(&self, i: usize, j: usize) -> DistanceSource {
        self.source[i * self.n + j]
    }

    pub fn from_parts(n: usize, km: Vec<f64>, source: Vec<DistanceSource>) -> Result<Self> {
        if km.len() != n * n || source.len() != n * n {
            return Err(Error::invalid("distance matrix size mismatch"));
        }
        if km.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("distances must be finite and non-negative"));
        }
        Ok(DistanceMatrix { n, km, source })
    }

    /// CSV rows `i,j,km,source`; full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,km,source\n");
        for i in 0..self.n {
            for j in 0..self.n {
                let src = match self.source(i, j) {
                    DistanceSource::Routed => "routed",
                    DistanceSource::Circuity => "circuity",
                    DistanceSource::IntraZonal => "intra",
                };
                // `{}` prints the shortest representation that round-trips
                out.push_str(&format!("{i},{j},{},{src}\n", self.km(i, j)));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse_idx = |s: Option<&str>| -> Result<usize> {
                s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::invalid(format!("bad distance row: {line}")))
            };
            let i = parse_idx(it.next())?;
            let j = parse_idx(it.next())?;
            let km: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad distance value: {line}")))?;
            let source = match it.next() {
                Some("routed") => DistanceSource::Routed,
                Some("circuity") => DistanceSource::Circuity,
                Some("intra") => DistanceSource::IntraZonal,
                other => return Err(Error::invalid(format!("bad distance source: {other:?}"))),
            };
            entries.push((i, j, km, source));
        }
        let n = (entries.len() as f64).sqrt().round() as usize;
        if n * n != entries.len() {
            return Err(Error::invalid("distance CSV is not a square matrix"));
        }
        let mut km = vec![0.0; n * n];
        let mut source = vec![DistanceSource::Circuity; n * n];
        for (i, j, d, s) in entries {
            if i >= n || j >= n {
                return Err(Error::invalid("distance CSV index out of range"));
            }
            km[i * n + j] = d;
            source[i * n + j] = s;
        }
        DistanceMatrix::from_parts(n, km, source)
    }
}

/// Average ratio of road distance to straight-line distance.
#[derive(Debug, Clone, Copy)]
pub struct CircuityModel {
    pub factor: f64,
    pub samples: usize,
    /// RMS residual of the through-origin regression, km.
    pub residual_km: f64,
}

impl CircuityModel {
    /// A fixed factor, for runs without any routing service.
    pub fn fixed(factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return Err(Error::invalid("circuity factor must be >= 1"));
        }
        Ok(CircuityModel { factor, samples: 0, residual_km: 0.0 })
    }
}

/// Production-constrained trip probabilities.
#[derive(Debug, Clone)]
pub struct TripMatrix {
    n: usize,
    /// Row-major p(i -> j); every row with any destination sums to 1.
    p: Vec<f64>,
    pub beta: f64,
    /// Per-origin normalisation constants.
    pub norm: Vec<f64>,
}

impl TripMatrix {
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Per-zone vehicle-kilometre aggregates and daily distance distributions.
#[derive(Debug, Clone)]
pub struct MobilityResult {
    /// Two-way km/day leaving each zone (home end).
    pub vkm_out: Vec<f64>,
    /// Two-way km/day arriving at each zone (work end).
    pub vkm_in: Vec<f64>,
    /// Per origin zone: (two-way daily distance km, probability) pairs,
    /// destination order, self-destination included.
    pub distance_dist: Vec<Vec<(f64, f64)>>,
    /// Fleet-average two-way daily distance, km.
    pub fleet_mean_km: f64,
    /// Constant per-vehicle daily distance added on top of commuting, km.
    pub extra_km: f64,
}

/// Self-calibrated exponential decay parameter from zone area (km²).
pub fn compute_beta(cell_area_km2: f64) -> Result<f64> {
    if !(cell_area_km2 > 0.0) {
        return Err(Error::invalid("zone area must be positive"));
    }
    Ok(0.3 * cell_area_km2.powf(-0.18))
}

/// Intra-zonal trip distance: half the radius of the equal-area circle.
pub fn intra_zonal_km(cell_area_km2: f64) -> f64 {
    0.5 * (cell_area_km2 / std::f64::consts::PI).sqrt()
}

/// Estimate the circuity factor by routing random point pairs inside the
/// boundary and fitting a through-origin least-squares line
/// `road = k * euclidean`. The factor is clamped to >= 1.
pub fn estimate_circuity(
    boundary: &BoundaryPolygon,
    router: &dyn DistanceProvider,
    n_samples: usize,
    seed: u64,
) -> Result<CircuityModel> {
    if n_samples < 10 {
        return Err(Error::invalid("need at least 10 samples for circuity estimation"));
    }
    let proj = Projection::new(boundary.centroid());
    let ring = boundary.exterior_km(&proj);
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &ring {
        x_min = x_min.min(x);
        y_min = y_min.min(y);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    let mut rng = rng::stream(seed, "circuity", &[]);
    let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let x = rng.gen_range(x_min..=x_max);
        let y = rng.gen_range(y_min..=y_max);
        if boundary.contains_km(&proj, x, y) {
            return (x, y);
        }
    };

    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut pairs = Vec::with_capacity(n_samples);
    let mut failures = 0usize;
    for _ in 0..n_samples {
        if failures * 2 > n_samples {
            break; // already past the failure budget
        }
        let a = draw_point(&mut rng);
        let b = draw_point(&mut rng);
        let euclid = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        match router.road_km(proj.to_lonlat(a.0, a.1), proj.to_lonlat(b.0, b.1)) {
            Ok(road) => {
                sxy += euclid * road;
                sxx += euclid * euclid;
                pairs.push((euclid, road));
            }
            Err(_) => failures += 1,
        }
    }
    if failures * 2 > n_samples {
        return Err(Error::Routing(format!(
            "circuity estimation failed: {failures}/{n_samples} routing requests failed"
        )));
    }
    if sxx <= 0.0 {
        return Err(Error::invalid("all sampled point pairs are identical"));
    }
    let k = (sxy / sxx).max(1.0);
    let residual = (pairs.iter().map(|(e, r)| (r - k * e).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt();
    Ok(CircuityModel { factor: k, samples: pairs.len(), residual_km: residual })
}

/// Build the zone-to-zone distance matrix. Routed centroid distances are
/// used where the router answers; everything else falls back to
/// circuity-scaled Euclidean distance. Diagonal entries use the intra-zonal
/// distance.
pub fn distance_matrix(
    grid: &ZoneGrid,
    router: Option<&dyn DistanceProvider>,
    circuity: &CircuityModel,
) -> Result<DistanceMatrix> {
    let n = grid.zones.len();
    if n == 0 {
        return Err(Error::invalid("grid has no zones"));
    }
    let routed: Option<Vec<Vec<Option<f64>>>> = router.map(|r| {
        let pts: Vec<_> = grid.zones.iter().map(|z| z.centroid).collect();
        r.matrix_km(&pts)
    });
    let d_ii = intra_zonal_km(grid.cell_area_km2());
    let rows: Vec<(Vec<f64>, Vec<DistanceSource>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut km = vec![0.0; n];
            let mut src = vec![DistanceSource::Circuity; n];
            let (xi, yi) = grid.zones[i].center_km;
            for j in 0..n {
                if i == j {
                    km[j] = d_ii;
                    src[j] = DistanceSource::IntraZonal;
                    continue;
                }
                let entry = routed.as_ref().and_then(|m| m[i][j]);
                match entry {
                    Some(d) if d.is_finite() && d >= 0.0 => {
                        km[j] = d;
                        src[j] = DistanceSource::Routed;
                    }
                    _ => {
                        let (xj, yj) = grid.zones[j].center_km;
                        km[j] = circuity.factor * ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                    }
                }
            }
            (km, src)
        })
        .collect();
    let mut km = Vec::with_capacity(n * n);
    let mut source = Vec::with_capacity(n * n);
    for (k, s) in rows {
        km.extend(k);
        source.extend(s);
    }
    DistanceMatrix::from_parts(n, km, source)
}

/// Gravity trip probabilities: p(i->j) proportional to A_j * exp(-beta d_ij),
/// normalised per origin over all destinations (self included). Zones with
/// zero attractiveness receive zero probability.
pub fn trip_probabilities(grid: &ZoneGrid, dist: &DistanceMatrix, beta: f64) -> Result<TripMatrix> {
    let n = grid.zones.len();
    if dist.len() != n {
        return Err(Error::invalid("distance matrix does not match grid"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    let attractiveness: Vec<f64> = grid.zones.iter().map(|z| z.workplaces).collect();
    if attractiveness.iter().sum::<f64>() <= 0.0 {
        return Err(Error::NoDestinations);
    }
    let mut p = vec![0.0; n * n];
    let mut norm = vec![0.0; n];
    for i in 0..n {
        let row = &mut p[i * n..(i + 1) * n];
        let mut sum = 0.0;
        for (j, w) in row.iter_mut().enumerate() {
            *w = attractiveness[j] * (-beta * dist.km(i, j)).exp();
            sum += *w;
        }
        let c = 1.0 / sum;
        norm[i] = c;
        for w in row.iter_mut() {
            *w *= c;
        }
    }
    Ok(TripMatrix { n, p, beta, norm })
}

/// Vehicle-kilometre aggregates. Commuting legs count twice (outward and
/// return); self-destination trips are excluded from the zone sums but kept
/// in the per-zone distance distributions. A configurable extra daily
/// distance per vehicle (non-commuting travel) is spread over destinations
/// like the commute itself.
pub fn vkm(grid: &ZoneGrid, trips: &TripMatrix, dist: &DistanceMatrix, extra_km: f64) -> Result<MobilityResult> {
    let n = grid.zones.len();
    if trips.len() != n || dist.len() != n {
        return Err(Error::invalid("matrix sizes do not match grid"));
    }
    if extra_km < 0.0 {
        return Err(Error::invalid("extra distance cannot be negative"));
    }
    let mut vkm_out = vec![0.0; n];
    let mut vkm_in = vec![0.0; n];
    let mut distance_dist = Vec::with_capacity(n);
    let mut mean_num = 0.0;
    let mut n_tot = 0.0;
    for i in 0..n {
        let n_i = grid.zones[i].n_ev as f64;
        let mut row_dist = Vec::with_capacity(n);
        for j in 0..n {
            let p = trips.prob(i, j);
            let d = dist.km(i, j);
            let two_way = 2.0 * d + extra_km;
            row_dist.push((two_way, p));
            if i != j {
                vkm_out[i] += 2.0 * p * n_i * d;
                vkm_in[j] += 2.0 * p * n_i * d;
            }
            mean_num += n_i * p * two_way;
            // the extra distance follows the trip distribution
            vkm_out[i] += p * n_i * extra_km;
            vkm_in[j] += p * n_i * extra_km;
        }
        distance_dist.push(row_dist);
        n_tot += n_i;
    }
    let fleet_mean_km = if n_tot > 0.0 { mean_num / n_tot } else { 0.0 };
    Ok(MobilityResult { vkm_out, vkm_in, distance_dist, fleet_mean_km, extra_km })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{self, LonLat};
    use approx::assert_relative_eq;

    #[test]
    fn beta_values() {
        assert_relative_eq!(compute_beta(1.0).unwrap(), 0.3, epsilon = 1e-15);
        assert_relative_eq!(compute_beta(3.8025).unwrap(), 0.235_889_6, epsilon = 1e-6);
        assert_relative_eq!(compute_beta(100.0).unwrap(), 0.130_954_75, epsilon = 1e-6);
        assert!(compute_beta(0.0).is_err());
    }

    #[test]
    fn intra_zonal_distance() {
        assert_relative_eq!(intra_zonal_km(3.8025), 0.550_084_8, epsilon = 1e-6);
    }

    fn test_proj() -> Projection {
        Projection::new(LonLat::new(38.76, 9.01))
    }

    struct ScaledEuclid(f64);
    impl DistanceProvider for ScaledEuclid {
        fn road_km(&self, from: LonLat, to: LonLat) -> Result<f64> {
            let (x1, y1) = test_proj().to_km(from);
            let (x2, y2) = test_proj().to_km(to);
            Ok(self.0 * ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt())
        }
    }

    struct Manhattan;
    impl DistanceProvider for Manhattan {
        fn road_km(&self, from: LonLat, to: LonLat) -> Result<f64> {
            let (x1, y1) = test_proj().to_km(from);
            let (x2, y2) = test_proj().to_km(to);
            Ok((x1 - x2).abs() + (y1 - y2).abs())
        }
    }

    struct FailingRouter;
    impl DistanceProvider for FailingRouter {
        fn road_km(&self, _: LonLat, _: LonLat) -> Result<f64> {
            Err(Error::Routing("down".into()))
        }
    }

    #[test]
    fn circuity_exact_on_linear_router() {
        let b = geo::square_boundary_km(10.0);
        let m = estimate_circuity(&b, &ScaledEuclid(1.3), 200, 42).unwrap();
        assert_relative_eq!(m.factor, 1.3, epsilon = 1e-6);
        assert!(m.residual_km < 1e-9);
    }

    #[test]
    fn circuity_identity_router_clamps_to_one() {
        let b = geo::square_boundary_km(10.0);
        let m = estimate_circuity(&b, &ScaledEuclid(1.0), 100, 1).unwrap();
        assert_relative_eq!(m.factor, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn circuity_manhattan_matches_monte_carlo_oracle() {
        let b = geo::square_boundary_km(10.0);
        let m = estimate_circuity(&b, &Manhattan, 20_000, 7).unwrap();

        // independent Monte Carlo estimate of the same regression with a
        // different stream
        use rand::Rng;
        let mut rng = crate::rng::stream(1234, "manhattan-oracle", &[]);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for _ in 0..200_000 {
            let (x1, y1) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let (x2, y2) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let dx: f64 = x1 - x2;
            let dy: f64 = y1 - y2;
            let euclid = (dx * dx + dy * dy).sqrt();
            let road = dx.abs() + dy.abs();
            sxy += euclid * road;
            sxx += euclid * euclid;
        }
        let oracle = sxy / sxx;
        assert_relative_eq!(m.factor, oracle, max_relative = 0.02);
        // sanity: isotropic directions would give 4/pi
        assert!(m.factor > 1.2 && m.factor < 1.35);
    }

    #[test]
    fn circuity_fails_when_router_mostly_down() {
        let b = geo::square_boundary_km(10.0);
        assert!(matches!(
            estimate_circuity(&b, &FailingRouter, 100, 3),
            Err(Error::Routing(_))
        ));
    }

    fn two_zone_grid() -> ZoneGrid {
        // 10 km x 5 km strip -> asymmetric? build from square and truncate
        let b = geo::square_boundary_km(10.0);
        geo::build_zone_grid(&b, 5.0).unwrap()
    }

    #[test]
    fn distance_matrix_circuity_fallback() {
        let grid = two_zone_grid();
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        // zones 0 and 1 are 5 km apart (same row)
        assert_relative_eq!(d.km(0, 1), 6.5, epsilon = 1e-9);
        assert_eq!(d.source(0, 1), DistanceSource::Circuity);
        assert_eq!(d.source(0, 0), DistanceSource::IntraZonal);
        assert_relative_eq!(d.km(0, 0), intra_zonal_km(25.0), epsilon = 1e-12);
    }

    /// Router that only answers for one specific pair.
    struct OnePair;
    impl DistanceProvider for OnePair {
        fn road_km(&self, _: LonLat, _: LonLat) -> Result<f64> {
            Err(Error::Routing("no".into()))
        }
        fn matrix_km(&self, points: &[LonLat]) -> Vec<Vec<Option<f64>>> {
            let n = points.len();
            let mut m = vec![vec![None; n]; n];
            if n > 2 {
                m[1][2] = Some(9.9);
            }
            m
        }
    }

    #[test]
    fn distance_matrix_mixed_provenance() {
        let grid = two_zone_grid();
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = distance_matrix(&grid, Some(&OnePair), &circ).unwrap();
        assert_eq!(d.source(1, 2), DistanceSource::Routed);
        assert_relative_eq!(d.km(1, 2), 9.9, epsilon = 1e-12);
        assert_eq!(d.source(0, 1), DistanceSource::Circuity);
    }

    #[test]
    fn gravity_symmetric_destinations() {
        let mut grid = two_zone_grid();
        // zones 1 and 2 equally attractive and equidistant from zone 0?
        // use zones 1 (east) and 2 (south): both 5 km from zone 0.
        grid.zones[1].workplaces = 3.0;
        grid.zones[2].workplaces = 3.0;
        let circ = CircuityModel::fixed(1.0).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let t = trip_probabilities(&grid, &d, 0.3).unwrap();
        assert_relative_eq!(t.prob(0, 1), t.prob(0, 2), epsilon = 1e-12);
        assert_relative_eq!(t.prob(0, 1) + t.prob(0, 2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gravity_distance_cancels_with_equal_distance() {
        let mut grid = two_zone_grid();
        grid.zones[1].workplaces = 1.0;
        grid.zones[2].workplaces = 2.0;
        let circ = CircuityModel::fixed(1.0).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let t = trip_probabilities(&grid, &d, 0.77).unwrap();
        assert_relative_eq!(t.prob(0, 1), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(t.prob(0, 2), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gravity_matches_brute_force_normalisation() {
        let mut grid = two_zone_grid();
        let a = [5.0, 3.0, 2.0, 0.0];
        for (z, w) in grid.zones.iter_mut().zip(a) {
            z.workplaces = w;
        }
        let circ = CircuityModel::fixed(1.22).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let beta = 0.2360;
        let t = trip_probabilities(&grid, &d, beta).unwrap();
        for i in 0..4 {
            let weights: Vec<f64> = (0..4).map(|j| a[j] * (-beta * d.km(i, j)).exp()).collect();
            let sum: f64 = weights.iter().sum();
            for j in 0..4 {
                assert_relative_eq!(t.prob(i, j), weights[j] / sum, epsilon = 1e-12);
            }
            assert_relative_eq!(t.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        // zero-attractiveness destination gets exactly zero
        assert_eq!(t.prob(0, 3), 0.0);
    }

    #[test]
    fn gravity_all_zero_attractiveness_is_error() {
        let grid = two_zone_grid();
        let circ = CircuityModel::fixed(1.0).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        assert!(matches!(trip_probabilities(&grid, &d, 0.3), Err(Error::NoDestinations)));
    }

    #[test]
    fn vkm_single_pair() {
        let mut grid = two_zone_grid();
        grid.zones[0].n_ev = 10;
        grid.zones[1].workplaces = 1.0;
        // force p(0 -> 1) = 1 by making zone 1 the only destination
        let circ = CircuityModel::fixed(1.0).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        assert_relative_eq!(d.km(0, 1), 5.0, epsilon = 1e-9);
        let t = trip_probabilities(&grid, &d, 0.3).unwrap();
        let m = vkm(&grid, &t, &d, 0.0).unwrap();
        assert_relative_eq!(m.vkm_out[0], 100.0, epsilon = 1e-9);
        assert_relative_eq!(m.vkm_in[1], 100.0, epsilon = 1e-9);
    }

    #[test]
    fn vkm_conservation_and_symmetry() {
        let mut grid = two_zone_grid();
        for (i, z) in grid.zones.iter_mut().enumerate() {
            z.workplaces = (i + 1) as f64;
            z.n_ev = 100 * (i as u64 + 1);
        }
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let t = trip_probabilities(&grid, &d, 0.2360).unwrap();
        let m = vkm(&grid, &t, &d, 0.0).unwrap();
        let out: f64 = m.vkm_out.iter().sum();
        let inn: f64 = m.vkm_in.iter().sum();
        assert_relative_eq!(out, inn, epsilon = 1e-9);
        // per-zone distribution weights sum to 1
        for row in &m.distance_dist {
            assert_relative_eq!(row.iter().map(|(_, w)| w).sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn vkm_extra_distance_keeps_conservation() {
        let mut grid = two_zone_grid();
        for (i, z) in grid.zones.iter_mut().enumerate() {
            z.workplaces = (i + 1) as f64;
            z.n_ev = 50;
        }
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let t = trip_probabilities(&grid, &d, 0.2360).unwrap();
        let m0 = vkm(&grid, &t, &d, 0.0).unwrap();
        let m = vkm(&grid, &t, &d, 3.0).unwrap();
        let out: f64 = m.vkm_out.iter().sum();
        let inn: f64 = m.vkm_in.iter().sum();
        assert_relative_eq!(out, inn, max_relative = 1e-12);
        assert_relative_eq!(m.fleet_mean_km, m0.fleet_mean_km + 3.0, epsilon = 1e-9);
    }

    #[test]
    fn distance_csv_roundtrip() {
        let grid = two_zone_grid();
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = distance_matrix(&grid, Some(&OnePair), &circ).unwrap();
        let back = DistanceMatrix::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back.len(), d.len());
        for i in 0..d.len() {
            for j in 0..d.len() {
                assert_eq!(back.km(i, j), d.km(i, j));
                assert_eq!(back.source(i, j), d.source(i, j));
            }
        }
    }

    #[test]
    fn attractiveness_scaling_invariance() {
        let mut grid = two_zone_grid();
        for (i, z) in grid.zones.iter_mut().enumerate() {
            z.workplaces = (i + 1) as f64;
        }
        let circ = CircuityModel::fixed(1.0).unwrap();
        let d = distance_matrix(&grid, None, &circ).unwrap();
        let t1 = trip_probabilities(&grid, &d, 0.3).unwrap();
        for z in &mut grid.zones {
            z.workplaces *= 17.5;
        }
        let t2 = trip_probabilities(&grid, &d, 0.3).unwrap();
        for i in 0..grid.zones.len() {
            for j in 0..grid.zones.len() {
                assert_relative_eq!(t1.prob(i, j), t2.prob(i, j), epsilon = 1e-12);
            }
        }
    }
}
