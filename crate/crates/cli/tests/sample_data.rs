//! Pins the bundled sample-city statistics the rest of the suite depends on.

use std::path::PathBuf;

use chargesim_core::geo::{self, io as geoio};
use chargesim_core::mobility::{self, CircuityModel};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn sample_city_shape() {
    let boundary = geoio::load_boundary_geojson(data("data/addis/boundary.geojson")).unwrap();
    let proj = geo::Projection::new(boundary.centroid());
    let area = boundary.area_km2(&proj);
    assert!((area - 540.0).abs() < 15.0, "boundary area {area} km²");

    let mut grid = geo::build_zone_grid(&boundary, 1.95).unwrap();
    // expected zone count: area over cell area, within 10 % for clipping
    let expected = area / (1.95 * 1.95);
    let got = grid.zones.len() as f64;
    assert!((got - expected).abs() / expected < 0.10, "zones {got} vs ~{expected:.0}");

    let raster = geoio::load_esri_ascii(data("data/addis/population.asc")).unwrap();
    geo::aggregate_population(&mut grid, &raster).unwrap();
    let pop = grid.total_population();
    assert!((pop - 5.54e6).abs() / 5.54e6 < 0.05, "population {pop}");

    let wp = geoio::load_points_csv(data("data/addis/workplaces.csv"), geo::PointKind::Workplace).unwrap();
    assert_eq!(wp.points.len(), 1845);
    geo::aggregate_points(&mut grid, &wp);
    let wp_outside = grid.outside_points;
    assert_eq!(grid.total_workplaces() as usize + wp_outside, 1845);

    let poi = geoio::load_points_csv(data("data/addis/pois.csv"), geo::PointKind::Poi).unwrap();
    assert_eq!(poi.points.len(), 3633);
    geo::aggregate_points(&mut grid, &poi);
    assert_eq!(grid.total_pois() as usize + grid.outside_points, 3633);

    geo::allocate_vehicles(&mut grid, 100_000).unwrap();
    assert_eq!(grid.total_evs(), 100_000);

    // gravity distances: fleet mean two-way commuting distance near 17.4 km
    let circuity = CircuityModel::fixed(1.3).unwrap();
    let dist = mobility::distance_matrix(&grid, None, &circuity).unwrap();
    let beta = mobility::compute_beta(grid.cell_area_km2()).unwrap();
    assert!((beta - 0.2359).abs() < 1e-3);
    let trips = mobility::trip_probabilities(&grid, &dist, beta).unwrap();
    let mob = mobility::vkm(&grid, &trips, &dist, 0.0).unwrap();
    assert!(
        (mob.fleet_mean_km - 17.4).abs() / 17.4 < 0.10,
        "fleet mean {:.2} km",
        mob.fleet_mean_km
    );
}
