//! Geospatial file ingest and export.
//!
//! Supported inputs: boundary as GeoJSON Polygon/MultiPolygon, population as
//! ESRI ASCII grid or CSV `lon,lat,count`, point layers as CSV
//! `lon,lat[,name]` or GeoJSON point features. Zones are exported as a
//! GeoJSON FeatureCollection.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{BoundaryPolygon, LonLat, PointKind, PointSet, PopulationRaster, ZoneGrid};

fn ring_from_json(arr: &Value) -> Result<Vec<LonLat>> {
    let coords = arr.as_array().ok_or_else(|| Error::invalid("ring is not an array"))?;
    coords
        .iter()
        .map(|c| {
            let pair = c.as_array().filter(|p| p.len() >= 2).ok_or_else(|| Error::invalid("coordinate is not a [lon, lat] pair"))?;
            Ok(LonLat::new(
                pair[0].as_f64().ok_or_else(|| Error::invalid("longitude is not a number"))?,
                pair[1].as_f64().ok_or_else(|| Error::invalid("latitude is not a number"))?,
            ))
        })
        .collect()
}

fn polygon_from_rings(rings: &Value) -> Result<(Vec<LonLat>, Vec<Vec<LonLat>>)> {
    let rings = rings.as_array().ok_or_else(|| Error::invalid("polygon coordinates are not an array"))?;
    if rings.is_empty() {
        return Err(Error::invalid("polygon has no rings"));
    }
    let exterior = ring_from_json(&rings[0])?;
    let holes = rings[1..].iter().map(ring_from_json).collect::<Result<Vec<_>>>()?;
    Ok((exterior, holes))
}

fn geometry_values(root: &Value) -> Vec<&Value> {
    match root.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => root
            .get("features")
            .and_then(Value::as_array)
            .map(|fs| fs.iter().filter_map(|f| f.get("geometry")).collect())
            .unwrap_or_default(),
        Some("Feature") => root.get("geometry").into_iter().collect(),
        Some(_) => vec![root],
        None => vec![],
    }
}

/// Load a boundary polygon from GeoJSON. For a MultiPolygon (or several
/// polygon features) the largest-area member is used.
pub fn load_boundary_geojson(path: impl AsRef<Path>) -> Result<BoundaryPolygon> {
    let root: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mut candidates: Vec<(Vec<LonLat>, Vec<Vec<LonLat>>)> = Vec::new();
    for geom in geometry_values(&root) {
        match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => {
                candidates.push(polygon_from_rings(geom.get("coordinates").ok_or_else(|| Error::invalid("polygon without coordinates"))?)?);
            }
            Some("MultiPolygon") => {
                let polys = geom
                    .get("coordinates")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::invalid("multipolygon without coordinates"))?;
                for p in polys {
                    candidates.push(polygon_from_rings(p)?);
                }
            }
            _ => {}
        }
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no Polygon or MultiPolygon geometry found in boundary file"));
    }
    let best = candidates
        .into_iter()
        .map(|(ext, holes)| BoundaryPolygon::new(ext, holes))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max_by(|a, b| {
            let pa = crate::geo::Projection::new(a.centroid());
            let pb = crate::geo::Projection::new(b.centroid());
            a.area_km2(&pa).partial_cmp(&b.area_km2(&pb)).unwrap()
        })
        .unwrap();
    Ok(best)
}

/// Load an ESRI ASCII grid (`ncols/nrows/xllcorner/yllcorner/cellsize` header).
pub fn load_esri_ascii(path: impl AsRef<Path>) -> Result<PopulationRaster> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut header = std::collections::HashMap::new();
    let mut data_lines: Vec<&str> = Vec::new();
    for line in lines.by_ref() {
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some(k), Some(v)) if k.chars().next().is_some_and(|c| c.is_alphabetic()) => {
                header.insert(k.to_ascii_lowercase(), v.parse::<f64>().map_err(|_| Error::invalid(format!("bad header value for {k}")))?);
            }
            _ => {
                data_lines.push(line);
                break;
            }
        }
    }
    data_lines.extend(lines);
    let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::invalid(format!("missing {k} in ESRI ASCII header")));
    let ncols = get("ncols")? as usize;
    let nrows = get("nrows")? as usize;
    let xll = get("xllcorner")?;
    let yll = get("yllcorner")?;
    let cell = get("cellsize")?;
    let nodata = header.get("nodata_value").copied().unwrap_or(-9999.0);
    let mut counts = Vec::with_capacity(nrows * ncols);
    for line in data_lines {
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| Error::invalid(format!("bad raster value: {tok}")))?;
            counts.push(if v == nodata || v < 0.0 { 0.0 } else { v });
        }
    }
    if counts.len() != nrows * ncols {
        return Err(Error::invalid(format!(
            "raster data length {} does not match {nrows}x{ncols}",
            counts.len()
        )));
    }
    PopulationRaster::new(LonLat::new(xll, yll), cell, nrows, ncols, counts)
}

/// Load population CSV with `lon,lat,count` columns.
pub fn load_population_csv(path: impl AsRef<Path>) -> Result<Vec<(LonLat, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let lon: f64 = parse_field(&rec, 0, "lon")?;
        let lat: f64 = parse_field(&rec, 1, "lat")?;
        let count: f64 = parse_field(&rec, 2, "count")?;
        out.push((LonLat::new(lon, lat), count));
    }
    Ok(out)
}

fn parse_field(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    rec.get(idx)
        .ok_or_else(|| Error::invalid(format!("missing {name} column")))?
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("bad {name} value in CSV")))
}

/// Load a point layer from CSV `lon,lat[,name]`.
pub fn load_points_csv(path: impl AsRef<Path>, kind: PointKind) -> Result<PointSet> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let lon: f64 = parse_field(&rec, 0, "lon")?;
        let lat: f64 = parse_field(&rec, 1, "lat")?;
        let name = rec.get(2).map(|s| s.to_string()).filter(|s| !s.is_empty());
        pts.push((LonLat::new(lon, lat), name));
    }
    PointSet::new(kind, pts)
}

/// Load a point layer from GeoJSON point features.
pub fn load_points_geojson(path: impl AsRef<Path>, kind: PointKind) -> Result<PointSet> {
    let root: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mut pts = Vec::new();
    for geom in geometry_values(&root) {
        if geom.get("type").and_then(Value::as_str) == Some("Point") {
            if let Some(c) = geom.get("coordinates").and_then(Value::as_array) {
                if c.len() >= 2 {
                    if let (Some(lon), Some(lat)) = (c[0].as_f64(), c[1].as_f64()) {
                        pts.push((LonLat::new(lon, lat), None));
                    }
                }
            }
        }
    }
    PointSet::new(kind, pts)
}

/// Export zones as a GeoJSON FeatureCollection. Property keys are emitted in
/// sorted order, so outputs are byte-stable. A `grid` foreign member carries
/// the frame parameters needed to reload the grid exactly.
pub fn zones_to_geojson(grid: &ZoneGrid) -> Value {
    let features: Vec<Value> = grid
        .zones
        .iter()
        .map(|z| {
            let ring: Vec<Value> = grid
                .zone_ring(z)
                .iter()
                .map(|p| json!([round6(p.lon), round6(p.lat)]))
                .collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "id": z.id,
                    "row": z.row,
                    "col": z.col,
                    "population": round2(z.population),
                    "workplaces": z.workplaces,
                    "pois": z.pois,
                    "n_ev": z.n_ev,
                }
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "features": features,
        "grid": {
            "cell_size_km": grid.cell_size_km,
            "origin_lon": grid.projection.origin.lon,
            "origin_lat": grid.projection.origin.lat,
            "x_min": grid.x_min,
            "y_max": grid.y_max,
            "rows": grid.rows,
            "cols": grid.cols,
            "outside_points": grid.outside_points,
        },
    })
}

/// Rebuild a [`ZoneGrid`] from the FeatureCollection written by
/// [`zones_to_geojson`].
pub fn grid_from_geojson(root: &Value) -> Result<ZoneGrid> {
    let meta = root.get("grid").ok_or_else(|| Error::invalid("zones file lacks the grid member"))?;
    let num = |k: &str| -> Result<f64> {
        meta.get(k).and_then(Value::as_f64).ok_or_else(|| Error::invalid(format!("grid.{k} missing")))
    };
    let cell_size_km = num("cell_size_km")?;
    let projection = crate::geo::Projection::new(LonLat::new(num("origin_lon")?, num("origin_lat")?));
    let (x_min, y_max) = (num("x_min")?, num("y_max")?);
    let (rows, cols) = (num("rows")? as usize, num("cols")? as usize);
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("zones file has no features"))?;
    let mut zones = Vec::with_capacity(features.len());
    let mut cell_zone = vec![None; rows * cols];
    for f in features {
        let props = f.get("properties").ok_or_else(|| Error::invalid("feature without properties"))?;
        let p = |k: &str| -> Result<f64> {
            props.get(k).and_then(Value::as_f64).ok_or_else(|| Error::invalid(format!("property {k} missing")))
        };
        let (id, row, col) = (p("id")? as usize, p("row")? as usize, p("col")? as usize);
        if row >= rows || col >= cols {
            return Err(Error::invalid("zone row/col outside grid"));
        }
        let cx = x_min + (col as f64 + 0.5) * cell_size_km;
        let cy = y_max - (row as f64 + 0.5) * cell_size_km;
        cell_zone[row * cols + col] = Some(id);
        zones.push(crate::geo::TrafficZone {
            id,
            row,
            col,
            centroid: projection.to_lonlat(cx, cy),
            center_km: (cx, cy),
            population: p("population")?,
            workplaces: p("workplaces")?,
            pois: p("pois")?,
            n_ev: p("n_ev")? as u64,
        });
    }
    zones.sort_by_key(|z| z.id);
    if zones.iter().enumerate().any(|(i, z)| z.id != i) {
        return Err(Error::invalid("zone ids are not contiguous"));
    }
    Ok(ZoneGrid {
        cell_size_km,
        zones,
        projection,
        x_min,
        y_max,
        rows,
        cols,
        cell_zone,
        outside_points: meta.get("outside_points").and_then(Value::as_u64).unwrap_or(0) as usize,
    })
}

pub fn write_zones_geojson(grid: &ZoneGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&zones_to_geojson(grid))?)?;
    Ok(())
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
