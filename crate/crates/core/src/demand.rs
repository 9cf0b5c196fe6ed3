//! Daily charging energy per zone, split by charging location.
//!
//! Home demand follows vehicles to their residence zone (outbound VKM),
//! work demand follows them to their destination zone (inbound VKM), and
//! POI demand is distributed proportionally to each zone's POI count.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::ZoneGrid;
use crate::mobility::MobilityResult;

/// One vehicle class of the simulated fleet.
#[derive(Debug, Clone)]
pub struct VehicleClass {
    pub name: String,
    /// Fraction of the fleet, all classes summing to 1.
    pub share: f64,
    /// Nominal battery capacity, kWh.
    pub battery_kwh: f64,
    /// Energy consumption, kWh/km.
    pub consumption_kwh_per_km: f64,
    /// Maximum charging power, kW; `None` means unbounded.
    pub max_power_kw: Option<f64>,
}

/// Fleet composition.
#[derive(Debug, Clone)]
pub struct FleetSpec {
    pub classes: Vec<VehicleClass>,
}

impl FleetSpec {
    pub fn new(classes: Vec<VehicleClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::invalid("fleet needs at least one vehicle class"));
        }
        let share_sum: f64 = classes.iter().map(|c| c.share).sum();
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("fleet shares sum to {share_sum}, expected 1")));
        }
        for c in &classes {
            if !(c.battery_kwh > 0.0) || !(c.consumption_kwh_per_km > 0.0) {
                return Err(Error::invalid(format!("class {} has non-positive battery or consumption", c.name)));
            }
            if c.share < 0.0 {
                return Err(Error::invalid(format!("class {} has negative share", c.name)));
            }
            if let Some(p) = c.max_power_kw {
                if !(p > 0.0) {
                    return Err(Error::invalid(format!("class {} has non-positive power cap", c.name)));
                }
            }
        }
        Ok(FleetSpec { classes })
    }

    /// Default fleet: 80 % BEV (60 kWh, uncapped) and 20 % PHEV
    /// (15 kWh, capped at 11 kW), both at 0.183 kWh/km.
    pub fn default_fleet() -> Self {
        FleetSpec::new(vec![
            VehicleClass {
                name: "BEV".into(),
                share: 0.8,
                battery_kwh: 60.0,
                consumption_kwh_per_km: 0.183,
                max_power_kw: None,
            },
            VehicleClass {
                name: "PHEV".into(),
                share: 0.2,
                battery_kwh: 15.0,
                consumption_kwh_per_km: 0.183,
                max_power_kw: Some(11.0),
            },
        ])
        .unwrap()
    }

    /// Share-weighted mean consumption, kWh/km.
    pub fn mean_consumption(&self) -> f64 {
        self.classes.iter().map(|c| c.share * c.consumption_kwh_per_km).sum()
    }
}

/// Charging-location shares.
#[derive(Debug, Clone, Copy)]
pub struct ChargingShares {
    pub home: f64,
    pub work: f64,
    pub poi: f64,
}

impl ChargingShares {
    pub fn new(home: f64, work: f64, poi: f64) -> Result<Self> {
        for (name, v) in [("home", home), ("work", work), ("poi", poi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} share {v} outside [0, 1]")));
            }
        }
        let sum = home + work + poi;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("charging shares sum to {sum}, expected 1")));
        }
        Ok(ChargingShares { home, work, poi })
    }

    pub fn all_home() -> Self {
        ChargingShares { home: 1.0, work: 0.0, poi: 0.0 }
    }

    pub fn all_work() -> Self {
        ChargingShares { home: 0.0, work: 1.0, poi: 0.0 }
    }

    /// 25 % home, 25 % work, 50 % POI.
    pub fn mixed() -> Self {
        ChargingShares { home: 0.25, work: 0.25, poi: 0.5 }
    }
}

/// Daily charging energy per zone and location category, kWh.
#[derive(Debug, Clone)]
pub struct SpatialDemand {
    pub home_kwh: Vec<f64>,
    pub work_kwh: Vec<f64>,
    pub poi_kwh: Vec<f64>,
}

impl SpatialDemand {
    pub fn total_home(&self) -> f64 {
        self.home_kwh.iter().sum()
    }
    pub fn total_work(&self) -> f64 {
        self.work_kwh.iter().sum()
    }
    pub fn total_poi(&self) -> f64 {
        self.poi_kwh.iter().sum()
    }
    pub fn total(&self) -> f64 {
        self.total_home() + self.total_work() + self.total_poi()
    }
    pub fn zone_total(&self, i: usize) -> f64 {
        self.home_kwh[i] + self.work_kwh[i] + self.poi_kwh[i]
    }
}

/// Split daily VKM into charging energy per zone and location.
pub fn spatial_demand(
    mob: &MobilityResult,
    grid: &ZoneGrid,
    shares: &ChargingShares,
    fleet: &FleetSpec,
    eta_charge: f64,
) -> Result<SpatialDemand> {
    if !(eta_charge > 0.0 && eta_charge <= 1.0) {
        return Err(Error::invalid("charging efficiency must be in (0, 1]"));
    }
    let n = grid.zones.len();
    if mob.vkm_out.len() != n {
        return Err(Error::invalid("mobility result does not match grid"));
    }
    let m_tot = grid.total_pois();
    if shares.poi > 0.0 && m_tot <= 0.0 {
        return Err(Error::invalid("no POIs to host demand but POI share is non-zero"));
    }
    let c_ev = fleet.mean_consumption();
    let per_km = c_ev / eta_charge;
    let vkm_out_tot: f64 = mob.vkm_out.iter().sum();
    let mut d = SpatialDemand {
        home_kwh: vec![0.0; n],
        work_kwh: vec![0.0; n],
        poi_kwh: vec![0.0; n],
    };
    for i in 0..n {
        d.home_kwh[i] = shares.home * per_km * mob.vkm_out[i];
        d.work_kwh[i] = shares.work * per_km * mob.vkm_in[i];
        if m_tot > 0.0 {
            d.poi_kwh[i] = shares.poi * per_km * vkm_out_tot * grid.zones[i].pois / m_tot;
        }
    }
    Ok(d)
}

/// GeoJSON FeatureCollection with per-zone demand (kWh, 0.1 kWh precision).
pub fn demand_to_geojson(demand: &SpatialDemand, grid: &ZoneGrid) -> Value {
    let features: Vec<Value> = grid
        .zones
        .iter()
        .map(|z| {
            let ring: Vec<Value> = grid
                .zone_ring(z)
                .iter()
                .map(|p| json!([(p.lon * 1e6).round() / 1e6, (p.lat * 1e6).round() / 1e6]))
                .collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "id": z.id,
                    "e_home_kwh": round1(demand.home_kwh[z.id]),
                    "e_work_kwh": round1(demand.work_kwh[z.id]),
                    "e_poi_kwh": round1(demand.poi_kwh[z.id]),
                    "e_total_kwh": round1(demand.zone_total(z.id)),
                }
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// CSV rows `zone_id,e_home_kwh,e_work_kwh,e_poi_kwh`.
pub fn demand_to_csv(demand: &SpatialDemand, grid: &ZoneGrid) -> String {
    let mut out = String::from("zone_id,e_home_kwh,e_work_kwh,e_poi_kwh\n");
    for z in &grid.zones {
        out.push_str(&format!(
            "{},{:.1},{:.1},{:.1}\n",
            z.id, demand.home_kwh[z.id], demand.work_kwh[z.id], demand.poi_kwh[z.id]
        ));
    }
    out
}
