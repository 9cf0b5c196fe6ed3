//! Photovoltaic production per installed kWp.
//!
//! The chain per time step: solar position (PSA algorithm, ported from the
//! C reference at <http://www.psa.es/sdg/sunpos.htm>) -> isotropic-sky
//! transposition to the module plane -> angular reflection losses
//! (Martin-Ruiz) -> cell temperature (PVsyst thermal balance) -> power with
//! linear temperature derating and a flat system-loss factor.

pub mod weather;

use chrono::{Datelike, Timelike};

use crate::error::{Error, Result};
use weather::WeatherSeries;

const EARTH_MEAN_RADIUS_KM: f64 = 6371.01;
const ASTRONOMICAL_UNIT_KM: f64 = 149_597_890.0;

/// PV module and mounting parameters.
#[derive(Debug, Clone)]
pub struct PVSystemSpec {
    /// Nominal module efficiency at STC, fraction.
    pub module_efficiency: f64,
    /// Power temperature coefficient, 1/°C (negative).
    pub temp_coefficient: f64,
    /// Module tilt from horizontal, degrees.
    pub tilt_deg: f64,
    /// Module azimuth, degrees clockwise from north (180 = south).
    pub azimuth_deg: f64,
    /// Flat system loss factor (wiring, inverter, soiling), fraction.
    pub system_loss: f64,
    /// Martin-Ruiz angular-loss parameter.
    pub a_r: f64,
    /// Ground albedo.
    pub albedo: f64,
    /// PVsyst thermal model: constant heat-loss term, W/m²K.
    pub u_c: f64,
    /// PVsyst thermal model: wind-dependent term, W·s/m³K.
    pub u_v: f64,
    /// Absorbed fraction of incident irradiance.
    pub alpha_absorption: f64,
}

impl Default for PVSystemSpec {
    fn default() -> Self {
        PVSystemSpec {
            module_efficiency: 0.22,
            temp_coefficient: -0.004,
            tilt_deg: 10.0,
            azimuth_deg: 180.0,
            system_loss: 0.14,
            a_r: 0.16,
            albedo: 0.2,
            u_c: 29.0,
            u_v: 0.0,
            alpha_absorption: 0.9,
        }
    }
}

impl PVSystemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.module_efficiency > 0.0 && self.module_efficiency < 1.0) {
            return Err(Error::invalid("module efficiency must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.system_loss) {
            return Err(Error::invalid("system loss must be in [0, 1)"));
        }
        if !(0.0..=90.0).contains(&self.tilt_deg) {
            return Err(Error::invalid("tilt must be in [0°, 90°]"));
        }
        if !(self.a_r > 0.0) {
            return Err(Error::invalid("a_r must be positive"));
        }
        Ok(())
    }
}

/// Apparent solar position.
#[derive(Debug, Clone, Copy)]
pub struct SolarPosition {
    /// Zenith angle, degrees (0 = overhead).
    pub zenith_deg: f64,
    /// Azimuth, degrees clockwise from north.
    pub azimuth_deg: f64,
}

impl SolarPosition {
    pub fn cos_zenith(&self) -> f64 {
        self.zenith_deg.to_radians().cos()
    }

    pub fn sun_up(&self) -> bool {
        self.zenith_deg < 90.0
    }
}

/// PSA solar position for a UTC timestamp.
pub fn solar_position(t: chrono::DateTime<chrono::Utc>, lat_deg: f64, lon_deg: f64) -> SolarPosition {
    let (year, month, day) = (t.year() as i64, t.month() as i64, t.day() as i64);
    let decimal_hours =
        t.hour() as f64 + (t.minute() as f64 + t.second() as f64 / 60.0) / 60.0;

    let aux1 = (month - 14).div_euclid(12);
    let aux2 = (1461 * (year + 4800 + aux1)).div_euclid(4)
        + (367 * (month - 2 - 12 * aux1)).div_euclid(12)
        - (3 * ((year + 4900 + aux1).div_euclid(100))).div_euclid(4)
        + day
        - 32075;
    let julian_date = aux2 as f64 - 0.5 + decimal_hours / 24.0;
    let elapsed = julian_date - 2_451_545.0;

    let omega = 2.1429 - 0.001_039_459_4 * elapsed;
    let mean_longitude = 4.895_063_0 + 0.017_202_791_698 * elapsed;
    let mean_anomaly = 6.240_060_0 + 0.017_201_969_9 * elapsed;
    let ecliptic_longitude = mean_longitude + 0.033_416_07 * mean_anomaly.sin()
        + 0.000_348_94 * (2.0 * mean_anomaly).sin()
        - 0.000_113_4
        - 0.000_020_3 * omega.sin();
    let ecliptic_obliquity = 0.409_092_8 - 6.214_0e-9 * elapsed + 0.000_039_6 * omega.cos();

    let mut right_ascension =
        (ecliptic_obliquity.cos() * ecliptic_longitude.sin()).atan2(ecliptic_longitude.cos());
    if right_ascension < 0.0 {
        right_ascension += std::f64::consts::TAU;
    }
    let declination = (ecliptic_obliquity.sin() * ecliptic_longitude.sin()).asin();

    let gmst = 6.697_424_324_2 + 0.065_709_828_3 * elapsed + decimal_hours;
    let lmst = (gmst * 15.0 + lon_deg).to_radians();
    let hour_angle = lmst - right_ascension;
    let lat = lat_deg.to_radians();

    let mut zenith =
        (lat.cos() * hour_angle.cos() * declination.cos() + declination.sin() * lat.sin()).acos();
    let dy = -hour_angle.sin();
    let dx = declination.tan() * lat.cos() - lat.sin() * hour_angle.cos();
    let mut azimuth = dy.atan2(dx);
    if azimuth < 0.0 {
        azimuth += std::f64::consts::TAU;
    }
    // parallax correction
    zenith += (EARTH_MEAN_RADIUS_KM / ASTRONOMICAL_UNIT_KM) * zenith.sin();

    SolarPosition { zenith_deg: zenith.to_degrees(), azimuth_deg: azimuth.to_degrees() }
}

/// Irradiance on the module plane for one step, W/m².
#[derive(Debug, Clone, Copy, Default)]
pub struct PoaComponents {
    pub beam: f64,
    pub sky_diffuse: f64,
    pub ground: f64,
    /// Angle of incidence on the module, degrees.
    pub aoi_deg: f64,
}

impl PoaComponents {
    pub fn global(&self) -> f64 {
        self.beam + self.sky_diffuse + self.ground
    }
}

/// Cosine of the angle of incidence between sun and module normal.
fn cos_aoi(sun: &SolarPosition, tilt_deg: f64, azimuth_deg: f64) -> f64 {
    let zen = sun.zenith_deg.to_radians();
    let tilt = tilt_deg.to_radians();
    zen.cos() * tilt.cos() + zen.sin() * tilt.sin() * (sun.azimuth_deg - azimuth_deg).to_radians().cos()
}

/// Isotropic-sky transposition of one step's horizontal irradiance.
pub fn poa_step(
    sun: &SolarPosition,
    ghi: f64,
    dni: f64,
    dhi: f64,
    tilt_deg: f64,
    azimuth_deg: f64,
    albedo: f64,
) -> PoaComponents {
    let tilt = tilt_deg.to_radians();
    let cai = cos_aoi(sun, tilt_deg, azimuth_deg);
    let beam = if sun.sun_up() { dni * cai.max(0.0) } else { 0.0 };
    PoaComponents {
        beam,
        sky_diffuse: dhi * (1.0 + tilt.cos()) / 2.0,
        ground: ghi * albedo * (1.0 - tilt.cos()) / 2.0,
        aoi_deg: cai.clamp(-1.0, 1.0).acos().to_degrees(),
    }
}

/// Plane-of-array irradiance series for a weather record set.
pub fn poa_irradiance(weather: &WeatherSeries, tilt_deg: f64, azimuth_deg: f64, albedo: f64) -> Vec<PoaComponents> {
    weather
        .records
        .iter()
        .map(|rec| {
            let sun = solar_position(rec.mid_time(weather.step_h), weather.lat, weather.lon);
            poa_step(&sun, rec.ghi, rec.dni, rec.dhi, tilt_deg, azimuth_deg, albedo)
        })
        .collect()
}

/// PVsyst cell temperature: ambient plus absorbed irradiance over the heat
/// loss coefficient.
pub fn cell_temperature(g_poa: f64, t_amb_c: f64, wind_ms: f64, spec: &PVSystemSpec) -> f64 {
    t_amb_c + g_poa * spec.alpha_absorption * (1.0 - spec.module_efficiency) / (spec.u_c + spec.u_v * wind_ms)
}

/// Martin-Ruiz beam transmittance factor, normalised to 1 at normal
/// incidence. Zero at or beyond grazing incidence.
pub fn angular_loss(aoi_deg: f64, a_r: f64) -> f64 {
    if aoi_deg >= 90.0 {
        return 0.0;
    }
    let c = aoi_deg.to_radians().cos();
    (1.0 - (-c / a_r).exp()) / (1.0 - (-1.0 / a_r).exp())
}

/// Martin-Ruiz closed-form factors for sky-diffuse and ground-reflected
/// irradiance as a function of module tilt.
pub fn angular_loss_diffuse(tilt_deg: f64, a_r: f64) -> (f64, f64) {
    let c1 = 4.0 / (3.0 * std::f64::consts::PI);
    let c2 = 0.5 * a_r - 0.154;
    let beta = tilt_deg.to_radians();
    let (sin_b, cos_b) = (beta.sin(), beta.cos());
    let trig_sky = sin_b + (std::f64::consts::PI - beta - sin_b) / (1.0 + cos_b);
    let iam_sky = 1.0 - (-(c1 + c2 * trig_sky) * trig_sky / a_r).exp();
    let iam_gnd = if tilt_deg < 1e-9 {
        0.0 // no ground view at zero tilt
    } else {
        let trig_gnd = sin_b + (beta - sin_b) / (1.0 - cos_b);
        1.0 - (-(c1 + c2 * trig_gnd) * trig_gnd / a_r).exp()
    };
    (iam_sky, iam_gnd)
}

/// Per-kWp production series.
#[derive(Debug, Clone)]
pub struct PVProfile {
    /// kW per kWp for each weather step.
    pub power_kw_per_kwp: Vec<f64>,
    pub step_h: f64,
    /// kWh per kWp over the whole series.
    pub yield_kwh_per_kwp: f64,
}

fn power_step(poa: &PoaComponents, t_amb: f64, wind: f64, spec: &PVSystemSpec, iam_sky: f64, iam_gnd: f64) -> f64 {
    let g_eff = poa.beam * angular_loss(poa.aoi_deg, spec.a_r) + poa.sky_diffuse * iam_sky + poa.ground * iam_gnd;
    let t_cell = cell_temperature(poa.global(), t_amb, wind, spec);
    let p = (g_eff / 1000.0) * (1.0 + spec.temp_coefficient * (t_cell - 25.0)) * (1.0 - spec.system_loss);
    p.max(0.0)
}

/// Compute the production series for the system's configured orientation.
pub fn pv_power(weather: &WeatherSeries, spec: &PVSystemSpec) -> Result<PVProfile> {
    spec.validate()?;
    let (iam_sky, iam_gnd) = angular_loss_diffuse(spec.tilt_deg, spec.a_r);
    let poa = poa_irradiance(weather, spec.tilt_deg, spec.azimuth_deg, spec.albedo);
    let power: Vec<f64> = poa
        .iter()
        .zip(&weather.records)
        .map(|(p, rec)| power_step(p, rec.temp_c, rec.wind_ms, spec, iam_sky, iam_gnd))
        .collect();
    let yield_kwh = power.iter().sum::<f64>() * weather.step_h;
    Ok(PVProfile { power_kw_per_kwp: power, step_h: weather.step_h, yield_kwh_per_kwp: yield_kwh })
}

/// Exhaustive orientation search: tilt 0°..45° in 1° steps, azimuth within
/// ±90° of equator-facing in 5° steps. Returns (tilt, azimuth, annual yield).
pub fn optimal_orientation(weather: &WeatherSeries, spec: &PVSystemSpec) -> Result<(f64, f64, f64)> {
    spec.validate()?;
    if weather.records.is_empty() {
        return Err(Error::invalid("weather series is empty"));
    }
    let sun: Vec<SolarPosition> = weather
        .records
        .iter()
        .map(|rec| solar_position(rec.mid_time(weather.step_h), weather.lat, weather.lon))
        .collect();
    let equator_facing = if weather.lat >= 0.0 { 180.0 } else { 0.0 };
    let mut best = (0.0, equator_facing, f64::NEG_INFINITY);
    for tilt_step in 0..=45u32 {
        let tilt = tilt_step as f64;
        let (iam_sky, iam_gnd) = angular_loss_diffuse(tilt, spec.a_r);
        for az_step in 0..=36u32 {
            let az = equator_facing - 90.0 + 5.0 * az_step as f64;
            let mut energy = 0.0;
            for (s, rec) in sun.iter().zip(&weather.records) {
                let poa = poa_step(s, rec.ghi, rec.dni, rec.dhi, tilt, az, spec.albedo);
                energy += power_step(&poa, rec.temp_c, rec.wind_ms, spec, iam_sky, iam_gnd);
            }
            let yield_kwh = energy * weather.step_h;
            if yield_kwh > best.2 {
                best = (tilt, az, yield_kwh);
            }
        }
    }
    Ok(best)
}

/// Production CSV: `time,kw_per_kwp` rows.
pub fn pv_profile_to_csv(weather: &WeatherSeries, profile: &PVProfile) -> String {
    let mut out = String::from("time,kw_per_kwp\n");
    for (rec, p) in weather.records.iter().zip(&profile.power_kw_per_kwp) {
        out.push_str(&format!("{},{:.5}\n", rec.time.format("%Y-%m-%dT%H:%M:%SZ"), p));
    }
    out
}
