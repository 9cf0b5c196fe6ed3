//! Hourly weather input for the PV model.
//!
//! The CSV schema mirrors an hourly solar-database export:
//! `time,G(h),Gb(n),Gd(h),T2m,WS10m` with ISO-8601 UTC timestamps, global
//! horizontal / beam normal / diffuse horizontal irradiance in W/m²,
//! 2 m air temperature in °C and 10 m wind speed in m/s.
//!
//! An HTTP fetch client for the PVGIS hourly API is included for
//! convenience; nothing in the pipeline requires it.

use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WeatherRecord {
    pub time: DateTime<Utc>,
    /// Global horizontal irradiance, W/m².
    pub ghi: f64,
    /// Beam (direct) normal irradiance, W/m².
    pub dni: f64,
    /// Diffuse horizontal irradiance, W/m².
    pub dhi: f64,
    pub temp_c: f64,
    pub wind_ms: f64,
}

impl WeatherRecord {
    /// Midpoint of the averaging interval starting at `time`.
    pub fn mid_time(&self, step_h: f64) -> DateTime<Utc> {
        self.time + chrono::Duration::seconds((step_h * 1800.0) as i64)
    }
}

#[derive(Debug, Clone)]
pub struct WeatherSeries {
    pub lat: f64,
    pub lon: f64,
    /// Offset of local time from UTC, hours.
    pub tz_offset_h: f64,
    /// Step between records, hours.
    pub step_h: f64,
    pub records: Vec<WeatherRecord>,
}

impl WeatherSeries {
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("weather series is empty"));
        }
        if self.records.iter().any(|r| r.ghi < 0.0 || r.dni < 0.0 || r.dhi < 0.0) {
            return Err(Error::invalid("irradiance values must be non-negative"));
        }
        for w in self.records.windows(2) {
            let dt = (w[1].time - w[0].time).num_seconds() as f64 / 3600.0;
            if (dt - self.step_h).abs() > 1e-6 {
                return Err(Error::invalid("weather series has irregular time steps"));
            }
        }
        Ok(())
    }

    /// Count records where GHI departs from `DHI + DNI cos(z)` by more than
    /// 5 % while the sun is up. These are data-quality warnings, not errors.
    pub fn consistency_warnings(&self) -> usize {
        self.records
            .iter()
            .filter(|r| {
                let sun = crate::pv::solar_position(r.mid_time(self.step_h), self.lat, self.lon);
                if !sun.sun_up() || r.ghi <= 1.0 {
                    return false;
                }
                let implied = r.dhi + r.dni * sun.cos_zenith().max(0.0);
                (implied - r.ghi).abs() > 0.05 * r.ghi.max(1.0)
            })
            .count()
    }

    /// Number of whole days covered.
    pub fn n_days(&self) -> usize {
        (self.records.len() as f64 * self.step_h / 24.0).round() as usize
    }
}

/// Read the weather CSV schema described in the module docs.
pub fn load_weather_csv(path: impl AsRef<Path>, lat: f64, lon: f64, tz_offset_h: f64) -> Result<WeatherSeries> {
    let mut rdr = csv::Reader::from_path(&path)?;
    {
        let headers = rdr.headers()?;
        let expected = ["time", "G(h)", "Gb(n)", "Gd(h)", "T2m", "WS10m"];
        for (i, want) in expected.iter().enumerate() {
            let got = headers.get(i).unwrap_or("");
            if !got.trim().eq_ignore_ascii_case(want) {
                return Err(Error::invalid(format!(
                    "weather CSV column {i} is '{got}', expected '{want}'"
                )));
            }
        }
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let time = rec
            .get(0)
            .ok_or_else(|| Error::invalid("missing time"))?
            .parse::<DateTime<Utc>>()
            .map_err(|e| Error::invalid(format!("bad timestamp: {e}")))?;
        let field = |i: usize, name: &str| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::invalid(format!("missing {name}")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {name} value")))
        };
        records.push(WeatherRecord {
            time,
            ghi: field(1, "G(h)")?,
            dni: field(2, "Gb(n)")?,
            dhi: field(3, "Gd(h)")?,
            temp_c: field(4, "T2m")?,
            wind_ms: field(5, "WS10m")?,
        });
    }
    if records.len() < 2 {
        return Err(Error::invalid("weather series needs at least two records"));
    }
    let step_h = (records[1].time - records[0].time).num_seconds() as f64 / 3600.0;
    let series = WeatherSeries { lat, lon, tz_offset_h, step_h, records };
    series.validate()?;
    Ok(series)
}

pub fn write_weather_csv(series: &WeatherSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("time,G(h),Gb(n),Gd(h),T2m,WS10m\n");
    for r in &series.records {
        out.push_str(&format!(
            "{},{:.1},{:.1},{:.1},{:.1},{:.1}\n",
            r.time.format("%Y-%m-%dT%H:%M:%SZ"),
            r.ghi,
            r.dni,
            r.dhi,
            r.temp_c,
            r.wind_ms
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// PVGIS hourly-API fetch client. Optional: the pipeline normally reads a
/// cached CSV produced by [`write_weather_csv`].
pub struct PvgisClient {
    pub base_url: String,
    pub timeout: std::time::Duration,
}

impl Default for PvgisClient {
    fn default() -> Self {
        PvgisClient {
            base_url: "https://re.jrc.ec.europa.eu".into(),
            timeout: std::time::Duration::from_secs(60),
        }
    }
}

impl PvgisClient {
    /// Fetch one year of hourly data (horizontal plane, radiation components).
    pub fn fetch_year(&self, lat: f64, lon: f64, year: i32, tz_offset_h: f64) -> Result<WeatherSeries> {
        let url = format!(
            "{}/api/v5_2/seriescalc?lat={lat}&lon={lon}&startyear={year}&endyear={year}&components=1&angle=0&aspect=0&outputformat=json",
            self.base_url.trim_end_matches('/')
        );
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Routing(e.to_string()))?;
        let resp = client.get(&url).send().map_err(|e| Error::Routing(format!("weather fetch failed: {e}")))?;
        if !resp.status().is_success() {
            return Err(Error::Routing(format!("weather fetch failed: HTTP {}", resp.status())));
        }
        let body: serde_json::Value = resp.json().map_err(|e| Error::Routing(format!("bad weather response: {e}")))?;
        parse_pvgis_hourly(&body, lat, lon, tz_offset_h)
    }
}

/// Convert a PVGIS `seriescalc` JSON document (horizontal plane, components)
/// into a [`WeatherSeries`]. Beam normal irradiance is recovered from the
/// horizontal beam component via the solar zenith.
pub fn parse_pvgis_hourly(body: &serde_json::Value, lat: f64, lon: f64, tz_offset_h: f64) -> Result<WeatherSeries> {
    let hourly = body
        .pointer("/outputs/hourly")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::invalid("missing outputs.hourly in weather response"))?;
    let mut records = Vec::with_capacity(hourly.len());
    for row in hourly {
        let time_str = row.get("time").and_then(|v| v.as_str()).ok_or_else(|| Error::invalid("missing time"))?;
        // format: YYYYMMDD:HHMM
        let naive = chrono::NaiveDateTime::parse_from_str(time_str, "%Y%m%d:%H%M")
            .map_err(|e| Error::invalid(format!("bad time '{time_str}': {e}")))?;
        let time = DateTime::<Utc>::from_naive_utc_and_offset(naive, Utc);
        let num = |key: &str| row.get(key).and_then(|v| v.as_f64()).unwrap_or(0.0);
        let beam_h = num("Gb(i)");
        let dhi = num("Gd(i)");
        let ghi = beam_h + dhi + num("Gr(i)");
        let sun = crate::pv::solar_position(time, lat, lon);
        let cz = sun.cos_zenith();
        let dni = if cz > 0.05 { beam_h / cz } else { 0.0 };
        records.push(WeatherRecord { time, ghi, dni, dhi, temp_c: num("T2m"), wind_ms: num("WS10m") });
    }
    if records.len() < 2 {
        return Err(Error::invalid("weather response has fewer than two records"));
    }
    let step_h = (records[1].time - records[0].time).num_seconds() as f64 / 3600.0;
    let series = WeatherSeries { lat, lon, tz_offset_h, step_h, records };
    series.validate()?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let csv = "time,G(h),Gb(n),Gd(h),T2m,WS10m\n\
                   2020-01-01T06:00:00Z,100.0,300.0,50.0,15.0,2.0\n\
                   2020-01-01T07:00:00Z,250.0,600.0,80.0,17.0,2.5\n";
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        std::fs::write(&p, csv).unwrap();
        let series = load_weather_csv(&p, 9.0, 38.76, 3.0).unwrap();
        assert_eq!(series.records.len(), 2);
        assert_eq!(series.step_h, 1.0);
        assert_eq!(series.records[1].dni, 600.0);
        let p2 = dir.path().join("w2.csv");
        write_weather_csv(&series, &p2).unwrap();
        let series2 = load_weather_csv(&p2, 9.0, 38.76, 3.0).unwrap();
        assert_eq!(series2.records[0].ghi, 100.0);
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "time,GHI,DNI,DHI,T,W\n2020-01-01T00:00:00Z,0,0,0,0,0\n").unwrap();
        assert!(load_weather_csv(&p, 9.0, 38.76, 3.0).is_err());
    }

    #[test]
    fn rejects_negative_irradiance() {
        let csv = "time,G(h),Gb(n),Gd(h),T2m,WS10m\n\
                   2020-01-01T06:00:00Z,-5.0,0.0,0.0,15.0,2.0\n\
                   2020-01-01T07:00:00Z,0.0,0.0,0.0,15.0,2.0\n";
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("neg.csv");
        std::fs::write(&p, csv).unwrap();
        assert!(load_weather_csv(&p, 9.0, 38.76, 3.0).is_err());
    }

    #[test]
    fn consistency_check_flags_bad_records() {
        use chrono::TimeZone;
        // noon record where GHI is far from DHI + DNI cos(z)
        let mk = |ghi: f64, dni: f64, dhi: f64| WeatherRecord {
            time: chrono::Utc.with_ymd_and_hms(2020, 1, 15, 9, 0, 0).unwrap(),
            ghi,
            dni,
            dhi,
            temp_c: 20.0,
            wind_ms: 1.0,
        };
        let mut series = WeatherSeries {
            lat: 9.0,
            lon: 38.76,
            tz_offset_h: 3.0,
            step_h: 1.0,
            records: vec![mk(100.0, 800.0, 100.0)],
        };
        assert_eq!(series.consistency_warnings(), 1);
        // a self-consistent record raises none
        let sun = crate::pv::solar_position(series.records[0].mid_time(1.0), 9.0, 38.76);
        let ghi = 800.0 * sun.cos_zenith() + 100.0;
        series.records = vec![mk(ghi, 800.0, 100.0)];
        assert_eq!(series.consistency_warnings(), 0);
    }

    #[test]
    fn parses_pvgis_json() {
        let body: serde_json::Value = serde_json::from_str(
            r#"{"outputs":{"hourly":[
                {"time":"20200101:0910","Gb(i)":500.0,"Gd(i)":100.0,"Gr(i)":0.0,"T2m":18.0,"WS10m":1.0},
                {"time":"20200101:1010","Gb(i)":600.0,"Gd(i)":110.0,"Gr(i)":0.0,"T2m":19.0,"WS10m":1.2}
            ]}}"#,
        )
        .unwrap();
        let s = parse_pvgis_hourly(&body, 9.0, 38.76, 3.0).unwrap();
        assert_eq!(s.records.len(), 2);
        assert!((s.records[0].ghi - 600.0).abs() < 1e-9);
        // recovered DNI exceeds the horizontal beam component
        assert!(s.records[0].dni > 500.0);
    }
}
