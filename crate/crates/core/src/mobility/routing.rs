//! Road-distance providers.
//!
//! The simulation only needs a `DistanceProvider`; the bundled adapter
//! speaks an HTTP routing-matrix API (Open Route Service wire format) with
//! request batching and retry. All routing is optional: without a provider
//! the distance matrix falls back to circuity-scaled Euclidean distances.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geo::LonLat;

pub trait DistanceProvider: Sync {
    /// Road distance between two points, km.
    fn road_km(&self, from: LonLat, to: LonLat) -> Result<f64>;

    /// Full origin-destination matrix; `None` entries mean the provider
    /// could not route that pair. The default implementation loops over
    /// `road_km`.
    fn matrix_km(&self, points: &[LonLat]) -> Vec<Vec<Option<f64>>> {
        points
            .iter()
            .map(|a| points.iter().map(|b| self.road_km(*a, *b).ok()).collect())
            .collect()
    }
}

/// Straight-line provider, mostly useful in tests and dry runs.
pub struct EuclideanProvider;

impl DistanceProvider for EuclideanProvider {
    fn road_km(&self, from: LonLat, to: LonLat) -> Result<f64> {
        let proj = crate::geo::Projection::new(from);
        let (x, y) = proj.to_km(to);
        Ok((x * x + y * y).sqrt())
    }
}

/// Configuration for the HTTP matrix adapter.
#[derive(Debug, Clone)]
pub struct MatrixApiConfig {
    /// Base URL, e.g. `https://api.openrouteservice.org`.
    pub base_url: String,
    /// Environment variable holding the API key (never the key itself).
    pub api_key_env: String,
    pub timeout: Duration,
    /// Maximum number of sources per request; destinations are sent whole.
    pub max_batch: usize,
    pub retries: u32,
}

impl Default for MatrixApiConfig {
    fn default() -> Self {
        MatrixApiConfig {
            base_url: "https://api.openrouteservice.org".into(),
            api_key_env: "ORS_API_KEY".into(),
            timeout: Duration::from_secs(30),
            max_batch: 50,
            retries: 3,
        }
    }
}

/// HTTP routing-matrix client (`POST /v2/matrix/driving-car`).
pub struct MatrixApiClient {
    config: MatrixApiConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct MatrixResponse {
    distances: Vec<Vec<Option<f64>>>,
}

impl MatrixApiClient {
    pub fn new(config: MatrixApiConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Routing(e.to_string()))?;
        Ok(MatrixApiClient { config, client })
    }

    fn api_key(&self) -> Option<String> {
        std::env::var(&self.config.api_key_env).ok().filter(|k| !k.is_empty())
    }

    fn post_batch(
        &self,
        locations: &[LonLat],
        sources: &[usize],
        destinations: &[usize],
    ) -> Result<Vec<Vec<Option<f64>>>> {
        let url = format!("{}/v2/matrix/driving-car", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "locations": locations.iter().map(|p| [p.lon, p.lat]).collect::<Vec<_>>(),
            "sources": sources,
            "destinations": destinations,
            "metrics": ["distance"],
            "units": "km",
        });
        let mut delay = Duration::from_millis(250);
        let mut last_err = String::new();
        for _ in 0..self.config.retries.max(1) {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = self.api_key() {
                req = req.header("Authorization", key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: MatrixResponse =
                        resp.json().map_err(|e| Error::Routing(format!("bad matrix response: {e}")))?;
                    return Ok(parsed.distances);
                }
                Ok(resp) => last_err = format!("HTTP {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
            std::thread::sleep(delay);
            delay *= 2;
        }
        Err(Error::Routing(format!("matrix request failed after retries: {last_err}")))
    }
}

impl DistanceProvider for MatrixApiClient {
    fn road_km(&self, from: LonLat, to: LonLat) -> Result<f64> {
        let m = self.post_batch(&[from, to], &[0], &[1])?;
        m.first()
            .and_then(|row| row.first())
            .copied()
            .flatten()
            .ok_or_else(|| Error::Routing("no route between points".into()))
    }

    fn matrix_km(&self, points: &[LonLat]) -> Vec<Vec<Option<f64>>> {
        let n = points.len();
        let mut out = vec![vec![None; n]; n];
        let destinations: Vec<usize> = (0..n).collect();
        for chunk in destinations.chunks(self.config.max_batch.max(1)) {
            match self.post_batch(points, chunk, &destinations) {
                Ok(rows) => {
                    for (local, &src) in chunk.iter().enumerate() {
                        if let Some(row) = rows.get(local) {
                            for (j, d) in row.iter().enumerate().take(n) {
                                out[src][j] = *d;
                            }
                        }
                    }
                }
                Err(_) => continue, // leave the batch unrouted; fallback covers it
            }
        }
        out
    }
}
