//! Scenario configuration.
//!
//! A single TOML file describes inputs, zoning, fleet, charging habits,
//! charger availability, PV system and simulation controls. Every key has a
//! default encoding the bundled reference scenario, so an empty file is a
//! valid configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chargesim_core::demand::{ChargingShares, FleetSpec, VehicleClass};
use chargesim_core::pv::PVSystemSpec;
use chargesim_core::temporal::{ArrivalModel, ChargerMix};

/// Marker error for anything wrong with the configuration itself (as
/// opposed to input data or services); drives the CLI exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub inputs: Inputs,
    pub zoning: Zoning,
    pub site: Site,
    pub fleet: Fleet,
    pub charging: Charging,
    pub arrivals: Arrivals,
    pub chargers: Chargers,
    pub mobility: Mobility,
    pub pv: Pv,
    pub analysis: Analysis,
    pub simulation: Simulation,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            inputs: Inputs::default(),
            zoning: Zoning::default(),
            site: Site::default(),
            fleet: Fleet::default(),
            charging: Charging::default(),
            arrivals: Arrivals::default(),
            chargers: Chargers::default(),
            mobility: Mobility::default(),
            pv: Pv::default(),
            analysis: Analysis::default(),
            simulation: Simulation::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    pub boundary: PathBuf,
    pub population: PathBuf,
    pub workplaces: PathBuf,
    pub pois: PathBuf,
    pub weather: PathBuf,
    pub national_load: PathBuf,
}

impl Default for Inputs {
    fn default() -> Self {
        Inputs {
            boundary: "data/addis/boundary.geojson".into(),
            population: "data/addis/population.asc".into(),
            workplaces: "data/addis/workplaces.csv".into(),
            pois: "data/addis/pois.csv".into(),
            weather: "data/weather/addis_2020_synthetic.csv".into(),
            national_load: "data/addis/national_load_2024.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Zoning {
    pub cell_size_km: f64,
}

impl Default for Zoning {
    fn default() -> Self {
        Zoning { cell_size_km: 1.95 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Site {
    pub lat: f64,
    pub lon: f64,
    pub tz_offset_h: f64,
}

impl Default for Site {
    fn default() -> Self {
        Site { lat: 9.01, lon: 38.76, tz_offset_h: 3.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fleet {
    pub n_tot: u64,
    /// Extra daily travel distance per vehicle beyond commuting, km.
    pub extra_km_per_day: f64,
    #[serde(rename = "class")]
    pub classes: Vec<FleetClass>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FleetClass {
    pub name: String,
    pub share: f64,
    pub battery_kwh: f64,
    pub consumption_kwh_per_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power_kw: Option<f64>,
}

impl Default for Fleet {
    fn default() -> Self {
        Fleet {
            n_tot: 100_000,
            extra_km_per_day: 0.0,
            classes: vec![
                FleetClass {
                    name: "BEV".into(),
                    share: 0.8,
                    battery_kwh: 60.0,
                    consumption_kwh_per_km: 0.183,
                    max_power_kw: None,
                },
                FleetClass {
                    name: "PHEV".into(),
                    share: 0.2,
                    battery_kwh: 15.0,
                    consumption_kwh_per_km: 0.183,
                    max_power_kw: Some(11.0),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Charging {
    pub eta: f64,
    /// Shares used by the `custom` scenario.
    pub shares: SharesConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SharesConfig {
    pub home: f64,
    pub work: f64,
    pub poi: f64,
}

impl Default for Charging {
    fn default() -> Self {
        Charging { eta: 0.9, shares: SharesConfig { home: 0.25, work: 0.25, poi: 0.5 } }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Arrivals {
    pub home_mean_h: f64,
    pub home_sd_h: f64,
    pub work_mean_h: f64,
    pub work_sd_h: f64,
}

impl Default for Arrivals {
    fn default() -> Self {
        Arrivals { home_mean_h: 18.0, home_sd_h: 2.7, work_mean_h: 9.0, work_sd_h: 1.8 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Chargers {
    pub home: ChargerLevels,
    pub work: ChargerLevels,
    pub poi: ChargerLevels,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChargerLevels {
    /// `[power_kw, probability]` pairs.
    pub levels: Vec<(f64, f64)>,
}

impl Default for Chargers {
    fn default() -> Self {
        Chargers {
            home: ChargerLevels { levels: vec![(3.2, 0.45), (7.4, 0.40), (11.0, 0.15)] },
            work: ChargerLevels { levels: vec![(7.4, 0.25), (11.0, 0.50), (22.0, 0.25)] },
            poi: ChargerLevels { levels: vec![(7.4, 0.15), (11.0, 0.15), (22.0, 0.55), (50.0, 0.15)] },
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mobility {
    /// Fallback road/Euclidean ratio used where no routing is available.
    pub circuity_factor: f64,
    /// Base URL of a routing-matrix service; empty disables routing. With a
    /// router configured, the circuity factor is re-estimated from sampled
    /// point pairs instead of taken from `circuity_factor`.
    pub routing_url: String,
    pub routing_api_key_env: String,
    pub routing_timeout_s: u64,
    pub routing_max_batch: usize,
    /// Point pairs sampled for circuity estimation when a router is set.
    pub circuity_samples: usize,
}

impl Default for Mobility {
    fn default() -> Self {
        Mobility {
            circuity_factor: 1.3,
            routing_url: String::new(),
            routing_api_key_env: "ORS_API_KEY".into(),
            routing_timeout_s: 30,
            routing_max_batch: 50,
            circuity_samples: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pv {
    pub module_efficiency: f64,
    pub temp_coefficient: f64,
    pub system_loss: f64,
    pub a_r: f64,
    pub albedo: f64,
    pub optimize_orientation: bool,
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
}

impl Default for Pv {
    fn default() -> Self {
        Pv {
            module_efficiency: 0.22,
            temp_coefficient: -0.004,
            system_loss: 0.14,
            a_r: 0.16,
            albedo: 0.2,
            optimize_orientation: true,
            tilt_deg: 10.0,
            azimuth_deg: 180.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analysis {
    pub capacities_kwp_per_ev: Vec<f64>,
    /// Holiday dates (YYYY-MM-DD) excluded from the weekday set.
    pub holidays: Vec<String>,
    pub study_population: f64,
    pub region_population: f64,
    pub region_peak_mw: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            capacities_kwp_per_ev: vec![0.5, 1.0, 1.5, 2.0],
            holidays: vec![],
            study_population: 5_540_000.0,
            region_population: 8_880_000.0,
            region_peak_mw: 2100.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub seed: u64,
    pub runs: usize,
    pub step_min: u32,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Power levels for the peak-versus-power sweep, kW.
    pub sweep_levels_kw: Vec<f64>,
    pub sweep_runs: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation {
            seed: 42,
            runs: 5,
            step_min: 15,
            threads: 0,
            sweep_levels_kw: vec![2.0, 3.2, 5.0, 7.4, 11.0, 15.0, 20.0, 22.0, 30.0, 40.0, 50.0],
            sweep_runs: 5,
        }
    }
}

/// Which charging scenario(s) a command applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScenarioChoice {
    Home,
    Work,
    Mixed,
    Custom,
    All,
}

impl ScenarioConfig {
    /// Parse and validate a config file. Relative input paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::Error::new(ConfigError(format!("cannot read config {}: {e}", path.display()))))?;
        let mut config: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| anyhow::Error::new(ConfigError(format!("config error in {}:\n{e}", path.display()))))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.inputs.boundary,
            &mut self.inputs.population,
            &mut self.inputs.workplaces,
            &mut self.inputs.pois,
            &mut self.inputs.weather,
            &mut self.inputs.national_load,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.validate_inner().map_err(|e| anyhow::Error::new(ConfigError(format!("{e:#}"))))
    }

    fn validate_inner(&self) -> anyhow::Result<()> {
        self.fleet_spec().map_err(|e| anyhow::anyhow!("fleet: {e}"))?;
        self.custom_shares().map_err(|e| anyhow::anyhow!("charging.shares: {e}"))?;
        self.charger_mix().map_err(|e| anyhow::anyhow!("chargers: {e}"))?;
        self.pv_spec().validate().map_err(|e| anyhow::anyhow!("pv: {e}"))?;
        if !(self.charging.eta > 0.0 && self.charging.eta <= 1.0) {
            anyhow::bail!("charging.eta: must be in (0, 1]");
        }
        if !(self.zoning.cell_size_km > 0.0) {
            anyhow::bail!("zoning.cell_size_km: must be positive");
        }
        if !(self.mobility.circuity_factor >= 1.0) {
            anyhow::bail!("mobility.circuity_factor: must be >= 1");
        }
        if self.simulation.runs == 0 {
            anyhow::bail!("simulation.runs: must be at least 1");
        }
        if self.simulation.step_min == 0 || 1440 % self.simulation.step_min != 0 {
            anyhow::bail!("simulation.step_min: must divide 24 h");
        }
        for h in &self.analysis.holidays {
            h.parse::<chrono::NaiveDate>()
                .map_err(|e| anyhow::anyhow!("analysis.holidays: bad date '{h}': {e}"))?;
        }
        Ok(())
    }

    /// Verify that every referenced input file exists.
    pub fn check_inputs_exist(&self) -> anyhow::Result<()> {
        for (name, p) in [
            ("boundary", &self.inputs.boundary),
            ("population", &self.inputs.population),
            ("workplaces", &self.inputs.workplaces),
            ("pois", &self.inputs.pois),
        ] {
            if !p.exists() {
                anyhow::bail!("inputs.{name}: file not found: {}", p.display());
            }
        }
        Ok(())
    }

    pub fn fleet_spec(&self) -> chargesim_core::Result<FleetSpec> {
        FleetSpec::new(
            self.fleet
                .classes
                .iter()
                .map(|c| VehicleClass {
                    name: c.name.clone(),
                    share: c.share,
                    battery_kwh: c.battery_kwh,
                    consumption_kwh_per_km: c.consumption_kwh_per_km,
                    max_power_kw: c.max_power_kw,
                })
                .collect(),
        )
    }

    pub fn custom_shares(&self) -> chargesim_core::Result<ChargingShares> {
        ChargingShares::new(self.charging.shares.home, self.charging.shares.work, self.charging.shares.poi)
    }

    pub fn charger_mix(&self) -> chargesim_core::Result<ChargerMix> {
        ChargerMix::new(
            self.chargers.home.levels.clone(),
            self.chargers.work.levels.clone(),
            self.chargers.poi.levels.clone(),
        )
    }

    pub fn arrival_model(&self) -> ArrivalModel {
        ArrivalModel {
            home_mean_h: self.arrivals.home_mean_h,
            home_sd_h: self.arrivals.home_sd_h,
            work_mean_h: self.arrivals.work_mean_h,
            work_sd_h: self.arrivals.work_sd_h,
        }
    }

    pub fn pv_spec(&self) -> PVSystemSpec {
        PVSystemSpec {
            module_efficiency: self.pv.module_efficiency,
            temp_coefficient: self.pv.temp_coefficient,
            tilt_deg: self.pv.tilt_deg,
            azimuth_deg: self.pv.azimuth_deg,
            system_loss: self.pv.system_loss,
            a_r: self.pv.a_r,
            albedo: self.pv.albedo,
            ..PVSystemSpec::default()
        }
    }

    pub fn step_h(&self) -> f64 {
        self.simulation.step_min as f64 / 60.0
    }

    pub fn holidays(&self) -> Vec<chrono::NaiveDate> {
        self.analysis.holidays.iter().filter_map(|h| h.parse().ok()).collect()
    }

    /// Scenario names and share sets selected by a CLI choice.
    pub fn scenarios_for(&self, choice: ScenarioChoice) -> Vec<(String, ChargingShares)> {
        let custom = || self.custom_shares().expect("validated");
        match choice {
            ScenarioChoice::Home => vec![("home".into(), ChargingShares::all_home())],
            ScenarioChoice::Work => vec![("work".into(), ChargingShares::all_work())],
            ScenarioChoice::Mixed => vec![("mixed".into(), ChargingShares::mixed())],
            ScenarioChoice::Custom => vec![("custom".into(), custom())],
            ScenarioChoice::All => vec![
                ("home".into(), ChargingShares::all_home()),
                ("work".into(), ChargingShares::all_work()),
                ("mixed".into(), ChargingShares::mixed()),
            ],
        }
    }
}
