//! Pipeline stages and artifact caching.
//!
//! Each stage reads the artifacts of its upstream stages from the output
//! directory, computes, and writes its own artifacts plus an updated
//! manifest. A stage is skipped when the manifest shows it already ran with
//! identical inputs and its outputs are still present. All results are
//! deterministic in (config, seed), so cached and recomputed artifacts are
//! byte-identical.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use chargesim_core::analysis;
use chargesim_core::demand::{spatial_demand, ChargingShares};
use chargesim_core::geo::{self, io as geoio, PointKind, ZoneGrid};
use chargesim_core::mobility::{self, routing, CircuityModel, DistanceMatrix, TripMatrix};
use chargesim_core::pv::{self, weather::WeatherSeries, PVProfile};
use chargesim_core::temporal::{
    self, charging_point_requirements, mean_sd_profiles, peak_vs_power_sweep,
    worst_case_peak_kw, LoadProfile, Scenario, Simulator,
};

use crate::config::{ScenarioChoice, ScenarioConfig};
use crate::manifest::{hash_bytes, hash_file, hash_parts, RunManifest};

pub struct Pipeline {
    pub config: ScenarioConfig,
    pub out_dir: PathBuf,
    pub scenario_choice: ScenarioChoice,
    manifest: RunManifest,
}

const MANIFEST: &str = "manifest.json";

impl Pipeline {
    pub fn new(config: ScenarioConfig, out_dir: PathBuf, scenario_choice: ScenarioChoice) -> Result<Self> {
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        let config_hash = hash_bytes(serde_json::to_string(&config)?.as_bytes());
        // keep stage records from earlier runs: freshness is judged per
        // stage, so a config change only re-runs the stages that read the
        // changed values
        let manifest = match RunManifest::load(&out_dir.join(MANIFEST)) {
            Some(mut m) => {
                m.seed = config.simulation.seed;
                m.config_hash = config_hash;
                m
            }
            None => RunManifest::new(config.simulation.seed, config_hash),
        };
        Ok(Pipeline { config, out_dir, scenario_choice, manifest })
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.out_dir.join(MANIFEST))
    }

    fn artifact_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_artifact(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.artifact_path(name), contents)?;
        self.manifest.record_output(&self.out_dir, name)?;
        Ok(())
    }

    fn require_artifact(&self, name: &str, produced_by: &str) -> Result<PathBuf> {
        let p = self.artifact_path(name);
        if !p.exists() {
            bail!("missing artifact {name}: run the `{produced_by}` stage first");
        }
        Ok(p)
    }

    fn scenario_names(&self) -> String {
        self.config
            .scenarios_for(self.scenario_choice)
            .iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    // ----- zones ---------------------------------------------------------

    fn zones_inputs_hash(&self) -> Result<String> {
        let c = &self.config;
        Ok(hash_parts(&[
            ("boundary", &hash_file(&c.inputs.boundary)?),
            ("population", &hash_file(&c.inputs.population)?),
            ("workplaces", &hash_file(&c.inputs.workplaces)?),
            ("pois", &hash_file(&c.inputs.pois)?),
            ("cell_size", &format!("{}", c.zoning.cell_size_km)),
            ("n_tot", &format!("{}", c.fleet.n_tot)),
        ]))
    }

    pub fn run_zones(&mut self) -> Result<ZoneGrid> {
        self.config.check_inputs_exist()?;
        let inputs_hash = self.zones_inputs_hash()?;
        if self.manifest.stage_is_fresh("zones", &inputs_hash, &self.out_dir, &["zones.geojson"]) {
            eprintln!("zones: up to date");
            return self.load_zones();
        }
        let c = &self.config;
        let boundary = geoio::load_boundary_geojson(&c.inputs.boundary)?;
        let mut grid = geo::build_zone_grid(&boundary, c.zoning.cell_size_km)?;
        match c.inputs.population.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let pts = geoio::load_population_csv(&c.inputs.population)?;
                geo::aggregate_population_points(&mut grid, &pts)?;
            }
            _ => {
                let raster = geoio::load_esri_ascii(&c.inputs.population)?;
                geo::aggregate_population(&mut grid, &raster)?;
            }
        }
        for (path, kind) in [(&c.inputs.workplaces, PointKind::Workplace), (&c.inputs.pois, PointKind::Poi)] {
            let pts = match path.extension().and_then(|e| e.to_str()) {
                Some("geojson") | Some("json") => geoio::load_points_geojson(path, kind)?,
                _ => geoio::load_points_csv(path, kind)?,
            };
            geo::aggregate_points(&mut grid, &pts);
            if grid.outside_points > 0 {
                eprintln!("zones: {} {:?} points fall outside every zone", grid.outside_points, kind);
            }
        }
        geo::allocate_vehicles(&mut grid, c.fleet.n_tot)?;
        let geojson = serde_json::to_string_pretty(&geoio::zones_to_geojson(&grid))?;
        self.write_artifact("zones.geojson", &geojson)?;
        self.manifest.record_stage("zones", inputs_hash);
        self.save_manifest()?;
        eprintln!(
            "zones: {} zones, population {:.0}, {} workplaces, {} POIs, {} EVs",
            grid.zones.len(),
            grid.total_population(),
            grid.total_workplaces(),
            grid.total_pois(),
            grid.total_evs()
        );
        Ok(grid)
    }

    pub fn load_zones(&self) -> Result<ZoneGrid> {
        let p = self.require_artifact("zones.geojson", "zones")?;
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        Ok(geoio::grid_from_geojson(&v)?)
    }

    fn grid_hash(&self) -> Result<String> {
        hash_file(&self.artifact_path("zones.geojson"))
    }

    // ----- mobility ------------------------------------------------------

    fn mobility_inputs_hash(&self) -> Result<String> {
        Ok(hash_parts(&[
            ("zones", &self.grid_hash()?),
            ("mobility_cfg", &serde_json::to_string(&self.config.mobility)?),
            ("extra_km", &format!("{}", self.config.fleet.extra_km_per_day)),
        ]))
    }

    pub fn run_mobility(&mut self) -> Result<MobilityState> {
        let grid = self.load_zones()?;
        let inputs_hash = self.mobility_inputs_hash()?;
        let outputs = ["distances.csv", "mobility.csv", "mobility.json"];
        if self.manifest.stage_is_fresh("mobility", &inputs_hash, &self.out_dir, &outputs) {
            eprintln!("mobility: up to date");
            return self.load_mobility();
        }
        let c = &self.config;
        let router: Option<routing::MatrixApiClient> = if c.mobility.routing_url.is_empty() {
            None
        } else {
            Some(routing::MatrixApiClient::new(routing::MatrixApiConfig {
                base_url: c.mobility.routing_url.clone(),
                api_key_env: c.mobility.routing_api_key_env.clone(),
                timeout: std::time::Duration::from_secs(c.mobility.routing_timeout_s),
                max_batch: c.mobility.routing_max_batch,
                retries: 3,
            })?)
        };
        let circuity = match &router {
            Some(r) => {
                let boundary = geoio::load_boundary_geojson(&c.inputs.boundary)?;
                let model = mobility::estimate_circuity(&boundary, r, c.mobility.circuity_samples, c.simulation.seed)?;
                eprintln!(
                    "mobility: estimated circuity {:.3} from {} routed pairs",
                    model.factor, model.samples
                );
                model
            }
            None => CircuityModel::fixed(c.mobility.circuity_factor)
                .map_err(|e| anyhow!("mobility.circuity_factor: {e}"))?,
        };
        let dist = mobility::distance_matrix(
            &grid,
            router.as_ref().map(|r| r as &dyn routing::DistanceProvider),
            &circuity,
        )?;
        let beta = mobility::compute_beta(grid.cell_area_km2())?;
        let trips = mobility::trip_probabilities(&grid, &dist, beta)?;
        let mob = mobility::vkm(&grid, &trips, &dist, c.fleet.extra_km_per_day)?;

        let grid_hash = self.grid_hash()?;
        let mut dist_csv = format!("# grid {grid_hash}\n");
        dist_csv.push_str(&dist.to_csv());
        self.write_artifact("distances.csv", &dist_csv)?;
        let mut vkm_csv = String::from("zone_id,vkm_out,vkm_in\n");
        for z in &grid.zones {
            vkm_csv.push_str(&format!("{},{:.3},{:.3}\n", z.id, mob.vkm_out[z.id], mob.vkm_in[z.id]));
        }
        self.write_artifact("mobility.csv", &vkm_csv)?;
        let summary = serde_json::json!({
            "beta_per_km": beta,
            "circuity_factor": circuity.factor,
            "fleet_mean_two_way_km": mob.fleet_mean_km,
            "vkm_out_total": mob.vkm_out.iter().sum::<f64>(),
            "vkm_in_total": mob.vkm_in.iter().sum::<f64>(),
        });
        self.write_artifact("mobility.json", &serde_json::to_string_pretty(&summary)?)?;
        self.manifest.record_stage("mobility", inputs_hash);
        self.save_manifest()?;
        eprintln!(
            "mobility: beta {:.4} /km, fleet mean two-way distance {:.2} km",
            beta, mob.fleet_mean_km
        );
        Ok(MobilityState { grid, dist, trips, mob })
    }

    pub fn load_mobility(&self) -> Result<MobilityState> {
        let grid = self.load_zones()?;
        let p = self.require_artifact("distances.csv", "mobility")?;
        let text = std::fs::read_to_string(p)?;
        let (first, rest) = text.split_once('\n').unwrap_or(("", ""));
        let recorded = first.strip_prefix("# grid ").unwrap_or("");
        if recorded != self.grid_hash()? {
            bail!("distances.csv was built for a different zone grid: re-run the `mobility` stage");
        }
        let dist = DistanceMatrix::from_csv(rest)?;
        if dist.len() != grid.zones.len() {
            bail!("distances.csv does not match the zone count: re-run the `mobility` stage");
        }
        let beta = mobility::compute_beta(grid.cell_area_km2())?;
        let trips = mobility::trip_probabilities(&grid, &dist, beta)?;
        let mob = mobility::vkm(&grid, &trips, &dist, self.config.fleet.extra_km_per_day)?;
        Ok(MobilityState { grid, dist, trips, mob })
    }

    // ----- spatial demand ------------------------------------------------

    fn demand_inputs_hash(&self) -> Result<String> {
        Ok(hash_parts(&[
            ("mobility", self.manifest.stage_inputs.get("mobility").map(String::as_str).unwrap_or("")),
            ("fleet", &serde_json::to_string(&self.config.fleet)?),
            ("eta", &format!("{}", self.config.charging.eta)),
            ("shares", &serde_json::to_string(&self.config.charging.shares)?),
            ("scenarios", &self.scenario_names()),
        ]))
    }

    pub fn run_demand(&mut self) -> Result<()> {
        let state = self.load_mobility()?;
        let inputs_hash = self.demand_inputs_hash()?;
        let scenarios = self.config.scenarios_for(self.scenario_choice);
        let outputs: Vec<String> = scenarios
            .iter()
            .flat_map(|(n, _)| [format!("demand_{n}.csv"), format!("demand_{n}.geojson")])
            .collect();
        let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        if self.manifest.stage_is_fresh("demand", &inputs_hash, &self.out_dir, &output_refs) {
            eprintln!("demand: up to date");
            return Ok(());
        }
        let fleet = self.config.fleet_spec()?;
        for (name, shares) in &scenarios {
            let d = spatial_demand(&state.mob, &state.grid, shares, &fleet, self.config.charging.eta)?;
            self.write_artifact(&format!("demand_{name}.csv"), &chargesim_core::demand::demand_to_csv(&d, &state.grid))?;
            let gj = serde_json::to_string_pretty(&chargesim_core::demand::demand_to_geojson(&d, &state.grid))?;
            self.write_artifact(&format!("demand_{name}.geojson"), &gj)?;
            eprintln!(
                "demand[{name}]: total {:.1} MWh/day (home {:.1}, work {:.1}, poi {:.1})",
                d.total() / 1000.0,
                d.total_home() / 1000.0,
                d.total_work() / 1000.0,
                d.total_poi() / 1000.0
            );
        }
        self.manifest.record_stage("demand", inputs_hash);
        self.save_manifest()?;
        Ok(())
    }

    // ----- temporal profiles ---------------------------------------------

    fn profiles_inputs_hash(&self) -> Result<String> {
        let s = &self.config.simulation;
        // thread count is excluded: results do not depend on it
        let sim_key = format!("{}|{}|{}|{:?}|{}", s.seed, s.runs, s.step_min, s.sweep_levels_kw, s.sweep_runs);
        Ok(hash_parts(&[
            ("mobility", self.manifest.stage_inputs.get("mobility").map(String::as_str).unwrap_or("")),
            ("fleet", &serde_json::to_string(&self.config.fleet)?),
            ("charging", &serde_json::to_string(&self.config.charging)?),
            ("arrivals", &serde_json::to_string(&self.config.arrivals)?),
            ("chargers", &serde_json::to_string(&self.config.chargers)?),
            ("sim", &sim_key),
            ("scenarios", &self.scenario_names()),
        ]))
    }

    pub fn run_profiles(&mut self) -> Result<()> {
        let state = self.load_mobility()?;
        let inputs_hash = self.profiles_inputs_hash()?;
        let scenarios = self.config.scenarios_for(self.scenario_choice);
        let mut outputs: Vec<String> = scenarios
            .iter()
            .flat_map(|(n, _)| {
                [
                    format!("load_profile_{n}.csv"),
                    format!("load_profile_{n}_sd.csv"),
                    format!("sessions_{n}_run0.csv"),
                ]
            })
            .collect();
        outputs.extend(["charging_points.csv".to_string(), "worst_case.csv".to_string(), "peak_sweep.csv".to_string()]);
        let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        if self.manifest.stage_is_fresh("profiles", &inputs_hash, &self.out_dir, &output_refs) {
            eprintln!("profiles: up to date");
            return Ok(());
        }
        let c = self.config.clone();
        let fleet = c.fleet_spec()?;
        let sim = Simulator::new(&state.grid, &state.trips, &state.mob, &fleet, c.simulation.seed)?;
        let step_h = c.step_h();
        let mut points_csv = String::from("scenario,location,ratio,assigned_evs,points\n");
        let mut worst_csv = String::from("scenario,run,worst_case_mw\n");
        for (name, shares) in &scenarios {
            let scenario = Scenario::new(*shares, c.arrival_model(), c.charger_mix()?, c.charging.eta)?;
            let runs = sim.monte_carlo_days(&scenario, c.simulation.runs, step_h, 0)?;
            let profiles: Vec<&LoadProfile> = runs.iter().map(|r| &r.profile).collect();
            let (mean, sd) = mean_sd_profiles(&profiles);

            // mean per-zone profile across runs
            let bins = profiles[0].bins();
            let n_zones = state.grid.zones.len();
            let mut zone_mean = vec![vec![0.0; bins]; n_zones];
            for p in &profiles {
                for (zm, zp) in zone_mean.iter_mut().zip(&p.zone_kw) {
                    for (a, b) in zm.iter_mut().zip(zp) {
                        *a += b / profiles.len() as f64;
                    }
                }
            }
            let mean_profile = LoadProfile { step_h, zone_kw: zone_mean, total_kw: mean.clone() };
            self.write_artifact(&format!("load_profile_{name}.csv"), &temporal::load_profile_to_csv(&mean_profile))?;
            let mut sd_csv = String::from("time,total_sd_kw\n");
            for (k, v) in sd.iter().enumerate() {
                let minutes = (k as f64 * step_h * 60.0).round() as u64;
                sd_csv.push_str(&format!("{:02}:{:02}:00,{:.3}\n", minutes / 60, minutes % 60, v));
            }
            self.write_artifact(&format!("load_profile_{name}_sd.csv"), &sd_csv)?;
            self.write_artifact(&format!("sessions_{name}_run0.csv"), &temporal::sessions_to_csv(&runs[0].sessions))?;

            let report = charging_point_requirements(&runs, shares, c.fleet.n_tot, step_h)?;
            for (loc, req) in [("home", report.home), ("work", report.work), ("poi", report.poi)] {
                if let Some(r) = req {
                    points_csv.push_str(&format!("{name},{loc},{:.4},{:.0},{}\n", r.ratio, r.assigned, r.points));
                }
            }
            for (k, run) in runs.iter().enumerate() {
                worst_csv.push_str(&format!("{name},{k},{:.3}\n", worst_case_peak_kw(&run.sessions) / 1000.0));
            }
            let peak_mw = mean.iter().copied().fold(0.0, f64::max) / 1000.0;
            let charging = runs.iter().map(|r| r.sessions.len()).sum::<usize>() as f64 / runs.len() as f64;
            eprintln!(
                "profiles[{name}]: mean peak {:.1} MW, {:.0} vehicles charging per day ({:.1} %)",
                peak_mw,
                charging,
                100.0 * charging / c.fleet.n_tot as f64
            );
        }
        self.write_artifact("charging_points.csv", &points_csv)?;
        self.write_artifact("worst_case.csv", &worst_csv)?;

        let sweep = peak_vs_power_sweep(&sim, c.charging.eta, &c.simulation.sweep_levels_kw, c.simulation.sweep_runs, step_h)?;
        let mut sweep_csv = String::from("power_kw,peak_kw_mean,peak_kw_sd,simultaneous_share\n");
        for p in &sweep {
            sweep_csv.push_str(&format!(
                "{:.1},{:.3},{:.3},{:.5}\n",
                p.power_kw, p.peak_kw_mean, p.peak_kw_sd, p.simultaneous_share_mean
            ));
        }
        self.write_artifact("peak_sweep.csv", &sweep_csv)?;
        self.manifest.record_stage("profiles", inputs_hash);
        self.save_manifest()?;
        Ok(())
    }

    // ----- pv --------------------------------------------------------------

    fn pv_inputs_hash(&self) -> Result<String> {
        Ok(hash_parts(&[
            ("weather", &hash_file(&self.config.inputs.weather)?),
            ("pv", &serde_json::to_string(&self.config.pv)?),
            ("site", &serde_json::to_string(&self.config.site)?),
        ]))
    }

    pub fn run_pv(&mut self) -> Result<(WeatherSeries, PVProfile)> {
        if !self.config.inputs.weather.exists() {
            bail!("inputs.weather: file not found: {}", self.config.inputs.weather.display());
        }
        let inputs_hash = self.pv_inputs_hash()?;
        let outputs = ["pv_profile.csv", "pv.json"];
        if self.manifest.stage_is_fresh("pv", &inputs_hash, &self.out_dir, &outputs) {
            eprintln!("pv: up to date");
            return self.load_pv();
        }
        let c = self.config.clone();
        let weather = pv::weather::load_weather_csv(&c.inputs.weather, c.site.lat, c.site.lon, c.site.tz_offset_h)?;
        let warnings = weather.consistency_warnings();
        if warnings > 0 {
            eprintln!("pv: {warnings} weather records fail the GHI consistency check");
        }
        let mut spec = c.pv_spec();
        if c.pv.optimize_orientation {
            let (tilt, az, y) = pv::optimal_orientation(&weather, &spec)?;
            eprintln!("pv: optimal orientation tilt {tilt:.0}°, azimuth {az:.0}° ({y:.1} kWh/kWp)");
            spec.tilt_deg = tilt;
            spec.azimuth_deg = az;
        }
        let profile = pv::pv_power(&weather, &spec)?;
        self.write_artifact("pv_profile.csv", &pv::pv_profile_to_csv(&weather, &profile))?;
        let meta = serde_json::json!({
            "tilt_deg": spec.tilt_deg,
            "azimuth_deg": spec.azimuth_deg,
            "annual_yield_kwh_per_kwp": profile.yield_kwh_per_kwp,
            "consistency_warnings": warnings,
        });
        self.write_artifact("pv.json", &serde_json::to_string_pretty(&meta)?)?;
        self.manifest.record_stage("pv", inputs_hash);
        self.save_manifest()?;
        eprintln!("pv: annual yield {:.1} kWh/kWp", profile.yield_kwh_per_kwp);
        Ok((weather, profile))
    }

    pub fn load_pv(&self) -> Result<(WeatherSeries, PVProfile)> {
        self.require_artifact("pv_profile.csv", "pv")?;
        let c = &self.config;
        let weather = pv::weather::load_weather_csv(&c.inputs.weather, c.site.lat, c.site.lon, c.site.tz_offset_h)?;
        let text = std::fs::read_to_string(self.artifact_path("pv_profile.csv"))?;
        let mut power = Vec::new();
        for line in text.lines().skip(1) {
            if let Some((_, v)) = line.split_once(',') {
                power.push(v.parse::<f64>().map_err(|e| anyhow!("bad pv_profile.csv value: {e}"))?);
            }
        }
        if power.len() != weather.records.len() {
            bail!("pv_profile.csv does not match the weather series: re-run the `pv` stage");
        }
        let yield_kwh = power.iter().sum::<f64>() * weather.step_h;
        let step_h = weather.step_h;
        Ok((weather, PVProfile { power_kw_per_kwp: power, step_h, yield_kwh_per_kwp: yield_kwh }))
    }

    // ----- indicators ------------------------------------------------------

    fn indicators_inputs_hash(&self) -> Result<String> {
        Ok(hash_parts(&[
            ("pv", self.manifest.stage_inputs.get("pv").map(String::as_str).unwrap_or("")),
            ("profiles_cfg", &self.profiles_inputs_hash()?),
            ("analysis", &serde_json::to_string(&self.config.analysis)?),
        ]))
    }

    pub fn run_indicators(&mut self) -> Result<()> {
        let state = self.load_mobility()?;
        let (weather, pv_profile) = self.load_pv()?;
        let inputs_hash = self.indicators_inputs_hash()?;
        let outputs = ["indicators.csv", "monthly_summary.csv", "sweep_stats.json"];
        if self.manifest.stage_is_fresh("indicators", &inputs_hash, &self.out_dir, &outputs) {
            eprintln!("indicators: up to date");
            return Ok(());
        }
        let c = self.config.clone();
        let fleet = c.fleet_spec()?;
        let sim = Simulator::new(&state.grid, &state.trips, &state.mob, &fleet, c.simulation.seed)?;
        let scenarios: Vec<(String, Scenario)> = c
            .scenarios_for(self.scenario_choice)
            .into_iter()
            .map(|(n, shares)| Ok((n, Scenario::new(shares, c.arrival_model(), c.charger_mix()?, c.charging.eta)?)))
            .collect::<Result<_>>()?;
        let cells = analysis::capacity_sweep(
            &sim,
            &scenarios,
            &c.analysis.capacities_kwp_per_ev,
            &pv_profile,
            weather.records[0].time,
            c.site.tz_offset_h,
            c.step_h(),
            &c.holidays(),
        )?;
        self.write_artifact("indicators.csv", &analysis::indicators_to_csv(&cells))?;
        self.write_artifact("monthly_summary.csv", &analysis::monthly_summary_to_csv(&cells))?;
        self.write_artifact("sweep_stats.json", &serde_json::to_string_pretty(&analysis::sweep_stats_to_json(&cells))?)?;
        for cell in &cells {
            eprintln!(
                "indicators[{} @ {:.1} kWp/EV]: mean self-sufficiency {:.1} %",
                cell.scenario,
                cell.kwp_per_ev,
                100.0 * cell.stats.mean
            );
        }
        self.manifest.record_stage("indicators", inputs_hash);
        self.save_manifest()?;
        Ok(())
    }

    // ----- report ----------------------------------------------------------

    fn report_inputs_hash(&self) -> Result<String> {
        Ok(hash_parts(&[
            ("mobility", self.manifest.stage_inputs.get("mobility").map(String::as_str).unwrap_or("")),
            ("analysis", &serde_json::to_string(&self.config.analysis)?),
            ("national_load", &hash_file(&self.config.inputs.national_load)?),
            ("charging", &serde_json::to_string(&self.config.charging)?),
        ]))
    }

    pub fn run_report(&mut self) -> Result<()> {
        let state = self.load_mobility()?;
        let inputs_hash = self.report_inputs_hash()?;
        if self.manifest.stage_is_fresh("report", &inputs_hash, &self.out_dir, &["report.json"]) {
            eprintln!("report: up to date");
            return Ok(());
        }
        let c = self.config.clone();
        let fleet = c.fleet_spec()?;
        let shares = ChargingShares::mixed();
        let demand = spatial_demand(&state.mob, &state.grid, &shares, &fleet, c.charging.eta)?;
        let national = load_national_curve(&c.inputs.national_load)?;
        let reference = analysis::scale_reference_load(
            &national,
            c.analysis.study_population,
            c.analysis.region_population,
            c.analysis.region_peak_mw,
        )?;
        let total_mwh = demand.total() / 1000.0;
        let uptake = analysis::ev_uptake_percent(total_mwh, &reference);
        let per_vehicle_kwh = demand.total() / c.fleet.n_tot as f64;

        // charging points from the profiles stage, if present
        let points: serde_json::Value = match std::fs::read_to_string(self.artifact_path("charging_points.csv")) {
            Ok(text) => {
                let rows: Vec<serde_json::Value> = text
                    .lines()
                    .skip(1)
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        let f: Vec<&str> = l.split(',').collect();
                        serde_json::json!({
                            "scenario": f[0], "location": f[1],
                            "ratio": f[2].parse::<f64>().unwrap_or(0.0),
                            "points": f[4].parse::<u64>().unwrap_or(0),
                        })
                    })
                    .collect();
                serde_json::Value::Array(rows)
            }
            Err(_) => serde_json::Value::Null,
        };

        let report = serde_json::json!({
            "fleet_mean_two_way_km": state.mob.fleet_mean_km,
            "per_vehicle_daily_kwh": per_vehicle_kwh,
            "total_daily_demand_mwh": total_mwh,
            "reference": {
                "share_of_national": reference.share,
                "city_peak_mw": reference.peak_mw,
                "city_daily_energy_mwh": reference.daily_energy_mwh,
            },
            "ev_uptake_percent": uptake,
            "charging_points": points,
        });
        self.write_artifact("report.json", &serde_json::to_string_pretty(&report)?)?;
        self.manifest.record_stage("report", inputs_hash);
        self.save_manifest()?;
        eprintln!(
            "report: {total_mwh:.1} MWh/day for {} EVs ({per_vehicle_kwh:.2} kWh each), {uptake:.2} % of city demand",
            c.fleet.n_tot
        );
        Ok(())
    }

    /// Run every stage in dependency order.
    pub fn run_all(&mut self) -> Result<()> {
        self.run_zones()?;
        self.run_mobility()?;
        self.run_demand()?;
        self.run_profiles()?;
        self.run_pv()?;
        self.run_indicators()?;
        self.run_report()?;
        Ok(())
    }
}

/// Zones, distances and derived trip/VKM state shared by later stages.
pub struct MobilityState {
    pub grid: ZoneGrid,
    pub dist: DistanceMatrix,
    pub trips: TripMatrix,
    pub mob: mobility::MobilityResult,
}

/// Hourly national demand CSV: `hour,load_mw`.
pub fn load_national_curve(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read national load {}: {e}", path.display()))?;
    let mut curve = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let (_, v) = line.split_once(',').ok_or_else(|| anyhow!("bad national load row: {line}"))?;
        curve.push(v.trim().parse::<f64>().map_err(|e| anyhow!("bad national load value: {e}"))?);
    }
    if curve.is_empty() {
        bail!("national load curve is empty");
    }
    Ok(curve)
}
