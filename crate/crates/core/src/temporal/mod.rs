//! Stochastic daily charging simulation.
//!
//! Each vehicle carries a state-of-charge threshold and an expected number
//! of days between charging events, derived from its daily energy use and
//! battery size. Every simulated day, vehicles decide independently whether
//! to charge (probability `1 / interval`); charging vehicles get one
//! rectangular session whose location, arrival time and power are drawn
//! from the scenario definition. Sessions aggregate into per-zone and
//! city-wide load profiles.
//!
//! All draws come from streams keyed by `(seed, vehicle, day)`, so days and
//! vehicles are independent and any subset can be recomputed bit-exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::demand::{ChargingShares, FleetSpec};
use crate::error::{Error, Result};
use crate::geo::ZoneGrid;
use crate::mobility::{MobilityResult, TripMatrix};
use crate::rng;

pub const HOURS_PER_DAY: f64 = 24.0;

/// Charging-location category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Home,
    Work,
    Poi,
}

impl Location {
    pub fn label(self) -> &'static str {
        match self {
            Location::Home => "home",
            Location::Work => "work",
            Location::Poi => "poi",
        }
    }
}

/// Charger power levels and their availability per location.
#[derive(Debug, Clone)]
pub struct ChargerMix {
    home: Vec<(f64, f64)>,
    work: Vec<(f64, f64)>,
    poi: Vec<(f64, f64)>,
}

impl ChargerMix {
    pub fn new(home: Vec<(f64, f64)>, work: Vec<(f64, f64)>, poi: Vec<(f64, f64)>) -> Result<Self> {
        for (name, mix) in [("home", &home), ("work", &work), ("poi", &poi)] {
            if mix.is_empty() {
                continue; // allowed as long as the location is never drawn
            }
            let p_sum: f64 = mix.iter().map(|(_, p)| p).sum();
            if (p_sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("{name} charger probabilities sum to {p_sum}")));
            }
            if mix.iter().any(|(kw, p)| *kw <= 0.0 || *p < 0.0) {
                return Err(Error::invalid(format!("{name} charger mix has non-positive power or negative probability")));
            }
        }
        Ok(ChargerMix { home, work, poi })
    }

    /// Availability mix used in the reference scenario: slow home chargers,
    /// level-2 work chargers, fast-leaning public chargers.
    pub fn default_mix() -> Self {
        ChargerMix::new(
            vec![(3.2, 0.45), (7.4, 0.40), (11.0, 0.15)],
            vec![(7.4, 0.25), (11.0, 0.50), (22.0, 0.25)],
            vec![(7.4, 0.15), (11.0, 0.15), (22.0, 0.55), (50.0, 0.15)],
        )
        .unwrap()
    }

    /// One identical charger everywhere (used for the power sweep).
    pub fn single_level(kw: f64) -> Self {
        let mix = vec![(kw, 1.0)];
        ChargerMix { home: mix.clone(), work: mix.clone(), poi: mix }
    }

    pub fn for_location(&self, loc: Location) -> &[(f64, f64)] {
        match loc {
            Location::Home => &self.home,
            Location::Work => &self.work,
            Location::Poi => &self.poi,
        }
    }

    /// Expected power of a location's mix, kW.
    pub fn mean_power(&self, loc: Location) -> f64 {
        self.for_location(loc).iter().map(|(kw, p)| kw * p).sum()
    }
}

/// Arrival-time distributions per location (hours of day).
#[derive(Debug, Clone, Copy)]
pub struct ArrivalModel {
    pub home_mean_h: f64,
    pub home_sd_h: f64,
    pub work_mean_h: f64,
    pub work_sd_h: f64,
}

impl Default for ArrivalModel {
    fn default() -> Self {
        ArrivalModel { home_mean_h: 18.0, home_sd_h: 2.7, work_mean_h: 9.0, work_sd_h: 1.8 }
    }
}

/// Complete description of one charging scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub shares: ChargingShares,
    pub arrivals: ArrivalModel,
    pub chargers: ChargerMix,
    pub eta_charge: f64,
}

impl Scenario {
    pub fn new(shares: ChargingShares, arrivals: ArrivalModel, chargers: ChargerMix, eta_charge: f64) -> Result<Self> {
        if !(eta_charge > 0.0 && eta_charge <= 1.0) {
            return Err(Error::invalid("charging efficiency must be in (0, 1]"));
        }
        for (loc, share) in [
            (Location::Home, shares.home),
            (Location::Work, shares.work),
            (Location::Poi, shares.poi),
        ] {
            if share > 0.0 && chargers.for_location(loc).is_empty() {
                return Err(Error::config(format!("no chargers configured for {} but its share is {share}", loc.label())));
            }
        }
        Ok(Scenario { shares, arrivals, chargers, eta_charge })
    }
}

/// One simulated vehicle.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: u64,
    pub class_idx: usize,
    pub home_zone: usize,
    /// Daily energy use, kWh (battery side).
    pub e_daily_kwh: f64,
    /// State-of-charge threshold under which the driver charges.
    pub soc_threshold: f64,
    /// Expected days between charging events; `INFINITY` = never charges.
    pub interval_days: f64,
    /// Maximum charging power, kW.
    pub max_power_kw: f64,
}

/// One rectangular charging pulse.
#[derive(Debug, Clone)]
pub struct ChargingSession {
    pub vehicle: u64,
    pub location: Location,
    pub zone: usize,
    pub power_kw: f64,
    /// Arrival time, hours in [0, 24).
    pub start_h: f64,
    /// End time, hours; may exceed 24 (the pulse wraps past midnight).
    pub end_h: f64,
    /// Battery-side energy, kWh (`interval_days * e_daily`).
    pub energy_kwh: f64,
}

impl ChargingSession {
    pub fn duration_h(&self) -> f64 {
        self.end_h - self.start_h
    }

    /// Energy drawn from the grid, kWh.
    pub fn grid_energy_kwh(&self) -> f64 {
        self.power_kw * self.duration_h()
    }
}

/// Fixed-step load series over 24 h.
#[derive(Debug, Clone)]
pub struct LoadProfile {
    pub step_h: f64,
    /// kW per zone per bin, `zone_kw[zone][bin]`.
    pub zone_kw: Vec<Vec<f64>>,
    /// City-wide kW per bin.
    pub total_kw: Vec<f64>,
}

impl LoadProfile {
    pub fn bins(&self) -> usize {
        self.total_kw.len()
    }

    pub fn peak_kw(&self) -> f64 {
        self.total_kw.iter().copied().fold(0.0, f64::max)
    }

    pub fn peak_time_h(&self) -> f64 {
        let i = self
            .total_kw
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i as f64 + 0.5) * self.step_h
    }

    pub fn energy_kwh(&self) -> f64 {
        self.total_kw.iter().sum::<f64>() * self.step_h
    }
}

/// Draw a state-of-charge threshold: normal(0.6, 0.2) winsorised to
/// [0.05, 0.95]. Clipping (rather than re-drawing) keeps the sample mean at
/// ~0.6 and reproduces the observed fleet-wide charging frequency.
pub fn sample_soc0(rng: &mut ChaCha8Rng) -> f64 {
    let normal = Normal::new(0.6f64, 0.2).unwrap();
    normal.sample(rng).clamp(0.05, 0.95)
}

/// Expected days between charging events. Zero daily use never triggers
/// charging (`INFINITY`).
pub fn charging_interval(e_daily_kwh: f64, battery_kwh: f64, soc_threshold: f64) -> f64 {
    debug_assert!(battery_kwh > 0.0);
    if e_daily_kwh <= 0.0 {
        return f64::INFINITY;
    }
    let delta_soc_daily = e_daily_kwh / (0.8 * battery_kwh);
    ((1.0 - soc_threshold) / delta_soc_daily).max(1.0)
}

/// Bernoulli draw with probability `1 / interval_days`.
pub fn decide_charging_today(interval_days: f64, rng: &mut ChaCha8Rng) -> bool {
    if !interval_days.is_finite() {
        return false;
    }
    debug_assert!(interval_days >= 1.0);
    rng.gen::<f64>() < 1.0 / interval_days
}

fn sample_cum(levels: &[(f64, f64)], rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (value, p) in levels {
        acc += p;
        if u < acc {
            return *value;
        }
    }
    levels.last().map(|(v, _)| *v).unwrap_or(0.0)
}

fn sample_weighted_index(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * cum.last().copied().unwrap_or(1.0);
    match cum.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
        Ok(i) => (i + 1).min(cum.len() - 1),
        Err(i) => i.min(cum.len() - 1),
    }
}

/// Simulation engine bound to one fleet and one trip distribution.
pub struct Simulator<'a> {
    pub grid: &'a ZoneGrid,
    pub fleet_spec: &'a FleetSpec,
    pub vehicles: Vec<Vehicle>,
    trip_cum: Vec<Vec<f64>>,
    poi_cum: Vec<f64>,
    seed: u64,
}

impl<'a> Simulator<'a> {
    /// Build the fleet: per zone, `n_ev` vehicles with class, daily energy
    /// (sampled from the zone's two-way distance distribution), threshold
    /// and charging interval.
    pub fn new(
        grid: &'a ZoneGrid,
        trips: &'a TripMatrix,
        mob: &MobilityResult,
        fleet_spec: &'a FleetSpec,
        seed: u64,
    ) -> Result<Self> {
        if mob.distance_dist.len() != grid.zones.len() {
            return Err(Error::invalid("mobility result does not match grid"));
        }
        let class_cum: Vec<f64> = fleet_spec
            .classes
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.share;
                Some(*acc)
            })
            .collect();
        // cumulative weights for per-zone distance sampling
        let dist_cum: Vec<Vec<f64>> = mob
            .distance_dist
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, (_, w)| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let mut vehicles = Vec::with_capacity(grid.total_evs() as usize);
        let mut vid: u64 = 0;
        for z in &grid.zones {
            for _ in 0..z.n_ev {
                let mut r = rng::stream(seed, "vehicle", &[vid]);
                let u: f64 = r.gen();
                let class_idx = class_cum.iter().position(|c| u < *c).unwrap_or(fleet_spec.classes.len() - 1);
                let class = &fleet_spec.classes[class_idx];
                let dest = sample_weighted_index(&dist_cum[z.id], &mut r);
                let two_way_km = mob.distance_dist[z.id][dest].0;
                let e_daily = two_way_km * class.consumption_kwh_per_km;
                let soc0 = sample_soc0(&mut r);
                vehicles.push(Vehicle {
                    id: vid,
                    class_idx,
                    home_zone: z.id,
                    e_daily_kwh: e_daily,
                    soc_threshold: soc0,
                    interval_days: charging_interval(e_daily, class.battery_kwh, soc0),
                    max_power_kw: class.max_power_kw.unwrap_or(f64::INFINITY),
                });
                vid += 1;
            }
        }
        let trip_cum: Vec<Vec<f64>> = (0..trips.len())
            .map(|i| {
                trips
                    .row(i)
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let poi_cum: Vec<f64> = grid
            .zones
            .iter()
            .scan(0.0, |acc, z| {
                *acc += z.pois;
                Some(*acc)
            })
            .collect();
        Ok(Simulator { grid, fleet_spec, vehicles, trip_cum, poi_cum, seed })
    }

    /// Sample one session for a vehicle that decided to charge.
    fn sample_session(&self, v: &Vehicle, scenario: &Scenario, r: &mut ChaCha8Rng) -> ChargingSession {
        let s = &scenario.shares;
        let u: f64 = r.gen();
        let location = if u < s.home {
            Location::Home
        } else if u < s.home + s.work {
            Location::Work
        } else {
            Location::Poi
        };
        let a = &scenario.arrivals;
        let start_h = match location {
            Location::Home => Normal::new(a.home_mean_h, a.home_sd_h).unwrap().sample(r).rem_euclid(HOURS_PER_DAY),
            Location::Work => Normal::new(a.work_mean_h, a.work_sd_h).unwrap().sample(r).rem_euclid(HOURS_PER_DAY),
            Location::Poi => {
                // any time between the day's (unwrapped) work arrival and home
                // return; re-draw inverted pairs
                let work = Normal::new(a.work_mean_h, a.work_sd_h).unwrap();
                let home = Normal::new(a.home_mean_h, a.home_sd_h).unwrap();
                loop {
                    let w = work.sample(r);
                    let h = home.sample(r);
                    if w < h {
                        break r.gen_range(w..h).rem_euclid(HOURS_PER_DAY);
                    }
                }
            }
        };
        let zone = match location {
            Location::Home => v.home_zone,
            Location::Work => sample_weighted_index(&self.trip_cum[v.home_zone], r),
            Location::Poi => sample_weighted_index(&self.poi_cum, r),
        };
        let power_kw = sample_cum(scenario.chargers.for_location(location), r).min(v.max_power_kw);
        let energy_kwh = v.interval_days * v.e_daily_kwh;
        let duration_h = energy_kwh / (scenario.eta_charge * power_kw);
        ChargingSession {
            vehicle: v.id,
            location,
            zone,
            power_kw,
            start_h,
            end_h: start_h + duration_h,
            energy_kwh,
        }
    }

    /// Simulate one day: every vehicle decides independently and charging
    /// vehicles produce one session each.
    pub fn simulate_day(&self, scenario: &Scenario, day: u64) -> Vec<ChargingSession> {
        self.vehicles
            .par_iter()
            .filter_map(|v| {
                let mut r = rng::stream(self.seed, "day", &[day, v.id]);
                decide_charging_today(v.interval_days, &mut r).then(|| self.sample_session(v, scenario, &mut r))
            })
            .collect()
    }

    /// Simulate `n_runs` independent days (day indices `day0..day0+n_runs`).
    pub fn monte_carlo_days(&self, scenario: &Scenario, n_runs: usize, step_h: f64, day0: u64) -> Result<Vec<DayRun>> {
        if n_runs == 0 {
            return Err(Error::invalid("need at least one run"));
        }
        (0..n_runs)
            .map(|k| {
                let sessions = self.simulate_day(scenario, day0 + k as u64);
                let profile = aggregate_load(&sessions, step_h, self.grid.zones.len())?;
                Ok(DayRun { sessions, profile })
            })
            .collect()
    }
}

/// One simulated day: its sessions and the aggregated profile.
#[derive(Debug, Clone)]
pub struct DayRun {
    pub sessions: Vec<ChargingSession>,
    pub profile: LoadProfile,
}

/// Accumulate rectangular pulses into fixed-width bins. Pulses crossing
/// midnight wrap around; energy is conserved exactly.
pub fn aggregate_load(sessions: &[ChargingSession], step_h: f64, n_zones: usize) -> Result<LoadProfile> {
    let bins_f = HOURS_PER_DAY / step_h;
    if !(step_h > 0.0) || (bins_f - bins_f.round()).abs() > 1e-9 {
        return Err(Error::invalid("step must divide 24 h"));
    }
    let bins = bins_f.round() as usize;
    let mut zone_kw = vec![vec![0.0; bins]; n_zones];
    let mut total_kw = vec![0.0; bins];
    for s in sessions {
        let mut add = |a: f64, b: f64| {
            // accumulate P over [a, b) within a single day frame
            let first = (a / step_h).floor() as usize;
            let last = ((b / step_h).ceil() as usize).min(bins);
            for k in first..last {
                let lo = (k as f64) * step_h;
                let hi = lo + step_h;
                let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                if overlap > 0.0 {
                    let kw = s.power_kw * overlap / step_h;
                    total_kw[k] += kw;
                    if s.zone < n_zones {
                        zone_kw[s.zone][k] += kw;
                    }
                }
            }
        };
        let mut remaining = s.duration_h();
        let mut cursor = s.start_h.rem_euclid(HOURS_PER_DAY);
        while remaining > 1e-12 {
            let seg = remaining.min(HOURS_PER_DAY - cursor);
            add(cursor, cursor + seg);
            remaining -= seg;
            cursor = 0.0;
        }
    }
    Ok(LoadProfile { step_h, zone_kw, total_kw })
}

/// Per-bin mean and standard deviation across runs.
pub fn mean_sd_profiles(profiles: &[&LoadProfile]) -> (Vec<f64>, Vec<f64>) {
    let n = profiles.len();
    assert!(n > 0);
    let bins = profiles[0].bins();
    let mut mean = vec![0.0; bins];
    for p in profiles {
        for (m, v) in mean.iter_mut().zip(&p.total_kw) {
            *m += v / n as f64;
        }
    }
    let mut sd = vec![0.0; bins];
    if n > 1 {
        for p in profiles {
            for (s, (m, v)) in sd.iter_mut().zip(mean.iter().zip(&p.total_kw)) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut sd {
            *s = (*s / (n - 1) as f64).sqrt();
        }
    }
    (mean, sd)
}

/// Requirements for one charging location.
#[derive(Debug, Clone, Copy)]
pub struct LocationRequirement {
    /// Charging points per assigned EV.
    pub ratio: f64,
    /// EVs assigned to this location (`share * n_tot`).
    pub assigned: f64,
    /// Reported number of points, rounded up to the nearest 500.
    pub points: u64,
}

/// Charging-point requirements per location.
#[derive(Debug, Clone)]
pub struct ChargingPointReport {
    pub home: Option<LocationRequirement>,
    pub work: Option<LocationRequirement>,
    pub poi: Option<LocationRequirement>,
}

fn round_up_500(x: f64) -> u64 {
    ((x / 500.0).ceil() * 500.0) as u64
}

/// Derive charging-point needs from simulated days.
///
/// Home chargers are dedicated (one point per assigned EV). Work points
/// follow the mean daily fraction of work-assigned EVs that actually
/// charge. POI points follow the peak number of simultaneous POI sessions,
/// assuming a point frees up as soon as a session ends.
pub fn charging_point_requirements(
    runs: &[DayRun],
    shares: &ChargingShares,
    n_tot: u64,
    step_h: f64,
) -> Result<ChargingPointReport> {
    if runs.is_empty() {
        return Err(Error::invalid("need at least one simulated day"));
    }
    let n = runs.len() as f64;
    let make = |share: f64, ratio: f64| -> Result<Option<LocationRequirement>> {
        if share <= 0.0 {
            return Ok(None);
        }
        let assigned = share * n_tot as f64;
        if assigned < 1.0 {
            return Err(Error::invalid("a location with non-zero share has no assigned EVs"));
        }
        Ok(Some(LocationRequirement { ratio, assigned, points: round_up_500(ratio * assigned) }))
    };

    // work: mean fraction of work-assigned EVs charging per day
    let mean_work_sessions: f64 = runs
        .iter()
        .map(|r| r.sessions.iter().filter(|s| s.location == Location::Work).count() as f64)
        .sum::<f64>()
        / n;
    let work_assigned = shares.work * n_tot as f64;
    let work_ratio = if work_assigned > 0.0 { mean_work_sessions / work_assigned } else { 0.0 };

    // poi: mean over runs of the peak simultaneous sessions
    let mean_poi_peak: f64 = runs
        .iter()
        .map(|r| {
            let poi: Vec<ChargingSession> = r.sessions.iter().filter(|s| s.location == Location::Poi).cloned().collect();
            peak_simultaneous(&poi, step_h) as f64
        })
        .sum::<f64>()
        / n;
    let poi_assigned = shares.poi * n_tot as f64;
    let poi_ratio = if poi_assigned > 0.0 { mean_poi_peak / poi_assigned } else { 0.0 };

    Ok(ChargingPointReport {
        home: make(shares.home, 1.0)?,
        work: make(shares.work, work_ratio)?,
        poi: make(shares.poi, poi_ratio)?,
    })
}

/// Maximum number of sessions active in any bin of the day (wrapping).
/// Each session counts at most once per bin.
pub fn peak_simultaneous(sessions: &[ChargingSession], step_h: f64) -> usize {
    let bins = (HOURS_PER_DAY / step_h).round() as usize;
    let mut count = vec![0usize; bins];
    for s in sessions {
        let start = s.start_h.rem_euclid(HOURS_PER_DAY);
        if s.duration_h() >= HOURS_PER_DAY {
            for c in &mut count {
                *c += 1;
            }
            continue;
        }
        let first = (start / step_h).floor() as isize;
        let last = ((start + s.duration_h()) / step_h).ceil() as isize;
        let span = ((last - first) as usize).min(bins);
        for k in 0..span {
            count[(first as usize + k) % bins] += 1;
        }
    }
    count.into_iter().max().unwrap_or(0)
}

/// Sum of charging powers of all vehicles charging that day: the load if
/// every session happened at once.
pub fn worst_case_peak_kw(sessions: &[ChargingSession]) -> f64 {
    sessions.iter().map(|s| s.power_kw).sum()
}

/// One point of the peak-versus-power sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub power_kw: f64,
    pub peak_kw_mean: f64,
    pub peak_kw_sd: f64,
    /// Peak simultaneous sessions over charging vehicles, averaged over runs.
    pub simultaneous_share_mean: f64,
}

/// Sweep a single uniform charging power level: all sessions use one power
/// and a tight arrival distribution (work-arrival shape). Vehicle power
/// caps are ignored so the fleet really charges at one level.
pub fn peak_vs_power_sweep(
    sim: &Simulator,
    eta_charge: f64,
    levels: &[f64],
    n_runs: usize,
    step_h: f64,
) -> Result<Vec<SweepPoint>> {
    if n_runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    let arrivals = ArrivalModel { home_mean_h: 18.0, home_sd_h: 1.8, work_mean_h: 9.0, work_sd_h: 1.8 };
    levels
        .iter()
        .map(|&kw| {
            if !(kw > 0.0) {
                return Err(Error::invalid("sweep power levels must be positive"));
            }
            let scenario = Scenario::new(ChargingShares::all_work(), arrivals, ChargerMix::single_level(kw), eta_charge)?;
            let mut peaks = Vec::with_capacity(n_runs);
            let mut sim_shares = Vec::with_capacity(n_runs);
            for k in 0..n_runs {
                let mut sessions = sim.simulate_day(&scenario, 9_000_000 + k as u64);
                for s in &mut sessions {
                    // single-level dummy scenario: lift per-vehicle caps
                    let duration = s.energy_kwh / (eta_charge * kw);
                    s.power_kw = kw;
                    s.end_h = s.start_h + duration;
                }
                let profile = aggregate_load(&sessions, step_h, 0)?;
                peaks.push(profile.peak_kw());
                let simultaneous = peak_simultaneous(&sessions, step_h);
                sim_shares.push(if sessions.is_empty() { 0.0 } else { simultaneous as f64 / sessions.len() as f64 });
            }
            let mean = peaks.iter().sum::<f64>() / n_runs as f64;
            let sd = if n_runs > 1 {
                (peaks.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n_runs - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(SweepPoint {
                power_kw: kw,
                peak_kw_mean: mean,
                peak_kw_sd: sd,
                simultaneous_share_mean: sim_shares.iter().sum::<f64>() / n_runs as f64,
            })
        })
        .collect()
}

/// Session log CSV (`vehicle,location,zone,power_kw,start,end,energy_kwh`);
/// times of day in ISO-8601 local form.
pub fn sessions_to_csv(sessions: &[ChargingSession]) -> String {
    fn iso_time(h: f64) -> String {
        let h = h.rem_euclid(HOURS_PER_DAY);
        let total = (h * 3600.0).round() as u64 % 86_400;
        format!("{:02}:{:02}:{:02}", total / 3600, (total / 60) % 60, total % 60)
    }
    let mut out = String::from("vehicle,location,zone,power_kw,start,end,energy_kwh\n");
    for s in sessions {
        out.push_str(&format!(
            "{},{},{},{:.2},{},{},{:.3}\n",
            s.vehicle,
            s.location.label(),
            s.zone,
            s.power_kw,
            iso_time(s.start_h),
            iso_time(s.end_h),
            s.energy_kwh
        ));
    }
    out
}

/// Load profile CSV: `time,zone_0..zone_n,total_kw`, times ISO-8601 local.
pub fn load_profile_to_csv(profile: &LoadProfile) -> String {
    let mut out = String::from("time");
    for z in 0..profile.zone_kw.len() {
        out.push_str(&format!(",zone_{z}_kw"));
    }
    out.push_str(",total_kw\n");
    for k in 0..profile.bins() {
        let minutes = (k as f64 * profile.step_h * 60.0).round() as u64;
        out.push_str(&format!("{:02}:{:02}:00", minutes / 60, minutes % 60));
        for z in &profile.zone_kw {
            out.push_str(&format!(",{:.3}", z[k]));
        }
        out.push_str(&format!(",{:.3}\n", profile.total_kw[k]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::FleetSpec;
    use crate::geo;
    use crate::mobility::{self, CircuityModel};
    use approx::assert_relative_eq;

    fn test_world() -> (ZoneGrid, TripMatrix, MobilityResult) {
        let b = geo::square_boundary_km(10.0);
        let mut grid = geo::build_zone_grid(&b, 5.0).unwrap();
        for (i, z) in grid.zones.iter_mut().enumerate() {
            z.workplaces = [5.0, 3.0, 2.0, 1.0][i];
            z.pois = [1.0, 3.0, 0.0, 1.0][i];
            z.population = 1000.0;
        }
        geo::allocate_vehicles(&mut grid, 2000).unwrap();
        let circ = CircuityModel::fixed(1.3).unwrap();
        let d = mobility::distance_matrix(&grid, None, &circ).unwrap();
        let t = mobility::trip_probabilities(&grid, &d, 0.2360).unwrap();
        let m = mobility::vkm(&grid, &t, &d, 0.0).unwrap();
        (grid, t, m)
    }

    fn default_scenario(shares: ChargingShares) -> Scenario {
        Scenario::new(shares, ArrivalModel::default(), ChargerMix::default_mix(), 0.9).unwrap()
    }

    #[test]
    fn soc0_mean_and_bounds() {
        let mut r = rng::stream(5, "soc-test", &[]);
        let n = 50_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_soc0(&mut r)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.6).abs() < 0.01, "mean {mean}");
        assert!(samples.iter().all(|s| (0.05..=0.95).contains(s)));
    }

    #[test]
    fn soc0_deterministic() {
        let a: Vec<f64> = {
            let mut r = rng::stream(5, "soc", &[]);
            (0..100).map(|_| sample_soc0(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = rng::stream(5, "soc", &[]);
            (0..100).map(|_| sample_soc0(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn interval_examples() {
        // depletion >= available headroom -> daily charging
        assert_eq!(charging_interval(40.0, 60.0, 0.6), 1.0);
        // 17.4 km at 0.183 kWh/km on a 60 kWh battery
        let dn = charging_interval(17.4 * 0.183, 60.0, 0.6);
        assert_relative_eq!(dn, 6.0298, epsilon = 2e-4);
        assert_relative_eq!(1.0 / dn, 0.1658, epsilon = 1e-4);
        // 15 kWh PHEV
        let dn_phev = charging_interval(17.4 * 0.183, 15.0, 0.6);
        assert_relative_eq!(dn_phev, 1.5074, epsilon = 1e-4);
        // no driving, no charging
        assert!(charging_interval(0.0, 60.0, 0.6).is_infinite());
    }

    #[test]
    fn decide_today_frequencies() {
        let mut r = rng::stream(6, "decide", &[]);
        assert!((0..100).all(|_| decide_charging_today(1.0, &mut r)));
        let n = 100_000;
        let hits = (0..n).filter(|_| decide_charging_today(4.0, &mut r)).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        assert!(!decide_charging_today(f64::INFINITY, &mut r));
    }

    #[test]
    fn session_duration_example() {
        // 13.32 kWh at 7.4 kW and 90 % efficiency -> 2 h
        let s = ChargingSession {
            vehicle: 0,
            location: Location::Home,
            zone: 0,
            power_kw: 7.4,
            start_h: 18.0,
            end_h: 18.0 + 13.32 / (0.9 * 7.4),
            energy_kwh: 13.32,
        };
        assert_relative_eq!(s.duration_h(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn phev_power_capped() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 11).unwrap();
        let scenario = default_scenario(ChargingShares::mixed());
        for day in 0..20 {
            for s in sim.simulate_day(&scenario, day) {
                let v = &sim.vehicles[s.vehicle as usize];
                assert!(s.power_kw <= v.max_power_kw + 1e-12);
                if v.class_idx == 1 {
                    assert!(s.power_kw <= 11.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mean_home_power_matches_mix() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 3).unwrap();
        let scenario = default_scenario(ChargingShares::all_home());
        let mut sum = 0.0;
        let mut count = 0usize;
        for day in 0..60 {
            for s in sim.simulate_day(&scenario, day) {
                sum += s.power_kw;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        // expectation of the home mix; the home cap (11 kW) never binds
        assert_relative_eq!(scenario.chargers.mean_power(Location::Home), 6.05, epsilon = 1e-12);
        assert!((mean - 6.05).abs() < 0.1, "mean {mean} over {count}");
    }

    #[test]
    fn aggregate_eight_bins_at_a_constant_power() {
        let s = ChargingSession {
            vehicle: 0,
            location: Location::Home,
            zone: 0,
            power_kw: 7.4,
            start_h: 18.0,
            end_h: 20.0,
            energy_kwh: 7.4 * 2.0 * 0.9,
        };
        let p = aggregate_load(&[s], 0.25, 1).unwrap();
        let nonzero: Vec<(usize, f64)> =
            p.total_kw.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, v)| (i, *v)).collect();
        assert_eq!(nonzero.len(), 8);
        assert_eq!(nonzero[0].0, 72); // 18:00
        for (_, v) in nonzero {
            assert_relative_eq!(v, 7.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn aggregate_wraps_midnight() {
        let s = ChargingSession {
            vehicle: 0,
            location: Location::Home,
            zone: 0,
            power_kw: 10.0,
            start_h: 23.5,
            end_h: 24.5,
            energy_kwh: 9.0,
        };
        let p = aggregate_load(&[s], 0.25, 1).unwrap();
        assert_relative_eq!(p.total_kw[94], 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.total_kw[95], 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.total_kw[0], 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.total_kw[1], 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.energy_kwh(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn energy_closure() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 17).unwrap();
        let scenario = default_scenario(ChargingShares::mixed());
        let sessions = sim.simulate_day(&scenario, 0);
        assert!(!sessions.is_empty());
        let p = aggregate_load(&sessions, 0.25, grid.zones.len()).unwrap();
        let grid_energy: f64 = sessions.iter().map(|s| s.grid_energy_kwh()).sum();
        assert_relative_eq!(p.energy_kwh(), grid_energy, max_relative = 1e-6);
        // per-zone series also sum to the total
        let zone_sum: f64 = p.zone_kw.iter().map(|z| z.iter().sum::<f64>()).sum::<f64>() * p.step_h;
        assert_relative_eq!(zone_sum, grid_energy, max_relative = 1e-6);
    }

    #[test]
    fn same_seed_identical_sessions() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim1 = Simulator::new(&grid, &trips, &mob, &fleet, 123).unwrap();
        let sim2 = Simulator::new(&grid, &trips, &mob, &fleet, 123).unwrap();
        let scenario = default_scenario(ChargingShares::mixed());
        let (a, b) = (sim1.simulate_day(&scenario, 4), sim2.simulate_day(&scenario, 4));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.vehicle, y.vehicle);
            assert_eq!(x.zone, y.zone);
            assert_eq!(x.power_kw, y.power_kw);
            assert_eq!(x.start_h, y.start_h);
            assert_eq!(x.energy_kwh, y.energy_kwh);
        }
    }

    #[test]
    fn single_run_sd_is_zero() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 9).unwrap();
        let scenario = default_scenario(ChargingShares::all_home());
        let runs = sim.monte_carlo_days(&scenario, 1, 0.25, 0).unwrap();
        let profiles: Vec<&LoadProfile> = runs.iter().map(|r| &r.profile).collect();
        let (_, sd) = mean_sd_profiles(&profiles);
        assert!(sd.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn long_run_energy_balance() {
        // expected charged energy per vehicle-day equals e_daily / eta
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 31).unwrap();
        let scenario = default_scenario(ChargingShares::all_home());
        let days = 1200u64;
        let mut grid_energy = 0.0;
        for day in 0..days {
            grid_energy += sim
                .simulate_day(&scenario, day)
                .iter()
                .map(|s| s.grid_energy_kwh())
                .sum::<f64>();
        }
        let expected: f64 = sim.vehicles.iter().map(|v| v.e_daily_kwh / 0.9).sum::<f64>() * days as f64;
        assert_relative_eq!(grid_energy, expected, max_relative = 0.02);
    }

    #[test]
    fn charging_probability_saturates_with_daily_energy() {
        // empirical charge probability is non-decreasing in daily energy and
        // reaches 1 at full depletion of the usable decision capacity
        let q = 60.0;
        let mut r = rng::stream(77, "prob-curve", &[]);
        let energies = [1.0, 3.0, 6.0, 12.0, 24.0, 0.8 * q * 0.95 + 0.5];
        let mut last = 0.0;
        for e in energies {
            let n = 20_000;
            let mut hits = 0;
            for _ in 0..n {
                let soc0 = sample_soc0(&mut r);
                let dn = charging_interval(e, q, soc0);
                if decide_charging_today(dn, &mut r) {
                    hits += 1;
                }
            }
            let p = hits as f64 / n as f64;
            assert!(p >= last - 0.01, "probability dropped: {p} < {last} at {e} kWh");
            last = p;
        }
        assert!((last - 1.0).abs() < 1e-12, "expected certain charging, got {last}");
    }

    #[test]
    fn worst_case_single_vehicle() {
        let s = ChargingSession {
            vehicle: 0,
            location: Location::Poi,
            zone: 0,
            power_kw: 11.0,
            start_h: 12.0,
            end_h: 13.0,
            energy_kwh: 9.9,
        };
        assert_eq!(worst_case_peak_kw(&[s]), 11.0);
    }

    #[test]
    fn sweep_saturates_at_low_power() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 51).unwrap();
        // at 0.02 kW even the smallest session outlasts the day
        let pts = peak_vs_power_sweep(&sim, 0.9, &[0.02], 2, 0.25).unwrap();
        assert_relative_eq!(pts[0].simultaneous_share_mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_share_locations_are_never_drawn() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 4).unwrap();
        let scenario = default_scenario(ChargingShares::all_work());
        for s in sim.simulate_day(&scenario, 0) {
            assert_eq!(s.location, Location::Work);
        }
    }

    #[test]
    fn points_home_scenario_counts_everyone() {
        let (grid, trips, mob) = test_world();
        let fleet = FleetSpec::default_fleet();
        let sim = Simulator::new(&grid, &trips, &mob, &fleet, 8).unwrap();
        let scenario = default_scenario(ChargingShares::all_home());
        let runs = sim.monte_carlo_days(&scenario, 3, 0.25, 0).unwrap();
        let rep = charging_point_requirements(&runs, &scenario.shares, 2000, 0.25).unwrap();
        let home = rep.home.unwrap();
        assert_eq!(home.points, 2000);
        assert_eq!(home.ratio, 1.0);
        assert!(rep.work.is_none());
        assert!(rep.poi.is_none());
    }

    #[test]
    fn csv_exports_use_iso_times() {
        let s = ChargingSession {
            vehicle: 3,
            location: Location::Work,
            zone: 1,
            power_kw: 11.0,
            start_h: 9.25,
            end_h: 25.5, // wraps to 01:30
            energy_kwh: 4.0,
        };
        let csv = sessions_to_csv(&[s.clone()]);
        assert!(csv.contains("3,work,1,11.00,09:15:00,01:30:00,4.000"), "{csv}");
        let p = aggregate_load(&[s], 0.5, 2).unwrap();
        let profile_csv = load_profile_to_csv(&p);
        assert!(profile_csv.starts_with("time,zone_0_kw,zone_1_kw,total_kw\n"));
        assert!(profile_csv.contains("\n09:30:00,"), "{profile_csv}");
    }

    #[test]
    fn scenario_requires_chargers_for_drawn_locations() {
        let chargers = ChargerMix::new(vec![(3.2, 1.0)], vec![], vec![]).unwrap();
        let err = Scenario::new(ChargingShares::all_work(), ArrivalModel::default(), chargers, 0.9);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
