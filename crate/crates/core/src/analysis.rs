//! EV-PV complementarity indicators, fleet-share dynamics and
//! reference-grid context.
//!
//! Self-sufficiency is the share of charging energy coincident with PV
//! production; self-consumption is the share of PV production absorbed by
//! charging; energy coverage ignores timing entirely. Day integrals use the
//! periodic trapezoid rule on a common time grid, with the hourly PV series
//! interpolated linearly onto the load grid.

use chrono::{DateTime, Datelike, Utc, Weekday};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pv::PVProfile;
use crate::temporal::{aggregate_load, Scenario, Simulator};

/// Energy of a periodic sampled power series, value-hours.
fn energy(series: &[f64], step_h: f64) -> f64 {
    series.iter().sum::<f64>() * step_h
}

/// Fraction of EV demand covered by coincident PV production. `None` when
/// there is no demand.
pub fn self_sufficiency(pv: &[f64], ev: &[f64], step_h: f64) -> Option<f64> {
    assert_eq!(pv.len(), ev.len(), "series must share a grid");
    let demand = energy(ev, step_h);
    if demand <= 0.0 {
        return None;
    }
    let coincident: f64 = pv.iter().zip(ev).map(|(p, e)| p.min(*e)).sum::<f64>() * step_h;
    Some(coincident / demand)
}

/// Fraction of PV production absorbed by coincident EV demand. `None` when
/// there is no production.
pub fn self_consumption(pv: &[f64], ev: &[f64], step_h: f64) -> Option<f64> {
    assert_eq!(pv.len(), ev.len(), "series must share a grid");
    let production = energy(pv, step_h);
    if production <= 0.0 {
        return None;
    }
    let coincident: f64 = pv.iter().zip(ev).map(|(p, e)| p.min(*e)).sum::<f64>() * step_h;
    Some(coincident / production)
}

/// Total PV energy over total EV energy, timing ignored. `None` when there
/// is no demand.
pub fn energy_coverage(pv: &[f64], ev: &[f64], step_h: f64) -> Option<f64> {
    let demand = energy(ev, step_h);
    if demand <= 0.0 {
        return None;
    }
    Some(energy(pv, step_h) / demand)
}

/// Sample the year-long PV series onto one local day's load grid.
///
/// `day_index` counts days from the series start in local time
/// (`tz_offset_h` east of UTC). PV samples are treated as averages over
/// their step and interpolated linearly at bin centres.
pub fn pv_day_on_grid(
    pv: &PVProfile,
    tz_offset_h: f64,
    day_index: usize,
    step_h: f64,
    bins: usize,
) -> Vec<f64> {
    let n = pv.power_kw_per_kwp.len();
    let sample = |hours_since_start_utc: f64| -> f64 {
        // value positions sit at interval midpoints
        let pos = hours_since_start_utc / pv.step_h - 0.5;
        if pos <= 0.0 {
            return pv.power_kw_per_kwp[0];
        }
        let i = pos.floor() as usize;
        if i + 1 >= n {
            return pv.power_kw_per_kwp[n - 1];
        }
        let frac = pos - i as f64;
        pv.power_kw_per_kwp[i] * (1.0 - frac) + pv.power_kw_per_kwp[i + 1] * frac
    };
    (0..bins)
        .map(|k| {
            let local_h = day_index as f64 * 24.0 + (k as f64 + 0.5) * step_h;
            let utc_h = local_h - tz_offset_h;
            if utc_h < 0.0 {
                return 0.0; // before the series starts
            }
            sample(utc_h).max(0.0)
        })
        .collect()
}

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoxplotStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxplotStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| -> f64 {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        let (q1, median, q3) = (quantile(0.25), quantile(0.5), quantile(0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = sorted.iter().copied().find(|v| *v >= lo_fence).unwrap_or(sorted[0]);
        let whisker_high = sorted.iter().rev().copied().find(|v| *v <= hi_fence).unwrap_or(sorted[sorted.len() - 1]);
        let outliers = sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect();
        Some(BoxplotStats {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median,
            q1,
            q3,
            whisker_low,
            whisker_high,
            outliers,
        })
    }
}

/// One day's indicators in the sweep.
#[derive(Debug, Clone)]
pub struct DailyIndicators {
    pub date: chrono::NaiveDate,
    pub self_sufficiency: Option<f64>,
    pub self_consumption: Option<f64>,
    pub coverage: Option<f64>,
}

/// Sweep results for one (scenario, capacity) pair.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub scenario: String,
    pub kwp_per_ev: f64,
    pub daily: Vec<DailyIndicators>,
    pub stats: BoxplotStats,
    /// Mean and standard deviation of daily self-sufficiency per month (1-12).
    pub monthly_mean: [f64; 12],
    pub monthly_sd: [f64; 12],
}

/// Compute daily self-sufficiency for every weekday of the simulated year,
/// for each scenario and each installed capacity per EV.
///
/// The EV load of each day is one Monte Carlo realisation seeded by the day
/// index; PV varies with the weather of that calendar day.
pub fn capacity_sweep(
    sim: &Simulator,
    scenarios: &[(String, Scenario)],
    capacities_kwp_per_ev: &[f64],
    pv: &PVProfile,
    series_start: DateTime<Utc>,
    tz_offset_h: f64,
    step_h: f64,
    holidays: &[chrono::NaiveDate],
) -> Result<Vec<SweepCell>> {
    let n_tot = sim.grid.total_evs() as f64;
    if n_tot <= 0.0 {
        return Err(Error::invalid("no vehicles allocated"));
    }
    let bins = (24.0 / step_h).round() as usize;
    let n_days = ((pv.power_kw_per_kwp.len() as f64 * pv.step_h) / 24.0).floor() as usize;
    let weekdays: Vec<(usize, chrono::NaiveDate)> = (0..n_days)
        .filter_map(|d| {
            let date = (series_start + chrono::Duration::days(d as i64)).date_naive();
            let wd = date.weekday();
            (wd != Weekday::Sat && wd != Weekday::Sun && !holidays.contains(&date)).then_some((d, date))
        })
        .collect();
    if weekdays.is_empty() {
        return Err(Error::invalid("PV series covers no weekdays"));
    }

    let mut out = Vec::new();
    for (name, scenario) in scenarios {
        // one EV-load realisation per day, reused across capacities
        let day_loads: Vec<(usize, chrono::NaiveDate, Vec<f64>)> = weekdays
            .par_iter()
            .map(|&(d, date)| {
                let sessions = sim.simulate_day(scenario, d as u64);
                let profile = aggregate_load(&sessions, step_h, 0).expect("valid step");
                (d, date, profile.total_kw)
            })
            .collect();
        for &cap in capacities_kwp_per_ev {
            let daily: Vec<DailyIndicators> = day_loads
                .iter()
                .map(|(d, date, ev_kw)| {
                    let pv_kw: Vec<f64> = pv_day_on_grid(pv, tz_offset_h, *d, step_h, bins)
                        .iter()
                        .map(|p| p * cap * n_tot)
                        .collect();
                    DailyIndicators {
                        date: *date,
                        self_sufficiency: self_sufficiency(&pv_kw, ev_kw, step_h),
                        self_consumption: self_consumption(&pv_kw, ev_kw, step_h),
                        coverage: energy_coverage(&pv_kw, ev_kw, step_h),
                    }
                })
                .collect();
            let values: Vec<f64> = daily.iter().filter_map(|d| d.self_sufficiency).collect();
            let stats = BoxplotStats::from_values(&values)
                .ok_or_else(|| Error::invalid("no self-sufficiency data"))?;
            let mut monthly_mean = [0.0; 12];
            let mut monthly_sd = [0.0; 12];
            for m in 1..=12u32 {
                let vals: Vec<f64> = daily
                    .iter()
                    .filter(|d| d.date.month() == m)
                    .filter_map(|d| d.self_sufficiency)
                    .collect();
                if !vals.is_empty() {
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    monthly_mean[m as usize - 1] = mean;
                    if vals.len() > 1 {
                        monthly_sd[m as usize - 1] = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                            / (vals.len() - 1) as f64)
                            .sqrt();
                    }
                }
            }
            out.push(SweepCell {
                scenario: name.clone(),
                kwp_per_ev: cap,
                daily,
                stats,
                monthly_mean,
                monthly_sd,
            });
        }
    }
    Ok(out)
}

/// Fleet renewal dynamics.
#[derive(Debug, Clone, Copy)]
pub struct FleetDynamics {
    /// Fleet renewal rate, 1/years.
    pub renewal_rate: f64,
    /// EV share of new registrations.
    pub new_ev_share: f64,
    /// Initial EV share of the fleet.
    pub initial_share: f64,
}

impl FleetDynamics {
    pub fn new(renewal_rate: f64, new_ev_share: f64, initial_share: f64) -> Result<Self> {
        if !(renewal_rate > 0.0) {
            return Err(Error::invalid("renewal rate must be positive"));
        }
        for (name, v) in [("new_ev_share", new_ev_share), ("initial_share", initial_share)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(FleetDynamics { renewal_rate, new_ev_share, initial_share })
    }
}

/// EV fleet share after `t` years: exponential relaxation towards the share
/// of new registrations.
pub fn fleet_share(t_years: f64, dyn_: &FleetDynamics) -> f64 {
    dyn_.new_ev_share + (dyn_.initial_share - dyn_.new_ev_share) * (-dyn_.renewal_rate * t_years).exp()
}

/// Years until the fleet share reaches `target`.
pub fn time_to_share(target: f64, dyn_: &FleetDynamics) -> Result<f64> {
    if !(target > dyn_.initial_share) {
        return Err(Error::invalid("target share must exceed the initial share"));
    }
    if target >= dyn_.new_ev_share {
        return Err(Error::invalid(format!(
            "target share {target} is unreachable: new-registration share is {}",
            dyn_.new_ev_share
        )));
    }
    Ok(((dyn_.new_ev_share - dyn_.initial_share) / (dyn_.new_ev_share - target)).ln() / dyn_.renewal_rate)
}

/// City-level reference demand curve scaled from a national curve.
#[derive(Debug, Clone)]
pub struct ReferenceLoad {
    /// City share of national demand.
    pub share: f64,
    /// Scaled hourly curve, MW.
    pub curve_mw: Vec<f64>,
    pub peak_mw: f64,
    pub daily_energy_mwh: f64,
}

/// Scale a national hourly demand curve to the study area. The share is the
/// study population's part of the wider region times the region's part of
/// the national peak.
pub fn scale_reference_load(
    national_curve_mw: &[f64],
    study_population: f64,
    region_population: f64,
    region_peak_mw: f64,
) -> Result<ReferenceLoad> {
    if national_curve_mw.is_empty() {
        return Err(Error::invalid("national curve is empty"));
    }
    if !(study_population > 0.0) || !(region_population > 0.0) {
        return Err(Error::invalid("populations must be positive"));
    }
    let national_peak = national_curve_mw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(national_peak > 0.0) {
        return Err(Error::invalid("national curve has no positive peak"));
    }
    let share = (study_population / region_population) * (region_peak_mw / national_peak);
    let step_h = 24.0 / national_curve_mw.len() as f64;
    let curve_mw: Vec<f64> = national_curve_mw.iter().map(|v| v * share).collect();
    let peak_mw = national_peak * share;
    let daily_energy_mwh = curve_mw.iter().sum::<f64>() * step_h;
    Ok(ReferenceLoad { share, curve_mw, peak_mw, daily_energy_mwh })
}

/// EV charging demand as a percentage of the city's daily energy demand.
pub fn ev_uptake_percent(ev_daily_mwh: f64, reference: &ReferenceLoad) -> f64 {
    100.0 * ev_daily_mwh / reference.daily_energy_mwh
}

/// Indicator CSV: `date,scenario,kwp_per_ev,self_sufficiency,self_consumption,coverage`.
pub fn indicators_to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("date,scenario,kwp_per_ev,self_sufficiency,self_consumption,coverage\n");
    for cell in cells {
        for d in &cell.daily {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.2},{},{},{}\n",
                d.date,
                cell.scenario,
                cell.kwp_per_ev,
                fmt(d.self_sufficiency),
                fmt(d.self_consumption),
                fmt(d.coverage)
            ));
        }
    }
    out
}

/// Monthly summary CSV: `scenario,kwp_per_ev,month,ss_mean,ss_sd`.
pub fn monthly_summary_to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("scenario,kwp_per_ev,month,ss_mean,ss_sd\n");
    for cell in cells {
        for m in 0..12 {
            out.push_str(&format!(
                "{},{:.2},{},{:.4},{:.4}\n",
                cell.scenario,
                cell.kwp_per_ev,
                m + 1,
                cell.monthly_mean[m],
                cell.monthly_sd[m]
            ));
        }
    }
    out
}

/// Boxplot-statistics JSON for all sweep cells.
pub fn sweep_stats_to_json(cells: &[SweepCell]) -> serde_json::Value {
    serde_json::json!(cells
        .iter()
        .map(|c| {
            serde_json::json!({
                "scenario": c.scenario,
                "kwp_per_ev": c.kwp_per_ev,
                "self_sufficiency": c.stats,
            })
        })
        .collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ss_limit_cases() {
        let pv = vec![5.0; 96];
        let ev = vec![2.0; 96];
        assert_relative_eq!(self_sufficiency(&pv, &ev, 0.25).unwrap(), 1.0, epsilon = 1e-12);
        let zero = vec![0.0; 96];
        assert_relative_eq!(self_sufficiency(&zero, &ev, 0.25).unwrap(), 0.0, epsilon = 1e-12);
        assert!(self_sufficiency(&pv, &zero, 0.25).is_none());
        assert!(self_consumption(&zero, &ev, 0.25).is_none());
    }

    #[test]
    fn ss_rect_vs_triangle_matches_piecewise_integration() {
        // EV: 10 kW from 08:00 to 16:00. PV: triangle from 06:00 to 18:00
        // peaking at 12 kW at 13:00. Exact overlap worked out by piecewise
        // integration: 1081/42 + 20 + 481/30 kWh over 80 kWh of demand.
        let step = 1.0 / 120.0; // 30 s grid
        let bins = (24.0 / step) as usize;
        let mut pv = vec![0.0; bins];
        let mut ev = vec![0.0; bins];
        for k in 0..bins {
            let t = (k as f64 + 0.5) * step;
            if (8.0..16.0).contains(&t) {
                ev[k] = 10.0;
            }
            if (6.0..13.0).contains(&t) {
                pv[k] = 12.0 * (t - 6.0) / 7.0;
            } else if (13.0..18.0).contains(&t) {
                pv[k] = 12.0 * (18.0 - t) / 5.0;
            }
        }
        let expected = (1081.0 / 42.0 + 20.0 + 481.0 / 30.0) / 80.0;
        assert_relative_eq!(expected, 0.772_142_857, epsilon = 1e-9);
        let ss = self_sufficiency(&pv, &ev, step).unwrap();
        assert_relative_eq!(ss, expected, epsilon = 1e-3);
    }

    #[test]
    fn ss_sc_identity() {
        // SS * ∫EV == SC * ∫PV exactly (both equal the coincident energy)
        let pv: Vec<f64> = (0..96).map(|k| ((k as f64) / 10.0).sin().abs() * 8.0).collect();
        let ev: Vec<f64> = (0..96).map(|k| ((k as f64) / 7.0).cos().abs() * 5.0).collect();
        let ss = self_sufficiency(&pv, &ev, 0.25).unwrap();
        let sc = self_consumption(&pv, &ev, 0.25).unwrap();
        let e_ev = ev.iter().sum::<f64>() * 0.25;
        let e_pv = pv.iter().sum::<f64>() * 0.25;
        assert_relative_eq!(ss * e_ev, sc * e_pv, max_relative = 1e-12);
        assert!(ss <= 1.0 && sc <= 1.0);
    }

    #[test]
    fn coverage_identical_series() {
        let s = vec![3.0; 96];
        assert_relative_eq!(energy_coverage(&s, &s, 0.25).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(self_consumption(&s, &s, 0.25).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fleet_share_examples() {
        let base = |sigma: f64| FleetDynamics::new(0.05, sigma, 0.0).unwrap();
        assert_relative_eq!(fleet_share(0.0, &base(1.0)), 0.0, epsilon = 1e-12);
        let target = 1.0 / 6.0;
        assert_relative_eq!(time_to_share(target, &base(1.0)).unwrap(), 3.646, epsilon = 5e-3);
        assert_relative_eq!(time_to_share(target, &base(0.5)).unwrap(), 8.109, epsilon = 5e-3);
        assert_relative_eq!(time_to_share(target, &base(0.2)).unwrap(), 35.835, epsilon = 5e-3);
        assert!(time_to_share(0.3, &base(0.2)).is_err());
    }

    #[test]
    fn fleet_share_monotone_and_inverts() {
        let dyn_ = FleetDynamics::new(0.07, 0.8, 0.05).unwrap();
        let mut last = fleet_share(0.0, &dyn_);
        for k in 1..200 {
            let s = fleet_share(k as f64 * 0.5, &dyn_);
            assert!(s >= last);
            last = s;
        }
        assert!((last - 0.8).abs() < 1e-3);
        let t = time_to_share(0.5, &dyn_).unwrap();
        assert_relative_eq!(fleet_share(t, &dyn_), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn reference_load_scaling() {
        // two equal regions, region peak half the national peak
        let national = vec![100.0, 200.0, 150.0, 100.0];
        let r = scale_reference_load(&national, 1.0, 2.0, 100.0).unwrap();
        assert_relative_eq!(r.share, 0.25, epsilon = 1e-12);
        assert_relative_eq!(r.peak_mw, 50.0, epsilon = 1e-12);
        // shape preserved
        for (orig, scaled) in national.iter().zip(&r.curve_mw) {
            assert_relative_eq!(scaled / r.share, *orig, epsilon = 1e-12);
        }
        // identity share
        let id = scale_reference_load(&national, 5.0, 5.0, 200.0).unwrap();
        assert_relative_eq!(id.share, 1.0, epsilon = 1e-12);
        assert_eq!(id.curve_mw, national);
    }

    #[test]
    fn uptake_percent() {
        let national = vec![4000.0; 24];
        let r = scale_reference_load(&national, 1.0, 1.0, 4000.0).unwrap();
        assert_relative_eq!(r.daily_energy_mwh, 96_000.0, epsilon = 1e-9);
        assert_relative_eq!(ev_uptake_percent(960.0, &r), 1.0, epsilon = 1e-12);
        assert_eq!(ev_uptake_percent(0.0, &r), 0.0);
        assert_relative_eq!(ev_uptake_percent(1920.0, &r), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pv_day_grid_interpolates_hourly_series() {
        use crate::pv::PVProfile;
        // constant series stays constant after interpolation
        let flat = PVProfile { power_kw_per_kwp: vec![0.7; 48], step_h: 1.0, yield_kwh_per_kwp: 0.7 * 48.0 };
        let day = pv_day_on_grid(&flat, 0.0, 1, 0.25, 96);
        assert!(day.iter().all(|v| (v - 0.7).abs() < 1e-12));
        // a linear ramp interpolates linearly at bin centres
        let ramp = PVProfile {
            power_kw_per_kwp: (0..48).map(|k| k as f64).collect(),
            step_h: 1.0,
            yield_kwh_per_kwp: 0.0,
        };
        let day0 = pv_day_on_grid(&ramp, 0.0, 0, 0.25, 96);
        // bin centred at 02:07:30 sits at sample position 1.625
        assert_relative_eq!(day0[8], 1.625, epsilon = 1e-12);
        // timezone shift moves the window
        let shifted = pv_day_on_grid(&ramp, -3.0, 0, 0.25, 96);
        assert!(shifted[8] > day0[8]);
    }

    #[test]
    fn boxplot_stats_basics() {
        let vals: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let s = BoxplotStats::from_values(&vals).unwrap();
        assert_relative_eq!(s.mean, 50.5, epsilon = 1e-12);
        assert_relative_eq!(s.median, 50.5, epsilon = 1e-12);
        assert!(s.q1 < s.median && s.median < s.q3);
        assert!(s.outliers.is_empty());
        let with_outlier = [vec![1.0; 20], vec![100.0]].concat();
        let s2 = BoxplotStats::from_values(&with_outlier).unwrap();
        assert_eq!(s2.outliers, vec![100.0]);
    }
}
