//! City-scale simulation of private electric-vehicle charging demand from
//! open geospatial inputs, plus the complementarity of that demand with
//! local photovoltaic generation.
//!
//! The pipeline is organised in stages, each a module of this crate:
//!
//! 1. [`geo`] — build a regular traffic-zone grid from a boundary polygon
//!    and aggregate population, workplaces and points of interest per zone.
//! 2. [`mobility`] — inter-zone road distances (routed or circuity-based)
//!    and a self-calibrated gravity trip distribution yielding per-zone
//!    vehicle-kilometre aggregates.
//! 3. [`demand`] — daily charging energy per zone, split across home,
//!    workplace and POI charging.
//! 4. [`temporal`] — stochastic per-vehicle charging decisions and session
//!    synthesis, aggregated into load profiles, charging-point requirements
//!    and peak statistics.
//! 5. [`pv`] — per-kWp photovoltaic production from hourly weather data.
//! 6. [`analysis`] — EV–PV indicators (self-sufficiency, self-consumption,
//!    energy coverage), fleet-share dynamics and reference-grid scaling.
//!
//! All stochastic stages draw from counter-based generators keyed by a
//! master seed and a purpose tag (see [`rng`]), so every result is
//! reproducible and independent of evaluation order.

pub mod analysis;
pub mod demand;
pub mod error;
pub mod geo;
pub mod mobility;
pub mod pv;
pub mod rng;
pub mod temporal;

pub use error::{Error, Result};
