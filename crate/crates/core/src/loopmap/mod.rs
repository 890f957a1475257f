//! Directed distance on Ω⁰, barrier curves and the loop Poincaré maps.

mod barriers;
mod chart;
mod loops;
mod params;

pub use barriers::{build_barriers, point_in_polygon, rotated_system, BandCheck, BarrierCurve, BarrierSet, FlowCheck, ZetaPoints};
pub use chart::{directed_distance, point_at_distance, AnchorSide, DirectedChart};
pub use loops::{loop_backward, loop_batch, loop_forward, loop_orbit, roundtrip_check, LoopContext, LoopResult};
pub use params::{c_mu, default_beta, measure_c_s, SessionParams};
