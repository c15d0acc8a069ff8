//! Mask-based particle tracking: per-frame detections from label masks, then
//! gated min-cost frame-to-frame linking into identity-stable tracks.

mod assign;
mod detect;
mod link;

pub use assign::{assignment_cost, min_cost_assignment, CostMatrix};
pub use detect::{extract_detections, label_components, DetectConfig, Detection, MaskKind, Moments};
pub use link::{identity_switch_count, link, CostKind, LinkConfig, Track};
