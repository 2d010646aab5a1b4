//! Synthetic labeled multi-session scenes and brute-force reference implementations.

pub mod oracle;
pub mod render;
pub mod scenarios;
pub mod scene;

pub use oracle::oracle_ephemerality;
pub use render::{encode_label, label_class, label_primitive, render_session, LabeledSession};
pub use scenarios::{alignment_scenario, parking_lot_scenario};
pub use scene::{Primitive, PrimitiveClass, PrimitiveKind, SceneSpec, SensorModel};
