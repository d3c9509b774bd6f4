//! Event-camera true optical flow via multi-scale pooling.
//!
//! Three interchangeable engines turn a stream of local (normal) flow events
//! into true flow:
//!
//! * [`ArmsEngine`] pools over a per-pixel frame and square windows. Slow but
//!   easy to audit; used as a reference.
//! * [`FarmsEngine`] pools over a ring of the last `N` flow events, so its cost
//!   does not depend on the window size.
//! * [`HarmsEngine`] is a bit-level model of the accelerator: 16-bit inputs,
//!   integer averagers, Q24.8 outputs and batched processing.
//!
//! Around them sit event I/O, a synthetic scene generator, a plane-fitting
//! local-flow front end, evaluation metrics and a pipeline runner.

pub mod arms;
pub mod error;
pub mod event;
pub mod farms;
pub mod flow;
pub mod harms;
pub mod io;
pub mod local_flow;
pub mod metrics;
pub mod params;
pub mod pipeline;
pub mod synth;

pub use arms::{arms_iteration_count, arms_true_flow, ArmsEngine, FlowFrame};
pub use error::{Error, Result};
pub use event::{RawEvent, SensorGeometry, Timestamp};
pub use farms::{farms_iteration_count, farms_process_event, FarmsEngine, RecentFlowBuffer};
pub use flow::{IterationStats, LocalFlowEvent, TrueFlowResult};
pub use harms::{
    estimate_cycles, estimate_throughput, harms_process_batch, CycleModel, EventAccumulationBuffer,
    FixedQ24_8, HarmsEngine, HarmsResult, QuantizedFlowEvent,
};
pub use io::{DatasetManifest, GroundTruth};
pub use local_flow::{compute_local_flow, local_flow_stream, LocalFlowConfig, LocalFlowEstimator};
pub use metrics::{
    circular_std, direction_modes, pearson_correlation, realtime_check, required_buffer_length,
    DirectionStats, RateReport,
};
pub use params::{ArmsParams, WindowEdges};
pub use synth::{generate_bar_square, BarSquareScene, MotionSegment, SceneObject};
