//! Shared benchmark fixtures: the reference Bar-Square local-flow stream and
//! engines pre-filled with part of it.

use arms_core::pipeline::{EngineKind, FlowEngine};
use arms_core::synth::DEFAULT_SEED;
use arms_core::{
    local_flow_stream, ArmsParams, BarSquareScene, LocalFlowConfig, LocalFlowEvent, RawEvent,
    SensorGeometry,
};

/// Events pushed through an engine before measuring, so the recent-flow
/// buffer is full and the frame is populated.
pub const WARM_UP: usize = 4000;

pub struct Fixture {
    pub geometry: SensorGeometry,
    pub raw: Vec<RawEvent>,
    pub flow: Vec<LocalFlowEvent>,
}

impl Fixture {
    /// The benchmark scene with the default seed, through the default
    /// local-flow front end.
    pub fn bar_square() -> Self {
        let scene = BarSquareScene::benchmark(DEFAULT_SEED);
        let raw = scene.events().expect("benchmark scene is valid");
        let flow = local_flow_stream(&raw, scene.geometry, LocalFlowConfig::default())
            .expect("in-bounds events");
        Self {
            geometry: scene.geometry,
            raw,
            flow,
        }
    }

    /// `len` events following the warm-up prefix.
    pub fn measured(&self, len: usize) -> &[LocalFlowEvent] {
        &self.flow[WARM_UP..WARM_UP + len]
    }

    /// Engine that has already processed the warm-up prefix.
    pub fn warm_engine(&self, kind: EngineKind, params: ArmsParams) -> FlowEngine {
        let mut engine = FlowEngine::new(kind, params, self.geometry, 1).expect("valid parameters");
        engine.run(&self.flow[..WARM_UP]).expect("warm-up runs");
        engine
    }
}

/// Default parameters with selected fields replaced.
pub fn params(w_max: u32, num_windows: usize, buffer_len: usize, batch: usize) -> ArmsParams {
    ArmsParams {
        w_max,
        num_windows,
        buffer_len,
        batch,
        ..ArmsParams::default()
    }
}
