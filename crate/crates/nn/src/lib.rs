//! Fixed-point particle-count classifier for RICH detector events: a dense
//! 64→64→16→4 network with ⟨8,1⟩ parameters and ⟨16,6⟩ activations, an
//! exact integer oracle, a float reference, the pipeline timing model and
//! the runtime kernels that put it on the fabric.

pub mod event;
pub mod float_ref;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod task;
pub mod timing;

pub use event::{pack_result, unpack_result, EventInput, EventsFile};
pub use float_ref::{error_bound, infer_float, FloatInference};
pub use model::{argmax, DenseLayer, DenseModel, Inference, LayerFile, ModelError, ParamsFile, INPUTS};
pub use oracle::OracleNet;
pub use pipeline::{run_pipeline, PipelineRun};
pub use task::{register, synthetic_event, NnTask, PmtEventsTask};
pub use timing::{PipelineTiming, TimingError};
