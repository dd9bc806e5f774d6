//! Run execution: topological scheduling, builtins, conditional routing,
//! approval pause/resume and reports.

pub mod artifacts;
pub mod clock;
pub mod mapping;
pub mod report;
pub mod retrieval;
pub mod run;
pub mod state;
pub mod validation;

pub use artifacts::{ArtifactResolver, DefaultResolver};
pub use clock::{Clock, SteppingClock, SystemClock};
pub use mapping::{apply_mapper, merge_records, merge_tagged, MappingError};
pub use report::{export_report, Report, ReportError};
pub use retrieval::{exec_retrieval, RetrievalError, Snippet};
pub use run::{
    graph_hash, read_event_log, ApprovalError, Engine, Run, RunOptions, StartError, WrongState,
    REWORK_MEDIA_TYPE,
};
pub use state::{
    normalized_log, EventKind, GraphRef, NodeStatus, PendingApproval, RunEvent, RunState, RunStatus,
};
pub use validation::{
    aggregate, exec_validation_loop, Aggregate, LoopResult, StepFailure, SummaryDocument,
    ValidationSummary, WindowOutcome, WindowValidator, SUMMARY_MEDIA_TYPE,
};
