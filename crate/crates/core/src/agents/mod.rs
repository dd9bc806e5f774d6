//! Agent definitions, prompt rendering, verdict parsing and invocation.

pub mod invoke;
pub mod mock;
pub mod prompt;
pub mod registry;
pub mod scan;
pub mod spec;
pub mod verdict;

pub use invoke::{AgentBackend, AgentError, AgentInvoker, AgentMode, AgentReply, EndpointConfig};
pub use mock::{nearest_name, MockAgents, MockError};
pub use prompt::{
    render_prompt, render_template, ChatMessage, ChatRole, PromptBindings, PromptError,
};
pub use registry::{AgentEntry, AgentRegistry, RegistryError};
pub use spec::{AgentRole, AgentSpec, MOCK_ENDPOINT};
pub use verdict::{parse_verdict, ParsedVerdict, VerdictError, VERDICT_INSTRUCTION};
