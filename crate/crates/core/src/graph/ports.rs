use crate::context::Schema;

use super::model::{
    Accepts, LogicBuiltin, MapperKind, NodeConfig, NodeKind, Port, Ports, Predicate, TeleMcpConfig,
};

/// Ports a node gets when its document omits them.
pub fn default_ports(config: &NodeConfig) -> Ports {
    match config {
        NodeConfig::Input(_) => Ports {
            inputs: vec![],
            outputs: vec![Port::new("artifact", Accepts::Any)],
        },
        NodeConfig::Agent(cfg) => Ports {
            inputs: vec![Port::new("context", Accepts::Any).multi().required()],
            outputs: vec![Port::new("reply", Accepts::one(cfg.reply_schema))],
        },
        NodeConfig::Telemcp(cfg) => Ports {
            inputs: vec![Port::new("raw", Accepts::Any).required()],
            outputs: vec![Port::new("objects", mapper_output(cfg))],
        },
        NodeConfig::Logic(cfg) => match cfg.builtin {
            LogicBuiltin::SlidingWindowValidation => Ports {
                inputs: vec![
                    Port::new("flow", Accepts::one(Schema::ProceduralFlow)).required(),
                    Port::new("trace", Accepts::one(Schema::MessageRecord)).required(),
                ],
                outputs: vec![
                    Port::new("verdicts", Accepts::one(Schema::ValidationVerdict)),
                    Port::new("summary", Accepts::one(Schema::TextBlob)),
                ],
            },
            LogicBuiltin::PcapProcessing => Ports {
                inputs: cfg
                    .mappers
                    .iter()
                    .map(|m| Port::new(&m.port, Accepts::Any))
                    .collect(),
                outputs: vec![Port::new("records", Accepts::one(Schema::MessageRecord))],
            },
            LogicBuiltin::KeywordRetrieval => Ports {
                inputs: vec![
                    Port::new("query", Accepts::one(Schema::TextBlob)).required(),
                    Port::new("corpus", Accepts::one(Schema::TextBlob))
                        .multi()
                        .required(),
                ],
                outputs: vec![Port::new("snippets", Accepts::one(Schema::TextBlob))],
            },
            LogicBuiltin::Custom => Ports {
                inputs: vec![Port::new("in", Accepts::Any).multi()],
                outputs: vec![Port::new("out", Accepts::Any)],
            },
        },
        NodeConfig::Conditional(cfg) => Ports {
            inputs: vec![Port::new("subject", Accepts::Any).required()],
            outputs: cfg
                .branches
                .iter()
                .map(|b| Port::new(b, Accepts::Any))
                .collect(),
        },
        NodeConfig::Output(_) => Ports {
            inputs: vec![Port::new("sink", Accepts::Any).multi()],
            outputs: vec![],
        },
    }
}

/// Port layout for a kind with its simplest configuration. Conditional
/// defaults to the human-approval branches; logic to `custom`.
pub fn default_ports_for_kind(kind: NodeKind) -> Ports {
    use super::model::*;
    let config = match kind {
        NodeKind::Input => NodeConfig::Input(InputConfig {
            media_type: MediaType::Text,
            description: String::new(),
        }),
        NodeKind::Agent => NodeConfig::Agent(AgentNodeConfig {
            agent: crate::agents::AgentSpec::new("agent", crate::agents::AgentRole::Chat),
            prompt_template: String::new(),
            reply_schema: Schema::TextBlob,
        }),
        NodeKind::Telemcp => NodeConfig::Telemcp(TeleMcpConfig {
            mapper: MapperKind::Passthrough,
            selector: None,
            invert_direction: false,
        }),
        NodeKind::Logic => NodeConfig::Logic(LogicConfig {
            builtin: LogicBuiltin::Custom,
            params: Default::default(),
            script_ref: None,
            agent: None,
            mappers: vec![],
            selector: None,
        }),
        NodeKind::Conditional => NodeConfig::Conditional(ConditionalConfig {
            predicate: Predicate::HumanApproval,
            branches: vec!["approve".into(), "reject".into()],
            strict: false,
        }),
        NodeKind::Output => NodeConfig::Output(OutputConfig::default()),
    };
    default_ports(&config)
}

fn mapper_output(cfg: &TeleMcpConfig) -> Accepts {
    if let Some(sel) = &cfg.selector {
        return Accepts::one(sel.schema);
    }
    match cfg.mapper {
        MapperKind::DecodedTrace | MapperKind::SrsranLog | MapperKind::Pcap => {
            Accepts::one(Schema::MessageRecord)
        }
        MapperKind::Passthrough => Accepts::Any,
    }
}

/// Branch names a predicate allows, and which of them are mandatory.
pub fn predicate_branches(p: Predicate) -> (&'static [&'static str], &'static [&'static str]) {
    match p {
        Predicate::HumanApproval => (&["approve", "reject"], &["approve", "reject"]),
        Predicate::VerdictBranch => (&["pass", "fail", "partial"], &["pass", "fail"]),
    }
}
