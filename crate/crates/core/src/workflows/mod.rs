//! The reference bot: workflows assembled from the components.

pub mod backport;
pub mod ci;
pub mod lifecycle;

use std::sync::Arc;

use crate::config::BotConfig;
use crate::engine::Registry;

/// Registry with every workflow of the reference bot, in dispatch order.
pub fn reference_bot(config: Arc<BotConfig>) -> Registry {
    let mut registry = Registry::new();
    registry
        .register(ci::CiMirror::new(config.clone()))
        .and_then(|r| r.register(ci::MirrorCleanup::new(config.clone())))
        .and_then(|r| r.register(ci::PipelineStatus::new(config.clone())))
        .and_then(|r| r.register(ci::JobReport::new(config.clone())))
        .and_then(|r| r.register(ci::MinimizationProposal::new(config.clone())))
        .and_then(|r| r.register(lifecycle::CommentCommands::new(config.clone())))
        .and_then(|r| r.register(lifecycle::StaleScan::new(config.clone())))
        .and_then(|r| r.register(backport::BackportRequest::new(config.clone())))
        .and_then(|r| r.register(backport::BackportShipped::new(config.clone())))
        .and_then(|r| r.register(backport::BackportRejection::new(config)))
        .expect("reference workflow names are unique");
    registry
}
