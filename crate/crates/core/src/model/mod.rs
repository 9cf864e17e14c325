//! Forge-agnostic domain types shared by workflows, gateways and the simulator.

mod ci;
mod event;
mod ids;
mod merge_message;
mod pr;

pub use ci::{
    truncate_head, Artifact, BoardCard, CheckConclusion, CheckReport, ChecksRollup, CiJob, JobStatus, LogRef,
    StatusReport, StatusState, MAX_SUMMARY_BYTES, TRUNCATION_MARKER,
};
pub use event::{next_tick, ColumnLocator, Event, EventKind, EventPayload, PushedCommit};
pub use ids::{PrRef, RepoRef, Sha};
pub use merge_message::{parse_merge_subject, render_merge_message};
pub use pr::{Comment, Commit, Mergeable, MilestoneRef, PrState, PullRequest, ReviewDecision, REQUEST_LABEL_PREFIX};
