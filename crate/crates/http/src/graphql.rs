//! Typed GitHub GraphQL queries. Each query pairs its document with the Rust types of its
//! variables and response data, so a shape mismatch fails at decode time in one place.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub trait Query {
    const OPERATION: &'static str;
    const DOCUMENT: &'static str;
    type Variables: Serialize + Send + Sync;
    type Data: DeserializeOwned;
}

#[derive(Serialize)]
pub struct Request<'a, V> {
    pub query: &'a str,
    #[serde(rename = "operationName")]
    pub operation_name: &'a str,
    pub variables: &'a V,
}

#[derive(Deserialize)]
pub struct Response<D> {
    pub data: Option<D>,
    #[serde(default)]
    pub errors: Vec<ResponseError>,
}

#[derive(Debug, Deserialize)]
pub struct ResponseError {
    pub message: String,
    #[serde(default, rename = "type")]
    pub kind: Option<String>,
}

const PR_FIELDS: &str = "
fragment PrFields on PullRequest {
  number title body
  author { login }
  baseRefName headRefOid
  headRepository { nameWithOwner }
  isDraft state mergeable
  labels(first: 100) { nodes { name } }
  milestone { number title description }
  assignees(first: 50) { nodes { login } }
  latestOpinionatedReviews(first: 100) { nodes { author { login } state } }
}";

#[derive(Debug, Deserialize)]
pub struct Login {
    pub login: String,
}

#[derive(Debug, Deserialize)]
pub struct Nodes<T> {
    pub nodes: Vec<T>,
}

#[derive(Debug, Deserialize)]
pub struct Named {
    pub name: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepoName {
    pub name_with_owner: String,
}

#[derive(Debug, Deserialize)]
pub struct Milestone {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct Review {
    pub author: Option<Login>,
    pub state: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrNode {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub author: Option<Login>,
    pub base_ref_name: String,
    pub head_ref_oid: String,
    pub head_repository: Option<RepoName>,
    pub is_draft: bool,
    pub state: String,
    pub mergeable: String,
    pub labels: Nodes<Named>,
    pub milestone: Option<Milestone>,
    pub assignees: Nodes<Login>,
    pub latest_opinionated_reviews: Nodes<Review>,
}

#[derive(Serialize)]
pub struct PrVariables {
    pub owner: String,
    pub name: String,
    pub number: u64,
}

pub struct PullRequestQuery;

#[derive(Deserialize)]
pub struct RepositoryOf<T> {
    pub repository: Option<T>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrHolder<T> {
    pub pull_request: Option<T>,
}

impl Query for PullRequestQuery {
    const OPERATION: &'static str = "PullRequest";
    const DOCUMENT: &'static str = concat!(
        "query PullRequest($owner: String!, $name: String!, $number: Int!) {\n",
        "  repository(owner: $owner, name: $name) { pullRequest(number: $number) { ...PrFields } }\n",
        "}\n"
    );
    type Variables = PrVariables;
    type Data = RepositoryOf<PrHolder<PrNode>>;
}

#[derive(Serialize)]
pub struct LabelVariables {
    pub owner: String,
    pub name: String,
    pub label: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrList {
    pub pull_requests: Nodes<PrNode>,
}

pub struct OpenPullRequestsWithLabel;

impl Query for OpenPullRequestsWithLabel {
    const OPERATION: &'static str = "OpenPullRequestsWithLabel";
    const DOCUMENT: &'static str = concat!(
        "query OpenPullRequestsWithLabel($owner: String!, $name: String!, $label: String!) {\n",
        "  repository(owner: $owner, name: $name) {\n",
        "    pullRequests(states: OPEN, labels: [$label], first: 100) { nodes { ...PrFields } }\n",
        "  }\n",
        "}\n"
    );
    type Variables = LabelVariables;
    type Data = RepositoryOf<PrList>;
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabeledEvent {
    // Items of other types decode as empty objects.
    #[serde(default)]
    pub created_at: Option<chrono::DateTime<chrono::Utc>>,
    #[serde(default)]
    pub label: Option<Named>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timeline {
    pub timeline_items: Nodes<LabeledEvent>,
}

pub struct LabelTimeline;

impl Query for LabelTimeline {
    const OPERATION: &'static str = "LabelTimeline";
    const DOCUMENT: &'static str = concat!(
        "query LabelTimeline($owner: String!, $name: String!, $number: Int!) {\n",
        "  repository(owner: $owner, name: $name) { pullRequest(number: $number) {\n",
        "    timelineItems(itemTypes: [LABELED_EVENT], last: 100) {\n",
        "      nodes { ... on LabeledEvent { createdAt label { name } } }\n",
        "    }\n",
        "  } }\n",
        "}\n"
    );
    type Variables = PrVariables;
    type Data = RepositoryOf<PrHolder<Timeline>>;
}

/// Document text as sent, with the shared fragment appended when used.
pub fn document<Q: Query>() -> String {
    if Q::DOCUMENT.contains("...PrFields") {
        format!("{}{PR_FIELDS}\n", Q::DOCUMENT)
    } else {
        Q::DOCUMENT.to_string()
    }
}
