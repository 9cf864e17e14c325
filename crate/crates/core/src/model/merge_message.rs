//! Merge-commit message format. Release-branch tracking relies on being able to read
//! the PR number back out of the subject line.

use super::PullRequest;

const SUBJECT_PREFIX: &str = "Merge PR #";

/// Renders `Merge PR #<n>: <title>`, followed by one `Reviewed-by:` trailer per approver.
pub fn render_merge_message(pr: &PullRequest) -> String {
    let mut message = format!("{SUBJECT_PREFIX}{}: {}", pr.number, pr.title);
    let mut approvers = pr.approvers().peekable();
    if approvers.peek().is_some() {
        message.push('\n');
        for login in approvers {
            message.push_str("\nReviewed-by: ");
            message.push_str(login);
        }
    }
    message
}

/// Returns the PR number iff `subject` starts with `Merge PR #<digits>: `.
pub fn parse_merge_subject(subject: &str) -> Option<u64> {
    let rest = subject.strip_prefix(SUBJECT_PREFIX)?;
    let (digits, _) = rest.split_once(": ")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}
