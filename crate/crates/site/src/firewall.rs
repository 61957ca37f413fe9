//! Request-level policy in front of every agent.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Operation {
    Read,
    Write,
    Schema,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Read => "READ",
            Operation::Write => "WRITE",
            Operation::Schema => "SCHEMA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    Forward,
    Deny,
    /// The request is swallowed: no response is ever written.
    Drop,
}

/// Operation pattern of a rule; `"*"` matches every operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpPattern {
    One(Operation),
    Any(AnyMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnyMarker {
    #[serde(rename = "*")]
    Any,
}

impl OpPattern {
    pub const ANY: OpPattern = OpPattern::Any(AnyMarker::Any);

    fn matches(self, op: Operation) -> bool {
        match self {
            OpPattern::One(o) => o == op,
            OpPattern::Any(_) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// A principal name, or `"*"` for any authenticated principal.
    pub principal: String,
    pub operation: OpPattern,
    pub action: Action,
}

impl Rule {
    pub fn new(principal: &str, operation: OpPattern, action: Action) -> Self {
        Rule { principal: principal.to_string(), operation, action }
    }
}

fn deny() -> Action {
    Action::Deny
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirewallPolicy {
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default = "deny")]
    pub default: Action,
}

impl Default for FirewallPolicy {
    fn default() -> Self {
        FirewallPolicy { rules: Vec::new(), default: Action::Deny }
    }
}

impl FirewallPolicy {
    /// Forwards everything from `principal` and denies everyone else.
    pub fn only(principal: &str) -> Self {
        FirewallPolicy { rules: vec![Rule::new(principal, OpPattern::ANY, Action::Forward)], default: Action::Deny }
    }
}

/// First matching rule wins; unauthenticated callers (`None`) match no rule
/// and always receive the default action.
pub fn firewall_decide(policy: &FirewallPolicy, principal: Option<&str>, op: Operation) -> Action {
    let Some(principal) = principal else { return policy.default };
    policy
        .rules
        .iter()
        .find(|r| (r.principal == "*" || r.principal == principal) && r.operation.matches(op))
        .map(|r| r.action)
        .unwrap_or(policy.default)
}

/// Principal names and the tokens they must present.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Principals(pub BTreeMap<String, String>);

impl Principals {
    pub fn single(name: &str, token: &str) -> Self {
        Principals(BTreeMap::from([(name.to_string(), token.to_string())]))
    }

    /// The claimed principal if its token matches; an invalid or missing
    /// token makes the caller unknown.
    pub fn authenticate<'a>(&self, principal: Option<&'a str>, token: Option<&str>) -> Option<&'a str> {
        let p = principal?;
        (self.0.get(p).map(String::as_str) == Some(token?)).then_some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> FirewallPolicy {
        FirewallPolicy {
            rules: vec![
                Rule::new("mdbs-server", OpPattern::One(Operation::Read), Action::Forward),
                Rule::new("*", OpPattern::One(Operation::Write), Action::Drop),
                Rule::new("mdbs-server", OpPattern::ANY, Action::Forward),
            ],
            default: Action::Deny,
        }
    }

    #[test]
    fn first_match_wins() {
        let p = policy();
        assert_eq!(firewall_decide(&p, Some("mdbs-server"), Operation::Read), Action::Forward);
        assert_eq!(firewall_decide(&p, Some("mdbs-server"), Operation::Write), Action::Drop);
        assert_eq!(firewall_decide(&p, Some("mdbs-server"), Operation::Schema), Action::Forward);
        assert_eq!(firewall_decide(&p, Some("other"), Operation::Read), Action::Deny);
        assert_eq!(firewall_decide(&p, None, Operation::Write), Action::Deny);
    }

    #[test]
    fn tokens_authenticate() {
        let ps = Principals::single("mdbs-server", "s3cret");
        assert_eq!(ps.authenticate(Some("mdbs-server"), Some("s3cret")), Some("mdbs-server"));
        assert_eq!(ps.authenticate(Some("mdbs-server"), Some("wrong")), None);
        assert_eq!(ps.authenticate(Some("mdbs-server"), None), None);
        assert_eq!(ps.authenticate(Some("eve"), Some("s3cret")), None);
    }

    #[test]
    fn policy_json() {
        let p: FirewallPolicy = serde_json::from_str(
            r#"{"rules":[{"principal":"*","operation":"*","action":"DROP"},{"principal":"a","operation":"READ","action":"FORWARD"}]}"#,
        )
        .unwrap();
        assert_eq!(p.rules[0].operation, OpPattern::ANY);
        assert_eq!(p.rules[1].operation, OpPattern::One(Operation::Read));
        assert_eq!(p.default, Action::Deny);
        assert_eq!(serde_json::to_value(&p).unwrap()["rules"][0]["operation"], "*");
    }
}
