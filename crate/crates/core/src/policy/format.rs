//! Text forms of a policy.
//!
//! Compact form, used in logs and accepted on the command line:
//!
//! ```text
//! (P, 1, 0.5)(D_adv, 4, 0.4) | (D_v, 3, 0.2)(R, 1, 0.5) | (R, 3, 0.9)(D_adp, 1, 0.5) | (D_p, 2, 0.3)(D_adp, 2, 0.1)
//! ```
//!
//! Machine form is a JSON document with fields `type`, `n` and `p` per
//! operation (see [`PolicyDocument`]).

use serde::{Deserialize, Serialize};

use super::{Operation, Policy, Probability, SubPolicy, MAX_CHANGES, OPS_PER_SUB_POLICY, SUB_POLICIES};
use crate::ops::OperationType;
use crate::{Error, Result};

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::PolicySyntax {
            column: self.column(),
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(found) if found == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(found) => Err(self.error(format!("expected `{c}`, found `{found}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of input"))),
        }
    }

    /// Text up to the next `,` or `)`, trimmed.
    fn field(&mut self) -> (usize, &'a str) {
        self.skip_ws();
        let column = self.column();
        let rest = self.rest();
        let end = rest.find([',', ')']).unwrap_or(rest.len());
        self.pos += end;
        (column, rest[..end].trim_end())
    }

    fn operation(&mut self) -> Result<Operation> {
        self.expect('(')?;
        let (col, mnemonic) = self.field();
        let op_type = OperationType::from_mnemonic(mnemonic).ok_or_else(|| Error::PolicySyntax {
            column: col,
            message: format!("unknown operation `{mnemonic}`"),
        })?;
        self.expect(',')?;
        let (col, count) = self.field();
        let n_changes = count
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=MAX_CHANGES).contains(n))
            .ok_or_else(|| Error::PolicySyntax {
                column: col,
                message: format!("number of changes `{count}` is not in 1..={MAX_CHANGES}"),
            })?;
        self.expect(',')?;
        let (col, prob) = self.field();
        let probability = prob
            .parse::<f64>()
            .ok()
            .and_then(Probability::from_value)
            .ok_or_else(|| Error::PolicySyntax {
                column: col,
                message: format!("probability `{prob}` is not one of 0.1, 0.2, ..., 1.0"),
            })?;
        self.expect(')')?;
        Ok(Operation::with_probability(op_type, n_changes, probability).expect("validated"))
    }

    fn subpolicy(&mut self) -> Result<SubPolicy> {
        let first = self.operation()?;
        let second = self.operation()?;
        Ok(SubPolicy::new(first, second))
    }

    fn finish(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }
}

/// Parses a single operation such as `(R, 4, 1.0)`.
pub fn parse_operation(text: &str) -> Result<Operation> {
    let mut cursor = Cursor::new(text);
    let op = cursor.operation()?;
    cursor.finish()?;
    Ok(op)
}

/// Parses one sub-policy such as `(D_v, 3, 0.2)(R, 1, 0.5)`.
pub fn parse_subpolicy(text: &str) -> Result<SubPolicy> {
    let mut cursor = Cursor::new(text);
    let sub = cursor.subpolicy()?;
    cursor.finish()?;
    Ok(sub)
}

fn parse_subpolicies(text: &str) -> Result<Vec<SubPolicy>> {
    let mut cursor = Cursor::new(text);
    let mut subs = vec![cursor.subpolicy()?];
    while !cursor.at_end() {
        if cursor.peek() == Some('|') {
            cursor.expect('|')?;
        }
        subs.push(cursor.subpolicy()?);
    }
    Ok(subs)
}

/// Parses the compact form of a full policy: four sub-policies separated by
/// `|` or whitespace.
pub fn parse_policy(text: &str) -> Result<Policy> {
    let subs = parse_subpolicies(text)?;
    let count = subs.len();
    let subs: [SubPolicy; SUB_POLICIES] = subs.try_into().map_err(|_| Error::PolicySyntax {
        column: 1,
        message: format!("a policy has {SUB_POLICIES} sub-policies, found {count}"),
    })?;
    Ok(Policy::new(subs))
}

/// Reads a policy file: a JSON [`PolicyDocument`], or compact text holding
/// either four sub-policies or a single sub-policy (used for all four
/// slots).
pub fn parse_policy_file(text: &str) -> Result<Policy> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let doc: PolicyDocument = serde_json::from_str(trimmed)?;
        return doc.to_policy();
    }
    let subs = parse_subpolicies(trimmed)?;
    match subs.len() {
        1 => Ok(Policy::repeated(subs[0])),
        SUB_POLICIES => Ok(Policy::new(subs.try_into().expect("length checked"))),
        n => Err(Error::PolicySyntax {
            column: 1,
            message: format!("expected 1 or {SUB_POLICIES} sub-policies, found {n}"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationDocument {
    #[serde(rename = "type")]
    pub op_type: String,
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPolicyDocument {
    pub ops: Vec<OperationDocument>,
}

/// Structured policy file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub version: u32,
    pub sub_policies: Vec<SubPolicyDocument>,
}

impl PolicyDocument {
    pub const VERSION: u32 = 1;

    pub fn from_policy(policy: &Policy) -> Self {
        PolicyDocument {
            version: Self::VERSION,
            sub_policies: policy
                .sub_policies
                .iter()
                .map(|sub| SubPolicyDocument {
                    ops: sub
                        .ops
                        .iter()
                        .map(|op| OperationDocument {
                            op_type: op.op_type.mnemonic().to_string(),
                            n: op.n_changes(),
                            p: op.probability.value(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_policy(&self) -> Result<Policy> {
        if self.version != Self::VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported policy document version {}",
                self.version
            )));
        }
        if self.sub_policies.len() != SUB_POLICIES {
            return Err(Error::InvalidArgument(format!(
                "a policy has {SUB_POLICIES} sub-policies, found {}",
                self.sub_policies.len()
            )));
        }
        let mut subs = Vec::with_capacity(SUB_POLICIES);
        for (i, sub) in self.sub_policies.iter().enumerate() {
            if sub.ops.len() != OPS_PER_SUB_POLICY {
                return Err(Error::InvalidArgument(format!(
                    "sub-policy {i} has {} operations, expected {OPS_PER_SUB_POLICY}",
                    sub.ops.len()
                )));
            }
            let ops = sub
                .ops
                .iter()
                .enumerate()
                .map(|(j, op)| {
                    let op_type = OperationType::from_mnemonic(&op.op_type).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "sub-policy {i} operation {j}: unknown type `{}`",
                            op.op_type
                        ))
                    })?;
                    Operation::new(op_type, op.n, op.p).map_err(|e| {
                        Error::InvalidArgument(format!("sub-policy {i} operation {j}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            subs.push(SubPolicy::new(ops[0], ops[1]));
        }
        Ok(Policy::new(subs.try_into().expect("length checked")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Renders policies as a table with one column per sub-policy and two rows
/// (one per operation) per policy.
pub fn render_table(policies: &[Policy]) -> String {
    let cell = |op: &Operation| format!("{}, {}, {}", op.op_type.mnemonic(), op.n_changes(), op.probability);
    let headers: Vec<String> = (1..=SUB_POLICIES).map(|i| format!("Sub-policy{i}")).collect();
    let mut width = headers.iter().map(String::len).max().unwrap_or(0);
    for policy in policies {
        for op in policy.operations() {
            width = width.max(cell(op).len());
        }
    }
    let row = |cells: &[String]| {
        cells
            .iter()
            .map(|c| format!("{c:<width$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule = "-".repeat(SUB_POLICIES * width + (SUB_POLICIES - 1) * 3);
    let mut out = String::new();
    out.push_str(&row(&headers));
    out.push('\n');
    for policy in policies {
        out.push_str(&rule);
        out.push('\n');
        for op_index in 0..OPS_PER_SUB_POLICY {
            let cells: Vec<String> = policy
                .sub_policies
                .iter()
                .map(|sub| cell(&sub.ops[op_index]))
                .collect();
            out.push_str(&row(&cells));
            out.push('\n');
        }
    }
    out
}
