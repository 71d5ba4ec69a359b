//! Line-delimited JSON protocol for cross-checking stub oracles against an
//! external validity oracle running in a child process.
//!
//! Each request is `{"id", "op", "args"}` on one line; each response is
//! `{"id", "valid", "error"}` on one line, in request order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{GenerationConfig, Generator};
use crate::registry::{OperatorSpec, Registry, RegistryError};
use crate::value::{InputTuple, Value};

/// Operators the external oracle knows how to run.
pub const MAPPED_OPS: [&str; 10] = [
    "bmm",
    "dot",
    "broadcast_to",
    "cartesian_prod",
    "max_pool2d",
    "top_k",
    "split",
    "index_select",
    "addr",
    "pairwise_distance",
];

pub const UNSUPPORTED: &str = "UNSUPPORTED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub id: u64,
    pub op: String,
    pub args: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    /// `None` answers a line that could not be parsed.
    pub id: Option<u64>,
    pub valid: bool,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("could not start bridge `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bridge i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bridge closed its output after {0} response(s)")]
    Truncated(usize),
    #[error("malformed bridge response `{line}`: {msg}")]
    Malformed { line: String, msg: String },
    #[error("bridge answered id {found:?} where {expected} was due")]
    OutOfOrder { expected: u64, found: Option<u64> },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Gen(#[from] crate::datagen::GenError),
}

/// Answers requests from `input` on `output` until end of input, flushing
/// after every response. Unparseable lines get an error response.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    mut answer: impl FnMut(&BridgeRequest) -> BridgeResponse,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<BridgeRequest>(&line) {
            Ok(req) => answer(&req),
            Err(e) => BridgeResponse {
                id: None,
                valid: false,
                error: Some(format!("malformed request: {e}")),
            },
        };
        serde_json::to_writer(&mut output, &response).map_err(std::io::Error::from)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Answers with the registry's own oracles; unknown operators get
/// [`UNSUPPORTED`].
pub fn registry_responder(registry: &Registry) -> impl FnMut(&BridgeRequest) -> BridgeResponse + '_ {
    move |req| {
        let unsupported = || BridgeResponse {
            id: Some(req.id),
            valid: false,
            error: Some(UNSUPPORTED.into()),
        };
        let Ok(op) = registry.get(&req.op) else {
            return unsupported();
        };
        match op.validate(&InputTuple::new(req.args.clone())) {
            Ok(outcome) => BridgeResponse {
                id: Some(req.id),
                valid: outcome.is_valid(),
                error: outcome.message().map(str::to_string),
            },
            Err(e) => BridgeResponse {
                id: Some(req.id),
                valid: false,
                error: Some(e.to_string()),
            },
        }
    }
}

pub struct BridgeClient {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl BridgeClient {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, BridgeError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BridgeError::Spawn {
                program: program.to_string(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(BridgeClient { child, stdin, stdout })
    }

    /// Sends every request from a writer thread while reading responses, so
    /// neither side blocks on a full pipe.
    pub fn exchange(&mut self, requests: &[BridgeRequest]) -> Result<Vec<BridgeResponse>, BridgeError> {
        let mut stdin = self.stdin.take().ok_or(BridgeError::Truncated(0))?;
        let lines: Vec<String> = requests
            .iter()
            .map(|r| serde_json::to_string(r).expect("requests serialize"))
            .collect();
        let writer = thread::spawn(move || -> std::io::Result<ChildStdin> {
            for l in &lines {
                stdin.write_all(l.as_bytes())?;
                stdin.write_all(b"\n")?;
            }
            stdin.flush()?;
            Ok(stdin)
        });
        let mut responses = Vec::with_capacity(requests.len());
        let mut line = String::new();
        for req in requests {
            line.clear();
            if self.stdout.read_line(&mut line)? == 0 {
                return Err(BridgeError::Truncated(responses.len()));
            }
            let resp: BridgeResponse = serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Malformed {
                line: line.trim_end().to_string(),
                msg: e.to_string(),
            })?;
            if resp.id != Some(req.id) {
                return Err(BridgeError::OutOfOrder {
                    expected: req.id,
                    found: resp.id,
                });
            }
            responses.push(resp);
        }
        let stdin = writer.join().expect("writer thread")?;
        self.stdin = Some(stdin);
        Ok(responses)
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub id: u64,
    pub args: Vec<Value>,
    pub stub_valid: bool,
    pub bridge_valid: bool,
    pub bridge_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorAgreement {
    pub operator: String,
    pub total: u64,
    pub agree: u64,
    pub unsupported: bool,
    pub agreement: Option<f64>,
    pub disagreements: Vec<Disagreement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub seed: u64,
    pub per_operator: Vec<OperatorAgreement>,
    pub total: u64,
    pub agree: u64,
    pub agreement: Option<f64>,
}

/// Sends `n` seeded random tuples per operator and compares the valid bit
/// only; message text is never compared.
pub fn xcheck(
    registry: &Registry,
    ops: &[&str],
    client: &mut BridgeClient,
    n: usize,
    seed: u64,
) -> Result<AgreementReport, BridgeError> {
    let mut per_operator = Vec::new();
    let mut next_id = 0u64;
    for &name in ops {
        let op: &OperatorSpec = registry.get(name)?;
        let cfg = GenerationConfig::new(n, crate::artifact::child_seed(seed, name, 0));
        let tuples = Generator::Random.generate(op, &cfg)?;
        let requests: Vec<BridgeRequest> = tuples
            .iter()
            .map(|t| {
                next_id += 1;
                BridgeRequest {
                    id: next_id,
                    op: name.to_string(),
                    args: t.values().to_vec(),
                }
            })
            .collect();
        let responses = client.exchange(&requests)?;
        let unsupported = responses.iter().any(|r| r.error.as_deref() == Some(UNSUPPORTED));
        let mut agree = 0;
        let mut disagreements = Vec::new();
        for (req, resp) in requests.into_iter().zip(responses) {
            let stub_valid = op
                .validate(&InputTuple::new(req.args.clone()))
                .map(|o| o.is_valid())
                .unwrap_or(false);
            if unsupported {
                continue;
            }
            if stub_valid == resp.valid {
                agree += 1;
            } else {
                disagreements.push(Disagreement {
                    id: req.id,
                    args: req.args,
                    stub_valid,
                    bridge_valid: resp.valid,
                    bridge_error: resp.error,
                });
            }
        }
        let total = n as u64;
        per_operator.push(OperatorAgreement {
            operator: name.to_string(),
            total,
            agree,
            unsupported,
            agreement: crate::metrics::ratio(agree, total).filter(|_| !unsupported),
            disagreements,
        });
    }
    let counted = per_operator.iter().filter(|o| !o.unsupported);
    let (total, agree) = counted.fold((0, 0), |(t, a), o| (t + o.total, a + o.agree));
    Ok(AgreementReport {
        seed,
        per_operator,
        total,
        agree,
        agreement: crate::metrics::ratio(agree, total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(input: &str) -> Vec<BridgeResponse> {
        let reg = Registry::builtin();
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, registry_responder(&reg)).unwrap();
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    #[test]
    fn serve_answers_worked_examples() {
        let input = concat!(
            r#"{"id":1,"op":"bmm","args":[{"kind":"tensor","shape":[10,3,4]},{"kind":"tensor","shape":[10,4]}]}"#,
            "\n",
            r#"{"id":2,"op":"bmm","args":[{"kind":"tensor","shape":[10,3,4]},{"kind":"tensor","shape":[10,4,5]}]}"#,
            "\n",
            r#"{"id":3,"op":"foo","args":[]}"#,
            "\nnot json\n"
        );
        let r = roundtrip(input);
        assert_eq!(r.len(), 4);
        assert_eq!((r[0].id, r[0].valid), (Some(1), false));
        assert!(r[0].error.as_deref().unwrap().contains("3D"));
        assert_eq!((r[1].id, r[1].valid, r[1].error.as_deref()), (Some(2), true, None));
        assert_eq!(r[2].error.as_deref(), Some(UNSUPPORTED));
        assert_eq!(r[3].id, None);
    }

    #[test]
    fn request_wire_format() {
        let req = BridgeRequest {
            id: 7,
            op: "dot".into(),
            args: vec![Value::tensor([3]), Value::tensor([3])],
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"id":7,"op":"dot","args":[{"kind":"tensor","shape":[3]},{"kind":"tensor","shape":[3]}]}"#
        );
    }
}
