use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use super::{BackendError, ChatBackend, ChatRequest, Completion, GatewayError};

/// Replays a fixed list of completions in order and records every request.
///
/// Calls are serialized by an internal lock, so concurrent callers pop the
/// script in a well-defined order.
#[derive(Debug)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

#[derive(Debug)]
struct ScriptState {
    script: VecDeque<String>,
    received: Vec<ChatRequest>,
}

impl ScriptedBackend {
    pub fn new<I, S>(script: I) -> Result<Self, GatewayError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let script: VecDeque<String> = script.into_iter().map(Into::into).collect();
        if script.is_empty() {
            return Err(GatewayError::Setup("scripted backend needs at least one entry".into()));
        }
        Ok(Self {
            state: Mutex::new(ScriptState {
                script,
                received: Vec::new(),
            }),
        })
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("script lock").script.len()
    }

    /// Every request seen so far, in arrival order.
    pub fn received(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("script lock").received.clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest, model: &str) -> Result<Completion, BackendError> {
        let mut state = self.state.lock().expect("script lock");
        state.received.push(request.clone());
        match state.script.pop_front() {
            Some(text) => Ok(Completion {
                text,
                model_name: model.to_string(),
                token_usage: None,
            }),
            None => Err(BackendError::ScriptExhausted {
                calls: state.received.len(),
            }),
        }
    }
}

/// Scripts loaded from a file: either one shared script (a JSON array) or
/// one script per claim id (a JSON object of arrays).
#[derive(Debug, Clone)]
pub enum ScriptBook {
    Shared(Arc<ScriptedBackend>),
    PerClaim(HashMap<String, Vec<String>>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Shared(Vec<String>),
    PerClaim(HashMap<String, Vec<String>>),
}

impl ScriptBook {
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let file: ScriptFile = serde_json::from_str(text)
            .map_err(|e| GatewayError::Setup(format!("script file: {e}")))?;
        Ok(match file {
            ScriptFile::Shared(entries) => ScriptBook::Shared(Arc::new(ScriptedBackend::new(entries)?)),
            ScriptFile::PerClaim(map) => ScriptBook::PerClaim(map),
        })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Backend for one claim. Per-claim books hand out a fresh backend each
    /// time; shared books hand out the same one.
    pub fn backend_for(&self, claim_id: &str) -> Result<Arc<ScriptedBackend>, GatewayError> {
        match self {
            ScriptBook::Shared(backend) => Ok(backend.clone()),
            ScriptBook::PerClaim(map) => {
                let script = map
                    .get(claim_id)
                    .ok_or_else(|| GatewayError::Setup(format!("no script for claim {claim_id:?}")))?;
                Ok(Arc::new(ScriptedBackend::new(script.clone())?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Role, RunConfig};
    use crate::gateway::Gateway;
    use crate::retry::RetryPolicy;

    fn request(text: &str) -> ChatRequest {
        ChatRequest::prompt(Role::QuestionGen, text, &RunConfig::default())
    }

    #[test]
    fn echoes_script_entry() {
        let backend = ScriptedBackend::new(["A"]).unwrap();
        let out = backend.send(&request("p"), "m").unwrap();
        assert_eq!(out.text, "A");
        assert_eq!(backend.received()[0].last_text(), "p");
    }

    #[test]
    fn second_call_exhausts() {
        let gw = Gateway::new(Arc::new(ScriptedBackend::new(["A"]).unwrap())).with_retry(RetryPolicy::immediate());
        let cfg = RunConfig::default();
        assert_eq!(gw.complete(&request("1"), &cfg).unwrap().text, "A");
        let err = gw.complete(&request("2"), &cfg).unwrap_err();
        assert_eq!(
            err,
            GatewayError::ScriptExhausted {
                role: Role::QuestionGen,
                calls: 2
            }
        );
    }

    #[test]
    fn empty_script_is_rejected() {
        assert!(ScriptedBackend::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn script_book_forms() {
        let shared = ScriptBook::from_json(r#"["a", "b"]"#).unwrap();
        let one = shared.backend_for("x").unwrap();
        let two = shared.backend_for("y").unwrap();
        assert!(Arc::ptr_eq(&one, &two));

        let per = ScriptBook::from_json(r#"{"c1": ["a"], "c2": ["b"]}"#).unwrap();
        assert_eq!(per.backend_for("c2").unwrap().send(&request("p"), "m").unwrap().text, "b");
        assert!(per.backend_for("c3").is_err());
    }
}
