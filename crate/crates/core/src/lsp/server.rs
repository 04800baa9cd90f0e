use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde_json::{json, Value};

use super::{hover, DocumentState, Position};
use crate::docstore::DocDatabase;
use crate::taxonomy::PropertyCatalog;

const PARSE_ERROR: i64 = -32700;
const INVALID_REQUEST: i64 = -32600;
const METHOD_NOT_FOUND: i64 = -32601;
const INVALID_PARAMS: i64 = -32602;
const SERVER_NOT_INITIALIZED: i64 = -32002;
const REQUEST_FAILED: i64 = -32803;

#[derive(Debug, thiserror::Error)]
pub enum FramingError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing Content-Length header")]
    MissingLength,
    #[error("bad header line {0:?}")]
    BadHeader(String),
    #[error("stream ended inside a message")]
    Truncated,
}

/// Reads one framed message body. `Ok(None)` at a clean end of stream.
pub fn read_message(input: &mut impl BufRead) -> Result<Option<Vec<u8>>, FramingError> {
    let mut length = None;
    let mut first = true;
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return if first { Ok(None) } else { Err(FramingError::Truncated) };
        }
        first = false;
        let line = line.strip_suffix('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).ok_or(FramingError::Truncated)?;
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').ok_or_else(|| FramingError::BadHeader(line.to_string()))?;
        if name.trim().eq_ignore_ascii_case("content-length") {
            length = Some(value.trim().parse::<usize>().map_err(|_| FramingError::BadHeader(line.to_string()))?);
        }
    }
    let n = length.ok_or(FramingError::MissingLength)?;
    let mut body = vec![0; n];
    input.read_exact(&mut body).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => FramingError::Truncated,
        _ => e.into(),
    })?;
    Ok(Some(body))
}

pub fn write_message(output: &mut impl Write, value: &Value) -> std::io::Result<()> {
    let body = serde_json::to_vec(value)?;
    write!(output, "Content-Length: {}\r\n\r\n", body.len())?;
    output.write_all(&body)?;
    output.flush()
}

#[derive(Default)]
struct Session {
    initialized: bool,
    shutdown: bool,
    documents: BTreeMap<String, DocumentState>,
}

type Reply = Result<Value, (i64, String)>;

fn error(code: i64, message: impl Into<String>) -> Reply {
    Err((code, message.into()))
}

/// Runs one session until `exit` or end of input and returns the exit status.
pub fn serve(mut input: impl BufRead, mut output: impl Write, db: &DocDatabase, catalog: &PropertyCatalog) -> i32 {
    let mut session = Session::default();
    loop {
        let body = match read_message(&mut input) {
            Ok(Some(body)) => body,
            Ok(None) => return 1,
            Err(_) => return 1,
        };
        let message: Value = match serde_json::from_slice(&body) {
            Ok(v) => v,
            Err(e) => {
                let reply = response(Value::Null, error(PARSE_ERROR, e.to_string()));
                if write_message(&mut output, &reply).is_err() {
                    return 1;
                }
                continue;
            }
        };
        let method = message.get("method").and_then(Value::as_str).map(str::to_owned);
        let id = message.get("id").cloned();
        let params = message.get("params").cloned().unwrap_or(Value::Null);
        let Some(method) = method else {
            if let Some(id) = id {
                let reply = response(id, error(INVALID_REQUEST, "missing method"));
                if write_message(&mut output, &reply).is_err() {
                    return 1;
                }
            }
            continue;
        };
        if method == "exit" {
            return if session.shutdown { 0 } else { 1 };
        }
        let reply = session.dispatch(&method, &params, id.is_some(), db, catalog);
        if let Some(id) = id {
            if write_message(&mut output, &response(id, reply)).is_err() {
                return 1;
            }
        }
    }
}

fn response(id: Value, reply: Reply) -> Value {
    match reply {
        Ok(result) => json!({"jsonrpc": "2.0", "id": id, "result": result}),
        Err((code, message)) => json!({"jsonrpc": "2.0", "id": id, "error": {"code": code, "message": message}}),
    }
}

impl Session {
    fn dispatch(&mut self, method: &str, params: &Value, request: bool, db: &DocDatabase, catalog: &PropertyCatalog) -> Reply {
        if self.shutdown {
            return error(INVALID_REQUEST, "server is shut down");
        }
        if !self.initialized && method != "initialize" {
            return error(SERVER_NOT_INITIALIZED, "server not initialized");
        }
        match method {
            "initialize" => {
                if self.initialized {
                    return error(INVALID_REQUEST, "already initialized");
                }
                self.initialized = true;
                Ok(json!({
                    "capabilities": {"hoverProvider": true, "textDocumentSync": 1},
                    "serverInfo": {"name": "unsafe-props", "version": env!("CARGO_PKG_VERSION")}
                }))
            }
            "initialized" => Ok(Value::Null),
            "shutdown" => {
                self.shutdown = true;
                Ok(Value::Null)
            }
            "textDocument/didOpen" => self.did_open(params),
            "textDocument/didChange" => self.did_change(params),
            "textDocument/didClose" => {
                let uri = uri_of(params, "textDocument")?;
                self.documents.remove(&uri);
                Ok(Value::Null)
            }
            "textDocument/hover" => self.hover(params, db, catalog),
            _ if !request || method.starts_with("$/") => Ok(Value::Null),
            _ => error(METHOD_NOT_FOUND, format!("method not found: {method}")),
        }
    }

    fn did_open(&mut self, params: &Value) -> Reply {
        let uri = uri_of(params, "textDocument")?;
        let doc = &params["textDocument"];
        let text = doc["text"].as_str().ok_or((INVALID_PARAMS, "missing text".to_string()))?;
        let version = doc["version"].as_i64().unwrap_or(0);
        self.documents.insert(uri.clone(), DocumentState { uri, text: text.to_string(), version });
        Ok(Value::Null)
    }

    fn did_change(&mut self, params: &Value) -> Reply {
        let uri = uri_of(params, "textDocument")?;
        let version = params["textDocument"]["version"].as_i64().ok_or((INVALID_PARAMS, "missing version".to_string()))?;
        let Some(doc) = self.documents.get_mut(&uri) else { return error(REQUEST_FAILED, "document not open") };
        if version <= doc.version {
            return error(INVALID_PARAMS, format!("stale version {version}, have {}", doc.version));
        }
        let changes = params["contentChanges"].as_array().ok_or((INVALID_PARAMS, "missing contentChanges".to_string()))?;
        let Some(text) = changes.last().and_then(|c| c["text"].as_str()) else {
            return error(INVALID_PARAMS, "expected a full-text change");
        };
        doc.text = text.to_string();
        doc.version = version;
        Ok(Value::Null)
    }

    fn hover(&self, params: &Value, db: &DocDatabase, catalog: &PropertyCatalog) -> Reply {
        let uri = uri_of(params, "textDocument")?;
        let position: Position = serde_json::from_value(params["position"].clone()).map_err(|e| (INVALID_PARAMS, e.to_string()))?;
        let Some(doc) = self.documents.get(&uri) else { return error(REQUEST_FAILED, "document not open") };
        match hover(db, catalog, doc, position) {
            Ok(Some(h)) => Ok(json!({
                "contents": {"kind": "markdown", "value": h.contents},
                "range": h.range,
            })),
            Ok(None) => Ok(Value::Null),
            Err(e) => error(INVALID_PARAMS, e.to_string()),
        }
    }
}

fn uri_of(params: &Value, key: &str) -> Result<String, (i64, String)> {
    params[key]["uri"].as_str().map(str::to_owned).ok_or((INVALID_PARAMS, "missing uri".to_string()))
}
