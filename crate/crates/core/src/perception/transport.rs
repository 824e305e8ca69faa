//! Client sessions for each transport, and the server loops that expose any
//! [`PerceptionBackend`] over stdio or HTTP.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use crossbeam::channel::{self, Receiver, RecvTimeoutError};

use super::wire::{dispatch, dispatch_line, Request, Response};
use super::{PerceptionBackend, PerceptionError, Role};

/// One live connection to a backend. A session that returns an error is
/// discarded by the gateway and reconnected on next use.
pub trait Session: Send {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, PerceptionError>;
}

pub(crate) struct InProcessSession {
    pub backend: Arc<dyn PerceptionBackend>,
}

impl Session for InProcessSession {
    fn call(&mut self, request: &Request, _timeout: Duration) -> Result<Response, PerceptionError> {
        Ok(dispatch(self.backend.as_ref(), request))
    }
}

/// A child process speaking JSON lines on stdin/stdout.
pub(crate) struct SubprocessSession {
    role: Role,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl SubprocessSession {
    pub fn spawn(role: Role, command: &str) -> Result<Self, PerceptionError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PerceptionError::Transport(format!("spawning `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = channel::unbounded();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            role,
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Session for SubprocessSession {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, PerceptionError> {
        let mut line = serde_json::to_string(request)
            .map_err(|e| PerceptionError::ProtocolError(e.to_string()))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| PerceptionError::Transport(format!("writing request: {e}")))?;
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            let reply = match self.lines.recv_timeout(left) {
                Ok(Ok(l)) => l,
                Ok(Err(e)) => return Err(PerceptionError::Transport(format!("reading reply: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(PerceptionError::BackendTimeout {
                        role: self.role,
                        after: timeout,
                    })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(PerceptionError::Transport("backend process exited".into()))
                }
            };
            if reply.trim().is_empty() {
                continue;
            }
            return serde_json::from_str(&reply)
                .map_err(|e| PerceptionError::ProtocolError(format!("bad reply line: {e}")));
        }
    }
}

impl Drop for SubprocessSession {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Posts each request as a JSON body to a fixed URL.
pub(crate) struct HttpSession {
    role: Role,
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpSession {
    pub fn new(role: Role, url: &str) -> Result<Self, PerceptionError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| PerceptionError::Transport(e.to_string()))?;
        Ok(Self {
            role,
            url: url.to_string(),
            client,
        })
    }
}

impl Session for HttpSession {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, PerceptionError> {
        let reply = self
            .client
            .post(&self.url)
            .timeout(timeout)
            .json(request)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    PerceptionError::BackendTimeout {
                        role: self.role,
                        after: timeout,
                    }
                } else {
                    PerceptionError::Transport(e.to_string())
                }
            })?;
        reply
            .json::<Response>()
            .map_err(|e| PerceptionError::ProtocolError(format!("bad reply body: {e}")))
    }
}

/// Serves requests line by line until EOF. Each reply is flushed before the
/// next request is read.
pub fn serve_lines(
    backend: &dyn PerceptionBackend,
    input: impl BufRead,
    mut output: impl Write,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = dispatch_line(backend, &line);
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// An axum router answering `POST /` with one request per body.
pub fn http_router(backend: Arc<dyn PerceptionBackend>) -> axum::Router {
    use axum::routing::post;
    axum::Router::new().route(
        "/",
        post(move |body: String| {
            let backend = backend.clone();
            async move {
                let reply = tokio::task::spawn_blocking(move || dispatch_line(backend.as_ref(), &body))
                    .await
                    .unwrap_or_else(|e| Response::err(None, format!("handler panicked: {e}")));
                axum::Json(reply)
            }
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::super::wire::{Call, PingResult};
    use super::super::MockBackend;
    use super::*;

    #[test]
    fn stdio_loop_answers_each_line() {
        let input = b"{\"id\":1,\"method\":\"ping\"}\n\nnot json\n{\"id\":2,\"method\":\"warp\"}\n";
        let mut out = Vec::new();
        serve_lines(&MockBackend::default(), &input[..], &mut out).unwrap();
        let replies: Vec<Response> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(replies.len(), 3);
        let ping: PingResult = serde_json::from_value(replies[0].result.clone().unwrap()).unwrap();
        assert_eq!(ping.status, "ok");
        assert_eq!(replies[1].id, None);
        assert!(replies[1].error.is_some());
        assert_eq!(replies[2].id, Some(2));
        assert!(replies[2].error.is_some());
    }

    #[test]
    fn subprocess_timeout_and_exit() {
        let req = Request {
            id: 1,
            call: Call::Ping,
        };
        let mut silent = SubprocessSession::spawn(Role::Tagger, "sleep 5").unwrap();
        let err = silent.call(&req, Duration::from_millis(100)).unwrap_err();
        assert!(matches!(err, PerceptionError::BackendTimeout { role: Role::Tagger, .. }), "{err:?}");
        let mut gone = SubprocessSession::spawn(Role::Tagger, "true").unwrap();
        let err = gone.call(&req, Duration::from_secs(2)).unwrap_err();
        assert!(matches!(err, PerceptionError::Transport(_)), "{err:?}");
    }

    #[test]
    fn subprocess_echo_backend() {
        let script = r#"while read l; do echo '{"id":1,"result":{"status":"ok"}}'; done"#;
        let mut s = SubprocessSession::spawn(Role::Tagger, script).unwrap();
        for _ in 0..3 {
            let r = s
                .call(&Request { id: 1, call: Call::Ping }, Duration::from_secs(5))
                .unwrap();
            assert_eq!(r.id, Some(1));
        }
    }
}
