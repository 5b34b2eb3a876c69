//! A throwaway HTTP/1.1 server for transport tests. Serves an in-memory
//! file map, honours If-Modified-Since and logs every request.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

#[derive(Clone)]
pub struct Resource {
    pub body: Vec<u8>,
    pub last_modified: Option<String>,
}

#[derive(Default)]
pub struct State {
    pub files: BTreeMap<String, Resource>,
    /// (path, If-Modified-Since) per request, in arrival order.
    pub log: Vec<(String, Option<String>)>,
    pub fail_with: Option<u16>,
}

pub struct Server {
    pub base: String,
    pub state: Arc<Mutex<State>>,
}

impl Server {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let state = Arc::new(Mutex::new(State::default()));
        let shared = state.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let state = shared.clone();
                thread::spawn(move || serve(stream, &state));
            }
        });
        Self { base, state }
    }

    pub fn put(&self, path: &str, body: &[u8], last_modified: Option<&str>) {
        self.state.lock().unwrap().files.insert(
            path.to_string(),
            Resource {
                body: body.to_vec(),
                last_modified: last_modified.map(str::to_string),
            },
        );
    }

    pub fn remove(&self, path: &str) {
        self.state.lock().unwrap().files.remove(path);
    }

    pub fn requests(&self) -> Vec<(String, Option<String>)> {
        self.state.lock().unwrap().log.clone()
    }

    pub fn clear_log(&self) {
        self.state.lock().unwrap().log.clear();
    }
}

fn serve(stream: TcpStream, state: &Mutex<State>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut since = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("if-modified-since") {
                since = Some(value.trim().to_string());
            }
        }
    }
    let (status, body, last_modified) = {
        let mut st = state.lock().unwrap();
        st.log.push((path.clone(), since.clone()));
        match (st.fail_with, st.files.get(&path)) {
            (Some(code), _) => (code, Vec::new(), None),
            (None, None) => (404, Vec::new(), None),
            (None, Some(r)) if r.last_modified.is_some() && r.last_modified == since => (304, Vec::new(), None),
            (None, Some(r)) => (200, r.body.clone(), r.last_modified.clone()),
        }
    };
    let reason = match status {
        200 => "OK",
        304 => "Not Modified",
        404 => "Not Found",
        _ => "Error",
    };
    let mut out = stream;
    let mut head = format!(
        "HTTP/1.1 {status} {reason}\r\nConnection: close\r\nContent-Length: {}\r\n",
        body.len()
    );
    if let Some(lm) = last_modified {
        head.push_str(&format!("Last-Modified: {lm}\r\n"));
    }
    head.push_str("\r\n");
    let _ = out.write_all(head.as_bytes());
    let _ = out.write_all(&body);
    let _ = out.flush();
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}
