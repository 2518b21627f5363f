#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../config")
        .join(name)
}

pub fn whose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whose"))
        .args(args)
        .env_remove("WHOSE_PORT")
        .env_remove("WHOSE_STORE")
        .output()
        .expect("spawn whose")
}

/// Runs `whose` and returns stdout, panicking with stderr on a non-zero exit.
pub fn whose_ok(args: &[&str]) -> String {
    let out = whose(args);
    assert!(
        out.status.success(),
        "whose {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Value of a `key value` line in a report.
pub fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"))
        .to_string()
}

/// Synthesizes a CSV log and ingests it into `dir/store`; returns the store path.
pub fn build_store(dir: &Path, sessions: usize, seed: u64) -> PathBuf {
    let log = dir.join("log.csv");
    let store = dir.join("store");
    let (n, seed) = (sessions.to_string(), seed.to_string());
    whose_ok(&["synth", "--sessions", &n, "--seed", &seed, "--out", p(&log)]);
    let schema = config("schema.conf");
    whose_ok(&[
        "ingest",
        "--log",
        p(&log),
        "--format",
        "csv",
        "--schema",
        p(&schema),
        "--store",
        p(&store),
    ]);
    store
}

/// [`build_store`] followed by preprocessing; returns the analysis file path.
pub fn build_analysis(dir: &Path, sessions: usize, seed: u64) -> PathBuf {
    let store = build_store(dir, sessions, seed);
    let analysis = dir.join("analysis.jsonl");
    preprocess(&store, 2, &analysis);
    analysis
}

pub fn preprocess(store: &Path, threads: usize, out: &Path) -> String {
    let (mapping, extraction) = (config("mapping.csv"), config("extraction.csv"));
    whose_ok(&[
        "preprocess",
        "--store",
        p(store),
        "--mapping",
        p(&mapping),
        "--extraction",
        p(&extraction),
        "--threads",
        &threads.to_string(),
        "--out",
        p(out),
    ])
}

/// A `whose serve` child process, terminated on drop.
pub struct Server {
    pub child: Child,
    pub addr: SocketAddr,
    stdout: BufReader<std::process::ChildStdout>,
}

impl Server {
    pub fn start(analysis: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_whose"))
            .args(["serve", "--port", "0", "--store"])
            .arg(analysis)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let mut stdout = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        let addr = loop {
            line.clear();
            if stdout.read_line(&mut line).unwrap() == 0 {
                panic!("server exited before listening: {:?}", child.wait());
            }
            if let Some(url) = line.trim().strip_prefix("listening http://") {
                break url.parse().unwrap();
            }
        };
        Server {
            child,
            addr,
            stdout,
        }
    }

    /// Sends SIGTERM and returns the exit status and remaining stdout.
    pub fn terminate(mut self) -> (std::process::ExitStatus, String) {
        let pid = self.child.id().to_string();
        let killed = Command::new("kill").args(["-TERM", &pid]).status().unwrap();
        assert!(killed.success());
        let status = self.child.wait().unwrap();
        let mut rest = String::new();
        self.stdout.read_to_string(&mut rest).unwrap();
        (status, rest)
    }

    pub fn request(
        &self,
        method: &str,
        path: &str,
        headers: &[(&str, &str)],
        body: &[u8],
    ) -> (u16, Vec<u8>) {
        http(self.addr, method, path, headers, body)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Minimal HTTP/1.1 client: one request per connection, Content-Length bodies only.
pub fn http(
    addr: SocketAddr,
    method: &str,
    path: &str,
    headers: &[(&str, &str)],
    body: &[u8],
) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n",
        body.len()
    );
    if !body.is_empty() {
        head.push_str("Content-Type: application/json\r\n");
    }
    for (k, v) in headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(body).unwrap();

    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .expect("header end");
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let length: usize = head
        .lines()
        .find_map(|l| {
            let (k, v) = l.split_once(':')?;
            k.eq_ignore_ascii_case("content-length")
                .then(|| v.trim().parse().unwrap())
        })
        .expect("content-length");
    let body = raw[split + 4..].to_vec();
    assert_eq!(body.len(), length);
    (status, body)
}
