//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod http;
mod netmon;
mod pure;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use support::{fgis, fixtures, Server};

pub type Verdict = Result<String, String>;

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

struct Network {
    radius: Verdict,
    tiles: Verdict,
    offline: Verdict,
}

fn refuses_public_bind() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tiles = fixtures().join("tiles");
    let mut lines = Vec::new();
    for ip in ["0.0.0.0", "8.8.8.8", "::"] {
        let out = Command::new(fgis())
            .args(["serve", "--tiles", tiles.to_str().unwrap(), "--cases", dir.path().to_str().unwrap(), "--port", "0", "--bind", ip])
            .output()
            .map_err(|e| e.to_string())?;
        let err = String::from_utf8_lossy(&out.stderr);
        if out.status.code() != Some(2) || !err.contains("intranet-only") {
            return Err(format!("--bind {ip}: exit {:?}, stderr {err:?}", out.status.code()));
        }
        lines.push(ip);
    }
    Ok(format!("refused {}", lines.join(", ")))
}

/// Positive controls: both observers must see a process that does connect.
fn controls(shim: &std::path::Path, dir: &std::path::Path, target: std::net::SocketAddr) -> Result<(), String> {
    let log = dir.join("control.log");
    let script = format!("exec 3<>/dev/tcp/localhost/{}; sleep 1", target.port());
    let mut child = Command::new("bash")
        .args(["-c", &script])
        .env("LD_PRELOAD", shim)
        .env("FGIS_NETLOG", &log)
        .spawn()
        .map_err(|e| format!("bash: {e}"))?;
    let pid = child.id();
    let mut flagged = Vec::new();
    for _ in 0..100 {
        std::thread::sleep(std::time::Duration::from_millis(10));
        flagged = netmon::scan(pid, target).1;
        if !flagged.is_empty() {
            break;
        }
    }
    let _ = child.wait();
    let logged = netmon::read_log(&log);
    let resolved = logged.iter().any(|l| l.contains("getaddrinfo"));
    let connected = logged.iter().any(|l| l.contains("connect inet"));
    if !(resolved && connected) {
        return Err(format!("shim control not recorded: {logged:?}"));
    }
    if flagged.is_empty() {
        return Err("socket monitor missed the control connection".into());
    }
    Ok(())
}

fn network_criteria() -> Network {
    let fail = |e: String| Network { radius: Err(e.clone()), tiles: Err(e.clone()), offline: Err(e) };
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let shim = match netmon::build_shim(dir.path()) {
        Ok(s) => s,
        Err(e) => return fail(format!("cannot build the monitoring shim: {e}")),
    };
    let (log_a, log_b) = (dir.path().join("a.log"), dir.path().join("b.log"));
    let servers = Server::start(dir.path(), "a", 1024, Some((&shim, &log_a)))
        .and_then(|a| Ok((a, Server::start(dir.path(), "b", 0, Some((&shim, &log_b)))?)));
    let (a, b) = match servers {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let monitor = netmon::Monitor::start(vec![(a.pid(), a.addr), (b.pid(), b.addr)]);
    let preloaded = [a.pid(), b.pid()].iter().all(|pid| {
        std::fs::read_to_string(format!("/proc/{pid}/maps")).is_ok_and(|m| m.contains(shim.to_str().unwrap()))
    });

    let radius = guarded(|| http::radius_oracle(a.addr));
    let tiles = guarded(|| http::tile_serving(a.addr, b.addr));
    let sweep = guarded(|| http::api_sweep(a.addr).map(|n| n.to_string()));
    let sweep_b = guarded(|| http::api_sweep(b.addr).map(|n| n.to_string()));
    let report = monitor.finish();
    let control = controls(&shim, dir.path(), a.addr);
    drop((a, b));

    let offline = (|| {
        let requests = sweep.map_err(|e| format!("API sweep failed: {e}"))?;
        sweep_b.map_err(|e| format!("API sweep (no cache) failed: {e}"))?;
        if !preloaded {
            return Err("monitoring shim was not loaded into the server".into());
        }
        control?;
        let mut logged = netmon::read_log(&log_a);
        logged.extend(netmon::read_log(&log_b));
        if !logged.is_empty() {
            return Err(format!("{} outbound call(s) or lookups: {:?}", logged.len(), &logged[..logged.len().min(5)]));
        }
        if !report.violations.is_empty() {
            return Err(format!("sockets outside the listener: {:?}", report.violations));
        }
        let bind = refuses_public_bind()?;
        Ok(format!(
            "2 servers, {requests} sweep requests each plus the radius and tile runs: 0 outbound connects, 0 lookups, \
             {} socket observations over {} polls all on the listener; {bind}",
            report.sockets_seen, report.polls
        ))
    })();
    Network { radius, tiles, offline }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let net = network_criteria();
    let results = [
        ("tile math", guarded(pure::tile_math)),
        ("radius query oracle through the API", net.radius),
        ("parser corpus", guarded(pure::parser_corpus)),
        ("scan diff", guarded(pure::scan_diff)),
        ("BT/ANPR correlation", guarded(pure::correlation)),
        ("stop detection", guarded(pure::stops)),
        ("offline guarantee", net.offline),
        ("tile serving", net.tiles),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    println!("{} passed, {failed} failed, {:.1} s", results.len() - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
