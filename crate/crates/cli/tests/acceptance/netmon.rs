//! Network activity monitoring for child processes.
//!
//! Two independent observers: an LD_PRELOAD shim that logs every outbound
//! connect, datagram send and name lookup made through libc, and a poller
//! that maps each socket the process holds to its kernel socket table entry.

use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

const SHIM_C: &str = r#"
#define _GNU_SOURCE
#include <arpa/inet.h>
#include <dlfcn.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

static void note(const char *fmt, ...) {
    const char *path = getenv("FGIS_NETLOG");
    if (!path) return;
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    int n = vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    if (n <= 0) return;
    if (n > (int)sizeof buf) n = sizeof buf;
    int fd = open(path, O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0600);
    if (fd < 0) return;
    ssize_t w = write(fd, buf, n);
    (void)w;
    close(fd);
}

static void describe(const struct sockaddr *sa, char *out, size_t len) {
    char ip[INET6_ADDRSTRLEN] = "?";
    if (!sa) { snprintf(out, len, "none"); return; }
    switch (sa->sa_family) {
    case AF_INET: {
        const struct sockaddr_in *a = (const struct sockaddr_in *)sa;
        inet_ntop(AF_INET, &a->sin_addr, ip, sizeof ip);
        snprintf(out, len, "inet %s:%u", ip, ntohs(a->sin_port));
        break;
    }
    case AF_INET6: {
        const struct sockaddr_in6 *a = (const struct sockaddr_in6 *)sa;
        inet_ntop(AF_INET6, &a->sin6_addr, ip, sizeof ip);
        snprintf(out, len, "inet6 [%s]:%u", ip, ntohs(a->sin6_port));
        break;
    }
    case AF_UNIX:
        snprintf(out, len, "unix %s", ((const struct sockaddr_un *)sa)->sun_path);
        break;
    default:
        snprintf(out, len, "family %d", sa->sa_family);
    }
}

#define REAL(name) static __typeof__(name) *real_##name; if (!real_##name) real_##name = (__typeof__(name) *)dlsym(RTLD_NEXT, #name)

int connect(int fd, const struct sockaddr *addr, socklen_t len) {
    REAL(connect);
    char d[160];
    describe(addr, d, sizeof d);
    note("%d connect %s\n", getpid(), d);
    return real_connect(fd, addr, len);
}

ssize_t sendto(int fd, const void *buf, size_t n, int flags, const struct sockaddr *addr, socklen_t len) {
    REAL(sendto);
    if (addr) {
        char d[160];
        describe(addr, d, sizeof d);
        note("%d sendto %s\n", getpid(), d);
    }
    return real_sendto(fd, buf, n, flags, addr, len);
}

ssize_t sendmsg(int fd, const struct msghdr *msg, int flags) {
    REAL(sendmsg);
    if (msg && msg->msg_name) {
        char d[160];
        describe((const struct sockaddr *)msg->msg_name, d, sizeof d);
        note("%d sendmsg %s\n", getpid(), d);
    }
    return real_sendmsg(fd, msg, flags);
}

int getaddrinfo(const char *node, const char *service, const struct addrinfo *hints, struct addrinfo **res) {
    REAL(getaddrinfo);
    note("%d getaddrinfo %s %s\n", getpid(), node ? node : "-", service ? service : "-");
    return real_getaddrinfo(node, service, hints, res);
}

int getnameinfo(const struct sockaddr *sa, socklen_t salen, char *host, socklen_t hostlen, char *serv, socklen_t servlen, int flags) {
    REAL(getnameinfo);
    note("%d getnameinfo\n", getpid());
    return real_getnameinfo(sa, salen, host, hostlen, serv, servlen, flags);
}

struct hostent *gethostbyname(const char *name) {
    REAL(gethostbyname);
    note("%d gethostbyname %s\n", getpid(), name ? name : "-");
    return real_gethostbyname(name);
}

struct hostent *gethostbyname2(const char *name, int af) {
    REAL(gethostbyname2);
    note("%d gethostbyname2 %s\n", getpid(), name ? name : "-");
    return real_gethostbyname2(name, af);
}

int gethostbyname_r(const char *name, struct hostent *ret, char *buf, size_t buflen, struct hostent **result, int *h_errnop) {
    REAL(gethostbyname_r);
    note("%d gethostbyname_r %s\n", getpid(), name ? name : "-");
    return real_gethostbyname_r(name, ret, buf, buflen, result, h_errnop);
}
"#;

/// Compiles the shim into `dir`.
pub fn build_shim(dir: &Path) -> Result<PathBuf, String> {
    let src = dir.join("netlog.c");
    let lib = dir.join("libnetlog.so");
    std::fs::write(&src, SHIM_C).map_err(|e| e.to_string())?;
    let out = Command::new("cc")
        .args(["-shared", "-fPIC", "-O1", "-o"])
        .arg(&lib)
        .arg(&src)
        .arg("-ldl")
        .output()
        .map_err(|e| format!("cannot run cc: {e}"))?;
    if !out.status.success() {
        return Err(format!("cc failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(lib)
}

/// Log lines that record network activity other than local IPC.
pub fn read_log(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.contains(" unix ") || l.contains("nscd") || l.contains("resolve"))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Proto {
    Tcp,
    Udp,
    Raw,
}

#[derive(Debug, Clone)]
struct Entry {
    proto: Proto,
    local: SocketAddr,
    remote: SocketAddr,
    inode: u64,
}

fn parse_addr(hex: &str) -> Option<SocketAddr> {
    let (ip, port) = hex.split_once(':')?;
    let port = u16::from_str_radix(port, 16).ok()?;
    let ip = match ip.len() {
        8 => IpAddr::V4(Ipv4Addr::from(u32::from_str_radix(ip, 16).ok()?.swap_bytes())),
        32 => {
            let mut octets = [0u8; 16];
            for w in 0..4 {
                let word = u32::from_str_radix(&ip[w * 8..w * 8 + 8], 16).ok()?;
                octets[w * 4..w * 4 + 4].copy_from_slice(&word.to_le_bytes());
            }
            IpAddr::V6(Ipv6Addr::from(octets))
        }
        _ => return None,
    };
    Some(SocketAddr::new(ip, port))
}

fn socket_table() -> Vec<Entry> {
    let mut out = Vec::new();
    for (file, proto) in [
        ("tcp", Proto::Tcp),
        ("tcp6", Proto::Tcp),
        ("udp", Proto::Udp),
        ("udp6", Proto::Udp),
        ("raw", Proto::Raw),
        ("raw6", Proto::Raw),
    ] {
        let Ok(text) = std::fs::read_to_string(format!("/proc/net/{file}")) else { continue };
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 10 {
                continue;
            }
            if let (Some(local), Some(remote), Ok(inode)) = (parse_addr(f[1]), parse_addr(f[2]), f[9].parse()) {
                out.push(Entry { proto, local, remote, inode });
            }
        }
    }
    out
}

fn socket_inodes(pid: u32) -> Vec<u64> {
    let Ok(dir) = std::fs::read_dir(format!("/proc/{pid}/fd")) else { return Vec::new() };
    dir.filter_map(Result::ok)
        .filter_map(|e| std::fs::read_link(e.path()).ok())
        .filter_map(|t| {
            let t = t.to_string_lossy().into_owned();
            t.strip_prefix("socket:[")?.strip_suffix(']')?.parse().ok()
        })
        .collect()
}

/// Internet sockets of `pid` other than the listener at `allowed` and the
/// connections it accepted.
pub fn scan(pid: u32, allowed: SocketAddr) -> (usize, Vec<String>) {
    let inodes = socket_inodes(pid);
    if inodes.is_empty() {
        return (0, Vec::new());
    }
    let table = socket_table();
    let mut seen = 0;
    let mut bad = Vec::new();
    for inode in inodes {
        for e in table.iter().filter(|e| e.inode == inode) {
            seen += 1;
            let ok = e.proto == Proto::Tcp && e.local == allowed;
            if !ok {
                bad.push(format!("pid {pid}: {:?} socket {} -> {}", e.proto, e.local, e.remote));
            }
        }
    }
    (seen, bad)
}

#[derive(Debug, Default)]
pub struct Report {
    pub polls: usize,
    pub sockets_seen: usize,
    pub violations: BTreeSet<String>,
}

pub struct Monitor {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Report>,
}

impl Monitor {
    pub fn start(watched: Vec<(u32, SocketAddr)>) -> Monitor {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            let mut r = Report::default();
            loop {
                let last = flag.load(Ordering::SeqCst);
                for (pid, addr) in &watched {
                    let (seen, bad) = scan(*pid, *addr);
                    r.sockets_seen += seen;
                    r.violations.extend(bad);
                }
                r.polls += 1;
                if last {
                    return r;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        });
        Monitor { stop, handle }
    }

    pub fn finish(self) -> Report {
        self.stop.store(true, Ordering::SeqCst);
        self.handle.join().expect("monitor thread")
    }
}
