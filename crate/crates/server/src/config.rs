//! Service configuration and the intranet bind rule.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr};
use std::path::{Path, PathBuf};

use fgis_core::tiles::DEFAULT_CACHE_CAPACITY;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Contents of the TOML config file. Every field can be overridden on the
/// command line.
///
/// ```toml
/// bind_address = "127.0.0.1"
/// port = 8080
/// tile_archive_path = "/srv/fgis/tiles"
/// case_root_path = "/srv/fgis/cases"
/// cache_capacity = 1024        # tiles held in memory; 0 disables the cache
/// lenient_import = false       # default for imports without ?lenient=
/// allow_public_bind = false
/// static_dir = "/srv/fgis/webui"   # optional
/// max_upload_mb = 256
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind_address: IpAddr,
    #[serde(default = "default_port")]
    pub port: u16,
    pub tile_archive_path: PathBuf,
    pub case_root_path: PathBuf,
    #[serde(default = "default_cache")]
    pub cache_capacity: usize,
    #[serde(default)]
    pub lenient_import: bool,
    #[serde(default)]
    pub allow_public_bind: bool,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default = "default_upload")]
    pub max_upload_mb: usize,
}

fn default_bind() -> IpAddr {
    IpAddr::V4(Ipv4Addr::LOCALHOST)
}

fn default_port() -> u16 {
    8080
}

fn default_cache() -> usize {
    DEFAULT_CACHE_CAPACITY
}

fn default_upload() -> usize {
    256
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {path} does not exist or is not a readable directory")]
    MissingPath { field: &'static str, path: String },
    #[error(
        "refusing to bind {0}: the service is intranet-only and may bind only loopback or private addresses \
         (127.0.0.0/8, 10.0.0.0/8, 172.16.0.0/12, 192.168.0.0/16, ::1, fc00::/7); pass --allow-public-bind to override"
    )]
    PublicBind(IpAddr),
}

impl ServiceConfig {
    pub fn new(tile_archive_path: impl Into<PathBuf>, case_root_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            bind_address: default_bind(),
            port: default_port(),
            tile_archive_path: tile_archive_path.into(),
            case_root_path: case_root_path.into(),
            cache_capacity: default_cache(),
            lenient_import: false,
            allow_public_bind: false,
            static_dir: None,
            max_upload_mb: default_upload(),
        }
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind_address, self.port)
    }

    /// Startup checks: the bind rule first, then that every configured
    /// directory exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.allow_public_bind && !is_intranet(self.bind_address) {
            return Err(ConfigError::PublicBind(self.bind_address));
        }
        let dirs = [
            ("tile_archive_path", Some(&self.tile_archive_path)),
            ("case_root_path", Some(&self.case_root_path)),
            ("static_dir", self.static_dir.as_ref()),
        ];
        for (field, path) in dirs {
            if let Some(path) = path {
                if std::fs::read_dir(path).is_err() {
                    return Err(ConfigError::MissingPath { field, path: path.display().to_string() });
                }
            }
        }
        Ok(())
    }
}

/// Loopback or private-use address. The unspecified address (all
/// interfaces) is not.
pub fn is_intranet(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_loopback() || v4.is_private(),
        IpAddr::V6(v6) => {
            if let Some(v4) = v6.to_ipv4_mapped() {
                return is_intranet(IpAddr::V4(v4));
            }
            v6 == Ipv6Addr::LOCALHOST || (v6.segments()[0] & 0xfe00) == 0xfc00
        }
    }
}
