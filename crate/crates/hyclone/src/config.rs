//! TOML configuration. Every key is optional; see `hyclone.example.toml`
//! for the full list with defaults.

use std::fs;
use std::path::Path;

use crate::error::ConfigError;
use crate::pipeline::PipelineConfig;

pub const EXAMPLE_CONFIG: &str = include_str!("../hyclone.example.toml");

pub fn parse_config(text: &str, path: &Path) -> Result<PipelineConfig, ConfigError> {
    let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyclone_core::Routing;

    #[test]
    fn example_matches_defaults() {
        let cfg = parse_config(EXAMPLE_CONFIG, Path::new("example")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn partial_config_keeps_other_defaults() {
        let text = "n_tests = 8\nrouting = \"validate_positives\"\n[limits]\nwall_timeout = 2\n[match]\ncosine_threshold = 0.99\n";
        let cfg = parse_config(text, Path::new("p")).unwrap();
        assert_eq!(cfg.n_tests, 8);
        assert_eq!(cfg.routing, Routing::ValidatePositives);
        assert_eq!(cfg.limits.wall_timeout, 2.0);
        assert_eq!(cfg.limits.memory_limit, 256 * 1024 * 1024);
        assert_eq!(cfg.matching.cosine_threshold, 0.99);
        assert_eq!(cfg.theta, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["n_test = 3", "[limits]\nwall = 1", "[model]\nname = \"x\""] {
            assert!(matches!(
                parse_config(text, Path::new("u")),
                Err(ConfigError::Parse { .. })
            ), "{text}");
        }
    }
}
