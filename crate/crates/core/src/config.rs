//! Plain-text `key = value` pipeline configuration. CLI flags override
//! config-file values; config-file values override the built-in defaults.

use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // embedding
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub min_count_individual: u64,
    pub min_count_norm: u64,
    pub negatives: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub workers: usize,
    // ingestion
    pub confidence_threshold: u8,
    // selection
    pub fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub min_word_len: usize,
    pub max_word_len: usize,
    pub corr_threshold: f64,
    // exclusion
    pub min_fixation_ms: f64,
    pub max_ffd_ms: f64,
    pub max_gd_ms: f64,
    pub max_tvd_ms: f64,
    pub drop_first_last_word: bool,
    pub drop_zero_wp_or_wf: bool,
    pub first_pass_rightward_only: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dim: 100,
            window: 2,
            epochs: 10,
            min_count_individual: 3,
            min_count_norm: 5,
            negatives: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            workers: 1,
            confidence_threshold: 0,
            fraction: 1.0 / 3.0,
            min_words: 5,
            max_words: 15,
            min_word_len: 2,
            max_word_len: 17,
            corr_threshold: 0.3,
            min_fixation_ms: 70.0,
            max_ffd_ms: 800.0,
            max_gd_ms: 1000.0,
            max_tvd_ms: 1500.0,
            drop_first_last_word: true,
            drop_zero_wp_or_wf: true,
            first_pass_rightward_only: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::InvalidConfig(format!("invalid value `{value}` for key `{key}`"))
    })
}

impl PipelineConfig {
    /// Apply one `key = value` assignment; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dim" => self.dim = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "min_count_individual" => self.min_count_individual = parse(key, value)?,
            "min_count_norm" => self.min_count_norm = parse(key, value)?,
            "negatives" => self.negatives = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "min_learning_rate" => self.min_learning_rate = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "confidence_threshold" => self.confidence_threshold = parse(key, value)?,
            "fraction" => self.fraction = parse(key, value)?,
            "min_words" => self.min_words = parse(key, value)?,
            "max_words" => self.max_words = parse(key, value)?,
            "min_word_len" => self.min_word_len = parse(key, value)?,
            "max_word_len" => self.max_word_len = parse(key, value)?,
            "corr_threshold" => self.corr_threshold = parse(key, value)?,
            "min_fixation_ms" => self.min_fixation_ms = parse(key, value)?,
            "max_ffd_ms" => self.max_ffd_ms = parse(key, value)?,
            "max_gd_ms" => self.max_gd_ms = parse(key, value)?,
            "max_tvd_ms" => self.max_tvd_ms = parse(key, value)?,
            "drop_first_last_word" => self.drop_first_last_word = parse(key, value)?,
            "drop_zero_wp_or_wf" => self.drop_zero_wp_or_wf = parse(key, value)?,
            "first_pass_rightward_only" => {
                self.first_pass_rightward_only = parse(key, value)?
            }
            _ => {
                return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_fixation_ms >= self.max_ffd_ms
            || self.min_fixation_ms >= self.max_gd_ms
            || self.min_fixation_ms >= self.max_tvd_ms
        {
            return Err(Error::InvalidConfig(
                "min_fixation_ms must be below every duration cap".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::InvalidConfig("fraction must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Parse a config file: one `key = value` per line, `#` comments and
    /// blank lines ignored.
    pub fn parse_text(path: &Path, text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|e| match e {
                Error::InvalidConfig(msg) if msg.starts_with("unknown config key") => {
                    Error::UnknownConfigKey {
                        path: path.to_path_buf(),
                        line: i + 1,
                        key: key.to_string(),
                    }
                }
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(path, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn defaults_hold_without_a_file() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.dim, 100);
        assert_eq!(cfg.window, 2);
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.min_count_individual, 3);
        assert_eq!(cfg.min_count_norm, 5);
        assert_eq!(cfg.min_fixation_ms, 70.0);
        assert_eq!(cfg.max_ffd_ms, 800.0);
        assert_eq!(cfg.max_gd_ms, 1000.0);
        assert_eq!(cfg.max_tvd_ms, 1500.0);
        assert_eq!(cfg.corr_threshold, 0.3);
    }

    #[test]
    fn file_values_override_defaults() {
        let cfg = PipelineConfig::parse_text(
            &PathBuf::from("x.conf"),
            "# comment\n\ndim = 64\ncorr_threshold=0.25\nfirst_pass_rightward_only = true\n",
        )
        .unwrap();
        assert_eq!(cfg.dim, 64);
        assert_eq!(cfg.corr_threshold, 0.25);
        assert!(cfg.first_pass_rightward_only);
        assert_eq!(cfg.window, 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = PipelineConfig::parse_text(&PathBuf::from("x.conf"), "dim = 64\nwibble = 3\n")
            .unwrap_err();
        match err {
            Error::UnknownConfigKey { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "wibble");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invalid_values_and_constraints_are_rejected() {
        assert!(PipelineConfig::parse_text(&PathBuf::from("x"), "dim = banana\n").is_err());
        assert!(PipelineConfig::parse_text(&PathBuf::from("x"), "max_ffd_ms = 50\n").is_err());
        assert!(PipelineConfig::parse_text(&PathBuf::from("x"), "fraction = 1.5\n").is_err());
        assert!(PipelineConfig::parse_text(&PathBuf::from("x"), "dim 64\n").is_err());
    }
}
