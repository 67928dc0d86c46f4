use std::path::PathBuf;

use slicewise_core::backends::BackendKind;
use slicewise_core::netplan::DEFAULT_SAFETY_FRACTION;
use slicewise_core::resmodel::DEFAULT_SAFETY_FACTOR;
use slicewise_core::Error;

/// Settings shared by every subcommand, checked once before any core call.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    /// `None` means detect from the environment.
    pub backend: Option<BackendKind>,
    pub partition: Option<String>,
    /// Multiplier padding memory and walltime estimates.
    pub resource_safety: f64,
    /// Fraction of the usable bottleneck a bulk client may take.
    pub transfer_safety: f64,
    pub output_dir: Option<PathBuf>,
    pub verbosity: u8,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            backend: None,
            partition: None,
            resource_safety: DEFAULT_SAFETY_FACTOR,
            transfer_safety: DEFAULT_SAFETY_FRACTION,
            output_dir: None,
            verbosity: 0,
        }
    }
}

impl CliConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if let Some(p) = &self.partition {
            if p.is_empty() || p.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "invalid partition name `{p}`"
                )));
            }
        }
        if !(self.resource_safety.is_finite() && self.resource_safety >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety factor must be >= 1, got {}",
                self.resource_safety
            )));
        }
        if !(self.transfer_safety > 0.0 && self.transfer_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "transfer safety must be in (0, 1], got {}",
                self.transfer_safety
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        CliConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            CliConfig {
                partition: Some("two words".into()),
                ..CliConfig::default()
            },
            CliConfig {
                resource_safety: 0.9,
                ..CliConfig::default()
            },
            CliConfig {
                transfer_safety: 1.5,
                ..CliConfig::default()
            },
            CliConfig {
                transfer_safety: 0.0,
                ..CliConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
