//! The JSON run configuration accepted by `captool sweep`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qsdc_core::capopt::OptimizerConfig;
use qsdc_core::protocol::ProtocolConfig;
use qsdc_core::sweep::{canonical_digest, ChannelGrid, MismatchGrid, SweepOptions};
use qsdc_core::{CapError, Result, SweepSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Worker threads; `--jobs` overrides it.
    pub jobs: usize,
    /// Fill the `elapsed_ms` column. Off by default so reruns are byte-identical.
    pub timing: bool,
    /// Output directory; `--out` overrides it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            jobs: 1,
            timing: false,
            dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub protocol: ProtocolConfig,
    pub channel: ChannelGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchGrid>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CapError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CapError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CapError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.output.jobs == 0 {
            return Err(CapError::Config("output.jobs must be at least 1".into()));
        }
        self.sweep_spec().validate()
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            protocol: self.protocol.clone(),
            channel: self.channel.clone(),
            mismatch: self.mismatch.clone(),
            optimizer: self.optimizer.clone(),
            sweep: self.sweep.clone(),
        }
    }

    /// Serialization with object keys sorted, so equal configs compare equal as text.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("serializable");
        serde_json::to_string_pretty(&value).expect("serializable")
    }

    pub fn digest(&self) -> String {
        canonical_digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"schema_version":1,"protocol":{"name":"dl04"},"channel":{"epsilon":[0.0,0.1]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.protocol.p_z, 0.999);
        assert_eq!(c.output.jobs, 1);
        assert!(!c.output.timing);
        assert_eq!(c.sweep_spec().row_count(), 2);
    }

    #[test]
    fn unknown_keys_and_bad_versions_are_rejected() {
        let extra = MINIMAL.replace("\"channel\"", "\"colour\":1,\"channel\"");
        assert!(matches!(
            RunConfig::from_json(&extra),
            Err(CapError::Config(_))
        ));
        let nested = MINIMAL.replace("[0.0,0.1]", "[0.1],\"shape\":2");
        assert!(RunConfig::from_json(&nested).is_err());
        let v2 = MINIMAL.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(RunConfig::from_json(&v2).is_err());
        let empty = MINIMAL.replace("[0.0,0.1]", "[]");
        assert!(RunConfig::from_json(&empty).is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let text = c.canonical_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical_json(), text);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn digest_does_not_depend_on_key_order() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let b = RunConfig::from_json(
            r#"{"channel":{"epsilon":[0.0,0.1]},"protocol":{"name":"dl04"},"schema_version":1}"#,
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
    }
}
