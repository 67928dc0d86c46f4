//! Bottleneck-aware rate caps for bulk ingest transfers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the usable bottleneck a bulk client should be capped to.
pub const DEFAULT_SAFETY_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub capacity_mbps: f64,
}

/// Links in path order from client to destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPath {
    pub links: Vec<Link>,
}

impl NetworkPath {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: NetworkPath = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::schema("links", "path needs at least one link"));
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.capacity_mbps.is_finite() && l.capacity_mbps > 0.0) {
                return Err(Error::schema(
                    format!("links[{i}].capacity_mbps"),
                    "must be > 0",
                ));
            }
        }
        Ok(())
    }

    /// The minimum-capacity link; ties go to the one nearest the client.
    pub fn bottleneck(&self) -> Option<&Link> {
        self.links
            .iter()
            .fold(None, |best: Option<&Link>, l| match best {
                Some(b) if b.capacity_mbps <= l.capacity_mbps => Some(b),
                _ => Some(l),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub bottleneck_mbps: f64,
    pub bottleneck_link: String,
    pub saturates: bool,
    pub recommended_rate_mbps: f64,
}

pub fn plan_transfer(
    path: &NetworkPath,
    client_rate_mbps: f64,
    safety_fraction: f64,
    reserved_mbps: f64,
) -> Result<TransferPlan> {
    path.validate()?;
    if !(client_rate_mbps.is_finite() && client_rate_mbps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "client rate must be > 0, got {client_rate_mbps}"
        )));
    }
    if !(safety_fraction > 0.0 && safety_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety fraction must be in (0, 1], got {safety_fraction}"
        )));
    }
    if !(reserved_mbps.is_finite() && reserved_mbps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reserved bandwidth must be >= 0, got {reserved_mbps}"
        )));
    }
    let link = path.bottleneck().expect("validated nonempty");
    if reserved_mbps >= link.capacity_mbps {
        return Err(Error::InvalidArgument(format!(
            "reserved {reserved_mbps} Mbps leaves nothing on bottleneck `{}` ({} Mbps)",
            link.name, link.capacity_mbps
        )));
    }
    let usable = link.capacity_mbps - reserved_mbps;
    let saturates = client_rate_mbps >= usable;
    // A flow that leaves headroom keeps its configured rate.
    let recommended_rate_mbps = if saturates {
        client_rate_mbps.min(safety_fraction * usable)
    } else {
        client_rate_mbps
    };
    Ok(TransferPlan {
        bottleneck_mbps: link.capacity_mbps,
        bottleneck_link: link.name.clone(),
        saturates,
        recommended_rate_mbps,
    })
}
