use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Flat TOML run configuration; every key is optional and command-line
/// flags override it.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub family: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub dim: Option<usize>,
    pub sign: Option<String>,
    pub heights: Option<String>,
    pub method: Option<String>,
    pub resolution: Option<usize>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Fast,
    Sweep,
    Both,
}

impl MethodChoice {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "fast" => Ok(MethodChoice::Fast),
            "sweep" => Ok(MethodChoice::Sweep),
            "both" => Ok(MethodChoice::Both),
            _ => Err(format!("unknown method '{s}'; expected fast, sweep or both")),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodChoice::Fast => "fast",
            MethodChoice::Sweep => "sweep",
            MethodChoice::Both => "both",
        }
    }
}

/// Heights as `a:b:step` (inclusive), a comma list, or one number.
pub fn parse_heights(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number '{s}' in heights '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let hs = match parts.len() {
        1 => spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        3 => {
            let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || b < a {
                return Err(format!("range '{spec}' needs a <= b and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| a + step * i as f64).collect()
        }
        _ => return Err(format!("cannot parse heights '{spec}'; use a:b:step, a,b,c or a single value")),
    };
    if hs.is_empty() || hs.iter().any(|h| !h.is_finite()) {
        return Err(format!("heights '{spec}' are empty or not finite"));
    }
    Ok(hs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_specs() {
        assert_eq!(parse_heights("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_heights("1:3.5:0.25").unwrap().len(), 11);
        assert_eq!(parse_heights("6").unwrap(), vec![6.0]);
        assert_eq!(parse_heights("1, 2").unwrap(), vec![1.0, 2.0]);
        assert!(parse_heights("1:0:1").is_err());
        assert!(parse_heights("x").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("K = 5.0\nheights = \"1:2:0.5\"").is_ok());
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }
}
