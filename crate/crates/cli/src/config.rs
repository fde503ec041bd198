//! Flat `key = value` configuration.
//!
//! ```text
//! # comment
//! seed = 3
//! fed.rounds = 50
//!
//! [channel]
//! kind = bsc          # same as channel.kind
//! bit_error_rate = 1e-4
//! ```
//!
//! A `[section]` line prefixes the keys after it. Keys are checked against a
//! fixed list so typos fail at load time instead of being ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const SEED_ENV: &str = "FEDHD_SEED";

/// Every key the harness understands.
pub const KEYS: &[&str] = &[
    "seed",
    "target_accuracy",
    "exec",
    "data.train",
    "data.test",
    "data.format",
    "data.has_header",
    "data.normalize",
    "data.encoded",
    "data.synthetic.classes",
    "data.synthetic.features",
    "data.synthetic.per_class",
    "data.synthetic.test_per_class",
    "data.synthetic.separation",
    "data.synthetic.nuisance_rank",
    "data.synthetic.nuisance_scale",
    "encoder.dim",
    "encoder.seed",
    "encoder.quantize",
    "fed.clients",
    "fed.participation",
    "fed.epochs",
    "fed.batch",
    "fed.learning_rate",
    "fed.rounds",
    "fed.aggregation",
    "fed.init",
    "fed.schedule",
    "fed.mu",
    "fed.gamma",
    "fed.track_train_loss",
    "partition.kind",
    "partition.shards_per_client",
    "partition.seed",
    "channel.kind",
    "channel.snr_db",
    "channel.bit_error_rate",
    "channel.drop_probability",
    "channel.packet_bits",
    "channel.codec",
    "channel.bitwidth",
    "strategy.kind",
    "strategy.rate",
    "strategy.sparsity",
    "strategy.step",
    "output.metrics",
    "output.model",
    "output.sparse_model",
    "output.wall_clock",
];

/// Short names accepted in sweep grids.
pub fn grid_alias(name: &str) -> &str {
    match name {
        "E" => "fed.epochs",
        "B" => "fed.batch",
        "C" => "fed.participation",
        "snr_db" => "channel.snr_db",
        "p_e" => "channel.bit_error_rate",
        "rate" => "strategy.rate",
        "S" => "strategy.sparsity",
        "d" => "encoder.dim",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw settings, later layers overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut s = Settings::default();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            let at = format!("{origin}:{}", no + 1);
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| anyhow!("{at}: unterminated section header"))?.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    bail!("{at}: bad section name `{name}`");
                }
                section = format!("{name}.");
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{at}: expected `key = value`"))?;
            let key = format!("{section}{}", k.trim());
            if s.entries.contains_key(&key) {
                bail!("{at}: duplicate key `{key}`");
            }
            s.insert(&key, v.trim(), &at)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets `key`, replacing any earlier value.
    pub fn insert(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("{origin}: unknown key `{key}`");
        }
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), origin: origin.to_string() });
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_arg(&mut self, arg: &str) -> Result<()> {
        let (k, v) = arg.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got `{arg}`"))?;
        self.insert(grid_alias(k.trim()), v.trim(), "--set")
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| anyhow!("{}: bad value for `{key}`: {err}", e.origin)),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                other => bail!("{}: `{key}` must be true or false, got `{other}`", e.origin),
            },
        }
    }

    /// The run seed: the `seed` key, else `FEDHD_SEED`, else 0.
    pub fn seed(&self) -> Result<u64> {
        if let Some(s) = self.get("seed")? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|e| anyhow!("{SEED_ENV}: bad seed `{v}`: {e}")),
            Err(_) => Ok(0),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    // `#` starts a comment at the line start or after whitespace, so paths
    // like `runs/#3` survive.
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_dotted_keys() {
        let s = Settings::parse(
            "# header\nseed = 4\nfed.rounds = 12 # trailing\n\n[channel]\nkind = bsc\nbit_error_rate=1e-4\n",
            "t",
        )
        .unwrap();
        assert_eq!(s.get::<u64>("seed").unwrap(), Some(4));
        assert_eq!(s.get::<usize>("fed.rounds").unwrap(), Some(12));
        assert_eq!(s.raw("channel.kind"), Some("bsc"));
        assert_eq!(s.get::<f64>("channel.bit_error_rate").unwrap(), Some(1e-4));
    }

    #[test]
    fn hash_inside_value_is_kept() {
        let s = Settings::parse("output.metrics = runs/#3.csv", "t").unwrap();
        assert_eq!(s.raw("output.metrics"), Some("runs/#3.csv"));
    }

    #[test]
    fn errors_name_the_line() {
        let e = Settings::parse("seed = 1\nfed.roundz = 3", "cfg").unwrap_err().to_string();
        assert!(e.contains("cfg:2") && e.contains("fed.roundz"), "{e}");
        let e = Settings::parse("seed = 1\nseed = 2", "cfg").unwrap_err().to_string();
        assert!(e.contains("duplicate"), "{e}");
        assert!(Settings::parse("just words", "cfg").is_err());
        assert!(Settings::parse("[fed\nrounds = 1", "cfg").is_err());
        let s = Settings::parse("fed.rounds = many", "cfg").unwrap();
        assert!(s.get::<usize>("fed.rounds").unwrap_err().to_string().contains("cfg:1"));
    }

    #[test]
    fn overrides_and_aliases() {
        let mut s = Settings::parse("encoder.dim = 100", "t").unwrap();
        s.set_arg("d=200").unwrap();
        assert_eq!(s.get::<usize>("encoder.dim").unwrap(), Some(200));
        s.set_arg("C = 0.5").unwrap();
        assert_eq!(s.get::<f64>("fed.participation").unwrap(), Some(0.5));
        assert!(s.set_arg("nonsense").is_err());
        assert!(s.set_arg("q=1").is_err());
    }

    #[test]
    fn booleans() {
        let s = Settings::parse("data.normalize = off\ndata.encoded = yes\nencoder.quantize = maybe", "t").unwrap();
        assert!(!s.bool_or("data.normalize", true).unwrap());
        assert!(s.bool_or("data.encoded", false).unwrap());
        assert!(s.bool_or("encoder.quantize", false).is_err());
        assert!(s.bool_or("fed.track_train_loss", true).unwrap());
    }

    #[test]
    fn explicit_seed_wins() {
        let s = Settings::parse("seed = 9", "t").unwrap();
        assert_eq!(s.seed().unwrap(), 9);
    }
}
