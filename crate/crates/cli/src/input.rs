use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use omac::channel::{builtin_xor_mac, parse_channel, read_codebook, ChannelSpec};
use omac::prob::{Alphabet, Axis, Dist};
use sha2::{Digest, Sha256};

/// Files read during a run, with their SHA-256 digests.
#[derive(Default)]
pub struct Inputs {
    pub digests: Vec<(String, String)>,
}

impl Inputs {
    pub fn read(&mut self, path: &str) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {path}"))?;
        let digest = Sha256::digest(&bytes);
        self.digests.push((path.to_string(), digest.iter().map(|b| format!("{b:02x}")).collect()));
        Ok(bytes)
    }

    /// A channel file, or `xor:P` for the built-in binary noisy XOR MAC.
    pub fn channel(&mut self, arg: &str) -> Result<ChannelSpec> {
        if let Some(p) = arg.strip_prefix("xor:") {
            if !Path::new(arg).exists() {
                let p: f64 = p.parse().with_context(|| format!("bad jammer fraction in `{arg}`"))?;
                return Ok(builtin_xor_mac(p)?);
            }
        }
        Ok(parse_channel(&self.read(arg)?)?)
    }

    /// `u` for uniform, comma-separated probabilities, or a JSON file.
    pub fn input_dist(&mut self, arg: &str, name: &str, alphabet: &Alphabet) -> Result<Dist> {
        let axis = || vec![Axis::new(name, alphabet.clone())];
        if arg == "u" || arg == "uniform" {
            return Ok(Dist::uniform(axis())?);
        }
        if arg.contains(',') || arg.parse::<f64>().is_ok() {
            let v: Vec<f64> = arg
                .split(',')
                .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad probability `{s}`")))
                .collect::<Result<_>>()?;
            return Ok(Dist::new(axis(), v)?);
        }
        let d: Dist = serde_json::from_slice(&self.read(arg)?).with_context(|| format!("parsing {arg}"))?;
        if d.rank() != 1 || d.axes()[0].symbols != *alphabet {
            bail!("{arg}: expected a distribution over the alphabet {:?}", alphabet.symbols());
        }
        Ok(d.renamed(&[name])?)
    }

    pub fn dist_file(&mut self, path: &str) -> Result<Dist> {
        serde_json::from_slice(&self.read(path)?).with_context(|| format!("parsing {path}"))
    }

    pub fn codebook(&mut self, path: &str) -> Result<(Alphabet, Vec<Vec<usize>>)> {
        let text = String::from_utf8(self.read(path)?).with_context(|| format!("{path} is not UTF-8"))?;
        Ok(read_codebook(&text)?)
    }
}
