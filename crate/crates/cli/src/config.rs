//! `--config` JSON: optional `hyper`, `gibbs` and `vb` sections whose fields
//! carry the library's names. Command-line flags win over the file.

use std::path::Path;

use infhs::gibbs::GibbsConfig;
use infhs::vb::VBConfig;
use infhs::Hyperparameters;
use serde::Deserialize;

use crate::error::Result;
use crate::io::read_json;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub gibbs: GibbsSection,
    #[serde(default)]
    pub vb: VbSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub v: Option<f64>,
    pub q: Option<f64>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub s0_sq: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub thin: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbSection {
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Flag values that override the file.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Config::default()), read_json)
    }

    /// Defaults for `groups` co-data sources, then the file's entries.
    pub fn hyper(&self, groups: usize) -> Hyperparameters {
        let mut h = Hyperparameters::defaults(groups);
        let s = &self.hyper;
        h.v = s.v.unwrap_or(h.v);
        h.q = s.q.unwrap_or(h.q);
        h.s0_sq = s.s0_sq.unwrap_or(h.s0_sq);
        if let Some(a) = &s.a {
            h.a = a.clone();
        }
        if let Some(b) = &s.b {
            h.b = b.clone();
        }
        h
    }

    pub fn gibbs(&self, o: &Overrides) -> GibbsConfig {
        let mut c = GibbsConfig::default();
        let s = &self.gibbs;
        c.iterations = o.iterations.or(s.iterations).unwrap_or(c.iterations);
        c.burn_in = o.burn_in.or(s.burn_in).unwrap_or(c.burn_in);
        c.seed = o.seed.or(s.seed).unwrap_or(c.seed);
        c.thin = o.thin.or(s.thin).unwrap_or(c.thin);
        c
    }

    pub fn vb(&self, o: &Overrides) -> VBConfig {
        let mut c = VBConfig::default();
        c.eps = o.eps.or(self.vb.eps).unwrap_or(c.eps);
        c.max_iter = o.max_iter.or(self.vb.max_iter).unwrap_or(c.max_iter);
        c
    }
}
