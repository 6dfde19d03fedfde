//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored. An
//! empty value unsets an optional key. Command-line flags are applied on top as
//! more `key = value` pairs, so a flag always wins over the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gibbs::CodeSampler;
use crate::model::{DictEstimate, ModelConfig};
use crate::synthetic::Sparsity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    VbFull,
    VbAtomwise,
    Gibbs,
}

impl Engine {
    pub fn is_vb(self) -> bool {
        !matches!(self, Engine::Gibbs)
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::VbFull => "vb-full",
            Engine::VbAtomwise => "vb-atomwise",
            Engine::Gibbs => "gibbs",
        })
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "vb-full" => Ok(Engine::VbFull),
            "vb-atomwise" => Ok(Engine::VbAtomwise),
            "gibbs" => Ok(Engine::Gibbs),
            other => Err(format!(
                "unknown engine `{other}` (expected vb-full, vb-atomwise or gibbs)"
            )),
        }
    }
}

fn sampler_name(s: CodeSampler) -> &'static str {
    match s {
        CodeSampler::Auto => "auto",
        CodeSampler::Precision => "precision",
        CodeSampler::LowRank => "low_rank",
    }
}

fn parse_sampler(s: &str) -> std::result::Result<CodeSampler, String> {
    match s {
        "auto" => Ok(CodeSampler::Auto),
        "precision" => Ok(CodeSampler::Precision),
        "low_rank" => Ok(CodeSampler::LowRank),
        other => Err(format!(
            "unknown code sampler `{other}` (expected auto, precision or low_rank)"
        )),
    }
}

/// Everything a command needs; every field is a config key of the same name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: Vec<Engine>,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub beta_vb: f64,
    pub beta_gibbs: f64,
    pub num_atoms: usize,
    pub vb_iters: usize,
    pub gibbs_iters: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub tol: f64,
    pub dict_estimate: DictEstimate,
    pub code_sampler: CodeSampler,

    pub signal_dim: usize,
    pub num_signals: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub sparsity: Vec<Sparsity>,
    pub trials: usize,
    pub threshold: f64,

    pub input: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub stride: usize,
    pub patch: usize,
    pub remove_mean: bool,

    pub dictionary: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub gain: f64,
    pub clean: Option<PathBuf>,

    /// Output directory. Not echoed: it changes where files go, not what they hold.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let vb = ModelConfig::vb_defaults(50);
        let gibbs = ModelConfig::gibbs_defaults(50);
        Self {
            engine: vec![Engine::Gibbs],
            seed: 0,
            a: vb.a,
            b: vb.b,
            c: vb.c,
            d: vb.d,
            beta_vb: vb.beta,
            beta_gibbs: gibbs.beta,
            num_atoms: 50,
            vb_iters: vb.max_iters,
            gibbs_iters: gibbs.max_iters,
            burn_in: gibbs.burn_in,
            thinning: 1,
            tol: vb.tol,
            dict_estimate: DictEstimate::LastSample,
            code_sampler: CodeSampler::Auto,
            signal_dim: 20,
            num_signals: vec![1000],
            snr_db: vec![30.0],
            sparsity: vec![Sparsity::Fixed(3)],
            trials: 5,
            threshold: crate::metrics::DEFAULT_SUCCESS_THRESHOLD,
            input: None,
            image: None,
            stride: 2,
            patch: crate::image::DEFAULT_PATCH,
            remove_mean: false,
            dictionary: None,
            sigma: None,
            gain: crate::denoise::DEFAULT_GAIN,
            clean: None,
            out: PathBuf::from("out"),
        }
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| format!("`{}`: {e}", t.trim()))
        })
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn one<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    /// Sets one key from its text form. `location` is used in error messages.
    pub fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        let v = value.trim();
        let res: std::result::Result<(), String> = (|| {
            match key {
                "engine" => self.engine = list(v)?,
                "seed" => self.seed = one(v)?,
                "a" => self.a = one(v)?,
                "b" => self.b = one(v)?,
                "c" => self.c = one(v)?,
                "d" => self.d = one(v)?,
                "beta_vb" => self.beta_vb = one(v)?,
                "beta_gibbs" => self.beta_gibbs = one(v)?,
                "num_atoms" => self.num_atoms = one(v)?,
                "vb_iters" => self.vb_iters = one(v)?,
                "gibbs_iters" => self.gibbs_iters = one(v)?,
                "burn_in" => self.burn_in = one(v)?,
                "thinning" => self.thinning = one(v)?,
                "tol" => self.tol = one(v)?,
                "dict_estimate" => self.dict_estimate = one(v)?,
                "code_sampler" => self.code_sampler = parse_sampler(v)?,
                "signal_dim" => self.signal_dim = one(v)?,
                "num_signals" => self.num_signals = list(v)?,
                "snr_db" => self.snr_db = list(v)?,
                "sparsity" => self.sparsity = list(v)?,
                "trials" => self.trials = one(v)?,
                "threshold" => self.threshold = one(v)?,
                "input" => self.input = path(v),
                "image" => self.image = path(v),
                "stride" => self.stride = one(v)?,
                "patch" => self.patch = one(v)?,
                "remove_mean" => self.remove_mean = one(v)?,
                "dictionary" => self.dictionary = path(v),
                "sigma" => {
                    self.sigma = if v.is_empty() { None } else { Some(one(v)?) };
                }
                "gain" => self.gain = one(v)?,
                "clean" => self.clean = path(v),
                "out" => self.out = PathBuf::from(v),
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        })();
        res.map_err(|message| Error::ConfigParse {
            location: location.to_string(),
            message: if message.starts_with("unknown key") {
                message
            } else {
                format!("key `{key}`: {message}")
            },
        })
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("{source}:{}", i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                location: location.clone(),
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value, &location)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every key except `out`, one per line, in a fixed order. Parsing the echo
    /// gives back an identical configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        };
        kv("engine", join(&self.engine));
        kv("seed", self.seed.to_string());
        kv("a", self.a.to_string());
        kv("b", self.b.to_string());
        kv("c", self.c.to_string());
        kv("d", self.d.to_string());
        kv("beta_vb", self.beta_vb.to_string());
        kv("beta_gibbs", self.beta_gibbs.to_string());
        kv("num_atoms", self.num_atoms.to_string());
        kv("vb_iters", self.vb_iters.to_string());
        kv("gibbs_iters", self.gibbs_iters.to_string());
        kv("burn_in", self.burn_in.to_string());
        kv("thinning", self.thinning.to_string());
        kv("tol", self.tol.to_string());
        kv("dict_estimate", self.dict_estimate.to_string());
        kv("code_sampler", sampler_name(self.code_sampler).to_string());
        kv("signal_dim", self.signal_dim.to_string());
        kv("num_signals", join(&self.num_signals));
        kv("snr_db", join(&self.snr_db));
        kv("sparsity", join(&self.sparsity));
        kv("trials", self.trials.to_string());
        kv("threshold", self.threshold.to_string());
        kv("input", show_path(&self.input));
        kv("image", show_path(&self.image));
        kv("stride", self.stride.to_string());
        kv("patch", self.patch.to_string());
        kv("remove_mean", self.remove_mean.to_string());
        kv("dictionary", show_path(&self.dictionary));
        kv(
            "sigma",
            self.sigma.map(|v| v.to_string()).unwrap_or_default(),
        );
        kv("gain", self.gain.to_string());
        kv("clean", show_path(&self.clean));
        s
    }

    /// Model settings for one engine and seed.
    pub fn model_config(&self, engine: Engine, seed: u64) -> ModelConfig {
        let base = ModelConfig {
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            beta: self.beta_vb,
            num_atoms: self.num_atoms,
            max_iters: self.vb_iters,
            burn_in: 0,
            thinning: self.thinning,
            tol: self.tol,
            seed,
            dict_estimate: self.dict_estimate,
        };
        if engine.is_vb() {
            base
        } else {
            ModelConfig {
                beta: self.beta_gibbs,
                max_iters: self.gibbs_iters,
                burn_in: self.burn_in,
                ..base
            }
        }
    }

    /// The single engine of a training or denoising run.
    pub fn single_engine(&self) -> Result<Engine> {
        match self.engine[..] {
            [e] => Ok(e),
            _ => Err(Error::InvalidConfig(format!(
                "this command trains one dictionary; got engines {}",
                join(&self.engine)
            ))),
        }
    }
}
