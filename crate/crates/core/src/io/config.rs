use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use std::fs;
use std::path::Path;

/// Parse `key = value` config text into hyperparameters. Keys match the
/// field names. Missing keys keep their defaults. `#` starts a comment,
/// either on its own line or after a value. Unknown keys and malformed
/// values are errors carrying the 1-based line number.
pub fn parse_config(text: &str) -> Result<Hyperparams> {
    let mut hp = Hyperparams::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(Error::Parse {
            line,
            msg: "expected 'key = value'".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        apply(&mut hp, key, value).map_err(|msg| Error::Parse { line, msg })?;
    }
    Ok(hp)
}

fn apply(hp: &mut Hyperparams, key: &str, value: &str) -> std::result::Result<(), String> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse()
            .map_err(|e| format!("bad value for {key}: {e}"))
    }
    match key {
        "d" => hp.d = parse(key, value)?,
        "top_n" => hp.top_n = parse(key, value)?,
        "lambda" => hp.lambda = parse(key, value)?,
        "mu" => hp.mu = parse(key, value)?,
        "alpha" => hp.alpha = parse(key, value)?,
        "beta" => hp.beta = parse(key, value)?,
        "tau" => hp.tau = parse(key, value)?,
        "lr" => hp.lr = parse(key, value)?,
        "batch_size" => hp.batch_size = parse(key, value)?,
        "max_epochs" => hp.max_epochs = parse(key, value)?,
        "patience" => hp.patience = parse(key, value)?,
        "k_eval" => hp.k_eval = parse(key, value)?,
        "seed" => hp.seed = parse(key, value)?,
        "n_layers_ui" => hp.n_layers_ui = parse(key, value)?,
        "n_layers_item" => hp.n_layers_item = parse(key, value)?,
        "cf_model" => hp.cf_model = value.parse().map_err(|e| format!("{e}"))?,
        "use_attention" => hp.use_attention = parse(key, value)?,
        "use_multimodal" => hp.use_multimodal = parse(key, value)?,
        "l2_reg" => hp.l2_reg = parse(key, value)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<Hyperparams> {
    parse_config(&fs::read_to_string(path)?)
}
