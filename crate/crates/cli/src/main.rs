//! `mmrec`: prepare a dataset directory, train a model, evaluate it, and
//! produce recommendations, all from the command line.
//!
//! Exit codes: 0 on success, 1 on a usage error (bad flags), 2 on any data,
//! format, or processing error. Diagnostics go to standard error; the only
//! commands that write to standard output are `evaluate` (one JSON object)
//! and `recommend` (one item per line).

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use mmrec_core::attention::{score_items_for_user, top_k};
use mmrec_core::evaluation::Split;
use mmrec_core::io::{checkpoint, config, dataset_dir, features, interactions, metrics_log};
use mmrec_core::propagation::forward_all;
use mmrec_core::trainer::fit;
use mmrec_core::{
    remap_ids, split_dataset, validate_dataset, Dataset, Error, GraphBundle, Hyperparams,
};
use rand::SeedableRng;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mmrec", version, about = "Multimodal graph recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remap tokens, split interactions, build graphs, write a data directory
    Prepare {
        /// Interaction file: one `user item` pair per line
        #[arg(long)]
        interactions: PathBuf,
        /// Visual features, row r = item r by first appearance order
        #[arg(long)]
        visual: PathBuf,
        /// Textual features, same row convention
        #[arg(long)]
        textual: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Optional config supplying top_n, lambda, and the split seed
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on a prepared directory and write model artifacts
    Train {
        /// Prepared data directory from `prepare`
        #[arg(long)]
        data: PathBuf,
        /// Hyperparameter config file
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoint, metrics, and report
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a held-out split and print the result as JSON
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Model directory from `train`
        #[arg(long)]
        model: PathBuf,
        /// Ranking cutoff
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Print the top-K unseen items for one user
    Recommend {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// User token as it appears in the interaction file
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Val,
    Test,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}

fn run(command: Command) -> mmrec_core::Result<()> {
    match command {
        Command::Prepare {
            interactions,
            visual,
            textual,
            out,
            config,
        } => prepare(&interactions, &visual, &textual, &out, config.as_deref()),
        Command::Train { data, config, out } => train(&data, &config, &out),
        Command::Evaluate {
            data,
            model,
            k,
            split,
        } => evaluate(&data, &model, k, split),
        Command::Recommend {
            data,
            model,
            user,
            k,
        } => recommend(&data, &model, &user, k),
    }
}

fn prepare(
    interactions_path: &Path,
    visual_path: &Path,
    textual_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
) -> mmrec_core::Result<()> {
    let hp = match config_path {
        Some(p) => config::load_config(p)?,
        None => Hyperparams::default(),
    };
    hp.validate()?;

    let raw = interactions::load_interactions(interactions_path)?;
    let remapped = remap_ids(&raw);
    let visual = features::load(visual_path)?;
    let textual = features::load(textual_path)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(hp.seed);
    let (train, val, test) = split_dataset(&remapped.pairs, remapped.n_users(), &mut rng);
    let ds = Dataset {
        n_users: remapped.n_users(),
        n_items: remapped.n_items(),
        train,
        val,
        test,
        visual,
        textual,
    };
    validate_dataset(&ds)?;

    let graphs = GraphBundle::build(
        &ds.visual,
        &ds.textual,
        &ds.train,
        ds.n_users,
        hp.top_n,
        hp.lambda,
    )?;
    let meta = dataset_dir::PrepareMeta {
        n_users: ds.n_users,
        n_items: ds.n_items,
        d_visual: ds.visual.n_cols(),
        d_textual: ds.textual.n_cols(),
        top_n: hp.top_n,
        lambda: hp.lambda,
        seed: hp.seed,
    };
    dataset_dir::write_prepared(
        out,
        &ds,
        &graphs,
        &remapped.user_tokens,
        &remapped.item_tokens,
        &meta,
    )?;
    eprintln!(
        "prepared {} users, {} items, {}/{}/{} train/val/test pairs -> {}",
        ds.n_users,
        ds.n_items,
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        out.display()
    );
    Ok(())
}

fn train(data: &Path, config_path: &Path, out: &Path) -> mmrec_core::Result<()> {
    let prepared = dataset_dir::load_prepared(data)?;
    let hp = config::load_config(config_path)?;
    std::fs::create_dir_all(out)?;

    let mut logger = metrics_log::MetricsLogger::create(&out.join("metrics.jsonl"))?;
    let mut log_err = None;
    let outcome = fit(&prepared.dataset, &prepared.graphs, &hp, |rec| {
        eprintln!(
            "epoch {:>4}  loss {:.6}  val recall {:.4}  val ndcg {:.4}",
            rec.epoch, rec.loss.total, rec.val_recall, rec.val_ndcg
        );
        let record = metrics_log::MetricsRecord {
            epoch: rec.epoch,
            loss_total: rec.loss.total,
            loss_bpr: rec.loss.bpr,
            loss_mmbpr: rec.loss.mmbpr,
            loss_c: rec.loss.contrastive,
            recall: rec.val_recall,
            ndcg: rec.val_ndcg,
        };
        if let Err(e) = logger.log(&record) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }

    checkpoint::save(&out.join("model.mmp"), &outcome.params)?;
    let hp_json =
        serde_json::to_vec_pretty(&hp).map_err(|e| Error::Format(format!("config encode: {e}")))?;
    mmrec_core::io::atomic_write(&out.join("hyperparams.json"), &hp_json)?;
    let report_json = serde_json::to_vec_pretty(&outcome.report)
        .map_err(|e| Error::Format(format!("report encode: {e}")))?;
    mmrec_core::io::atomic_write(&out.join("report.json"), &report_json)?;
    eprintln!(
        "trained {} epochs (best epoch {}, val recall {:.4}) -> {}",
        outcome.report.epochs.len(),
        outcome.report.best_epoch,
        outcome.report.best_val_recall,
        out.display()
    );
    Ok(())
}

fn load_model(model: &Path) -> mmrec_core::Result<(mmrec_core::ModelParams<f32>, Hyperparams)> {
    let params = checkpoint::load(&model.join("model.mmp"))?;
    let hp: Hyperparams = serde_json::from_slice(&std::fs::read(model.join("hyperparams.json"))?)
        .map_err(|e| Error::Format(format!("hyperparams.json: {e}")))?;
    Ok((params, hp))
}

fn evaluate(data: &Path, model: &Path, k: usize, split: SplitArg) -> mmrec_core::Result<()> {
    let prepared = dataset_dir::load_prepared(data)?;
    let (params, mut hp) = load_model(model)?;
    hp.k_eval = k;
    let split = match split {
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };
    let report = mmrec_core::evaluation::evaluate_model(
        &params,
        &prepared.graphs,
        &prepared.dataset,
        split,
        &hp,
    )?;
    let json = serde_json::to_string(&report)
        .map_err(|e| Error::Format(format!("report encode: {e}")))?;
    println!("{json}");
    Ok(())
}

fn recommend(data: &Path, model: &Path, user: &str, k: usize) -> mmrec_core::Result<()> {
    let prepared = dataset_dir::load_prepared(data)?;
    let (params, hp) = load_model(model)?;
    let user_idx = prepared
        .user_tokens
        .iter()
        .position(|t| t == user)
        .ok_or_else(|| Error::InvalidInput(format!("unknown user token '{user}'")))? as usize;

    let ds = &prepared.dataset;
    let (emb, _) = forward_all(&params, &prepared.graphs, &ds.visual, &ds.textual, &hp)?;
    let scores = score_items_for_user(emb.user.row(user_idx), &emb, &hp)?;
    let mut seen = vec![false; ds.n_items];
    for &(u, i) in &ds.train {
        if u as usize == user_idx {
            seen[i as usize] = true;
        }
    }
    let ranked = top_k(&scores, k, &seen);
    for item in ranked {
        println!(
            "{}\t{:.6}",
            prepared.item_tokens[item as usize], scores[item as usize]
        );
    }
    Ok(())
}
