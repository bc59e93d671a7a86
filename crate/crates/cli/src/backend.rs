use std::path::Path;
use std::time::Duration;

use darkscan_core::classifier::{ClassifierBackend, RemoteBackend, TransformerBackend};
use darkscan_core::evaluation::LabeledExample;
use darkscan_core::{Error, Lexicon, LrBaseline};

use crate::{BackendArgs, BackendKind};

pub type DynBackend = Box<dyn ClassifierBackend<f64>>;

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("the {0} backend needs --model (or DARKSCAN_MODEL_DIR)")]
    MissingModel(&'static str),
    #[error(transparent)]
    Core(#[from] Error),
}

pub fn lexicon(path: Option<&Path>) -> Result<Lexicon, Error> {
    Ok(match path {
        Some(p) => Lexicon::from_path(p)?,
        None => Lexicon::builtin(),
    })
}

/// Builds the selected backend. `train` supplies training data for an `lr`
/// backend without `--model`.
pub fn build(args: &BackendArgs, train: Option<(&[LabeledExample], &[LabeledExample], u64)>) -> Result<DynBackend, SetupError> {
    Ok(match args.backend {
        BackendKind::Lexical => Box::new(lexicon(args.lexicon.as_deref())?),
        BackendKind::Lr => match (&args.model, train) {
            (Some(path), _) => Box::new(LrBaseline::from_path(path).map_err(Error::from)?),
            (None, Some((train, val, seed))) => {
                let hyper = darkscan_core::evaluation::LrHyperParams {
                    seed,
                    ..Default::default()
                };
                let model: LrBaseline = darkscan_core::train_lr_baseline(train, val, hyper).map_err(Error::from)?;
                Box::new(model)
            }
            (None, None) => return Err(SetupError::MissingModel("lr")),
        },
        BackendKind::Transformer => {
            let dir = args.model.as_ref().ok_or(SetupError::MissingModel("transformer"))?;
            Box::new(TransformerBackend::<f64>::from_dir(dir).map_err(Error::from)?)
        }
        BackendKind::Remote => Box::new(
            RemoteBackend::<f64>::new(&args.endpoint, Duration::from_secs(60)).map_err(Error::from)?,
        ),
    })
}
