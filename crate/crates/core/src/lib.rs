//! Pseudo-label generation for weakly supervised semantic segmentation.
//!
//! The pipeline turns image-level labels into dense training labels:
//!
//! 1. [`camgen`] accumulates class attention maps over training snapshots.
//! 2. [`seedgen`] fuses the accumulated attention with a saliency map into
//!    initial labels.
//! 3. [`pom`] marks background pixels that probably hold objects as ignore,
//!    using a threshold per class.
//! 4. [`nsrm`] keeps labels of multi-class images only near predicted
//!    objects.
//!
//! [`grunit`] holds the reasoning unit and its loss with hand-written
//! gradients, [`eval`] the metrics, [`synth`] a seeded corpus generator
//! with known ground truth, and [`pipeline`] / [`cli`] the batch driver.
//!
//! ```
//! use pseudolabel::maps::{LabelMap, BACKGROUND};
//! use pseudolabel::eval::{confusion, miou};
//!
//! let gt = LabelMap::new(1, 2, vec![BACKGROUND, 1]).unwrap();
//! let m = confusion(&gt, &gt, 1).unwrap();
//! assert_eq!(miou(&m).unwrap().mean, 1.0);
//! ```

pub mod camgen;
pub mod cli;
pub mod colormap;
pub mod config;
pub mod error;
pub mod eval;
pub mod grunit;
pub mod io;
pub mod maps;
pub mod morphology;
pub mod nsrm;
pub mod pipeline;
pub mod pom;
pub mod seedgen;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/maps.md")]
    mod maps {}
    #[doc = include_str!("../../../book/src/reasoning.md")]
    mod reasoning {}
    #[doc = include_str!("../../../book/src/accumulation.md")]
    mod accumulation {}
    #[doc = include_str!("../../../book/src/background.md")]
    mod background {}
    #[doc = include_str!("../../../book/src/mining.md")]
    mod mining {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
