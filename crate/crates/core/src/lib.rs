//! Binary shape retrieval with morphological pattern spectra, rotation-invariant
//! local binary patterns and Earth Mover's Distance.
//!
//! Pipeline: [`raster`] loads binary images, [`morphology`] computes distance
//! maps, skeletons and contours, [`descriptors`] turns them into three
//! normalized histograms per shape, [`emd`] compares histograms,
//! [`retrieval`] builds knowledge bases and ranks them against queries, and
//! [`evaluation`] scores rankings on labelled datasets.

pub mod cli;
pub mod descriptors;
pub mod emd;
pub mod error;
pub mod evaluation;
pub mod morphology;
pub mod raster;
pub mod retrieval;

pub use descriptors::{describe, DescriptorSet, Histogram, HistogramKind};
pub use emd::{emd, GroundDistanceMatrix};
pub use error::{Error, Result};
pub use evaluation::{bulls_eye, top_k_table, BullsEyeReport, TopKTable};
pub use raster::{load_shape, BinaryShape};
pub use retrieval::{build_knowledge_base, query, FusionWeights, KnowledgeBase, SelfMatch};
