//! Causal direction inference between two groups of attributes by comparing
//! how well minimum-description-length coding forests compress each side
//! given the other.

pub mod bench;
pub mod causal;
pub mod codelength;
pub mod data;
pub mod error;
pub mod forest;
pub mod search;
pub mod synth;

pub use causal::{infer, CausalVerdict, Direction, Indicator, InferenceOptions, MarginalMode};
pub use data::{Attribute, AttributeType, Dataset, Side};
pub use error::{CrackError, Result};
pub use forest::{CodingForest, CodingTree, ModelClass};
pub use search::{crack, SearchOptions, SearchResult};
