//! Baseline recommenders, the ranked-list type they produce, and the method
//! output file format.

mod files;
mod list;
mod mostpop;
mod pathcount;

pub use files::{
    attach_paths, parse_path_file, parse_rec_file, render_path_file, render_rec_file,
    AttachOutcome, PathPolicy,
};
pub use list::{RecEntry, RecommendedList};
pub use mostpop::PopularityModel;
pub use pathcount::PathCountRecommender;
