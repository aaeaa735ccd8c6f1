//! Deictic object selection from hand keypoints and depth.

pub mod geometry;
pub mod hand;
pub mod io;
#[doc(hidden)]
pub mod oracle;
pub mod scene;
pub mod selector;
pub mod sim;
pub mod stats;
