//! Task arrival and preparation: the window manager releases batches of
//! tasks at a fixed cadence, and the preprocessor narrows delivered tasks to
//! the ready ones in priority order.

mod preprocess;
mod window;

pub use preprocess::{filter_ready, prioritize, PreprocessError};
pub use window::{next_window, WindowConfig, WorkloadCursor};
