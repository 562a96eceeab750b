//! Community curation of labeled evaluation datasets.
//!
//! Members label entities (edits, documents, any externally referenced
//! item) on a campaign's dimensions. Each entity carries one individual
//! label per member and a single primary label that the community edits
//! under compare-and-set. Per-entity disagreement and low-confidence
//! statistics sort entities into quadrants, datasheets and talk threads
//! document the campaign, and the curated data can be exported or used to
//! evaluate model predictions.
//!
//! [`Curation`] is the entry point; every mutation goes through it.

pub mod adapter;
pub mod campaign;
pub mod clock;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod metrics;
pub mod model;
pub mod service;
pub mod state;
pub mod store;

pub use adapter::{AdapterError, SourceAdapter, StaticAdapter};
pub use campaign::{CampaignView, ExclusionOutcome, NewCampaign, SortMode, TablePage, TableRow};
pub use clock::{Clock, SteppingClock, SystemClock};
pub use engine::{EntityView, PrimaryEditForm, SubmitOutcome, SubmitStatus};
pub use error::CurationError;
pub use service::{credential_digest, Curation};
pub use state::{Member, Notification, NotificationKind};
pub use store::{ExportFormat, ExportOptions, ExternalMapping};
