//! Open-addressing hash tables that never move a key once placed, with
//! probe-level instrumentation.
//!
//! Three insertion schemes share one [`OpenTable`] interface:
//!
//! * [`ElasticTable`]: non-greedy, batched over halving subarrays; lookups
//!   walk a two-dimensional probe grid flattened through [`phi_encode`].
//! * [`FunnelTable`]: greedy, one bucket per level plus a special array.
//! * [`UniformTable`]: greedy uniform probing, the classical baseline.
//!
//! Every insertion yields a [`Placement`] carrying both its search cost and
//! the number of slots it examined. [`experiment`] runs seeded trials and
//! [`metrics`] reduces them to amortized and worst-case expected costs.

pub mod elastic;
pub mod error;
pub mod experiment;
pub mod funnel;
pub mod metrics;
pub mod probe;
pub mod report;
pub mod table;
pub mod uniform;
pub mod verify;

pub use elastic::{
    build_elastic_layout, f_budget, plan_batches, BatchPlan, ElasticLayout, ElasticParams,
    ElasticTable,
};
pub use error::Error;
pub use experiment::{run_point, run_trial, run_trials, Execution, TableConfig, TrialResult};
pub use funnel::{build_funnel_layout, Attempt, FunnelLayout, FunnelParams, FunnelTable};
pub use metrics::{
    aggregate, growth_fit, InsertRecord, LinearFit, Placement, Scheme, SweepSummary, Tag,
};
pub use probe::{phi_decode, phi_encode, Key, ProbeIndexPair, ProbeSource};
pub use table::{Lookup, OpenTable};
pub use uniform::UniformTable;
