//! Classifier comparison and representational analysis: McNemar exact
//! test, bootstrapped RDM distances, classical MDS and result tables.

mod bootstrap;
mod mcnemar;
mod mds;
mod report;

pub use bootstrap::{bootstrap_indices, bootstrap_rdm_distance, BootstrapConfig, BootstrapResult};
pub use mcnemar::{mcnemar_exact, Better, PairedOutcomes};
pub use mds::{classical_mds, mds_sidecar, mds_svg, symmetric_eigen, MdsEmbedding, MdsSidecar};
pub use report::{
    read_error_curve_csv, read_error_curve_json, write_error_curve_csv, write_error_curve_json, write_mcnemar_csv,
    EpochErrors, McNemarRow,
};
