//! Ground-truth utilities, synthetic libraries and the simulated expert.

pub mod benchmark;
pub mod expert;
pub mod pairs;
pub mod synthetic;
pub mod truth;

pub use benchmark::{evaluate_benchmark, BenchmarkFunction, BenchmarkKind};
pub use expert::{simulate_expert_label, ExpertUtility, Orientation, SimulatedExpert, UtilitySpec};
pub use pairs::benchmark_pairs;
pub use synthetic::{make_synthetic_library, LibrarySource, SyntheticLibrary, TableSource};
pub use truth::{ground_truth_utilities, write_ground_truth_csv, GroundTruth};
