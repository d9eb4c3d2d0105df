pub mod enumerate;
pub mod ga;
pub mod sep_cma;

pub use enumerate::{all_rules, evaluate_rule, EnumerationReport, EnumerationSpec, RuleRecord};
pub use ga::{ga_illuminate, ga_step, Archive, GaConfig, GaStepStats, Member};
pub use sep_cma::{SepCmaParams, SepCmaState};
