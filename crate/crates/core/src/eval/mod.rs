//! Benchmark evaluation: wind-rose weights, weighted scores, the wake
//! interaction graph, a grid-search yaw oracle and the static-to-dynamic
//! transfer harness.

mod dag;
mod oracle;
mod report;
mod score;
mod transfer;
mod weights;

pub use dag::{build_dag, default_dag, InteractionDag, CONE_HALF_ANGLE_DEG, MAX_RANGE_D};
pub use oracle::{grid_search_oracle, Objective, OracleGrid, OracleResult, SearchMode};
pub use report::{mean_std, ResultTable};
pub use score::{condition_config, evaluate_score, ConditionResult, ScoreReport, EVAL_EPISODE_LEN};
pub use transfer::{transfer_finetune, AdaptedEnv, TransferReport, FINETUNE_STEPS};
pub use weights::{extract_weights, Condition, EvalWeights};
