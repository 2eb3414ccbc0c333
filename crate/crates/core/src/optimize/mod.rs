//! Box-constrained maximization and the elastic-net least-squares solver.

mod elastic_net;
mod lbfgs;

pub use elastic_net::{elastic_net_ls, ElasticNetOptions};
pub use lbfgs::{maximize_box, BoxProblem, Diagnostics, LbfgsOptions};
