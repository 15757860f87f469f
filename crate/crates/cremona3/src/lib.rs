//! Exact-arithmetic engine for quadratic birational transformations of
//! the complex projective 3-space and their one-parameter flows.
//!
//! Modules:
//! - [`arith`]: big-rational scalars and the coefficient ring
//!   `Q[t,s][exponential generators]`,
//! - [`forms`]: sparse homogeneous forms in `x0..x3`, Jacobians,
//!   divisibility, linear-factor extraction, quadratic-form rank,
//! - [`maps`]: validation, the seven-type classifier, normal forms,
//!   inverses and composition of quadratic rational maps,
//! - [`flows`]: the catalog of one-parameter quadratic flows, exact
//!   group-law verification, fixed/mobile analysis and linear-conjugacy
//!   decisions.

pub mod arith;
pub mod forms;
pub mod maps;
pub mod flows;
