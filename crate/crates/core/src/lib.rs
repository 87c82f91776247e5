// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bandit-level simulator for vector-steered policy optimization (VSPO)
//! and reward-shaped GRPO.
//!
//! The crate is organized bottom-up:
//!
//! - [`bandit`]: two-objective bandit instances, the scalarized reward and
//!   its gap structure.
//! - [`policy`]: the closed-form KL-regularized soft update that drives
//!   both methods.
//! - [`advantage`]: sampled and exact arm-level advantage scores, with
//!   Monte Carlo estimators for the exact ones.
//! - [`steering`]: steering pairs, the `gamma`-good certificate and the
//!   iteration-complexity bounds.
//! - [`latent`]: a tiny latent policy on which a contrastive steering vector
//!   is built and used to train with steered rollout groups.
//! - [`harness`]: run configurations, dynamics drivers, verification
//!   campaigns and output files, as used by the `steerbandit` binary.
//!
//! ```
//! use steerbandit::{bandit::BanditInstance, policy::Policy};
//!
//! let inst = BanditInstance::new(vec![0.6, 0.4, 0.5], vec![0.0, 0.0, 1.0], 1.0)?;
//! assert_eq!(inst.target_arm(), 2);
//! let pi = Policy::new(vec![0.3, 0.2, 0.5])?;
//! assert!((inst.expected_reward(&pi)? - 1.01).abs() < 1e-12);
//! # Ok::<(), steerbandit::Error>(())
//! ```

pub mod advantage;
pub mod bandit;
pub mod error;
pub mod harness;
pub mod latent;
pub mod policy;
pub mod steering;

pub use bandit::{BanditInstance, ScalarizedSummary};
pub use error::{Error, Result};
pub use policy::Policy;
pub use steering::{ContrastSpec, SteeringPair};
