// SPDX-License-Identifier: MIT OR Apache-2.0

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/bandit.md")]
pub mod bandit {}

#[doc = include_str!("../../../book/src/policy_update.md")]
pub mod policy_update {}

#[doc = include_str!("../../../book/src/advantages.md")]
pub mod advantages {}

#[doc = include_str!("../../../book/src/steering.md")]
pub mod steering {}

#[doc = include_str!("../../../book/src/latent.md")]
pub mod latent {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
