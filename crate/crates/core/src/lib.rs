//! Engine for turning an abstract scene description ("a busy city street")
//! into a curated, retextured asset collection.
//!
//! The stages communicate through a human-editable [`shoplist::ShoppingList`]:
//!
//! 1. [`upsampler`] expands the description into anchor and peripheral
//!    objects with attributes and condition, using in-context prompts
//!    against a completion provider.
//! 2. [`retrieval`] ranks database assets for each item by a weighted blend
//!    of image and text cosine similarity.
//! 3. [`texture`] builds texturing prompts and drives a texturing provider.
//! 4. [`metrics`] scores the resulting collection for diversity and scene
//!    similarity.
//!
//! [`pipeline`] wires the stages into reproducible runs and editable sessions.

pub mod embedding;
pub mod metrics;
pub mod numeric;
mod par;
pub mod pipeline;
pub mod provider;
pub mod retrieval;
pub mod shoplist;
pub mod texture;
pub mod upsampler;
