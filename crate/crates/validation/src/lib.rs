//! Holds the workspace acceptance gate in `tests/acceptance.rs`.
