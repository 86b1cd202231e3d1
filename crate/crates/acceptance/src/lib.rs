//! Acceptance criteria for ergomix live in `tests/acceptance.rs`.
