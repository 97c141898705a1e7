//! Acceptance checks for `delayloop`; everything lives in `tests/acceptance.rs`.
//!
//! Run with `cargo test -p delayloop-validation --test acceptance`. Each
//! criterion prints one PASS or FAIL line with the measured numbers; the
//! binary exits non-zero if any criterion fails.
