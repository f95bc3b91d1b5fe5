//! Holds the `acceptance` test target, which prints one verdict line per
//! requirement and exits non-zero if any fails.
