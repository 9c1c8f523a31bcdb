//! C ABI for nvspectro. Placeholder while the core crate builds.
