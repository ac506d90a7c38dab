#pragma once

namespace dynaspect {

/// Applies the DYNASPECT_THREADS cap when set to a positive integer.
/// Returns the thread count in effect (1 without OpenMP).
int configure_threads_from_env();

} // namespace dynaspect
