#pragma once

namespace polband {

/// Worker count used by parallel kernels and the study driver.
int thread_count();
void set_thread_count(int n);

/// Applies POLBAND_THREADS if set; returns the resulting worker count.
int configure_threads_from_env();

/// Kernel backend: the serial reference or the OpenMP implementation.
enum class Backend { serial, parallel };

}  // namespace polband
