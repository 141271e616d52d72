#pragma once

#include <cstddef>
#include <span>
#include <string>

// Batch arithmetic kernels for the hot inner loops: polytropic state
// traces and the Arrhenius integrand of the knock integral.  A scalar
// reference implementation always exists; an AVX2 variant is selected at
// runtime when the CPU supports it.  The two are equivalence-tested.

namespace ca50::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
// Force a backend (tests, benchmarking).  Throws std::runtime_error if
// the requested backend is unavailable on this CPU.
void force_backend(Backend b);
void reset_backend();  // back to auto-detected
std::string backend_name(Backend b);

// p[i] = p_ref * ratio[i]^k,  t[i] = t_ref * ratio[i]^(k-1)
// ratio is the volume ratio V_ref / V(theta_i); all ratios must be > 0.
void polytropic_states(std::span<const double> ratio, double p_ref,
                       double t_ref, double k, std::span<double> p_out,
                       std::span<double> t_out);

// out[i] = exp(-c13 * p[i]^c14 / t[i])
void arrhenius_integrand(std::span<const double> p, std::span<const double> t,
                         double c13, double c14, std::span<double> out);

namespace detail {
// Raw entry points, used by the dispatcher and the equivalence tests.
void polytropic_states_scalar(const double* ratio, std::size_t n, double p_ref,
                              double t_ref, double k, double* p_out,
                              double* t_out);
void arrhenius_integrand_scalar(const double* p, const double* t,
                                std::size_t n, double c13, double c14,
                                double* out);
#if CA50_HAVE_X86_INTRIN
void polytropic_states_avx2(const double* ratio, std::size_t n, double p_ref,
                            double t_ref, double k, double* p_out,
                            double* t_out);
void arrhenius_integrand_avx2(const double* p, const double* t, std::size_t n,
                              double c13, double c14, double* out);
#endif
}  // namespace detail

}  // namespace ca50::kernels
