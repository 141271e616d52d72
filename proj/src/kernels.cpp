#include "ca50/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace ca50::kernels {

namespace detail {

void polytropic_states_scalar(const double* ratio, std::size_t n, double p_ref,
                              double t_ref, double k, double* p_out,
                              double* t_out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double lr = std::log(ratio[i]);
        p_out[i] = p_ref * std::exp(k * lr);
        t_out[i] = t_ref * std::exp((k - 1.0) * lr);
    }
}

void arrhenius_integrand_scalar(const double* p, const double* t,
                                std::size_t n, double c13, double c14,
                                double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::exp(c14 * std::log(p[i]));
        out[i] = std::exp(-c13 * pc / t[i]);
    }
}

}  // namespace detail

namespace {

Backend detect() {
#if CA50_HAVE_X86_INTRIN
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        if (const char* env = std::getenv("CA50_KERNEL_BACKEND");
            env != nullptr && std::string(env) == "scalar") {
            return Backend::scalar;
        }
        return Backend::avx2;
    }
#endif
    return Backend::scalar;
}

Backend& current() {
    static Backend b = detect();
    return b;
}

}  // namespace

Backend active_backend() { return current(); }

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
#if CA50_HAVE_X86_INTRIN
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void force_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::runtime_error("kernel backend not available on this CPU: " +
                                 backend_name(b));
    }
    current() = b;
}

void reset_backend() { current() = detect(); }

std::string backend_name(Backend b) {
    return b == Backend::scalar ? "scalar" : "avx2";
}

void polytropic_states(std::span<const double> ratio, double p_ref,
                       double t_ref, double k, std::span<double> p_out,
                       std::span<double> t_out) {
    if (ratio.size() != p_out.size() || ratio.size() != t_out.size()) {
        throw std::invalid_argument("polytropic_states: span size mismatch");
    }
#if CA50_HAVE_X86_INTRIN
    if (current() == Backend::avx2) {
        detail::polytropic_states_avx2(ratio.data(), ratio.size(), p_ref,
                                       t_ref, k, p_out.data(), t_out.data());
        return;
    }
#endif
    detail::polytropic_states_scalar(ratio.data(), ratio.size(), p_ref, t_ref,
                                     k, p_out.data(), t_out.data());
}

void arrhenius_integrand(std::span<const double> p, std::span<const double> t,
                         double c13, double c14, std::span<double> out) {
    if (p.size() != t.size() || p.size() != out.size()) {
        throw std::invalid_argument("arrhenius_integrand: span size mismatch");
    }
#if CA50_HAVE_X86_INTRIN
    if (current() == Backend::avx2) {
        detail::arrhenius_integrand_avx2(p.data(), t.data(), p.size(), c13,
                                         c14, out.data());
        return;
    }
#endif
    detail::arrhenius_integrand_scalar(p.data(), t.data(), p.size(), c13, c14,
                                       out.data());
}

}  // namespace ca50::kernels
