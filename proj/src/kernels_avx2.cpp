// AVX2 variants of the batch kernels.  exp/log are Cephes-style rational
// approximations, accurate to a couple of ulp over the domain these
// kernels are used in (normal positive inputs, |exp argument| < 708).
// Equivalence against the scalar reference is covered in test_kernels.

#include "ca50/kernels.hpp"

#if CA50_HAVE_X86_INTRIN

#include <immintrin.h>

#include <cstddef>

namespace ca50::kernels::detail {

namespace {

const __m256d kOne = _mm256_set1_pd(1.0);
const __m256d kHalf = _mm256_set1_pd(0.5);

// --- exp ------------------------------------------------------------

const __m256d kLog2E = _mm256_set1_pd(1.4426950408889634073599);
const __m256d kC1 = _mm256_set1_pd(6.93145751953125e-1);
const __m256d kC2 = _mm256_set1_pd(1.42860682030941723212e-6);
const __m256d kExpMax = _mm256_set1_pd(708.0);
const __m256d kExpMin = _mm256_set1_pd(-708.0);

const __m256d kExpP0 = _mm256_set1_pd(1.26177193074810590878e-4);
const __m256d kExpP1 = _mm256_set1_pd(3.02994407707441961300e-2);
const __m256d kExpP2 = _mm256_set1_pd(9.99999999999999999910e-1);
const __m256d kExpQ0 = _mm256_set1_pd(3.00198505138664455042e-6);
const __m256d kExpQ1 = _mm256_set1_pd(2.52448340349684104192e-3);
const __m256d kExpQ2 = _mm256_set1_pd(2.27265548208155028766e-1);
const __m256d kExpQ3 = _mm256_set1_pd(2.00000000000000000005e0);

inline __m256d exp_pd(__m256d x) {
    x = _mm256_min_pd(_mm256_max_pd(x, kExpMin), kExpMax);

    // n = round(x / ln2); r = x - n*ln2 via the split constant
    const __m256d n = _mm256_round_pd(
        _mm256_mul_pd(x, kLog2E),
        _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, kC1, x);
    r = _mm256_fnmadd_pd(n, kC2, r);

    const __m256d r2 = _mm256_mul_pd(r, r);
    __m256d p = _mm256_fmadd_pd(kExpP0, r2, kExpP1);
    p = _mm256_fmadd_pd(p, r2, kExpP2);
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_fmadd_pd(kExpQ0, r2, kExpQ1);
    q = _mm256_fmadd_pd(q, r2, kExpQ2);
    q = _mm256_fmadd_pd(q, r2, kExpQ3);
    // e^r = 1 + 2 p / (q - p)
    const __m256d er =
        _mm256_fmadd_pd(_mm256_set1_pd(2.0),
                        _mm256_div_pd(p, _mm256_sub_pd(q, p)), kOne);

    // scale by 2^n through the exponent field
    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i bias = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
    const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(bias, 52));
    return _mm256_mul_pd(er, scale);
}

// --- log ------------------------------------------------------------

const __m256d kSqrtHalf = _mm256_set1_pd(0.70710678118654752440);
const __m256d kLn2Hi = _mm256_set1_pd(0.693359375);
const __m256d kLn2Lo = _mm256_set1_pd(-2.121944400546905827679e-4);

const __m256d kLogP0 = _mm256_set1_pd(1.01875663804580931796e-4);
const __m256d kLogP1 = _mm256_set1_pd(4.97494994976747001425e-1);
const __m256d kLogP2 = _mm256_set1_pd(4.70579119878881725854e0);
const __m256d kLogP3 = _mm256_set1_pd(1.44989225341610930846e1);
const __m256d kLogP4 = _mm256_set1_pd(1.79368678507819816313e1);
const __m256d kLogP5 = _mm256_set1_pd(7.70838733755885391666e0);
const __m256d kLogQ0 = _mm256_set1_pd(1.12873587189167450590e1);
const __m256d kLogQ1 = _mm256_set1_pd(4.52279145837532221105e1);
const __m256d kLogQ2 = _mm256_set1_pd(8.29875266912776603211e1);
const __m256d kLogQ3 = _mm256_set1_pd(7.11544750618563894466e1);
const __m256d kLogQ4 = _mm256_set1_pd(2.31251620126765340583e1);

// x must be a positive normal double.
inline __m256d log_pd(__m256d x) {
    const __m256i bits = _mm256_castpd_si256(x);

    // biased exponent -> e with mantissa m in [0.5, 1)
    const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
    const __m256i e_i64 =
        _mm256_sub_epi64(_mm256_and_si256(exp_bits, _mm256_set1_epi64x(0x7FF)),
                         _mm256_set1_epi64x(1022));
    const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
    const __m256i half_exp = _mm256_set1_epi64x(0x3FE0000000000000LL);
    __m256d m = _mm256_castsi256_pd(
        _mm256_or_si256(_mm256_and_si256(bits, mant_mask), half_exp));

    // int64 -> double (values are tiny, low 32 bits suffice)
    const __m256i lo32 = _mm256_permutevar8x32_epi32(
        e_i64, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0));
    __m256d e = _mm256_cvtepi32_pd(_mm256_castsi256_si128(lo32));

    // if m < sqrt(1/2): m *= 2, e -= 1
    const __m256d lt = _mm256_cmp_pd(m, kSqrtHalf, _CMP_LT_OQ);
    m = _mm256_add_pd(m, _mm256_and_pd(lt, m));
    e = _mm256_sub_pd(e, _mm256_and_pd(lt, kOne));

    const __m256d z = _mm256_sub_pd(m, kOne);
    const __m256d z2 = _mm256_mul_pd(z, z);

    __m256d p = _mm256_fmadd_pd(kLogP0, z, kLogP1);
    p = _mm256_fmadd_pd(p, z, kLogP2);
    p = _mm256_fmadd_pd(p, z, kLogP3);
    p = _mm256_fmadd_pd(p, z, kLogP4);
    p = _mm256_fmadd_pd(p, z, kLogP5);
    __m256d q = _mm256_add_pd(z, kLogQ0);
    q = _mm256_fmadd_pd(q, z, kLogQ1);
    q = _mm256_fmadd_pd(q, z, kLogQ2);
    q = _mm256_fmadd_pd(q, z, kLogQ3);
    q = _mm256_fmadd_pd(q, z, kLogQ4);

    __m256d y = _mm256_mul_pd(_mm256_mul_pd(z, z2), _mm256_div_pd(p, q));
    y = _mm256_fmadd_pd(e, kLn2Lo, y);
    y = _mm256_fnmadd_pd(kHalf, z2, y);
    y = _mm256_add_pd(y, z);
    return _mm256_fmadd_pd(e, kLn2Hi, y);
}

}  // namespace

void polytropic_states_avx2(const double* ratio, std::size_t n, double p_ref,
                            double t_ref, double k, double* p_out,
                            double* t_out) {
    const __m256d vk = _mm256_set1_pd(k);
    const __m256d vk1 = _mm256_set1_pd(k - 1.0);
    const __m256d vp = _mm256_set1_pd(p_ref);
    const __m256d vt = _mm256_set1_pd(t_ref);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d lr = log_pd(_mm256_loadu_pd(ratio + i));
        _mm256_storeu_pd(p_out + i,
                         _mm256_mul_pd(vp, exp_pd(_mm256_mul_pd(vk, lr))));
        _mm256_storeu_pd(t_out + i,
                         _mm256_mul_pd(vt, exp_pd(_mm256_mul_pd(vk1, lr))));
    }
    if (i < n) {
        polytropic_states_scalar(ratio + i, n - i, p_ref, t_ref, k, p_out + i,
                                 t_out + i);
    }
}

void arrhenius_integrand_avx2(const double* p, const double* t, std::size_t n,
                              double c13, double c14, double* out) {
    const __m256d vc13 = _mm256_set1_pd(-c13);
    const __m256d vc14 = _mm256_set1_pd(c14);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d pc =
            exp_pd(_mm256_mul_pd(vc14, log_pd(_mm256_loadu_pd(p + i))));
        const __m256d arg = _mm256_div_pd(_mm256_mul_pd(vc13, pc),
                                          _mm256_loadu_pd(t + i));
        _mm256_storeu_pd(out + i, exp_pd(arg));
    }
    if (i < n) {
        arrhenius_integrand_scalar(p + i, t + i, n - i, c13, c14, out + i);
    }
}

}  // namespace ca50::kernels::detail

#endif  // CA50_HAVE_X86_INTRIN
