/*
 Copyright 2026 The dwknode Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "dwknode/kernels/wake_kernel.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define DWKNODE_HAVE_AVX2 1
#else
#define DWKNODE_HAVE_AVX2 0
#endif

namespace dwknode::kernels {

#if DWKNODE_HAVE_AVX2

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

// Compiled with -mavx2 -mfma for this translation unit only; callers go
// through wake_moments(), which checks CPU support first.
WakeMoments wake_moments_avx2(const WakeSamples& samples, const WakeParams& p, bool derivatives) {
  const std::size_t n = samples.w.size();
  const double* ox_ptr = samples.ox.data();
  const double* oy_ptr = samples.oy.data();
  const double* w_ptr = samples.w.data();

  const __m256d xc = _mm256_set1_pd(p.xc);
  const __m256d yc = _mm256_set1_pd(p.yc);
  const __m256d kappa = _mm256_set1_pd(p.kappa);
  const __m256d amp = _mm256_set1_pd(p.amp);
  const __m256d s = _mm256_set1_pd(p.s);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d m4kappa = _mm256_set1_pd(-4.0 * p.kappa);
  const __m256d dzf = _mm256_set1_pd(p.dz_factor);

  __m256d s0 = _mm256_setzero_pd(), sx = _mm256_setzero_pd(), sy = _mm256_setzero_pd();
  __m256d d0 = _mm256_setzero_pd(), dx_acc = _mm256_setzero_pd(), dz_acc = _mm256_setzero_pd();
  __m256d ex = _mm256_setzero_pd(), exx = _mm256_setzero_pd(), exz = _mm256_setzero_pd();

  for (std::size_t k = 0; k + 4 <= n; k += 4) {
    const __m256d w = _mm256_loadu_pd(w_ptr + k);
    const __m256d ox = _mm256_loadu_pd(ox_ptr + k);
    const __m256d oy = _mm256_loadu_pd(oy_ptr + k);
    const __m256d dx = _mm256_add_pd(xc, ox);
    const __m256d dy = _mm256_add_pd(yc, oy);
    const __m256d r2 = _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy));
    const __m256d u = _mm256_mul_pd(kappa, r2);
    const __m256d g = _mm256_div_pd(one, _mm256_add_pd(one, u));
    const __m256d a = _mm256_mul_pd(amp, _mm256_mul_pd(g, g));
    const __m256d v = _mm256_sub_pd(a, s);
    const __m256d wv = _mm256_mul_pd(w, v);
    const __m256d wv2 = _mm256_mul_pd(wv, v);
    s0 = _mm256_add_pd(s0, wv2);
    sx = _mm256_fmadd_pd(ox, wv2, sx);
    sy = _mm256_fmadd_pd(oy, wv2, sy);
    if (derivatives) {
      const __m256d a_x = _mm256_mul_pd(_mm256_mul_pd(m4kappa, a), _mm256_mul_pd(dx, g));
      const __m256d a_z =
          _mm256_mul_pd(_mm256_mul_pd(a, dzf), _mm256_fmsub_pd(four, _mm256_mul_pd(u, g), one));
      const __m256d oxwv = _mm256_mul_pd(ox, wv);
      d0 = _mm256_add_pd(d0, wv);
      dx_acc = _mm256_fmadd_pd(wv, a_x, dx_acc);
      dz_acc = _mm256_fmadd_pd(wv, a_z, dz_acc);
      ex = _mm256_add_pd(ex, oxwv);
      exx = _mm256_fmadd_pd(oxwv, a_x, exx);
      exz = _mm256_fmadd_pd(oxwv, a_z, exz);
    }
  }

  WakeMoments m;
  m.s0 = hsum(s0);
  m.sx = hsum(sx);
  m.sy = hsum(sy);
  if (derivatives) {
    m.d0 = hsum(d0);
    m.dx = hsum(dx_acc);
    m.dz = hsum(dz_acc);
    m.ex = hsum(ex);
    m.exx = hsum(exx);
    m.exz = hsum(exz);
  }
  return m;
}

#else

WakeMoments wake_moments_avx2(const WakeSamples& samples, const WakeParams& p, bool derivatives) {
  return wake_moments_scalar(samples, p, derivatives);
}

#endif

}  // namespace dwknode::kernels
