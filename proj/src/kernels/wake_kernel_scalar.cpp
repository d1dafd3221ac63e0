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

namespace dwknode::kernels {

WakeMoments wake_moments_scalar(const WakeSamples& samples, const WakeParams& p, bool derivatives) {
  WakeMoments m;
  const std::size_t n = samples.w.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = samples.w[k];
    const double ox = samples.ox[k];
    const double dx = p.xc + ox;
    const double dy = p.yc + samples.oy[k];
    const double u = p.kappa * (dx * dx + dy * dy);
    const double g = 1.0 / (1.0 + u);
    const double a = p.amp * g * g;
    const double v = a - p.s;
    const double wv = w * v;
    const double wv2 = wv * v;
    m.s0 += wv2;
    m.sx += ox * wv2;
    m.sy += samples.oy[k] * wv2;
    if (derivatives) {
      const double a_x = -4.0 * a * p.kappa * dx * g;
      const double a_z = a * p.dz_factor * (4.0 * u * g - 1.0);
      m.d0 += wv;
      m.dx += wv * a_x;
      m.dz += wv * a_z;
      m.ex += ox * wv;
      m.exx += ox * wv * a_x;
      m.exz += ox * wv * a_z;
    }
  }
  return m;
}

}  // namespace dwknode::kernels
