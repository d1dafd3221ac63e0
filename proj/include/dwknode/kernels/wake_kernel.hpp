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

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace dwknode::kernels {

/// Per-call constants of the axial wake profile
///   a(r) = amp / (1 + kappa r^2)^2,   r^2 = (xc + ox)^2 + (yc + oy)^2.
/// `s` is the bottom vehicle's axial velocity, so the relative flow is a - s.
/// `dz_factor` is 1/(lambda * (z/lambda - z0)), the log-derivative scale of amp in z.
struct WakeParams {
  double xc = 0.0;
  double yc = 0.0;
  double amp = 0.0;
  double kappa = 0.0;
  double s = 0.0;
  double dz_factor = 0.0;
};

/// Weighted sums over the disk samples. With V_k = a_k - s:
///   s0 = sum w V^2,   sx = sum w ox V^2,   sy = sum w oy V^2
///   d0 = sum w V,     dx = sum w V da/dxc, dz = sum w V da/dz
///   ex = sum w ox V,  exx = sum w ox V da/dxc, exz = sum w ox V da/dz
/// The derivative sums are zero when requested without derivatives.
struct WakeMoments {
  double s0 = 0.0, sx = 0.0, sy = 0.0;
  double d0 = 0.0, dx = 0.0, dz = 0.0;
  double ex = 0.0, exx = 0.0, exz = 0.0;
};

/// Sample arrays in structure-of-arrays form. Lengths are equal and a
/// multiple of 4; padding entries carry zero weight.
struct WakeSamples {
  std::span<const double> ox;
  std::span<const double> oy;
  std::span<const double> w;
};

enum class Isa { kScalar, kAvx2 };

WakeMoments wake_moments_scalar(const WakeSamples& samples, const WakeParams& p, bool derivatives);
WakeMoments wake_moments_avx2(const WakeSamples& samples, const WakeParams& p, bool derivatives);

/// True when the CPU and the build both support the AVX2+FMA kernel.
bool avx2_available();

/// Kernel used by wake_moments(). Chosen once from CPU features; the
/// DWKNODE_ISA environment variable ("scalar" or "avx2") overrides it.
Isa active_isa();
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

WakeMoments wake_moments(const WakeSamples& samples, const WakeParams& p, bool derivatives);

}  // namespace dwknode::kernels
