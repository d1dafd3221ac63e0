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

#include "dwknode/downwash.hpp"
#include "dwknode/kernels/wake_kernel.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dwknode;
using namespace dwknode::kernels;

namespace {

double rel_diff(double a, double b, double scale) { return std::abs(a - b) / (scale + 1e-300); }

void expect_close(const WakeMoments& a, const WakeMoments& b) {
  const double s0 = std::abs(a.s0) + std::abs(a.sx) + std::abs(a.sy);
  const double d0 = std::abs(a.d0) + std::abs(a.dx) + std::abs(a.dz) + std::abs(a.ex) + std::abs(a.exx) + std::abs(a.exz);
  for (auto [x, y] : {std::pair{a.s0, b.s0}, {a.sx, b.sx}, {a.sy, b.sy}}) EXPECT_LT(rel_diff(x, y, s0), 1e-12);
  for (auto [x, y] : {std::pair{a.d0, b.d0}, {a.dx, b.dx}, {a.dz, b.dz}, {a.ex, b.ex}, {a.exx, b.exx}, {a.exz, b.exz}}) {
    EXPECT_LT(rel_diff(x, y, d0), 1e-12);
  }
}

}  // namespace

TEST(WakeKernel, Avx2MatchesScalarReference) {
  if (!avx2_available()) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  for (int n : {2, 3, 7, 25, 64}) {
    const QuadratureGrid grid(n, 0.1);
    const WakeSamples samples{grid.ox(), grid.oy(), grid.weights()};
    for (int trial = 0; trial < 50; ++trial) {
      WakeParams p;
      p.xc = u(rng);
      p.yc = u(rng);
      p.amp = 5.0 * pos(rng);
      p.kappa = 1e3 * pos(rng);
      p.s = u(rng);
      p.dz_factor = 3.0 * pos(rng);
      for (bool deriv : {false, true}) {
        expect_close(wake_moments_scalar(samples, p, deriv), wake_moments_avx2(samples, p, deriv));
      }
    }
  }
}

TEST(WakeKernel, DerivativeSumsZeroWhenNotRequested) {
  const QuadratureGrid grid(9, 0.1);
  const WakeSamples samples{grid.ox(), grid.oy(), grid.weights()};
  WakeParams p{0.01, 0.0, 1.0, 500.0, 0.1, 2.0};
  const WakeMoments m = wake_moments_scalar(samples, p, false);
  EXPECT_GT(m.s0, 0.0);
  EXPECT_EQ(m.dx, 0.0);
  EXPECT_EQ(m.exz, 0.0);
}

TEST(WakeKernel, DispatchCanBePinned) {
  const Isa original = active_isa();
  set_active_isa(Isa::kScalar);
  EXPECT_EQ(active_isa(), Isa::kScalar);
  const QuadratureGrid grid(25, 0.1);
  const WakeSamples samples{grid.ox(), grid.oy(), grid.weights()};
  const WakeParams p{0.02, -0.01, 2.0, 800.0, 0.05, 2.5};
  const WakeMoments a = wake_moments(samples, p, true);
  const WakeMoments ref = wake_moments_scalar(samples, p, true);
  EXPECT_EQ(a.s0, ref.s0);
  EXPECT_EQ(a.exz, ref.exz);
  if (avx2_available()) {
    set_active_isa(Isa::kAvx2);
    EXPECT_EQ(active_isa(), Isa::kAvx2);
    expect_close(wake_moments(samples, p, true), ref);
  }
  set_active_isa(original);
  EXPECT_EQ(isa_name(Isa::kScalar), "scalar");
}

TEST(WakeKernel, ScalarDerivativesMatchFiniteDifferences) {
  const QuadratureGrid grid(25, 0.1);
  const WakeSamples samples{grid.ox(), grid.oy(), grid.weights()};
  WakeParams p{0.015, 0.005, 1.5, 900.0, 0.07, 3.0};
  const WakeMoments m = wake_moments_scalar(samples, p, true);
  // d(s0)/d(xc) = 2 * dx
  const double h = 1e-7;
  WakeParams pp = p, pm = p;
  pp.xc += h;
  pm.xc -= h;
  const double num = (wake_moments_scalar(samples, pp, false).s0 - wake_moments_scalar(samples, pm, false).s0) / (2 * h);
  EXPECT_NEAR(2.0 * m.dx, num, 1e-6 * std::abs(num));
  // d(s0)/d(s) = -2 * d0
  pp = p;
  pm = p;
  pp.s += h;
  pm.s -= h;
  const double nums = (wake_moments_scalar(samples, pp, false).s0 - wake_moments_scalar(samples, pm, false).s0) / (2 * h);
  EXPECT_NEAR(-2.0 * m.d0, nums, 1e-6 * std::abs(nums));
}
