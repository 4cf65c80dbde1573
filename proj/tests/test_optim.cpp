/*
 * Copyright 2026 The stgin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>

#include "stgin/adam.hpp"
#include "stgin/params.hpp"
#include "stgin/tape.hpp"

namespace stgin {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ModelDims toy_dims() {
  ModelDims d;
  d.d = 16;
  d.n_users = 3;
  d.n_pois = 8;
  d.n_cells = 2;
  return d;
}

TEST(InitParams, WithinBoundAndSeedStable) {
  auto s1 = init_params<float>(toy_dims(), 7);
  auto s2 = init_params<float>(toy_dims(), 7);
  auto s3 = init_params<float>(toy_dims(), 8);
  const float bound = 1.0f / std::sqrt(16.0f);
  bool any_differs = false;
  for (std::size_t i = 0; i < s1.count(); ++i) {
    const auto& a = s1.value(static_cast<int>(i));
    const auto& b = s2.value(static_cast<int>(i));
    const auto& c = s3.value(static_cast<int>(i));
    EXPECT_EQ(a.data, b.data);
    if (a.data != c.data) any_differs = true;
    for (float x : a.data) {
      ASSERT_GE(x, -bound);
      ASSERT_LE(x, bound);
    }
  }
  EXPECT_TRUE(any_differs);
  EXPECT_EQ(s1.get(pname::poi_emb).rows, 8u);
  EXPECT_EQ(s1.get(pname::poi_emb).cols, 16u);
  EXPECT_EQ(s1.get(pname::cell_emb).rows, 3u);  // 2 cells + oov row
}

TEST(InitParams, EmpiricalMeanNearZero) {
  ModelDims d;
  d.d = 16;
  d.n_users = 500;  // user_emb alone gives 8000 entries
  d.n_pois = 200;
  d.n_cells = 4;
  auto s = init_params<double>(d, 123);
  const auto& t = s.get(pname::user_emb);
  double mean = 0;
  for (double x : t.data) mean += x;
  mean /= double(t.data.size());
  // uniform on [-a, a]: sigma of the sample mean is a/sqrt(3 n)
  const double a = 1.0 / 4.0;
  const double sigma_mean = a / std::sqrt(3.0 * double(t.data.size()));
  EXPECT_LT(std::abs(mean), 3.0 * sigma_mean);
}

TEST(InitParams, DuplicateRegistrationRejected) {
  ParamStore<float> s;
  s.add("w", Tensor<float>::vec(3));
  EXPECT_THROW(s.add("w", Tensor<float>::vec(3)), Error);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  auto store = init_params<double>(toy_dims(), 3);
  auto before = store.get(pname::fuse_h).data;
  Adam<double> adam(store);
  Tape<double> tape(&store);
  // loss touches nothing: a pure constant
  tape.backward(tape.scalar(0.0));
  adam.step(store, tape);
  EXPECT_EQ(store.get(pname::fuse_h).data, before);
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  // constant gradient g: step-1 update is lr * sign(g) up to eps
  ParamStore<double> store;
  store.add("p", Tensor<double>::vec(4));
  store.mut("p").data = {1.0, -2.0, 3.0, 0.5};
  auto before = store.get("p").data;
  AdamConfig cfg;
  Adam<double> adam(store, cfg);
  Tape<double> tape(&store);
  auto p = tape.param("p");
  auto w = tape.constant(std::vector<double>{0.3, -0.7, 10.0, 0.001});
  tape.backward(tape.dot(p, w));  // grad of p = w
  adam.step(store, tape);
  for (int i = 0; i < 4; ++i) {
    const double delta = store.get("p").data[std::size_t(i)] - before[std::size_t(i)];
    const double expected = -cfg.lr * (tape.value(w)[std::size_t(i)] > 0 ? 1.0 : -1.0);
    EXPECT_NEAR(delta, expected, cfg.lr * 1e-2) << i;
  }
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    auto store = init_params<float>(toy_dims(), 11);
    Adam<float> adam(store);
    for (int step = 0; step < 10; ++step) {
      Tape<float> tape(&store);
      auto x = tape.lookup(pname::poi_emb, std::uint32_t(step % 8));
      auto y = tape.matvec(tape.param(pname::fuse_h),
                           tape.concat({x, x, x, x}));
      tape.backward(tape.sum(tape.leaky_relu(y, 0.2f)));
      adam.step(store, tape);
    }
    return store.get(pname::poi_emb).data;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientAborts) {
  ParamStore<double> store;
  store.add("p", Tensor<double>::vec(2));
  store.mut("p").data = {1e308, 1e308};
  Adam<double> adam(store);
  Tape<double> tape(&store);
  auto p = tape.param("p");
  auto sq = tape.dot(p, p);  // overflows to inf
  auto sq2 = tape.dot(sq, sq);
  tape.backward(sq2);
  EXPECT_THROW(adam.step(store, tape), NumericError);
}

TEST(Checkpoint, RoundTrip) {
  auto store = init_params<float>(toy_dims(), 21);
  CheckpointManifest m;
  m.dims = toy_dims();
  m.seed = 21;
  m.step = 57;
  m.variant = "rt";
  m.users = Vocab({"u1", "u2", "u3"});
  m.pois = Vocab({"p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8"});
  m.cells = Vocab({"wtw3s", "wtw3t"});
  const std::string path = temp_path("stgin_ckpt.bin");
  save_checkpoint(store, m, path);
  auto [back, m2] = load_checkpoint(path);
  ASSERT_EQ(back.count(), store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    EXPECT_EQ(back.name(static_cast<int>(i)), store.name(static_cast<int>(i)));
    EXPECT_EQ(back.value(static_cast<int>(i)), store.value(static_cast<int>(i)));
  }
  EXPECT_EQ(m2.dims.d, 16);
  EXPECT_EQ(m2.seed, 21u);
  EXPECT_EQ(m2.step, 57);
  EXPECT_EQ(m2.variant, "rt");
  EXPECT_EQ(m2.users, m.users);
  EXPECT_EQ(m2.pois, m.pois);
  EXPECT_EQ(m2.cells, m.cells);
}

TEST(Checkpoint, CorruptFileRejected) {
  auto store = init_params<float>(toy_dims(), 22);
  CheckpointManifest m;
  m.dims = toy_dims();
  const std::string path = temp_path("stgin_ckpt_bad.bin");
  save_checkpoint(store, m, path);
  std::string bytes = read_file(path);
  bytes[bytes.size() / 3] ^= 0x5a;
  write_file(path, bytes);
  EXPECT_THROW(load_checkpoint(path), ChecksumError);
}

}  // namespace
}  // namespace stgin
