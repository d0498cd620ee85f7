// Copyright 2026 The seqreward Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqreward/checkpoint.h"

#include <cmath>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "seqreward/errors.h"
#include "seqreward/neural.h"
#include "test_util.h"

namespace seqreward {
namespace {

bool BitIdentical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(CheckpointTest, BitExactFileRoundTrip) {
  Checkpoint ckpt;
  ckpt.metadata() = {{"kind", "test"}, {"ontology_hash", "abc"}};
  ckpt.Put({"special", {2, 3},
            {-0.0, std::numeric_limits<double>::denorm_min(), 1e308,
             std::nextafter(1.0, 2.0), -3.25, 0.1}});
  Rng rng(1);
  nn::DenseNet net("n", {5, 7, 3}, {nn::Activation::kRelu, nn::Activation::kSigmoid}, rng);
  net.ExportTo(ckpt);
  auto path = testing::TempDir("ckpt") / "a.ckpt";
  ckpt.Save(path);
  Checkpoint back = Checkpoint::Load(path);
  EXPECT_EQ(back.metadata(), ckpt.metadata());
  ASSERT_EQ(back.arrays().size(), ckpt.arrays().size());
  for (size_t i = 0; i < ckpt.arrays().size(); ++i) {
    EXPECT_EQ(back.arrays()[i].name, ckpt.arrays()[i].name);
    EXPECT_EQ(back.arrays()[i].shape, ckpt.arrays()[i].shape);
    EXPECT_TRUE(BitIdentical(back.arrays()[i].values, ckpt.arrays()[i].values));
  }
  EXPECT_EQ(back.Serialize(), ckpt.Serialize());

  Rng other(2);
  nn::DenseNet loaded("n", {5, 7, 3}, {nn::Activation::kRelu, nn::Activation::kSigmoid}, other);
  EXPECT_FALSE(loaded == net);
  loaded.ImportFrom(back);
  EXPECT_TRUE(loaded == net);
}

TEST(CheckpointTest, RejectsCorruptInput) {
  Checkpoint ckpt;
  ckpt.PutMatrix("m", Eigen::MatrixXd::Ones(2, 2));
  std::string bytes = ckpt.Serialize();
  EXPECT_THROW(Checkpoint::Deserialize(bytes.substr(0, bytes.size() - 3)), ConfigError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(Checkpoint::Deserialize(bad_version), ConfigError);
  EXPECT_THROW(Checkpoint::Deserialize("nope"), ConfigError);
  EXPECT_THROW(ckpt.Get("missing"), ConfigError);
}

TEST(CheckpointTest, ImportChecksShapes) {
  Rng rng(1);
  nn::DenseNet a("n", {2, 3}, {nn::Activation::kIdentity}, rng);
  nn::DenseNet b("n", {3, 3}, {nn::Activation::kIdentity}, rng);
  Checkpoint ckpt;
  a.ExportTo(ckpt);
  EXPECT_THROW(b.ImportFrom(ckpt), ConfigError);
}

}  // namespace
}  // namespace seqreward
