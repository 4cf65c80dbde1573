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

#include "stgin/geo.hpp"
#include "stgin/rng.hpp"

namespace stgin {
namespace {

// Independent geohash reference: instead of interval bisection, scale each
// coordinate to a fixed-point integer and interleave its binary expansion
// directly. Bisection over [lo, hi) computes exactly the binary digits of
// (x - lo) / (hi - lo), so the two must agree everywhere.
std::string geohash_reference(double lat, double lon, int precision) {
  const int total_bits = precision * 5;
  const int lon_bits = (total_bits + 1) / 2;
  const int lat_bits = total_bits / 2;
  auto scaled = [](double x, double lo, double hi, int bits) -> std::uint64_t {
    const double span = hi - lo;
    auto v = static_cast<std::uint64_t>((x - lo) / span * std::pow(2.0, bits));
    const std::uint64_t maxv = (std::uint64_t(1) << bits) - 1;
    return v > maxv ? maxv : v;
  };
  const std::uint64_t ilon = scaled(lon, -180.0, 180.0, lon_bits);
  const std::uint64_t ilat = scaled(lat, -90.0, 90.0, lat_bits);
  std::string out;
  int idx = 0, nbits = 0;
  for (int i = 0; i < total_bits; ++i) {
    int bit;
    if (i % 2 == 0) {
      const int pos = lon_bits - 1 - i / 2;
      bit = static_cast<int>((ilon >> pos) & 1);
    } else {
      const int pos = lat_bits - 1 - i / 2;
      bit = static_cast<int>((ilat >> pos) & 1);
    }
    idx = idx * 2 + bit;
    if (++nbits == 5) {
      out.push_back(kGeohashAlphabet[idx]);
      idx = 0;
      nbits = 0;
    }
  }
  return out;
}

TEST(Geohash, KnownCells) {
  EXPECT_EQ(cell_of(31.2304, 121.4737), "wtw3s");
  EXPECT_EQ(cell_of(0.0, 0.0), "s0000");
}

TEST(Geohash, MatchesReferenceOnRandomCoordinates) {
  Rng rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const double lat = rng.uniform(-90.0, 90.0);
    const double lon = rng.uniform(-180.0, 180.0);
    ASSERT_EQ(geohash(lat, lon, 5), geohash_reference(lat, lon, 5)) << lat << "," << lon;
    ASSERT_EQ(geohash(lat, lon, 7), geohash_reference(lat, lon, 7)) << lat << "," << lon;
  }
}

TEST(Geohash, NearbyPointsShareCell) {
  // 1 m apart; length-5 cells are ~4.9 km, so collisions with a boundary are rare
  Rng rng(99);
  int same = 0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    const double lat = rng.uniform(-60.0, 60.0);
    const double lon = rng.uniform(-179.0, 179.0);
    const double dlat = 1.0 / 111320.0;  // ~1 m north
    if (cell_of(lat, lon) == cell_of(lat + dlat, lon)) ++same;
  }
  EXPECT_GT(same, n * 95 / 100);
}

TEST(Geohash, OutOfBoundsRejected) {
  EXPECT_THROW(cell_of(95.0, 0.0), ParseError);
  EXPECT_THROW(cell_of(0.0, 181.0), ParseError);
}

TEST(Haversine, IdenticalPointsBucketZero) {
  EXPECT_EQ(haversine_bucket(31.23, 121.47, 31.23, 121.47), 0);
  EXPECT_DOUBLE_EQ(haversine_km(10.0, 20.0, 10.0, 20.0), 0.0);
}

TEST(Haversine, HandComputedDistance) {
  // 0.01 deg of latitude = 0.01 * pi/180 rad; d = R * dlat = 1.11195 km
  const double km = haversine_km(31.23, 121.47, 31.24, 121.47);
  EXPECT_NEAR(km, 1.11195, 1e-3);
  EXPECT_EQ(haversine_bucket(31.23, 121.47, 31.24, 121.47), 2);
}

TEST(Haversine, AntipodalPointsBucketFive) {
  const double km = haversine_km(0.0, 0.0, 0.0, 180.0);
  EXPECT_NEAR(km, kEarthRadiusKm * 3.14159265358979, 1e-6 * km);
  EXPECT_EQ(haversine_bucket(0.0, 0.0, 0.0, 180.0), 5);
}

TEST(DistanceBucket, EdgesAndMonotonicity) {
  EXPECT_EQ(distance_bucket(0.0), 0);
  EXPECT_EQ(distance_bucket(0.49), 0);
  EXPECT_EQ(distance_bucket(0.5), 1);
  EXPECT_EQ(distance_bucket(1.0), 2);
  EXPECT_EQ(distance_bucket(2.0), 3);
  EXPECT_EQ(distance_bucket(5.0), 4);
  EXPECT_EQ(distance_bucket(10.0), 5);
  EXPECT_EQ(distance_bucket(20015.0), 5);
  int prev = 0;
  for (double km = 0.0; km < 30.0; km += 0.01) {
    const int b = distance_bucket(km);
    ASSERT_GE(b, prev);
    prev = b;
  }
}

}  // namespace
}  // namespace stgin
