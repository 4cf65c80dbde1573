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

#pragma once

#include <cmath>
#include <string>

#include "stgin/errors.hpp"

namespace stgin {

// Geohash base32 alphabet (no a, i, l, o).
inline constexpr char kGeohashAlphabet[] = "0123456789bcdefghjkmnpqrstuvwxyz";

inline constexpr int kCellCodeLength = 5;  // ~4.9 km x 4.9 km cells
inline constexpr double kEarthRadiusKm = 6371.0;

inline bool lat_in_bounds(double lat) { return lat >= -90.0 && lat <= 90.0; }
inline bool lon_in_bounds(double lon) { return lon >= -180.0 && lon <= 180.0; }

// Gustavo Niemeyer's geohash, by interval bisection, longitude bit first.
inline std::string geohash(double lat, double lon, int precision) {
  if (!lat_in_bounds(lat) || !lon_in_bounds(lon))
    throw ParseError("geohash: coordinates out of bounds: lat=" + std::to_string(lat) +
                     " lon=" + std::to_string(lon));
  std::string out;
  out.reserve(static_cast<std::size_t>(precision));
  double lat_lo = -90.0, lat_hi = 90.0;
  double lon_lo = -180.0, lon_hi = 180.0;
  bool even = true;  // even bits bisect longitude
  int idx = 0, bit = 0;
  while (static_cast<int>(out.size()) < precision) {
    if (even) {
      double mid = (lon_lo + lon_hi) / 2.0;
      if (lon >= mid) {
        idx = idx * 2 + 1;
        lon_lo = mid;
      } else {
        idx = idx * 2;
        lon_hi = mid;
      }
    } else {
      double mid = (lat_lo + lat_hi) / 2.0;
      if (lat >= mid) {
        idx = idx * 2 + 1;
        lat_lo = mid;
      } else {
        idx = idx * 2;
        lat_hi = mid;
      }
    }
    even = !even;
    if (++bit == 5) {
      out.push_back(kGeohashAlphabet[idx]);
      bit = 0;
      idx = 0;
    }
  }
  return out;
}

// The spatial grid key used throughout: a length-5 geohash.
inline std::string cell_of(double lat, double lon) { return geohash(lat, lon, kCellCodeLength); }

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double deg = 3.14159265358979323846 / 180.0;
  const double dlat = (lat2 - lat1) * deg;
  const double dlon = (lon2 - lon1) * deg;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

inline constexpr int kNumDistanceBuckets = 6;

// Bucket edges in km: [0,0.5) [0.5,1) [1,2) [2,5) [5,10) [10,inf)
inline int distance_bucket(double km) {
  if (km < 0.5) return 0;
  if (km < 1.0) return 1;
  if (km < 2.0) return 2;
  if (km < 5.0) return 3;
  if (km < 10.0) return 4;
  return 5;
}

inline int haversine_bucket(double lat1, double lon1, double lat2, double lon2) {
  if (!lat_in_bounds(lat1) || !lon_in_bounds(lon1) || !lat_in_bounds(lat2) || !lon_in_bounds(lon2))
    throw ParseError("haversine_bucket: coordinates out of bounds");
  return distance_bucket(haversine_km(lat1, lon1, lat2, lon2));
}

}  // namespace stgin
