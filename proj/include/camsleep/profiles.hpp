#pragma once

// High-occupancy histograms, k-means clustering of street profiles and the
// cyclical time encoding shared by the RL state and the SVM baseline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "camsleep/common.hpp"
#include "camsleep/data.hpp"

namespace camsleep {

struct TemporalFeatures {
  double hour_sin = 0.0;
  double hour_cos = 1.0;
  double day_sin = 0.0;
  double day_cos = 1.0;
};

inline TemporalFeatures cyclical_encode(Timestamp t) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double hour_angle = kTwoPi * minute_of_day(t) / kMinutesPerDay;
  const double day_angle = kTwoPi * day_of_week(t) / 7.0;
  return {std::sin(hour_angle), std::cos(hour_angle), std::sin(day_angle), std::cos(day_angle)};
}

enum class HistogramAxis { HourOfDay, DayOfWeek };

inline std::size_t bin_count(HistogramAxis axis) { return axis == HistogramAxis::HourOfDay ? 24 : 7; }

struct OccupancyHistogram {
  std::string street_id;
  HistogramAxis axis = HistogramAxis::HourOfDay;
  std::vector<double> weights;
};

/// Counts High minutes per hour (or weekday, Monday = 0) and scales so the
/// largest bin is 1. A street without High minutes gives all zeros.
inline OccupancyHistogram high_occupancy_histogram(const OccupancySeries& series, HistogramAxis axis,
                                                   const OccupancyThresholds& th = {}) {
  if (series.empty()) throw Error("histogram of empty series");
  OccupancyHistogram h{series.street_id, axis, std::vector<double>(bin_count(axis), 0.0)};
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!is_high(series.values[i], th)) continue;
    const Timestamp t = series.time_at(i);
    const int bin = axis == HistogramAxis::HourOfDay ? minute_of_day(t) / kMinutesPerHour : day_of_week(t);
    h.weights[static_cast<std::size_t>(bin)] += 1.0;
  }
  const double peak = *std::max_element(h.weights.begin(), h.weights.end());
  if (peak > 0.0) {
    for (auto& w : h.weights) w /= peak;
  }
  return h;
}

// ---------------------------------------------------------------------------
// k-means

using Point = std::vector<double>;

struct ClusterAssignment {
  int k = 0;
  std::vector<Point> centroids;
  std::vector<int> labels;  // one per input point
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // inertia after each assignment step
};

inline double squared_distance(const Point& a, const Point& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

namespace detail {

inline int nearest_centroid(const Point& p, const std::vector<Point>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

inline std::vector<Point> kmeans_plus_plus(const std::vector<Point>& points, int k, Rng& rng) {
  std::vector<Point> centroids;
  centroids.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = uniform_index(rng, points.size());
    } else {
      double target = uniform01(rng) * total;
      for (pick = 0; pick + 1 < points.size(); ++pick) {
        if (target < d2[pick]) break;
        target -= d2[pick];
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

inline ClusterAssignment lloyd(const std::vector<Point>& points, std::vector<Point> centroids, int max_iter) {
  ClusterAssignment out;
  out.k = static_cast<int>(centroids.size());
  out.labels.assign(points.size(), -1);
  const std::size_t dim = points.front().size();
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int c = nearest_centroid(points[i], centroids);
      if (c != out.labels[i]) changed = true;
      out.labels[i] = c;
      inertia += squared_distance(points[i], centroids[static_cast<std::size_t>(c)]);
    }
    out.inertia_trace.push_back(inertia);
    out.iterations = it + 1;
    if (!changed && it > 0) break;
    std::vector<Point> sums(centroids.size(), Point(dim, 0.0));
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(out.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  // Final assignment against the final centroids.
  out.inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.labels[i] = nearest_centroid(points[i], centroids);
    out.inertia += squared_distance(points[i], centroids[static_cast<std::size_t>(out.labels[i])]);
  }
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` runs by
/// inertia (ties keep the earliest restart).
inline ClusterAssignment kmeans(const std::vector<Point>& points, int k, std::uint64_t seed = 0, int max_iter = 300,
                                int restarts = 10) {
  if (k <= 0) throw Error("k-means needs k >= 1");
  if (points.empty()) throw Error("k-means on empty point set");
  if (static_cast<std::size_t>(k) > points.size()) throw Error("k-means needs k <= number of points");
  if (max_iter < 1) throw Error("k-means needs max_iter >= 1");
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw Error("k-means points have mixed dimensions");
  }
  Rng rng = substream(seed, "kmeans");
  ClusterAssignment best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto run = detail::lloyd(points, detail::kmeans_plus_plus(points, k, rng), max_iter);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

/// Inertia for k = 1..k_max (capped at the number of points), for elbow plots.
inline std::vector<double> inertia_curve(const std::vector<Point>& points, int k_max, std::uint64_t seed = 0) {
  std::vector<double> out;
  for (int k = 1; k <= k_max && static_cast<std::size_t>(k) <= points.size(); ++k) {
    out.push_back(kmeans(points, k, seed).inertia);
  }
  return out;
}

}  // namespace camsleep
