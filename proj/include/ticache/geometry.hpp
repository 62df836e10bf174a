// Copyright 2026 The ticbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ticache/core.hpp"

namespace tic::geometry {

enum class Category { Contour, Feature, Pupil, Eye };

struct Landmark3D {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  Category category = Category::Feature;

  bool operator==(const Landmark3D&) const = default;
};

struct Point2D {
  int id = 0;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2D&) const = default;
};

struct LandmarkSet2D {
  std::vector<Point2D> points;
  int frame_index = 0;

  bool operator==(const LandmarkSet2D&) const = default;
};

/// x' = scale * R(rotation) * x + translation
struct SimilarityTransform2D {
  double scale = 1.0;
  double rotation = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2D apply(const Point2D& p) const {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    return {p.id, scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
  }

  LandmarkSet2D apply(const LandmarkSet2D& set) const {
    LandmarkSet2D out;
    out.frame_index = set.frame_index;
    out.points.reserve(set.points.size());
    for (const auto& p : set.points) out.points.push_back(apply(p));
    return out;
  }

  SimilarityTransform2D inverse() const {
    const double inv = 1.0 / scale;
    const double c = std::cos(-rotation);
    const double s = std::sin(-rotation);
    return {inv, -rotation, -inv * (c * tx - s * ty), -inv * (s * tx + c * ty)};
  }
};

struct SimilarityFit {
  SimilarityTransform2D transform;
  double rmse = 0.0;
};

inline LandmarkSet2D project_orthographic(const std::vector<Landmark3D>& points,
                                          int frame_index = 0) {
  if (points.empty()) throw Error(ErrorCode::EmptyLandmarkSet, "nothing to project");
  LandmarkSet2D out;
  out.frame_index = frame_index;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back({p.id, p.x, p.y});
  return out;
}

/// Drops contour points; keeps feature, pupil and eye points in input order.
inline std::vector<Landmark3D> filter_expression_aware(const std::vector<Landmark3D>& points) {
  std::vector<Landmark3D> out;
  out.reserve(points.size());
  std::copy_if(points.begin(), points.end(), std::back_inserter(out),
               [](const Landmark3D& p) { return p.category != Category::Contour; });
  return out;
}

namespace detail {

struct Centered {
  double mean_x = 0.0;
  double mean_y = 0.0;
};

inline Centered centroid(const std::vector<Point2D>& pts) {
  Centered c;
  for (const auto& p : pts) {
    c.mean_x += p.x;
    c.mean_y += p.y;
  }
  c.mean_x /= static_cast<double>(pts.size());
  c.mean_y /= static_cast<double>(pts.size());
  return c;
}

// Least-squares similarity between index-aligned point lists.
inline SimilarityFit fit_aligned(const std::vector<Point2D>& src, const std::vector<Point2D>& dst) {
  if (src.size() < 3) {
    throw Error(ErrorCode::InsufficientPoints,
                "need at least 3 corresponding points, got " + std::to_string(src.size()));
  }
  const Centered cs = centroid(src);
  const Centered cd = centroid(dst);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  double dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double ax = src[i].x - cs.mean_x;
    const double ay = src[i].y - cs.mean_y;
    const double bx = dst[i].x - cd.mean_x;
    const double by = dst[i].y - cd.mean_y;
    sxx += ax * ax;
    syy += ay * ay;
    sxy += ax * ay;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
  }

  // Eigenvalues of the 2x2 source scatter; a vanishing minor one means the
  // source points lie on a line.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  const double lmax = tr / 2.0 + disc;
  const double lmin = tr / 2.0 - disc;
  if (lmax <= 0.0 || lmin <= 1e-12 * lmax) {
    throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear");
  }

  const double norm = std::hypot(dot, cross);
  if (norm <= 0.0) {
    throw Error(ErrorCode::DegenerateConfiguration, "target points collapse to a single point");
  }

  SimilarityTransform2D t;
  t.rotation = std::atan2(cross, dot);
  t.scale = norm / tr;
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  t.tx = cd.mean_x - t.scale * (c * cs.mean_x - s * cs.mean_y);
  t.ty = cd.mean_y - t.scale * (s * cs.mean_x + c * cs.mean_y);

  double sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point2D m = t.apply(src[i]);
    sq += (m.x - dst[i].x) * (m.x - dst[i].x) + (m.y - dst[i].y) * (m.y - dst[i].y);
  }
  return {t, std::sqrt(sq / static_cast<double>(src.size()))};
}

}  // namespace detail

/// Closed-form least-squares similarity mapping `source` onto `target`.
/// Points are paired by id; ids present in only one set are ignored.
inline SimilarityFit estimate_similarity(const LandmarkSet2D& source, const LandmarkSet2D& target) {
  std::unordered_map<int, const Point2D*> by_id;
  for (const auto& p : target.points) by_id.emplace(p.id, &p);

  std::vector<Point2D> src;
  std::vector<Point2D> dst;
  for (const auto& p : source.points) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) continue;
    src.push_back(p);
    dst.push_back(*it->second);
  }
  return detail::fit_aligned(src, dst);
}

/// Estimates one transform from driving frame 0 to the reference and warps
/// every driving frame with it, so head motion relative to frame 0 survives.
inline std::vector<LandmarkSet2D> retarget_sequence(const std::vector<LandmarkSet2D>& driving,
                                                    const LandmarkSet2D& reference) {
  if (driving.empty()) throw Error(ErrorCode::EmptyLandmarkSet, "driving sequence is empty");
  const SimilarityFit fit = estimate_similarity(driving.front(), reference);
  std::vector<LandmarkSet2D> out;
  out.reserve(driving.size());
  for (const auto& frame : driving) out.push_back(fit.transform.apply(frame));
  return out;
}

namespace detail {

inline void split_eye_set(const std::vector<Landmark3D>& eye, std::vector<Point2D>& pupils,
                          std::vector<Point2D>& socket) {
  for (const auto& p : eye) {
    if (p.category == Category::Pupil) pupils.push_back({p.id, p.x, p.y});
    if (p.category == Category::Eye) socket.push_back({p.id, p.x, p.y});
  }
  if (pupils.empty() || socket.size() < 3) {
    throw Error(ErrorCode::IncompleteEyeSet, "eye set needs >= 1 pupil and >= 3 socket points, got " +
                                                 std::to_string(pupils.size()) + " and " +
                                                 std::to_string(socket.size()));
  }
}

inline double max_pairwise_distance(const std::vector<Point2D>& pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      best = std::max(best, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    }
  }
  return best;
}

}  // namespace detail

/// Moves pupils into the reference eye socket. The driving pupil offset from
/// its socket centroid, divided by the socket extent (max pairwise distance
/// of socket points), is rotated into the reference socket's orientation and
/// rescaled by the reference extent. Socket points correspond by order.
/// Results are clamped to the reference socket bounding box grown by 10% of
/// its size on every side.
inline std::vector<Point2D> transfer_pupils(const std::vector<Landmark3D>& driving_eye,
                                            const std::vector<Landmark3D>& reference_eye) {
  std::vector<Point2D> d_pupils, d_socket, r_pupils, r_socket;
  detail::split_eye_set(driving_eye, d_pupils, d_socket);
  detail::split_eye_set(reference_eye, r_pupils, r_socket);
  if (d_socket.size() != r_socket.size()) {
    throw Error(ErrorCode::IncompleteEyeSet, "driving and reference sockets differ in point count");
  }

  const auto cd = detail::centroid(d_socket);
  const auto cr = detail::centroid(r_socket);
  const double ext_d = detail::max_pairwise_distance(d_socket);
  const double ext_r = detail::max_pairwise_distance(r_socket);
  if (ext_d <= 0.0 || ext_r <= 0.0) {
    throw Error(ErrorCode::IncompleteEyeSet, "eye socket has zero extent");
  }

  // Rotation only; the extent ratio carries the scale.
  double dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < d_socket.size(); ++i) {
    const double ax = d_socket[i].x - cd.mean_x, ay = d_socket[i].y - cd.mean_y;
    const double bx = r_socket[i].x - cr.mean_x, by = r_socket[i].y - cr.mean_y;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
  }
  const double theta = (dot == 0.0 && cross == 0.0) ? 0.0 : std::atan2(cross, dot);
  const double c = std::cos(theta);
  const double s = std::sin(theta);

  double min_x = r_socket[0].x, max_x = min_x, min_y = r_socket[0].y, max_y = min_y;
  for (const auto& p : r_socket) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double pad_x = 0.1 * (max_x - min_x);
  const double pad_y = 0.1 * (max_y - min_y);

  std::vector<Point2D> out;
  out.reserve(d_pupils.size());
  for (const auto& p : d_pupils) {
    const double ox = (p.x - cd.mean_x) / ext_d;
    const double oy = (p.y - cd.mean_y) / ext_d;
    const double x = cr.mean_x + ext_r * (c * ox - s * oy);
    const double y = cr.mean_y + ext_r * (s * ox + c * oy);
    out.push_back({p.id, std::clamp(x, min_x - pad_x, max_x + pad_x),
                   std::clamp(y, min_y - pad_y, max_y + pad_y)});
  }
  return out;
}

/// Splits eye and pupil points into (left, right) by comparing each point's x
/// with the mean x of all eye points.
inline std::pair<std::vector<Landmark3D>, std::vector<Landmark3D>> split_eyes(
    const std::vector<Landmark3D>& points) {
  double mean_x = 0.0;
  std::size_t n = 0;
  for (const auto& p : points) {
    if (p.category == Category::Eye || p.category == Category::Pupil) {
      mean_x += p.x;
      ++n;
    }
  }
  std::pair<std::vector<Landmark3D>, std::vector<Landmark3D>> eyes;
  if (n == 0) return eyes;
  mean_x /= static_cast<double>(n);
  for (const auto& p : points) {
    if (p.category != Category::Eye && p.category != Category::Pupil) continue;
    (p.x < mean_x ? eyes.first : eyes.second).push_back(p);
  }
  return eyes;
}

// Synthetic face layout in normalized image coordinates (y grows downward).
// Ids are assigned in emission order:
//   0..35    contour: ellipse centred (0.5, 0.52), semi-axes 0.36 x 0.44
//   36..55   brows: 10 points per brow on a shallow arc
//   56..67   nose: 6 bridge points, 6 nostril-arc points
//   68..95   mouth: 16 outer-lip + 12 inner-lip points on ellipses
//   96..109  left eye: 12 socket points, then 2 pupil points
//   110..123 right eye: same layout
struct SyntheticFaceLayout {
  static constexpr int kContour = 36;
  static constexpr int kFeature = 60;
  static constexpr int kSocketPerEye = 12;
  static constexpr int kPupilPerEye = 2;
  static constexpr int kTotal = kContour + kFeature + 2 * (kSocketPerEye + kPupilPerEye);

  static constexpr double kContourCx = 0.5;
  static constexpr double kContourCy = 0.52;
  static constexpr double kContourRx = 0.36;
  static constexpr double kContourRy = 0.44;
};

/// Deterministic labelled face. `jitter` is the standard deviation of the
/// Gaussian noise added to every coordinate; jitter 0 gives the exact layout.
inline std::vector<Landmark3D> synthetic_face(std::uint64_t seed, double jitter) {
  using L = SyntheticFaceLayout;
  Rng rng(seed);
  std::vector<Landmark3D> out;
  out.reserve(L::kTotal);
  const double two_pi = 2.0 * std::numbers::pi;

  auto depth = [](double x, double y) {
    const double dx = (x - 0.5) / 0.5;
    const double dy = (y - 0.5) / 0.5;
    return 0.1 * std::sqrt(std::max(0.0, 1.0 - dx * dx - dy * dy));
  };
  auto emit = [&](double x, double y, Category cat) {
    Landmark3D p{static_cast<int>(out.size()), x, y, depth(x, y), cat};
    if (jitter > 0.0) {
      p.x += jitter * rng.normal();
      p.y += jitter * rng.normal();
      p.z += jitter * rng.normal();
    }
    out.push_back(p);
  };

  for (int i = 0; i < L::kContour; ++i) {
    const double a = two_pi * i / L::kContour;
    emit(L::kContourCx + L::kContourRx * std::cos(a), L::kContourCy + L::kContourRy * std::sin(a),
         Category::Contour);
  }
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    for (int i = 0; i < 10; ++i) {
      const double u = i / 9.0;
      const double x = 0.5 + sign * (0.06 + 0.14 * u);
      const double y = 0.35 - 0.03 * std::sin(std::numbers::pi * u);
      emit(x, y, Category::Feature);
    }
  }
  for (int i = 0; i < 6; ++i) emit(0.5, 0.42 + 0.03 * i, Category::Feature);
  for (int i = 0; i < 6; ++i) {
    const double a = std::numbers::pi * (0.15 + 0.7 * i / 5.0);
    emit(0.5 + 0.05 * std::cos(a), 0.58 + 0.02 * std::sin(a), Category::Feature);
  }
  for (int i = 0; i < 16; ++i) {
    const double a = two_pi * i / 16;
    emit(0.5 + 0.12 * std::cos(a), 0.74 + 0.05 * std::sin(a), Category::Feature);
  }
  for (int i = 0; i < 12; ++i) {
    const double a = two_pi * i / 12;
    emit(0.5 + 0.08 * std::cos(a), 0.74 + 0.02 * std::sin(a), Category::Feature);
  }
  for (int side = 0; side < 2; ++side) {
    const double cx = side == 0 ? 0.38 : 0.62;
    const double cy = 0.45;
    for (int i = 0; i < L::kSocketPerEye; ++i) {
      const double a = two_pi * i / L::kSocketPerEye;
      emit(cx + 0.06 * std::cos(a), cy + 0.025 * std::sin(a), Category::Eye);
    }
    emit(cx, cy, Category::Pupil);
    emit(cx, cy - 0.012, Category::Pupil);
  }
  return out;
}

}  // namespace tic::geometry
