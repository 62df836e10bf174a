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

// Landmark files are JSON:
//   {"frames":[{"index":0,"points":[{"id":0,"x":0.5,"y":0.5,"z":0.0,"cat":"eye"}]}]}
// "cat" is one of contour|feature|pupil|eye. Doubles are written in shortest
// round-trip form, so parse(dump(frames)) reproduces every coordinate bit for
// bit.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ticache/core.hpp"
#include "ticache/geometry.hpp"

namespace tic::geometry {

struct LandmarkFrame {
  int index = 0;
  std::vector<Landmark3D> points;

  bool operator==(const LandmarkFrame&) const = default;
};

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::Contour: return "contour";
    case Category::Feature: return "feature";
    case Category::Pupil: return "pupil";
    case Category::Eye: return "eye";
  }
  return "feature";
}

inline Category parse_category(const std::string& s) {
  if (s == "contour") return Category::Contour;
  if (s == "feature") return Category::Feature;
  if (s == "pupil") return Category::Pupil;
  if (s == "eye") return Category::Eye;
  throw Error(ErrorCode::InvalidConfig, "unknown landmark category '" + s + "'");
}

inline nlohmann::json landmarks_to_json(const std::vector<LandmarkFrame>& frames) {
  nlohmann::json doc;
  doc["frames"] = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json jf;
    jf["index"] = f.index;
    jf["points"] = nlohmann::json::array();
    for (const auto& p : f.points) {
      jf["points"].push_back({{"id", p.id},
                              {"x", p.x},
                              {"y", p.y},
                              {"z", p.z},
                              {"cat", std::string(category_name(p.category))}});
    }
    doc["frames"].push_back(std::move(jf));
  }
  return doc;
}

inline std::string dump_landmarks(const std::vector<LandmarkFrame>& frames) {
  return landmarks_to_json(frames).dump(1) + "\n";
}

inline std::vector<LandmarkFrame> landmarks_from_json(const nlohmann::json& doc) {
  try {
    std::vector<LandmarkFrame> frames;
    for (const auto& jf : doc.at("frames")) {
      LandmarkFrame f;
      f.index = jf.at("index").get<int>();
      if (f.index < 0) throw Error(ErrorCode::InvalidConfig, "negative frame index");
      std::unordered_set<int> seen;
      for (const auto& jp : jf.at("points")) {
        Landmark3D p;
        p.id = jp.at("id").get<int>();
        p.x = jp.at("x").get<double>();
        p.y = jp.at("y").get<double>();
        p.z = jp.at("z").get<double>();
        p.category = parse_category(jp.at("cat").get<std::string>());
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
          throw Error(ErrorCode::InvalidConfig, "non-finite coordinate for id " + std::to_string(p.id));
        }
        if (!seen.insert(p.id).second) {
          throw Error(ErrorCode::InvalidConfig, "duplicate landmark id " + std::to_string(p.id));
        }
        f.points.push_back(p);
      }
      frames.push_back(std::move(f));
    }
    return frames;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed landmark document: ") + e.what());
  }
}

inline std::vector<LandmarkFrame> parse_landmarks(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("landmark JSON: ") + e.what());
  }
  return landmarks_from_json(doc);
}

inline std::vector<LandmarkFrame> read_landmark_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open landmark file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_landmarks(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

inline void write_landmark_file(const std::string& path, const std::vector<LandmarkFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write landmark file " + path);
  out << dump_landmarks(frames);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

/// Landmark alignment for a driving sequence against one reference frame.
/// Contour points are dropped, every frame is warped by the similarity
/// estimated from driving frame 0 to the reference (z scaled alike), and
/// pupils are re-placed inside the reference sockets when both faces carry
/// eye points.
inline std::vector<LandmarkFrame> align_frames(const std::vector<LandmarkFrame>& driving,
                                               const LandmarkFrame& reference) {
  if (driving.empty()) throw Error(ErrorCode::EmptyLandmarkSet, "driving sequence is empty");
  const auto ref = filter_expression_aware(reference.points);
  if (ref.empty()) throw Error(ErrorCode::EmptyLandmarkSet, "reference has no non-contour points");
  const auto ref2d = project_orthographic(ref, reference.index);

  std::vector<std::vector<Landmark3D>> kept;
  std::vector<LandmarkSet2D> sets;
  for (const auto& f : driving) {
    kept.push_back(filter_expression_aware(f.points));
    if (kept.back().empty()) {
      throw Error(ErrorCode::EmptyLandmarkSet, "driving frame " + std::to_string(f.index) + " has no points");
    }
    sets.push_back(project_orthographic(kept.back(), f.index));
  }
  const double scale = estimate_similarity(sets.front(), ref2d).transform.scale;
  const auto warped = retarget_sequence(sets, ref2d);
  const auto [ref_left, ref_right] = split_eyes(ref);

  std::vector<LandmarkFrame> out;
  for (std::size_t i = 0; i < driving.size(); ++i) {
    LandmarkFrame f{driving[i].index, {}};
    for (std::size_t j = 0; j < kept[i].size(); ++j) {
      const auto& p = warped[i].points[j];
      f.points.push_back({p.id, p.x, p.y, kept[i][j].z * scale, kept[i][j].category});
    }
    const auto [left, right] = split_eyes(kept[i]);
    const std::pair<const std::vector<Landmark3D>*, const std::vector<Landmark3D>*> pairs[] = {
        {&left, &ref_left}, {&right, &ref_right}};
    for (const auto& [d, r] : pairs) {
      if (d->empty() || r->empty()) continue;
      for (const auto& moved : transfer_pupils(*d, *r)) {
        for (auto& p : f.points) {
          if (p.id == moved.id && p.category == Category::Pupil) {
            p.x = moved.x;
            p.y = moved.y;
          }
        }
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace tic::geometry
