// Copyright 2026 The physguide Authors
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

#include "physguide/motion_io.h"

#include <fstream>
#include <stdexcept>

namespace physguide {
namespace {

using nlohmann::json;

json Vec2ToJson(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 Vec2FromJson(const json& j) {
  return Vec2(j.at(0).get<double>(), j.at(1).get<double>());
}

}  // namespace

json CharacterToJson(const CharacterModel& character) {
  json bodies = json::array();
  for (const BodySpec& b : character.bodies) {
    bodies.push_back({{"name", b.name},
                      {"parent", b.parent},
                      {"joint", b.joint},
                      {"origin", Vec2ToJson(b.origin)},
                      {"tip", Vec2ToJson(b.tip)},
                      {"com", Vec2ToJson(b.com)},
                      {"length", b.length},
                      {"mass", b.mass},
                      {"inertia", b.inertia}});
  }
  json joints = json::array();
  for (const JointSpec& j : character.joints) {
    joints.push_back({{"name", j.name}, {"lower", j.lower}, {"upper", j.upper}});
  }
  json contacts = json::array();
  for (const Vec2& c : character.contact_offsets) {
    contacts.push_back(Vec2ToJson(c));
  }
  return {{"bodies", bodies},
          {"joints", joints},
          {"contact_offsets", contacts},
          {"leg_scale", character.leg_scale}};
}

CharacterModel CharacterFromJson(const json& j) {
  CharacterModel m;
  const json& bodies = j.at("bodies");
  const json& joints = j.at("joints");
  const json& contacts = j.at("contact_offsets");
  if (bodies.size() != kNumBodies || joints.size() != kNumJoints ||
      contacts.size() != kNumContactPoints) {
    throw std::invalid_argument("character document has wrong body count");
  }
  for (int i = 0; i < kNumBodies; ++i) {
    const json& b = bodies[i];
    BodySpec& s = m.bodies[i];
    s.name = b.at("name").get<std::string>();
    s.parent = b.at("parent").get<int>();
    s.joint = b.at("joint").get<int>();
    s.origin = Vec2FromJson(b.at("origin"));
    s.tip = Vec2FromJson(b.at("tip"));
    s.com = Vec2FromJson(b.at("com"));
    s.length = b.at("length").get<double>();
    s.mass = b.at("mass").get<double>();
    s.inertia = b.at("inertia").get<double>();
  }
  for (int i = 0; i < kNumJoints; ++i) {
    m.joints[i].name = joints[i].at("name").get<std::string>();
    m.joints[i].lower = joints[i].at("lower").get<double>();
    m.joints[i].upper = joints[i].at("upper").get<double>();
  }
  for (int i = 0; i < kNumContactPoints; ++i) {
    m.contact_offsets[i] = Vec2FromJson(contacts[i]);
  }
  m.leg_scale = j.at("leg_scale").get<double>();
  m.Validate();
  return m;
}

json MotionToJson(const Motion& motion) {
  json frames = json::array();
  for (const Pose& p : motion.frames) frames.push_back(p.ToVector());
  return {{"format_version", kMotionFormatVersion},
          {"fps", motion.fps},
          {"character", CharacterToJson(motion.character)},
          {"condition", ConditionName(motion.condition)},
          {"frames", frames}};
}

Motion MotionFromJson(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kMotionFormatVersion) {
      throw std::invalid_argument("unsupported motion format_version");
    }
    Motion m;
    m.fps = j.at("fps").get<double>();
    m.character = CharacterFromJson(j.at("character"));
    m.condition = ParseCondition(j.at("condition").get<std::string>());
    for (const json& row : j.at("frames")) {
      if (row.size() != kPoseDim) {
        throw std::invalid_argument("motion frame must have 9 numbers");
      }
      m.frames.push_back(Pose::FromVector(row.get<PoseVector>()));
    }
    m.Validate();
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed motion: ") + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void WriteMotion(const std::filesystem::path& path, const Motion& motion) {
  // Same document as MotionToJson, laid out one frame per line.
  const json doc = MotionToJson(motion);
  std::string text = "{\n";
  for (const char* key : {"format_version", "fps", "condition", "character"}) {
    text += " \"" + std::string(key) + "\": " + doc.at(key).dump() + ",\n";
  }
  text += " \"frames\": [";
  const json& frames = doc.at("frames");
  for (size_t h = 0; h < frames.size(); ++h) {
    text += (h == 0 ? "\n  " : ",\n  ") + frames[h].dump();
  }
  text += "\n ]\n}\n";
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Motion ReadMotion(const std::filesystem::path& path) {
  return MotionFromJson(ReadJsonFile(path));
}

void WriteManifest(const std::filesystem::path& dir,
                   const DatasetManifest& manifest) {
  json files = json::array();
  for (const DatasetEntry& e : manifest.entries) {
    files.push_back(
        {{"file", e.file}, {"label", ConditionName(e.label)}, {"seed", e.seed}});
  }
  json counts = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    counts[std::string(ConditionName(static_cast<Condition>(c)))] =
        manifest.class_counts[c];
  }
  WriteJsonFile(dir / kManifestName,
                {{"format_version", manifest.format_version},
                 {"seed", manifest.seed},
                 {"class_counts", counts},
                 {"param_ranges", manifest.param_ranges},
                 {"files", files}});
}

DatasetManifest ReadManifest(const std::filesystem::path& dir) {
  const json j = ReadJsonFile(dir / kManifestName);
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    for (int c = 0; c < kNumClasses; ++c) {
      m.class_counts[c] = j.at("class_counts")
                              .at(std::string(ConditionName(
                                  static_cast<Condition>(c))))
                              .get<int>();
    }
    m.param_ranges = j.value("param_ranges", json::object());
    for (const json& f : j.at("files")) {
      m.entries.push_back({f.at("file").get<std::string>(),
                           ParseCondition(f.at("label").get<std::string>()),
                           f.at("seed").get<uint64_t>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed manifest: ") + e.what());
  }
}

MotionDataset LoadDataset(const std::filesystem::path& dir) {
  MotionDataset ds;
  ds.manifest = ReadManifest(dir);
  ds.motions.reserve(ds.manifest.entries.size());
  for (const DatasetEntry& e : ds.manifest.entries) {
    Motion m = ReadMotion(dir / e.file);
    m.condition = e.label;
    ds.motions.push_back(std::move(m));
  }
  if (ds.motions.empty()) {
    throw std::invalid_argument("dataset " + dir.string() + " is empty");
  }
  return ds;
}

}  // namespace physguide
