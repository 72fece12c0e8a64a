#include "skelact/clip_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "skelact/serialize.hpp"

namespace skelact {

namespace fs = std::filesystem;
using nlohmann::json;

ClipFormat detect_clip_format(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".json") return ClipFormat::kJson;
  if (ext == ".skeleton") return ClipFormat::kNtu;
  throw std::runtime_error(path + ": unknown clip extension '" + ext +
                           "' (expected .json or .skeleton)");
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw std::runtime_error(path + ": " + message);
}

[[noreturn]] void fail_line(const std::string& path, int line, const std::string& message) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

SkeletonClip parse_json_clip(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(path, std::string("JSON parse error: ") + e.what());
  }
  try {
    TopologyPtr topo = topology_from_json(j.at("topology"));

    SkeletonClip clip;
    clip.topology = topo;
    const json& frames = j.at("frames");
    const int t = static_cast<int>(frames.size());
    const int v = topo->joint_count;
    if (t < 1) fail(path, "clip has no frames");
    clip.positions = Tensor::zeros({t, v, 3});
    for (int f = 0; f < t; ++f) {
      const json& jf = frames.at(static_cast<std::size_t>(f));
      if (static_cast<int>(jf.size()) != v) {
        fail(path, "frame " + std::to_string(f) + " has " + std::to_string(jf.size()) +
                       " joints, topology has " + std::to_string(v));
      }
      for (int jn = 0; jn < v; ++jn) {
        const json& jj = jf.at(static_cast<std::size_t>(jn));
        if (jj.size() != 3) {
          fail(path, "frame " + std::to_string(f) + " joint " + std::to_string(jn) +
                         " is not a 3-vector");
        }
        for (int c = 0; c < 3; ++c) {
          clip.positions(f, jn, c) = jj.at(static_cast<std::size_t>(c)).get<double>();
        }
      }
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      clip.label = j.at("label").get<int>();
    }
    clip.validate();
    return clip;
  } catch (const json::exception& e) {
    fail(path, std::string("bad clip JSON: ") + e.what());
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) fail_line(path_, line_no_ + 1, "unexpected end of file");
    ++line_no_;
    return line;
  }

  int next_int(const char* what) {
    const std::string line = next();
    std::istringstream ss(line);
    long long value = 0;
    std::string extra;
    if (!(ss >> value) || (ss >> extra)) {
      fail_line(path_, line_no_, std::string("expected ") + what + ", got '" + line + "'");
    }
    return static_cast<int>(value);
  }

  int line_no() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
  int line_no_ = 0;
};

SkeletonClip parse_ntu_clip(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  LineReader reader(in, path);
  const int frame_count = reader.next_int("frame count");
  if (frame_count < 0) fail_line(path, reader.line_no(), "negative frame count");

  std::vector<std::vector<double>> kept;  // first-body joints per non-empty frame, V*3 each
  int joint_count = -1;
  for (int f = 0; f < frame_count; ++f) {
    const int body_count = reader.next_int("body count");
    if (body_count < 0) fail_line(path, reader.line_no(), "negative body count");
    for (int b = 0; b < body_count; ++b) {
      reader.next();  // body info line (tracking state; ignored)
      const int jc = reader.next_int("joint count");
      if (jc <= 0) fail_line(path, reader.line_no(), "non-positive joint count");
      if (joint_count == -1) {
        joint_count = jc;
      } else if (jc != joint_count) {
        fail_line(path, reader.line_no(), "joint count changed mid-file");
      }
      std::vector<double> coords;
      coords.reserve(static_cast<std::size_t>(jc) * 3);
      for (int jn = 0; jn < jc; ++jn) {
        const std::string line = reader.next();
        std::istringstream ss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        if (tokens.size() != 12) {
          fail_line(path, reader.line_no(),
                    "joint line has " + std::to_string(tokens.size()) + " fields, expected 12");
        }
        for (int c = 0; c < 3; ++c) {
          try {
            std::size_t used = 0;
            const double value = std::stod(tokens[static_cast<std::size_t>(c)], &used);
            if (used != tokens[static_cast<std::size_t>(c)].size()) throw std::invalid_argument("");
            coords.push_back(value);
          } catch (const std::exception&) {
            fail_line(path, reader.line_no(),
                      "bad coordinate '" + tokens[static_cast<std::size_t>(c)] + "'");
          }
        }
      }
      if (b == 0) kept.push_back(std::move(coords));
    }
  }
  if (kept.empty()) fail(path, "empty clip: no bodies in any frame");
  if (joint_count != 25) {
    fail(path, "unsupported joint count " + std::to_string(joint_count) +
                   " (the text reader expects the 25-joint humanoid)");
  }

  SkeletonClip clip;
  clip.topology = ntu25_topology();
  const int t = static_cast<int>(kept.size());
  clip.positions = Tensor::zeros({t, 25, 3});
  for (int f = 0; f < t; ++f) {
    std::copy(kept[static_cast<std::size_t>(f)].begin(), kept[static_cast<std::size_t>(f)].end(),
              clip.positions.data().begin() + static_cast<std::ptrdiff_t>(f) * 25 * 3);
  }
  clip.validate();
  return clip;
}

}  // namespace

SkeletonClip parse_clip_file(const std::string& path, ClipFormat format) {
  return format == ClipFormat::kJson ? parse_json_clip(path) : parse_ntu_clip(path);
}

void write_clip_file(const std::string& path, const SkeletonClip& clip) {
  clip.validate();
  json jt = topology_to_json(*clip.topology);

  json frames = json::array();
  for (int f = 0; f < clip.frames(); ++f) {
    json jf = json::array();
    for (int jn = 0; jn < clip.joints(); ++jn) {
      jf.push_back({clip.positions(f, jn, 0), clip.positions(f, jn, 1),
                    clip.positions(f, jn, 2)});
    }
    frames.push_back(std::move(jf));
  }
  json j;
  j["topology"] = std::move(jt);
  j["label"] = clip.label ? json(*clip.label) : json(nullptr);
  j["frames"] = std::move(frames);

  std::ofstream out(path);
  if (!out) fail(path, "cannot open file for writing");
  out << j.dump();
  out << "\n";
  if (!out) fail(path, "write failed");
}

std::vector<ManifestEntry> read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.csv").string();
  std::ifstream in(path);
  if (!in) fail(path, "cannot open manifest");
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("path,", 0) == 0) continue;  // header
    std::istringstream ss(line);
    ManifestEntry e;
    std::string label_field;
    if (!std::getline(ss, e.path, ',') || !std::getline(ss, label_field, ',') ||
        !std::getline(ss, e.split)) {
      fail_line(path, line_no, "expected 'path,label,split'");
    }
    if (!label_field.empty()) {
      try {
        e.label = std::stoi(label_field);
      } catch (const std::exception&) {
        fail_line(path, line_no, "bad label '" + label_field + "'");
      }
    }
    if (e.split != "train" && e.split != "val") {
      fail_line(path, line_no, "split must be 'train' or 'val', got '" + e.split + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries) {
  const std::string path = (fs::path(dir) / "manifest.csv").string();
  std::ofstream out(path);
  if (!out) fail(path, "cannot open manifest for writing");
  out << "path,label,split\n";
  for (const auto& e : entries) {
    out << e.path << ",";
    if (e.label) out << *e.label;
    out << "," << e.split << "\n";
  }
  if (!out) fail(path, "write failed");
}

namespace {

void append_split(const std::string& dir, const Dataset& ds, const std::string& split,
                  std::vector<ManifestEntry>& manifest) {
  char name[64];
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    std::snprintf(name, sizeof(name), "%s_%05zu.json", split.c_str(), i);
    write_clip_file((fs::path(dir) / name).string(), ds.clips[i]);
    manifest.push_back({name, ds.clips[i].label, split});
  }
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& train, const Dataset& val) {
  train.validate();
  val.validate();
  fs::create_directories(dir);
  std::vector<ManifestEntry> manifest;
  append_split(dir, train, "train", manifest);
  append_split(dir, val, "val", manifest);
  write_manifest(dir, manifest);
}

std::pair<Dataset, Dataset> load_dataset(const std::string& dir) {
  Dataset train, val;
  train.split = "train";
  val.split = "val";
  int max_label = -1;
  for (const auto& e : read_manifest(dir)) {
    const std::string path = (fs::path(dir) / e.path).string();
    SkeletonClip clip = parse_clip_file(path, detect_clip_format(path));
    if (e.label) clip.label = e.label;  // manifest is authoritative
    if (clip.label) max_label = std::max(max_label, *clip.label);
    (e.split == "train" ? train : val).clips.push_back(std::move(clip));
  }
  train.class_count = val.class_count = max_label + 1;
  train.validate();
  val.validate();
  return {std::move(train), std::move(val)};
}

}  // namespace skelact
