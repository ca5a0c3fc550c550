#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gameclr/errors.hpp"
#include "gameclr/image.hpp"
#include "gameclr/model.hpp"
#include "gameclr/scene.hpp"

namespace gameclr {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

enum class Role : std::uint8_t { anchor, syn_pos, syn_neg };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::anchor: return "anchor";
    case Role::syn_pos: return "syn_pos";
    case Role::syn_neg: return "syn_neg";
  }
  return "?";
}

inline Role parse_role(const std::string& s) {
  if (s == "anchor") return Role::anchor;
  if (s == "syn_pos") return Role::syn_pos;
  if (s == "syn_neg") return Role::syn_neg;
  throw IoError("unknown role '" + s + "' in groups.csv");
}

struct GroupEntry {
  int anchor_id = 0;
  Role role = Role::anchor;
  int image_index = 0;
};

// On-disk dataset: images.bin + labels.csv + groups.csv + gen_config.txt.
struct DatasetBundle {
  std::vector<Image> images;
  std::vector<TrafficVariables> labels;
  std::vector<GroupEntry> groups;
  std::vector<std::pair<std::string, std::string>> gen_config;
};

inline void validate_bundle(const DatasetBundle& b, bool require_groups) {
  if (b.labels.size() != b.images.size())
    throw ShapeMismatch("labels row count != image count");
  const int count = static_cast<int>(b.images.size());
  for (const GroupEntry& g : b.groups)
    if (g.image_index < 0 || g.image_index >= count)
      throw IndexOutOfRange("groups.csv image_index " + std::to_string(g.image_index));
  if (require_groups) {
    std::vector<int> pos, neg;
    for (const GroupEntry& g : b.groups) {
      const std::size_t a = static_cast<std::size_t>(g.anchor_id);
      if (pos.size() <= a) {
        pos.resize(a + 1, 0);
        neg.resize(a + 1, 0);
      }
      if (g.role == Role::syn_pos) ++pos[a];
      if (g.role == Role::syn_neg) ++neg[a];
    }
    if (pos.empty()) throw DatasetMethodMismatch("gameclr training needs anchor groups");
    for (std::size_t a = 0; a < pos.size(); ++a)
      if (pos[a] < 1 || neg[a] < 1)
        throw DatasetMethodMismatch("anchor group " + std::to_string(a) +
                                    " lacks synthetic positives or negatives");
  }
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline std::uint32_t get_u32(const std::string& blob, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, blob.data() + off, 4);
  return v;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

inline double parse_double(const std::string& field, const char* where) {
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) throw IoError(std::string("bad number in ") + where);
  return v;
}

inline long parse_long(const std::string& field, const char* where) {
  long v = 0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) throw IoError(std::string("bad integer in ") + where);
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Lines without the trailing newline; tolerates a final unterminated line.
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      std::size_t end = i;
      if (end > start && text[end - 1] == '\r') --end;
      out.push_back(text.substr(start, end - start));
      start = i + 1;
    }
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

inline std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

}  // namespace detail

inline constexpr char kImagesMagic[8] = {'G', 'C', 'L', 'R', 'I', 'M', 'G', '1'};
inline constexpr char kModelMagic[8] = {'G', 'C', 'L', 'R', 'M', 'D', 'L', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void write_dataset(const DatasetBundle& b, const std::filesystem::path& dir) {
  validate_bundle(b, false);
  detail::ensure_dir(dir);

  std::string blob;
  blob.reserve(24 + b.images.size() * static_cast<std::size_t>(kImageSize) * kImageSize *
                        kImageChannels * 4);
  blob.append(kImagesMagic, 8);
  detail::put_u32(blob, static_cast<std::uint32_t>(b.images.size()));
  detail::put_u32(blob, kImageSize);
  detail::put_u32(blob, kImageSize);
  detail::put_u32(blob, kImageChannels);
  for (const Image& im : b.images) {
    require_valid_image(im);
    if (im.height != kImageSize || im.width != kImageSize)
      throw ShapeMismatch("dataset images must be 64x64");
    const char* p = reinterpret_cast<const char*>(im.data.data());
    blob.append(p, im.data.size() * 4);
  }
  detail::write_file(dir / "images.bin", blob);

  std::string labels = "id,dist_left,dir_left,dist_front,dir_front,dist_right,dir_right\n";
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    const auto arr = b.labels[i].as_array();
    labels += std::to_string(i);
    for (double v : arr) {
      labels += ',';
      labels += detail::format_double(v, 17);
    }
    labels += '\n';
  }
  detail::write_file(dir / "labels.csv", labels);

  std::string groups = "anchor_id,role,image_index\n";
  for (const GroupEntry& g : b.groups) {
    groups += std::to_string(g.anchor_id);
    groups += ',';
    groups += role_name(g.role);
    groups += ',';
    groups += std::to_string(g.image_index);
    groups += '\n';
  }
  detail::write_file(dir / "groups.csv", groups);

  std::string cfg;
  for (const auto& [k, v] : b.gen_config) cfg += k + "=" + v + "\n";
  detail::write_file(dir / "gen_config.txt", cfg);
}

inline DatasetBundle read_dataset(const std::filesystem::path& dir) {
  DatasetBundle b;
  const std::string blob = detail::read_file(dir / "images.bin");
  if (blob.size() < 24) throw TruncatedBlob("images.bin shorter than its header");
  if (std::memcmp(blob.data(), kImagesMagic, 8) != 0) throw BadMagic("images.bin");
  const std::uint32_t count = detail::get_u32(blob, 8);
  const std::uint32_t h = detail::get_u32(blob, 12);
  const std::uint32_t w = detail::get_u32(blob, 16);
  const std::uint32_t c = detail::get_u32(blob, 20);
  if (h != kImageSize || w != kImageSize || c != kImageChannels)
    throw ShapeMismatch("images.bin dims " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                        std::to_string(c));
  const std::size_t need = 24 + static_cast<std::size_t>(count) * h * w * c * 4;
  if (blob.size() < need) throw TruncatedBlob("images.bin promises more pixels than it holds");
  if (blob.size() > need) throw TruncatedBlob("images.bin has trailing bytes");
  b.images.assign(count, Image{});
  std::size_t off = 24;
  for (std::uint32_t i = 0; i < count; ++i) {
    Image& im = b.images[i];
    im = Image::zeros();
    std::memcpy(im.data.data(), blob.data() + off, im.data.size() * 4);
    off += im.data.size() * 4;
    for (float v : im.data)
      if (!(v >= 0.0f && v <= 1.0f))
        throw PixelOutOfRange("image " + std::to_string(i) + " has a pixel outside [0,1]");
  }

  const auto label_lines = detail::split_lines(detail::read_file(dir / "labels.csv"));
  if (label_lines.empty() ||
      label_lines[0] != "id,dist_left,dir_left,dist_front,dir_front,dist_right,dir_right")
    throw IoError("labels.csv header mismatch");
  for (std::size_t li = 1; li < label_lines.size(); ++li) {
    const auto f = detail::split_csv_line(label_lines[li]);
    if (f.size() != 7) throw IoError("labels.csv row needs 7 fields");
    TrafficVariables t;
    t.dist_left = detail::parse_double(f[1], "labels.csv");
    t.dir_left = detail::parse_double(f[2], "labels.csv");
    t.dist_front = detail::parse_double(f[3], "labels.csv");
    t.dir_front = detail::parse_double(f[4], "labels.csv");
    t.dist_right = detail::parse_double(f[5], "labels.csv");
    t.dir_right = detail::parse_double(f[6], "labels.csv");
    b.labels.push_back(t);
  }
  if (b.labels.size() != b.images.size()) throw ShapeMismatch("labels row count != image count");

  const auto group_lines = detail::split_lines(detail::read_file(dir / "groups.csv"));
  if (group_lines.empty() || group_lines[0] != "anchor_id,role,image_index")
    throw IoError("groups.csv header mismatch");
  for (std::size_t li = 1; li < group_lines.size(); ++li) {
    const auto f = detail::split_csv_line(group_lines[li]);
    if (f.size() != 3) throw IoError("groups.csv row needs 3 fields");
    GroupEntry g;
    g.anchor_id = static_cast<int>(detail::parse_long(f[0], "groups.csv"));
    g.role = parse_role(f[1]);
    g.image_index = static_cast<int>(detail::parse_long(f[2], "groups.csv"));
    if (g.image_index < 0 || g.image_index >= static_cast<int>(count))
      throw IndexOutOfRange("groups.csv image_index " + std::to_string(g.image_index));
    b.groups.push_back(g);
  }

  for (const auto& line : detail::split_lines(detail::read_file(dir / "gen_config.txt"))) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    b.gen_config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Model checkpoints: magic, format version, architecture dims, then the
// parameters as little-endian f32 in declaration order.
// ---------------------------------------------------------------------------
inline void save_checkpoint(const Model<float>& model, const std::filesystem::path& path) {
  const ArchSpec& a = model.spec();
  std::string out;
  out.append(kModelMagic, 8);
  detail::put_u32(out, kModelFormatVersion);
  for (int d : {a.image_size, a.in_channels, a.conv1_channels, a.conv2_channels, a.conv3_channels,
                a.rep_dim, a.hidden_dim, a.emb_dim})
    detail::put_u32(out, static_cast<std::uint32_t>(d));
  model.params().for_each([&out](const std::vector<float>& arr) {
    out.append(reinterpret_cast<const char*>(arr.data()), arr.size() * 4);
  });
  if (path.has_parent_path()) detail::ensure_dir(path.parent_path());
  detail::write_file(path, out);
}

inline Model<float> load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = detail::read_file(path);
  if (blob.size() < 8 + 4 + 8 * 4) throw TruncatedBlob(path.string() + " shorter than its header");
  if (std::memcmp(blob.data(), kModelMagic, 8) != 0) throw BadMagic(path.string());
  if (detail::get_u32(blob, 8) != kModelFormatVersion)
    throw BadMagic(path.string() + ": unsupported format version");
  ArchSpec a;
  int dims[8];
  for (int i = 0; i < 8; ++i) dims[i] = static_cast<int>(detail::get_u32(blob, 12 + 4 * i));
  a.image_size = dims[0];
  a.in_channels = dims[1];
  a.conv1_channels = dims[2];
  a.conv2_channels = dims[3];
  a.conv3_channels = dims[4];
  a.rep_dim = dims[5];
  a.hidden_dim = dims[6];
  a.emb_dim = dims[7];
  for (int d : dims)
    if (d < 1 || d > 4096) throw BadMagic(path.string() + ": implausible architecture");
  Model<float> model(a);
  const std::size_t need = 8 + 4 + 8 * 4 + model.param_count() * 4;
  if (blob.size() < need) throw TruncatedBlob(path.string() + " is missing parameter bytes");
  if (blob.size() > need) throw TruncatedBlob(path.string() + " has trailing bytes");
  std::size_t off = 8 + 4 + 8 * 4;
  model.params().for_each([&blob, &off](std::vector<float>& arr) {
    std::memcpy(arr.data(), blob.data() + off, arr.size() * 4);
    off += arr.size() * 4;
  });
  return model;
}

}  // namespace gameclr
