#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <string>
#include <vector>

#include "gameclr/dataio.hpp"
#include "gameclr/render.hpp"
#include "gameclr/scene.hpp"
#include "gameclr/svg.hpp"
#include "gameclr/training.hpp"

using namespace gameclr;
namespace fs = std::filesystem;

#include "oracles.hpp"

namespace {

DatasetBundle sample_bundle(int n, std::uint64_t seed) {
  DatasetBundle b;
  for (int i = 0; i < n; ++i) {
    const SceneState s = sample_scene(fold_seed(seed, i), 2);
    b.images.push_back(render(s));
    b.labels.push_back(traffic_variables(s));
  }
  b.gen_config.emplace_back("mode", "probe");
  b.gen_config.emplace_back("seed", std::to_string(seed));
  return b;
}

// Flip one byte of a file at the given offset.
void corrupt_byte(const fs::path& path, std::size_t off, char value) {
  std::string bytes = gameclr::detail::read_file(path);
  bytes.at(off) = value;
  gameclr::detail::write_file(path, bytes);
}

void truncate_to(const fs::path& path, std::size_t len) {
  std::string bytes = gameclr::detail::read_file(path);
  bytes.resize(len);
  gameclr::detail::write_file(path, bytes);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset round trips
// ---------------------------------------------------------------------------

TEST_CASE("datasets round-trip exactly through the directory format", "[dataio]") {
  DatasetBundle b = sample_bundle(5, 8101);
  b.groups.push_back({0, Role::anchor, 0});
  b.groups.push_back({0, Role::syn_pos, 1});
  b.groups.push_back({0, Role::syn_neg, 2});

  oracles::TempDir tmp;
  write_dataset(b, tmp.path());
  const DatasetBundle back = read_dataset(tmp.path());

  REQUIRE(back.images.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(images_identical(back.images[i], b.images[i]));
  REQUIRE(back.labels.size() == 5);
  for (int i = 0; i < 5; ++i) {
    const auto want = b.labels[i].as_array();
    const auto got = back.labels[i].as_array();
    for (int v = 0; v < 6; ++v) CHECK(got[v] == want[v]);  // 17 digits round-trip doubles
  }
  REQUIRE(back.groups.size() == 3);
  CHECK(back.groups[1].anchor_id == 0);
  CHECK(back.groups[1].role == Role::syn_pos);
  CHECK(back.groups[1].image_index == 1);
  REQUIRE(back.gen_config.size() == 2);
  CHECK(back.gen_config[0] == std::make_pair(std::string("mode"), std::string("probe")));
}

TEST_CASE("images.bin is header plus packed float pixels", "[dataio]") {
  oracles::TempDir tmp;
  write_dataset(sample_bundle(3, 8102), tmp.path());
  CHECK(fs::file_size(tmp / "images.bin") == 24 + 3u * 64 * 64 * 3 * 4);

  oracles::TempDir empty_tmp;
  write_dataset(DatasetBundle{}, empty_tmp.path());
  CHECK(fs::file_size(empty_tmp / "images.bin") == 24);
  CHECK(read_dataset(empty_tmp.path()).images.empty());
}

TEST_CASE("dataset writes are byte-deterministic", "[dataio]") {
  oracles::TempDir a, b;
  write_dataset(sample_bundle(4, 8103), a.path());
  write_dataset(sample_bundle(4, 8103), b.path());
  for (const char* name : {"images.bin", "labels.csv", "groups.csv", "gen_config.txt"})
    CHECK(gameclr::detail::read_file(a / name) == gameclr::detail::read_file(b / name));
}

TEST_CASE("each corruption of images.bin is reported as its own failure", "[dataio]") {
  oracles::TempDir tmp;
  write_dataset(sample_bundle(2, 8104), tmp.path());
  const fs::path bin = tmp / "images.bin";
  const std::string pristine = gameclr::detail::read_file(bin);

  corrupt_byte(bin, 0, 'X');
  CHECK_THROWS_AS(read_dataset(tmp.path()), BadMagic);
  gameclr::detail::write_file(bin, pristine);

  truncate_to(bin, 10);
  CHECK_THROWS_AS(read_dataset(tmp.path()), TruncatedBlob);
  gameclr::detail::write_file(bin, pristine);

  truncate_to(bin, pristine.size() - 100);  // promises 2 images, holds less
  CHECK_THROWS_AS(read_dataset(tmp.path()), TruncatedBlob);
  gameclr::detail::write_file(bin, pristine);

  gameclr::detail::write_file(bin, pristine + "junk");
  CHECK_THROWS_AS(read_dataset(tmp.path()), TruncatedBlob);
  gameclr::detail::write_file(bin, pristine);

  corrupt_byte(bin, 12, 32);  // height header word
  CHECK_THROWS_AS(read_dataset(tmp.path()), ShapeMismatch);
  gameclr::detail::write_file(bin, pristine);

  std::string bad_pixel = pristine;
  const float two = 2.0f;
  std::memcpy(bad_pixel.data() + 24, &two, 4);
  gameclr::detail::write_file(bin, bad_pixel);
  CHECK_THROWS_AS(read_dataset(tmp.path()), PixelOutOfRange);
  gameclr::detail::write_file(bin, pristine);

  CHECK_NOTHROW(read_dataset(tmp.path()));
}

TEST_CASE("csv sidecar corruption is reported precisely", "[dataio]") {
  oracles::TempDir tmp;
  DatasetBundle b = sample_bundle(3, 8105);
  b.groups.push_back({0, Role::anchor, 0});
  write_dataset(b, tmp.path());

  SECTION("labels header") {
    corrupt_byte(tmp / "labels.csv", 0, 'x');
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
  SECTION("labels row width") {
    gameclr::detail::write_file(
        tmp / "labels.csv",
        "id,dist_left,dir_left,dist_front,dir_front,dist_right,dir_right\n0,1,2\n");
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
  SECTION("labels bad number") {
    gameclr::detail::write_file(
        tmp / "labels.csv",
        "id,dist_left,dir_left,dist_front,dir_front,dist_right,dir_right\n0,1,2,3,nope,5,6\n");
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
  SECTION("labels count mismatch") {
    gameclr::detail::write_file(
        tmp / "labels.csv",
        "id,dist_left,dir_left,dist_front,dir_front,dist_right,dir_right\n0,1,2,3,4,5,6\n");
    CHECK_THROWS_AS(read_dataset(tmp.path()), ShapeMismatch);
  }
  SECTION("groups header") {
    corrupt_byte(tmp / "groups.csv", 0, 'x');
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
  SECTION("groups unknown role") {
    gameclr::detail::write_file(tmp / "groups.csv", "anchor_id,role,image_index\n0,hero,0\n");
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
  SECTION("groups image index out of range") {
    gameclr::detail::write_file(tmp / "groups.csv", "anchor_id,role,image_index\n0,anchor,3\n");
    CHECK_THROWS_AS(read_dataset(tmp.path()), IndexOutOfRange);
  }
  SECTION("missing file") {
    fs::remove(tmp / "gen_config.txt");
    CHECK_THROWS_AS(read_dataset(tmp.path()), IoError);
  }
}

TEST_CASE("bundle validation enforces gameclr group structure", "[dataio]") {
  DatasetBundle b = sample_bundle(3, 8106);
  CHECK_NOTHROW(validate_bundle(b, false));
  CHECK_THROWS_AS(validate_bundle(b, true), DatasetMethodMismatch);  // no groups at all
  b.groups.push_back({0, Role::anchor, 0});
  b.groups.push_back({0, Role::syn_pos, 1});
  CHECK_THROWS_AS(validate_bundle(b, true), DatasetMethodMismatch);  // missing syn_neg
  b.groups.push_back({0, Role::syn_neg, 2});
  CHECK_NOTHROW(validate_bundle(b, true));
  b.groups.push_back({1, Role::syn_neg, 5});
  CHECK_THROWS_AS(validate_bundle(b, false), IndexOutOfRange);
  b.labels.pop_back();
  CHECK_THROWS_AS(validate_bundle(b, false), ShapeMismatch);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoints round-trip parameters bit for bit", "[dataio]") {
  Model<float> m(toy_arch_spec());
  m.init(99);
  oracles::TempDir tmp;
  const fs::path ck = tmp / "model.bin";
  save_checkpoint(m, ck);
  CHECK(fs::file_size(ck) == 8 + 4 + 32 + m.param_count() * 4);

  const Model<float> back = load_checkpoint(ck);
  CHECK(back.spec() == m.spec());
  std::vector<const std::vector<float>*> lhs, rhs;
  m.params().for_each([&lhs](const std::vector<float>& a) { lhs.push_back(&a); });
  back.params().for_each([&rhs](const std::vector<float>& a) { rhs.push_back(&a); });
  REQUIRE(lhs.size() == rhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(*lhs[i] == *rhs[i]);
}

TEST_CASE("checkpoint corruption is reported by kind", "[dataio]") {
  Model<float> m(toy_arch_spec());
  m.init(100);
  oracles::TempDir tmp;
  const fs::path ck = tmp / "model.bin";
  save_checkpoint(m, ck);
  const std::string pristine = gameclr::detail::read_file(ck);

  corrupt_byte(ck, 3, 'x');
  CHECK_THROWS_AS(load_checkpoint(ck), BadMagic);
  gameclr::detail::write_file(ck, pristine);

  corrupt_byte(ck, 8, 9);  // format version
  CHECK_THROWS_AS(load_checkpoint(ck), BadMagic);
  gameclr::detail::write_file(ck, pristine);

  corrupt_byte(ck, 12, 0);  // image_size -> implausible
  CHECK_THROWS_AS(load_checkpoint(ck), BadMagic);
  gameclr::detail::write_file(ck, pristine);

  truncate_to(ck, 20);
  CHECK_THROWS_AS(load_checkpoint(ck), TruncatedBlob);
  gameclr::detail::write_file(ck, pristine);

  truncate_to(ck, pristine.size() - 4);
  CHECK_THROWS_AS(load_checkpoint(ck), TruncatedBlob);
  gameclr::detail::write_file(ck, pristine);

  gameclr::detail::write_file(ck, pristine + "!");
  CHECK_THROWS_AS(load_checkpoint(ck), TruncatedBlob);
  gameclr::detail::write_file(ck, pristine);

  CHECK_NOTHROW(load_checkpoint(ck));
}

TEST_CASE("file helpers surface filesystem failures as IoError", "[dataio]") {
  CHECK_THROWS_AS(gameclr::detail::read_file("/nonexistent/nowhere.bin"), IoError);
  CHECK_THROWS_AS(gameclr::detail::write_file("/nonexistent/nowhere.bin", "x"), IoError);
  oracles::TempDir tmp;
  gameclr::detail::write_file(tmp / "plain_file", "x");
  CHECK_THROWS_AS(gameclr::detail::ensure_dir(tmp / "plain_file" / "sub"), IoError);
}

// ---------------------------------------------------------------------------
// Train logs
// ---------------------------------------------------------------------------

TEST_CASE("train logs round-trip and simclr rows leave the syn column empty", "[dataio]") {
  std::vector<TrainLogRecord> records;
  TrainLogRecord a{1, 3.25, 0.5, 0.125, 0.75, 2.5};
  TrainLogRecord b{2, 3.0, 0.6, 0.1, std::nullopt, 2.25};
  records.push_back(a);
  records.push_back(b);

  oracles::TempDir tmp;
  const fs::path log = tmp / "log.csv";
  write_train_log(records, log);

  const auto lines = gameclr::detail::split_lines(gameclr::detail::read_file(log));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == kTrainLogHeader);
  CHECK(lines[1] == "1,3.25,0.5,0.125,0.75,2.5");
  CHECK(lines[2] == "2,3,0.6,0.1,,2.25");

  const auto back = read_train_log(log);
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch == 1);
  CHECK(back[0].loss == 3.25);
  CHECK(back[0].cos_neg_syn.has_value());
  CHECK(*back[0].cos_neg_syn == 0.75);
  CHECK_FALSE(back[1].cos_neg_syn.has_value());
  CHECK(back[1].seconds == 2.25);
}

TEST_CASE("malformed train logs raise IoError", "[dataio]") {
  oracles::TempDir tmp;
  const fs::path log = tmp / "log.csv";
  gameclr::detail::write_file(log, "epoch,loss\n");
  CHECK_THROWS_AS(read_train_log(log), IoError);
  gameclr::detail::write_file(log, std::string(kTrainLogHeader) + "\n1,2,3\n");
  CHECK_THROWS_AS(read_train_log(log), IoError);
  gameclr::detail::write_file(log, std::string(kTrainLogHeader) + "\n1,abc,3,4,5,6\n");
  CHECK_THROWS_AS(read_train_log(log), IoError);
  CHECK_THROWS_AS(read_train_log(tmp / "absent.csv"), IoError);
}

// ---------------------------------------------------------------------------
// SVG diagnostics plot
// ---------------------------------------------------------------------------

namespace {

std::vector<TrainLogRecord> fake_log(int epochs, bool with_syn) {
  std::vector<TrainLogRecord> out;
  for (int e = 1; e <= epochs; ++e) {
    TrainLogRecord r;
    r.epoch = e;
    r.loss = 4.0 / e;
    r.cos_pos = 0.5 + 0.02 * e;
    r.cos_neg_reg = 0.3 - 0.01 * e;
    if (with_syn) r.cos_neg_syn = 0.4 - 0.005 * e;
    out.push_back(r);
  }
  return out;
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t at = text.find(needle); at != std::string::npos;
       at = text.find(needle, at + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("the plot draws one polyline per present series", "[svg]") {
  oracles::TempDir tmp;
  write_svg_plot({{"gameclr", fake_log(10, true)}}, tmp / "g.svg");
  const std::string g = gameclr::detail::read_file(tmp / "g.svg");
  CHECK(count_occurrences(g, "<polyline") == 3);
  CHECK(count_occurrences(g, "stroke-dasharray") == 0);
  CHECK(g.find("cos_neg_syn") != std::string::npos);

  write_svg_plot({{"simclr", fake_log(10, false)}}, tmp / "s.svg");
  const std::string s = gameclr::detail::read_file(tmp / "s.svg");
  CHECK(count_occurrences(s, "<polyline") == 2);
  CHECK(s.find("cos_neg_syn") == std::string::npos);
}

TEST_CASE("comparing two logs dashes the second and labels both", "[svg]") {
  oracles::TempDir tmp;
  write_svg_plot({{"gameclr", fake_log(6, true)}, {"simclr", fake_log(6, false)}}, tmp / "b.svg");
  const std::string b = gameclr::detail::read_file(tmp / "b.svg");
  CHECK(count_occurrences(b, "<polyline") == 5);
  // 2 dashed polylines plus their 2 legend swatches
  CHECK(count_occurrences(b, "stroke-dasharray") == 4);
  CHECK(b.find("gameclr cos_pos") != std::string::npos);
  CHECK(b.find("simclr cos_pos") != std::string::npos);
}

TEST_CASE("an empty log still yields a well-formed chart", "[svg]") {
  oracles::TempDir tmp;
  write_svg_plot({{"gameclr", {}}}, tmp / "e.svg");
  const std::string e = gameclr::detail::read_file(tmp / "e.svg");
  CHECK(count_occurrences(e, "<polyline") == 0);
  CHECK(e.find("no data") != std::string::npos);
  CHECK(e.find("</svg>") != std::string::npos);
}

TEST_CASE("plot bytes are a pure function of the log", "[svg]") {
  oracles::TempDir tmp;
  write_svg_plot({{"gameclr", fake_log(8, true)}}, tmp / "a.svg");
  write_svg_plot({{"gameclr", fake_log(8, true)}}, tmp / "b.svg");
  CHECK(gameclr::detail::read_file(tmp / "a.svg") == gameclr::detail::read_file(tmp / "b.svg"));
}
