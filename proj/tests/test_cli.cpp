#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cctype>
#include <cstdio>
#include <string>

#include "gameclr/dataio.hpp"
#include "gameclr/training.hpp"
#include "oracles.hpp"

// End-to-end checks of the installed binary: exit codes, output files, and
// byte-level determinism. GCLR_CLI_PATH is injected by the build.

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GCLR_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) { return gameclr::detail::read_file(p); }

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t at = text.find(needle); at != std::string::npos;
       at = text.find(needle, at + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("help lists every subcommand and exits cleanly", "[cli]") {
  const CliResult r = run_cli("--help");
  CHECK(r.code == 0);
  for (const char* word : {"gen", "train", "probe", "plot", "experiment", "GCLR_THREADS"})
    CHECK(r.out.find(word) != std::string::npos);
  CHECK(run_cli("train --help").code == 0);
}

TEST_CASE("usage mistakes exit with code 2", "[cli]") {
  CHECK(run_cli("").code == 2);                       // a subcommand is required
  CHECK(run_cli("gen --bogus x").code == 2);          // unknown flag
  CHECK(run_cli("gen --out /tmp/x --mode nope").code == 2);
  CHECK(run_cli("probe --runs 1").code == 2);         // missing required options
}

TEST_CASE("gen writes the promised image count and is bit-reproducible", "[cli]") {
  oracles::TempDir tmp;
  const fs::path a = tmp / "a";
  const fs::path b = tmp / "b";
  const std::string args = "gen --mode gameclr --anchors 10 --seed 3 --out ";
  const CliResult r1 = run_cli(args + q(a));
  REQUIRE(r1.code == 0);
  // 10 anchors x (1 anchor + 2 positives + 2 negatives)
  CHECK(r1.out.find("wrote 50 images") != std::string::npos);
  REQUIRE(run_cli(args + q(b)).code == 0);
  for (const char* name : {"images.bin", "labels.csv", "groups.csv", "gen_config.txt"})
    CHECK(slurp(a / name) == slurp(b / name));

  const CliResult empty = run_cli("gen --mode simclr --anchors 0 --out " + q(tmp / "e"));
  CHECK(empty.code == 0);
  CHECK(empty.out.find("wrote 0 images") != std::string::npos);
  CHECK(fs::file_size(tmp / "e" / "images.bin") == 24);
}

TEST_CASE("gen rejects bad gameclr group sizes with code 2", "[cli]") {
  oracles::TempDir tmp;
  CHECK(run_cli("gen --mode gameclr --anchors 2 --kp 0 --out " + q(tmp / "d")).code == 2);
}

TEST_CASE("training on a mismatched dataset names both modes", "[cli]") {
  oracles::TempDir tmp;
  const fs::path data = tmp / "data";
  REQUIRE(run_cli("gen --mode gameclr --anchors 4 --out " + q(data)).code == 0);
  const CliResult r = run_cli("train --method simclr --data " + q(data) + " --out " +
                              q(tmp / "m.bin") + " --log " + q(tmp / "l.csv"));
  CHECK(r.code == 4);
  CHECK(r.out.find("gameclr") != std::string::npos);
  CHECK(r.out.find("simclr") != std::string::npos);
}

TEST_CASE("a one-epoch training run writes one log row and a loadable checkpoint", "[cli]") {
  oracles::TempDir tmp;
  const fs::path data = tmp / "data";
  REQUIRE(run_cli("gen --mode gameclr --anchors 8 --seed 4 --out " + q(data)).code == 0);
  const std::string train_args = "train --method gameclr --data " + q(data) +
                                 " --epochs 1 --anchors-per-epoch 8 --batch-size 4 --seed 7";
  const CliResult r = run_cli(train_args + " --out " + q(tmp / "m.bin") + " --log " +
                              q(tmp / "l.csv"));
  REQUIRE(r.code == 0);
  const auto log = gameclr::read_train_log(tmp / "l.csv");
  REQUIRE(log.size() == 1);
  CHECK(log[0].epoch == 1);
  CHECK(log[0].cos_neg_syn.has_value());
  CHECK(log[0].seconds == 0.0);  // timing is opt-in
  CHECK_NOTHROW(gameclr::load_checkpoint(tmp / "m.bin"));

  // same seed, same bytes
  REQUIRE(run_cli(train_args + " --out " + q(tmp / "m2.bin") + " --log " + q(tmp / "l2.csv"))
              .code == 0);
  CHECK(slurp(tmp / "m.bin") == slurp(tmp / "m2.bin"));
  CHECK(slurp(tmp / "l.csv") == slurp(tmp / "l2.csv"));
}

TEST_CASE("dedicated flags win over --set overrides", "[cli]") {
  oracles::TempDir tmp;
  const fs::path data = tmp / "data";
  REQUIRE(run_cli("gen --mode simclr --anchors 8 --out " + q(data)).code == 0);
  const CliResult r = run_cli("train --method simclr --data " + q(data) +
                              " --set epochs=3 --epochs 1 --anchors-per-epoch 8 --batch-size 4" +
                              " --out " + q(tmp / "m.bin") + " --log " + q(tmp / "l.csv"));
  REQUIRE(r.code == 0);
  CHECK(gameclr::read_train_log(tmp / "l.csv").size() == 1);
  CHECK(run_cli("train --method simclr --data " + q(data) + " --set epochs=oops --out x --log y")
            .code == 2);
}

TEST_CASE("missing inputs exit with the I/O code", "[cli]") {
  oracles::TempDir tmp;
  CHECK(run_cli("train --method simclr --data " + q(tmp / "absent") + " --out " +
                q(tmp / "m.bin") + " --log " + q(tmp / "l.csv"))
            .code == 3);
  CHECK(run_cli("plot --log " + q(tmp / "absent.csv") + " --out " + q(tmp / "p.svg")).code == 3);
}

TEST_CASE("probe refuses non-probe datasets and missing checkpoints", "[cli]") {
  oracles::TempDir tmp;
  const fs::path data = tmp / "data";
  const fs::path pdata = tmp / "pdata";
  REQUIRE(run_cli("gen --mode simclr --anchors 4 --out " + q(data)).code == 0);
  REQUIRE(run_cli("gen --mode probe --anchors 100 --out " + q(pdata)).code == 0);
  REQUIRE(run_cli("train --method simclr --data " + q(data) +
                  " --epochs 1 --anchors-per-epoch 4 --batch-size 2 --out " + q(tmp / "m.bin") +
                  " --log " + q(tmp / "l.csv"))
              .code == 0);
  const std::string three = q(tmp / "m.bin") + " " + q(tmp / "m.bin") + " " + q(tmp / "m.bin");

  CHECK(run_cli("probe --models " + three + " --data " + q(data) + " --out " + q(tmp / "r.csv"))
            .code == 4);
  CHECK(run_cli("probe --models " + q(tmp / "nope.bin") + " " + q(tmp / "m.bin") + " " +
                q(tmp / "m.bin") + " --data " + q(pdata) + " --out " + q(tmp / "r.csv"))
            .code == 3);
  CHECK(run_cli("probe --models " + three + " --data " + q(pdata) + " --out " + q(tmp / "r.csv") +
                " --runs 0")
            .code == 2);

  const CliResult ok = run_cli("probe --models " + three + " --data " + q(pdata) + " --out " +
                               q(tmp / "r.csv") + " --runs 1 --seed 5");
  REQUIRE(ok.code == 0);
  CHECK(ok.out.find("warning: single run") != std::string::npos);
  CHECK(ok.out.find("0.000") != std::string::npos);  // zero-width intervals
  for (const char* name : {"r.csv", "r_summary.csv", "r_table.txt"})
    CHECK(fs::exists(tmp / name));
}

TEST_CASE("plot output matches the log structure and is deterministic", "[cli]") {
  oracles::TempDir tmp;
  const fs::path data_g = tmp / "dg";
  const fs::path data_s = tmp / "ds";
  REQUIRE(run_cli("gen --mode gameclr --anchors 4 --out " + q(data_g)).code == 0);
  REQUIRE(run_cli("gen --mode simclr --anchors 4 --out " + q(data_s)).code == 0);
  const std::string tiny = " --epochs 2 --anchors-per-epoch 4 --batch-size 2 ";
  REQUIRE(run_cli("train --method gameclr --data " + q(data_g) + tiny + "--out " +
                  q(tmp / "g.bin") + " --log " + q(tmp / "g.csv"))
              .code == 0);
  REQUIRE(run_cli("train --method simclr --data " + q(data_s) + tiny + "--out " +
                  q(tmp / "s.bin") + " --log " + q(tmp / "s.csv"))
              .code == 0);

  REQUIRE(run_cli("plot --log " + q(tmp / "g.csv") + " --out " + q(tmp / "g.svg")).code == 0);
  CHECK(count_occurrences(slurp(tmp / "g.svg"), "<polyline") == 3);

  REQUIRE(run_cli("plot --log " + q(tmp / "s.csv") + " --out " + q(tmp / "s.svg")).code == 0);
  CHECK(count_occurrences(slurp(tmp / "s.svg"), "<polyline") == 2);

  REQUIRE(run_cli("plot --log " + q(tmp / "g.csv") + " --log2 " + q(tmp / "s.csv") + " --out " +
                  q(tmp / "b.svg"))
              .code == 0);
  const std::string both = slurp(tmp / "b.svg");
  CHECK(count_occurrences(both, "<polyline") == 5);
  CHECK(both.find("stroke-dasharray") != std::string::npos);

  REQUIRE(run_cli("plot --log " + q(tmp / "g.csv") + " --out " + q(tmp / "g2.svg")).code == 0);
  CHECK(slurp(tmp / "g.svg") == slurp(tmp / "g2.svg"));
}

TEST_CASE("experiment validates its config file up front", "[cli]") {
  oracles::TempDir tmp;
  gameclr::detail::write_file(tmp / "bad.cfg", "epochs=1\nbogus_key=3\n");
  const CliResult r = run_cli("experiment --config " + q(tmp / "bad.cfg") + " --out " +
                              q(tmp / "out"));
  CHECK(r.code == 2);
  CHECK(r.out.find("bogus_key") != std::string::npos);
  gameclr::detail::write_file(tmp / "noeq.cfg", "epochs\n");
  CHECK(run_cli("experiment --config " + q(tmp / "noeq.cfg") + " --out " + q(tmp / "out")).code ==
        2);
}

TEST_CASE("the experiment pipeline is reproducible down to its manifest", "[cli]") {
  oracles::TempDir tmp;
  gameclr::detail::write_file(tmp / "tiny.cfg",
                              "# desk-scale smoke configuration\n"
                              "epochs = 1\n"
                              "anchors_per_epoch = 8\n"
                              "batch_size = 4\n"
                              "train_data_anchors = 4\n"
                              "probe_anchors = 100\n"
                              "runs = 1\n"
                              "seed = 11\n");
  const std::string base = "experiment --config " + q(tmp / "tiny.cfg") + " --out ";
  const CliResult r1 = run_cli(base + q(tmp / "x1"));
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("manifest.txt") != std::string::npos);
  REQUIRE(run_cli(base + q(tmp / "x2")).code == 0);

  const std::string manifest = slurp(tmp / "x1" / "manifest.txt");
  CHECK(manifest == slurp(tmp / "x2" / "manifest.txt"));

  // three datasets of four files each, plus nine top-level artifacts
  const auto lines = gameclr::detail::split_lines(manifest);
  CHECK(lines.size() == 21);
  for (const std::string& line : lines) {
    REQUIRE(line.size() > 66);
    for (int i = 0; i < 64; ++i) CHECK(std::isxdigit(static_cast<unsigned char>(line[i])) != 0);
    CHECK(line.substr(64, 2) == "  ");
  }
  CHECK(manifest.find("  gameclr.bin\n") != std::string::npos);
  CHECK(manifest.find("  fig2.svg\n") != std::string::npos);
  CHECK(manifest.find("manifest.txt") == std::string::npos);  // never hashes itself
  for (const char* name : {"untrained.bin", "simclr.bin", "gameclr.bin", "report.csv",
                           "report_summary.csv", "report_table.txt", "fig2.svg"})
    CHECK(fs::exists(tmp / "x1" / name));
}
