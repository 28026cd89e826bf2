#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "voxflood/volume_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "voxflood_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = workdir() / name;
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + VOXFLOOD_CLI + "' " + args +
                          " >> cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string small_config(const std::string& tag) {
  return "preset = \"vitb48\"\n"
         "[paths]\n"
         "output-prefix = \"" + tag + "/m\"\n"
         "input = \"" + tag + "/m_input.voxv\"\n"
         "labels = \"" + tag + "/m_labels.voxv\"\n"
         "reference = \"" + tag + "/m_labels.voxv\"\n"
         "predicted = \"" + tag + "/m_predicted.voxv\"\n"
         "journal = \"" + tag + "/journal.txt\"\n"
         "evaluation-dir = \"" + tag + "/eval\"\n"
         "dataset-dir = \"" + tag + "/dataset\"\n"
         "export-dir = \"" + tag + "/slices\"\n"
         "[phantom]\n"
         "dims = 64\n"
         "count = 3\n"
         "noise-sigma = 5\n"
         "[adapter]\n"
         "sam-output-channel = \"max-predicted-iou\"\n"
         "[training]\n"
         "stride = 8\n"
         "slice-size = 64\n";
}

}  // namespace

TEST_CASE("full pipeline through the command line") {
  const fs::path cfg = write_config("run.toml", small_config("a"));
  REQUIRE(run("generate -c " + cfg.string()) == 0);
  REQUIRE(run("segment -c " + cfg.string()) == 0);
  REQUIRE(run("evaluate -c " + cfg.string()) == 0);
  CHECK(run("prepare-training -c " + cfg.string()) == 0);
  CHECK(run("export-slices -c " + cfg.string()) == 0);
  const fs::path a = workdir() / "a";
  CHECK(fs::exists(a / "eval" / "correlation.csv"));
  CHECK(fs::exists(a / "eval" / "assignment.csv"));
  CHECK(fs::exists(a / "eval" / "heatmap.pgm"));
  CHECK(fs::exists(a / "dataset" / "manifest.tsv"));
  CHECK(fs::exists(a / "slices" / "input_z_32.pgm"));
  CHECK(fs::exists(a / "slices" / "labels_z_32.pgm"));
  CHECK(fs::exists(a / "slices" / "predicted_z_32.pgm"));
  CHECK(slurp(a / "journal.txt").find("pop seg=1 n=1") != std::string::npos);
  const auto predicted = voxflood::read_label_volume(a / "m_predicted.voxv");
  CHECK(*std::max_element(predicted.values().begin(), predicted.values().end()) == 3);
}

TEST_CASE("identical configs give byte-identical outputs") {
  const fs::path c1 = write_config("d1.toml", small_config("d1"));
  const fs::path c2 = write_config("d2.toml", small_config("d2"));
  for (const fs::path& c : {c1, c2}) {
    REQUIRE(run("generate -c " + c.string()) == 0);
    REQUIRE(run("segment -c " + c.string()) == 0);
    REQUIRE(run("evaluate -c " + c.string()) == 0);
  }
  const fs::path d1 = workdir() / "d1", d2 = workdir() / "d2";
  for (const char* f : {"m_input.voxv", "m_labels.voxv", "m_predicted.voxv", "journal.txt", "eval/correlation.csv",
                        "eval/assignment.csv", "eval/heatmap.pgm"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("exit codes") {
  CHECK(run("") == 2);
  CHECK(run("segment") == 2);
  CHECK(run("segment -c missing.toml") == 2);
  CHECK(run("segment -c " + write_config("bad_key.toml", "[adapter]\ntile-sise = 3\n").string()) == 2);
  CHECK(run("segment -c " + write_config("no_input.toml", "[paths]\ninput = \"nope.voxv\"\npredicted = \"p.voxv\"\n").string()) ==
        2);

  const fs::path cfg = write_config("backend.toml", small_config("b"));
  REQUIRE(run("generate -c " + cfg.string()) == 0);
  CHECK(run("segment -c " + cfg.string(), "VOXFLOOD_BACKEND='stdio:exit 0'") == 3);
  CHECK(run("segment -c " + cfg.string(), "VOXFLOOD_BACKEND='tcp:127.0.0.1:1'") == 3);
  CHECK(run("segment -c " + cfg.string(), "VOXFLOOD_BACKEND=echo") == 0);

  const fs::path crowded =
      write_config("crowded.toml", "[paths]\noutput-prefix = \"c/m\"\n[phantom]\ndims = 40\ncount = 60\nsize-min = 12\n");
  CHECK(run("generate -c " + crowded.string()) == 4);

  voxflood::write_voxv(workdir() / "b" / "zeros.voxv", voxflood::LabelVolume({64, 64, 64}, 0));
  const fs::path nofg = write_config(
      "nofg.toml", "[paths]\ninput = \"b/m_input.voxv\"\nlabels = \"b/zeros.voxv\"\ndataset-dir = \"b/ds\"\n");
  CHECK(run("prepare-training -c " + nofg.string()) == 4);
}

TEST_CASE("segment through a spawned stdio bridge") {
  const fs::path cfg = write_config("bridge.toml", small_config("s"));
  REQUIRE(run("generate -c " + cfg.string()) == 0);
  const std::string env = std::string("VOXFLOOD_BACKEND='stdio:") + VOXFLOOD_CLI + " serve --mode oracle'";
  REQUIRE(run("segment -c " + cfg.string(), env) == 0);
  const fs::path local = write_config("local.toml", small_config("s") + "");
  const std::string bridged = slurp(workdir() / "s" / "m_predicted.voxv");
  REQUIRE(run("segment -c " + local.string()) == 0);
  CHECK(slurp(workdir() / "s" / "m_predicted.voxv") == bridged);
}
