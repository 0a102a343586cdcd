#include <unistd.h>

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "uranker/annotation.hpp"
#include "uranker/cli.hpp"
#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"

using namespace uranker;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir = fs::temp_directory_path() / ("uranker_cli_" + std::to_string(::getpid()));
  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& rel) const { return (dir / rel).string(); }
  std::string write(const std::string& rel, const std::string& text) const {
    std::ofstream(dir / rel) << text;
    return p(rel);
  }
};

const char* kToyRanker = "preset = toy\nepochs = 2\nlr = 1e-3\nimage_size = 32  # resize\n";

}  // namespace

TEST_CASE_FIXTURE(Workspace, "make-synth then train-ranker, eval-ranker and score") {
  Run r = run({"make-synth", "--groups", "3", "--k", "4", "--seed", "1", "--size", "32", "--out", p("d")});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("groups") == 3);
  CHECK(fs::exists(dir / "d" / "run.json"));

  const std::string cfg = write("r.cfg", kToyRanker);
  r = run({"train-ranker", "--data", p("d"), "--config", cfg, "--out", p("ck/r.bin")});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "ck/r.bin"));
  CHECK(fs::exists(dir / "ck/r.bin.json"));
  CHECK(fs::exists(dir / "ck/r.bin.run.json"));
  std::ifstream log(dir / "ck/r.bin.log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK_NOTHROW(json::parse(line));
    ++lines;
  }
  CHECK(lines == 3);

  r = run({"eval-ranker", "--ckpt", p("ck/r.bin"), "--data", p("d"), "--report", p("rep.json")});
  REQUIRE(r.code == 0);
  const json rep = json::parse(slurp(dir / "rep.json"));
  CHECK(rep.at("groups") == 3);
  CHECK(rep.at("image_size") == 32);
  CHECK(rep.at("per_group").size() == 3);
  CHECK(fs::exists(dir / "rep.json.run.json"));

  const auto img = data::load_dataset(p("d")).groups[0].images[0].string();
  const Run a = run({"score", "--ckpt", p("ck/r.bin"), "--in", img});
  const Run b = run({"score", "--ckpt", p("ck/r.bin"), "--in", img});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(std::isfinite(std::stod(a.out)));
}

TEST_CASE_FIXTURE(Workspace, "a run snapshot reproduces the checkpoint") {
  REQUIRE(run({"make-synth", "--groups", "3", "--k", "3", "--seed", "2", "--size", "32", "--out", p("d")}).code == 0);
  REQUIRE(run({"train-ranker", "--data", p("d"), "--config", write("r.cfg", kToyRanker), "--seed", "5", "--out",
               p("a.bin")})
              .code == 0);
  const json snap = json::parse(slurp(dir / "a.bin.run.json"));
  CHECK(snap.at("config").at("seed") == "5");
  REQUIRE(run({"train-ranker", "--data", p("d"), "--config", p("a.bin.run.json"), "--out", p("b.bin")}).code == 0);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
}

TEST_CASE_FIXTURE(Workspace, "usage errors exit 2, runtime errors exit 1 with one JSON line") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  Run r = run({"make-synth", "--out", p("d"), "--bogus", "1"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err.substr(0, r.err.find('\n'))).at("error") == "usage");
  CHECK(run({"make-synth", "--out", p("d"), "--k", "1"}).code == 2);
  CHECK(run({"--help"}).code == 0);

  r = run({"train-ranker", "--data", p("missing"), "--set", "nope=1", "--out", p("x.bin")});
  CHECK(r.code == 1);
  CHECK(r.err.find('\n') == r.err.size() - 1);
  CHECK(json::parse(r.err).at("error") == "config_error");
  CHECK(json::parse(r.err).at("message").get<std::string>().find("nope") != std::string::npos);

  r = run({"eval-ranker", "--ckpt", p("none.bin"), "--data", p("d")});
  CHECK(r.code == 1);
  CHECK(json::parse(r.err).at("error") == "load_error");
}

TEST_CASE_FIXTURE(Workspace, "config files") {
  const auto kv = cli::read_config_file(write("a.cfg", "# header\n\n lr = 0.5 \nwidths=8,16 # trailing\n"));
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"lr", "0.5"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"widths", "8,16"});
  CHECK_THROWS_AS(cli::read_config_file(write("b.cfg", "lr 0.5\n")), ConfigError);
  CHECK_THROWS_AS(cli::read_config_file(p("none.cfg")), ConfigError);
  const auto js = cli::read_config_file(write("c.json", R"({"config": {"lr": "0.1", "widths": [8, 16]}})"));
  CHECK(js.size() == 2);
  CHECK(run({"train-ranker", "--data", p("d"), "--set", "preset=huge", "--out", p("x.bin")}).code == 1);
}

TEST_CASE_FIXTURE(Workspace, "train-uie, eval-uie and enhance") {
  REQUIRE(run({"make-synth", "--groups", "2", "--k", "3", "--size", "16", "--uie-pairs", "4", "--out", p("d")}).code ==
          0);
  const std::vector<std::string> base{"train-uie", "--data", p("d"), "--set", "preset=toy", "--set", "epochs=2",
                                      "--set",     "crop=16", "--set", "batch_size=2"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  Run r = with({"--lambda", "0.025", "--out", p("u.bin")});
  CHECK(r.code == 1);
  CHECK(json::parse(r.err).at("error") == "config_error");

  r = with({"--out", p("u.bin")});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "u.bin.log.jsonl"));
  r = run({"eval-uie", "--ckpt", p("u.bin"), "--data", p("d"), "--report", p("u.json")});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("pairs") == 4);
  CHECK(json::parse(slurp(dir / "u.json")).at("psnr").get<double>() > 0);

  const auto pair = data::load_dataset(p("d")).pairs.at(0);
  r = run({"enhance", "--ckpt", p("u.bin"), "--in", pair.input.string(), "--out", p("e.png")});
  REQUIRE(r.code == 0);
  CHECK(data::png_size(dir / "e.png") == data::png_size(pair.input));
}

TEST_CASE_FIXTURE(Workspace, "score-metrics") {
  const std::string pred = write("pred.json", R"({"a": [0.9, 0.5, 0.1], "b": [0.1, 0.2, 0.3, 0.4], "c": [1.0]})");
  const std::string gt = write("gt.json", R"({"a": [1, 2, 3], "b": [1, 2, 3, 4], "c": [1]})");
  Run r = run({"score-metrics", "--pred", pred, "--gt", gt, "--report", p("m.json")});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("srcc").get<double>() == doctest::Approx(0.0));
  CHECK(j.at("groups") == 2);
  CHECK(j.at("skipped") == 1);
  CHECK(j.at("per_group").at("a").at("krcc") == 1.0);
  CHECK(fs::exists(dir / "m.json"));
  r = run({"score-metrics", "--pred", write("p2.json", "[[1, 2], [3]]"), "--gt", write("g2.json", "[[1, 2]]")});
  CHECK(r.code == 1);
  r = run({"score-metrics", "--pred", write("p3.json", "[[1, 2]]"), "--gt", write("g3.json", "[[1, 2, 3]]")});
  CHECK(r.code == 1);
}

TEST_CASE_FIXTURE(Workspace, "annotate-sim against a running service") {
  REQUIRE(run({"make-synth", "--groups", "1", "--k", "4", "--size", "16", "--out", p("d")}).code == 0);
  annotation::AnnotationServer server({p("d"), dir / "j.jsonl", "127.0.0.1"});
  const int port = server.start(0);
  const std::string spec = write("voters.json", R"({"group": "g0000", "voters": ["a", "b", "c"], "seed": 3})");
  const Run r = run({"annotate-sim", "--voters", spec, "--url", "http://127.0.0.1:" + std::to_string(port), "--data",
                     p("d")});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("matches_order") == true);
  CHECK(j.at("ranking").size() == 4);
  CHECK(j.at("comparisons").get<std::size_t>() <= annotation::comparison_bound(4));
  server.stop();
}
