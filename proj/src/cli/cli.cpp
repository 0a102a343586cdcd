#include "uranker/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "uranker/annotation.hpp"
#include "uranker/checkpoint.hpp"
#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"
#include "uranker/metrics.hpp"
#include "uranker/ranking.hpp"
#include "uranker/uie.hpp"
#include "uranker/uranker_io.hpp"

namespace uranker::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string flat_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + flat_value(e);
    return out;
  }
  return v.dump();
}

json flatten(const json& obj, const std::map<std::string, std::string>& rename = {}) {
  json out = json::object();
  for (const auto& [k, v] : obj.items()) {
    auto it = rename.find(k);
    out[it == rename.end() ? k : it->second] = flat_value(v);
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_snapshot(const fs::path& output, const std::string& command, const json& inputs, const json& config) {
  write_json(snapshot_path(output), {{"command", command}, {"inputs", inputs}, {"config", config}});
}

KeyValues parse_sets(const std::vector<std::string>& sets) {
  KeyValues out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return out;
}

KeyValues gather(const std::string& config_file, const std::vector<std::string>& sets) {
  KeyValues kv;
  if (!config_file.empty()) kv = read_config_file(config_file);
  for (auto& p : parse_sets(sets)) kv.push_back(std::move(p));
  return kv;
}

/// The `preset` key picks the base configuration before anything else applies.
std::string take_preset(KeyValues& kv) {
  std::string preset = "default";
  for (auto it = kv.begin(); it != kv.end();) {
    if (it->first == "preset") {
      preset = it->second;
      it = kv.erase(it);
    } else {
      ++it;
    }
  }
  if (preset != "default" && preset != "toy") throw ConfigError("preset must be 'default' or 'toy', got '" + preset + "'");
  return preset;
}

struct RankerSetup {
  core::URankerConfig config;
  ranking::TrainRecipe recipe;
  json flat() const {
    json j = flatten(core::to_json(config));
    j.update(flatten(ranking::to_json(recipe)));
    return j;
  }
};

RankerSetup resolve_ranker(KeyValues kv) {
  RankerSetup s;
  if (take_preset(kv) == "toy") s.config = core::URankerConfig::toy();
  for (const auto& [k, v] : kv) {
    if (!core::apply_config_key(s.config, k, v) && !ranking::apply_config_key(s.recipe, k, v))
      throw ConfigError("unknown config key '" + k + "'");
  }
  s.config.validate();
  s.recipe.validate();
  return s;
}

struct UIESetup {
  uie::NU2NetConfig config;
  uie::UIERecipe recipe;
  json flat() const {
    json j = flatten(uie::to_json(config), {{"widths", "uie_widths"}, {"blocks_per_stage", "uie_blocks"}});
    j.update(flatten(uie::to_json(recipe)));
    return j;
  }
};

UIESetup resolve_uie(KeyValues kv) {
  UIESetup s;
  if (take_preset(kv) == "toy") s.config = uie::NU2NetConfig::toy();
  for (const auto& [k, v] : kv) {
    if (!uie::apply_config_key(s.config, k, v) && !uie::apply_config_key(s.recipe, k, v))
      throw ConfigError("unknown config key '" + k + "'");
  }
  s.config.validate();
  s.recipe.validate();
  return s;
}

std::vector<data::RankedGroup> pick_groups(const data::DatasetManifest& ds, std::optional<std::size_t> split,
                                           std::uint64_t seed, bool train_part) {
  if (ds.groups.empty()) throw InvalidInput("dataset " + ds.root.string() + " has no ranked groups");
  if (!split) return ds.groups;
  const auto parts = data::split_dataset(ds.groups, *split, seed);
  return train_part ? parts.train : parts.test;
}

/// Image size the ranker was trained at, 0 when unknown.
Index trained_image_size(const fs::path& ckpt) {
  const json side = ckpt::read_sidecar(ckpt, core::kURankerKind);
  if (side.contains("extra") && side["extra"].contains("recipe"))
    return side["extra"]["recipe"].value("image_size", Index{0});
  return 0;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

// --- commands ----------------------------------------------------------------

struct SynthArgs {
  data::SynthOptions o;
  std::string out;
};

int cmd_make_synth(const SynthArgs& a, std::ostream& out) {
  const auto ds = data::synth_generate(a.out, a.o);
  write_snapshot(a.out, "make-synth", {{"out", a.out}},
                 {{"groups", a.o.groups}, {"k", a.o.k}, {"size", a.o.size}, {"seed", a.o.seed}, {"uie_pairs", a.o.uie_pairs}});
  out << json{{"root", a.out}, {"groups", ds.groups.size()}, {"pairs", ds.pairs.size()}}.dump() << "\n";
  return 0;
}

struct TrainRankerArgs {
  std::string data, config, out, log;
  std::vector<std::string> sets;
  std::optional<std::size_t> split;
  std::optional<std::uint64_t> seed;
};

int cmd_train_ranker(const TrainRankerArgs& a, std::ostream& out) {
  KeyValues kv = gather(a.config, a.sets);
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  const RankerSetup s = resolve_ranker(kv);
  const auto ds = data::load_dataset(a.data);
  const auto groups = ranking::load_groups(pick_groups(ds, a.split, s.recipe.seed, true), s.config.total_stride(),
                                           s.recipe.image_size);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  ranking::TrainOptions opts;
  opts.log = &log;
  const auto res = ranking::train_uranker(groups, s.recipe, s.config, opts);
  const auto agreement = ranking::evaluate_ranker(res.model, groups);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  core::save_uranker(a.out, res.model, {{"recipe", ranking::to_json(s.recipe)}, {"train_groups", res.train_groups}});
  json inputs{{"data", a.data}, {"out", a.out}};
  if (a.split) inputs["split"] = *a.split;
  write_snapshot(a.out, "train-ranker", inputs, s.flat());
  out << json{{"checkpoint", a.out},
              {"epochs", s.recipe.epochs},
              {"initial_loss", res.initial_loss},
              {"final_loss", res.final_loss},
              {"train_srcc", agreement.srcc},
              {"train_krcc", agreement.krcc},
              {"log", log_path.string()}}
             .dump()
      << "\n";
  return 0;
}

struct EvalRankerArgs {
  std::string ckpt, data, report;
  std::optional<std::size_t> split;
  std::uint64_t split_seed = 0;
  std::optional<Index> image_size;
};

int cmd_eval_ranker(const EvalRankerArgs& a, std::ostream& out) {
  const core::URanker model = core::load_uranker(a.ckpt);
  const Index size = a.image_size ? *a.image_size : trained_image_size(a.ckpt);
  const auto ds = data::load_dataset(a.data);
  const auto groups =
      ranking::load_groups(pick_groups(ds, a.split, a.split_seed, false), model.config().total_stride(), size);
  const auto scores = ranking::score_groups(model, groups);
  std::vector<metrics::GroupPrediction> preds;
  json per_group = json::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<int> ranks(groups[g].images.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<int>(i) + 1;
    preds.push_back({scores[g], ranks});
    json entry{{"group", groups[g].id}, {"scores", scores[g]}};
    if (ranks.size() >= 2) entry["srcc"] = metrics::srcc(scores[g], ranks);
    per_group.push_back(entry);
  }
  const auto agg = metrics::mean_group_agreement(preds);
  const json report{{"checkpoint", a.ckpt}, {"srcc", agg.srcc},       {"krcc", agg.krcc},
                    {"groups", agg.groups}, {"skipped", agg.skipped}, {"image_size", size},
                    {"per_group", per_group}};
  if (!a.report.empty()) {
    write_json(a.report, report);
    json inputs{{"ckpt", a.ckpt}, {"data", a.data}, {"report", a.report}, {"image_size", size}};
    if (a.split) inputs["split"] = *a.split;
    write_snapshot(a.report, "eval-ranker", inputs, json::object());
  }
  out << json{{"srcc", agg.srcc}, {"krcc", agg.krcc}, {"groups", agg.groups}}.dump() << "\n";
  return 0;
}

struct TrainUIEArgs {
  std::string data, config, out, log, ranker;
  std::vector<std::string> sets;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
};

int cmd_train_uie(const TrainUIEArgs& a, std::ostream& out) {
  KeyValues kv = gather(a.config, a.sets);
  if (a.lambda) kv.emplace_back("lambda", fmt(*a.lambda));
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  const UIESetup s = resolve_uie(kv);
  std::optional<core::URanker> ranker;
  if (!a.ranker.empty()) ranker.emplace(core::load_uranker(a.ranker));
  if (s.recipe.lambda > 0 && !ranker) throw ConfigError("lambda > 0 needs --ranker CKPT");
  const auto ds = data::load_dataset(a.data);
  if (ds.pairs.empty()) throw InvalidInput("dataset " + a.data + " has no enhancement pairs");
  const auto pairs = data::load_pairs(ds.pairs);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  uie::UIETrainOptions opts;
  opts.log = &log;
  const auto res = uie::train_uie(pairs, s.recipe, s.config, ranker ? &*ranker : nullptr, opts);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  uie::save_nu2net(a.out, res.model, {{"recipe", uie::to_json(s.recipe)}, {"ranker", a.ranker}});
  write_snapshot(a.out, "train-uie", {{"data", a.data}, {"out", a.out}, {"ranker", a.ranker}}, s.flat());
  const auto& first = res.history.front();
  const auto& last = res.history.back();
  out << json{{"checkpoint", a.out},
              {"epochs", s.recipe.epochs},
              {"initial_content", first.content},
              {"final_content", last.content},
              {"final_total", last.total},
              {"log", log_path.string()}}
             .dump()
      << "\n";
  return 0;
}

struct EvalUIEArgs {
  std::string ckpt, data, report;
};

int cmd_eval_uie(const EvalUIEArgs& a, std::ostream& out) {
  const uie::NU2Net model = uie::load_nu2net(a.ckpt);
  const auto ds = data::load_dataset(a.data);
  if (ds.pairs.empty()) throw InvalidInput("dataset " + a.data + " has no enhancement pairs");
  const auto s = uie::evaluate_uie(model, data::load_pairs(ds.pairs));
  const json report{{"checkpoint", a.ckpt}, {"psnr", s.psnr}, {"ssim", s.ssim}, {"pairs", ds.pairs.size()}};
  if (!a.report.empty()) {
    write_json(a.report, report);
    write_snapshot(a.report, "eval-uie", {{"ckpt", a.ckpt}, {"data", a.data}, {"report", a.report}}, json::object());
  }
  out << report.dump() << "\n";
  return 0;
}

struct EnhanceArgs {
  std::string ckpt, in, out;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& out) {
  const uie::NU2Net model = uie::load_nu2net(a.ckpt);
  const Tensor img = data::read_png(a.in);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  data::write_png(a.out, model.enhance(img));
  write_snapshot(a.out, "enhance", {{"ckpt", a.ckpt}, {"in", a.in}, {"out", a.out}}, json::object());
  out << json{{"out", a.out}, {"height", img.shape()[1]}, {"width", img.shape()[2]}}.dump() << "\n";
  return 0;
}

struct ScoreArgs {
  std::string ckpt, in;
  std::optional<Index> image_size;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const core::URanker model = core::load_uranker(a.ckpt);
  const Index size = a.image_size ? *a.image_size : trained_image_size(a.ckpt);
  const Tensor img = ranking::prepare_image(data::read_png(a.in), model.config().total_stride(), size);
  out << fmt(model.score(img)) << "\n";
  return 0;
}

/// Object keyed by group id, or an array of per-group arrays.
std::map<std::string, json> groups_of(const json& j, const std::string& what) {
  std::map<std::string, json> out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out[k] = v;
  } else if (j.is_array()) {
    char buf[16];
    for (std::size_t i = 0; i < j.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%06zu", i);
      out[buf] = j[i];
    }
  } else {
    throw InvalidInput(what + " must be an object of groups or an array of groups");
  }
  return out;
}

struct ScoreMetricsArgs {
  std::string pred, gt, report;
};

int cmd_score_metrics(const ScoreMetricsArgs& a, std::ostream& out) {
  const auto pred = groups_of(read_json(a.pred), "--pred");
  const auto gt = groups_of(read_json(a.gt), "--gt");
  std::vector<metrics::GroupPrediction> preds;
  json per_group = json::object();
  for (const auto& [id, scores] : pred) {
    auto it = gt.find(id);
    if (it == gt.end()) throw InvalidInput("group '" + id + "' has predictions but no ground truth");
    metrics::GroupPrediction p{scores.get<std::vector<double>>(), it->second.get<std::vector<int>>()};
    if (p.scores.size() != p.gt_ranks.size())
      throw InvalidInput("group '" + id + "': " + std::to_string(p.scores.size()) + " scores vs " +
                         std::to_string(p.gt_ranks.size()) + " ranks");
    if (p.scores.size() >= 2)
      per_group[id] = {{"srcc", metrics::srcc(p.scores, p.gt_ranks)}, {"krcc", metrics::krcc(p.scores, p.gt_ranks)}};
    preds.push_back(std::move(p));
  }
  for (const auto& [id, r] : gt)
    if (!pred.count(id)) throw InvalidInput("group '" + id + "' has ground truth but no predictions");
  const auto agg = metrics::mean_group_agreement(preds);
  const json report{{"srcc", agg.srcc}, {"krcc", agg.krcc}, {"groups", agg.groups}, {"skipped", agg.skipped},
                    {"per_group", per_group}};
  if (!a.report.empty()) {
    write_json(a.report, report);
    write_snapshot(a.report, "score-metrics", {{"pred", a.pred}, {"gt", a.gt}}, json::object());
  }
  out << report.dump() << "\n";
  return 0;
}

struct ServeArgs {
  std::string data, journal, host = "127.0.0.1";
  int port = 8080;
};

int cmd_annotate_serve(const ServeArgs& a, std::ostream& out) {
  annotation::ServerOptions o;
  o.data_root = a.data;
  o.journal = a.journal.empty() ? fs::path(a.data) / "annotation_journal.jsonl" : fs::path(a.journal);
  o.host = a.host;
  annotation::AnnotationServer server(o);
  const int port = server.start(a.port);
  out << json{{"listening", a.host + ":" + std::to_string(port)}, {"journal", o.journal->string()}}.dump() << std::endl;
  g_interrupted = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

struct SimArgs {
  std::string voters, url, data;
};

int cmd_annotate_sim(const SimArgs& a, std::ostream& out, std::ostream& err) {
  annotation::SimSpec spec = annotation::sim_spec_from_json(read_json(a.voters));
  if (!a.url.empty()) spec.url = a.url;
  if (!a.data.empty()) spec.data_root = a.data;
  const auto r = annotation::run_simulation(spec);
  out << to_json(r).dump() << "\n";
  if (!r.matches_order) {
    err << json{{"error", "oracle_mismatch"}, {"message", "final ranking differs from the voters' order"}}.dump()
        << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

fs::path snapshot_path(const fs::path& output) {
  if (fs::is_directory(output)) return output / "run.json";
  return fs::path(output.string() + ".run.json");
}

KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  KeyValues kv;
  if (trim(text).rfind('{', 0) == 0) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    const json cfg = j.contains("config") ? j["config"] : j;
    if (!cfg.is_object()) throw ConfigError(path.string() + ": config must be an object");
    for (const auto& [k, v] : cfg.items()) kv.emplace_back(k, flat_value(v));
    return kv;
  }
  std::istringstream lines(text);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(n) + ": empty key");
    kv.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"URanker underwater image quality and enhancement toolkit", "uranker"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("make-synth", "Generate a synthetic ranked dataset");
  c_synth->add_option("--groups", synth.o.groups, "Number of ranked groups")->check(CLI::PositiveNumber);
  c_synth->add_option("--k", synth.o.k, "Images per group")->check(CLI::Range(2, 1000));
  c_synth->add_option("--seed", synth.o.seed, "Generator seed");
  c_synth->add_option("--size", synth.o.size, "Square image side")->check(CLI::PositiveNumber);
  c_synth->add_option("--uie-pairs", synth.o.uie_pairs, "Overflow-inducing enhancement pairs")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  TrainRankerArgs tr;
  auto* c_tr = app.add_subcommand("train-ranker", "Train URanker on ranked groups");
  c_tr->add_option("--data", tr.data, "Dataset root")->required();
  c_tr->add_option("--config", tr.config, "Flat key = value config or a run snapshot");
  c_tr->add_option("--set", tr.sets, "Extra key=value overrides");
  c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
  c_tr->add_option("--log", tr.log, "JSONL training log (default CKPT.log.jsonl)");
  c_tr->add_option("--split", tr.split, "Train on this many groups of a seeded split");
  c_tr->add_option("--seed", tr.seed, "Overrides the recipe seed");

  EvalRankerArgs er;
  auto* c_er = app.add_subcommand("eval-ranker", "SRCC/KRCC of a ranker checkpoint");
  c_er->add_option("--ckpt", er.ckpt, "Checkpoint path")->required();
  c_er->add_option("--data", er.data, "Dataset root")->required();
  c_er->add_option("--report", er.report, "JSON report path");
  c_er->add_option("--split", er.split, "Evaluate the held-out part of a seeded split of this train size");
  c_er->add_option("--split-seed", er.split_seed, "Seed of that split");
  c_er->add_option("--image-size", er.image_size, "Override the resize used at training time");

  TrainUIEArgs tu;
  auto* c_tu = app.add_subcommand("train-uie", "Train NU2Net, optionally with the ranker loss");
  c_tu->add_option("--data", tu.data, "Dataset root with enhancement pairs")->required();
  c_tu->add_option("--config", tu.config, "Flat key = value config or a run snapshot");
  c_tu->add_option("--set", tu.sets, "Extra key=value overrides");
  c_tu->add_option("--lambda", tu.lambda, "Ranker loss weight")->check(CLI::NonNegativeNumber);
  c_tu->add_option("--ranker", tu.ranker, "Frozen ranker checkpoint");
  c_tu->add_option("--out", tu.out, "Checkpoint path")->required();
  c_tu->add_option("--log", tu.log, "JSONL training log (default CKPT.log.jsonl)");
  c_tu->add_option("--seed", tu.seed, "Overrides the recipe seed");

  EvalUIEArgs eu;
  auto* c_eu = app.add_subcommand("eval-uie", "PSNR/SSIM of an enhancement checkpoint");
  c_eu->add_option("--ckpt", eu.ckpt, "Checkpoint path")->required();
  c_eu->add_option("--data", eu.data, "Dataset root with enhancement pairs")->required();
  c_eu->add_option("--report", eu.report, "JSON report path");

  EnhanceArgs en;
  auto* c_en = app.add_subcommand("enhance", "Enhance one PNG");
  c_en->add_option("--ckpt", en.ckpt, "Checkpoint path")->required();
  c_en->add_option("--in", en.in, "Input PNG")->required();
  c_en->add_option("--out", en.out, "Output PNG")->required();

  ScoreArgs sc;
  auto* c_sc = app.add_subcommand("score", "Print the URanker score of one PNG");
  c_sc->add_option("--ckpt", sc.ckpt, "Checkpoint path")->required();
  c_sc->add_option("--in", sc.in, "Input PNG")->required();
  c_sc->add_option("--image-size", sc.image_size, "Override the resize used at training time");

  ScoreMetricsArgs sm;
  auto* c_sm = app.add_subcommand("score-metrics", "SRCC/KRCC of predicted scores against ranks");
  c_sm->add_option("--pred", sm.pred, "JSON predicted scores per group")->required();
  c_sm->add_option("--gt", sm.gt, "JSON ground-truth ranks per group (1 = best)")->required();
  c_sm->add_option("--report", sm.report, "JSON report path");

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("annotate-serve", "Serve the pairwise annotation API");
  c_sv->add_option("--data", sv.data, "Dataset root (images are served from here)")->required();
  c_sv->add_option("--port", sv.port, "Port, 0 picks a free one")->check(CLI::Range(0, 65535));
  c_sv->add_option("--host", sv.host, "Bind address");
  c_sv->add_option("--journal", sv.journal, "Event log (default DATA/annotation_journal.jsonl)");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("annotate-sim", "Drive a session with order-following voters");
  c_sim->add_option("--voters", sim.voters, "Voter spec JSON")->required();
  c_sim->add_option("--url", sim.url, "Server URL, overrides the spec");
  c_sim->add_option("--data", sim.data, "Dataset root for the true order, overrides the spec");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*c_synth) return cmd_make_synth(synth, out);
    if (*c_tr) return cmd_train_ranker(tr, out);
    if (*c_er) return cmd_eval_ranker(er, out);
    if (*c_tu) return cmd_train_uie(tu, out);
    if (*c_eu) return cmd_eval_uie(eu, out);
    if (*c_en) return cmd_enhance(en, out);
    if (*c_sc) return cmd_score(sc, out);
    if (*c_sm) return cmd_score_metrics(sm, out);
    if (*c_sv) return cmd_annotate_serve(sv, out);
    if (*c_sim) return cmd_annotate_sim(sim, out, err);
  } catch (const Error& e) {
    err << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace uranker::cli
