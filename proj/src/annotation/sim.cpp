#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "httplib.h"
#include "uranker/annotation.hpp"
#include "uranker/dataset.hpp"

namespace uranker::annotation {

SimSpec sim_spec_from_json(const json& j) {
  SimSpec s;
  try {
    s.url = j.value("url", std::string{});
    if (j.contains("session_id")) s.session_id = j.at("session_id").get<std::string>();
    if (j.contains("images")) s.images = j.at("images").get<std::vector<std::string>>();
    if (j.contains("group")) s.group = j.at("group").get<std::string>();
    s.voters = j.at("voters").get<std::vector<std::string>>();
    if (j.contains("tiebreak")) s.tiebreak = j.at("tiebreak").get<std::string>();
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("order")) s.order = j.at("order").get<std::vector<std::string>>();
    if (j.contains("data")) s.data_root = j.at("data").get<std::string>();
    s.timeout_s = j.value("timeout_s", 60.0);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad voter spec: ") + e.what());
  }
  return s;
}

json to_json(const SimResult& r) {
  return {{"session_id", r.session_id},
          {"ranking", r.ranking},
          {"comparisons", r.comparisons},
          {"stale_votes", r.stale_votes},
          {"matches_order", r.matches_order}};
}

namespace {

json checked(const httplib::Result& r, const std::string& what) {
  if (!r) throw LoadError(what + ": " + httplib::to_string(r.error()));
  json body = json::parse(r->body, nullptr, false);
  if (r->status >= 400) {
    const std::string code = body.is_object() ? body.value("error", "http_error") : "http_error";
    const std::string msg = body.is_object() ? body.value("message", r->body) : r->body;
    throw ProtocolError(code, what + ": " + msg, r->status);
  }
  return body;
}

std::vector<std::string> dataset_order(const fs::path& root, const std::string& gid) {
  const auto ds = data::load_dataset(root);
  for (const auto& g : ds.groups) {
    if (g.id != gid) continue;
    std::vector<std::string> out;
    for (const auto& p : g.images) out.push_back(fs::relative(p, root).generic_string());
    return out;
  }
  throw InvalidInput("group " + gid + " not in " + root.string());
}

}  // namespace

SimResult run_simulation(const SimSpec& spec) {
  if (spec.url.empty()) throw InvalidInput("voter spec needs a server url");
  if (spec.voters.empty()) throw InvalidInput("voter spec needs at least one voter");
  std::vector<std::string> order = spec.order;
  if (order.empty()) {
    if (spec.group && !spec.data_root.empty()) {
      order = dataset_order(spec.data_root, *spec.group);
    } else if (!spec.group) {
      order = spec.images;
    } else {
      throw InvalidInput("voter spec needs an order, or data plus group");
    }
  }

  SimResult result;
  httplib::Client admin(spec.url);
  if (spec.session_id) {
    result.session_id = *spec.session_id;
  } else {
    json body{{"voters", spec.voters}, {"seed", spec.seed}};
    if (spec.group) {
      body["group"] = *spec.group;
    } else {
      body["images"] = spec.images;
    }
    if (spec.tiebreak) body["tiebreak"] = *spec.tiebreak;
    result.session_id =
        checked(admin.Post("/sessions", body.dump(), "application/json"), "create session").at("session_id");
  }
  const std::string base = "/sessions/" + result.session_id;

  auto rank_of = [&](const std::string& id) {
    auto it = std::find(order.begin(), order.end(), id);
    if (it == order.end()) throw InvalidInput("image " + id + " missing from the voter order");
    return it - order.begin();
  };

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(spec.timeout_s);
  std::atomic<std::size_t> stale{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (const std::string& voter : spec.voters) {
    threads.emplace_back([&, voter] {
      try {
        httplib::Client c(spec.url);
        while (!failed) {
          if (std::chrono::steady_clock::now() > deadline) throw LoadError("simulation timed out");
          const json pair = checked(c.Get(base + "/pair?voter_id=" + voter), "fetch pair");
          if (pair.at("status") == "complete") return;
          if (pair.value("voted", false)) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
            continue;
          }
          const std::string l = pair.at("left_id"), r = pair.at("right_id");
          const json vote{{"voter_id", voter},
                          {"choice", rank_of(l) < rank_of(r) ? "left" : "right"},
                          {"left_id", l},
                          {"right_id", r}};
          try {
            checked(c.Post(base + "/votes", vote.dump(), "application/json"), "vote");
          } catch (const ProtocolError& e) {
            if (e.code() == "stale_vote") {
              ++stale;
            } else if (e.code() == "not_active") {
              return;
            } else if (e.code() != "duplicate_vote") {
              throw;
            }
          }
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failed.exchange(true)) failure = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failed) throw LoadError("simulated voter failed: " + failure);

  const json res = checked(admin.Get(base + "/result"), "fetch result");
  result.ranking = res.at("ranking").get<std::vector<std::string>>();
  result.comparisons = res.at("comparisons").get<std::size_t>();
  result.stale_votes = stale;
  result.matches_order = result.ranking == order;
  return result;
}

}  // namespace uranker::annotation
