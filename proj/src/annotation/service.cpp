#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "uranker/annotation.hpp"
#include "uranker/dataset.hpp"

namespace uranker::annotation {

// --- store -----------------------------------------------------------------

SessionStore::SessionStore(std::optional<fs::path> journal) : journal_(std::move(journal)) {
  if (journal_) recover();
}

void SessionStore::recover() {
  std::ifstream in(*journal_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (const std::string& l : lines) {
    ++lineno;
    if (l.empty()) continue;
    json ev;
    try {
      ev = json::parse(l);
    } catch (const json::exception&) {
      // a torn final write is dropped; anything earlier is corruption
      if (lineno == lines.size()) break;
      throw LoadError(journal_->string() + ":" + std::to_string(lineno) + ": unparsable journal line");
    }
    const std::string kind = ev.value("event", "");
    if (kind == "create") {
      SessionSpec spec = session_spec_from_json(ev.at("spec"));
      const std::string id = spec.id;
      sessions_.emplace(id, std::make_unique<Entry>(std::move(spec)));
      if (id.size() > 1 && id[0] == 's' && id.find_first_not_of("0123456789", 1) == std::string::npos)
        next_id_ = std::max(next_id_, static_cast<std::size_t>(std::stoull(id.substr(1))) + 1);
    } else if (kind == "vote") {
      Vote v{ev.at("voter").get<std::string>(), parse_choice(ev.at("choice").get<std::string>()),
             ev.at("left").get<std::string>(), ev.at("right").get<std::string>(),
             ev.value("timestamp_ms", std::int64_t{0})};
      entry(ev.at("session_id").get<std::string>()).session.submit_vote(v);
    } else {
      throw LoadError(journal_->string() + ":" + std::to_string(lineno) + ": unknown event '" + kind + "'");
    }
  }
}

void SessionStore::append(const json& event) {
  if (!journal_) return;
  std::lock_guard lock(journal_mutex_);
  std::ofstream out(*journal_, std::ios::app);
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw LoadError("cannot append to journal " + journal_->string());
}

SessionStore::Entry& SessionStore::entry(const std::string& id) const {
  std::lock_guard lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("session " + id);
  return *it->second;
}

std::string SessionStore::create(SessionSpec spec) {
  std::lock_guard lock(map_mutex_);
  if (spec.id.empty()) {
    char buf[32];
    do {
      std::snprintf(buf, sizeof buf, "s%04zu", next_id_++);
    } while (sessions_.count(buf));
    spec.id = buf;
  } else if (sessions_.count(spec.id)) {
    throw ProtocolError("conflict", "session " + spec.id + " already exists", 409);
  }
  auto e = std::make_unique<Entry>(spec);  // validates
  const std::string id = spec.id;
  append({{"event", "create"}, {"spec", to_json(spec)}});
  sessions_.emplace(id, std::move(e));
  return id;
}

bool SessionStore::vote(const std::string& id, const Vote& vote) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mutex);
  Vote v = vote;
  if (v.left.empty() && v.right.empty() && e.session.active()) std::tie(v.left, v.right) = e.session.current_pair();
  const bool resolved = e.session.submit_vote(v);
  append({{"event", "vote"},
          {"session_id", id},
          {"voter", v.voter},
          {"choice", to_string(v.choice)},
          {"left", v.left},
          {"right", v.right},
          {"timestamp_ms", v.timestamp_ms}});
  return resolved;
}

void SessionStore::inspect(const std::string& id, const std::function<void(const ComparisonSession&)>& fn) const {
  Entry& e = entry(id);
  std::lock_guard lock(e.mutex);
  fn(e.session);
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

// --- HTTP ------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ProtocolError& e) {
    reply(res, e.status(), {{"error", e.code()}, {"message", e.what()}});
  } catch (const Error& e) {
    reply(res, 400, {{"error", e.code()}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", "invalid_input"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", "internal"}, {"message", e.what()}});
  }
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string image_url(const std::string& id) { return "/images/" + id; }

}  // namespace

struct AnnotationServer::Impl {
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
};

AnnotationServer::AnnotationServer(ServerOptions options)
    : impl_(std::make_unique<Impl>()), store_(std::make_unique<SessionStore>(options.journal)) {
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  SessionStore& store = *store_;
  const fs::path root = impl_->options.data_root;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Post("/sessions", [&store, root](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      SessionSpec spec;
      if (body.contains("group")) {
        if (root.empty()) throw InvalidInput("server has no dataset root; pass explicit images");
        const std::string gid = body.at("group").get<std::string>();
        const auto ds = data::load_dataset(root);
        auto it = std::find_if(ds.groups.begin(), ds.groups.end(), [&](const auto& g) { return g.id == gid; });
        if (it == ds.groups.end()) throw not_found("group " + gid);
        for (const auto& p : it->images) spec.images.push_back(fs::relative(p, root).generic_string());
        std::sort(spec.images.begin(), spec.images.end());  // the ranking order must not leak
        json rest = body;
        rest.erase("group");
        rest["images"] = spec.images;
        spec = session_spec_from_json(rest);
      } else {
        spec = session_spec_from_json(body);
      }
      const std::string id = store.create(std::move(spec));
      json out{{"session_id", id}};
      store.inspect(id, [&](const ComparisonSession& s) { out["images"] = s.spec().images.size(); });
      reply(res, 201, out);
    });
  });

  srv.Get("/sessions", [&store](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, {{"sessions", store.ids()}}); });
  });

  srv.Get(R"(/sessions/([^/]+)/pair)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const std::string voter = req.get_param_value("voter_id");
      store.inspect(id, [&](const ComparisonSession& s) {
        json out{{"session_id", id}, {"status", to_string(s.status())}, {"comparisons", s.comparisons()}};
        if (s.active()) {
          const auto [l, r] = s.current_pair();
          out.update({{"left_id", l},
                      {"right_id", r},
                      {"left_url", image_url(l)},
                      {"right_url", image_url(r)},
                      {"pass_no", s.pass_no()},
                      {"cursor", s.cursor()},
                      {"voters_remaining", s.voters_remaining()}});
          if (!voter.empty()) out["voted"] = s.has_voted(voter);
        }
        reply(res, 200, out);
      });
    });
  });

  srv.Post(R"(/sessions/([^/]+)/votes)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const json body = json::parse(req.body);
      Vote v{body.at("voter_id").get<std::string>(), parse_choice(body.at("choice").get<std::string>()),
             body.value("left_id", std::string{}), body.value("right_id", std::string{}), now_ms()};
      const bool resolved = store.vote(id, v);
      json out{{"accepted", true}, {"resolved", resolved}};
      store.inspect(id, [&](const ComparisonSession& s) { out["status"] = to_string(s.status()); });
      reply(res, 200, out);
    });
  });

  srv.Get(R"(/sessions/([^/]+)/result)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      store.inspect(id, [&](const ComparisonSession& s) {
        reply(res, 200, {{"session_id", id}, {"ranking", s.result()}, {"comparisons", s.comparisons()}});
      });
    });
  });

  srv.Get(R"(/sessions/([^/]+)/log)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      store.inspect(id, [&](const ComparisonSession& s) {
        json decisions = json::array();
        for (const auto& d : s.audit_log()) decisions.push_back(to_json(d));
        reply(res, 200, {{"session_id", id}, {"spec", to_json(s.spec())}, {"decisions", decisions}});
      });
    });
  });

  srv.Get(R"(/images/(.+))", [root](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const fs::path rel = fs::path(std::string(req.matches[1])).lexically_normal();
      if (root.empty() || rel.is_absolute() || rel.empty() || *rel.begin() == "..")
        throw not_found("image " + std::string(req.matches[1]));
      const fs::path p = root / rel;
      std::ifstream in(p, std::ios::binary);
      if (!in) throw not_found("image " + rel.generic_string());
      std::ostringstream buf;
      buf << in.rdbuf();
      res.set_content(buf.str(), p.extension() == ".png" ? "image/png" : "application/octet-stream");
    });
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(int port) {
  auto& srv = impl_->server;
  const std::string& host = impl_->options.host;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  while (!srv.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  return bound;
}

void AnnotationServer::run(int port) {
  if (!impl_->server.listen(impl_->options.host, port))
    throw ConfigError("cannot listen on " + impl_->options.host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace uranker::annotation
