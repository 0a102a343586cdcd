#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uranker/errors.hpp"

namespace uranker::annotation {

namespace fs = std::filesystem;
using nlohmann::json;

/// Protocol errors carry the HTTP status the service answers with.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& message, int status)
      : Error(std::move(code), message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

ProtocolError duplicate_vote(const std::string& voter);
ProtocolError stale_vote(const std::string& detail);
ProtocolError not_active(const std::string& id);
ProtocolError not_ready(const std::string& id);
ProtocolError unknown_voter(const std::string& voter);
ProtocolError not_found(const std::string& what);

enum class Choice { Left, Right };
std::string to_string(Choice c);
Choice parse_choice(const std::string& s);

enum class Status { Active, Complete };
std::string to_string(Status s);

struct SessionSpec {
  std::string id;
  std::vector<std::string> images;
  std::vector<std::string> voters;
  std::uint64_t seed = 0;
  std::optional<std::string> tiebreak;  // required when the roster is even
};
json to_json(const SessionSpec& s);
SessionSpec session_spec_from_json(const json& j);

/// `left`/`right` name the pair the voter was shown; empty means "whatever is
/// current" and skips the staleness check.
struct Vote {
  std::string voter;
  Choice choice = Choice::Left;
  std::string left;
  std::string right;
  std::int64_t timestamp_ms = 0;
};

struct Decision {
  int pass = 1;
  std::size_t cursor = 0;
  std::string left;
  std::string right;
  std::map<std::string, Choice> votes;
  Choice preferred = Choice::Left;
  bool swapped = false;
};
json to_json(const Decision& d);
Decision decision_from_json(const json& j);

/// Majority-vote bubble sort over adjacent pairs, left = better.
///
/// A pass covers pairs [0, pass_end). After a pass with swaps the next one
/// stops at the last swap position, since everything right of it is settled.
/// When that range runs out, or a shortened pass makes no swap, a full pass
/// follows; the session completes on a full pass without swaps.
class ComparisonSession {
 public:
  explicit ComparisonSession(SessionSpec spec);

  /// Records the vote; the comparison resolves once all voters have voted.
  /// Returns true when this vote resolved it.
  bool submit_vote(const Vote& vote);

  const SessionSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  Status status() const { return status_; }
  bool active() const { return status_ == Status::Active; }
  const std::vector<std::string>& arrangement() const { return arrangement_; }
  std::pair<std::string, std::string> current_pair() const;
  std::size_t cursor() const { return cursor_; }
  std::size_t pass_end() const { return pass_end_; }
  int pass_no() const { return pass_; }
  std::size_t voters_remaining() const { return spec_.voters.size() - votes_.size(); }
  bool has_voted(const std::string& voter) const { return votes_.count(voter) != 0; }
  const std::vector<Decision>& audit_log() const { return log_; }
  std::size_t comparisons() const { return log_.size(); }

  /// Final arrangement, best first; not_ready while active.
  std::vector<std::string> result() const;

 private:
  void resolve();

  SessionSpec spec_;
  std::vector<std::string> arrangement_;
  std::map<std::string, Choice> votes_;
  std::vector<Decision> log_;
  Status status_ = Status::Active;
  std::size_t cursor_ = 0;
  std::size_t pass_end_ = 0;
  int pass_ = 1;
  bool swapped_this_pass_ = false;
  std::size_t last_swap_ = 0;
};

/// Re-runs the logged decisions on a fresh session built from `spec`.
ComparisonSession replay(const SessionSpec& spec, const std::vector<Decision>& log);

/// Upper bound on comparisons for a consistent voter pool.
std::size_t comparison_bound(std::size_t k);

// --- service ---------------------------------------------------------------

/// Thread-safe set of sessions, optionally journalled to a JSONL file and
/// rebuilt from it on construction.
class SessionStore {
 public:
  explicit SessionStore(std::optional<fs::path> journal = std::nullopt);

  /// Assigns an id when spec.id is empty; returns it.
  std::string create(SessionSpec spec);
  bool vote(const std::string& id, const Vote& vote);
  /// Runs fn under the session's lock.
  void inspect(const std::string& id, const std::function<void(const ComparisonSession&)>& fn) const;
  std::vector<std::string> ids() const;

 private:
  struct Entry {
    explicit Entry(SessionSpec spec) : session(std::move(spec)) {}
    mutable std::mutex mutex;
    ComparisonSession session;
  };
  Entry& entry(const std::string& id) const;
  void append(const json& event);
  void recover();

  std::optional<fs::path> journal_;
  mutable std::mutex map_mutex_;
  std::mutex journal_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::size_t next_id_ = 1;
};

struct ServerOptions {
  fs::path data_root;                  // image bytes are served from here
  std::optional<fs::path> journal;
  std::string host = "127.0.0.1";
};

class AnnotationServer {
 public:
  explicit AnnotationServer(ServerOptions options);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(int port = 0);
  /// Binds and serves on the calling thread until stop().
  void run(int port);
  void stop();
  SessionStore& store() { return *store_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<SessionStore> store_;
};

// --- simulated voters ------------------------------------------------------

/// annotate-sim input: voters that always follow `order` (best first).
struct SimSpec {
  std::string url;                    // e.g. http://127.0.0.1:8080
  std::optional<std::string> session_id;
  std::vector<std::string> images;    // used to create a session when no id is given
  std::optional<std::string> group;   // alternative to images: a dataset group id
  std::vector<std::string> voters;
  std::optional<std::string> tiebreak;
  std::uint64_t seed = 0;
  std::vector<std::string> order;     // empty: taken from the dataset ranking
  fs::path data_root;                 // needed only for `group` without `order`
  double timeout_s = 60.0;
};
SimSpec sim_spec_from_json(const json& j);

struct SimResult {
  std::string session_id;
  std::vector<std::string> ranking;
  std::size_t comparisons = 0;
  std::size_t stale_votes = 0;
  bool matches_order = false;
};
json to_json(const SimResult& r);

/// One thread per voter polls the pair and votes; returns once complete.
SimResult run_simulation(const SimSpec& spec);

}  // namespace uranker::annotation
