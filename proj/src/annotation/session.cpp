#include <algorithm>
#include <set>

#include "uranker/annotation.hpp"
#include "uranker/nn.hpp"

namespace uranker::annotation {

ProtocolError duplicate_vote(const std::string& voter) {
  return {"duplicate_vote", "voter '" + voter + "' already voted on the current pair", 409};
}
ProtocolError stale_vote(const std::string& detail) {
  return {"stale_vote", "vote is for a pair that is no longer current (" + detail + "); refresh the pair", 409};
}
ProtocolError not_active(const std::string& id) { return {"not_active", "session " + id + " is complete", 409}; }
ProtocolError not_ready(const std::string& id) { return {"not_ready", "session " + id + " is still active", 409}; }
ProtocolError unknown_voter(const std::string& voter) {
  return {"unknown_voter", "voter '" + voter + "' is not on the roster", 403};
}
ProtocolError not_found(const std::string& what) { return {"not_found", what + " not found", 404}; }

std::string to_string(Choice c) { return c == Choice::Left ? "left" : "right"; }

Choice parse_choice(const std::string& s) {
  if (s == "left") return Choice::Left;
  if (s == "right") return Choice::Right;
  throw InvalidInput("choice must be 'left' or 'right', got '" + s + "'");
}

std::string to_string(Status s) { return s == Status::Active ? "active" : "complete"; }

json to_json(const SessionSpec& s) {
  json j{{"session_id", s.id}, {"images", s.images}, {"voters", s.voters}, {"seed", s.seed}};
  if (s.tiebreak) j["tiebreak"] = *s.tiebreak;
  return j;
}

SessionSpec session_spec_from_json(const json& j) {
  SessionSpec s;
  try {
    if (j.contains("session_id")) s.id = j.at("session_id").get<std::string>();
    s.images = j.at("images").get<std::vector<std::string>>();
    s.voters = j.at("voters").get<std::vector<std::string>>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tiebreak") && !j.at("tiebreak").is_null()) s.tiebreak = j.at("tiebreak").get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad session spec: ") + e.what());
  }
  return s;
}

json to_json(const Decision& d) {
  json votes = json::object();
  for (const auto& [v, c] : d.votes) votes[v] = to_string(c);
  return {{"pass", d.pass},       {"cursor", d.cursor},
          {"left", d.left},       {"right", d.right},
          {"votes", votes},       {"preferred", to_string(d.preferred)},
          {"swapped", d.swapped}};
}

Decision decision_from_json(const json& j) {
  Decision d;
  try {
    d.pass = j.at("pass").get<int>();
    d.cursor = j.at("cursor").get<std::size_t>();
    d.left = j.at("left").get<std::string>();
    d.right = j.at("right").get<std::string>();
    for (const auto& [v, c] : j.at("votes").items()) d.votes[v] = parse_choice(c.get<std::string>());
    d.preferred = parse_choice(j.at("preferred").get<std::string>());
    d.swapped = j.at("swapped").get<bool>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad decision record: ") + e.what());
  }
  return d;
}

ComparisonSession::ComparisonSession(SessionSpec spec) : spec_(std::move(spec)) {
  const std::size_t k = spec_.images.size();
  if (k < 2) throw InvalidInput("a session needs at least 2 images");
  if (spec_.voters.empty()) throw InvalidInput("a session needs at least 1 voter");
  if (std::set<std::string>(spec_.images.begin(), spec_.images.end()).size() != k)
    throw InvalidInput("duplicate image ids in session");
  const std::set<std::string> roster(spec_.voters.begin(), spec_.voters.end());
  if (roster.size() != spec_.voters.size()) throw InvalidInput("duplicate voter ids in roster");
  if (spec_.tiebreak && !roster.count(*spec_.tiebreak))
    throw InvalidInput("tiebreak voter '" + *spec_.tiebreak + "' is not on the roster");
  if (spec_.voters.size() % 2 == 0 && !spec_.tiebreak)
    throw InvalidInput("an even roster needs a tiebreak voter");

  arrangement_ = spec_.images;
  nn::Rng rng(spec_.seed);
  rng.shuffle(arrangement_.begin(), arrangement_.end());
  pass_end_ = k - 1;
}

std::pair<std::string, std::string> ComparisonSession::current_pair() const {
  if (!active()) throw not_active(spec_.id);
  return {arrangement_[cursor_], arrangement_[cursor_ + 1]};
}

bool ComparisonSession::submit_vote(const Vote& vote) {
  if (!active()) throw not_active(spec_.id);
  if (std::find(spec_.voters.begin(), spec_.voters.end(), vote.voter) == spec_.voters.end())
    throw unknown_voter(vote.voter);
  const auto [left, right] = current_pair();
  if (!vote.left.empty() || !vote.right.empty()) {
    if (vote.left != left || vote.right != right)
      throw stale_vote("voted on " + vote.left + " | " + vote.right + ", current is " + left + " | " + right);
  }
  if (has_voted(vote.voter)) throw duplicate_vote(vote.voter);
  votes_[vote.voter] = vote.choice;
  if (votes_.size() < spec_.voters.size()) return false;
  resolve();
  return true;
}

void ComparisonSession::resolve() {
  std::size_t left_votes = 0;
  for (const auto& [v, c] : votes_) left_votes += c == Choice::Left;
  const std::size_t right_votes = votes_.size() - left_votes;
  Choice preferred;
  if (left_votes != right_votes) {
    preferred = left_votes > right_votes ? Choice::Left : Choice::Right;
  } else {
    preferred = votes_.at(*spec_.tiebreak);
  }

  Decision d;
  d.pass = pass_;
  d.cursor = cursor_;
  d.left = arrangement_[cursor_];
  d.right = arrangement_[cursor_ + 1];
  d.votes = std::move(votes_);
  d.preferred = preferred;
  d.swapped = preferred == Choice::Right;
  votes_.clear();
  if (d.swapped) {
    std::swap(arrangement_[cursor_], arrangement_[cursor_ + 1]);
    swapped_this_pass_ = true;
    last_swap_ = cursor_;
  }
  log_.push_back(std::move(d));

  if (++cursor_ < pass_end_) return;
  const std::size_t full = arrangement_.size() - 1;
  if (!swapped_this_pass_ && pass_end_ == full) {
    status_ = Status::Complete;
    return;
  }
  pass_end_ = swapped_this_pass_ && last_swap_ > 0 ? last_swap_ : full;
  cursor_ = 0;
  swapped_this_pass_ = false;
  ++pass_;
}

std::vector<std::string> ComparisonSession::result() const {
  if (active()) throw not_ready(spec_.id);
  return arrangement_;
}

ComparisonSession replay(const SessionSpec& spec, const std::vector<Decision>& log) {
  ComparisonSession s(spec);
  for (const Decision& d : log) {
    for (const auto& [voter, choice] : d.votes) s.submit_vote({voter, choice, d.left, d.right, 0});
  }
  return s;
}

std::size_t comparison_bound(std::size_t k) { return k * (k - 1) / 2 + (k - 1); }

}  // namespace uranker::annotation
