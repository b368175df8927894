#include "tamplan/sim/vocabulary.hpp"

#include <algorithm>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/hash.hpp"

namespace tamplan::sim {

ActionVocabulary::ActionVocabulary() {
  for (auto r : all_rooms()) actions_.push_back(Action::walk(r));
  for (auto o : all_object_classes()) {
    for (auto v : {Verb::kGrab, Verb::kOpen, Verb::kClose, Verb::kSwitchOn, Verb::kSwitchOff}) {
      Action a;
      a.verb = v;
      a.object = o;
      if (a.well_formed()) actions_.push_back(a);
    }
    for (auto v : {Verb::kPutBack, Verb::kPutIn}) {
      for (auto t : all_object_classes()) {
        Action a;
        a.verb = v;
        a.object = o;
        a.target = t;
        if (a.well_formed()) actions_.push_back(a);
      }
    }
  }
  std::sort(actions_.begin(), actions_.end());
  std::string table;
  for (std::size_t i = 0; i < size(); ++i) table += token_text(i) + "\n";
  fingerprint_ = sha256_hex(table);
}

const ActionVocabulary& ActionVocabulary::instance() {
  static const ActionVocabulary v;
  return v;
}

std::optional<std::size_t> ActionVocabulary::try_encode(const Action& a) const {
  if (a.verb == Verb::kStop) return stop();
  auto it = std::lower_bound(actions_.begin(), actions_.end(), a);
  if (it == actions_.end() || *it != a) return std::nullopt;
  return static_cast<std::size_t>(it - actions_.begin());
}

std::size_t ActionVocabulary::encode(const Action& a) const {
  if (auto t = try_encode(a)) return *t;
  throw ContractError("action " + a.to_string() + " is not in the vocabulary");
}

Action ActionVocabulary::decode(std::size_t token) const {
  if (token < actions_.size()) return actions_[token];
  if (token == stop() || token == pad()) return Action::stop();
  throw ContractError("token " + std::to_string(token) + " outside vocabulary of " + std::to_string(size()));
}

std::string ActionVocabulary::token_text(std::size_t token) const {
  if (token == pad()) return "[PAD]";
  return decode(token).to_string();
}

}  // namespace tamplan::sim
