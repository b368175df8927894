#include "tamplan/tam/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/hash.hpp"
#include "tamplan/sim/vocabulary.hpp"
#include "tamplan/tam/training.hpp"

namespace tamplan::tam {

void to_json(nlohmann::json& j, const MemoryProvenance& p) {
  j = {{"dataset_sha256", p.dataset_sha256},
       {"affordance_sha256", p.affordance_sha256},
       {"goal_association_sha256", p.goal_association_sha256},
       {"localization_sha256", p.localization_sha256},
       {"vocabulary", p.vocabulary}};
}

void from_json(const nlohmann::json& j, MemoryProvenance& p) {
  j.at("dataset_sha256").get_to(p.dataset_sha256);
  j.at("affordance_sha256").get_to(p.affordance_sha256);
  j.at("goal_association_sha256").get_to(p.goal_association_sha256);
  j.at("localization_sha256").get_to(p.localization_sha256);
  j.at("vocabulary").get_to(p.vocabulary);
}

TamGraph::TamGraph(std::vector<TamNode> nodes, MemoryProvenance provenance)
    : nodes_(std::move(nodes)), provenance_(std::move(provenance)) {
  index();
}

void TamGraph::index() {
  const auto& vocab = sim::ActionVocabulary::instance();
  goal_index_.assign(sim::kGoalCount, {});
  action_index_.assign(vocab.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    if (n.id != i) throw ContractError("memory: node ids must equal their position");
    if (n.goal >= sim::kGoalCount || n.action >= vocab.output_size() || n.next_action >= vocab.output_size()) {
      throw ContractError("memory: node labels outside vocabulary");
    }
    goal_index_[n.goal].push_back(i);
    action_index_[n.action].push_back(i);
  }
}

const std::vector<std::size_t>& TamGraph::by_goal(std::size_t goal) const { return goal_index_.at(goal); }
const std::vector<std::size_t>& TamGraph::by_action(std::size_t action) const { return action_index_.at(action); }

namespace {

constexpr char kMagic[8] = {'T', 'A', 'M', 'M', 'E', 'M', '0', '1'};
constexpr std::uint32_t kMemoryVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_doubles(std::string& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::vector<double> doubles(std::size_t n) {
    std::vector<double> v(n);
    for (auto& d : v) {
      const auto bits = u64();
      std::memcpy(&d, &bits, sizeof d);
    }
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    auto out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw IoError("memory file truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string TamGraph::serialize() const {
  nlohmann::json header{{"version", kMemoryVersion},
                        {"nodes", nodes_.size()},
                        {"key_dim", key_dim()},
                        {"z_dim", nodes_.empty() ? 0 : nodes_.front().z.size()},
                        {"value_dim", value_dim()},
                        {"frame_dim", nodes_.empty() ? 0 : nodes_.front().frame.size()},
                        {"provenance", provenance_}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, h.size());
  out += h;
  for (const auto& n : nodes_) {
    for (std::uint64_t x : {std::uint64_t(n.id), std::uint64_t(n.action), std::uint64_t(n.next_action),
                            std::uint64_t(n.goal), std::uint64_t(n.episode), std::uint64_t(n.step),
                            std::uint64_t(n.room)}) {
      put_u64(out, x);
    }
    put_doubles(out, n.key);
    put_doubles(out, n.z);
    put_doubles(out, n.v);
    put_doubles(out, n.frame);
  }
  return out;
}

TamGraph TamGraph::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw IoError("not a memory file (bad magic)");
  const auto header_len = r.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("memory header: ") + e.what());
  }
  if (header.at("version").get<std::uint32_t>() != kMemoryVersion) throw IoError("unsupported memory version");
  const auto n = header.at("nodes").get<std::size_t>();
  const auto kd = header.at("key_dim").get<std::size_t>();
  const auto zd = header.at("z_dim").get<std::size_t>();
  const auto vd = header.at("value_dim").get<std::size_t>();
  const auto fd = header.at("frame_dim").get<std::size_t>();
  std::vector<TamNode> nodes(n);
  for (auto& node : nodes) {
    node.id = r.u64();
    node.action = r.u64();
    node.next_action = r.u64();
    node.goal = r.u64();
    node.episode = r.u64();
    node.step = r.u64();
    const auto room = r.u64();
    if (room >= sim::kRoomCount) throw IoError("memory: bad room id");
    node.room = static_cast<sim::Room>(room);
    node.key = r.doubles(kd);
    node.z = r.doubles(zd);
    node.v = r.doubles(vd);
    node.frame = r.doubles(fd);
  }
  if (!r.done()) throw IoError("memory file has trailing bytes");
  return TamGraph(std::move(nodes), header.at("provenance").get<MemoryProvenance>());
}

std::string TamGraph::content_hash() const { return sha256_hex(serialize()); }

void TamGraph::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write memory '" + path.string() + "'");
  out << serialize();
}

TamGraph TamGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read memory '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

TamGraph build_memory(std::span<const sim::Demonstration> demos, const std::string& dataset_sha256,
                      const TamNetworks& nets) {
  for (const auto& [what, hash] : {std::pair{"affordance", &nets.affordance_dataset},
                                   std::pair{"goal association", &nets.goal_dataset},
                                   std::pair{"localization", &nets.localization_dataset}}) {
    if (*hash != dataset_sha256) {
      throw ProvenanceError(std::string(what) + " network was trained on dataset " + *hash + ", memory requested for " +
                            dataset_sha256);
    }
  }
  if (demos.empty()) throw ContractError("build_memory: no demonstrations");
  const auto table = StepTable::build(demos);
  const auto [v, z] = nets.affordance.embed(table.stacked);
  const auto keys = nets.localization.embed(table.ends);
  const auto& vocab = sim::ActionVocabulary::instance();
  const auto& layout = sim::FeatureLayout::instance();

  std::vector<TamNode> nodes(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& demo = demos[table.episode[i]];
    auto& n = nodes[i];
    n.id = i;
    n.key.assign(keys.row(i).begin(), keys.row(i).end());
    n.z.assign(z.row(i).begin(), z.row(i).end());
    n.v.assign(v.row(i).begin(), v.row(i).end());
    n.frame.assign(table.ends.row(i).begin(), table.ends.row(i).end());
    n.action = table.action[i];
    const std::size_t s = table.step[i];
    n.next_action = s + 1 < demo.steps.size() ? vocab.encode(demo.steps[s + 1].action) : vocab.stop();
    n.goal = table.goal[i];
    n.episode = demo.episode_id;
    n.step = s;
    // Room read back from the (noisy) room one-hot.
    std::size_t best = 0;
    for (std::size_t r = 1; r < sim::kRoomCount; ++r) {
      if (n.frame[layout.room(static_cast<sim::Room>(r))] > n.frame[layout.room(static_cast<sim::Room>(best))]) best = r;
    }
    n.room = static_cast<sim::Room>(best);
  }
  MemoryProvenance p;
  p.dataset_sha256 = dataset_sha256;
  p.affordance_sha256 = nets.affordance.store.content_hash();
  p.goal_association_sha256 = nets.goal_association.store.content_hash();
  p.localization_sha256 = nets.localization.store.content_hash();
  p.vocabulary = vocab.fingerprint();
  return TamGraph(std::move(nodes), std::move(p));
}

MemoryIndex::MemoryIndex(const TamGraph& graph, const LocalizationNet* net, LocalizeMetric metric)
    : graph_(&graph), metric_(metric), net_(net) {
  if (metric == LocalizeMetric::kLearned) {
    if (!net) throw ContractError("memory index: learned metric needs a localization network");
    head_ = net->head();
  } else {
    for (const auto& n : graph.nodes()) {
      double s = 0.0;
      for (double x : n.frame) s += x * x;
      frame_norms_.push_back(std::sqrt(s));
    }
  }
}

std::vector<double> MemoryIndex::query_of_frame(std::span<const double> frame) const {
  if (metric_ == LocalizeMetric::kLearned) return net_->embed_one(frame);
  return {frame.begin(), frame.end()};
}

std::span<const double> MemoryIndex::query_of_node(std::size_t node) const {
  const auto& n = graph_->node(node);
  return metric_ == LocalizeMetric::kLearned ? std::span<const double>(n.key) : std::span<const double>(n.frame);
}

double MemoryIndex::score(std::span<const double> query, std::size_t node) const {
  const auto& n = graph_->node(node);
  if (metric_ == LocalizeMetric::kLearned) {
    if (query.size() != n.key.size()) throw DimensionError("localize: query/key size mismatch");
    return 1.0 / (1.0 + std::exp(-head_.logit(query, n.key)));
  }
  if (query.size() != n.frame.size()) throw DimensionError("localize: query/frame size mismatch");
  double dotp = 0.0, qq = 0.0;
  for (std::size_t d = 0; d < query.size(); ++d) {
    dotp += query[d] * n.frame[d];
    qq += query[d] * query[d];
  }
  const double denom = std::sqrt(qq) * frame_norms_[node];
  return denom > 0.0 ? dotp / denom : 0.0;
}

std::vector<double> MemoryIndex::scores(std::span<const double> query) const {
  std::vector<double> out(graph_->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = score(query, i);
  return out;
}

std::size_t MemoryIndex::localize(std::span<const double> query, std::optional<std::size_t> exclude_episode) const {
  const auto top = retrieve(query, 1, exclude_episode);
  if (top.empty()) throw ContractError("localize: empty memory");
  return top.front();
}

std::vector<std::size_t> MemoryIndex::retrieve(std::span<const double> query, std::size_t k,
                                               std::optional<std::size_t> exclude_episode) const {
  if (graph_->empty()) throw ContractError("retrieve: empty memory");
  if (k == 0) throw ContractError("retrieve: k must be positive");
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(graph_->size());
  for (std::size_t i = 0; i < graph_->size(); ++i) {
    if (exclude_episode && graph_->node(i).episode == *exclude_episode) continue;
    ranked.emplace_back(score(query, i), i);
  }
  if (ranked.empty()) throw ContractError("retrieve: every node excluded");
  if (k > ranked.size()) {
    ++warnings;
    k = ranked.size();
  }
  const auto better = [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), better);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
  return out;
}

double goal_association_score(const GoalAssociator& net, const TamNode& a, const TamNode& b, std::size_t goal) {
  return net.score(a.v, b.v, goal);
}

}  // namespace tamplan::tam
