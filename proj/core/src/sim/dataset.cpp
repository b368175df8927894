#include "tamplan/sim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/hash.hpp"
#include "tamplan/common/rng.hpp"
#include "tamplan/sim/dynamics.hpp"

namespace tamplan::sim {

std::vector<Action> Demonstration::actions() const {
  std::vector<Action> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

EnvironmentState initial_state(const Demonstration& demo, const SimConfig& config) {
  auto s = generate_apartment(demo.apartment_seed, config);
  if (!s.has_room(demo.spawn_room)) throw ContractError("demonstration spawns in a room the apartment lacks");
  s.agent.room = demo.spawn_room;
  return s;
}

std::optional<EnvironmentState> replay(const Demonstration& demo, const SimConfig& config) {
  auto s = initial_state(demo, config);
  for (const auto& step : demo.steps) {
    if (apply(s, step.action)) return std::nullopt;
  }
  return s;
}

DemoSpec DemoSpec::training(std::size_t demos_per_goal, std::uint64_t seed, const SimConfig& sim) {
  DemoSpec s;
  for (std::size_t g = 0; g < kGoalCount; ++g) s.goal_ids.push_back(g);
  s.n_episodes = demos_per_goal * kGoalCount;
  s.seed = seed;
  for (std::uint64_t a = 100; a < 200; ++a) s.apartment_seeds.push_back(a);
  s.round_robin = false;
  s.sim = sim;
  return s;
}

DemoSpec DemoSpec::test(std::size_t n_episodes, std::uint64_t seed, const SimConfig& sim) {
  DemoSpec s;
  for (std::size_t g = 0; g < kGoalCount; ++g) s.goal_ids.push_back(g);
  s.n_episodes = n_episodes;
  s.seed = seed;
  for (std::uint64_t a = 0; a < 10; ++a) s.apartment_seeds.push_back(a);
  s.round_robin = true;
  s.sim = sim;
  return s;
}

void to_json(nlohmann::json& j, const DemoSpec& s) {
  j = nlohmann::json{{"goal_ids", s.goal_ids},       {"n_episodes", s.n_episodes}, {"seed", s.seed},
                     {"apartment_seeds", s.apartment_seeds}, {"round_robin", s.round_robin},
                     {"sim", s.sim},                 {"max_resamples", s.max_resamples},
                     {"min_steps", s.min_steps},     {"max_steps", s.max_steps}};
}

void from_json(const nlohmann::json& j, DemoSpec& s) {
  j.at("goal_ids").get_to(s.goal_ids);
  j.at("n_episodes").get_to(s.n_episodes);
  j.at("seed").get_to(s.seed);
  j.at("apartment_seeds").get_to(s.apartment_seeds);
  j.at("round_robin").get_to(s.round_robin);
  j.at("sim").get_to(s.sim);
  s.max_resamples = j.value("max_resamples", std::size_t{64});
  s.min_steps = j.value("min_steps", std::size_t{2});
  s.max_steps = j.value("max_steps", std::size_t{9});
}

DemoSet generate_demonstrations(const DemoSpec& spec) {
  spec.sim.validate();
  if (spec.n_episodes > 0 && (spec.goal_ids.empty() || spec.apartment_seeds.empty())) {
    throw ConfigError("demo spec needs at least one goal and one apartment seed");
  }
  if (spec.min_steps > spec.max_steps) throw ConfigError("demo spec: min_steps > max_steps");
  for (auto g : spec.goal_ids) {
    if (g >= kGoalCount) throw ConfigError("demo spec references unknown goal id " + std::to_string(g));
  }
  DemoSet out;
  out.demos.reserve(spec.n_episodes);
  for (std::size_t i = 0; i < spec.n_episodes; ++i) {
    const std::size_t goal_id = spec.goal_ids[i % spec.goal_ids.size()];
    bool done = false;
    for (std::size_t attempt = 0; attempt <= spec.max_resamples && !done; ++attempt) {
      auto rng = make_rng(spec.seed, {i, attempt});
      const auto n_seeds = spec.apartment_seeds.size();
      const std::uint64_t apartment_seed = spec.round_robin ? spec.apartment_seeds[(i + attempt) % n_seeds]
                                                            : spec.apartment_seeds[uniform_index(rng, n_seeds)];
      auto state = generate_apartment(apartment_seed, spec.sim);
      std::vector<Room> spawns;
      for (auto r : spawn_rooms()) {
        if (state.has_room(r)) spawns.push_back(r);
      }
      state.agent.room = spawns[uniform_index(rng, spawns.size())];

      auto plan = goal_satisfied(goal_id, state) ? std::nullopt : expert_plan(goal_id, state);
      if (!plan || plan->size() < spec.min_steps || plan->size() > spec.max_steps) {
        ++out.resampled;
        continue;
      }
      Demonstration d;
      d.episode_id = i;
      d.goal_id = goal_id;
      d.apartment_seed = apartment_seed;
      d.spawn_room = state.agent.room;
      d.initial_frame = render_frame(state, spec.sim.noise_sigma, rng);
      for (const auto& a : *plan) {
        auto result = execute(state, a, spec.sim.noise_sigma, rng);
        auto* t = std::get_if<Transition>(&result);
        if (!t) throw ContractError("expert produced a non-executable step");
        d.steps.push_back({std::move(t->observation), a});
        state = std::move(t->state);
      }
      d.final_facts = graph_snapshot(state);
      out.demos.push_back(std::move(d));
      done = true;
    }
    if (!done) {
      throw ConfigError("episode " + std::to_string(i) + " (" + goal(goal_id).text + "): no feasible apartment after " +
                        std::to_string(spec.max_resamples) + " resamples");
    }
  }
  return out;
}

nlohmann::json demo_to_json(const Demonstration& d) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : d.steps) {
    steps.push_back({{"action", s.action.to_string()},
                     {"start", s.observation.start_features},
                     {"end", s.observation.end_features}});
  }
  std::vector<std::string> facts;
  for (const auto& f : d.final_facts) facts.push_back(f.to_string());
  return {{"episode_id", d.episode_id},
          {"goal_id", d.goal_id},
          {"goal", goal(d.goal_id).text},
          {"apartment_seed", d.apartment_seed},
          {"spawn_room", name(d.spawn_room)},
          {"initial_frame", d.initial_frame},
          {"steps", std::move(steps)},
          {"final_facts", facts}};
}

Demonstration demo_from_json(const nlohmann::json& j) {
  Demonstration d;
  j.at("episode_id").get_to(d.episode_id);
  j.at("goal_id").get_to(d.goal_id);
  goal(d.goal_id);
  j.at("apartment_seed").get_to(d.apartment_seed);
  const auto spawn = parse_room(j.at("spawn_room").get<std::string>());
  if (!spawn) throw IoError("dataset: unknown spawn room");
  d.spawn_room = *spawn;
  j.at("initial_frame").get_to(d.initial_frame);
  for (const auto& s : j.at("steps")) {
    DemoStep step;
    const auto text = s.at("action").get<std::string>();
    const auto action = Action::parse(text);
    if (!action) throw IoError("dataset: unparseable action '" + text + "'");
    step.action = *action;
    s.at("start").get_to(step.observation.start_features);
    s.at("end").get_to(step.observation.end_features);
    d.steps.push_back(std::move(step));
  }
  for (const auto& f : j.at("final_facts")) {
    const auto fact = Fact::parse(f.get<std::string>());
    if (!fact) throw IoError("dataset: unparseable fact '" + f.get<std::string>() + "'");
    d.final_facts.push_back(*fact);
  }
  return d;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{{"format_version", m.format_version},
                     {"dataset_sha256", m.dataset_sha256},
                     {"episodes", m.episodes},
                     {"resampled", m.resampled},
                     {"feature_dim", m.feature_dim},
                     {"spec", m.spec},
                     {"goal_counts", m.goal_counts},
                     {"spawn_rooms_per_template", m.spawn_rooms_per_template}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  j.at("format_version").get_to(m.format_version);
  j.at("dataset_sha256").get_to(m.dataset_sha256);
  j.at("episodes").get_to(m.episodes);
  j.at("resampled").get_to(m.resampled);
  j.at("feature_dim").get_to(m.feature_dim);
  m.spec = j.at("spec");
  j.at("goal_counts").get_to(m.goal_counts);
  j.at("spawn_rooms_per_template").get_to(m.spawn_rooms_per_template);
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
  auto p = dataset;
  p += ".manifest.json";
  return p;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

DatasetManifest write_dataset(const std::filesystem::path& path, const DemoSet& set, const DemoSpec& spec) {
  std::string text;
  for (const auto& d : set.demos) {
    text += demo_to_json(d).dump();
    text += '\n';
  }
  write_text(path, text);

  DatasetManifest m;
  m.dataset_sha256 = sha256_hex(text);
  m.episodes = set.demos.size();
  m.resampled = set.resampled;
  m.feature_dim = FeatureLayout::instance().size();
  m.spec = spec;
  std::map<std::string, std::set<std::string>> spawns;
  for (auto g : spec.goal_ids) {
    m.goal_counts[goal(g).text] += 0;
    spawns[goal(g).text];
  }
  for (const auto& d : set.demos) {
    ++m.goal_counts[goal(d.goal_id).text];
    spawns[goal(d.goal_id).text].insert(std::string(name(d.spawn_room)));
  }
  for (auto& [g, rooms] : spawns) m.spawn_rooms_per_template[g] = {rooms.begin(), rooms.end()};
  write_text(manifest_path(path), nlohmann::json(m).dump(2) + "\n");
  return m;
}

LoadedDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::ifstream min(manifest_path(path));
  if (!min) throw IoError("cannot read manifest '" + manifest_path(path).string() + "'");
  LoadedDataset out;
  try {
    out.manifest = nlohmann::json::parse(min).get<DatasetManifest>();
    out.spec = out.manifest.spec.get<DemoSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest '" + manifest_path(path).string() + "': " + e.what());
  }
  const auto digest = sha256_hex(text);
  if (digest != out.manifest.dataset_sha256) {
    throw ProvenanceError("dataset '" + path.string() + "' hash " + digest + " does not match manifest " +
                          out.manifest.dataset_sha256);
  }
  out.set.resampled = out.manifest.resampled;
  std::size_t begin = 0;
  while (begin < text.size()) {
    auto end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    if (end > begin) {
      try {
        out.set.demos.push_back(demo_from_json(nlohmann::json::parse(text.begin() + static_cast<std::ptrdiff_t>(begin),
                                                                     text.begin() + static_cast<std::ptrdiff_t>(end))));
      } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed dataset line in '" + path.string() + "': " + e.what());
      }
    }
    begin = end + 1;
  }
  return out;
}

}  // namespace tamplan::sim
