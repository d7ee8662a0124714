#include "ppa/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ppa {

using nlohmann::json;

bool Patient::is_eligible(int physician) const {
  return std::find(eligible.begin(), eligible.end(), physician) != eligible.end();
}

void Patient::validate(int physician_count) const {
  if (duration <= 0.0) throw Error("invalid_patient", "duration must be positive");
  if (priority != 1 && priority != 2)
    throw Error("invalid_patient", "priority must be 1 or 2");
  if (arrival_score < 0.0 || arrival_score > 1.0)
    throw Error("invalid_patient", "arrival_score must lie in [0,1]");
  if (eligible.empty()) throw Error("invalid_patient", "eligible set is empty");
  if (!std::is_sorted(eligible.begin(), eligible.end()))
    throw Error("invalid_patient", "eligible set must be ascending");
  for (int p : eligible)
    if (p < 1 || p > physician_count)
      throw Error("invalid_patient", "eligible physician id out of range");
  if (!is_eligible(preferred))
    throw Error("invalid_patient", "preferred physician not in eligible set");
}

void CostParams::validate() const {
  if (physicians < 1) throw Error("invalid_params", "need at least one physician");
  if (!(reject_cost[0] > reject_cost[1] && reject_cost[1] > 0.0))
    throw Error("invalid_params", "rejection costs must satisfy c1 > c2 > 0");
  for (int r = 0; r < 2; ++r)
    if (!(prefer_cost[r] > 0.0 && prefer_cost[r] < reject_cost[r]))
      throw Error("invalid_params",
                  "preference penalty must lie strictly between 0 and the rejection cost");
  if (session_minutes <= 0.0) throw Error("invalid_params", "session length must be positive");
  if (static_cast<int>(appointment_caps.size()) != physicians)
    throw Error("invalid_params", "appointment cap vector length must equal physician count");
  for (int cap : appointment_caps)
    if (cap < 1) throw Error("invalid_params", "appointment caps must be >= 1");
}

void EpisodeRealization::validate() const {
  if (patients.empty()) throw Error("invalid_episode", "episode has no patients");
  for (const Patient& p : patients) p.validate(physician_count);
  for (std::size_t i = 1; i < patients.size(); ++i)
    if (patients[i - 1].arrival_score > patients[i].arrival_score)
      throw Error("invalid_episode", "patients must be sorted by arrival score");
}

SystemState initial_state(const EpisodeRealization& episode,
                          const CostParams& params) {
  if (episode.patients.empty())
    throw Error("invalid_episode", "cannot start an empty episode");
  SystemState state;
  state.epoch = 0;
  state.patient = episode.patients.front();
  state.physicians.resize(params.physicians);
  state.eligibility.assign(params.physicians, 0);
  for (int p = 1; p <= params.physicians; ++p) {
    PhysicianState& phys = state.physicians[p - 1];
    phys.is_preferred = (p == state.patient.preferred);
    phys.slots_left = params.cap_for(p);
    phys.priority1_count = 0;
    phys.workload = 0.0;
  }
  for (int p : state.patient.eligible) state.eligibility[p - 1] = 1;
  return state;
}

bool is_feasible(const SystemState& state, Action action,
                 const CostParams& params) {
  if (action.value == 0) return true;
  if (action.value < 1 || action.value > params.physicians) return false;
  if (!state.eligibility[action.value - 1]) return false;
  const PhysicianState& phys = state.physician(action.value);
  if (phys.slots_left < 1) return false;
  return phys.workload + state.patient.duration <= params.session_minutes;
}

std::vector<Action> feasible_actions(const SystemState& state,
                                     const CostParams& params) {
  std::vector<Action> actions{Action{0}};
  for (int p = 1; p <= params.physicians; ++p)
    if (is_feasible(state, Action{p}, params)) actions.push_back(Action{p});
  return actions;
}

SystemState transition(const SystemState& state, Action action,
                       const Patient& next_patient, const CostParams& params) {
  if (action.value < 0 || action.value > params.physicians)
    throw Error("infeasible_action", "action out of range");
  if (action.value != 0) {
    const int p = action.value;
    if (!state.eligibility[p - 1])
      throw Error("infeasible_action",
                  "physician " + std::to_string(p) + " is not eligible for the patient");
    const PhysicianState& phys = state.physician(p);
    if (phys.slots_left < 1)
      throw Error("infeasible_action",
                  "physician " + std::to_string(p) + " has no appointment slots left");
    if (phys.workload + state.patient.duration > params.session_minutes)
      throw Error("infeasible_action",
                  "assignment would exceed the session workload of physician " +
                      std::to_string(p));
  }

  SystemState next = state;
  if (action.value != 0) {
    PhysicianState& phys = next.physicians[action.value - 1];
    phys.slots_left -= 1;
    if (state.patient.priority == 1) phys.priority1_count += 1;
    phys.workload += state.patient.duration;
  }
  next.epoch = state.epoch + 1;
  next.patient = next_patient;
  next.eligibility.assign(params.physicians, 0);
  for (int p : next_patient.eligible) next.eligibility[p - 1] = 1;
  for (int p = 1; p <= params.physicians; ++p)
    next.physicians[p - 1].is_preferred = (p == next_patient.preferred);
  return next;
}

double step_cost(const SystemState& state, Action action,
                 const CostParams& params) {
  if (action.value == 0) return params.reject_cost_for(state.patient.priority);
  if (action.value == state.patient.preferred) return 0.0;
  return params.prefer_cost_for(state.patient.priority);
}

RolloutResult rollout_cost(const EpisodeRealization& episode,
                           const std::vector<Action>& actions,
                           const CostParams& params) {
  if (actions.size() != episode.patients.size())
    throw Error("length_mismatch",
                "expected " + std::to_string(episode.patients.size()) +
                    " actions, got " + std::to_string(actions.size()));

  RolloutResult result;
  SystemState state = initial_state(episode, params);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const Action a = actions[k];
    if (!is_feasible(state, a, params))
      throw Error("infeasible_action",
                  "infeasible action at epoch " + std::to_string(k));
    result.total_cost += step_cost(state, a, params);
    if (a.value == 0) {
      if (state.patient.priority == 1) result.metrics.p1_rejected += 1;
      else result.metrics.p2_rejected += 1;
    } else if (a.value != state.patient.preferred) {
      result.metrics.undesirable += 1;
    }
    if (k + 1 < actions.size())
      state = transition(state, a, episode.patients[k + 1], params);
  }
  return result;
}

namespace {

json patient_to_json(const Patient& p) {
  return json{{"id", p.id},
              {"duration", p.duration},
              {"priority", p.priority},
              {"preferred", p.preferred},
              {"eligible", p.eligible},
              {"arrival_score", p.arrival_score}};
}

Patient patient_from_json(const json& j) {
  Patient p;
  p.id = j.at("id").get<int>();
  p.duration = j.at("duration").get<double>();
  p.priority = j.at("priority").get<int>();
  p.preferred = j.at("preferred").get<int>();
  p.eligible = j.at("eligible").get<std::vector<int>>();
  p.arrival_score = j.at("arrival_score").get<double>();
  return p;
}

}  // namespace

void write_episode_jsonl(std::ostream& out, const EpisodeRealization& episode) {
  json header{{"seed", episode.seed},
              {"K_total", episode.length()},
              {"P", episode.physician_count}};
  out << header.dump() << '\n';
  for (const Patient& p : episode.patients) out << patient_to_json(p).dump() << '\n';
}

EpisodeRealization read_episode_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error("bad_episode_file", "missing episode header line");
  json header = json::parse(line);
  EpisodeRealization episode;
  episode.seed = header.at("seed").get<std::uint64_t>();
  episode.physician_count = header.at("P").get<int>();
  const int expected = header.at("K_total").get<int>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    episode.patients.push_back(patient_from_json(json::parse(line)));
  }
  if (episode.length() != expected)
    throw Error("bad_episode_file",
                "header announces " + std::to_string(expected) + " patients, file has " +
                    std::to_string(episode.length()));
  return episode;
}

void save_episode_file(const std::string& path, const EpisodeRealization& episode) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot open " + path + " for writing");
  write_episode_jsonl(out, episode);
}

EpisodeRealization load_episode_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  return read_episode_jsonl(in);
}

}  // namespace ppa
