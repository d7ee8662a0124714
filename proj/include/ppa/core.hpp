#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppa {

/// All invariant violations, bad inputs and IO failures surface as Error.
/// `kind` is a stable machine-readable tag used by the CLI error JSON.
struct Error : std::runtime_error {
  Error(std::string kind_tag, const std::string& message)
      : std::runtime_error(message), kind(std::move(kind_tag)) {}
  std::string kind;
};

/// Physicians are numbered 1..P. Action 0 rejects the request.
struct Action {
  int value = 0;

  bool is_reject() const { return value == 0; }
  friend bool operator==(const Action&, const Action&) = default;
  friend auto operator<=>(const Action&, const Action&) = default;
};

struct Patient {
  int id = 0;
  double duration = 0.0;        // service minutes, > 0
  int priority = 2;             // 1 (high) or 2 (regular)
  int preferred = 0;            // physician id in eligible
  std::vector<int> eligible;    // non-empty, ascending physician ids
  double arrival_score = 0.0;   // position within the booking horizon, [0,1]

  bool is_eligible(int physician) const;
  void validate(int physician_count) const;
};

struct CostParams {
  std::array<double, 2> reject_cost{200.0, 50.0};  // by priority class 1, 2
  std::array<double, 2> prefer_cost{20.0, 5.0};    // non-preferred assignment
  double session_minutes = 110.0;                  // workload capacity T
  std::vector<int> appointment_caps{7, 7, 7, 7};   // per-physician slots L_p
  int physicians = 4;

  double reject_cost_for(int priority) const { return reject_cost[priority - 1]; }
  double prefer_cost_for(int priority) const { return prefer_cost[priority - 1]; }
  int cap_for(int physician) const { return appointment_caps[physician - 1]; }
  void validate() const;
};

struct PhysicianState {
  bool is_preferred = false;
  int slots_left = 0;
  int priority1_count = 0;
  double workload = 0.0;  // minutes already booked
};

struct SystemState {
  int epoch = 0;
  Patient patient;
  std::vector<PhysicianState> physicians;   // index p-1
  std::vector<std::uint8_t> eligibility;    // index p-1, set membership only

  const PhysicianState& physician(int p) const { return physicians[p - 1]; }
};

/// The ground-truth arrival sequence of one booking session, sorted
/// ascending by arrival score.
struct EpisodeRealization {
  std::vector<Patient> patients;
  std::uint64_t seed = 0;
  int physician_count = 0;

  int length() const { return static_cast<int>(patients.size()); }
  void validate() const;
};

/// Per-episode outcome counters (the report columns next to total cost).
struct TraceMetrics {
  int p1_rejected = 0;
  int p2_rejected = 0;
  int undesirable = 0;  // accepted but sent to a non-preferred physician
};

SystemState initial_state(const EpisodeRealization& episode,
                          const CostParams& params);

/// Actions admissible in `state`: always contains 0; contains p iff the
/// patient is eligible for p, p has a slot left, and the added duration
/// fits the remaining session time.
std::vector<Action> feasible_actions(const SystemState& state,
                                     const CostParams& params);

bool is_feasible(const SystemState& state, Action action,
                 const CostParams& params);

/// Applies `action`, advances the epoch and installs `next_patient`.
/// Throws Error{"infeasible_action"} naming the violated constraint.
SystemState transition(const SystemState& state, Action action,
                       const Patient& next_patient, const CostParams& params);

double step_cost(const SystemState& state, Action action,
                 const CostParams& params);

struct RolloutResult {
  double total_cost = 0.0;
  TraceMetrics metrics;
};

/// Replays `actions` against the episode from a fresh session and sums
/// step costs. Throws on length mismatch or on the first infeasible
/// action (message carries the epoch index).
RolloutResult rollout_cost(const EpisodeRealization& episode,
                           const std::vector<Action>& actions,
                           const CostParams& params);

// Line-oriented JSON serialization: one header object (seed, K_total, P)
// followed by one object per patient. Round-trips bit-exact.
void write_episode_jsonl(std::ostream& out, const EpisodeRealization& episode);
EpisodeRealization read_episode_jsonl(std::istream& in);
void save_episode_file(const std::string& path, const EpisodeRealization& episode);
EpisodeRealization load_episode_file(const std::string& path);

}  // namespace ppa
