// Copyright 2026 The seqreward Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQREWARD_DIALOG_ENV_H_
#define SEQREWARD_DIALOG_ENV_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/ontology.h"

namespace seqreward {

struct EnvConfig {
  int max_turns = 20;
  // Consecutive unhelpful system turns the user tolerates before leaving.
  int patience = 3;
  double multi_domain_prob = 0.7;
  int max_constraints = 2;
  int max_requests = 2;
  double turn_reward = -1.0;
  double success_bonus = 80.0;
  double failure_bonus = -40.0;

  nlohmann::json ToJson() const;
  static EnvConfig FromJson(const nlohmann::json& j);
};

enum class UserActType { kOpen = 0, kInform = 1, kAck = 2, kNegate = 3 };
inline constexpr int kNumUserActs = 4;

// Bit layout of the dialog state. For every domain d the block holds
//   needed[S]     constraint slots the user said they care about
//   informed[S]   constraint values the user has given
//   pending[S]    slots the user asked about
//   satisfied[S]  requested slots the system has answered
//   booked[1]
//   user_act[4]   last user act, if it concerned d (open/inform/ack/negate)
//   system_act[A] last system act, if it concerned d
// followed by a global unary turn-count bucket of 4 bits (turn >= 2, 5, 10,
// 15). S = |slots|, A = |acts|.
//
// The environment needs acts named "request" and "inform"; an act named
// "book" is optional. Without it, a domain completes once every constraint
// is informed and every request answered.
class StateLayout {
 public:
  static constexpr int kTurnBuckets = 4;
  static constexpr int kTurnThresholds[kTurnBuckets] = {2, 5, 10, 15};

  // Throws ConfigError when the ontology lacks the required acts or its
  // state_dim differs from RequiredDim.
  explicit StateLayout(const Ontology& ontology);

  static int RequiredDim(const Ontology& ontology);

  int dim() const { return dim_; }
  int num_domains() const { return num_domains_; }
  int num_slots() const { return num_slots_; }
  int num_acts() const { return num_acts_; }

  int NeededBit(int d, int s) const { return Block(d) + s; }
  int InformedBit(int d, int s) const { return Block(d) + num_slots_ + s; }
  int PendingBit(int d, int s) const { return Block(d) + 2 * num_slots_ + s; }
  int SatisfiedBit(int d, int s) const {
    return Block(d) + 3 * num_slots_ + s;
  }
  int BookedBit(int d) const { return Block(d) + 4 * num_slots_; }
  int UserActBit(int d, UserActType u) const {
    return Block(d) + 4 * num_slots_ + 1 + static_cast<int>(u);
  }
  int SystemActBit(int d, int act) const {
    return Block(d) + 4 * num_slots_ + 1 + kNumUserActs + act;
  }
  int TurnBit(int k) const { return num_domains_ * block_size_ + k; }

  int request_act() const { return request_act_; }
  int inform_act() const { return inform_act_; }
  int book_act() const { return book_act_; }  // -1 when absent

  // Slots usable as constraints / requests of a domain (those valid with
  // the request / inform act).
  const std::vector<int>& ConstraintSlots(int d) const {
    return constraint_slots_.at(d);
  }
  const std::vector<int>& RequestSlots(int d) const {
    return request_slots_.at(d);
  }
  // Lowest slot valid with the book act in domain d, or -1.
  int BookSlot(int d) const { return book_slot_.at(d); }

  // Whether domain d is open and still has work left in state s.
  bool DomainUnfinished(const DialogState& s, int d) const;
  // Lowest-index unfinished open domain, or -1.
  int CurrentDomain(const DialogState& s) const;

  // Human-readable description of every bit, for the ontology config docs.
  nlohmann::json Describe(const Ontology& ontology) const;

 private:
  int Block(int d) const { return d * block_size_; }

  int num_domains_;
  int num_slots_;
  int num_acts_;
  int block_size_;
  int dim_;
  int request_act_;
  int inform_act_;
  int book_act_;
  std::vector<std::vector<int>> constraint_slots_;
  std::vector<std::vector<int>> request_slots_;
  std::vector<int> book_slot_;
};

struct DomainGoal {
  int domain = 0;
  std::vector<int> constraints;  // sorted slot indices
  std::vector<int> requests;     // sorted, disjoint from constraints
  bool operator==(const DomainGoal&) const = default;
};

struct UserGoal {
  std::vector<DomainGoal> domains;  // in the order the user raises them
  bool operator==(const UserGoal&) const = default;
  nlohmann::json ToJson(const Ontology& ontology) const;
};

// Deterministic per seed: two domains with probability multi_domain_prob
// (when the ontology has more than one), 1..max_constraints constraints and
// 1..max_requests requests per domain.
UserGoal SampleGoal(std::uint64_t seed, const Ontology& ontology,
                    const EnvConfig& config = {});

struct UserAct {
  UserActType type = UserActType::kOpen;
  int domain = 0;
  int slot = -1;
  bool operator==(const UserAct&) const = default;
};

// Agenda-based user: a stack of pending user acts derived from the goal.
// Responses to the system are pushed on top; one act is popped per turn.
class AgendaUser {
 public:
  AgendaUser() = default;
  AgendaUser(UserGoal goal, int patience);

  const UserGoal& goal() const { return goal_; }
  int patience() const { return patience_; }
  int max_patience() const { return max_patience_; }
  bool AgendaEmpty() const { return agenda_.empty(); }
  const std::vector<UserAct>& agenda() const { return agenda_; }

  void Push(UserAct act) { agenda_.push_back(act); }
  UserAct Pop();
  // Called once per system turn.
  void Judge(bool helpful);

 private:
  UserGoal goal_;
  std::vector<UserAct> agenda_;  // back() is the top
  int patience_ = 0;
  int max_patience_ = 0;
};

// Closed-form episode score: -T + 80 on success, -T - 40 on failure.
// Throws InvalidInputError for T < 1.
double EpisodeReward(int turns, bool success);

struct StepResult {
  DialogState state;
  double r_ori = 0.0;
  bool done = false;
  std::optional<bool> success;
};

// One dialog episode against the agenda user. Not thread-safe; create one
// per episode runner.
class DialogEnv {
 public:
  DialogEnv(const Ontology& ontology, EnvConfig config = {});

  const Ontology& ontology() const { return ontology_; }
  const StateLayout& layout() const { return layout_; }
  const AssignmentMatrix& assignment() const { return assignment_; }
  const EnvConfig& config() const { return config_; }

  DialogState Reset(std::uint64_t goal_seed);
  DialogState Reset(UserGoal goal);

  // Per-turn reward is turn_reward plus the terminal bonus on the last turn.
  // Throws ContractViolation once the episode is done and InvalidInputError
  // for an out-of-range action.
  StepResult Step(DialogAction action);

  const DialogState& state() const { return state_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  int turns() const { return turns_; }
  const UserGoal& goal() const { return user_.goal(); }
  const AgendaUser& user() const { return user_; }
  // Domain index the user is currently pursuing (valid while not done).
  int current_goal_domain() const { return user_.goal().domains.at(current_).domain; }

 private:
  void Utter(const UserAct& act);
  void ClearActBits();

  Ontology ontology_;
  EnvConfig config_;
  StateLayout layout_;
  AssignmentMatrix assignment_;
  AgendaUser user_;
  DialogState state_;
  int current_ = 0;  // index into goal().domains
  int turns_ = 0;
  bool done_ = true;
  bool success_ = false;
};

// Scripted optimum: request the lowest needed-but-uninformed constraint of
// the current domain, else answer its lowest pending request, else book it.
DialogAction ExpertAction(const StateLayout& layout, const AssignmentMatrix& m,
                          const DialogState& state);

struct Transition {
  DialogState state;
  DialogAction action;
  double r_ori = 0.0;
  double r_shaped = 0.0;
  DialogState next_state;
  bool done = false;
  std::optional<bool> success;
};

// Writes one line per turn: turn, action name, rewards, done/success flags
// and the state bits.
void WriteTrace(std::ostream& out, const Ontology& ontology,
                const std::vector<Transition>& trace);

// Expert (state, action) pairs with provenance.
struct ExpertCorpus {
  std::vector<DialogState> states;
  std::vector<DialogAction> actions;
  std::uint64_t seed = 0;
  int n_dialogs = 0;
  std::string ontology_hash;

  int size() const { return static_cast<int>(states.size()); }

  // Text format:
  //   # seqreward-corpus v1
  //   # ontology_hash <hex>
  //   # seed <n>
  //   # dialogs <n>
  //   # pairs <n>
  //   <state bits as 0/1 string> <action index>
  void Save(const std::filesystem::path& path) const;
  std::string Serialize() const;
  // Throws ConfigError on malformed input.
  static ExpertCorpus Load(const std::filesystem::path& path);
  static ExpertCorpus Deserialize(const std::string& text);

  bool operator==(const ExpertCorpus&) const = default;
};

// Runs the expert on goals seeded by DeriveSeed(seed, i), i < n_dialogs, and
// records every turn. Throws InvalidInputError when n_dialogs < 1.
ExpertCorpus GenerateExpertCorpus(const Ontology& ontology, int n_dialogs,
                                  std::uint64_t seed,
                                  const EnvConfig& config = {});

}  // namespace seqreward

#endif  // SEQREWARD_DIALOG_ENV_H_
