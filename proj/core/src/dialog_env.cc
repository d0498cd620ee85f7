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

#include "seqreward/dialog_env.h"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "seqreward/errors.h"
#include "seqreward/random.h"

namespace seqreward {

nlohmann::json EnvConfig::ToJson() const {
  return {{"max_turns", max_turns},
          {"patience", patience},
          {"multi_domain_prob", multi_domain_prob},
          {"max_constraints", max_constraints},
          {"max_requests", max_requests},
          {"turn_reward", turn_reward},
          {"success_bonus", success_bonus},
          {"failure_bonus", failure_bonus}};
}

EnvConfig EnvConfig::FromJson(const nlohmann::json& j) {
  EnvConfig c;
  c.max_turns = j.value("max_turns", c.max_turns);
  c.patience = j.value("patience", c.patience);
  c.multi_domain_prob = j.value("multi_domain_prob", c.multi_domain_prob);
  c.max_constraints = j.value("max_constraints", c.max_constraints);
  c.max_requests = j.value("max_requests", c.max_requests);
  c.turn_reward = j.value("turn_reward", c.turn_reward);
  c.success_bonus = j.value("success_bonus", c.success_bonus);
  c.failure_bonus = j.value("failure_bonus", c.failure_bonus);
  if (c.max_turns < 1 || c.patience < 1 || c.max_constraints < 1 ||
      c.max_requests < 1 || c.multi_domain_prob < 0.0 ||
      c.multi_domain_prob > 1.0) {
    throw ConfigError("invalid environment config");
  }
  return c;
}

StateLayout::StateLayout(const Ontology& ontology)
    : num_domains_(ontology.num_domains()),
      num_slots_(ontology.num_slots()),
      num_acts_(ontology.num_acts()),
      block_size_(4 * num_slots_ + 1 + kNumUserActs + num_acts_),
      dim_(num_domains_ * block_size_ + kTurnBuckets),
      request_act_(ontology.ActIndex("request")),
      inform_act_(ontology.ActIndex("inform")),
      book_act_(ontology.ActIndex("book")) {
  if (request_act_ < 0 || inform_act_ < 0) {
    throw ConfigError(
        "dialog environment needs acts named 'request' and 'inform'");
  }
  if (ontology.state_dim() != dim_) {
    throw ConfigError("ontology state_dim " +
                      std::to_string(ontology.state_dim()) +
                      " does not match the environment layout (" +
                      std::to_string(dim_) + ")");
  }
  constraint_slots_.resize(num_domains_);
  request_slots_.resize(num_domains_);
  book_slot_.assign(num_domains_, -1);
  for (const Triple& t : ontology.valid_triples()) {
    if (t.act == request_act_) constraint_slots_[t.domain].push_back(t.slot);
    if (t.act == inform_act_) request_slots_[t.domain].push_back(t.slot);
    if (t.act == book_act_ && book_slot_[t.domain] < 0) {
      book_slot_[t.domain] = t.slot;
    }
  }
  for (int d = 0; d < num_domains_; ++d) {
    const bool has_book = book_act_ < 0 || book_slot_[d] >= 0;
    bool disjoint_possible = false;
    for (int c : constraint_slots_[d])
      for (int r : request_slots_[d]) disjoint_possible |= c != r;
    if (!has_book || !disjoint_possible) {
      throw ConfigError("domain '" + ontology.domains()[d] +
                        "' cannot host a goal (needs distinct request and "
                        "inform slots and a book triple)");
    }
  }
}

int StateLayout::RequiredDim(const Ontology& o) {
  return o.num_domains() * (4 * o.num_slots() + 1 + kNumUserActs +
                            o.num_acts()) +
         kTurnBuckets;
}

bool StateLayout::DomainUnfinished(const DialogState& s, int d) const {
  bool open = false;
  bool work = false;
  for (int k = 0; k < num_slots_; ++k) {
    const bool needed = s.Get(NeededBit(d, k));
    const bool pending = s.Get(PendingBit(d, k));
    open |= needed || pending;
    work |= (needed && !s.Get(InformedBit(d, k))) ||
            (pending && !s.Get(SatisfiedBit(d, k)));
  }
  if (!open) return false;
  if (book_act_ >= 0) return !s.Get(BookedBit(d));
  return work;
}

int StateLayout::CurrentDomain(const DialogState& s) const {
  for (int d = 0; d < num_domains_; ++d) {
    if (DomainUnfinished(s, d)) return d;
  }
  return -1;
}

nlohmann::json StateLayout::Describe(const Ontology& o) const {
  nlohmann::json bits = nlohmann::json::array();
  auto add = [&](int index, const std::string& what) {
    bits.push_back({{"bit", index}, {"meaning", what}});
  };
  static const char* kUserActs[] = {"open", "inform", "ack", "negate"};
  for (int d = 0; d < num_domains_; ++d) {
    const std::string& dn = o.domains()[d];
    for (int s = 0; s < num_slots_; ++s)
      add(NeededBit(d, s), dn + ".needed." + o.slots()[s]);
    for (int s = 0; s < num_slots_; ++s)
      add(InformedBit(d, s), dn + ".informed." + o.slots()[s]);
    for (int s = 0; s < num_slots_; ++s)
      add(PendingBit(d, s), dn + ".pending." + o.slots()[s]);
    for (int s = 0; s < num_slots_; ++s)
      add(SatisfiedBit(d, s), dn + ".satisfied." + o.slots()[s]);
    add(BookedBit(d), dn + ".booked");
    for (int u = 0; u < kNumUserActs; ++u)
      add(UserActBit(d, static_cast<UserActType>(u)),
          dn + ".user_act." + kUserActs[u]);
    for (int a = 0; a < num_acts_; ++a)
      add(SystemActBit(d, a), dn + ".system_act." + o.acts()[a]);
  }
  for (int k = 0; k < kTurnBuckets; ++k)
    add(TurnBit(k), "turn>=" + std::to_string(kTurnThresholds[k]));
  return bits;
}

nlohmann::json UserGoal::ToJson(const Ontology& o) const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : domains) {
    nlohmann::json c = nlohmann::json::array(), r = nlohmann::json::array();
    for (int s : g.constraints) c.push_back(o.slots()[s]);
    for (int s : g.requests) r.push_back(o.slots()[s]);
    j.push_back({{"domain", o.domains()[g.domain]},
                 {"constraints", c},
                 {"requests", r}});
  }
  return j;
}

UserGoal SampleGoal(std::uint64_t seed, const Ontology& ontology,
                    const EnvConfig& config) {
  StateLayout layout(ontology);
  Rng rng(seed);
  const int nd = ontology.num_domains();
  int active = 1;
  if (nd > 1 && Uniform01(rng) < config.multi_domain_prob) active = 2;
  std::vector<int> order(nd);
  for (int d = 0; d < nd; ++d) order[d] = d;
  std::shuffle(order.begin(), order.end(), rng);

  UserGoal goal;
  for (int i = 0; i < active; ++i) {
    DomainGoal g;
    g.domain = order[i];
    std::vector<int> cands = layout.ConstraintSlots(g.domain);
    std::shuffle(cands.begin(), cands.end(), rng);
    const int want_c = UniformInt(rng, 1, config.max_constraints);
    const int want_r = UniformInt(rng, 1, config.max_requests);
    std::vector<int> reqs = layout.RequestSlots(g.domain);
    std::shuffle(reqs.begin(), reqs.end(), rng);
    // Keep at least one request slot free of the chosen constraints.
    for (int s : cands) {
      if (static_cast<int>(g.constraints.size()) >= want_c) break;
      g.constraints.push_back(s);
      const bool request_left = std::any_of(reqs.begin(), reqs.end(), [&](int r) {
        return std::find(g.constraints.begin(), g.constraints.end(), r) ==
               g.constraints.end();
      });
      if (!request_left) g.constraints.pop_back();
    }
    for (int s : reqs) {
      if (static_cast<int>(g.requests.size()) >= want_r) break;
      if (std::find(g.constraints.begin(), g.constraints.end(), s) ==
          g.constraints.end()) {
        g.requests.push_back(s);
      }
    }
    std::sort(g.constraints.begin(), g.constraints.end());
    std::sort(g.requests.begin(), g.requests.end());
    goal.domains.push_back(std::move(g));
  }
  return goal;
}

AgendaUser::AgendaUser(UserGoal goal, int patience)
    : goal_(std::move(goal)), patience_(patience), max_patience_(patience) {
  if (goal_.domains.empty()) {
    throw ContractViolation("user goal needs at least one domain");
  }
  for (auto it = goal_.domains.rbegin(); it != goal_.domains.rend(); ++it) {
    agenda_.push_back({UserActType::kOpen, it->domain, -1});
  }
}

UserAct AgendaUser::Pop() {
  if (agenda_.empty()) throw ContractViolation("agenda is empty");
  UserAct act = agenda_.back();
  agenda_.pop_back();
  return act;
}

void AgendaUser::Judge(bool helpful) {
  patience_ = helpful ? max_patience_ : patience_ - 1;
}

double EpisodeReward(int turns, bool success) {
  if (turns < 1) throw InvalidInputError("episode must have at least one turn");
  return success ? -turns + 80.0 : -turns - 40.0;
}

DialogEnv::DialogEnv(const Ontology& ontology, EnvConfig config)
    : ontology_(ontology),
      config_(config),
      layout_(ontology_),
      assignment_(BuildAssignmentMatrix(ontology_)) {}

DialogState DialogEnv::Reset(std::uint64_t goal_seed) {
  return Reset(SampleGoal(goal_seed, ontology_, config_));
}

DialogState DialogEnv::Reset(UserGoal goal) {
  user_ = AgendaUser(std::move(goal), config_.patience);
  state_ = DialogState(layout_.dim());
  current_ = 0;
  turns_ = 0;
  done_ = false;
  success_ = false;
  Utter(user_.Pop());
  return state_;
}

void DialogEnv::ClearActBits() {
  for (int d = 0; d < layout_.num_domains(); ++d) {
    for (int u = 0; u < kNumUserActs; ++u)
      state_.Set(layout_.UserActBit(d, static_cast<UserActType>(u)), false);
    for (int a = 0; a < layout_.num_acts(); ++a)
      state_.Set(layout_.SystemActBit(d, a), false);
  }
}

void DialogEnv::Utter(const UserAct& act) {
  const DomainGoal* g = nullptr;
  for (const auto& dg : user_.goal().domains)
    if (dg.domain == act.domain) g = &dg;
  switch (act.type) {
    case UserActType::kOpen:
      for (int s : g->constraints) state_.Set(layout_.NeededBit(act.domain, s), true);
      for (int s : g->requests) state_.Set(layout_.PendingBit(act.domain, s), true);
      break;
    case UserActType::kInform:
      state_.Set(layout_.InformedBit(act.domain, act.slot), true);
      break;
    case UserActType::kAck:
    case UserActType::kNegate:
      break;
  }
  for (int d = 0; d < layout_.num_domains(); ++d)
    for (int u = 0; u < kNumUserActs; ++u)
      state_.Set(layout_.UserActBit(d, static_cast<UserActType>(u)), false);
  state_.Set(layout_.UserActBit(act.domain, act.type), true);
}

StepResult DialogEnv::Step(DialogAction action) {
  if (done_) throw ContractViolation("step called on a finished episode");
  const Triple& t = assignment_.Row(action.index);
  ++turns_;

  const int num_goal_domains = static_cast<int>(user_.goal().domains.size());
  const DomainGoal& g = user_.goal().domains[current_];
  const int d = g.domain;
  auto ready = [&]() {
    for (int s : g.constraints)
      if (!state_.Get(layout_.InformedBit(d, s))) return false;
    for (int s : g.requests)
      if (!state_.Get(layout_.SatisfiedBit(d, s))) return false;
    return true;
  };

  bool helpful = false;
  bool booked = false;
  if (t.domain == d) {
    if (t.act == layout_.request_act() &&
        state_.Get(layout_.NeededBit(d, t.slot)) &&
        !state_.Get(layout_.InformedBit(d, t.slot))) {
      helpful = true;
      user_.Push({UserActType::kInform, d, t.slot});
    } else if (t.act == layout_.inform_act() &&
               state_.Get(layout_.PendingBit(d, t.slot)) &&
               !state_.Get(layout_.SatisfiedBit(d, t.slot))) {
      helpful = true;
      state_.Set(layout_.SatisfiedBit(d, t.slot), true);
      user_.Push({UserActType::kAck, d, -1});
    } else if (t.act == layout_.book_act() && t.slot == layout_.BookSlot(d) &&
               ready()) {
      helpful = true;
      booked = true;
      state_.Set(layout_.BookedBit(d), true);
    }
  }
  if (!helpful) user_.Push({UserActType::kNegate, d, -1});
  user_.Judge(helpful);

  ClearActBits();
  state_.Set(layout_.SystemActBit(t.domain, t.act), true);
  for (int k = 0; k < StateLayout::kTurnBuckets; ++k) {
    state_.Set(layout_.TurnBit(k), turns_ >= StateLayout::kTurnThresholds[k]);
  }

  if (booked) {
    ++current_;
    if (current_ == num_goal_domains) {
      done_ = success_ = true;
    } else {
      Utter(user_.Pop());  // opens the next domain
    }
  } else {
    Utter(user_.Pop());
    if (layout_.book_act() < 0 && ready()) {
      ++current_;
      if (current_ == num_goal_domains) {
        done_ = success_ = true;
      } else {
        Utter(user_.Pop());
      }
    }
  }
  if (!done_ && (user_.patience() <= 0 || turns_ >= config_.max_turns)) {
    done_ = true;
  }

  StepResult r;
  r.state = state_;
  r.done = done_;
  r.r_ori = config_.turn_reward;
  if (done_) {
    r.success = success_;
    r.r_ori += success_ ? config_.success_bonus : config_.failure_bonus;
  }
  return r;
}

DialogAction ExpertAction(const StateLayout& layout, const AssignmentMatrix& m,
                          const DialogState& state) {
  const int d = layout.CurrentDomain(state);
  if (d < 0) return {0};
  auto pick = [&](int act, int slot) {
    int idx = m.Find({d, act, slot});
    return DialogAction{idx < 0 ? 0 : idx};
  };
  for (int s = 0; s < layout.num_slots(); ++s) {
    if (state.Get(layout.NeededBit(d, s)) &&
        !state.Get(layout.InformedBit(d, s))) {
      return pick(layout.request_act(), s);
    }
  }
  for (int s = 0; s < layout.num_slots(); ++s) {
    if (state.Get(layout.PendingBit(d, s)) &&
        !state.Get(layout.SatisfiedBit(d, s))) {
      return pick(layout.inform_act(), s);
    }
  }
  if (layout.book_act() >= 0) return pick(layout.book_act(), layout.BookSlot(d));
  return {0};
}

void WriteTrace(std::ostream& out, const Ontology& ontology,
                const std::vector<Transition>& trace) {
  const AssignmentMatrix m = BuildAssignmentMatrix(ontology);
  int turn = 0;
  for (const Transition& t : trace) {
    out << "turn=" << ++turn << " action=" << t.action.index << " ("
        << ontology.TripleName(m.Row(t.action.index)) << ") r_ori=" << t.r_ori
        << " r_shaped=" << t.r_shaped << " done=" << (t.done ? 1 : 0);
    if (t.success) out << " success=" << (*t.success ? 1 : 0);
    out << " state=" << t.state.ToString() << "\n";
  }
}

std::string ExpertCorpus::Serialize() const {
  std::ostringstream out;
  out << "# seqreward-corpus v1\n"
      << "# ontology_hash " << ontology_hash << "\n"
      << "# seed " << seed << "\n"
      << "# dialogs " << n_dialogs << "\n"
      << "# pairs " << states.size() << "\n";
  for (size_t i = 0; i < states.size(); ++i) {
    out << states[i].ToString() << " " << actions[i].index << "\n";
  }
  return out.str();
}

void ExpertCorpus::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write corpus " + path.string());
  out << Serialize();
}

ExpertCorpus ExpertCorpus::Deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ExpertCorpus c;
  if (!std::getline(in, line) || line != "# seqreward-corpus v1") {
    throw ConfigError("not a seqreward corpus (bad header)");
  }
  long long pairs = -1;
  while (in.peek() == '#') {
    std::getline(in, line);
    std::istringstream h(line.substr(1));
    std::string key;
    h >> key;
    if (key == "ontology_hash") h >> c.ontology_hash;
    else if (key == "seed") h >> c.seed;
    else if (key == "dialogs") h >> c.n_dialogs;
    else if (key == "pairs") h >> pairs;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string bits;
    int action = -1;
    if (!(row >> bits >> action)) throw ConfigError("malformed corpus row");
    c.states.push_back(DialogState::FromString(bits));
    c.actions.push_back({action});
  }
  if (pairs >= 0 && pairs != static_cast<long long>(c.states.size())) {
    throw ConfigError("corpus pair count does not match header");
  }
  return c;
}

ExpertCorpus ExpertCorpus::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read corpus " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return Deserialize(text);
}

ExpertCorpus GenerateExpertCorpus(const Ontology& ontology, int n_dialogs,
                                  std::uint64_t seed, const EnvConfig& config) {
  if (n_dialogs < 1) throw InvalidInputError("n_dialogs must be at least 1");
  DialogEnv env(ontology, config);
  ExpertCorpus corpus;
  corpus.seed = seed;
  corpus.n_dialogs = n_dialogs;
  corpus.ontology_hash = ontology.Hash();
  for (int i = 0; i < n_dialogs; ++i) {
    DialogState s = env.Reset(DeriveSeed(seed, static_cast<std::uint64_t>(i)));
    while (!env.done()) {
      DialogAction a = ExpertAction(env.layout(), env.assignment(), s);
      corpus.states.push_back(s);
      corpus.actions.push_back(a);
      s = env.Step(a).state;
    }
  }
  return corpus;
}

}  // namespace seqreward
