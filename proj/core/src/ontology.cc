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

#include "seqreward/ontology.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "seqreward/errors.h"
#include "seqreward/hash.h"

namespace seqreward {
namespace {

int IndexOf(const std::vector<std::string>& names, const std::string& name,
            const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
  }
  return static_cast<int>(it - names.begin());
}

void CheckNames(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) throw ConfigError(std::string("ontology has no ") + what);
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) {
    throw ConfigError(std::string("duplicate ") + what + " name");
  }
}

}  // namespace

Ontology::Ontology(std::vector<std::string> domains,
                   std::vector<std::string> acts,
                   std::vector<std::string> slots,
                   std::vector<Triple> valid_triples, int state_dim)
    : domains_(std::move(domains)),
      acts_(std::move(acts)),
      slots_(std::move(slots)),
      triples_(std::move(valid_triples)),
      state_dim_(state_dim) {
  CheckNames(domains_, "domains");
  CheckNames(acts_, "acts");
  CheckNames(slots_, "slots");
  if (state_dim_ <= 0) throw ConfigError("state_dim must be positive");
  for (const Triple& t : triples_) {
    if (t.domain < 0 || t.domain >= num_domains() || t.act < 0 ||
        t.act >= num_acts() || t.slot < 0 || t.slot >= num_slots()) {
      throw ConfigError("valid triple out of range");
    }
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()),
                 triples_.end());
  if (triples_.empty()) throw ConfigError("ontology has no valid triples");
  hash_ = Sha256Hex(ToJson().dump());
}

Ontology Ontology::Full(int num_domains, int num_acts, int num_slots,
                        int state_dim) {
  std::vector<std::string> d, a, s;
  for (int i = 0; i < num_domains; ++i) d.push_back("d" + std::to_string(i));
  for (int i = 0; i < num_acts; ++i) a.push_back("a" + std::to_string(i));
  for (int i = 0; i < num_slots; ++i) s.push_back("s" + std::to_string(i));
  std::vector<Triple> triples;
  for (int i = 0; i < num_domains; ++i)
    for (int j = 0; j < num_acts; ++j)
      for (int k = 0; k < num_slots; ++k) triples.push_back({i, j, k});
  return Ontology(d, a, s, triples, state_dim);
}

Ontology Ontology::FromJson(const nlohmann::json& j) {
  try {
    auto domains = j.at("domains").get<std::vector<std::string>>();
    auto acts = j.at("acts").get<std::vector<std::string>>();
    auto slots = j.at("slots").get<std::vector<std::string>>();
    int state_dim = j.at("state_dim").get<int>();
    std::vector<Triple> triples;
    const auto& vt = j.at("valid_triples");
    if (vt.is_string()) {
      if (vt.get<std::string>() != "all") {
        throw ConfigError("valid_triples must be a list or \"all\"");
      }
      for (int d = 0; d < static_cast<int>(domains.size()); ++d)
        for (int a = 0; a < static_cast<int>(acts.size()); ++a)
          for (int s = 0; s < static_cast<int>(slots.size()); ++s)
            triples.push_back({d, a, s});
    } else {
      for (const auto& row : vt) {
        if (!row.is_array() || row.size() != 3) {
          throw ConfigError("each valid triple needs three entries");
        }
        if (row[0].is_string()) {
          triples.push_back(
              {IndexOf(domains, row[0].get<std::string>(), "domain"),
               IndexOf(acts, row[1].get<std::string>(), "act"),
               IndexOf(slots, row[2].get<std::string>(), "slot")});
        } else {
          triples.push_back(
              {row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
        }
      }
    }
    return Ontology(std::move(domains), std::move(acts), std::move(slots),
                    std::move(triples), state_dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ontology: ") + e.what());
  }
}

Ontology Ontology::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ontology file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return FromJson(j);
}

nlohmann::json Ontology::ToJson() const {
  nlohmann::json j;
  j["domains"] = domains_;
  j["acts"] = acts_;
  j["slots"] = slots_;
  j["state_dim"] = state_dim_;
  nlohmann::json rows = nlohmann::json::array();
  for (const Triple& t : triples_) {
    rows.push_back({domains_[t.domain], acts_[t.act], slots_[t.slot]});
  }
  j["valid_triples"] = rows;
  return j;
}

bool Ontology::IsValid(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

int Ontology::ActIndex(const std::string& name) const {
  auto it = std::find(acts_.begin(), acts_.end(), name);
  return it == acts_.end() ? -1 : static_cast<int>(it - acts_.begin());
}

std::string Ontology::TripleName(const Triple& t) const {
  return domains_.at(t.domain) + "-" + acts_.at(t.act) + "-" +
         slots_.at(t.slot);
}

Triple SubActions::ArgMax() const {
  Eigen::Index d, a, s;
  domain.maxCoeff(&d);
  act.maxCoeff(&a);
  slot.maxCoeff(&s);
  return {static_cast<int>(d), static_cast<int>(a), static_cast<int>(s)};
}

DialogState::DialogState(std::vector<std::uint8_t> bits)
    : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw InvalidInputError("dialog state bits must be 0 or 1");
  }
}

Eigen::VectorXd DialogState::ToVector() const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v[i] = bits_[i];
  return v;
}

std::string DialogState::ToString() const {
  std::string s(bits_.size(), '0');
  for (size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

DialogState DialogState::FromString(const std::string& s) {
  std::vector<std::uint8_t> bits(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') {
      throw InvalidInputError("state string must contain only 0/1");
    }
    bits[i] = s[i] == '1';
  }
  return DialogState(std::move(bits));
}

Eigen::MatrixXd StackStates(const std::vector<DialogState>& states) {
  if (states.empty()) return {};
  Eigen::MatrixXd m(states.size(), states.front().size());
  for (size_t r = 0; r < states.size(); ++r) {
    const auto& bits = states[r].bits();
    for (size_t c = 0; c < bits.size(); ++c) m(r, c) = bits[c];
  }
  return m;
}

AssignmentMatrix::AssignmentMatrix(std::vector<Triple> rows, int num_domains,
                                   int num_acts, int num_slots)
    : rows_(std::move(rows)),
      num_domains_(num_domains),
      num_acts_(num_acts),
      num_slots_(num_slots) {
  const int n = action_dim();
  proj_domain_ = Eigen::MatrixXd::Zero(n, num_domains_);
  proj_act_ = Eigen::MatrixXd::Zero(n, num_acts_);
  proj_slot_ = Eigen::MatrixXd::Zero(n, num_slots_);
  for (int i = 0; i < n; ++i) {
    lookup_[rows_[i]] = i;
    proj_domain_(i, rows_[i].domain) = 1.0;
    proj_act_(i, rows_[i].act) = 1.0;
    proj_slot_(i, rows_[i].slot) = 1.0;
  }
}

const Triple& AssignmentMatrix::Row(int index) const {
  if (index < 0 || index >= action_dim()) {
    throw InvalidInputError("action index " + std::to_string(index) +
                            " outside [0, " + std::to_string(action_dim()) +
                            ")");
  }
  return rows_[index];
}

int AssignmentMatrix::Find(const Triple& t) const {
  auto it = lookup_.find(t);
  return it == lookup_.end() ? -1 : it->second;
}

AssignmentMatrix BuildAssignmentMatrix(const Ontology& ontology) {
  return AssignmentMatrix(ontology.valid_triples(), ontology.num_domains(),
                          ontology.num_acts(), ontology.num_slots());
}

namespace {

Eigen::VectorXd OneHot(int size, int index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  v[index] = 1.0;
  return v;
}

int OneHotIndex(const Eigen::VectorXd& v, int expected_size, const char* what) {
  if (v.size() != expected_size) {
    throw InvalidInputError(std::string(what) + " sub-action has wrong length");
  }
  int hot = -1;
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      if (hot >= 0) break;
      hot = i;
    } else if (v[i] != 0.0) {
      hot = -2;
      break;
    }
  }
  if (hot < 0 || v.sum() != 1.0) {
    throw InvalidInputError(std::string(what) + " sub-action is not one-hot");
  }
  return hot;
}

}  // namespace

SubActions DecomposeAction(DialogAction action, const AssignmentMatrix& m) {
  const Triple& t = m.Row(action.index);
  return {OneHot(m.num_domains(), t.domain), OneHot(m.num_acts(), t.act),
          OneHot(m.num_slots(), t.slot)};
}

DialogAction ComposeAction(const SubActions& sub, const AssignmentMatrix& m) {
  Triple t{OneHotIndex(sub.domain, m.num_domains(), "domain"),
           OneHotIndex(sub.act, m.num_acts(), "act"),
           OneHotIndex(sub.slot, m.num_slots(), "slot")};
  int index = m.Find(t);
  if (index < 0) {
    throw InvalidInputError("triple (" + std::to_string(t.domain) + "," +
                            std::to_string(t.act) + "," +
                            std::to_string(t.slot) +
                            ") is not in the action space");
  }
  return {index};
}

}  // namespace seqreward
