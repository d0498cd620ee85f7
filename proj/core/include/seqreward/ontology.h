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

#ifndef SEQREWARD_ONTOLOGY_H_
#define SEQREWARD_ONTOLOGY_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace seqreward {

// A (domain, act, slot) index triple; one dialog act of the action space.
struct Triple {
  int domain = 0;
  int act = 0;
  int slot = 0;

  auto operator<=>(const Triple&) const = default;
};

// Domain/act/slot vocabulary plus the set of valid triples that make up the
// action space. Immutable after construction.
class Ontology {
 public:
  // Triples are deduplicated and sorted lexicographically. Throws
  // ConfigError when any invariant fails (empty lists, out-of-range triple,
  // non-positive state_dim).
  Ontology(std::vector<std::string> domains, std::vector<std::string> acts,
           std::vector<std::string> slots, std::vector<Triple> valid_triples,
           int state_dim);

  // Every combination of the three lists is valid.
  static Ontology Full(int num_domains, int num_acts, int num_slots,
                       int state_dim);

  // File grammar (JSON):
  //   { "domains": [..], "acts": [..], "slots": [..], "state_dim": N,
  //     "valid_triples": [["domain", "act", "slot"], ...] }
  // valid_triples may be given as name triples or index triples; it may
  // also be the string "all".
  static Ontology FromJson(const nlohmann::json& j);
  static Ontology Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  const std::vector<std::string>& domains() const { return domains_; }
  const std::vector<std::string>& acts() const { return acts_; }
  const std::vector<std::string>& slots() const { return slots_; }
  const std::vector<Triple>& valid_triples() const { return triples_; }
  int num_domains() const { return static_cast<int>(domains_.size()); }
  int num_acts() const { return static_cast<int>(acts_.size()); }
  int num_slots() const { return static_cast<int>(slots_.size()); }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return static_cast<int>(triples_.size()); }

  bool IsValid(const Triple& t) const;

  // Index of a named act, or -1.
  int ActIndex(const std::string& name) const;

  // SHA-256 of the canonical JSON serialization.
  const std::string& Hash() const { return hash_; }

  std::string TripleName(const Triple& t) const;

 private:
  std::vector<std::string> domains_;
  std::vector<std::string> acts_;
  std::vector<std::string> slots_;
  std::vector<Triple> triples_;
  int state_dim_;
  std::string hash_;
};

// One agent decision: an index into the action space.
struct DialogAction {
  int index = 0;
  bool operator==(const DialogAction&) const = default;
};

// One-hot projections of an action onto the three levels.
struct SubActions {
  Eigen::VectorXd domain;
  Eigen::VectorXd act;
  Eigen::VectorXd slot;

  Triple ArgMax() const;
};

// Binary belief/agenda feature vector.
class DialogState {
 public:
  DialogState() = default;
  explicit DialogState(int dim) : bits_(dim, 0) {}
  explicit DialogState(std::vector<std::uint8_t> bits);

  int size() const { return static_cast<int>(bits_.size()); }
  bool Get(int i) const { return bits_.at(i) != 0; }
  void Set(int i, bool value) { bits_.at(i) = value ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  Eigen::VectorXd ToVector() const;
  std::string ToString() const;  // "0101..."
  static DialogState FromString(const std::string& s);

  bool operator==(const DialogState&) const = default;
  auto operator<=>(const DialogState&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Stacks states as rows of a batch matrix.
Eigen::MatrixXd StackStates(const std::vector<DialogState>& states);

// Row i maps action index i to its triple; rows follow lexicographic
// (domain, act, slot) order of the valid triples.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;
  AssignmentMatrix(std::vector<Triple> rows, int num_domains, int num_acts,
                   int num_slots);

  int action_dim() const { return static_cast<int>(rows_.size()); }
  int num_domains() const { return num_domains_; }
  int num_acts() const { return num_acts_; }
  int num_slots() const { return num_slots_; }
  const std::vector<Triple>& rows() const { return rows_; }
  const Triple& Row(int index) const;

  // Index whose row equals t, or -1.
  int Find(const Triple& t) const;

  // action_dim x K 0/1 matrices; a one-hot action row vector times the
  // projection gives the corresponding sub-action.
  const Eigen::MatrixXd& DomainProjection() const { return proj_domain_; }
  const Eigen::MatrixXd& ActProjection() const { return proj_act_; }
  const Eigen::MatrixXd& SlotProjection() const { return proj_slot_; }

  bool operator==(const AssignmentMatrix& o) const { return rows_ == o.rows_; }

 private:
  std::vector<Triple> rows_;
  std::map<Triple, int> lookup_;
  int num_domains_ = 0;
  int num_acts_ = 0;
  int num_slots_ = 0;
  Eigen::MatrixXd proj_domain_;
  Eigen::MatrixXd proj_act_;
  Eigen::MatrixXd proj_slot_;
};

AssignmentMatrix BuildAssignmentMatrix(const Ontology& ontology);

// Throws InvalidInputError when the index is outside [0, action_dim).
SubActions DecomposeAction(DialogAction action, const AssignmentMatrix& m);

// Throws InvalidInputError when the sub-actions are not one-hot or name a
// triple outside the action space.
DialogAction ComposeAction(const SubActions& sub, const AssignmentMatrix& m);

}  // namespace seqreward

#endif  // SEQREWARD_ONTOLOGY_H_
