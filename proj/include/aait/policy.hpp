#ifndef AAIT_POLICY_HPP
#define AAIT_POLICY_HPP

#include <optional>
#include <string>
#include <vector>

#include "aait/imgops.hpp"

namespace aait {

enum class Vocabulary { affine_only, color_only, full };

std::string to_string(Vocabulary v);
Vocabulary vocabulary_from_string(const std::string& s);
const std::vector<OperationKind>& operations_of(Vocabulary v);

struct OperationParams {
  OperationKind kind = OperationKind::flip;
  float p = 0.5f;   // gate probability, kept in [0,1]
  float mu = 0.5f;  // normalized magnitude, kept in [0,1]

  bool operator==(const OperationParams&) const = default;
};

struct SubPolicy {
  std::vector<OperationParams> ops;  // applied strictly in order

  bool operator==(const SubPolicy&) const = default;
};

struct SearchMeta {
  float eta = 0.3f;
  int epochs = 20;
  float temperature = 0.05f;
  uint64_t seed = 0;

  bool operator==(const SearchMeta&) const = default;
};

struct Policy {
  std::vector<SubPolicy> sub_policies;
  Vocabulary vocabulary = Vocabulary::affine_only;
  SearchMeta meta;
  std::string fingerprint;  // config fingerprint of the run that produced it

  int L() const { return int(sub_policies.size()); }
  int K() const { return sub_policies.empty() ? 0 : int(sub_policies[0].ops.size()); }
  bool operator==(const Policy& o) const {
    return sub_policies == o.sub_policies && vocabulary == o.vocabulary && meta == o.meta;
  }
};

// Fresh policy with op kinds drawn uniformly from the vocabulary, p = 0.5
// and magnitudes spread over the middle of their range.
Policy init_policy(int sub_policies, int ops_each, Vocabulary vocab, Rng& rng);

// Splits the batch into contiguous chunks of chunk_size, draws one
// sub-policy per chunk uniformly at random and applies its gated ops in
// order. selected (optional) receives the sub-policy index per chunk.
Var apply_policy(const Policy& policy, const Var& batch, int chunk_size, GateMode mode,
                 float temperature, Rng& rng, std::vector<int>* selected = nullptr);

// Search-time variant where p and mu live on the tape. vars is indexed
// [l][k] -> (p, mu); mu is null for magnitude-free ops.
struct PolicyVars {
  struct OpVars {
    OperationKind kind;
    Var p;
    Var mu;
  };
  std::vector<std::vector<OpVars>> ops;  // [L][K]
  std::vector<Var> parameters() const;
  void clamp_params() const;  // project p and mu back to [0,1]
  Policy snapshot(const Policy& like) const;
};

PolicyVars make_policy_vars(const Policy& policy);

Var apply_policy(const PolicyVars& vars, const Var& batch, int chunk_size, float temperature,
                 Rng& rng, std::vector<int>* selected = nullptr);

// Policy file round trip. Field names are part of the format.
std::string serialize_policy(const Policy& policy);
Policy deserialize_policy(const std::string& text);
void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

}  // namespace aait

#endif
