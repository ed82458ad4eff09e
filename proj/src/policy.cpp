#include "aait/policy.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace aait {

using nlohmann::json;

std::string to_string(Vocabulary v) {
  switch (v) {
    case Vocabulary::affine_only:
      return "affine";
    case Vocabulary::color_only:
      return "color";
    case Vocabulary::full:
      return "full";
  }
  throw DomainError("invalid vocabulary");
}

Vocabulary vocabulary_from_string(const std::string& s) {
  if (s == "affine" || s == "affine-only") return Vocabulary::affine_only;
  if (s == "color" || s == "color-only") return Vocabulary::color_only;
  if (s == "full") return Vocabulary::full;
  throw ParseError("unknown vocabulary: " + s);
}

const std::vector<OperationKind>& operations_of(Vocabulary v) {
  switch (v) {
    case Vocabulary::affine_only:
      return affine_vocabulary();
    case Vocabulary::color_only:
      return color_vocabulary();
    case Vocabulary::full:
      return full_vocabulary();
  }
  throw DomainError("invalid vocabulary");
}

Policy init_policy(int sub_policies, int ops_each, Vocabulary vocab, Rng& rng) {
  if (sub_policies < 1) throw DomainError("init_policy: need at least one sub-policy");
  if (ops_each < 1) throw DomainError("init_policy: need at least one op per sub-policy");
  const auto& kinds = operations_of(vocab);
  Policy policy;
  policy.vocabulary = vocab;
  for (int l = 0; l < sub_policies; ++l) {
    SubPolicy sp;
    for (int k = 0; k < ops_each; ++k) {
      OperationParams op;
      op.kind = kinds[rng.uniform_int(kinds.size())];
      op.p = 0.5f;
      op.mu = float(rng.uniform(0.2, 0.8));
      sp.ops.push_back(op);
    }
    policy.sub_policies.push_back(std::move(sp));
  }
  return policy;
}

namespace {

void check_apply_args(int policy_len, int chunk_size) {
  if (policy_len == 0) throw DomainError("apply_policy: empty policy");
  if (chunk_size < 1) throw DomainError("apply_policy: chunk_size must be >= 1");
}

}  // namespace

Var apply_policy(const Policy& policy, const Var& batch, int chunk_size, GateMode mode,
                 float temperature, Rng& rng, std::vector<int>* selected) {
  check_apply_args(policy.L(), chunk_size);
  const int n = batch->val.shape().n;
  std::vector<Var> chunks;
  for (int start = 0; start < n; start += chunk_size) {
    const int count = std::min(chunk_size, n - start);
    const bool whole = start == 0 && count == n;
    Var x = whole ? batch : slice_n(batch, start, count);
    const int l = int(rng.uniform_int(uint64_t(policy.L())));
    if (selected) selected->push_back(l);
    for (const OperationParams& op : policy.sub_policies[size_t(l)].ops)
      x = gated_apply(op.kind, make_scalar(op.mu), make_scalar(op.p), temperature, x, mode, rng);
    if (whole) return x;
    chunks.push_back(x);
  }
  return concat_n(chunks);
}

std::vector<Var> PolicyVars::parameters() const {
  std::vector<Var> out;
  for (const auto& sp : ops)
    for (const auto& op : sp) {
      out.push_back(op.p);
      if (op.mu) out.push_back(op.mu);
    }
  return out;
}

void PolicyVars::clamp_params() const {
  for (const auto& sp : ops)
    for (const auto& op : sp) {
      op.p->val[0] = std::clamp(op.p->val[0], 0.f, 1.f);
      if (op.mu) op.mu->val[0] = std::clamp(op.mu->val[0], 0.f, 1.f);
    }
}

Policy PolicyVars::snapshot(const Policy& like) const {
  Policy out = like;
  for (size_t l = 0; l < ops.size(); ++l)
    for (size_t k = 0; k < ops[l].size(); ++k) {
      out.sub_policies[l].ops[k].p = ops[l][k].p->val[0];
      out.sub_policies[l].ops[k].mu = ops[l][k].mu ? ops[l][k].mu->val[0] : 0.5f;
    }
  return out;
}

PolicyVars make_policy_vars(const Policy& policy) {
  PolicyVars vars;
  for (const auto& sp : policy.sub_policies) {
    std::vector<PolicyVars::OpVars> row;
    for (const auto& op : sp.ops) {
      PolicyVars::OpVars ov;
      ov.kind = op.kind;
      ov.p = make_leaf(Tensor::scalar(op.p), true);
      ov.mu = has_magnitude(op.kind) ? make_leaf(Tensor::scalar(op.mu), true) : nullptr;
      row.push_back(std::move(ov));
    }
    vars.ops.push_back(std::move(row));
  }
  return vars;
}

Var apply_policy(const PolicyVars& vars, const Var& batch, int chunk_size, float temperature,
                 Rng& rng, std::vector<int>* selected) {
  check_apply_args(int(vars.ops.size()), chunk_size);
  const int n = batch->val.shape().n;
  std::vector<Var> chunks;
  for (int start = 0; start < n; start += chunk_size) {
    const int count = std::min(chunk_size, n - start);
    const bool whole = start == 0 && count == n;
    Var x = whole ? batch : slice_n(batch, start, count);
    const int l = int(rng.uniform_int(vars.ops.size()));
    if (selected) selected->push_back(l);
    for (const auto& op : vars.ops[size_t(l)]) {
      Var mu = op.mu ? op.mu : make_scalar(0.5f);
      x = gated_apply(op.kind, mu, op.p, temperature, x, GateMode::search, rng);
    }
    if (whole) return x;
    chunks.push_back(x);
  }
  return concat_n(chunks);
}

// ---- policy file ----

static const char* kMuKey = "μ";   // μ
static const char* kEtaKey = "η";  // η

std::string serialize_policy(const Policy& policy) {
  json doc;
  doc["version"] = 1;
  doc["vocabulary"] = to_string(policy.vocabulary);
  doc["L"] = policy.L();
  doc["K"] = policy.K();
  json subs = json::array();
  for (const auto& sp : policy.sub_policies) {
    json ops = json::array();
    for (const auto& op : sp.ops) {
      json o;
      o["kind"] = to_string(op.kind);
      o["p"] = double(op.p);
      o[kMuKey] = double(op.mu);
      ops.push_back(o);
    }
    subs.push_back(ops);
  }
  doc["sub_policies"] = subs;
  json meta;
  meta[kEtaKey] = double(policy.meta.eta);
  meta["epochs"] = policy.meta.epochs;
  meta["temperature"] = double(policy.meta.temperature);
  meta["seed"] = policy.meta.seed;
  doc["search_meta"] = meta;
  if (!policy.fingerprint.empty()) doc["fingerprint"] = policy.fingerprint;
  return doc.dump(2);
}

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError(std::string("policy file: missing field ") + name);
  return *it;
}

}  // namespace

Policy deserialize_policy(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy file: not valid JSON: ") + e.what());
  }
  Policy policy;
  try {
    policy.vocabulary = vocabulary_from_string(field(doc, "vocabulary").get<std::string>());
    const int L = field(doc, "L").get<int>();
    const int K = field(doc, "K").get<int>();
    for (const auto& sp_json : field(doc, "sub_policies")) {
      SubPolicy sp;
      for (const auto& op_json : sp_json) {
        OperationParams op;
        op.kind = operation_from_string(field(op_json, "kind").get<std::string>());
        op.p = field(op_json, "p").get<float>();
        op.mu = field(op_json, kMuKey).get<float>();
        if (op.p < 0.f || op.p > 1.f || op.mu < 0.f || op.mu > 1.f)
          throw ParseError("policy file: p and μ must lie in [0,1]");
        sp.ops.push_back(op);
      }
      if (int(sp.ops.size()) != K)
        throw ParseError("policy file: sub-policy length differs from K");
      policy.sub_policies.push_back(std::move(sp));
    }
    if (policy.L() != L) throw ParseError("policy file: sub-policy count differs from L");
    const json& meta = field(doc, "search_meta");
    policy.meta.eta = field(meta, kEtaKey).get<float>();
    policy.meta.epochs = field(meta, "epochs").get<int>();
    policy.meta.temperature = field(meta, "temperature").get<float>();
    policy.meta.seed = field(meta, "seed").get<uint64_t>();
    if (doc.contains("fingerprint")) policy.fingerprint = doc["fingerprint"].get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy file: ") + e.what());
  }
  if (policy.sub_policies.empty()) throw ParseError("policy file: empty sub_policies");
  return policy;
}

void save_policy(const Policy& policy, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << serialize_policy(policy) << "\n";
}

Policy load_policy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize_policy(ss.str());
}

}  // namespace aait
