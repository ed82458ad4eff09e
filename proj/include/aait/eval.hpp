#ifndef AAIT_EVAL_HPP
#define AAIT_EVAL_HPP

#include <string>
#include <vector>

#include "aait/attacks.hpp"
#include "aait/dataset.hpp"

namespace aait {

// 100 * (#argmax predictions equal to the target) / n
float targeted_success_rate(const Tensor& adversaries, const std::vector<int>& target_labels,
                            Classifier& model);

struct SuccessReport {
  std::string source_model;
  std::string attack_name;
  std::vector<std::string> target_names;
  std::vector<float> rates;  // percent, aligned with target_names
  int source_index = -1;     // position of the white-box column, -1 if absent
  float average_all = 0.f;       // over every listed target (paper convention)
  float average_blackbox = 0.f;  // source column excluded
  std::string fingerprint;
  int n_images = 0;

  void recompute_averages();
};

SuccessReport evaluate_adversaries(const Tensor& adversaries,
                                   const std::vector<int>& target_labels,
                                   const std::vector<std::string>& target_names,
                                   const std::vector<Classifier*>& targets,
                                   const std::string& source_model, int source_index,
                                   const std::string& attack_name);

void write_report_csv(const std::vector<SuccessReport>& reports, const std::string& path);
void write_report_markdown(const std::vector<SuccessReport>& reports, const std::string& path);

// One row of the logit/probability measurement per transform stack.
struct CorrelationRow {
  std::string stack;
  float mean_target_logit = 0.f;
  float mean_target_probability = 0.f;
};

// Per-image measurement under a stack's input transforms, averaged over
// `draws` random applications. Probabilities are the softmax of each
// forward's logits at the target class.
struct StackMeasurement {
  std::vector<float> logit;        // per image
  std::vector<float> probability;  // per image
};

StackMeasurement measure_stack(Classifier& model, const Recipe& recipe, const Tensor& images,
                               const std::vector<int>& target_labels, const AttackConfig& cfg,
                               Rng& rng, int draws = 4);

// Crafts adversaries per stack, re-applies the stack's transforms and
// reports mean target logit/probability (the correlation experiment).
std::vector<CorrelationRow> correlation_experiment(
    Classifier& model, const TaskSet& tasks,
    const std::vector<std::pair<std::string, Recipe>>& stacks, const AttackConfig& cfg,
    int measure_draws = 4);

void write_correlation_csv(const std::vector<CorrelationRow>& rows, const std::string& path,
                           const std::string& fingerprint);
void write_correlation_charts(const std::vector<CorrelationRow>& rows,
                              const std::string& logit_png, const std::string& prob_png);

// Rows: DTMI, DTMI-Affine, DTMI-Color against each target (affine/color are
// the aait stage with the respective searched policy).
std::vector<SuccessReport> affine_vs_color_ablation(
    Classifier& source, const std::vector<std::string>& target_names,
    const std::vector<Classifier*>& targets, int source_index, const TaskSet& tasks,
    const Policy& affine_policy, const Policy& color_policy, const AttackConfig& cfg);

}  // namespace aait

#endif
