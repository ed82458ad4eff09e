#include "aait/eval.hpp"

#include "aait/image_io.hpp"

#include <cmath>
#include <fstream>

namespace aait {

float targeted_success_rate(const Tensor& adversaries, const std::vector<int>& target_labels,
                            Classifier& model) {
  const int n = adversaries.shape().n;
  if (n == 0) throw DomainError("targeted_success_rate: empty adversary set");
  if (int(target_labels.size()) != n)
    throw DomainError("targeted_success_rate: label count mismatch");
  std::vector<int> pred = model.predict(adversaries);
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (pred[size_t(i)] == target_labels[size_t(i)]) ++hits;
  return 100.f * float(hits) / float(n);
}

void SuccessReport::recompute_averages() {
  double all = 0.0, bb = 0.0;
  int nbb = 0;
  for (size_t i = 0; i < rates.size(); ++i) {
    all += rates[i];
    if (int(i) != source_index) {
      bb += rates[i];
      ++nbb;
    }
  }
  average_all = rates.empty() ? 0.f : float(all / double(rates.size()));
  average_blackbox = nbb ? float(bb / nbb) : 0.f;
}

SuccessReport evaluate_adversaries(const Tensor& adversaries,
                                   const std::vector<int>& target_labels,
                                   const std::vector<std::string>& target_names,
                                   const std::vector<Classifier*>& targets,
                                   const std::string& source_model, int source_index,
                                   const std::string& attack_name) {
  if (targets.size() != target_names.size())
    throw DomainError("evaluate_adversaries: name/model count mismatch");
  SuccessReport report;
  report.source_model = source_model;
  report.attack_name = attack_name;
  report.target_names = target_names;
  report.source_index = source_index;
  report.n_images = adversaries.shape().n;
  for (auto* model : targets)
    report.rates.push_back(targeted_success_rate(adversaries, target_labels, *model));
  report.recompute_averages();
  return report;
}

void write_report_csv(const std::vector<SuccessReport>& reports, const std::string& path) {
  if (reports.empty()) throw DomainError("write_report_csv: no reports");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "# fingerprint=" << reports[0].fingerprint << "\n";
  f << "source,attack,n_images";
  for (const auto& name : reports[0].target_names) f << "," << name;
  f << ",avg_all,avg_blackbox\n";
  char buf[32];
  for (const auto& r : reports) {
    f << r.source_model << "," << r.attack_name << "," << r.n_images;
    for (float v : r.rates) {
      std::snprintf(buf, sizeof(buf), ",%.2f", double(v));
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.2f,%.2f\n", double(r.average_all),
                  double(r.average_blackbox));
    f << buf;
  }
}

void write_report_markdown(const std::vector<SuccessReport>& reports, const std::string& path) {
  if (reports.empty()) throw DomainError("write_report_markdown: no reports");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "Targeted success rates (%), source " << reports[0].source_model << ", "
    << reports[0].n_images << " images.\n\n";
  f << "| Attack |";
  for (size_t i = 0; i < reports[0].target_names.size(); ++i) {
    f << " " << reports[0].target_names[i];
    if (int(i) == reports[0].source_index) f << " (wb)";
    f << " |";
  }
  f << " Avg. | Avg. (black-box) |\n|---|";
  for (size_t i = 0; i <= reports[0].target_names.size() + 1; ++i) f << "---|";
  f << "\n";
  char buf[32];
  for (const auto& r : reports) {
    f << "| " << r.attack_name << " |";
    for (float v : r.rates) {
      std::snprintf(buf, sizeof(buf), " %.1f |", double(v));
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), " %.2f | %.2f |\n", double(r.average_all),
                  double(r.average_blackbox));
    f << buf;
  }
}

namespace {

void softmax_row(const float* z, int c, float* out) {
  float m = z[0];
  for (int i = 1; i < c; ++i) m = std::max(m, z[i]);
  double denom = 0.0;
  for (int i = 0; i < c; ++i) denom += std::exp(double(z[i]) - m);
  for (int i = 0; i < c; ++i) out[i] = float(std::exp(double(z[i]) - m) / denom);
}

}  // namespace

StackMeasurement measure_stack(Classifier& model, const Recipe& recipe, const Tensor& images,
                               const std::vector<int>& target_labels, const AttackConfig& cfg,
                               Rng& rng, int draws) {
  const int n = images.shape().n;
  StackMeasurement m;
  m.logit.assign(size_t(n), 0.f);
  m.probability.assign(size_t(n), 0.f);
  const int dim_max = cfg.resolved_dim_max(images.shape().h);
  int count = 0;

  auto accumulate = [&](const Tensor& input) {
    Tensor lg = model.logits(input);
    const int c = lg.shape().c;
    std::vector<float> probs(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) {
      softmax_row(&lg.at(i, 0, 0, 0), c, probs.data());
      m.logit[size_t(i)] += lg.at(i, target_labels[size_t(i)], 0, 0);
      m.probability[size_t(i)] += probs[size_t(target_labels[size_t(i)])];
    }
    ++count;
  };

  const bool randomized = recipe.dim || recipe.stage == GradStage::admix ||
                          recipe.stage == GradStage::aait;
  const int reps = randomized ? draws : 1;
  for (int r = 0; r < reps; ++r) {
    Var x = make_const(images);
    if (recipe.dim) x = dim_transform(x, cfg.dim_probability, dim_max, rng);
    switch (recipe.stage) {
      case GradStage::plain:
        accumulate(x->val);
        break;
      case GradStage::sim:
        for (int i = 0; i < cfg.sim_copies; ++i) {
          Tensor scaled = x->val;
          const float f = std::ldexp(1.f, -i);
          for (long j = 0; j < scaled.size(); ++j) scaled[j] *= f;
          accumulate(scaled);
        }
        break;
      case GradStage::admix: {
        for (int mix = 0; mix < cfg.admix_mixes; ++mix) {
          Tensor mixed = x->val;
          const Shape& s = mixed.shape();
          const long per = s.per_image();
          for (int i = 0; i < n; ++i) {
            const int pick = int(rng.uniform_int(uint64_t(n)));
            const float* src = x->val.data() + long(pick) * per;
            float* dst = mixed.data() + long(i) * per;
            for (long j = 0; j < per; ++j) dst[j] += cfg.admix_weight * src[j];
          }
          for (int i = 0; i < cfg.sim_copies; ++i) {
            Tensor scaled = mixed;
            const float f = std::ldexp(1.f, -i);
            for (long j = 0; j < scaled.size(); ++j) scaled[j] *= f;
            accumulate(scaled);
          }
        }
        break;
      }
      case GradStage::aait: {
        for (int i = 0; i < cfg.copies; ++i) {
          Var t = apply_policy(*recipe.policy, x, x->val.shape().n, GateMode::attack, 0.05f, rng);
          accumulate(t->val);
        }
        break;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    m.logit[size_t(i)] /= float(count);
    m.probability[size_t(i)] /= float(count);
  }
  return m;
}

std::vector<CorrelationRow> correlation_experiment(
    Classifier& model, const TaskSet& tasks,
    const std::vector<std::pair<std::string, Recipe>>& stacks, const AttackConfig& cfg,
    int measure_draws) {
  std::vector<CorrelationRow> rows;
  for (const auto& [name, recipe] : stacks) {
    AttackConfig run_cfg = cfg;
    AttackResult res =
        run_attack(model, tasks.images, tasks.true_labels, tasks.target_labels, run_cfg, recipe);
    Rng rng(cfg.seed ^ fnv1a64(name));
    StackMeasurement m = measure_stack(model, recipe, res.x_adv, tasks.target_labels, cfg, rng,
                                       measure_draws);
    CorrelationRow row;
    row.stack = name;
    double lg = 0.0, pr = 0.0;
    for (size_t i = 0; i < m.logit.size(); ++i) {
      lg += m.logit[i];
      pr += m.probability[i];
    }
    row.mean_target_logit = float(lg / double(m.logit.size()));
    row.mean_target_probability = float(pr / double(m.probability.size()));
    rows.push_back(row);
  }
  return rows;
}

void write_correlation_csv(const std::vector<CorrelationRow>& rows, const std::string& path,
                           const std::string& fingerprint) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "# fingerprint=" << fingerprint << "\n";
  f << "stack,mean_target_logit,mean_target_probability\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", r.stack.c_str(),
                  double(r.mean_target_logit), double(r.mean_target_probability));
    f << buf;
  }
}

void write_correlation_charts(const std::vector<CorrelationRow>& rows,
                              const std::string& logit_png, const std::string& prob_png) {
  BarChart lg, pr;
  lg.title = "mean target logit";
  pr.title = "mean target probability";
  for (const auto& r : rows) {
    lg.labels.push_back(r.stack);
    lg.values.push_back(r.mean_target_logit);
    pr.labels.push_back(r.stack);
    pr.values.push_back(r.mean_target_probability);
  }
  write_bar_chart(logit_png, lg);
  write_bar_chart(prob_png, pr);
}

std::vector<SuccessReport> affine_vs_color_ablation(
    Classifier& source, const std::vector<std::string>& target_names,
    const std::vector<Classifier*>& targets, int source_index, const TaskSet& tasks,
    const Policy& affine_policy, const Policy& color_policy, const AttackConfig& cfg) {
  if (affine_policy.L() == 0 || color_policy.L() == 0)
    throw ConfigError("affine_vs_color_ablation: missing a searched policy");
  std::vector<SuccessReport> reports;
  const struct {
    const char* name;
    const Policy* policy;
  } runs[] = {{"dtmi", nullptr}, {"dtmi-affine", &affine_policy}, {"dtmi-color", &color_policy}};
  for (const auto& run : runs) {
    Recipe recipe;
    recipe.dim = recipe.tim = recipe.mi = true;
    if (run.policy) {
      recipe.stage = GradStage::aait;
      recipe.policy = run.policy;
    }
    AttackResult res =
        run_attack(source, tasks.images, tasks.true_labels, tasks.target_labels, cfg, recipe);
    reports.push_back(evaluate_adversaries(res.x_adv, tasks.target_labels, target_names, targets,
                                           source.id(), source_index, run.name));
  }
  return reports;
}

}  // namespace aait
