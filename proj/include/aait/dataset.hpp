#ifndef AAIT_DATASET_HPP
#define AAIT_DATASET_HPP

#include <string>
#include <vector>

#include "aait/surrogates.hpp"

namespace aait {

// CIFAR-10 binary batch format: per record one label byte followed by
// 32*32 red, green, blue planes.
LabeledData read_cifar_bin(const std::string& path);
void write_cifar_bin(const std::string& path, const LabeledData& data);

struct SynthOptions {
  int count = 10000;
  uint64_t seed = 7;
  float noise = 0.08f;  // additive pixel noise before quantization
};

// Procedural 10-class 32x32 set in CIFAR-10 layout: class-specific shapes
// and palettes with heavy jitter, quantized to the 8-bit grid.
LabeledData generate_synthetic(const SynthOptions& opt);

// A targeted attack workload: images with true and target labels.
struct TaskSet {
  Tensor images;  // (N,3,H,W)
  std::vector<std::string> ids;
  std::vector<int> true_labels;    // 0-indexed
  std::vector<int> target_labels;  // 0-indexed, always != true label
  int size() const { return images.shape().n; }

  TaskSet slice(int start, int count) const;
};

// Draws tasks from labeled data; target classes are uniform over the other
// classes, fixed by the seed.
TaskSet make_tasks(const LabeledData& data, int count, uint64_t seed);

// Manifest CSV columns: ImageId,TrueLabel,TargetClass with 1-indexed
// labels; images live at <dir>/<ImageId>.png.
TaskSet load_tasks(const std::string& manifest_path, const std::string& images_dir,
                   int class_count);
void save_tasks(const TaskSet& tasks, const std::string& manifest_path,
                const std::string& images_dir);

}  // namespace aait

#endif
