#include "aait/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "aait/losses.hpp"

namespace aait {

std::vector<int> Classifier::predict(const Tensor& images) {
  const int n = images.shape().n;
  std::vector<int> out(static_cast<size_t>(n));
  const int bs = 128;
  for (int start = 0; start < n; start += bs) {
    const int count = std::min(bs, n - start);
    Tensor lg = logits(images.slice_n(start, count));
    const int c = lg.shape().c;
    for (int i = 0; i < count; ++i) {
      const float* row = &lg.at(i, 0, 0, 0);
      out[size_t(start + i)] = int(std::max_element(row, row + c) - row);
    }
  }
  return out;
}

struct CnnClassifier::Block {
  enum Kind { conv_bn_relu, basic, pool, ds } kind = conv_bn_relu;
  Conv2d c1, c2, shortcut;
  DepthwiseConv2d dw;
  BatchNorm2d b1, b2, bs;
  bool has_shortcut = false;
};

namespace {

struct ArchSpec {
  // tokens: "c<out>s<stride>" conv+bn+relu, "b<out>s<stride>" basic block,
  // "M" maxpool, "d<out>s<stride>" depthwise-separable
  std::vector<std::string> tokens;
  int head_in = 0;
};

ArchSpec arch_spec(const std::string& id) {
  if (id == "resnet20s")
    return {{"c12s2", "b12s1", "b12s1", "b12s1", "b24s2", "b24s1", "b24s1", "b48s2", "b48s1",
             "b48s1"},
            48};
  if (id == "vgg11s")
    return {{"c16s1", "M", "c32s1", "M", "c48s1", "c48s1", "M", "c64s1", "c64s1", "M"}, 64};
  if (id == "mobiles")
    return {{"c16s2", "d24s1", "d32s2", "d48s1", "d64s2", "d64s1"}, 64};
  if (id == "tinycnn") return {{"c16s2", "c32s2"}, 32};
  throw ConfigError("unknown architecture id: " + id);
}

}  // namespace

CnnClassifier::CnnClassifier(const std::string& arch_id, int classes, int input_side,
                             uint64_t init_seed)
    : arch_id_(arch_id), classes_(classes), input_side_(input_side), seed_(init_seed) {
  const ArchSpec spec = arch_spec(arch_id);
  Rng rng(init_seed);
  int in_c = 3;
  int idx = 0;
  for (const std::string& tok : spec.tokens) {
    Block b;
    const std::string name = "blk" + std::to_string(idx++);
    if (tok == "M") {
      b.kind = Block::pool;
      blocks_.push_back(std::move(b));
      continue;
    }
    const char t = tok[0];
    const size_t spos = tok.find('s');
    const int out_c = std::stoi(tok.substr(1, spos - 1));
    const int stride = std::stoi(tok.substr(spos + 1));
    if (t == 'c') {
      b.kind = Block::conv_bn_relu;
      b.c1 = Conv2d(params_, name + ".c1", in_c, out_c, 3, stride, 1, rng, false);
      b.b1 = BatchNorm2d(params_, name + ".b1", out_c);
    } else if (t == 'b') {
      b.kind = Block::basic;
      b.c1 = Conv2d(params_, name + ".c1", in_c, out_c, 3, stride, 1, rng, false);
      b.b1 = BatchNorm2d(params_, name + ".b1", out_c);
      b.c2 = Conv2d(params_, name + ".c2", out_c, out_c, 3, 1, 1, rng, false);
      b.b2 = BatchNorm2d(params_, name + ".b2", out_c);
      if (stride != 1 || in_c != out_c) {
        b.has_shortcut = true;
        b.shortcut = Conv2d(params_, name + ".sc", in_c, out_c, 1, stride, 0, rng, false);
        b.bs = BatchNorm2d(params_, name + ".bs", out_c);
      }
    } else if (t == 'd') {
      b.kind = Block::ds;
      b.dw = DepthwiseConv2d(params_, name + ".dw", in_c, 3, stride, 1, rng);
      b.b1 = BatchNorm2d(params_, name + ".b1", in_c);
      b.c1 = Conv2d(params_, name + ".pw", in_c, out_c, 1, 1, 0, rng, false);
      b.b2 = BatchNorm2d(params_, name + ".b2", out_c);
    } else {
      throw ConfigError("bad architecture token: " + tok);
    }
    blocks_.push_back(std::move(b));
    in_c = out_c;
  }
  head_ = Linear(params_, "head", spec.head_in, classes, rng);
  for (auto& b : blocks_) {
    if (b.b1.gamma) bns_.push_back(&b.b1);
    if (b.b2.gamma) bns_.push_back(&b.b2);
    if (b.bs.gamma) bns_.push_back(&b.bs);
  }
  set_training(false);
  params_.set_trainable(false);
}

void CnnClassifier::set_training(bool on) {
  training_ = on;
  for (auto* bn : bns_) bn->training = on;
  params_.set_trainable(on);
}

Var CnnClassifier::forward(const Var& images) {
  Var h = channel_norm(images, norm_mean_, norm_sd_);
  for (auto& b : blocks_) {
    switch (b.kind) {
      case Block::conv_bn_relu:
        h = relu(b.b1(b.c1(h)));
        break;
      case Block::basic: {
        Var y = relu(b.b1(b.c1(h)));
        y = b.b2(b.c2(y));
        Var s = b.has_shortcut ? b.bs(b.shortcut(h)) : h;
        h = relu(add(y, s));
        break;
      }
      case Block::pool:
        h = maxpool2(h);
        break;
      case Block::ds:
        h = relu(b.b1(b.dw(h)));
        h = relu(b.b2(b.c1(h)));
        break;
    }
  }
  return head_(global_avg_pool(h));
}

// ---- checkpoint container ----

namespace {

constexpr char kMagic[8] = {'A', 'A', 'I', 'T', 'C', 'K', 'P', '1'};

void put_u32(std::string& s, uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& s, uint64_t v) { s.append(reinterpret_cast<const char*>(&v), 8); }
void put_f32(std::string& s, float v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void put_str(std::string& s, const std::string& v) {
  put_u32(s, uint32_t(v.size()));
  s.append(v);
}

struct Cursor {
  const std::string& buf;
  size_t at = 0;
  void need(size_t n) const {
    if (at + n > buf.size()) throw ParseError("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + at, 8);
    at += 8;
    return v;
  }
  float f32() {
    need(4);
    float v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string v = buf.substr(at, n);
    at += n;
    return v;
  }
};

}  // namespace

void CnnClassifier::save(const std::string& path) const {
  std::string payload;
  payload.append(kMagic, 8);
  put_u32(payload, 1);  // format_version
  put_str(payload, arch_id_);
  put_u32(payload, uint32_t(classes_));
  put_u32(payload, uint32_t(input_side_));
  put_u64(payload, seed_);
  put_f32(payload, recorded_accuracy_);
  for (float v : norm_mean_) put_f32(payload, v);
  for (float v : norm_sd_) put_f32(payload, v);

  auto blob = [&](const std::string& name, const Tensor& t) {
    put_str(payload, name);
    const Shape& sh = t.shape();
    put_u32(payload, uint32_t(sh.n));
    put_u32(payload, uint32_t(sh.c));
    put_u32(payload, uint32_t(sh.h));
    put_u32(payload, uint32_t(sh.w));
    payload.append(reinterpret_cast<const char*>(t.data()), size_t(t.size()) * 4);
  };
  uint32_t count = uint32_t(params_.params().size());
  int bn_idx = 0;
  for (auto* bn : bns_) (void)bn, count += 2;
  put_u32(payload, count);
  for (size_t i = 0; i < params_.params().size(); ++i)
    blob(params_.names()[i], params_.params()[i]->val);
  for (auto* bn : bns_) {
    blob("run_mean." + std::to_string(bn_idx), bn->run_mean);
    blob("run_var." + std::to_string(bn_idx), bn->run_var);
    ++bn_idx;
  }
  put_u64(payload, fnv1a64(payload.data(), payload.size()));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(payload.data(), std::streamsize(payload.size()));
}

std::unique_ptr<CnnClassifier> CnnClassifier::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 24 || std::memcmp(buf.data(), kMagic, 8) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a64(buf.data(), buf.size() - 8) != stored)
    throw ParseError("checkpoint: checksum mismatch in " + path);

  Cursor c{buf, 8};
  const uint32_t version = c.u32();
  if (version != 1) throw ParseError("checkpoint: unsupported format version");
  const std::string arch = c.str();
  const int classes = int(c.u32());
  const int side = int(c.u32());
  const uint64_t seed = c.u64();
  const float acc = c.f32();
  std::vector<float> mean(3), sd(3);
  for (auto& v : mean) v = c.f32();
  for (auto& v : sd) v = c.f32();

  auto model = std::make_unique<CnnClassifier>(arch, classes, side, seed);
  model->set_recorded_accuracy(acc);
  model->norm_mean_ = mean;
  model->norm_sd_ = sd;

  std::map<std::string, Tensor*> slots;
  for (size_t i = 0; i < model->params_.params().size(); ++i)
    slots[model->params_.names()[i]] = &model->params_.params()[i]->val;
  int bn_idx = 0;
  for (auto* bn : model->bns_) {
    slots["run_mean." + std::to_string(bn_idx)] = &bn->run_mean;
    slots["run_var." + std::to_string(bn_idx)] = &bn->run_var;
    ++bn_idx;
  }

  const uint32_t count = c.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = c.str();
    const int dn = int(c.u32()), dc = int(c.u32()), dh = int(c.u32()), dw = int(c.u32());
    Shape sh(dn, dc, dh, dw);
    auto it = slots.find(name);
    if (it == slots.end())
      throw ParseError("checkpoint: architecture mismatch, expected " + arch +
                       " has no parameter " + name);
    if (it->second->shape() != sh)
      throw ParseError("checkpoint: shape mismatch for " + name + ", expected " +
                       it->second->shape().str() + " found " + sh.str());
    c.need(size_t(sh.size()) * 4);
    std::memcpy(it->second->data(), buf.data() + c.at, size_t(sh.size()) * 4);
    c.at += size_t(sh.size()) * 4;
  }
  model->set_training(false);
  model->params_.set_trainable(false);
  return model;
}

EnsembleClassifier::EnsembleClassifier(std::vector<std::shared_ptr<Classifier>> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("ensemble needs at least one member");
  for (auto& m : members_)
    if (m->num_classes() != members_[0]->num_classes())
      throw ConfigError("ensemble members disagree on class count");
}

Var EnsembleClassifier::forward(const Var& images) {
  Var acc = members_[0]->forward(images);
  for (size_t i = 1; i < members_.size(); ++i) acc = add(acc, members_[i]->forward(images));
  return mul_scalar(acc, 1.f / float(members_.size()));
}

std::string EnsembleClassifier::id() const {
  std::string s = "ens(";
  for (size_t i = 0; i < members_.size(); ++i) s += (i ? "," : "") + members_[i]->id();
  return s + ")";
}

// ---- training ----

namespace {

Tensor augment_batch(const Tensor& batch, Rng& rng) {
  const Shape& s = batch.shape();
  Tensor out(s);
  for (int i = 0; i < s.n; ++i) {
    const int dy = int(rng.uniform_int(9)) - 4;
    const int dx = int(rng.uniform_int(9)) - 4;
    const bool flip = rng.bernoulli(0.5);
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const int sy = y + dy, sx = (flip ? s.w - 1 - x : x) + dx;
          out.at(i, c, y, x) = (sy >= 0 && sy < s.h && sx >= 0 && sx < s.w)
                                   ? batch.at(i, c, sy, sx)
                                   : 0.f;
        }
  }
  return out;
}

}  // namespace

float classifier_accuracy(Classifier& model, const LabeledData& data, int batch_size) {
  (void)batch_size;
  std::vector<int> pred = model.predict(data.images);
  int hits = 0;
  for (int i = 0; i < data.size(); ++i)
    if (pred[size_t(i)] == data.labels[size_t(i)]) ++hits;
  return float(hits) / float(std::max(1, data.size()));
}

std::unique_ptr<CnnClassifier> train_surrogate(const std::string& arch_id,
                                               const LabeledData& train,
                                               const LabeledData& test,
                                               const TrainOptions& opt) {
  if (train.size() == 0) throw ConfigError("train_surrogate: empty training set");
  auto model = std::make_unique<CnnClassifier>(arch_id, 10, train.images.shape().h, opt.seed);
  model->set_training(true);
  Adam optim(model->params().params(), opt.lr, 0.9f, 0.999f, 1e-8f, opt.weight_decay);
  Rng rng(opt.seed ^ 0x5eedf00d);

  std::vector<int> order(static_cast<size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  const int steps_per_epoch = std::max(1, (train.size() + opt.batch_size - 1) / opt.batch_size);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    // cosine decay to zero over the run
    const float lr = opt.lr * 0.5f * (1.f + std::cos(float(M_PI) * epoch / float(opt.epochs)));
    optim.set_lr(lr);
    double loss_sum = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const int start = step * opt.batch_size;
      const int count = std::min(opt.batch_size, train.size() - start);
      if (count <= 0) break;
      Tensor xb(Shape(count, 3, train.images.shape().h, train.images.shape().w));
      std::vector<int> yb(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i) {
        xb.set_slice_n(i, train.images.slice_n(order[size_t(start + i)], 1));
        yb[size_t(i)] = train.labels[size_t(order[size_t(start + i)])];
      }
      if (opt.augment) xb = augment_batch(xb, rng);
      model->params().zero_grad();
      Var logits = model->forward(make_const(xb));
      Var loss = targeted_loss(logits, yb, LossKind::cross_entropy);
      if (!loss->val.all_finite()) throw NumericError("train_surrogate: non-finite loss");
      backward(loss);
      optim.step();
      loss_sum += loss->val[0];
    }
    if (opt.verbose) {
      std::fprintf(stderr, "[train %s] epoch %d/%d loss %.4f\n", arch_id.c_str(), epoch + 1,
                   opt.epochs, loss_sum / steps_per_epoch);
    }
  }

  model->set_training(false);
  model->params().set_trainable(false);
  const float acc = classifier_accuracy(*model, test.size() ? test : train);
  model->set_recorded_accuracy(acc);
  if (acc < opt.accuracy_floor)
    throw TrainingFailure("surrogate " + arch_id + " reached only " +
                          std::to_string(acc * 100.f) + "% test accuracy (floor " +
                          std::to_string(opt.accuracy_floor * 100.f) + "%)");
  return model;
}

std::unique_ptr<Classifier> load_classifier(const std::string& path) {
  return CnnClassifier::load(path);
}

}  // namespace aait
