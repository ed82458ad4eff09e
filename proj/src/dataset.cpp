#include "aait/dataset.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <numeric>

#include "aait/image_io.hpp"

namespace aait {

namespace {
constexpr int kSide = 32;
constexpr long kPlane = kSide * kSide;
}  // namespace

LabeledData read_cifar_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  const size_t record = 1 + 3 * kPlane;
  if (buf.empty() || buf.size() % record != 0)
    throw ParseError(path + ": not a CIFAR-10 binary batch (size " +
                     std::to_string(buf.size()) + ")");
  const int n = int(buf.size() / record);
  LabeledData data;
  data.images = Tensor(Shape(n, 3, kSide, kSide));
  data.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const unsigned char* rec = buf.data() + size_t(i) * record;
    if (rec[0] > 9) throw ParseError(path + ": label byte out of range");
    data.labels[size_t(i)] = rec[0];
    for (int c = 0; c < 3; ++c)
      for (long j = 0; j < kPlane; ++j)
        data.images[((long(i) * 3 + c) * kPlane) + j] = float(rec[1 + c * kPlane + j]) / 255.f;
  }
  return data;
}

void write_cifar_bin(const std::string& path, const LabeledData& data) {
  const Shape& s = data.images.shape();
  if (s.c != 3 || s.h != kSide || s.w != kSide)
    throw DomainError("write_cifar_bin: images must be (N,3,32,32)");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  std::vector<unsigned char> rec(1 + 3 * kPlane);
  for (int i = 0; i < s.n; ++i) {
    rec[0] = (unsigned char)(data.labels[size_t(i)]);
    for (int c = 0; c < 3; ++c)
      for (long j = 0; j < kPlane; ++j) {
        const float v = data.images[(long(i) * 3 + c) * kPlane + j];
        rec[1 + size_t(c) * kPlane + size_t(j)] =
            (unsigned char)(std::lround(std::fmin(std::fmax(v, 0.f), 1.f) * 255.f));
      }
    f.write(reinterpret_cast<const char*>(rec.data()), std::streamsize(rec.size()));
  }
}

namespace {

struct Rgb {
  float r, g, b;
};

Rgb jitter(Rgb c, Rng& rng, float amt) {
  return {c.r + float(rng.uniform(-amt, amt)), c.g + float(rng.uniform(-amt, amt)),
          c.b + float(rng.uniform(-amt, amt))};
}

// Two palettes per class, partially shared between confusable pairs so the
// classes are separable by shape but not trivially by color.
void class_palette(int label, Rng& rng, Rgb& fg, Rgb& bg) {
  static const Rgb fgs[10] = {{0.85f, 0.30f, 0.25f}, {0.25f, 0.40f, 0.85f},
                              {0.90f, 0.75f, 0.20f}, {0.85f, 0.70f, 0.25f},
                              {0.30f, 0.75f, 0.35f}, {0.70f, 0.30f, 0.75f},
                              {0.85f, 0.45f, 0.20f}, {0.80f, 0.35f, 0.30f},
                              {0.35f, 0.70f, 0.75f}, {0.30f, 0.70f, 0.40f}};
  static const Rgb bgs[10] = {{0.15f, 0.20f, 0.30f}, {0.25f, 0.18f, 0.15f},
                              {0.20f, 0.25f, 0.35f}, {0.22f, 0.25f, 0.33f},
                              {0.30f, 0.22f, 0.28f}, {0.18f, 0.28f, 0.22f},
                              {0.25f, 0.25f, 0.20f}, {0.16f, 0.22f, 0.30f},
                              {0.28f, 0.20f, 0.25f}, {0.28f, 0.23f, 0.26f}};
  fg = jitter(fgs[label], rng, 0.12f);
  bg = jitter(bgs[label], rng, 0.10f);
}

void paint(Tensor& img, int i, int y, int x, const Rgb& c, float w) {
  img.at(i, 0, y, x) += w * (c.r - img.at(i, 0, y, x));
  img.at(i, 1, y, x) += w * (c.g - img.at(i, 1, y, x));
  img.at(i, 2, y, x) += w * (c.b - img.at(i, 2, y, x));
}

void draw_sample(Tensor& img, int i, int label, Rng& rng, float noise) {
  Rgb fg, bg;
  class_palette(label, rng, fg, bg);
  // background with a soft vertical or horizontal gradient
  const bool vert = rng.bernoulli(0.5);
  const float gstr = float(rng.uniform(0.0, 0.25));
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) {
      const float t = float(vert ? y : x) / (kSide - 1);
      Rgb c{bg.r + gstr * (t - 0.5f), bg.g + gstr * (t - 0.5f), bg.b + gstr * (t - 0.5f)};
      img.at(i, 0, y, x) = c.r;
      img.at(i, 1, y, x) = c.g;
      img.at(i, 2, y, x) = c.b;
    }

  const float cx = float(rng.uniform(11.0, 21.0));
  const float cy = float(rng.uniform(11.0, 21.0));
  const float scale = float(rng.uniform(6.0, 11.0));
  const float angle = float(rng.uniform(-0.5, 0.5));
  const float ca = std::cos(angle), sa = std::sin(angle);
  const float period = float(rng.uniform(4.0, 8.0));

  auto stripes = [&](float dx, float dy) {
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        const float u = dx * (x - cx) + dy * (y - cy);
        const float ph = std::sin(6.2831853f * u / period);
        if (ph > 0.f) paint(img, i, y, x, fg, 0.85f);
      }
  };

  switch (label) {
    case 0:  // horizontal stripes
      stripes(sa * 0.15f, ca);
      break;
    case 1:  // vertical stripes
      stripes(ca, sa * 0.15f);
      break;
    case 2:  // filled disk
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float d = std::hypot(x - cx, y - cy);
          if (d < scale) paint(img, i, y, x, fg, 0.9f);
        }
      break;
    case 3:  // ring
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float d = std::hypot(x - cx, y - cy);
          if (d < scale && d > scale * 0.55f) paint(img, i, y, x, fg, 0.9f);
        }
      break;
    case 4:  // square outline
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float u = std::fabs(ca * (x - cx) + sa * (y - cy));
          const float v = std::fabs(-sa * (x - cx) + ca * (y - cy));
          const float m = std::max(u, v);
          if (m < scale && m > scale * 0.6f) paint(img, i, y, x, fg, 0.9f);
        }
      break;
    case 5:  // filled triangle
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float u = ca * (x - cx) + sa * (y - cy);
          const float v = -sa * (x - cx) + ca * (y - cy);
          if (v > -scale * 0.6f && std::fabs(u) < (v + scale * 0.6f) * 0.6f &&
              v < scale * 0.7f)
            paint(img, i, y, x, fg, 0.9f);
        }
      break;
    case 6:  // checkerboard
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const int u = int(std::floor((ca * (x - cx) + sa * (y - cy)) / (period * 0.75f)));
          const int v = int(std::floor((-sa * (x - cx) + ca * (y - cy)) / (period * 0.75f)));
          if ((u + v) & 1) paint(img, i, y, x, fg, 0.8f);
        }
      break;
    case 7:  // diagonal stripes
      stripes(0.7071f * ca - 0.7071f * sa, 0.7071f * sa + 0.7071f * ca);
      break;
    case 8: {  // two gaussian blobs
      const float ox = float(rng.uniform(-6.0, 6.0));
      const float oy = float(rng.uniform(-6.0, 6.0));
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float d1 = std::hypot(x - cx - ox, y - cy - oy);
          const float d2 = std::hypot(x - cx + ox, y - cy + oy);
          const float w = std::exp(-d1 * d1 / (scale * scale * 0.5f)) +
                          std::exp(-d2 * d2 / (scale * scale * 0.5f));
          if (w > 0.05f) paint(img, i, y, x, fg, std::fmin(w, 1.f) * 0.9f);
        }
      break;
    }
    case 9:  // plus
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          const float u = std::fabs(ca * (x - cx) + sa * (y - cy));
          const float v = std::fabs(-sa * (x - cx) + ca * (y - cy));
          if ((u < scale * 0.28f && v < scale) || (v < scale * 0.28f && u < scale))
            paint(img, i, y, x, fg, 0.9f);
        }
      break;
    default:
      throw DomainError("draw_sample: label out of range");
  }

  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        float v = img.at(i, c, y, x) + float(rng.normal()) * noise;
        img.at(i, c, y, x) = std::fmin(std::fmax(v, 0.f), 1.f);
      }
}

}  // namespace

LabeledData generate_synthetic(const SynthOptions& opt) {
  Rng rng(opt.seed);
  LabeledData data;
  data.images = Tensor(Shape(opt.count, 3, kSide, kSide));
  data.labels.resize(static_cast<size_t>(opt.count));
  for (int i = 0; i < opt.count; ++i) {
    const int label = int(rng.uniform_int(10));
    data.labels[size_t(i)] = label;
    draw_sample(data.images, i, label, rng, opt.noise);
  }
  data.images = quantize_8bit(data.images);
  return data;
}

TaskSet TaskSet::slice(int start, int count) const {
  TaskSet out;
  out.images = images.slice_n(start, count);
  out.ids.assign(ids.begin() + start, ids.begin() + start + count);
  out.true_labels.assign(true_labels.begin() + start, true_labels.begin() + start + count);
  out.target_labels.assign(target_labels.begin() + start,
                           target_labels.begin() + start + count);
  return out;
}

TaskSet make_tasks(const LabeledData& data, int count, uint64_t seed) {
  if (count > data.size())
    throw ConfigError("make_tasks: requested " + std::to_string(count) + " tasks from " +
                      std::to_string(data.size()) + " images");
  Rng rng(seed);
  std::vector<int> order(static_cast<size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  TaskSet tasks;
  const Shape& s = data.images.shape();
  tasks.images = Tensor(Shape(count, s.c, s.h, s.w));
  char idbuf[32];
  for (int i = 0; i < count; ++i) {
    const int src = order[size_t(i)];
    tasks.images.set_slice_n(i, data.images.slice_n(src, 1));
    const int y = data.labels[size_t(src)];
    int target = int(rng.uniform_int(9));
    if (target >= y) ++target;  // uniform over the nine other classes
    std::snprintf(idbuf, sizeof(idbuf), "img%05d", i);
    tasks.ids.push_back(idbuf);
    tasks.true_labels.push_back(y);
    tasks.target_labels.push_back(target);
  }
  return tasks;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TaskSet load_tasks(const std::string& manifest_path, const std::string& images_dir,
                   int class_count) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot read " + manifest_path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError(manifest_path + ": empty manifest");
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "ImageId" || header[1] != "TrueLabel" ||
      header[2] != "TargetClass")
    throw ParseError(manifest_path + ": expected header ImageId,TrueLabel,TargetClass");

  struct Row {
    std::string id;
    int true_label, target;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() < 3)
      throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": expected 3 columns");
    Row r;
    r.id = cells[0];
    try {
      r.true_label = std::stoi(cells[1]);
      r.target = std::stoi(cells[2]);
    } catch (const std::exception&) {
      throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": bad label");
    }
    if (r.true_label < 1 || r.true_label > class_count || r.target < 1 ||
        r.target > class_count)
      throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": label outside [1," +
                       std::to_string(class_count) + "]");
    if (r.true_label == r.target)
      throw ParseError(manifest_path + ":" + std::to_string(line_no) +
                       ": TargetClass equals TrueLabel for " + r.id);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError(manifest_path + ": no rows");

  std::string missing;
  int missing_count = 0;
  std::vector<Tensor> images;
  for (const auto& r : rows) {
    const std::string path = images_dir + "/" + r.id + ".png";
    if (!std::filesystem::exists(path)) {
      if (++missing_count <= 8) missing += (missing.empty() ? "" : ", ") + r.id;
      continue;
    }
    images.push_back(read_png(path));
  }
  if (missing_count)
    throw IoError("missing " + std::to_string(missing_count) + " image file(s): " + missing);

  TaskSet tasks;
  tasks.images = concat_n(images);
  for (const auto& r : rows) {
    tasks.ids.push_back(r.id);
    tasks.true_labels.push_back(r.true_label - 1);  // to 0-indexed
    tasks.target_labels.push_back(r.target - 1);
  }
  return tasks;
}

void save_tasks(const TaskSet& tasks, const std::string& manifest_path,
                const std::string& images_dir) {
  std::filesystem::create_directories(images_dir);
  std::ofstream f(manifest_path, std::ios::binary);
  if (!f) throw IoError("cannot write " + manifest_path);
  f << "ImageId,TrueLabel,TargetClass\n";
  for (int i = 0; i < tasks.size(); ++i) {
    f << tasks.ids[size_t(i)] << "," << tasks.true_labels[size_t(i)] + 1 << ","
      << tasks.target_labels[size_t(i)] + 1 << "\n";
    write_png(images_dir + "/" + tasks.ids[size_t(i)] + ".png", tasks.images.slice_n(i, 1));
  }
}

}  // namespace aait
