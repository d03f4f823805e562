#include <cmath>
#include <fstream>

#include "difflab/error.hpp"
#include "difflab/tabular.hpp"
#include "difflab/trainer.hpp"

namespace difflab {

void validate(const LabelSet& labels) {
  require(labels.n_classes >= 2, "label set needs at least two classes");
  std::vector<bool> seen(labels.n_classes, false);
  for (const int y : labels.labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < labels.n_classes,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(labels.n_classes) +
                ")");
    seen[static_cast<std::size_t>(y)] = true;
  }
  for (std::size_t c = 0; c < labels.n_classes; ++c) {
    require(seen[c], "class " + std::to_string(c) + " has no examples");
  }
}

namespace {

std::vector<double> make_prototype(std::size_t size, Rng& rng) {
  std::vector<double> image(size * size, 0.0);
  for (int bump = 0; bump < 3; ++bump) {
    const double cy = rng.uniform(0.0, static_cast<double>(size));
    const double cx = rng.uniform(0.0, static_cast<double>(size));
    const double radius = rng.uniform(1.0, 2.0);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        image[y * size + x] += sign * std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
      }
    }
  }
  double ss = 0.0;
  for (const double v : image) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(image.size()));
  for (double& v : image) v /= rms;
  return image;
}

double shifted(const std::vector<double>& image, std::size_t size, int y, int x, int dy, int dx) {
  const int s = static_cast<int>(size);
  const int sy = ((y - dy) % s + s) % s;
  const int sx = ((x - dx) % s + s) % s;
  return image[static_cast<std::size_t>(sy) * size + static_cast<std::size_t>(sx)];
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  require(spec.n_classes >= 2, "synthetic dataset needs at least two classes");
  require(spec.n_examples >= spec.n_classes, "synthetic dataset needs one example per class");
  require(spec.image_size >= 2, "synthetic image size must be at least 2");

  Rng proto_rng(derive_seed(spec.seed, 1));
  std::vector<std::vector<double>> prototypes;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    prototypes.push_back(make_prototype(spec.image_size, proto_rng));
  }

  Dataset data;
  data.name = "synthetic";
  data.shape = InputShape{1, spec.image_size, spec.image_size};
  data.labels.n_classes = spec.n_classes;
  data.features.resize(spec.n_examples * data.shape.size());
  data.labels.labels.resize(spec.n_examples);

  Rng rng(derive_seed(spec.seed, 2));
  const int s = static_cast<int>(spec.image_size);
  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    const std::size_t cls = i % spec.n_classes;
    std::size_t other = rng.below(spec.n_classes - 1);
    if (other >= cls) ++other;
    const double mix = spec.max_mix * rng.uniform();
    const int dy = static_cast<int>(rng.below(3)) - 1;
    const int dx = static_cast<int>(rng.below(3)) - 1;
    const int ody = static_cast<int>(rng.below(3)) - 1;
    const int odx = static_cast<int>(rng.below(3)) - 1;
    double* out = data.features.data() + i * data.shape.size();
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        out[y * s + x] = (1.0 - mix) * shifted(prototypes[cls], spec.image_size, y, x, dy, dx) +
                         mix * shifted(prototypes[other], spec.image_size, y, x, ody, odx) +
                         spec.noise * rng.normal();
      }
    }
    int label = static_cast<int>(cls);
    if (rng.uniform() < spec.label_noise) {
      std::size_t flipped = rng.below(spec.n_classes - 1);
      if (flipped >= cls) ++flipped;
      label = static_cast<int>(flipped);
    }
    data.labels.labels[i] = label;
  }
  validate(data.labels);
  return data;
}

Dataset load_image_binary(std::span<const std::filesystem::path> files, std::size_t limit,
                          std::size_t n_classes) {
  constexpr std::size_t kSide = 32;
  constexpr std::size_t kChannels = 3;
  constexpr std::size_t kRecord = 1 + kChannels * kSide * kSide;
  Dataset data;
  data.name = "image-binary";
  data.shape = InputShape{kChannels, kSide, kSide};
  data.labels.n_classes = n_classes;
  std::vector<unsigned char> record(kRecord);
  for (const auto& file : files) {
    auto in = open_for_read(file);
    while (limit == 0 || data.labels.size() < limit) {
      in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(kRecord));
      if (in.gcount() == 0) break;
      require(static_cast<std::size_t>(in.gcount()) == kRecord,
              file.string() + ": truncated record");
      require(record[0] < n_classes, file.string() + ": label byte out of range");
      data.labels.labels.push_back(record[0]);
      for (std::size_t p = 1; p < kRecord; ++p) data.features.push_back(record[p] / 255.0);
    }
  }
  require(!data.labels.labels.empty(), "no image records read");
  validate(data.labels);
  return data;
}

}  // namespace difflab
