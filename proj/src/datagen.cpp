/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "panoslot/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "panoslot/errors.hpp"
#include "panoslot/json_io.hpp"

namespace panoslot {
namespace {

constexpr double kMinVisible = 0.6;
constexpr double kMaxDisplacement = 0.15;
constexpr std::size_t kMaxThings = 6;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined key.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::uint8_t clamp_byte(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

// Half-extents of the thing's bounding box.
double half_height(const ThingSpec& t) {
  return t.shape == ShapeType::kRect ? t.size * t.aspect : t.size;
}

// Pixel ownership for one frame: index of the topmost covering thing, or -1.
std::vector<int> thing_owner(const SceneSpec& spec, std::size_t frame) {
  std::vector<int> owner(spec.height * spec.width, -1);
  for (std::size_t i = 0; i < spec.things.size(); ++i) {
    const ThingSpec& t = spec.things[i];
    const double cy = t.cy + t.vy * static_cast<double>(frame);
    const double cx = t.cx + t.vx * static_cast<double>(frame);
    const double hh = half_height(t);
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - hh - 1)));
    const long y1 = std::min(static_cast<long>(spec.height) - 1,
                             static_cast<long>(std::ceil(cy + hh + 1)));
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - t.size - 1)));
    const long x1 = std::min(static_cast<long>(spec.width) - 1,
                             static_cast<long>(std::ceil(cx + t.size + 1)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        if (thing_covers(t, frame, static_cast<double>(y), static_cast<double>(x))) {
          owner[static_cast<std::size_t>(y) * spec.width + static_cast<std::size_t>(x)] =
              static_cast<int>(i);
        }
      }
    }
  }
  return owner;
}

// Largest fraction of any thing's in-frame area hidden by later things.
double worst_occlusion(const SceneSpec& spec) {
  double worst = 0.0;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const std::vector<int> owner = thing_owner(spec, f);
    std::vector<std::size_t> visible(spec.things.size(), 0);
    for (int o : owner) {
      if (o >= 0) ++visible[static_cast<std::size_t>(o)];
    }
    for (std::size_t i = 0; i < spec.things.size(); ++i) {
      std::size_t in_frame = 0;
      for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
          if (thing_covers(spec.things[i], f, static_cast<double>(y),
                           static_cast<double>(x))) {
            ++in_frame;
          }
        }
      }
      if (in_frame == 0) return 1.0;
      worst = std::max(worst, 1.0 - static_cast<double>(visible[i]) /
                                        static_cast<double>(in_frame));
    }
  }
  return worst;
}

void check_stream(const std::ios& s, const std::filesystem::path& path,
                  const char* what) {
  if (!s) throw IoError(std::string(what) + " " + path.string());
}

// Reads the next whitespace-separated header token, skipping comments.
std::string header_token(std::istream& in) {
  std::string token;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string t = header_token(in);
  try {
    return static_cast<std::size_t>(std::stoul(t));
  } catch (const std::exception&) {
    throw IoError("malformed netpbm header in " + path.string());
  }
}

std::string frame_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.%s", prefix, i, ext);
  return buf;
}

}  // namespace

const char* shape_name(ShapeType s) {
  switch (s) {
    case ShapeType::kDisc: return "disc";
    case ShapeType::kRect: return "rect";
    case ShapeType::kTriangle: return "triangle";
  }
  return "disc";
}

ShapeType shape_from_name(const std::string& name) {
  if (name == "disc") return ShapeType::kDisc;
  if (name == "rect") return ShapeType::kRect;
  if (name == "triangle") return ShapeType::kTriangle;
  throw ConfigError("unknown shape '" + name + "'");
}

ShapeType thing_shape(std::uint32_t class_id) {
  return static_cast<ShapeType>(class_id % 3);
}

Color thing_color(std::uint32_t class_id) {
  static const Color base[] = {{220, 60, 60}, {60, 200, 80}, {70, 90, 230}};
  Color c = base[class_id % 3];
  // Classes beyond the first three reuse the palette, darkened.
  const int shade = static_cast<int>(class_id / 3) * 50;
  for (auto& v : c) v = clamp_byte(v - shade);
  return c;
}

Color stuff_color(std::uint32_t stuff_index) {
  static const Color base[] = {{135, 175, 205}, {115, 90, 65}, {160, 160, 150}};
  Color c = base[stuff_index % 3];
  const int shade = static_cast<int>(stuff_index / 3) * 30;
  for (auto& v : c) v = clamp_byte(v - shade);
  return c;
}

bool thing_covers(const ThingSpec& t, std::size_t frame, double y, double x) {
  const double dy = y + 0.5 - (t.cy + t.vy * static_cast<double>(frame));
  const double dx = x + 0.5 - (t.cx + t.vx * static_cast<double>(frame));
  switch (t.shape) {
    case ShapeType::kDisc:
      return dx * dx + dy * dy <= t.size * t.size;
    case ShapeType::kRect:
      return std::abs(dx) <= t.size && std::abs(dy) <= t.size * t.aspect;
    case ShapeType::kTriangle:
      // Apex up, base on the bottom edge of the bounding box.
      return dy >= -t.size && dy <= t.size &&
             std::abs(dx) <= 0.5 * (dy + t.size);
  }
  return false;
}

double visible_fraction(const ThingSpec& t, std::size_t height, std::size_t width,
                        std::size_t frame) {
  const double cy = t.cy + t.vy * static_cast<double>(frame);
  const double cx = t.cx + t.vx * static_cast<double>(frame);
  const double hh = half_height(t);
  std::size_t total = 0, inside = 0;
  for (long y = static_cast<long>(std::floor(cy - hh - 1));
       y <= static_cast<long>(std::ceil(cy + hh + 1)); ++y) {
    for (long x = static_cast<long>(std::floor(cx - t.size - 1));
         x <= static_cast<long>(std::ceil(cx + t.size + 1)); ++x) {
      if (!thing_covers(t, frame, static_cast<double>(y), static_cast<double>(x))) {
        continue;
      }
      ++total;
      if (y >= 0 && x >= 0 && y < static_cast<long>(height) &&
          x < static_cast<long>(width)) {
        ++inside;
      }
    }
  }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

void SceneSpec::validate() const {
  if (height == 0 || width == 0 || frames == 0) {
    throw ConfigError("scene: frame size and frame count must be positive");
  }
  if (bands.empty()) throw ConfigError("scene: at least one stuff band required");
  std::size_t row = 0;
  std::set<std::uint32_t> classes;
  for (const auto& b : bands) {
    if (b.top != row || b.bottom <= b.top) {
      throw ConfigError("scene: stuff bands must tile the frame top to bottom");
    }
    if (!classes.insert(b.class_id).second) {
      throw ConfigError("scene: stuff band classes must be distinct");
    }
    row = b.bottom;
  }
  if (row != height) throw ConfigError("scene: stuff bands do not cover the frame");
  if (things.size() > kMaxThings) {
    throw ConfigError("scene: at most 6 things, got " + std::to_string(things.size()));
  }
  for (std::size_t i = 0; i < things.size(); ++i) {
    const ThingSpec& t = things[i];
    if (!(t.size > 0) || !(t.aspect > 0)) {
      throw ConfigError("scene: thing " + std::to_string(i) + " has non-positive size");
    }
    if (std::hypot(t.vx, t.vy) > kMaxDisplacement * static_cast<double>(width)) {
      throw ConfigError("scene: thing " + std::to_string(i) +
                        " moves more than 15% of the frame width per frame");
    }
    for (std::size_t f = 0; f < frames; ++f) {
      if (visible_fraction(t, height, width, f) < kMinVisible) {
        throw ConfigError("scene: thing " + std::to_string(i) +
                          " is less than 60% in frame at frame " + std::to_string(f));
      }
    }
  }
  if (noise < 0) throw ConfigError("scene: noise must be >= 0");
}

void GeneratorConfig::validate() const {
  if (height == 0 || width == 0 || frames == 0) {
    throw ConfigError("datagen: frame size and frame count must be positive");
  }
  if (min_things > max_things || max_things > kMaxThings) {
    throw ConfigError("datagen: need min_things <= max_things <= 6");
  }
  if (max_things > 0 && num_thing_classes == 0) {
    throw ConfigError("datagen: things requested but num_thing_classes = 0");
  }
  if (stuff_bands == 0 || stuff_bands > num_stuff_classes) {
    throw ConfigError("datagen: need 1 <= stuff_bands <= num_stuff_classes");
  }
  if (!(min_size > 0) || min_size > max_size) {
    throw ConfigError("datagen: need 0 < min_size <= max_size");
  }
  if (!(max_speed >= 0) || max_speed > kMaxDisplacement) {
    throw ConfigError("datagen: max_speed must lie in [0, 0.15]");
  }
  if (!(max_occlusion >= 0) || max_occlusion > 1) {
    throw ConfigError("datagen: max_occlusion must lie in [0, 1]");
  }
  if (noise < 0) throw ConfigError("datagen: noise must be >= 0");
}

SceneSpec sample_scene(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix(seed, 0x5CE4E));
  SceneSpec spec;
  spec.height = cfg.height;
  spec.width = cfg.width;
  spec.frames = cfg.frames;
  spec.noise = cfg.noise;
  spec.seed = seed;

  std::vector<std::uint32_t> stuff(cfg.num_stuff_classes);
  std::iota(stuff.begin(), stuff.end(), 0u);
  std::shuffle(stuff.begin(), stuff.end(), rng);
  const double h = static_cast<double>(cfg.height);
  const double nb = static_cast<double>(cfg.stuff_bands);
  std::size_t top = 0;
  for (std::size_t b = 0; b < cfg.stuff_bands; ++b) {
    std::size_t bottom = cfg.height;
    if (b + 1 < cfg.stuff_bands) {
      const double edge = h * static_cast<double>(b + 1) / nb +
                          uniform(rng, -0.15, 0.15) * h / nb;
      bottom = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(edge)),
                                       top + 1, cfg.height - (cfg.stuff_bands - b - 1));
    }
    const std::uint32_t idx = stuff[b];
    spec.bands.push_back({static_cast<std::uint32_t>(cfg.num_thing_classes) + idx, top,
                          bottom, stuff_color(idx)});
    top = bottom;
  }

  const std::size_t n = uniform_index(rng, cfg.min_things, cfg.max_things);
  const double w = static_cast<double>(cfg.width);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    spec.things.clear();
    for (std::size_t i = 0; i < n; ++i) {
      ThingSpec t;
      bool placed = false;
      for (int tries = 0; tries < 1000 && !placed; ++tries) {
        t.class_id = static_cast<std::uint32_t>(
            uniform_index(rng, 0, cfg.num_thing_classes - 1));
        t.shape = thing_shape(t.class_id);
        t.color = thing_color(t.class_id);
        t.size = uniform(rng, cfg.min_size, cfg.max_size);
        t.aspect = t.shape == ShapeType::kRect ? uniform(rng, 0.6, 1.0) : 1.0;
        t.cx = uniform(rng, 0.0, w);
        t.cy = uniform(rng, 0.0, h);
        const double speed = uniform(rng, 0.0, cfg.max_speed * w);
        const double angle = uniform(rng, 0.0, 2.0 * M_PI);
        t.vx = speed * std::cos(angle);
        t.vy = speed * std::sin(angle);
        placed = true;
        for (std::size_t f = 0; f < cfg.frames && placed; ++f) {
          placed = visible_fraction(t, cfg.height, cfg.width, f) >= kMinVisible;
        }
      }
      if (!placed) throw ConfigError("datagen: could not place a thing in frame");
      spec.things.push_back(t);
    }
    if (worst_occlusion(spec) <= cfg.max_occlusion) {
      spec.validate();
      return spec;
    }
  }
  throw ConfigError("datagen: could not satisfy max_occlusion; relax it or use fewer things");
}

Clip generate_clip(const SceneSpec& spec, std::size_t num_thing_classes,
                   std::size_t num_stuff_classes) {
  spec.validate();
  for (const auto& b : spec.bands) {
    if (b.class_id < num_thing_classes ||
        b.class_id >= num_thing_classes + num_stuff_classes) {
      throw ConfigError("scene: band class " + std::to_string(b.class_id) +
                        " is not a stuff class");
    }
  }
  for (const auto& t : spec.things) {
    if (t.class_id >= num_thing_classes) {
      throw ConfigError("scene: thing class " + std::to_string(t.class_id) +
                        " is not a thing class");
    }
  }
  Clip clip;
  clip.spec = spec;
  clip.num_thing_classes = num_thing_classes;
  clip.num_stuff_classes = num_stuff_classes;
  const std::size_t nb = spec.bands.size();
  for (std::size_t f = 0; f < spec.frames; ++f) {
    std::mt19937_64 rng(mix(spec.seed, f + 1));
    std::uniform_int_distribution<int> noise(-spec.noise, spec.noise);
    Image img(spec.height, spec.width);
    PanopticFrame ann;
    ann.height = spec.height;
    ann.width = spec.width;
    ann.ids.assign(spec.height * spec.width, kVoidId);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t y = spec.bands[b].top; y < spec.bands[b].bottom; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
          ann.ids[y * spec.width + x] = static_cast<std::uint16_t>(b + 1);
        }
      }
      ann.segments.push_back({static_cast<std::uint16_t>(b + 1), spec.bands[b].class_id,
                              false, 0, 1.0});
    }
    const std::vector<int> owner = thing_owner(spec, f);
    std::vector<std::size_t> area(spec.things.size(), 0);
    for (std::size_t p = 0; p < owner.size(); ++p) {
      if (owner[p] < 0) continue;
      ann.ids[p] = static_cast<std::uint16_t>(nb + 1 + static_cast<std::size_t>(owner[p]));
      ++area[static_cast<std::size_t>(owner[p])];
    }
    for (std::size_t i = 0; i < spec.things.size(); ++i) {
      if (area[i] == 0) continue;
      ann.segments.push_back({static_cast<std::uint16_t>(nb + 1 + i),
                              spec.things[i].class_id, true,
                              static_cast<std::uint32_t>(i + 1), 1.0});
    }
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        const std::size_t p = y * spec.width + x;
        const Color& c = owner[p] >= 0
                             ? spec.things[static_cast<std::size_t>(owner[p])].color
                             : spec.bands[ann.ids[p] - 1].color;
        std::uint8_t* px = img.at(y, x);
        for (int ch = 0; ch < 3; ++ch) px[ch] = clamp_byte(c[ch] + noise(rng));
      }
    }
    clip.frames.push_back(std::move(img));
    clip.annotations.push_back(std::move(ann));
  }
  validate_sequence(clip.annotations);
  return clip;
}

void warp_frame(const Image& image, const PanopticFrame& annotation,
                const FrameTransform& tf, Image& out_image,
                PanopticFrame& out_annotation) {
  if (image.height != annotation.height || image.width != annotation.width) {
    throw ShapeError("warp: image and annotation sizes differ");
  }
  if (!(tf.scale > 0)) throw ConfigError("warp: scale must be positive");
  const std::size_t h = image.height, w = image.width;
  const double cy = 0.5 * static_cast<double>(h), cx = 0.5 * static_cast<double>(w);
  out_image = Image(h, w);
  out_annotation = PanopticFrame{h, w, std::vector<std::uint16_t>(h * w, kVoidId), {}};
  std::set<std::uint16_t> present;
  for (std::size_t y = 0; y < h; ++y) {
    const double ys = (static_cast<double>(y) + 0.5 - cy - tf.ty) / tf.scale + cy - 0.5;
    for (std::size_t x = 0; x < w; ++x) {
      const double xs =
          (static_cast<double>(x) + 0.5 - cx - tf.tx) / tf.scale + cx - 0.5;
      const long yi = static_cast<long>(std::floor(ys + 0.5));
      const long xi = static_cast<long>(std::floor(xs + 0.5));
      if (yi < 0 || xi < 0 || yi >= static_cast<long>(h) || xi >= static_cast<long>(w)) {
        continue;
      }
      const std::uint16_t id =
          annotation.ids[static_cast<std::size_t>(yi) * w + static_cast<std::size_t>(xi)];
      out_annotation.ids[y * w + x] = id;
      if (id != kVoidId) present.insert(id);
      // Bilinear sample with edge clamping.
      const double yc = std::clamp(ys, 0.0, static_cast<double>(h - 1));
      const double xc = std::clamp(xs, 0.0, static_cast<double>(w - 1));
      const std::size_t y0 = static_cast<std::size_t>(std::floor(yc));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(xc));
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = yc - static_cast<double>(y0), fx = xc - static_cast<double>(x0);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - fy) * ((1 - fx) * image.at(y0, x0)[ch] +
                                     fx * image.at(y0, x1)[ch]) +
                         fy * ((1 - fx) * image.at(y1, x0)[ch] + fx * image.at(y1, x1)[ch]);
        out_image.at(y, x)[ch] = clamp_byte(static_cast<int>(std::lround(v)));
      }
    }
  }
  for (const auto& s : annotation.segments) {
    if (present.count(s.id)) out_annotation.segments.push_back(s);
  }
}

void SimulateConfig::validate() const {
  if (frames == 0) throw ConfigError("simulate: frames must be positive");
  if (!(scale_min > 0) || scale_min > scale_max) {
    throw ConfigError("simulate: need 0 < scale_min <= scale_max");
  }
  if (!(translate >= 0)) throw ConfigError("simulate: translate must be >= 0");
}

Clip simulate_clip(const Image& image, const PanopticFrame& annotation,
                   const std::vector<FrameTransform>& transforms) {
  validate_frame(annotation);
  Clip clip;
  clip.spec.height = image.height;
  clip.spec.width = image.width;
  clip.spec.frames = transforms.size();
  for (std::size_t t = 0; t < transforms.size(); ++t) {
    Image img;
    PanopticFrame ann;
    warp_frame(image, annotation, transforms[t], img, ann);
    if (ann.segments.empty()) {
      throw ConfigError("simulate: transform " + std::to_string(t) +
                        " moves all content out of frame");
    }
    clip.frames.push_back(std::move(img));
    clip.annotations.push_back(std::move(ann));
  }
  return clip;
}

Clip simulate_clip_from_image(const Image& image, const PanopticFrame& annotation,
                              const SimulateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix(seed, 0x51A));
  const double s_end = uniform(rng, cfg.scale_min, std::nextafter(cfg.scale_max, 1e9));
  const double lim = cfg.translate * static_cast<double>(image.width);
  const double vx = lim > 0 ? uniform(rng, -lim, lim) : 0.0;
  const double vy = lim > 0 ? uniform(rng, -lim, lim) : 0.0;
  std::vector<FrameTransform> tfs;
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double a = cfg.frames > 1 ? static_cast<double>(t) /
                                          static_cast<double>(cfg.frames - 1)
                                    : 0.0;
    // Identity ranges must reproduce the input exactly.
    const double s = cfg.scale_min == 1.0 && cfg.scale_max == 1.0 ? 1.0
                                                                   : 1.0 + (s_end - 1.0) * a;
    tfs.push_back({s, vx * static_cast<double>(t), vy * static_cast<double>(t)});
  }
  return simulate_clip(image, annotation, tfs);
}

template <typename S>
Tensor<S> image_to_tensor(const Image& image) {
  Tensor<S> t({image.height, image.width, 3});
  for (std::size_t i = 0; i < image.rgb.size(); ++i) {
    t[i] = static_cast<S>(image.rgb[i]) / S(127.5) - S(1);
  }
  return t;
}
template Tensor<float> image_to_tensor<float>(const Image&);
template Tensor<double> image_to_tensor<double>(const Image&);

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  check_stream(out, path, "cannot open for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  check_stream(out, path, "write failed:");
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check_stream(in, path, "cannot open");
  if (header_token(in) != "P6") throw IoError("not a binary P6 file: " + path.string());
  const std::size_t w = header_number(in, path), h = header_number(in, path);
  if (header_number(in, path) != 255) {
    throw IoError("only 8-bit PPM supported: " + path.string());
  }
  Image img(h, w);
  in.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  check_stream(in, path, "truncated PPM");
  return img;
}

void write_pgm16(const std::filesystem::path& path, std::size_t height,
                 std::size_t width, const std::vector<std::uint16_t>& values) {
  if (values.size() != height * width) throw ShapeError("pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  check_stream(out, path, "cannot open for writing");
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<char> buf(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    buf[2 * i] = static_cast<char>(values[i] >> 8);
    buf[2 * i + 1] = static_cast<char>(values[i] & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path, "write failed:");
}

std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path,
                                      std::size_t& height, std::size_t& width) {
  std::ifstream in(path, std::ios::binary);
  check_stream(in, path, "cannot open");
  if (header_token(in) != "P5") throw IoError("not a binary P5 file: " + path.string());
  width = header_number(in, path);
  height = header_number(in, path);
  if (header_number(in, path) != 65535) {
    throw IoError("expected a 16-bit PGM: " + path.string());
  }
  std::vector<unsigned char> buf(height * width * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  check_stream(in, path, "truncated PGM");
  std::vector<std::uint16_t> values(height * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return values;
}

void write_clip(const std::filesystem::path& dir, const Clip& clip) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Json j;
  j["seed"] = clip.spec.seed;
  j["num_thing_classes"] = clip.num_thing_classes;
  j["num_stuff_classes"] = clip.num_stuff_classes;
  j["classes"] = class_table(clip.num_thing_classes, clip.num_stuff_classes);
  j["spec"] = clip.spec;
  j["frames"] = Json::array();
  for (std::size_t t = 0; t < clip.size(); ++t) {
    write_ppm(dir / frame_name("frame", t, "ppm"), clip.frames[t]);
    const auto& a = clip.annotations[t];
    write_pgm16(dir / frame_name("seg", t, "pgm"), a.height, a.width, a.ids);
    j["frames"].push_back({{"segments", a.segments}});
  }
  write_json(dir / "clip.json", j);
}

Clip read_clip(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "clip.json");
  Clip clip;
  try {
    clip.spec = j.at("spec").get<SceneSpec>();
    clip.num_thing_classes = j.at("num_thing_classes").get<std::size_t>();
    clip.num_stuff_classes = j.at("num_stuff_classes").get<std::size_t>();
    const auto& frames = j.at("frames");
    for (std::size_t t = 0; t < frames.size(); ++t) {
      clip.frames.push_back(read_ppm(dir / frame_name("frame", t, "ppm")));
      PanopticFrame a;
      a.ids = read_pgm16(dir / frame_name("seg", t, "pgm"), a.height, a.width);
      a.segments = frames[t].at("segments").get<std::vector<SegmentInfo>>();
      clip.annotations.push_back(std::move(a));
    }
  } catch (const Json::exception& e) {
    throw IoError("malformed clip.json in " + dir.string() + ": " + e.what());
  }
  validate_sequence(clip.annotations);
  return clip;
}

std::vector<DatasetEntry> generate_dataset(const std::filesystem::path& dir,
                                           const GeneratorConfig& cfg,
                                           std::size_t count,
                                           std::uint64_t base_seed) {
  cfg.validate();
  std::vector<DatasetEntry> entries;
  Json manifest;
  manifest["generator"] = cfg;
  manifest["clips"] = Json::array();
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04zu", i);
    DatasetEntry e{name, base_seed + i};
    const Clip clip = generate_clip(sample_scene(cfg, e.seed), cfg.num_thing_classes,
                                    cfg.num_stuff_classes);
    write_clip(dir / e.name, clip);
    manifest["clips"].push_back({{"name", e.name}, {"seed", e.seed}});
    entries.push_back(e);
  }
  write_json(dir / "manifest.json", manifest);
  return entries;
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "manifest.json");
  std::vector<DatasetEntry> entries;
  try {
    for (const auto& c : j.at("clips")) {
      entries.push_back({c.at("name").get<std::string>(), c.at("seed").get<std::uint64_t>()});
    }
  } catch (const Json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return entries;
}

std::vector<Clip> load_dataset(const std::filesystem::path& dir) {
  std::vector<Clip> clips;
  for (const auto& e : read_manifest(dir)) clips.push_back(read_clip(dir / e.name));
  return clips;
}

}  // namespace panoslot
